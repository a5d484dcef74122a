//! Analytic constraint hypersurfaces `N = {φ = 0}` and the geometry of their
//! tubular neighbourhood: nearest-point projection, distance, tangent/normal
//! projectors, the turning bound κ with its radius of curvature `R₀ = 1/κ`,
//! the correction field ζ, and the normal second fundamental form.

use nalgebra::{Matrix3, Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Vec3;

/// Newton iteration cap for the projection.
pub const PROJECTION_MAX_ITERATIONS: usize = 50;

/// Height function of a graph constraint `z = h(x, y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HeightFunction {
    /// `h = c + gx x + gy y + ½ (hxx x² + 2 hxy x y + hyy y²)`
    Quadratic {
        c: f64,
        gx: f64,
        gy: f64,
        hxx: f64,
        hxy: f64,
        hyy: f64,
    },
    /// `h = amplitude · sin(kx x + ky y)`
    Wave { amplitude: f64, kx: f64, ky: f64 },
}

impl HeightFunction {
    fn eval(&self, x: f64, y: f64) -> (f64, [f64; 2], [[f64; 2]; 2]) {
        match *self {
            HeightFunction::Quadratic { c, gx, gy, hxx, hxy, hyy } => (
                c + gx * x + gy * y + 0.5 * (hxx * x * x + 2.0 * hxy * x * y + hyy * y * y),
                [gx + hxx * x + hxy * y, gy + hxy * x + hyy * y],
                [[hxx, hxy], [hxy, hyy]],
            ),
            HeightFunction::Wave { amplitude, kx, ky } => {
                let arg = kx * x + ky * y;
                let (s, c) = arg.sin_cos();
                (
                    amplitude * s,
                    [amplitude * kx * c, amplitude * ky * c],
                    [
                        [-amplitude * kx * kx * s, -amplitude * kx * ky * s],
                        [-amplitude * kx * ky * s, -amplitude * ky * ky * s],
                    ],
                )
            }
        }
    }

    /// Upper bound on the spectral norm of the Hessian of `h`.
    fn hessian_bound(&self) -> f64 {
        match *self {
            HeightFunction::Quadratic { hxx, hxy, hyy, .. } => {
                let m = (0.25 * (hxx - hyy).powi(2) + hxy * hxy).sqrt();
                (0.5 * (hxx + hyy)).abs() + m
            }
            HeightFunction::Wave { amplitude, kx, ky } => amplitude.abs() * (kx * kx + ky * ky),
        }
    }

    fn rescaled(&self, center: &Vec3, lambda: f64) -> HeightFunction {
        // z' = λ(h(x) - y_z) with x = x'/λ + y_xy
        let (cx, cy, cz) = (center.x, center.y, center.z);
        match *self {
            HeightFunction::Quadratic { hxx, hxy, hyy, .. } => {
                let (h0, g, _) = self.eval(cx, cy);
                HeightFunction::Quadratic {
                    c: lambda * (h0 - cz),
                    gx: g[0],
                    gy: g[1],
                    hxx: hxx / lambda,
                    hxy: hxy / lambda,
                    hyy: hyy / lambda,
                }
            }
            HeightFunction::Wave { amplitude, kx, ky } => {
                if cz != 0.0 || kx * cx + ky * cy != 0.0 {
                    // a phase or vertical shift leaves the wave family
                    return HeightFunction::Wave { amplitude: f64::NAN, kx, ky };
                }
                HeightFunction::Wave {
                    amplitude: lambda * amplitude,
                    kx: kx / lambda,
                    ky: ky / lambda,
                }
            }
        }
    }
}

/// Primitive shapes, each with closed-form φ, ∇φ and Hess φ.
#[derive(Clone, Debug, PartialEq)]
pub enum Primitive {
    /// `φ = n · (x - point)`
    Plane { point: Vec3, normal: Vec3 },
    /// `φ = |x - center| - radius`
    Sphere { center: Vec3, radius: f64 },
    /// `φ = Σ ((x_i - c_i)/a_i)² - 1`
    Ellipsoid { center: Vec3, semi_axes: Vec3 },
    /// Axis along z: `φ = (|q|² + R² - r²)² - 4R²(q_x² + q_y²)`, `q = x - center`
    Torus { center: Vec3, major_radius: f64, minor_radius: f64 },
    /// `φ = z - h(x, y)`
    Graph { height: HeightFunction },
}

/// Which side of `N` is the inside region.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inside {
    #[default]
    NegativePhi,
    PositivePhi,
}

/// The constraint hypersurface `N = {φ = 0}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConstraintSpec", into = "ConstraintSpec")]
pub struct LevelSetConstraint {
    pub primitive: Primitive,
    pub inside: Inside,
}

/// Samples of φ and its first two derivatives at a point.
#[derive(Clone, Copy, Debug)]
pub struct Jet {
    pub value: f64,
    pub gradient: Vec3,
    pub hessian: Matrix3<f64>,
}

impl LevelSetConstraint {
    pub fn plane(point: Vec3, normal: Vec3) -> Self {
        LevelSetConstraint {
            primitive: Primitive::Plane {
                point,
                normal: normal.normalize(),
            },
            inside: Inside::NegativePhi,
        }
    }

    pub fn sphere(center: Vec3, radius: f64) -> Self {
        LevelSetConstraint {
            primitive: Primitive::Sphere { center, radius },
            inside: Inside::NegativePhi,
        }
    }

    pub fn unit_sphere() -> Self {
        Self::sphere(Vec3::zeros(), 1.0)
    }

    pub fn ellipsoid(center: Vec3, semi_axes: Vec3) -> Self {
        LevelSetConstraint {
            primitive: Primitive::Ellipsoid { center, semi_axes },
            inside: Inside::NegativePhi,
        }
    }

    pub fn torus(center: Vec3, major_radius: f64, minor_radius: f64) -> Self {
        LevelSetConstraint {
            primitive: Primitive::Torus { center, major_radius, minor_radius },
            inside: Inside::NegativePhi,
        }
    }

    pub fn graph(height: HeightFunction) -> Self {
        LevelSetConstraint {
            primitive: Primitive::Graph { height },
            inside: Inside::NegativePhi,
        }
    }

    pub fn with_inside(mut self, inside: Inside) -> Self {
        self.inside = inside;
        self
    }

    /// Characteristic length used to scale tolerances.
    pub fn scale(&self) -> f64 {
        match &self.primitive {
            Primitive::Plane { .. } | Primitive::Graph { .. } => 1.0,
            Primitive::Sphere { radius, .. } => *radius,
            Primitive::Ellipsoid { semi_axes, .. } => semi_axes.max(),
            Primitive::Torus { major_radius, minor_radius, .. } => major_radius + minor_radius,
        }
    }

    /// Half-width of the tubular band in which projection is well defined.
    pub fn band_width(&self) -> f64 {
        match &self.primitive {
            Primitive::Plane { .. } => f64::INFINITY,
            Primitive::Sphere { radius, .. } => *radius,
            Primitive::Ellipsoid { semi_axes, .. } => semi_axes.min().powi(2) / semi_axes.max(),
            Primitive::Torus { major_radius, minor_radius, .. } => minor_radius.min(major_radius - minor_radius),
            Primitive::Graph { height } => {
                let b = height.hessian_bound();
                if b > 0.0 {
                    1.0 / b
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Closed-form turning bound κ where one is known.
    pub fn analytic_kappa(&self) -> Option<f64> {
        match &self.primitive {
            Primitive::Plane { .. } => Some(0.0),
            Primitive::Sphere { radius, .. } => Some(1.0 / radius),
            Primitive::Graph { height } if height.hessian_bound() == 0.0 => Some(0.0),
            _ => None,
        }
    }

    /// φ, ∇φ and Hess φ at `x`.
    pub fn jet(&self, x: &Vec3) -> Jet {
        match &self.primitive {
            Primitive::Plane { point, normal } => Jet {
                value: normal.dot(&(x - point)),
                gradient: *normal,
                hessian: Matrix3::zeros(),
            },
            Primitive::Sphere { center, radius } => {
                let q = x - center;
                let r = q.norm();
                let u = if r > 0.0 { q / r } else { Vec3::zeros() };
                let hessian = if r > 0.0 {
                    (Matrix3::identity() - u * u.transpose()) / r
                } else {
                    Matrix3::zeros()
                };
                Jet {
                    value: r - radius,
                    gradient: u,
                    hessian,
                }
            }
            Primitive::Ellipsoid { center, semi_axes } => {
                let q = x - center;
                let inv2 = semi_axes.map(|a| 1.0 / (a * a));
                Jet {
                    value: q.component_mul(&q).dot(&inv2) - 1.0,
                    gradient: 2.0 * q.component_mul(&inv2),
                    hessian: Matrix3::from_diagonal(&(2.0 * inv2)),
                }
            }
            Primitive::Torus { center, major_radius, minor_radius } => {
                let q = x - center;
                let (big, small) = (*major_radius, *minor_radius);
                let s = q.norm_squared() + big * big - small * small;
                let flat = Vec3::new(q.x, q.y, 0.0);
                let d = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, 0.0));
                Jet {
                    value: s * s - 4.0 * big * big * (q.x * q.x + q.y * q.y),
                    gradient: 4.0 * s * q - 8.0 * big * big * flat,
                    hessian: 4.0 * s * Matrix3::identity() + 8.0 * q * q.transpose() - 8.0 * big * big * d,
                }
            }
            Primitive::Graph { height } => {
                let (h, g, hh) = height.eval(x.x, x.y);
                let mut hessian = Matrix3::zeros();
                hessian[(0, 0)] = -hh[0][0];
                hessian[(0, 1)] = -hh[0][1];
                hessian[(1, 0)] = -hh[1][0];
                hessian[(1, 1)] = -hh[1][1];
                Jet {
                    value: x.z - h,
                    gradient: Vec3::new(-g[0], -g[1], 1.0),
                    hessian,
                }
            }
        }
    }

    pub fn phi(&self, x: &Vec3) -> f64 {
        self.jet(x).value
    }

    pub fn gradient(&self, x: &Vec3) -> Vec3 {
        self.jet(x).gradient
    }

    /// Unit normal `∇φ/|∇φ|`, pointing towards increasing φ.
    pub fn unit_normal(&self, p: &Vec3) -> Result<Vec3> {
        let g = self.gradient(p);
        let n = g.norm();
        if !(n > self.gradient_floor()) {
            return Err(Error::GradientVanishes([p.x, p.y, p.z]));
        }
        Ok(g / n)
    }

    /// `|φ(x)| / |∇φ(x)|`, the first-order distance estimate.
    pub fn level_offset(&self, x: &Vec3) -> f64 {
        let j = self.jet(x);
        let g = j.gradient.norm();
        if g > 0.0 {
            j.value.abs() / g
        } else {
            f64::INFINITY
        }
    }

    /// Whether the band width bounds points on the side of `N` with this
    /// sign of φ. Outside a sphere or ellipsoid and on either side of a
    /// plane the nearest point is unique at any distance.
    fn band_limits(&self, phi: f64) -> bool {
        match &self.primitive {
            Primitive::Plane { .. } => false,
            Primitive::Sphere { .. } | Primitive::Ellipsoid { .. } => phi < 0.0,
            Primitive::Torus { .. } | Primitive::Graph { .. } => true,
        }
    }

    fn gradient_floor(&self) -> f64 {
        1e-12 * self.gradient_scale()
    }

    fn gradient_scale(&self) -> f64 {
        match &self.primitive {
            Primitive::Ellipsoid { semi_axes, .. } => 1.0 / semi_axes.min(),
            Primitive::Torus { major_radius, minor_radius, .. } => {
                major_radius * minor_radius.powi(2)
            }
            _ => 1.0,
        }
    }

    /// Nearest point projection ξ(x) onto `N`.
    ///
    /// Damped Newton on the Lagrange system `x − p = λ∇φ(p)`, `φ(p) = 0`,
    /// started from one gradient step `x − φ∇φ/|∇φ|²`.
    pub fn project(&self, x: &Vec3) -> Result<Vec3> {
        let scale = self.scale();
        let band = self.band_width();
        let outside = |why: String| Error::OutsideTubularNeighborhood(why);

        let j0 = self.jet(x);
        let g0 = j0.gradient.norm_squared();
        if !(g0.sqrt() > self.gradient_floor()) {
            return Err(outside(format!("gradient vanishes at {:?}", [x.x, x.y, x.z])));
        }
        if self.band_limits(j0.value) && j0.value.abs() / g0.sqrt() > 2.0 * band {
            return Err(outside(format!("point {:?} far outside band {band}", [x.x, x.y, x.z])));
        }
        let mut p = x - j0.value * j0.gradient / g0;
        let jp = self.jet(&p);
        let mut lambda = (x - p).dot(&jp.gradient) / jp.gradient.norm_squared().max(f64::MIN_POSITIVE);

        let residual = |p: &Vec3, lambda: f64| -> (Vector4<f64>, Jet) {
            let j = self.jet(p);
            let r = p - x + lambda * j.gradient;
            (Vector4::new(r.x, r.y, r.z, j.value / j.gradient.norm().max(f64::MIN_POSITIVE)), j)
        };

        let tol = 1e-13 * scale;
        let (mut res, mut jet) = residual(&p, lambda);
        let mut converged = false;
        for _ in 0..PROJECTION_MAX_ITERATIONS {
            if res.norm() <= tol {
                converged = true;
                break;
            }
            let gn = jet.gradient.norm();
            let mut jac = Matrix4::zeros();
            let top = Matrix3::identity() + lambda * jet.hessian;
            jac.fixed_view_mut::<3, 3>(0, 0).copy_from(&top);
            for k in 0..3 {
                jac[(k, 3)] = jet.gradient[k];
                jac[(3, k)] = jet.gradient[k] / gn;
            }
            let Some(step) = jac.lu().solve(&(-res)) else {
                break;
            };
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let cand = p + alpha * Vec3::new(step[0], step[1], step[2]);
                let cand_lambda = lambda + alpha * step[3];
                let (r, j) = residual(&cand, cand_lambda);
                if r.norm() < res.norm() {
                    p = cand;
                    lambda = cand_lambda;
                    res = r;
                    jet = j;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                // stalled at round-off
                converged = res.norm() <= 1e-10 * scale;
                break;
            }
        }
        if !converged && res.norm() > 1e-10 * scale {
            return Err(outside(format!(
                "Newton projection did not converge in {PROJECTION_MAX_ITERATIONS} steps from {:?}",
                [x.x, x.y, x.z]
            )));
        }
        let dist = (x - p).norm();
        if self.band_limits(j0.value) && dist >= band {
            return Err(outside(format!("distance {dist} exceeds band {band}")));
        }
        Ok(p)
    }

    /// Euclidean distance ρ(x) = |x − ξ(x)|.
    pub fn distance(&self, x: &Vec3) -> Result<f64> {
        Ok((x - self.project(x)?).norm())
    }

    /// Distance from `x` to `N`, also where the nearest point is not unique
    /// (the centre of a sphere). Exact for planes and spheres, otherwise
    /// [`distance`](Self::distance).
    pub fn clearance(&self, x: &Vec3) -> Result<f64> {
        match &self.primitive {
            Primitive::Plane { .. } | Primitive::Sphere { .. } => Ok(self.phi(x).abs()),
            _ => self.distance(x),
        }
    }

    /// Distance signed by the side of `N` (positive where φ > 0).
    pub fn signed_distance(&self, x: &Vec3) -> Result<f64> {
        let p = self.project(x)?;
        let n = self.unit_normal(&p)?;
        Ok((x - p).dot(&n))
    }

    /// Orthogonal projectors `(τ(p), ν(p))` onto `T_pN` and its complement.
    pub fn projectors(&self, p: &Vec3) -> Result<(Matrix3<f64>, Matrix3<f64>)> {
        let n = self.unit_normal(p)?;
        let nu = n * n.transpose();
        Ok((Matrix3::identity() - nu, nu))
    }

    /// `ζ_p(x) = −ν(ξ(x)) (ξ(x) − p)`.
    pub fn zeta(&self, base: &Vec3, x: &Vec3) -> Result<Vec3> {
        let xi = self.project(x)?;
        let (_, nu) = self.projectors(&xi)?;
        Ok(-(nu * (xi - base)))
    }

    /// `A^N(v, v)` at `p ∈ N` for a unit tangent `v`, signed so that the
    /// boundary of a convex inside region is nonnegative (unit sphere: +1).
    pub fn normal_second_form(&self, p: &Vec3, v: &Vec3) -> Result<f64> {
        let jet = self.jet(p);
        let g = jet.gradient.norm();
        if !(g > self.gradient_floor()) {
            return Err(Error::GradientVanishes([p.x, p.y, p.z]));
        }
        if jet.value.abs() / g > 1e-10 * self.scale() {
            return Err(Error::Precondition(format!("point off constraint by {:e}", jet.value.abs() / g)));
        }
        let n = jet.gradient / g;
        if (v.norm() - 1.0).abs() > 1e-8 || n.dot(v).abs() > 1e-8 {
            return Err(Error::Precondition("direction is not a unit tangent vector".into()));
        }
        let sign = match self.inside {
            Inside::NegativePhi => 1.0,
            Inside::PositivePhi => -1.0,
        };
        Ok(sign * v.dot(&(jet.hessian * v)) / g)
    }

    /// Image under `z ↦ λ(z − center)`.
    pub fn rescaled(&self, center: &Vec3, lambda: f64) -> Result<LevelSetConstraint> {
        if !(lambda > 0.0) {
            return Err(Error::Precondition(format!("rescale factor must be positive, got {lambda}")));
        }
        let map = |p: &Vec3| lambda * (p - center);
        let primitive = match &self.primitive {
            Primitive::Plane { point, normal } => Primitive::Plane { point: map(point), normal: *normal },
            Primitive::Sphere { center: c, radius } => Primitive::Sphere { center: map(c), radius: lambda * radius },
            Primitive::Ellipsoid { center: c, semi_axes } => Primitive::Ellipsoid {
                center: map(c),
                semi_axes: lambda * semi_axes,
            },
            Primitive::Torus { center: c, major_radius, minor_radius } => Primitive::Torus {
                center: map(c),
                major_radius: lambda * major_radius,
                minor_radius: lambda * minor_radius,
            },
            Primitive::Graph { height } => {
                let h = height.rescaled(center, lambda);
                if let HeightFunction::Wave { amplitude, .. } = h {
                    if amplitude.is_nan() {
                        return Err(Error::UnsupportedTransform("rescale (wave graph off its phase origin)"));
                    }
                }
                Primitive::Graph { height: h }
            }
        };
        Ok(LevelSetConstraint { primitive, inside: self.inside })
    }

    /// Image under the rigid motion `x ↦ rotation · x + translation`.
    /// Only rotation-invariant primitive families are supported.
    pub fn rigidly_moved(&self, rotation: &Matrix3<f64>, translation: &Vec3) -> Result<LevelSetConstraint> {
        let primitive = match &self.primitive {
            Primitive::Plane { point, normal } => Primitive::Plane {
                point: rotation * point + translation,
                normal: rotation * normal,
            },
            Primitive::Sphere { center, radius } => Primitive::Sphere {
                center: rotation * center + translation,
                radius: *radius,
            },
            _ => return Err(Error::UnsupportedTransform("rigid motion")),
        };
        Ok(LevelSetConstraint { primitive, inside: self.inside })
    }

    /// Turning bound: `R₀ = 1/κ` using the analytic κ when available,
    /// otherwise a seeded sampling estimate over the given region.
    pub fn radius_of_curvature(&self, region: (Vec3, f64), seed: u64) -> Result<f64> {
        let kappa = match self.analytic_kappa() {
            Some(k) => k,
            None => estimate_kappa(self, region, 20_000, seed)?.kappa,
        };
        Ok(if kappa > 0.0 { 1.0 / kappa } else { f64::INFINITY })
    }
}

/// Sampled turning bound of `N`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TurningBound {
    /// Sup over sampled pairs of `2|ν(x)(y − x)| / |y − x|²`: a lower
    /// estimate of the true κ.
    pub kappa: f64,
    pub radius_r0: f64,
    pub sample_count: usize,
    pub max_witness: Option<([f64; 3], [f64; 3])>,
    /// Closed-form κ when the primitive has one.
    pub analytic: Option<f64>,
}

/// Seeded sampling estimate of κ over point pairs of `N ∩ region`.
///
/// The pair stream depends only on the seed, so increasing `sample_count`
/// extends the same sequence and the estimate never decreases.
pub fn estimate_kappa(
    constraint: &LevelSetConstraint,
    region: (Vec3, f64),
    sample_count: usize,
    seed: u64,
) -> Result<TurningBound> {
    let (center, radius) = region;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_attempts = 100 * sample_count.max(1);
    let mut attempts = 0;
    let mut draw = |rng: &mut ChaCha8Rng| -> Option<Vec3> {
        while attempts < max_attempts {
            attempts += 1;
            let q = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if q.norm_squared() > 1.0 {
                continue;
            }
            let x = center + radius * q;
            if let Ok(p) = constraint.project(&x) {
                if (p - center).norm() < radius {
                    return Some(p);
                }
            }
        }
        None
    };

    let mut kappa = 0.0_f64;
    let mut witness = None;
    let mut pairs = 0;
    let min_sep = 1e-3 * radius;
    while pairs < sample_count {
        let (Some(x), Some(y)) = (draw(&mut rng), draw(&mut rng)) else {
            break;
        };
        let d = y - x;
        let d2 = d.norm_squared();
        if d2.sqrt() < min_sep {
            continue;
        }
        pairs += 1;
        let n = constraint.unit_normal(&x)?;
        // discount the samples' offset from N and rounding in n·d so the
        // estimate stays below the true sup
        let slack = constraint.level_offset(&x) + constraint.level_offset(&y) + 8.0 * f64::EPSILON * (x.norm() + y.norm());
        let ratio = (2.0 * (n.dot(&d).abs() - slack) / d2).max(0.0);
        if ratio > kappa || witness.is_none() {
            kappa = kappa.max(ratio);
            witness = Some(([x.x, x.y, x.z], [y.x, y.y, y.z]));
        }
    }
    if pairs == 0 {
        return Err(Error::NoSurfaceSamples);
    }
    Ok(TurningBound {
        kappa,
        radius_r0: if kappa > 0.0 { 1.0 / kappa } else { f64::INFINITY },
        sample_count: pairs,
        max_witness: witness,
        analytic: constraint.analytic_kappa(),
    })
}

/// `γ = R₀ / (2 (R₀ − s)²)`; with `s = R₀/2` this is `2/R₀`. Zero when `R₀ = ∞`.
pub fn zeta_gamma(r0: f64, s: f64) -> f64 {
    if r0.is_infinite() {
        0.0
    } else {
        r0 / (2.0 * (r0 - s).powi(2))
    }
}

// JSON representation: {"type": "sphere", "center": [..], "radius": 1.0, "inside": "negative_phi"}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum ConstraintSpec {
    Plane {
        point: [f64; 3],
        normal: [f64; 3],
        #[serde(default)]
        inside: Inside,
    },
    Sphere {
        center: [f64; 3],
        radius: f64,
        #[serde(default)]
        inside: Inside,
    },
    Ellipsoid {
        center: [f64; 3],
        semi_axes: [f64; 3],
        #[serde(default)]
        inside: Inside,
    },
    Torus {
        center: [f64; 3],
        major_radius: f64,
        minor_radius: f64,
        #[serde(default)]
        inside: Inside,
    },
    Graph {
        height: HeightFunction,
        #[serde(default)]
        inside: Inside,
    },
}

impl TryFrom<ConstraintSpec> for LevelSetConstraint {
    type Error = String;

    fn try_from(spec: ConstraintSpec) -> std::result::Result<Self, String> {
        let v = |a: [f64; 3]| Vec3::new(a[0], a[1], a[2]);
        let (primitive, inside) = match spec {
            ConstraintSpec::Plane { point, normal, inside } => {
                let n = v(normal);
                if !(n.norm() > 0.0) {
                    return Err("plane normal must be nonzero".into());
                }
                (Primitive::Plane { point: v(point), normal: n.normalize() }, inside)
            }
            ConstraintSpec::Sphere { center, radius, inside } => {
                if !(radius > 0.0) {
                    return Err("sphere radius must be positive".into());
                }
                (Primitive::Sphere { center: v(center), radius }, inside)
            }
            ConstraintSpec::Ellipsoid { center, semi_axes, inside } => {
                if semi_axes.iter().any(|a| !(*a > 0.0)) {
                    return Err("ellipsoid semi-axes must be positive".into());
                }
                (Primitive::Ellipsoid { center: v(center), semi_axes: v(semi_axes) }, inside)
            }
            ConstraintSpec::Torus { center, major_radius, minor_radius, inside } => {
                if !(minor_radius > 0.0 && major_radius > minor_radius) {
                    return Err("torus needs 0 < minor_radius < major_radius".into());
                }
                (Primitive::Torus { center: v(center), major_radius, minor_radius }, inside)
            }
            ConstraintSpec::Graph { height, inside } => (Primitive::Graph { height }, inside),
        };
        Ok(LevelSetConstraint { primitive, inside })
    }
}

impl From<LevelSetConstraint> for ConstraintSpec {
    fn from(c: LevelSetConstraint) -> Self {
        let a = |p: Vec3| [p.x, p.y, p.z];
        let inside = c.inside;
        match c.primitive {
            Primitive::Plane { point, normal } => ConstraintSpec::Plane { point: a(point), normal: a(normal), inside },
            Primitive::Sphere { center, radius } => ConstraintSpec::Sphere { center: a(center), radius, inside },
            Primitive::Ellipsoid { center, semi_axes } => ConstraintSpec::Ellipsoid {
                center: a(center),
                semi_axes: a(semi_axes),
                inside,
            },
            Primitive::Torus { center, major_radius, minor_radius } => ConstraintSpec::Torus {
                center: a(center),
                major_radius,
                minor_radius,
                inside,
            },
            Primitive::Graph { height } => ConstraintSpec::Graph { height, inside },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane_x() -> LevelSetConstraint {
        LevelSetConstraint::plane(Vec3::zeros(), Vec3::x())
    }

    #[test]
    fn plane_projection_and_distance() {
        let x = Vec3::new(0.3, 1.0, 2.0);
        assert_eq!(plane_x().project(&x).unwrap(), Vec3::new(0.0, 1.0, 2.0));
        assert!((plane_x().distance(&x).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn sphere_projection_examples() {
        let s = LevelSetConstraint::unit_sphere();
        assert_eq!(s.project(&Vec3::new(2.0, 0.0, 0.0)).unwrap(), Vec3::new(1.0, 0.0, 0.0));
        let p = s.project(&(1.1 * Vec3::new(0.6, 0.8, 0.0))).unwrap();
        assert!((p - Vec3::new(0.6, 0.8, 0.0)).norm() < 1e-14);
        assert!((s.distance(&Vec3::new(2.0, 0.0, 0.0)).unwrap() - 1.0).abs() < 1e-15);
        assert!((s.distance(&Vec3::new(0.0, 0.0, 0.25)).unwrap() - 0.75).abs() < 1e-14);
    }

    #[test]
    fn projection_of_centre_is_rejected() {
        let err = LevelSetConstraint::unit_sphere().project(&Vec3::zeros()).unwrap_err();
        assert!(matches!(err, Error::OutsideTubularNeighborhood(_)));
    }

    #[test]
    fn projection_lands_on_the_surface_for_every_primitive() {
        let cases = [
            (LevelSetConstraint::ellipsoid(Vec3::zeros(), Vec3::new(1.0, 1.5, 2.0)), Vec3::new(0.9, 0.3, 0.5)),
            (LevelSetConstraint::torus(Vec3::zeros(), 2.0, 0.5), Vec3::new(2.3, 0.4, 0.2)),
            (
                LevelSetConstraint::graph(HeightFunction::Quadratic {
                    c: 0.1,
                    gx: 0.2,
                    gy: 0.0,
                    hxx: 0.5,
                    hxy: 0.1,
                    hyy: -0.3,
                }),
                Vec3::new(0.3, -0.2, 0.4),
            ),
            (
                LevelSetConstraint::graph(HeightFunction::Wave { amplitude: 0.1, kx: 2.0, ky: 1.0 }),
                Vec3::new(0.3, -0.2, 0.3),
            ),
        ];
        for (c, x) in cases {
            let p = c.project(&x).unwrap();
            assert!(c.level_offset(&p) < 1e-12 * c.scale(), "{:?}", c.primitive);
            let n = c.unit_normal(&p).unwrap();
            let d = x - p;
            assert!((d - n * n.dot(&d)).norm() < 1e-10, "{:?}", c.primitive);
            let again = c.project(&p).unwrap();
            assert!((again - p).norm() < 1e-10);
        }
    }

    #[test]
    fn projector_examples() {
        let (tau, nu) = plane_x().projectors(&Vec3::new(0.0, 3.0, -1.0)).unwrap();
        assert_eq!(nu, Matrix3::from_diagonal(&Vec3::new(1.0, 0.0, 0.0)));
        assert_eq!(tau, Matrix3::from_diagonal(&Vec3::new(0.0, 1.0, 1.0)));
        let s = LevelSetConstraint::unit_sphere();
        let (_, nu) = s.projectors(&Vec3::x()).unwrap();
        assert_eq!(nu, Matrix3::from_diagonal(&Vec3::new(1.0, 0.0, 0.0)));
        let p = Vec3::new(0.6, 0.8, 0.0);
        let (tau, nu) = s.projectors(&p).unwrap();
        assert!((nu * p - p).norm() < 1e-15);
        assert!((tau * p).norm() < 1e-15);
    }

    #[test]
    fn zeta_examples() {
        let z = plane_x().zeta(&Vec3::zeros(), &Vec3::new(0.2, 0.5, -0.3)).unwrap();
        assert_eq!(z, Vec3::zeros());

        let s = LevelSetConstraint::unit_sphere();
        let th = 0.2_f64;
        let x = Vec3::new(th.cos(), th.sin(), 0.0);
        // ν(x)(x − p) = x (1 − cos θ) on the unit sphere
        let expected = (th.cos() - 1.0) * x;
        let z = s.zeta(&Vec3::x(), &x).unwrap();
        assert!((z - expected).norm() < 1e-15);
        assert!((z.norm() - 2.0 * (th / 2.0).sin().powi(2)).abs() < 1e-15);
        assert!((z.norm() - 0.019933).abs() < 1e-6);
        let z2 = s.zeta(&Vec3::x(), &(1.05 * x)).unwrap();
        assert!((z2 - z).norm() < 1e-15);
    }

    #[test]
    fn kappa_examples() {
        let plane = estimate_kappa(&plane_x(), (Vec3::zeros(), 1.0), 500, 1).unwrap();
        assert_eq!(plane.kappa, 0.0);
        let unit = estimate_kappa(&LevelSetConstraint::unit_sphere(), (Vec3::zeros(), 2.0), 10_000, 7).unwrap();
        assert!(unit.kappa >= 0.98 && unit.kappa <= 1.0, "{}", unit.kappa);
        let two = estimate_kappa(&LevelSetConstraint::sphere(Vec3::zeros(), 2.0), (Vec3::zeros(), 3.0), 10_000, 7).unwrap();
        assert!(two.kappa >= 0.49 && two.kappa <= 0.5, "{}", two.kappa);
        assert!((two.radius_r0 * two.kappa - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kappa_is_monotone_in_sample_count() {
        let e = LevelSetConstraint::ellipsoid(Vec3::zeros(), Vec3::new(1.0, 1.5, 2.0));
        let mut last = 0.0;
        for n in [100, 400, 1600] {
            let k = estimate_kappa(&e, (Vec3::zeros(), 2.5), n, 11).unwrap().kappa;
            assert!(k >= last);
            last = k;
        }
    }

    #[test]
    fn empty_region_has_no_samples() {
        let err = estimate_kappa(&LevelSetConstraint::unit_sphere(), (Vec3::new(5.0, 0.0, 0.0), 0.5), 100, 1).unwrap_err();
        assert!(matches!(err, Error::NoSurfaceSamples));
    }

    #[test]
    fn normal_second_form_examples() {
        assert_eq!(plane_x().normal_second_form(&Vec3::zeros(), &Vec3::y()).unwrap(), 0.0);
        let unit = LevelSetConstraint::unit_sphere();
        assert!((unit.normal_second_form(&Vec3::x(), &Vec3::y()).unwrap() - 1.0).abs() < 1e-15);
        let two = LevelSetConstraint::sphere(Vec3::zeros(), 2.0);
        assert!((two.normal_second_form(&Vec3::new(2.0, 0.0, 0.0), &Vec3::z()).unwrap() - 0.5).abs() < 1e-15);
        let outside = unit.clone().with_inside(Inside::PositivePhi);
        assert!((outside.normal_second_form(&Vec3::x(), &Vec3::y()).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let text = r#"{"type":"sphere","center":[0,0,0],"radius":1.0,"inside":"negative_phi"}"#;
        let c: LevelSetConstraint = serde_json::from_str(text).unwrap();
        assert_eq!(c, LevelSetConstraint::unit_sphere());
        let back: LevelSetConstraint = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<LevelSetConstraint>(r#"{"type":"sphere","center":[0,0,0],"radius":1.0,"colour":1}"#).is_err());
        assert!(serde_json::from_str::<LevelSetConstraint>(r#"{"type":"sphere","center":[0,0,0],"radius":-1.0}"#).is_err());
    }

    #[test]
    fn rescale_sphere_halves_kappa() {
        let c = LevelSetConstraint::unit_sphere().rescaled(&Vec3::zeros(), 2.0).unwrap();
        assert_eq!(c, LevelSetConstraint::sphere(Vec3::zeros(), 2.0));
        let k = estimate_kappa(&c, (Vec3::zeros(), 3.0), 2000, 3).unwrap().kappa;
        assert!((k - 0.5).abs() < 0.01);
    }

    #[test]
    fn rescaled_graph_is_the_image() {
        let g = LevelSetConstraint::graph(HeightFunction::Quadratic {
            c: 0.1,
            gx: 0.2,
            gy: -0.1,
            hxx: 0.5,
            hxy: 0.1,
            hyy: -0.3,
        });
        let y = Vec3::new(0.2, -0.1, 0.05);
        let r = g.rescaled(&y, 3.0).unwrap();
        for p in [Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.3, 0.4, 0.0), Vec3::new(-0.5, 0.1, 0.0)] {
            let on = Vec3::new(p.x, p.y, p.z - g.phi(&p));
            assert!(g.phi(&on).abs() < 1e-14);
            assert!(r.phi(&(3.0 * (on - y))).abs() < 1e-12);
        }
    }
}
