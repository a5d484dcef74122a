//! Weighted density ratios at free boundary points and the monotonicity
//! inequality
//!
//! `e^{Λ₁σ} M(σ)/σ^k ≤ e^{Λ₁ρ} M(ρ)/ρ^k − ∫_{σ<r<ρ} e^{Λ₁r} |∇⊥_S r|² / ((1+γr) r^k)`
//!
//! for surfaces (`k = 2`) and planar curves (`k = 1`), with `γ = 2/R₀` and
//! `Λ₁ = k(Λ + 3γ)`.

use serde::Serialize;

use crate::constraint::{zeta_gamma, LevelSetConstraint};
use crate::error::{Error, Result};
use crate::mesh::{face_normal, TriangleMesh, Vec3};

/// Clipping resolution relative to the smallest radius of a query.
pub const CLIP_RESOLUTION: f64 = 1e-3;

/// Default relative slack of monotonicity checks.
pub const DEFAULT_SLACK: f64 = 0.02;

/// Sub-intervals per clipped segment in curve quadrature.
const CURVE_QUADRATURE: usize = 512;

/// Mass of a piece of `Σ` inside an open ball.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BallMass {
    pub radius: f64,
    pub mass: f64,
    /// Elements cut by the sphere `∂B`.
    pub clipped_triangle_count: usize,
    /// Total size of the finest cells that straddle `∂B` (an upper bound on
    /// the classification error).
    pub error_bound: f64,
}

/// A `k`-dimensional simplicial complex whose measure can be restricted to balls.
pub trait Rectifiable {
    fn dimension(&self) -> usize;

    /// Mass inside `B(p, r)`, resolving cut elements down to `resolution`.
    fn ball_mass(&self, p: &Vec3, r: f64, resolution: f64) -> BallMass;

    /// `∫ e^{Λ₁ r} |∇⊥_S r|² / ((1 + γ r) r^k)` over the annulus `σ < r < ρ`.
    fn deficit(&self, p: &Vec3, sigma: f64, rho: f64, weights: &DensityConstants, resolution: f64) -> f64;
}

/// Polygonal curve, stored in ℝ³ (planar curves use `z = 0`).
#[derive(Clone, Debug, PartialEq)]
pub struct Polyline {
    pub points: Vec<Vec3>,
}

impl Polyline {
    pub fn new(points: Vec<Vec3>) -> Self {
        Polyline { points }
    }

    pub fn planar(points: &[[f64; 2]]) -> Self {
        Polyline {
            points: points.iter().map(|q| Vec3::new(q[0], q[1], 0.0)).collect(),
        }
    }

    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }
}

/// Parameter interval of `a + s(b − a)`, `s ∈ [0, 1]`, inside the open ball.
fn segment_ball_interval(a: &Vec3, b: &Vec3, p: &Vec3, r: f64) -> Option<(f64, f64)> {
    let d = b - a;
    let f = a - p;
    let qa = d.norm_squared();
    if qa == 0.0 {
        return None;
    }
    let qb = 2.0 * f.dot(&d);
    let qc = f.norm_squared() - r * r;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc <= 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let lo = ((-qb - sq) / (2.0 * qa)).max(0.0);
    let hi = ((-qb + sq) / (2.0 * qa)).min(1.0);
    (hi > lo).then_some((lo, hi))
}

impl Rectifiable for Polyline {
    fn dimension(&self) -> usize {
        1
    }

    fn ball_mass(&self, p: &Vec3, r: f64, _resolution: f64) -> BallMass {
        let mut mass = 0.0;
        let mut clipped = 0;
        for w in self.points.windows(2) {
            if let Some((lo, hi)) = segment_ball_interval(&w[0], &w[1], p, r) {
                mass += (hi - lo) * (w[1] - w[0]).norm();
                if lo > 0.0 || hi < 1.0 {
                    clipped += 1;
                }
            }
        }
        BallMass {
            radius: r,
            mass,
            clipped_triangle_count: clipped,
            error_bound: 0.0,
        }
    }

    fn deficit(&self, p: &Vec3, sigma: f64, rho: f64, weights: &DensityConstants, _resolution: f64) -> f64 {
        let mut total = 0.0;
        for w in self.points.windows(2) {
            let (a, b) = (w[0], w[1]);
            let len = (b - a).norm();
            if len == 0.0 {
                continue;
            }
            let u = (b - a) / len;
            let Some((lo, hi)) = segment_ball_interval(&a, &b, p, rho) else { continue };
            let inner = segment_ball_interval(&a, &b, p, sigma);
            let pieces = match inner {
                None => vec![(lo, hi)],
                Some((ilo, ihi)) => vec![(lo, ilo.max(lo)), (ihi.min(hi), hi)],
            };
            for (s0, s1) in pieces {
                if s1 <= s0 {
                    continue;
                }
                let ds = (s1 - s0) / CURVE_QUADRATURE as f64;
                for q in 0..CURVE_QUADRATURE {
                    let s = s0 + (q as f64 + 0.5) * ds;
                    let x = a + s * (b - a);
                    let d = x - p;
                    let r = d.norm();
                    if r == 0.0 {
                        continue;
                    }
                    let along = d.dot(&u) / r;
                    let perp = (1.0 - along * along).max(0.0);
                    total += weights.deficit_weight(r) * perp * ds * len;
                }
            }
        }
        total
    }
}

/// Closest distance from `p` to the triangle `abc`.
fn triangle_distance(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm();
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (p - (a + v * ab)).norm();
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (p - (a + w * ac)).norm();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (p - (b + w * (c - b))).norm();
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (p - (a + ab * v + ac * w)).norm()
}

fn tri_area(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

fn longest_edge(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    (b - a).norm().max((c - b).norm()).max((a - c).norm())
}

struct Clip {
    mass: f64,
    error: f64,
}

fn clip_triangle(t: [Vec3; 3], p: &Vec3, r: f64, resolution: f64, acc: &mut Clip) {
    let [a, b, c] = t;
    let far = (a - p).norm().max((b - p).norm()).max((c - p).norm());
    if far < r {
        acc.mass += tri_area(&a, &b, &c);
        return;
    }
    if triangle_distance(p, &a, &b, &c) >= r {
        return;
    }
    if longest_edge(&a, &b, &c) < resolution {
        let area = tri_area(&a, &b, &c);
        if ((a + b + c) / 3.0 - p).norm() < r {
            acc.mass += area;
        }
        acc.error += area;
        return;
    }
    for child in subdivide(a, b, c) {
        clip_triangle(child, p, r, resolution, acc);
    }
}

fn subdivide(a: Vec3, b: Vec3, c: Vec3) -> [[Vec3; 3]; 4] {
    let ab = 0.5 * (a + b);
    let bc = 0.5 * (b + c);
    let ca = 0.5 * (c + a);
    [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]
}

#[allow(clippy::too_many_arguments)]
fn deficit_triangle(
    t: [Vec3; 3],
    normal: &Vec3,
    p: &Vec3,
    sigma: f64,
    rho: f64,
    weights: &DensityConstants,
    quadrature: f64,
    resolution: f64,
) -> f64 {
    let [a, b, c] = t;
    let far = (a - p).norm().max((b - p).norm()).max((c - p).norm());
    if far <= sigma {
        return 0.0;
    }
    let near = triangle_distance(p, &a, &b, &c);
    if near >= rho {
        return 0.0;
    }
    let longest = longest_edge(&a, &b, &c);
    let inside = near >= sigma && far < rho;
    if (inside && longest <= quadrature) || longest < resolution {
        let g = (a + b + c) / 3.0;
        let d = g - p;
        let r = d.norm();
        if r <= sigma || r >= rho {
            return 0.0;
        }
        let off = d.dot(normal) / r;
        return weights.deficit_weight(r) * off * off * tri_area(&a, &b, &c);
    }
    subdivide(a, b, c)
        .into_iter()
        .map(|child| deficit_triangle(child, normal, p, sigma, rho, weights, quadrature, resolution))
        .sum()
}

impl Rectifiable for TriangleMesh {
    fn dimension(&self) -> usize {
        2
    }

    fn ball_mass(&self, p: &Vec3, r: f64, resolution: f64) -> BallMass {
        let v = self.vertices();
        let mut acc = Clip { mass: 0.0, error: 0.0 };
        let mut clipped = 0;
        for f in self.faces() {
            let t = [v[f[0]], v[f[1]], v[f[2]]];
            let far = t.iter().map(|x| (x - p).norm()).fold(0.0, f64::max);
            if far >= r && triangle_distance(p, &t[0], &t[1], &t[2]) < r {
                clipped += 1;
            }
            clip_triangle(t, p, r, resolution, &mut acc);
        }
        BallMass {
            radius: r,
            mass: acc.mass,
            clipped_triangle_count: clipped,
            error_bound: acc.error,
        }
    }

    fn deficit(&self, p: &Vec3, sigma: f64, rho: f64, weights: &DensityConstants, resolution: f64) -> f64 {
        let v = self.vertices();
        let quadrature = sigma / 8.0;
        self.faces()
            .iter()
            .map(|f| {
                let n = face_normal(v, f);
                deficit_triangle([v[f[0]], v[f[1]], v[f[2]]], &n, p, sigma, rho, weights, quadrature, resolution)
            })
            .sum()
    }
}

/// Mass of `Σ ∩ B(p, r)` at resolution `r · 1e-3`.
pub fn mass_in_ball(measure: &impl Rectifiable, p: &Vec3, r: f64) -> Result<BallMass> {
    if !(r > 0.0) {
        return Err(Error::Precondition(format!("radius must be positive, got {r}")));
    }
    Ok(measure.ball_mass(p, r, r * CLIP_RESOLUTION))
}

/// Deficit between radii `sigma < rho` for explicit weights `Λ₁` and `γ`.
pub fn deficit_integral(
    measure: &impl Rectifiable,
    p: &Vec3,
    sigma: f64,
    rho: f64,
    lambda1: f64,
    gamma: f64,
) -> Result<f64> {
    if !(sigma > 0.0 && rho > sigma) {
        return Err(Error::Precondition(format!("need 0 < sigma < rho, got {sigma}, {rho}")));
    }
    let weights = DensityConstants {
        k: measure.dimension(),
        lambda: 0.0,
        gamma,
        lambda1,
        r0: f64::INFINITY,
    };
    Ok(measure.deficit(p, sigma, rho, &weights, sigma * CLIP_RESOLUTION))
}

/// Constants of the weighted density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DensityConstants {
    pub k: usize,
    /// Ambient curvature bound, zero in Euclidean space.
    pub lambda: f64,
    pub gamma: f64,
    pub lambda1: f64,
    /// Radius of curvature of the constraint (`∞` when flat).
    pub r0: f64,
}

impl DensityConstants {
    /// `γ = 2/R₀` and `Λ₁ = k(Λ + 3γ)`.
    pub fn new(k: usize, lambda: f64, r0: f64) -> Self {
        let gamma = zeta_gamma(r0, 0.5 * r0);
        DensityConstants {
            k,
            lambda,
            gamma,
            lambda1: k as f64 * (lambda + 3.0 * gamma),
            r0,
        }
    }

    /// All weights off: the classical interior ratio.
    pub fn interior(k: usize) -> Self {
        DensityConstants {
            k,
            lambda: 0.0,
            gamma: 0.0,
            lambda1: 0.0,
            r0: f64::INFINITY,
        }
    }

    /// `e^{Λ₁ r} mass / r^k`.
    pub fn theta(&self, r: f64, mass: f64) -> f64 {
        (self.lambda1 * r).exp() * mass / r.powi(self.k as i32)
    }

    fn deficit_weight(&self, r: f64) -> f64 {
        (self.lambda1 * r).exp() / ((1.0 + self.gamma * r) * r.powi(self.k as i32))
    }
}

/// Θ on a radius grid with the deficits between neighbouring radii.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityProfile {
    pub base_point: [f64; 3],
    pub radii: Vec<f64>,
    pub masses: Vec<f64>,
    pub mass_error_bounds: Vec<f64>,
    pub theta: Vec<f64>,
    /// `deficits[j]` is the deficit between `radii[j]` and `radii[j + 1]`.
    pub deficits: Vec<f64>,
    pub constants: DensityConstants,
    pub resolution: f64,
}

impl DensityProfile {
    /// CSV with columns `r,mass,theta,deficit_to_next`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,mass,theta,deficit_to_next\n");
        for (j, r) in self.radii.iter().enumerate() {
            let deficit = self.deficits.get(j).map(|d| format!("{d:.15e}")).unwrap_or_default();
            out.push_str(&format!("{r:.15e},{:.15e},{:.15e},{deficit}\n", self.masses[j], self.theta[j]));
        }
        out
    }
}

/// Geometric grid `r_max · 2^{−j}`, `j = levels−1, …, 0`, increasing.
pub fn geometric_radii(r_max: f64, levels: usize) -> Vec<f64> {
    (0..levels).rev().map(|j| r_max * 0.5_f64.powi(j as i32)).collect()
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::Precondition("empty radius grid".into()));
    }
    if radii[0] <= 0.0 || radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Precondition("radii must be positive and strictly increasing".into()));
    }
    Ok(())
}

fn build_profile(
    measure: &impl Rectifiable,
    p: &Vec3,
    radii: &[f64],
    constants: DensityConstants,
) -> DensityProfile {
    // one resolution for every radius keeps the masses exactly nondecreasing
    let resolution = radii[0] * CLIP_RESOLUTION;
    let balls: Vec<BallMass> = radii.iter().map(|&r| measure.ball_mass(p, r, resolution)).collect();
    let theta = balls.iter().map(|b| constants.theta(b.radius, b.mass)).collect();
    let deficits = radii
        .windows(2)
        .map(|w| measure.deficit(p, w[0], w[1], &constants, resolution))
        .collect();
    DensityProfile {
        base_point: [p.x, p.y, p.z],
        radii: radii.to_vec(),
        masses: balls.iter().map(|b| b.mass).collect(),
        mass_error_bounds: balls.iter().map(|b| b.error_bound).collect(),
        theta,
        deficits,
        constants,
        resolution,
    }
}

/// Density profile at a point of `N` with `Λ = 0`.
pub fn density_profile(
    measure: &impl Rectifiable,
    constraint: &LevelSetConstraint,
    p: &Vec3,
    radii: &[f64],
) -> Result<DensityProfile> {
    density_profile_with(measure, constraint, p, radii, 0.0, 0)
}

/// Density profile with an explicit `Λ`; `seed` drives the κ estimate when
/// the constraint has no closed-form turning bound.
pub fn density_profile_with(
    measure: &impl Rectifiable,
    constraint: &LevelSetConstraint,
    p: &Vec3,
    radii: &[f64],
    lambda: f64,
    seed: u64,
) -> Result<DensityProfile> {
    check_radii(radii)?;
    let offset = constraint.level_offset(p);
    if !(offset <= 1e-10 * constraint.scale()) {
        return Err(Error::Precondition(format!("base point is off the constraint by {offset:e}")));
    }
    let r_max = *radii.last().expect("nonempty");
    let region = 4.0 * r_max.max(constraint.scale());
    let r0 = constraint.radius_of_curvature((*p, region), seed)?;
    if !(r_max < 0.5 * r0) {
        return Err(Error::RadiusExceedsHalfR0 {
            radius: r_max,
            limit: 0.5 * r0,
        });
    }
    let constants = DensityConstants::new(measure.dimension(), lambda, r0);
    Ok(build_profile(measure, p, radii, constants))
}

/// Classical density ratio `mass / r^k` at a point whose balls avoid `N`.
pub fn interior_density(
    measure: &impl Rectifiable,
    constraint: &LevelSetConstraint,
    p: &Vec3,
    radii: &[f64],
) -> Result<DensityProfile> {
    check_radii(radii)?;
    let r_max = *radii.last().expect("nonempty");
    let distance = constraint.clearance(p)?;
    if !(distance > r_max) {
        return Err(Error::BallTouchesConstraint { radius: r_max, distance });
    }
    Ok(build_profile(measure, p, radii, DensityConstants::interior(measure.dimension())))
}

/// Outcome of [`check_monotonicity`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonotonicityCheck {
    pub passed: bool,
    pub slack: f64,
    /// `Θ(ρ) − deficit + slack·Θ(ρ) − Θ(σ)` per consecutive pair.
    pub margins: Vec<f64>,
    pub worst_margin: f64,
    /// `(σ, ρ)` of the worst pair.
    pub worst_pair: Option<(f64, f64)>,
    pub note: Option<String>,
}

impl MonotonicityCheck {
    /// Records whether the surface passed minimality verification.
    pub fn with_verification(mut self, verified: bool) -> Self {
        if !verified {
            self.note = Some("input not verified minimal".into());
        }
        self
    }
}

/// Checks `Θ(σ) ≤ Θ(ρ) − deficit(σ, ρ) + slack·Θ(ρ)` for consecutive radii.
pub fn check_monotonicity(profile: &DensityProfile, slack: f64) -> Result<MonotonicityCheck> {
    if profile.radii.len() < 2 {
        return Err(Error::Precondition("monotonicity needs at least two radii".into()));
    }
    let margins: Vec<f64> = (0..profile.radii.len() - 1)
        .map(|j| {
            let upper = profile.theta[j + 1];
            upper - profile.deficits[j] + slack * upper - profile.theta[j]
        })
        .collect();
    let (worst, worst_margin) = margins
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bm), (i, m)| if *m < bm { (i, *m) } else { (bi, bm) });
    Ok(MonotonicityCheck {
        passed: margins.iter().all(|m| *m >= 0.0),
        slack,
        worst_margin,
        worst_pair: Some((profile.radii[worst], profile.radii[worst + 1])),
        margins,
        note: None,
    })
}

/// Uniform area growth read off a profile.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AreaGrowth {
    /// `max_r mass(r) / r^k`.
    pub max_ratio: f64,
    /// `Θ(R_max) e^{Λ₁ R_max}`.
    pub bound: f64,
    pub passed: bool,
}

/// Checks `mass(r) ≤ C r^k` with `C = Θ(R_max) e^{Λ₁ R_max}` up to `slack`.
pub fn area_growth(profile: &DensityProfile, slack: f64) -> AreaGrowth {
    let k = profile.constants.k as i32;
    let max_ratio = profile
        .radii
        .iter()
        .zip(&profile.masses)
        .map(|(r, m)| m / r.powi(k))
        .fold(0.0, f64::max);
    let r_max = *profile.radii.last().unwrap_or(&0.0);
    let theta_max = *profile.theta.last().unwrap_or(&0.0);
    let bound = theta_max * (profile.constants.lambda1 * r_max).exp();
    AreaGrowth {
        max_ratio,
        bound,
        passed: max_ratio <= bound * (1.0 + slack),
    }
}
