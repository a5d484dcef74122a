//! Fermi coordinate charts at points of the constraint, graph extraction of
//! a surface near a free boundary point and the Neumann residual.
//!
//! The chart sends `(t, x₁, x₂)` to `ψ(x) + t n(ψ(x))` where
//! `ψ(x) = ξ(p + x₁e₁ + x₂e₂)` realizes normal coordinates on `N` by
//! projection; `t` is the signed distance along the outward normal.

use nalgebra::Matrix3;
use serde::Serialize;

use crate::constraint::LevelSetConstraint;
use crate::error::{Error, Result};
use crate::mesh::{TriangleMesh, Vec3};

/// Chart radii must stay below this fraction of `R₀`.
pub const CHART_RADIUS_FRACTION: f64 = 0.9;

/// Residuals at or below this level are treated as exact zeros when reading
/// off convergence orders.
pub const ROUND_OFF_FLOOR: f64 = 1e-10;

const MAX_NEWTON: usize = 50;

#[derive(Clone, Debug)]
pub struct FermiChart {
    base: Vec3,
    /// `[n, e₁, e₂]` with `n` the unit normal of `N` at the base.
    frame: [Vec3; 3],
    radius: f64,
    constraint: LevelSetConstraint,
}

/// Orthonormal completion of `n`, built from the coordinate axis least
/// aligned with it (lowest index on ties).
fn tangent_pair(n: &Vec3) -> (Vec3, Vec3) {
    let axis = (0..3)
        .min_by(|&a, &b| n[a].abs().total_cmp(&n[b].abs()))
        .expect("three axes");
    let mut a = Vec3::zeros();
    a[axis] = 1.0;
    let e1 = (a - a.dot(n) * n).normalize();
    (e1, n.cross(&e1))
}

/// Builds the chart of radius `r0` at `p ∈ N`.
pub fn build_chart(constraint: &LevelSetConstraint, p: &Vec3, r0: f64) -> Result<FermiChart> {
    let offset = constraint.level_offset(p);
    if !(offset <= 1e-10 * constraint.scale()) {
        return Err(Error::Precondition(format!("chart base is off the constraint by {offset:e}")));
    }
    let r_curv = constraint.radius_of_curvature((*p, 4.0 * r0.max(constraint.scale())), 0)?;
    if !(r0 > 0.0 && r0 < CHART_RADIUS_FRACTION * r_curv) {
        return Err(Error::Precondition(format!(
            "chart radius {r0} must lie in (0, {})",
            CHART_RADIUS_FRACTION * r_curv
        )));
    }
    let n = constraint.unit_normal(p)?;
    let (e1, e2) = tangent_pair(&n);
    Ok(FermiChart {
        base: *p,
        frame: [n, e1, e2],
        radius: r0,
        constraint: constraint.clone(),
    })
}

impl FermiChart {
    pub fn base(&self) -> Vec3 {
        self.base
    }

    pub fn frame(&self) -> [Vec3; 3] {
        self.frame
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn constraint(&self) -> &LevelSetConstraint {
        &self.constraint
    }

    /// `(t, x₁, x₂) ↦ ψ(x) + t n(ψ(x))`.
    pub fn from_fermi(&self, c: &Vec3) -> Result<Vec3> {
        let [_, e1, e2] = self.frame;
        let foot = self
            .constraint
            .project(&(self.base + c.y * e1 + c.z * e2))
            .map_err(|_| Error::ChartInversion)?;
        let n = self.constraint.unit_normal(&foot)?;
        Ok(foot + c.x * n)
    }

    /// Inverts the chart by Newton iteration from the linearized guess.
    pub fn to_fermi(&self, q: &Vec3) -> Result<Vec3> {
        let [n, e1, e2] = self.frame;
        let d = q - self.base;
        let mut c = Vec3::new(d.dot(&n), d.dot(&e1), d.dot(&e2));
        let scale = self.constraint.scale().min(self.radius.max(d.norm()));
        let tol = 1e-13 * scale.max(1e-300);
        let delta = 1e-6 * scale;
        for _ in 0..MAX_NEWTON {
            let residual = self.from_fermi(&c)? - q;
            if residual.norm() <= tol {
                return Ok(c);
            }
            let mut jac = Matrix3::zeros();
            for k in 0..3 {
                let mut hi = c;
                let mut lo = c;
                hi[k] += delta;
                lo[k] -= delta;
                let col = (self.from_fermi(&hi)? - self.from_fermi(&lo)?) / (2.0 * delta);
                jac.set_column(k, &col);
            }
            let step = jac.lu().solve(&residual).ok_or(Error::ChartInversion)?;
            c -= step;
            if step.norm() <= tol {
                let residual = self.from_fermi(&c)? - q;
                if residual.norm() <= 1e3 * tol {
                    return Ok(c);
                }
            }
        }
        Err(Error::ChartInversion)
    }
}

/// Grid of Fermi nodes `t_j = j h`, `s_c ∈ [−w, w]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    pub h: f64,
    pub t_rows: usize,
    pub half_width: f64,
    pub columns: usize,
}

impl GridSpec {
    /// `h = r₀/20`, rows `t ∈ {0, …, 5h}`, `x'` across a square of side `r₀/2`.
    pub fn for_chart(chart: &FermiChart) -> Self {
        GridSpec {
            h: chart.radius / 20.0,
            t_rows: 6,
            half_width: chart.radius / 4.0,
            columns: 11,
        }
    }

    fn s_values(&self) -> Vec<f64> {
        if self.columns == 1 {
            return vec![0.0];
        }
        let step = 2.0 * self.half_width / (self.columns - 1) as f64;
        (0..self.columns).map(|c| -self.half_width + c as f64 * step).collect()
    }
}

/// Orientation of the tangent half-space `T_pΣ` in chart coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GraphFrame {
    /// Unit direction of `∂Σ` in the `x'` plane.
    pub along: [f64; 2],
    /// `+1` when `Σ` lies on the outward side of `N`, `−1` otherwise.
    pub side: f64,
}

impl GraphFrame {
    /// Reads the boundary direction and the side of `Σ` off the mesh near the
    /// chart base.
    pub fn from_mesh(chart: &FermiChart, mesh: &TriangleMesh) -> Result<Self> {
        let v = mesh.vertices();
        let p = chart.base;
        let mut best: Option<(usize, usize, f64)> = None;
        for (l, lp) in mesh.boundary_loops().iter().enumerate() {
            for (k, &i) in lp.iter().enumerate() {
                let d = (v[i] - p).norm();
                if best.is_none_or(|(_, _, bd)| d < bd) {
                    best = Some((l, k, d));
                }
            }
        }
        let (l, k, _) = best.ok_or(Error::Precondition("mesh has no boundary".into()))?;
        let lp = &mesh.boundary_loops()[l];
        let next = lp[(k + 1) % lp.len()];
        let prev = lp[(k + lp.len() - 1) % lp.len()];
        let d = v[next] - v[prev];
        let [n, e1, e2] = chart.frame;
        let along = [d.dot(&e1), d.dot(&e2)];
        let len = (along[0] * along[0] + along[1] * along[1]).sqrt();
        if !(len > 0.0) {
            return Err(Error::Precondition("boundary is normal to the constraint at the base".into()));
        }
        let near: f64 = v
            .iter()
            .filter(|x| (*x - p).norm() < chart.radius)
            .map(|x| (x - p).dot(&n))
            .sum();
        Ok(GraphFrame {
            along: [along[0] / len, along[1] / len],
            side: if near < 0.0 { -1.0 } else { 1.0 },
        })
    }

    fn height_dir(&self) -> [f64; 2] {
        [-self.along[1], self.along[0]]
    }
}

/// Heights of `Σ` over its tangent half-plane on a Fermi grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GraphSample {
    pub grid: GridSpec,
    pub frame: GraphFrame,
    /// `t ≥ 0`, measured into the side of `N` that holds `Σ`.
    pub t: Vec<f64>,
    pub s: Vec<f64>,
    /// `values[row][column]` lists the sheets at that node by increasing `u`;
    /// empty where the line misses the surface.
    pub values: Vec<Vec<Vec<f64>>>,
    pub sheet_count: usize,
}

impl GraphSample {
    /// CSV with columns `t,x1,x2,sheet,u,valid`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x1,x2,sheet,u,valid\n");
        for (j, t) in self.t.iter().enumerate() {
            for (c, s) in self.s.iter().enumerate() {
                let x1 = s * self.frame.along[0];
                let x2 = s * self.frame.along[1];
                let sheets = &self.values[j][c];
                if sheets.is_empty() {
                    out.push_str(&format!("{t:.15e},{x1:.15e},{x2:.15e},0,,false\n"));
                }
                for (k, u) in sheets.iter().enumerate() {
                    out.push_str(&format!("{t:.15e},{x1:.15e},{x2:.15e},{k},{u:.15e},true\n"));
                }
            }
        }
        out
    }
}

/// Intersects the surface with the chart lines of constant `(t, x')`.
///
/// Vertices within twice the chart radius are mapped to chart coordinates;
/// each triangle is treated as linear there.
pub fn graph_extract(chart: &FermiChart, mesh: &TriangleMesh, frame: &GraphFrame, grid: &GridSpec) -> Result<GraphSample> {
    if grid.t_rows == 0 || grid.columns == 0 || !(grid.h > 0.0) {
        return Err(Error::Precondition("empty graph grid".into()));
    }
    let v = mesh.vertices();
    let m = frame.height_dir();
    let mut local: Vec<Option<[f64; 3]>> = vec![None; v.len()];
    for (i, x) in v.iter().enumerate() {
        if (x - chart.base).norm() < 2.0 * chart.radius {
            let c = chart.to_fermi(x)?;
            let s = c.y * frame.along[0] + c.z * frame.along[1];
            let u = c.y * m[0] + c.z * m[1];
            local[i] = Some([frame.side * c.x, s, u]);
        }
    }
    let t: Vec<f64> = (0..grid.t_rows).map(|j| j as f64 * grid.h).collect();
    let s = grid.s_values();
    let merge = 1e-9 * chart.radius;
    let mut values = vec![vec![Vec::new(); s.len()]; t.len()];
    for f in mesh.faces() {
        let (Some(a), Some(b), Some(c)) = (local[f[0]], local[f[1]], local[f[2]]) else { continue };
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        if det.abs() <= 1e-14 * chart.radius * chart.radius {
            continue;
        }
        let tmin = a[0].min(b[0]).min(c[0]);
        let tmax = a[0].max(b[0]).max(c[0]);
        for (j, &tj) in t.iter().enumerate() {
            if tj < tmin - merge || tj > tmax + merge {
                continue;
            }
            for (col, &sc) in s.iter().enumerate() {
                let wb = ((tj - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (sc - a[1])) / det;
                let wc = ((b[0] - a[0]) * (sc - a[1]) - (tj - a[0]) * (b[1] - a[1])) / det;
                let wa = 1.0 - wb - wc;
                if wa < -1e-10 || wb < -1e-10 || wc < -1e-10 {
                    continue;
                }
                values[j][col].push(wa * a[2] + wb * b[2] + wc * c[2]);
            }
        }
    }
    let mut sheet_count = 0;
    for row in &mut values {
        for node in row.iter_mut() {
            node.sort_by(f64::total_cmp);
            node.dedup_by(|x, y| (*x - *y).abs() <= merge);
            sheet_count = sheet_count.max(node.len());
        }
    }
    Ok(GraphSample {
        grid: *grid,
        frame: *frame,
        t,
        s,
        values,
        sheet_count,
    })
}

/// `max |(−3u(0) + 4u(h) − u(2h)) / (2h)|` over columns and sheets present
/// on all three rows.
pub fn neumann_residual(sample: &GraphSample) -> Result<f64> {
    if sample.t.len() < 3 {
        return Err(Error::InsufficientRows);
    }
    let h = sample.grid.h;
    let mut worst: Option<f64> = None;
    for col in 0..sample.s.len() {
        let (u0, u1, u2) = (&sample.values[0][col], &sample.values[1][col], &sample.values[2][col]);
        if u0.is_empty() || u0.len() != u1.len() || u1.len() != u2.len() {
            continue;
        }
        for k in 0..u0.len() {
            let d = ((-3.0 * u0[k] + 4.0 * u1[k] - u2[k]) / (2.0 * h)).abs();
            worst = Some(worst.map_or(d, |w| w.max(d)));
        }
    }
    worst.ok_or(Error::InsufficientRows)
}

/// Least-squares slope of `log residual` against `log spacing`; `None` when
/// any residual sits at the round-off floor.
pub fn observed_order(spacings: &[f64], residuals: &[f64]) -> Option<f64> {
    if spacings.len() < 2 || spacings.len() != residuals.len() || residuals.iter().any(|r| *r <= ROUND_OFF_FLOOR) {
        return None;
    }
    let xs: Vec<f64> = spacings.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = residuals.iter().map(|r| r.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Some(sxy / sxx)
}
