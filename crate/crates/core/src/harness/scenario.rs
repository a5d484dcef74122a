//! Scenario configuration: JSON schema, mesh sources and stage settings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::constraint::LevelSetConstraint;
use crate::error::{Error, Result};
use crate::mesh::{samplers, TriangleMesh, Vec3};
use crate::monotonicity::{Polyline, DEFAULT_SLACK};
use crate::stability::BoundaryCondition;
use crate::variational::SolveParams;

/// Value of the `schema` field accepted by this version.
pub const SCHEMA: &str = "fbms.scenario.v1";

/// Distance (relative to the constraint scale) within which a boundary
/// vertex counts as lying on `N` when flags are derived from geometry.
pub const ON_CONSTRAINT_FLAG_TOL: f64 = 1e-8;

/// Where the initial geometry comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "sampler", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSource {
    RectGrid {
        x0: f64,
        x1: f64,
        y0: f64,
        y1: f64,
        nx: usize,
        ny: usize,
    },
    Disk {
        radius: f64,
        n_r: usize,
        n_theta: usize,
    },
    HalfDisk {
        radius: f64,
        n_r: usize,
        n_theta: usize,
    },
    DiskBulge {
        height: f64,
        n_r: usize,
        n_theta: usize,
    },
    /// Odd bulge `z ∝ y(1 − r²)`, orthogonal to vertical translation.
    DiskOddBulge {
        height: f64,
        n_r: usize,
        n_theta: usize,
    },
    HalfDiskBulge {
        height: f64,
        n_r: usize,
        n_theta: usize,
    },
    TiltedDisk {
        angle: f64,
        n_r: usize,
        n_theta: usize,
    },
    Catenoid {
        a: f64,
        t0: f64,
        t1: f64,
        n_theta: usize,
        n_t: usize,
    },
    /// Catenoid `t ∈ [−t0, t0]` scaled so its boundary lies on the unit
    /// sphere, with the radial factor `1 + ε cos 3z + 0.3ε sin 2θ` applied
    /// after the constraint flags are set.
    CatenoidInBall {
        t0: f64,
        n_theta: usize,
        n_t: usize,
        #[serde(default)]
        perturbation: f64,
    },
    Obj {
        path: PathBuf,
        #[serde(default)]
        sidecar: Option<PathBuf>,
    },
    /// Planar or spatial curve; only the monotonicity stage applies.
    Polyline { points: Vec<[f64; 3]> },
}

/// Which boundary vertices slide on `N`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstrainRule {
    /// Boundary vertices lying on `N`.
    #[default]
    OnConstraint,
    /// Boundary vertices on `N` whose two boundary neighbours are also on `N`
    /// (corners where `∂Σ` leaves `N` stay fixed).
    OnConstraintOpen,
    All,
    None,
    /// Flags as loaded (OBJ sidecar); samplers carry none.
    Source,
}

/// Solver overrides on top of [`SolveParams::for_mesh`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iterations: Option<usize>,
    pub step_init: Option<f64>,
    pub armijo_c: Option<f64>,
    pub grad_tol: Option<f64>,
    pub ortho_tol: Option<f64>,
    pub reproject_every: Option<usize>,
}

impl SolverConfig {
    pub fn params_for(&self, mesh: &TriangleMesh) -> SolveParams {
        let mut p = SolveParams::for_mesh(mesh);
        if let Some(v) = self.max_iterations {
            p.max_iterations = v;
        }
        if let Some(v) = self.step_init {
            p.step_init = v;
        }
        if let Some(v) = self.armijo_c {
            p.armijo_c = v;
        }
        if let Some(v) = self.grad_tol {
            p.grad_tol = v;
        }
        if let Some(v) = self.ortho_tol {
            p.ortho_tol = v;
        }
        if let Some(v) = self.reproject_every {
            p.reproject_every = v;
        }
        p
    }
}

fn default_h_tol() -> f64 {
    5e-2
}

fn default_ortho_tol() -> f64 {
    2e-2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "default_h_tol")]
    pub h_tol: f64,
    #[serde(default = "default_ortho_tol")]
    pub ortho_tol: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            h_tol: default_h_tol(),
            ortho_tol: default_ortho_tol(),
        }
    }
}

fn default_stability_tol() -> f64 {
    1e-6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    #[serde(default = "default_stability_tol")]
    pub tol: f64,
    #[serde(default)]
    pub boundary: BoundaryCondition,
    /// When set, the stage passes only if the verdict matches.
    #[serde(default)]
    pub expect_stable: Option<bool>,
}

fn default_slack() -> f64 {
    DEFAULT_SLACK
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonotonicityConfig {
    pub base_point: [f64; 3],
    /// Explicit radius grid; otherwise six geometric levels below `r_max`.
    #[serde(default)]
    pub radii: Option<Vec<f64>>,
    #[serde(default)]
    pub r_max: Option<f64>,
    #[serde(default = "default_slack")]
    pub slack: f64,
    /// Ambient curvature bound `Λ`.
    #[serde(default)]
    pub lambda: f64,
}

impl MonotonicityConfig {
    pub fn radius_grid(&self) -> Result<Vec<f64>> {
        match (&self.radii, self.r_max) {
            (Some(r), None) => Ok(r.clone()),
            (None, Some(r_max)) => Ok(crate::monotonicity::geometric_radii(r_max, 6)),
            _ => Err(Error::Parse("monotonicity needs exactly one of `radii` or `r_max`".into())),
        }
    }
}

fn default_fermi_tol() -> f64 {
    5e-2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FermiConfig {
    pub base_point: [f64; 3],
    pub radius: f64,
    /// Largest accepted Neumann residual.
    #[serde(default = "default_fermi_tol")]
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoublingConfig {
    pub point: [f64; 3],
    pub normal: [f64; 3],
    /// Closed-form surface the doubled mesh should reproduce vertex-wise.
    #[serde(default)]
    pub reference: Option<MeshSource>,
    #[serde(default = "default_reference_tol")]
    pub reference_tol: f64,
}

fn default_reference_tol() -> f64 {
    1e-8
}

/// A named mesh, constraint and the analyses to run on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: String,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub mesh: MeshSource,
    #[serde(default)]
    pub constrain: ConstrainRule,
    pub constraint: LevelSetConstraint,
    #[serde(default)]
    pub solve: Option<SolverConfig>,
    #[serde(default)]
    pub verify: Option<VerifyConfig>,
    #[serde(default)]
    pub stability: Option<StabilityConfig>,
    #[serde(default)]
    pub monotonicity: Option<MonotonicityConfig>,
    #[serde(default)]
    pub fermi: Option<FermiConfig>,
    #[serde(default)]
    pub doubling: Option<DoublingConfig>,
    #[serde(default)]
    pub seed: u64,
}

/// The geometry a scenario works on.
#[derive(Clone, Debug)]
pub enum Geometry {
    Surface(TriangleMesh),
    Curve(Polyline),
}

pub(crate) fn v3(a: &[f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

fn resolve(base: Option<&Path>, path: &Path) -> PathBuf {
    match base {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    }
}

impl MeshSource {
    /// Paths of files read by this source, resolved against `base`.
    pub fn input_files(&self, base: Option<&Path>) -> Vec<PathBuf> {
        match self {
            MeshSource::Obj { path, sidecar } => {
                let mut out = vec![resolve(base, path)];
                if let Some(sc) = sidecar {
                    out.push(resolve(base, sc));
                }
                out
            }
            _ => Vec::new(),
        }
    }

    fn sample(&self, base: Option<&Path>) -> Result<Geometry> {
        let mesh = match *self {
            MeshSource::RectGrid { x0, x1, y0, y1, nx, ny } => samplers::rect_grid(x0, x1, y0, y1, nx, ny),
            MeshSource::Disk { radius, n_r, n_theta } => samplers::disk(radius, n_r, n_theta),
            MeshSource::HalfDisk { radius, n_r, n_theta } => samplers::half_disk(radius, n_r, n_theta),
            MeshSource::DiskBulge { height, n_r, n_theta } => samplers::disk_bulge(height, n_r, n_theta),
            MeshSource::DiskOddBulge { height, n_r, n_theta } => samplers::disk_odd_bulge(height, n_r, n_theta),
            MeshSource::HalfDiskBulge { height, n_r, n_theta } => samplers::half_disk_bulge(height, n_r, n_theta),
            MeshSource::TiltedDisk { angle, n_r, n_theta } => samplers::tilted_disk(angle, n_r, n_theta),
            MeshSource::Catenoid { a, t0, t1, n_theta, n_t } => samplers::catenoid(a, t0, t1, n_theta, n_t),
            MeshSource::CatenoidInBall { t0, n_theta, n_t, .. } => samplers::catenoid_in_unit_ball(t0, n_theta, n_t),
            MeshSource::Obj { ref path, ref sidecar } => {
                let sc = sidecar.as_ref().map(|s| resolve(base, s));
                TriangleMesh::load(&resolve(base, path), sc.as_deref())?
            }
            MeshSource::Polyline { ref points } => {
                return Ok(Geometry::Curve(Polyline::new(points.iter().map(v3).collect())));
            }
        };
        Ok(Geometry::Surface(mesh))
    }

    fn check_sizes(&self) -> Result<()> {
        let ok = match *self {
            MeshSource::RectGrid { nx, ny, x0, x1, y0, y1 } => nx > 0 && ny > 0 && x1 > x0 && y1 > y0,
            MeshSource::Disk { radius, n_r, n_theta } | MeshSource::HalfDisk { radius, n_r, n_theta } => {
                radius > 0.0 && n_r > 0 && n_theta >= 3
            }
            MeshSource::DiskBulge { n_r, n_theta, .. }
            | MeshSource::DiskOddBulge { n_r, n_theta, .. }
            | MeshSource::HalfDiskBulge { n_r, n_theta, .. }
            | MeshSource::TiltedDisk { n_r, n_theta, .. } => n_r > 0 && n_theta >= 3,
            MeshSource::Catenoid { a, t0, t1, n_theta, n_t } => a > 0.0 && t1 > t0 && n_theta >= 3 && n_t > 0,
            MeshSource::CatenoidInBall { t0, n_theta, n_t, .. } => t0 > 0.0 && n_theta >= 3 && n_t > 0,
            MeshSource::Obj { .. } => true,
            MeshSource::Polyline { ref points } => points.len() >= 2,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Parse(format!("invalid sampler parameters: {self:?}")))
        }
    }

    /// Builds the geometry and sets the constraint flags.
    pub fn build(&self, constraint: &LevelSetConstraint, rule: ConstrainRule, base: Option<&Path>) -> Result<Geometry> {
        self.check_sizes()?;
        let mesh = match self.sample(base)? {
            Geometry::Curve(c) => return Ok(Geometry::Curve(c)),
            Geometry::Surface(m) => m,
        };
        let mesh = apply_rule(mesh, constraint, rule);
        let mesh = match *self {
            MeshSource::CatenoidInBall { perturbation, .. } if perturbation != 0.0 => mesh.map_vertices(|p| {
                let theta = p.y.atan2(p.x);
                let f = 1.0 + perturbation * (3.0 * p.z).cos() + 0.3 * perturbation * (2.0 * theta).sin();
                Vec3::new(f * p.x, f * p.y, p.z)
            }),
            _ => mesh,
        };
        mesh.ensure_valid()?;
        Ok(Geometry::Surface(mesh))
    }
}

fn apply_rule(mesh: TriangleMesh, constraint: &LevelSetConstraint, rule: ConstrainRule) -> TriangleMesh {
    let tol = ON_CONSTRAINT_FLAG_TOL * constraint.scale();
    let on = |p: &Vec3| constraint.level_offset(p) <= tol;
    let clean = |m: &TriangleMesh| TriangleMesh::new(m.vertices().to_vec(), m.faces().to_vec());
    match rule {
        ConstrainRule::Source => mesh,
        ConstrainRule::None => clean(&mesh),
        ConstrainRule::All => clean(&mesh).constrain_all_boundary(),
        ConstrainRule::OnConstraint => clean(&mesh).constrain_boundary_where(on),
        ConstrainRule::OnConstraintOpen => {
            let v = mesh.vertices();
            let mut picked = Vec::new();
            for lp in mesh.boundary_loops() {
                let n = lp.len();
                for k in 0..n {
                    let (prev, i, next) = (lp[(k + n - 1) % n], lp[k], lp[(k + 1) % n]);
                    if on(&v[i]) && on(&v[prev]) && on(&v[next]) {
                        picked.push(i);
                    }
                }
            }
            clean(&mesh).with_constrained(picked)
        }
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Checks the invariants that do not need the file system.
    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA {
            return Err(Error::Parse(format!("unsupported schema `{}`, expected `{SCHEMA}`", self.schema)));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name.starts_with('.') {
            return Err(Error::Parse(format!("invalid scenario name `{}`", self.name)));
        }
        self.mesh.check_sizes()?;
        if matches!(self.mesh, MeshSource::Polyline { .. })
            && (self.solve.is_some()
                || self.verify.is_some()
                || self.stability.is_some()
                || self.fermi.is_some()
                || self.doubling.is_some())
        {
            return Err(Error::Parse("curve scenarios support only the monotonicity stage".into()));
        }
        if let Some(m) = &self.monotonicity {
            m.radius_grid()?;
        }
        Ok(())
    }
}
