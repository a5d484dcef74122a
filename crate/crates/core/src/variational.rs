//! First variation of area, the free boundary orthogonality residual, and a
//! constrained area-descent solver for free boundary minimal surfaces.

use serde::{Deserialize, Serialize};

use crate::constraint::LevelSetConstraint;
use crate::error::{Error, Result};
use crate::mesh::{
    boundary_conormal, boundary_length_weights, face_area, mean_curvature_vector, total_area, vertex_areas,
    TriangleMesh, Vec3, VertexField,
};
use crate::mesh::cotangent_laplacian_of_position;

/// Constrained vertices farther than this (scaled by the constraint size)
/// from `N` count as off the constraint.
pub const ON_CONSTRAINT_TOL: f64 = 1e-8;

/// Steps that push any face aspect ratio beyond this are rejected.
pub const MAX_ASPECT_RATIO: f64 = 50.0;

/// Backtracking halvings before a line search gives up.
pub const MAX_HALVINGS: usize = 30;

/// Exact gradient of the total area with respect to every vertex position.
pub fn raw_area_gradient(mesh: &TriangleMesh) -> Vec<Vec3> {
    cotangent_laplacian_of_position(mesh).into_iter().map(|l| -l).collect()
}

/// `d/dt Area(mesh + tX)` at `t = 0` in lumped form: `Σ −(X·H) a` over interior
/// vertices plus the boundary flux `Σ X·b` over boundary vertices, where
/// `b_i` is the discrete conormal flux at `i` (it tends to `η ℓ`).
pub fn discrete_first_variation(mesh: &TriangleMesh, field: &VertexField) -> Result<f64> {
    let x = vectors(mesh, field)?;
    let h = mean_curvature_vector(mesh);
    let h = h.as_vectors().expect("vector field");
    let a = vertex_areas(mesh);
    let boundary = mesh.boundary_mask();
    let mut interior = 0.0;
    let mut flux = 0.0;
    for i in 0..x.len() {
        // a_i H_i is minus the area gradient; on the boundary it carries η ℓ
        let term = -x[i].dot(&h[i]) * a[i];
        if boundary[i] {
            flux += term;
        } else {
            interior += term;
        }
    }
    Ok(interior + flux)
}

/// The same variation with the boundary flux replaced by the smooth conormal
/// form `Σ (X·η) ℓ`, `ℓ` half the incident boundary edge lengths. Converges
/// to the first variation under refinement but is not exact on a mesh.
pub fn conormal_first_variation(mesh: &TriangleMesh, field: &VertexField) -> Result<f64> {
    let x = vectors(mesh, field)?;
    let h = mean_curvature_vector(mesh);
    let h = h.as_vectors().expect("vector field");
    let a = vertex_areas(mesh);
    let ell = boundary_length_weights(mesh);
    let eta = boundary_conormal(mesh)?;
    let mut total = 0.0;
    for i in 0..x.len() {
        total += match eta[i] {
            Some(e) => x[i].dot(&e) * ell[i],
            None => -x[i].dot(&h[i]) * a[i],
        };
    }
    Ok(total)
}

/// Central difference `(Area(m + tX) − Area(m − tX)) / 2t`.
pub fn finite_difference_variation(mesh: &TriangleMesh, field: &VertexField, step: f64) -> Result<f64> {
    if !(step > 0.0) {
        return Err(Error::Precondition(format!("step must be positive, got {step}")));
    }
    let x = vectors(mesh, field)?;
    let shifted = |sign: f64| {
        let v = mesh.vertices().iter().zip(x).map(|(p, d)| p + sign * step * d).collect::<Vec<_>>();
        total_area(&mesh.with_vertices(v))
    };
    Ok((shifted(1.0) - shifted(-1.0)) / (2.0 * step))
}

fn vectors<'a>(mesh: &TriangleMesh, field: &'a VertexField) -> Result<&'a [Vec3]> {
    let x = field
        .as_vectors()
        .ok_or_else(|| Error::Precondition("variation field must be vector-valued".into()))?;
    if x.len() != mesh.vertex_count() {
        return Err(Error::Precondition(format!(
            "field has {} entries, mesh has {} vertices",
            x.len(),
            mesh.vertex_count()
        )));
    }
    if !field.is_finite() {
        return Err(Error::Precondition("variation field is not finite".into()));
    }
    Ok(x)
}

/// Orthogonality defect at the constrained boundary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrthogonalityResidual {
    /// Largest angle in radians between `η` and the line spanned by `∇φ`.
    pub max_angle: f64,
    /// `(vertex, angle)` for every constrained boundary vertex.
    pub angles: Vec<(usize, f64)>,
}

/// Angle between the conormal and the normal line of `N` at every
/// constrained vertex, without checking that the vertices lie on `N`.
fn orthogonality_angles(mesh: &TriangleMesh, constraint: &LevelSetConstraint) -> Result<OrthogonalityResidual> {
    let eta = boundary_conormal(mesh)?;
    let v = mesh.vertices();
    let mut angles = Vec::new();
    let mut max_angle = 0.0_f64;
    for i in mesh.constrained_vertices() {
        let e = eta[i].ok_or(Error::UndefinedConormal { vertex: i })?;
        let n = constraint.unit_normal(&v[i])?;
        let angle = e.cross(&n).norm().atan2(e.dot(&n).abs());
        max_angle = max_angle.max(angle);
        angles.push((i, angle));
    }
    Ok(OrthogonalityResidual { max_angle, angles })
}

fn off_constraint(mesh: &TriangleMesh, constraint: &LevelSetConstraint) -> Vec<usize> {
    let tol = ON_CONSTRAINT_TOL * constraint.scale();
    mesh.constrained_vertices()
        .into_iter()
        .filter(|&i| !(constraint.level_offset(&mesh.vertices()[i]) <= tol))
        .collect()
}

/// Free boundary condition residual: the angle by which `Σ` fails to meet
/// `N` orthogonally, per constrained vertex and its maximum.
pub fn free_boundary_residual(mesh: &TriangleMesh, constraint: &LevelSetConstraint) -> Result<OrthogonalityResidual> {
    let off = off_constraint(mesh, constraint);
    if !off.is_empty() {
        return Err(Error::BoundaryOffConstraint(off));
    }
    orthogonality_angles(mesh, constraint)
}

/// Admissible area gradient: the exact gradient at interior vertices, its
/// projection onto `T N` at constrained vertices, and zero at unconstrained
/// boundary vertices, which are held fixed. Descent moves along its negation.
pub fn area_gradient(mesh: &TriangleMesh, constraint: &LevelSetConstraint) -> Result<VertexField> {
    let raw = raw_area_gradient(mesh);
    let boundary = mesh.boundary_mask();
    let mut out = Vec::with_capacity(raw.len());
    for (i, g) in raw.into_iter().enumerate() {
        out.push(if mesh.is_constrained(i) {
            let foot = constraint.project(&mesh.vertices()[i])?;
            let (tau, _) = constraint.projectors(&foot)?;
            tau * g
        } else if boundary[i] {
            Vec3::zeros()
        } else {
            g
        });
    }
    Ok(VertexField::Vector(out))
}

/// Unit tangent of the boundary polygon at each boundary vertex, from its
/// two loop neighbours.
fn boundary_tangents(mesh: &TriangleMesh) -> Vec<Option<Vec3>> {
    let v = mesh.vertices();
    let mut out = vec![None; v.len()];
    for lp in mesh.boundary_loops() {
        let n = lp.len();
        for k in 0..n {
            let d = v[lp[(k + 1) % n]] - v[lp[(k + n - 1) % n]];
            out[lp[k]] = (d.norm() > 0.0).then(|| d.normalize());
        }
    }
    out
}

/// Gradient driving the solver: [`area_gradient`] with, at constrained
/// vertices, the component along the boundary polygon also removed. Sliding
/// along `∂Σ` only reparametrizes the smooth surface, but on a mesh it lowers
/// area by making the boundary polygon uneven.
pub fn descent_gradient(mesh: &TriangleMesh, constraint: &LevelSetConstraint) -> Result<Vec<Vec3>> {
    let grad = area_gradient(mesh, constraint)?;
    let mut grad = match grad {
        VertexField::Vector(g) => g,
        VertexField::Scalar(_) => unreachable!("area gradient is vector-valued"),
    };
    let tangents = boundary_tangents(mesh);
    for i in mesh.constrained_vertices() {
        let Some(t) = tangents[i] else { continue };
        let foot = constraint.project(&mesh.vertices()[i])?;
        let (tau, _) = constraint.projectors(&foot)?;
        let t = tau * t;
        if t.norm() > 0.0 {
            let t = t.normalize();
            let along = t * t.dot(&grad[i]);
            grad[i] -= along;
        }
    }
    Ok(grad)
}

/// Largest descent gradient norm per unit vertex area over movable
/// vertices. At interior vertices this is `|H|`.
pub fn stationarity(mesh: &TriangleMesh, constraint: &LevelSetConstraint) -> Result<f64> {
    let g = descent_gradient(mesh, constraint)?;
    let a = vertex_areas(mesh);
    Ok(g.iter().zip(&a).map(|(g, a)| g.norm() / a).fold(0.0, f64::max))
}

/// Ratio of the longest edge times the perimeter to `4√3` times the area;
/// `1` for an equilateral triangle.
pub fn face_aspect_ratio(vertices: &[Vec3], f: &[usize; 3]) -> f64 {
    let l = [
        (vertices[f[1]] - vertices[f[0]]).norm(),
        (vertices[f[2]] - vertices[f[1]]).norm(),
        (vertices[f[0]] - vertices[f[2]]).norm(),
    ];
    let area = face_area(vertices, f);
    let longest = l[0].max(l[1]).max(l[2]);
    if area > 0.0 {
        longest * (l[0] + l[1] + l[2]) / (4.0 * 3.0_f64.sqrt() * area)
    } else {
        f64::INFINITY
    }
}

/// `Area(new) − Area(old)` summed face by face, which keeps the round-off
/// at the scale of single faces rather than of the whole surface.
fn area_change(old: &[Vec3], new: &[Vec3], faces: &[[usize; 3]]) -> f64 {
    faces.iter().map(|f| face_area(new, f) - face_area(old, f)).sum()
}

fn max_aspect_ratio(vertices: &[Vec3], faces: &[[usize; 3]]) -> f64 {
    faces.iter().map(|f| face_aspect_ratio(vertices, f)).fold(0.0, f64::max)
}

/// Parameters of [`solve_minimal`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveParams {
    pub max_iterations: usize,
    /// Largest trial step, in units of length².
    pub step_init: f64,
    pub armijo_c: f64,
    /// Threshold on [`stationarity`].
    pub grad_tol: f64,
    /// Threshold on the orthogonality residual, radians.
    pub ortho_tol: f64,
    /// Re-project constrained vertices onto `N` every this many accepted steps.
    pub reproject_every: usize,
}

impl SolveParams {
    /// Defaults scaled to the mesh: `grad_tol = 1e-6 · diameter`,
    /// `ortho_tol = 1e-3`, and a first step of the squared mean edge length.
    pub fn for_mesh(mesh: &TriangleMesh) -> Self {
        let edges = mesh.edges();
        let v = mesh.vertices();
        let mean = edges.iter().map(|&(a, b)| (v[a] - v[b]).norm()).sum::<f64>() / edges.len().max(1) as f64;
        SolveParams {
            max_iterations: 2000,
            step_init: mean * mean,
            armijo_c: 1e-4,
            grad_tol: 1e-6 * mesh.diameter(),
            ortho_tol: 1e-3,
            reproject_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iterations > 0
            && self.step_init > 0.0
            && self.armijo_c > 0.0
            && self.armijo_c < 1.0
            && self.grad_tol > 0.0
            && self.ortho_tol > 0.0
            && self.reproject_every > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Precondition(format!("invalid solver parameters: {self:?}")))
        }
    }
}

/// Why the solver stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    /// The descent slope fell below round-off before the tolerances were met.
    RoundOff,
}

/// Outcome of [`solve_minimal`].
#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub final_mesh: TriangleMesh,
    pub iterations: usize,
    pub area_history: Vec<f64>,
    pub grad_history: Vec<f64>,
    pub ortho_history: Vec<f64>,
    pub final_area: f64,
    pub final_grad_norm: f64,
    pub final_ortho_residual: f64,
    pub converged: bool,
    pub termination: Termination,
    /// Accepted steps after which re-projection raised the area.
    pub reprojection_increases: usize,
    /// Largest such increase divided by the squared step length.
    pub reprojection_constant: f64,
}

impl SolveReport {
    /// CSV with columns `iteration,area,grad_norm,ortho_residual`.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("iteration,area,grad_norm,ortho_residual\n");
        for (i, ((a, g), o)) in self.area_history.iter().zip(&self.grad_history).zip(&self.ortho_history).enumerate() {
            out.push_str(&format!("{i},{a:.15e},{g:.15e},{o:.15e}\n"));
        }
        out
    }
}

/// Projected gradient descent on area with Armijo backtracking.
///
/// Interior vertices move along the lumped gradient `−∇A_i / a_i`;
/// constrained vertices move along its projection onto `T N` (less the
/// component along `∂Σ`, see [`descent_gradient`]) and are then snapped back
/// to `N`; unconstrained boundary vertices stay fixed.
pub fn solve_minimal(
    initial: &TriangleMesh,
    constraint: &LevelSetConstraint,
    params: &SolveParams,
) -> Result<SolveReport> {
    initial.ensure_valid()?;
    params.validate()?;

    let constrained = initial.constrained_vertices();
    let mut vertices = initial.vertices().to_vec();
    for &i in &constrained {
        vertices[i] = constraint.project(&vertices[i]).map_err(|_| Error::ProjectionLeftBand { vertex: i })?;
    }
    let boundary = initial.boundary_mask();
    let faces = initial.faces().to_vec();

    let mut mesh = initial.with_vertices(vertices.clone());
    let mut area = total_area(&mesh);
    let mut report = SolveReport {
        final_mesh: mesh.clone(),
        iterations: 0,
        area_history: Vec::new(),
        grad_history: Vec::new(),
        ortho_history: Vec::new(),
        final_area: area,
        final_grad_norm: f64::INFINITY,
        final_ortho_residual: f64::INFINITY,
        converged: false,
        termination: Termination::MaxIterations,
        reprojection_increases: 0,
        reprojection_constant: 0.0,
    };
    let mut step = params.step_init;
    let mut accepted = 0usize;

    for iteration in 0..=params.max_iterations {
        let grad = descent_gradient(&mesh, constraint)?;
        let weights = vertex_areas(&mesh);
        let grad_norm = grad.iter().zip(&weights).map(|(g, a)| g.norm() / a).fold(0.0, f64::max);
        let ortho = orthogonality_angles(&mesh, constraint)?.max_angle;
        report.area_history.push(area);
        report.grad_history.push(grad_norm);
        report.ortho_history.push(ortho);
        report.iterations = iteration;
        report.final_grad_norm = grad_norm;
        report.final_ortho_residual = ortho;

        if grad_norm <= params.grad_tol && ortho <= params.ortho_tol {
            report.converged = true;
            report.termination = Termination::Converged;
            break;
        }
        if iteration == params.max_iterations {
            break;
        }

        let direction: Vec<Vec3> = grad
            .iter()
            .zip(&weights)
            .enumerate()
            .map(|(i, (g, a))| if boundary[i] && !initial.is_constrained(i) { Vec3::zeros() } else { -g / *a })
            .collect();
        let slope: f64 = grad.iter().zip(&direction).map(|(g, d)| g.dot(d)).sum();
        if slope.abs() <= 1e-15 * area {
            report.termination = Termination::RoundOff;
            break;
        }

        let aspect_limit = MAX_ASPECT_RATIO.max(max_aspect_ratio(&vertices, &faces));
        let mut t = step;
        let mut trial = None;
        for _ in 0..=MAX_HALVINGS {
            let cand: Vec<Vec3> = vertices.iter().zip(&direction).map(|(p, d)| p + t * d).collect();
            if max_aspect_ratio(&cand, &faces) <= aspect_limit {
                let change = area_change(&vertices, &cand, &faces);
                if change <= params.armijo_c * t * slope {
                    trial = Some((cand, change));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((mut cand, change)) = trial else {
            if slope.abs() <= 1e-10 * area {
                report.termination = Termination::RoundOff;
                break;
            }
            return Err(Error::LineSearchFailed(MAX_HALVINGS));
        };

        accepted += 1;
        let mut new_area = area + change;
        if accepted.is_multiple_of(params.reproject_every) {
            let stepped = cand.clone();
            for &i in &constrained {
                cand[i] = constraint.project(&cand[i]).map_err(|_| Error::ProjectionLeftBand { vertex: i })?;
            }
            let increase = area_change(&stepped, &cand, &faces);
            new_area += increase;
            if increase > 0.0 {
                report.reprojection_increases += 1;
                let moved: f64 = direction.iter().map(|d| (t * d).norm_squared()).sum();
                if moved > 0.0 {
                    report.reprojection_constant = report.reprojection_constant.max(increase / moved);
                }
            }
        }
        vertices = cand;
        mesh = mesh.with_vertices(vertices.clone());
        area = new_area;
        // let the step grow back after a successful first trial
        step = if t == step { (2.0 * t).min(params.step_init) } else { t };
    }

    report.final_area = total_area(&mesh);
    report.final_mesh = mesh;
    Ok(report)
}

/// Outcome of [`verify_minimal`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verification {
    pub max_interior_h: f64,
    pub ortho_residual: f64,
    /// Largest `|φ|` over constrained vertices.
    pub max_phi: f64,
    pub h_tol: f64,
    pub ortho_tol: f64,
    pub passed: bool,
}

/// Checks both free boundary conditions: vanishing interior mean curvature
/// and orthogonal contact with `N`, together with the constrained vertices
/// lying on `N`.
pub fn verify_minimal(
    mesh: &TriangleMesh,
    constraint: &LevelSetConstraint,
    h_tol: f64,
    ortho_tol: f64,
) -> Result<Verification> {
    let h = mean_curvature_vector(mesh);
    let boundary = mesh.boundary_mask();
    let max_interior_h = h
        .as_vectors()
        .expect("vector field")
        .iter()
        .zip(&boundary)
        .filter(|(_, b)| !**b)
        .map(|(h, _)| h.norm())
        .fold(0.0, f64::max);
    let ortho_residual = orthogonality_angles(mesh, constraint)?.max_angle;
    let max_phi = mesh
        .constrained_vertices()
        .into_iter()
        .map(|i| constraint.phi(&mesh.vertices()[i]).abs())
        .fold(0.0, f64::max);
    let on_constraint = off_constraint(mesh, constraint).is_empty();
    Ok(Verification {
        max_interior_h,
        ortho_residual,
        max_phi,
        h_tol,
        ortho_tol,
        passed: max_interior_h <= h_tol && ortho_residual <= ortho_tol && on_constraint,
    })
}

/// Neck parameter `t₀` of a catenoid-like annulus about the z-axis: mean
/// boundary height over the waist radius.
pub fn neck_parameter(mesh: &TriangleMesh) -> f64 {
    let v = mesh.vertices();
    let waist = v.iter().map(|p| p.x.hypot(p.y)).fold(f64::INFINITY, f64::min);
    let boundary = mesh.boundary_vertices();
    let height = boundary.iter().map(|&i| v[i].z.abs()).sum::<f64>() / boundary.len().max(1) as f64;
    height / waist
}
