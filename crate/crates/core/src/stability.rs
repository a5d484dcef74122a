//! The second variation of area for free boundary surfaces,
//!
//! `Q(f) = ∫ |∇f|² − (|A|² + Ric(ν,ν)) f² da − ∮ A^N(ν,ν) f² ds`,
//!
//! assembled with lumped masses, and its lowest generalized eigenpair.

use nalgebra::DVector;
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constraint::LevelSetConstraint;
use crate::error::{Error, Result};
use crate::mesh::{
    boundary_length_weights, face_cotangents, second_fundamental_norm, vertex_areas, vertex_normals, TriangleMesh,
    VertexField,
};

/// Iteration cap of the eigensolver.
pub const MAX_EIGEN_ITERATIONS: usize = 10_000;

/// Required eigen-residual `‖(Q − λM)f‖ / ‖Mf‖`.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-8;

/// How unconstrained boundary vertices enter the form.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    /// No condition anywhere: test functions are free on all of `∂Σ`.
    #[default]
    Natural,
    /// Test functions vanish at unconstrained boundary vertices (a boundary
    /// held fixed by the solver admits no variation).
    FixUnconstrained,
}

/// Lumped matrices of the stability form. `Q = stiffness − potential − ricci − boundary`.
#[derive(Clone, Debug)]
pub struct StabilityForm {
    /// Cotangent stiffness matrix, symmetric.
    pub stiffness: CscMatrix<f64>,
    /// `|A|²(v_i) a_i`.
    pub potential: Vec<f64>,
    /// `Ric(ν,ν)(v_i) a_i`; identically zero in Euclidean space.
    pub ricci: Vec<f64>,
    /// `A^N(ν,ν) ℓ_i` at constrained vertices, zero elsewhere.
    pub boundary: Vec<f64>,
    /// Lumped vertex areas.
    pub mass: Vec<f64>,
    /// Vertices where test functions are held at zero.
    pub fixed: Vec<bool>,
    /// Vertices whose `|A|²` came from too few directions.
    pub unreliable: Vec<usize>,
}

impl StabilityForm {
    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    fn diagonal_shift(&self, i: usize) -> f64 {
        self.potential[i] + self.ricci[i] + self.boundary[i]
    }

    /// `Q f` over all vertices.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let mut out = csc_mul(&self.stiffness, f);
        for (i, o) in out.iter_mut().enumerate() {
            *o -= self.diagonal_shift(i) * f[i];
        }
        out
    }

    /// `fᵀ · stiffness · f`, the discrete Dirichlet energy.
    pub fn dirichlet_energy(&self, f: &[f64]) -> f64 {
        dot(f, &csc_mul(&self.stiffness, f))
    }

    /// `fᵀ M f`.
    pub fn mass_norm_sq(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.mass).map(|(x, m)| m * x * x).sum()
    }

    /// Whether the stiffness matrix equals its transpose bit for bit.
    pub fn is_symmetric(&self) -> bool {
        let t = self.stiffness.transpose();
        t.col_offsets() == self.stiffness.col_offsets()
            && t.row_indices() == self.stiffness.row_indices()
            && t.values().iter().zip(self.stiffness.values()).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

fn csc_mul(a: &CscMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; a.nrows()];
    for (j, col) in a.col_iter().enumerate() {
        let xj = x[j];
        for (&i, &v) in col.row_indices().iter().zip(col.values()) {
            y[i] += v * xj;
        }
    }
    y
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Assembles the form with natural boundary conditions.
pub fn assemble_stability_form(mesh: &TriangleMesh, constraint: &LevelSetConstraint) -> Result<StabilityForm> {
    assemble_stability_form_with(mesh, constraint, BoundaryCondition::Natural)
}

/// Assembles the form with the chosen treatment of unconstrained boundary vertices.
pub fn assemble_stability_form_with(
    mesh: &TriangleMesh,
    constraint: &LevelSetConstraint,
    condition: BoundaryCondition,
) -> Result<StabilityForm> {
    mesh.ensure_valid()?;
    let n = mesh.vertex_count();
    let v = mesh.vertices();

    let mut coo = CooMatrix::new(n, n);
    for f in mesh.faces() {
        let cot = face_cotangents(v, f);
        for k in 0..3 {
            let i = f[(k + 1) % 3];
            let j = f[(k + 2) % 3];
            let w = 0.5 * cot[k];
            coo.push(i, j, -w);
            coo.push(j, i, -w);
            coo.push(i, i, w);
            coo.push(j, j, w);
        }
    }
    let stiffness = CscMatrix::from(&coo);

    let mass = vertex_areas(mesh);
    let second = second_fundamental_norm(mesh)?;
    let potential: Vec<f64> = second.norm_sq.iter().zip(&mass).map(|(s, a)| s * a).collect();
    let unreliable = second.unreliable_vertices();

    let normals = vertex_normals(mesh)?;
    let normals = normals.as_vectors().expect("vector field");
    let ell = boundary_length_weights(mesh);
    let mut boundary = vec![0.0; n];
    for i in mesh.constrained_vertices() {
        let foot = constraint.project(&v[i])?;
        let (tau, _) = constraint.projectors(&foot)?;
        // the surface normal is tangent to N exactly when Σ meets N orthogonally
        let dir = tau * normals[i];
        if !(dir.norm() > 1e-12) {
            return Err(Error::Precondition(format!(
                "surface normal at vertex {i} is normal to the constraint"
            )));
        }
        boundary[i] = constraint.normal_second_form(&foot, &dir.normalize())? * ell[i];
    }

    let fixed = match condition {
        BoundaryCondition::Natural => vec![false; n],
        BoundaryCondition::FixUnconstrained => {
            let b = mesh.boundary_mask();
            (0..n).map(|i| b[i] && !mesh.is_constrained(i)).collect()
        }
    };

    Ok(StabilityForm {
        stiffness,
        potential,
        ricci: vec![0.0; n],
        boundary,
        mass,
        fixed,
        unreliable,
    })
}

fn scalars<'a>(form: &StabilityForm, f: &'a VertexField) -> Result<&'a [f64]> {
    let x = f
        .as_scalars()
        .ok_or_else(|| Error::Precondition("test function must be scalar".into()))?;
    if x.len() != form.len() {
        return Err(Error::Precondition(format!(
            "test function has {} entries, form has {}",
            x.len(),
            form.len()
        )));
    }
    if !f.is_finite() {
        return Err(Error::Precondition("test function is not finite".into()));
    }
    Ok(x)
}

/// `Q(f) = fᵀ (stiffness − potential − ricci − boundary) f`.
pub fn quadratic_form_value(form: &StabilityForm, f: &VertexField) -> Result<f64> {
    let x = scalars(form, f)?;
    Ok(dot(x, &form.apply(x)))
}

/// `Q(f) / fᵀMf`.
pub fn rayleigh_quotient(form: &StabilityForm, f: &VertexField) -> Result<f64> {
    let x = scalars(form, f)?;
    let m = form.mass_norm_sq(x);
    if !(m > 0.0) {
        return Err(Error::Precondition("test function has zero mass".into()));
    }
    Ok(dot(x, &form.apply(x)) / m)
}

/// Lowest generalized eigenpair `Q f = λ M f`.
#[derive(Clone, Debug, Serialize)]
pub struct Eigenpair {
    pub lambda: f64,
    /// Mass-normalized, zero at fixed vertices.
    pub eigenfunction: Vec<f64>,
    /// `‖(Q − λM) f‖ / ‖M f‖`.
    pub residual: f64,
    pub iterations: usize,
}

/// Symmetric operator `M^{-1/2} Q M^{-1/2}` restricted to the free vertices.
struct ScaledOperator {
    matrix: CscMatrix<f64>,
    free: Vec<usize>,
    sqrt_mass: Vec<f64>,
}

impl ScaledOperator {
    fn new(form: &StabilityForm) -> Result<Self> {
        let free: Vec<usize> = (0..form.len()).filter(|&i| !form.fixed[i]).collect();
        if free.is_empty() {
            return Err(Error::Precondition("no free vertices".into()));
        }
        if form.mass.iter().any(|m| !(*m > 0.0)) {
            return Err(Error::Precondition("lumped mass must be positive".into()));
        }
        let mut slot = vec![usize::MAX; form.len()];
        for (k, &i) in free.iter().enumerate() {
            slot[i] = k;
        }
        let sqrt_mass: Vec<f64> = free.iter().map(|&i| form.mass[i].sqrt()).collect();
        let n = free.len();
        let mut coo = CooMatrix::new(n, n);
        for (j, col) in form.stiffness.col_iter().enumerate() {
            if slot[j] == usize::MAX {
                continue;
            }
            for (&i, &v) in col.row_indices().iter().zip(col.values()) {
                if slot[i] != usize::MAX {
                    coo.push(slot[i], slot[j], v / (sqrt_mass[slot[i]] * sqrt_mass[slot[j]]));
                }
            }
        }
        for (k, &i) in free.iter().enumerate() {
            coo.push(k, k, -form.diagonal_shift(i) / form.mass[i]);
        }
        Ok(ScaledOperator {
            matrix: CscMatrix::from(&coo),
            free,
            sqrt_mass,
        })
    }

    fn len(&self) -> usize {
        self.free.len()
    }

    /// Gershgorin lower bound on the spectrum.
    fn gershgorin_lower(&self) -> f64 {
        let mut lower = f64::INFINITY;
        for (j, col) in self.matrix.col_iter().enumerate() {
            let mut diag = 0.0;
            let mut off = 0.0;
            for (&i, &v) in col.row_indices().iter().zip(col.values()) {
                if i == j {
                    diag += v;
                } else {
                    off += v.abs();
                }
            }
            lower = lower.min(diag - off);
        }
        lower
    }

    fn shifted_factor(&self, shift: f64) -> Option<CscCholesky<f64>> {
        let mut m = self.matrix.clone();
        for (j, mut col) in m.col_iter_mut().enumerate() {
            let (rows, values) = col.rows_and_values_mut();
            if let Some(k) = rows.iter().position(|&i| i == j) {
                values[k] -= shift;
            }
        }
        CscCholesky::factor(&m).ok()
    }
}

/// Lowest eigenpair by shifted inverse power iteration.
///
/// The first shift sits `1 + |g|` below zero, `g` the Gershgorin lower bound
/// of `M^{-1/2} Q M^{-1/2}`, so the shifted operator is positive definite.
/// Once the Rayleigh quotient settles the shift is moved up towards it; a
/// successful Cholesky factorization certifies each new shift still lies
/// below the spectrum. Stops when the relative eigenvalue change is at most
/// `tol` and the residual at most [`EIGEN_RESIDUAL_TOL`].
pub fn lowest_eigenpair(form: &StabilityForm, tol: f64, seed: u64) -> Result<Eigenpair> {
    let op = ScaledOperator::new(form)?;
    let n = op.len();
    let mut shift = -(1.0 + op.gershgorin_lower().abs());
    let mut factor = op
        .shifted_factor(shift)
        .ok_or_else(|| Error::LinearSolve("Gershgorin-shifted operator is not positive definite".into()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DVector::from_iterator(n, (0..n).map(|_| rng.random_range(-1.0..1.0)));
    x /= x.norm();

    let mut lambda_prev = f64::INFINITY;
    for iteration in 1..=MAX_EIGEN_ITERATIONS {
        let mut y = factor.solve(&x).column(0).into_owned();
        let norm = y.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::LinearSolve("inverse iteration produced a degenerate vector".into()));
        }
        y /= norm;
        x = y;
        let ax = DVector::from_vec(csc_mul(&op.matrix, x.as_slice()));
        let lambda = x.dot(&ax);
        let r = &ax - lambda * &x;

        // residual in the original variables f = M^{-1/2} x
        let weighted_r: f64 = r.iter().zip(&op.sqrt_mass).map(|(r, s)| (s * r).powi(2)).sum::<f64>().sqrt();
        let weighted_x: f64 = x.iter().zip(&op.sqrt_mass).map(|(x, s)| (s * x).powi(2)).sum::<f64>().sqrt();
        let residual = weighted_r / weighted_x;
        let scale = lambda.abs().max(1.0);
        let change = (lambda - lambda_prev).abs();

        if change <= tol * scale && residual <= EIGEN_RESIDUAL_TOL {
            return Ok(finish(form, &op, &x, lambda, residual, iteration));
        }

        if change <= 1e-2 * scale {
            let margin = (10.0 * r.norm()).max(1e-6 * scale);
            let target = lambda - margin;
            if lambda - target < 0.5 * (lambda - shift) {
                if let Some(f) = op.shifted_factor(target) {
                    factor = f;
                    shift = target;
                }
            }
        }
        lambda_prev = lambda;
    }
    Err(Error::Stagnated(MAX_EIGEN_ITERATIONS))
}

fn finish(form: &StabilityForm, op: &ScaledOperator, x: &DVector<f64>, lambda: f64, residual: f64, iterations: usize) -> Eigenpair {
    let mut f = vec![0.0; form.len()];
    for (k, &i) in op.free.iter().enumerate() {
        f[i] = x[k] / op.sqrt_mass[k];
    }
    let norm = form.mass_norm_sq(&f).sqrt();
    // fix the sign: the entry of largest magnitude is positive
    let mut pivot = 0;
    for (i, v) in f.iter().enumerate() {
        if v.abs() > f[pivot].abs() {
            pivot = i;
        }
    }
    let sign = if f[pivot] < 0.0 { -1.0 } else { 1.0 };
    for v in &mut f {
        *v *= sign / norm;
    }
    Eigenpair {
        lambda,
        eigenfunction: f,
        residual,
        iterations,
    }
}

/// Stability verdict of a surface.
#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub lambda_min: f64,
    pub stable: bool,
    pub tol: f64,
    pub residual: f64,
    pub iterations: usize,
    pub unreliable_vertices: Vec<usize>,
    pub eigenfunction: Vec<f64>,
}

impl StabilityReport {
    /// CSV with columns `vertex,x,y,z,f` for colouring the mesh.
    pub fn eigenfunction_csv(&self, mesh: &TriangleMesh) -> String {
        let mut out = String::from("vertex,x,y,z,f\n");
        for (i, (p, f)) in mesh.vertices().iter().zip(&self.eigenfunction).enumerate() {
            out.push_str(&format!("{i},{:.15e},{:.15e},{:.15e},{f:.15e}\n", p.x, p.y, p.z));
        }
        out
    }
}

/// Stable iff `λ_min ≥ −tol`, natural boundary conditions, seed 0.
pub fn is_stable(mesh: &TriangleMesh, constraint: &LevelSetConstraint, tol: f64) -> Result<StabilityReport> {
    is_stable_with(mesh, constraint, tol, BoundaryCondition::Natural, 0)
}

pub fn is_stable_with(
    mesh: &TriangleMesh,
    constraint: &LevelSetConstraint,
    tol: f64,
    condition: BoundaryCondition,
    seed: u64,
) -> Result<StabilityReport> {
    let form = assemble_stability_form_with(mesh, constraint, condition)?;
    let pair = lowest_eigenpair(&form, 1e-10, seed)?;
    Ok(StabilityReport {
        lambda_min: pair.lambda,
        stable: pair.lambda >= -tol,
        tol,
        residual: pair.residual,
        iterations: pair.iterations,
        unreliable_vertices: form.unreliable,
        eigenfunction: pair.eigenfunction,
    })
}
