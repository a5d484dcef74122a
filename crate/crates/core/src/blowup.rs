//! Blow-up rescaling, curvature point picking, reflection across flat
//! constraints and the scale-invariant curvature survey.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::constraint::LevelSetConstraint;
use crate::error::{Error, Result};
use crate::mesh::{second_fundamental_norm, TriangleMesh, Vec3};
use crate::monotonicity::mass_in_ball;
use crate::variational::free_boundary_residual;

/// Distance within which a constrained vertex counts as lying on the mirror.
pub const WELD_TOL: f64 = 1e-8;

/// Largest orthogonality residual (radians) accepted before welding.
pub const MAX_WELD_RESIDUAL: f64 = 0.05;

/// The zoom `z ↦ λ (z − y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RescaleMap {
    center: Vec3,
    factor: f64,
}

impl RescaleMap {
    pub fn new(center: Vec3, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::Precondition(format!("rescale factor must be positive, got {factor}")));
        }
        Ok(RescaleMap { center, factor })
    }

    pub fn center(&self) -> Vec3 {
        self.center
    }

    pub fn factor(&self) -> f64 {
        self.factor
    }

    pub fn apply(&self, z: &Vec3) -> Vec3 {
        self.factor * (z - self.center)
    }
}

/// Applies the zoom to a mesh and its constraint.
pub fn rescale(
    mesh: &TriangleMesh,
    constraint: &LevelSetConstraint,
    map: &RescaleMap,
) -> Result<(TriangleMesh, LevelSetConstraint)> {
    let constraint = constraint.rescaled(&map.center, map.factor)?;
    Ok((mesh.map_vertices(|z| map.apply(z)), constraint))
}

/// Outcome of [`point_pick`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointPick {
    pub vertex: usize,
    /// `|A|(y) (r − |y − x|)`.
    pub score: f64,
    /// `r' = r − |y − x|`.
    pub recentered_radius: f64,
    /// Best `|A|(z) (r' − |z − y|)` over vertices in `B(y, r')`.
    pub recentered_score: f64,
    /// The picked vertex still attains the maximum after re-centering.
    pub recentering_holds: bool,
}

/// Picks the vertex maximizing `|A|(y) (r − |y − x|)` over `B(x, r)`, lowest
/// index on ties, and re-checks the maximum about the picked point.
pub fn point_pick(mesh: &TriangleMesh, curvature: &[f64], center: &Vec3, radius: f64) -> Result<PointPick> {
    let v = mesh.vertices();
    if curvature.len() != v.len() {
        return Err(Error::Precondition(format!(
            "curvature field has {} values for {} vertices",
            curvature.len(),
            v.len()
        )));
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, y) in v.iter().enumerate() {
        let d = (y - center).norm();
        if d >= radius {
            continue;
        }
        let score = curvature[i] * (radius - d);
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((i, score));
        }
    }
    let (vertex, score) = best.ok_or(Error::EmptyBall)?;
    let y = v[vertex];
    let recentered_radius = radius - (y - center).norm();
    let recentered_score = v
        .iter()
        .zip(curvature)
        .filter_map(|(z, a)| {
            let d = (z - y).norm();
            (d < recentered_radius).then(|| a * (recentered_radius - d))
        })
        .fold(0.0, f64::max);
    Ok(PointPick {
        vertex,
        score,
        recentered_radius,
        recentered_score,
        recentering_holds: recentered_score <= score * (1.0 + 1e-12),
    })
}

fn reflect(x: &Vec3, point: &Vec3, normal: &Vec3) -> Vec3 {
    x - 2.0 * (x - point).dot(normal) * normal
}

fn unit_normal(normal: &Vec3) -> Result<Vec3> {
    let len = normal.norm();
    if !(len > 0.0 && len.is_finite()) {
        return Err(Error::Precondition("mirror plane normal must be nonzero".into()));
    }
    Ok(normal / len)
}

/// Mirror image across the plane with faces reversed to keep orientation.
pub fn mirrored(mesh: &TriangleMesh, point: &Vec3, normal: &Vec3) -> Result<TriangleMesh> {
    let n = unit_normal(normal)?;
    let vertices = mesh.vertices().iter().map(|x| reflect(x, point, &n)).collect();
    let faces = mesh.faces().iter().map(|f| [f[0], f[2], f[1]]).collect();
    Ok(TriangleMesh::new(vertices, faces).with_constrained(mesh.constrained_vertices()))
}

/// Welds a free boundary surface on a plane with its mirror image.
pub fn reflect_double(mesh: &TriangleMesh, point: &Vec3, normal: &Vec3) -> Result<TriangleMesh> {
    let n = unit_normal(normal)?;
    let v = mesh.vertices();
    let seam = mesh.constrained_vertices();
    if let Some(&i) = seam.iter().find(|&&i| ((v[i] - point).dot(&n)).abs() > WELD_TOL) {
        return Err(Error::BoundaryNotOnPlane {
            vertex: i,
            offset: (v[i] - point).dot(&n),
        });
    }
    let plane = LevelSetConstraint::plane(*point, n);
    let residual = free_boundary_residual(mesh, &plane)?.max_angle;
    if residual > MAX_WELD_RESIDUAL {
        return Err(Error::ResidualTooLargeToWeld(residual));
    }

    let mut vertices = v.to_vec();
    let mut image = vec![usize::MAX; v.len()];
    for (i, x) in v.iter().enumerate() {
        if mesh.is_constrained(i) {
            image[i] = i;
        } else {
            image[i] = vertices.len();
            vertices.push(reflect(x, point, &n));
        }
    }
    let mut faces = mesh.faces().to_vec();
    faces.extend(mesh.faces().iter().map(|f| [image[f[0]], image[f[2]], image[f[1]]]));
    let doubled = TriangleMesh::new(vertices, faces);
    doubled.ensure_valid()?;
    Ok(doubled)
}

/// Hash of the mesh independent of vertex numbering and face order.
///
/// Coordinates are rounded to 1e-9 so that mirror images computed along
/// different routes agree.
pub fn canonical_hash(mesh: &TriangleMesh) -> String {
    let key = |x: &Vec3| -> [i64; 3] {
        let q = |c: f64| {
            let r = (c * 1e9).round() as i64;
            if r == 0 { 0 } else { r }
        };
        [q(x.x), q(x.y), q(x.z)]
    };
    let keys: Vec<[i64; 3]> = mesh.vertices().iter().map(key).collect();
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by_key(|&i| keys[i]);
    let mut rank = vec![0usize; keys.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    let mut faces: Vec<[usize; 3]> = mesh
        .faces()
        .iter()
        .map(|f| {
            let g = [rank[f[0]], rank[f[1]], rank[f[2]]];
            let m = (0..3).min_by_key(|&k| g[k]).expect("three corners");
            [g[m], g[(m + 1) % 3], g[(m + 2) % 3]]
        })
        .collect();
    faces.sort_unstable();
    let mut hasher = Sha256::new();
    for &i in &order {
        for c in keys[i] {
            hasher.update(c.to_le_bytes());
        }
    }
    for f in &faces {
        for c in f {
            hasher.update((*c as u64).to_le_bytes());
        }
    }
    hex::encode(hasher.finalize())
}

/// `max |A|(x) (R − |x − p|)` over vertices inside `B(p, R)`.
pub fn scaled_curvature_sup(mesh: &TriangleMesh, center: &Vec3, radius: f64) -> Result<f64> {
    let a = second_fundamental_norm(mesh)?.norm();
    Ok(mesh
        .vertices()
        .iter()
        .zip(&a)
        .filter_map(|(x, a)| {
            let d = (x - center).norm();
            (d < radius).then(|| a * (radius - d))
        })
        .fold(0.0, f64::max))
}

/// One solved scene entering the survey.
#[derive(Clone, Debug)]
pub struct SurveyEntry {
    pub id: String,
    pub mesh: TriangleMesh,
    pub lambda_min: f64,
    pub stable: bool,
    pub verified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SurveyRow {
    pub scenario: String,
    /// Area of the surface inside `B(p, R)`.
    pub area: f64,
    pub stable: bool,
    pub lambda_min: f64,
    pub sup_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SurveyExclusion {
    pub scenario: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvatureSurvey {
    pub center: [f64; 3],
    pub radius: f64,
    pub area_bound: f64,
    pub rows: Vec<SurveyRow>,
    /// Largest `sup_norm` over stable, verified rows within the area bound.
    pub empirical_c1: f64,
    pub excluded: Vec<SurveyExclusion>,
}

impl CurvatureSurvey {
    /// CSV with columns `scenario,area,stable,lambda_min,sup_norm`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scenario,area,stable,lambda_min,sup_norm\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.15e},{},{:.15e},{:.15e}\n",
                r.scenario, r.area, r.stable, r.lambda_min, r.sup_norm
            ));
        }
        out
    }
}

/// Tabulates `sup |A| dist(·, ∂B(p, R))` over a family and reports its
/// maximum over the stable members whose area in the ball is at most `area_bound`.
pub fn curvature_survey(
    entries: &[SurveyEntry],
    center: &Vec3,
    radius: f64,
    area_bound: f64,
) -> Result<CurvatureSurvey> {
    if !(radius > 0.0) {
        return Err(Error::Precondition(format!("survey radius must be positive, got {radius}")));
    }
    let mut rows = Vec::with_capacity(entries.len());
    let mut excluded = Vec::new();
    let mut empirical_c1: f64 = 0.0;
    for e in entries {
        let area = mass_in_ball(&e.mesh, center, radius)?.mass;
        let sup_norm = scaled_curvature_sup(&e.mesh, center, radius)?;
        let reason = if !e.verified {
            Some("not verified minimal")
        } else if !e.stable {
            Some("unstable")
        } else if area > area_bound {
            Some("area exceeds bound")
        } else {
            None
        };
        match reason {
            Some(reason) => excluded.push(SurveyExclusion {
                scenario: e.id.clone(),
                reason: reason.into(),
            }),
            None => empirical_c1 = empirical_c1.max(sup_norm),
        }
        rows.push(SurveyRow {
            scenario: e.id.clone(),
            area,
            stable: e.stable,
            lambda_min: e.lambda_min,
            sup_norm,
        });
    }
    Ok(CurvatureSurvey {
        center: [center.x, center.y, center.z],
        radius,
        area_bound,
        rows,
        empirical_c1,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{samplers, total_area};
    use std::f64::consts::PI;

    #[test]
    fn rescale_sphere_and_identity() {
        let m = samplers::half_disk(1.0, 8, 32);
        let (m2, c2) = rescale(&m, &LevelSetConstraint::unit_sphere(), &RescaleMap::new(Vec3::zeros(), 2.0).unwrap()).unwrap();
        assert_eq!(c2.analytic_kappa(), Some(0.5));
        assert!((total_area(&m2) - 4.0 * total_area(&m)).abs() < 1e-12);
        let (id, _) = rescale(&m, &LevelSetConstraint::unit_sphere(), &RescaleMap::new(Vec3::zeros(), 1.0).unwrap()).unwrap();
        for (a, b) in id.vertices().iter().zip(m.vertices()) {
            assert!((a - b).norm() < 1e-14);
        }
        let (m3, _) = rescale(&m, &LevelSetConstraint::unit_sphere(), &RescaleMap::new(Vec3::zeros(), 3.0).unwrap()).unwrap();
        assert!((total_area(&m3) / total_area(&m) - 9.0).abs() < 1e-8 * 9.0);
        assert!(RescaleMap::new(Vec3::zeros(), 0.0).is_err());
    }

    #[test]
    fn point_pick_rules() {
        let m = samplers::flat_square(6);
        let n = m.vertex_count();
        let x = Vec3::new(0.31, 0.52, 0.0);
        let pick = point_pick(&m, &vec![2.0; n], &x, 0.4).unwrap();
        let nearest = (0..n)
            .min_by(|&a, &b| (m.vertices()[a] - x).norm().total_cmp(&(m.vertices()[b] - x).norm()))
            .unwrap();
        assert_eq!(pick.vertex, nearest);
        assert!(pick.recentering_holds);

        let mut spike = vec![0.0; n];
        let target = (0..n).find(|&i| (m.vertices()[i] - x).norm() < 0.3 && i != nearest).unwrap();
        spike[target] = 1.0;
        let pick = point_pick(&m, &spike, &x, 0.4).unwrap();
        assert_eq!(pick.vertex, target);
        assert!((pick.recentered_score - pick.score).abs() < 1e-15);

        let err = point_pick(&m, &vec![1.0; n], &Vec3::new(5.0, 5.0, 5.0), 0.1).unwrap_err();
        assert!(matches!(err, Error::EmptyBall));
    }

    #[test]
    fn flat_half_strip_doubles_to_plane() {
        let half = samplers::rect_grid(0.0, 1.0, 0.0, 1.0, 8, 8).constrain_boundary_where(|p| p.x.abs() < 1e-12);
        let doubled = reflect_double(&half, &Vec3::zeros(), &Vec3::x()).unwrap();
        assert_eq!(doubled.vertex_count(), 2 * half.vertex_count() - 9);
        assert!(doubled.vertices().iter().all(|p| p.z == 0.0));
        assert!((total_area(&doubled) - 2.0).abs() < 1e-12);
        assert!(doubled.constrained_vertices().is_empty());
        let mirror = mirrored(&half, &Vec3::zeros(), &Vec3::x()).unwrap();
        let again = reflect_double(&mirror, &Vec3::zeros(), &Vec3::x()).unwrap();
        assert_eq!(canonical_hash(&doubled), canonical_hash(&again));
    }

    #[test]
    fn tilted_half_disk_is_refused() {
        let base = samplers::half_disk(1.0, 6, 24);
        let tilted = TriangleMesh::new(base.vertices().to_vec(), base.faces().to_vec())
            .map_vertices(|p| samplers::rotate_about_x(p, 0.2))
            .constrain_boundary_where(|p| p.y.abs() < 1e-12 && p.z.abs() < 1e-12);
        let err = reflect_double(&tilted, &Vec3::zeros(), &Vec3::y()).unwrap_err();
        assert!(matches!(err, Error::ResidualTooLargeToWeld(_)), "{err:?}");
    }

    #[test]
    fn flat_family_survey_is_zero() {
        let entries: Vec<SurveyEntry> = [1.0, 2.0, 4.0]
            .iter()
            .map(|&r| SurveyEntry {
                id: format!("disk-{r}"),
                mesh: samplers::disk(r, 6, 32),
                lambda_min: 0.0,
                stable: true,
                verified: true,
            })
            .collect();
        let survey = curvature_survey(&entries, &Vec3::zeros(), 1.0, 10.0).unwrap();
        assert_eq!(survey.empirical_c1, 0.0);
        assert!(survey.rows.iter().all(|r| (r.area - PI).abs() < 0.05));
        assert!(survey.to_csv().starts_with("scenario,area,stable,lambda_min,sup_norm\n"));
    }

    #[test]
    fn half_catenoid_doubles_to_catenoid() {
        use crate::mesh::mean_curvature_vector;
        let half = samplers::catenoid(1.0, 0.0, 1.0, 48, 16).constrain_boundary_where(|p| p.z.abs() < 1e-12);
        let doubled = reflect_double(&half, &Vec3::zeros(), &Vec3::z()).unwrap();
        let full = samplers::catenoid(1.0, -1.0, 1.0, 48, 32);
        assert_eq!(doubled.vertex_count(), full.vertex_count());
        for x in doubled.vertices() {
            let d = full.vertices().iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min);
            assert!(d <= 1e-8);
        }
        let h = mean_curvature_vector(&doubled);
        let h = h.as_vectors().unwrap();
        let boundary = doubled.boundary_vertex_set();
        let (mut seam, mut off) = (0.0_f64, 0.0_f64);
        for (i, x) in doubled.vertices().iter().enumerate() {
            if boundary.contains(&i) {
                continue;
            }
            if x.z.abs() < 1e-12 {
                seam = seam.max(h[i].norm());
            } else {
                off = off.max(h[i].norm());
            }
        }
        assert!(seam <= 2.0 * off, "{seam} {off}");
    }
}
