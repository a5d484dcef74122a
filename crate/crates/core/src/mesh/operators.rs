use nalgebra::{Matrix2, Vector2};

use super::{TriangleMesh, Vec3, VertexField};
use crate::error::{Error, Result};

/// Cotangent weights are clamped to `[-COT_CLAMP, COT_CLAMP]`.
pub const COT_CLAMP: f64 = 1e4;

pub fn face_area(vertices: &[Vec3], f: &[usize; 3]) -> f64 {
    let (a, b, c) = (vertices[f[0]], vertices[f[1]], vertices[f[2]]);
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Unit normal of a face following its orientation; zero for a degenerate face.
pub fn face_normal(vertices: &[Vec3], f: &[usize; 3]) -> Vec3 {
    let (a, b, c) = (vertices[f[0]], vertices[f[1]], vertices[f[2]]);
    let n = (b - a).cross(&(c - a));
    let len = n.norm();
    if len > 0.0 {
        n / len
    } else {
        Vec3::zeros()
    }
}

/// Clamped cotangent of the interior angle at each corner of a face.
pub fn face_cotangents(vertices: &[Vec3], f: &[usize; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for k in 0..3 {
        let o = vertices[f[k]];
        let e1 = vertices[f[(k + 1) % 3]] - o;
        let e2 = vertices[f[(k + 2) % 3]] - o;
        let cross = e1.cross(&e2).norm();
        let cot = if cross > 0.0 {
            e1.dot(&e2) / cross
        } else {
            COT_CLAMP.copysign(e1.dot(&e2))
        };
        out[k] = cot.clamp(-COT_CLAMP, COT_CLAMP);
    }
    out
}

pub fn total_area(mesh: &TriangleMesh) -> f64 {
    mesh.faces()
        .iter()
        .map(|f| face_area(mesh.vertices(), f))
        .sum()
}

/// One-third barycentric vertex areas.
pub fn vertex_areas(mesh: &TriangleMesh) -> Vec<f64> {
    let mut a = vec![0.0; mesh.vertex_count()];
    for f in mesh.faces() {
        let third = face_area(mesh.vertices(), f) / 3.0;
        for &i in f {
            a[i] += third;
        }
    }
    a
}

/// Boundary length weights: half the summed length of the incident boundary
/// edges, zero at interior vertices.
pub fn boundary_length_weights(mesh: &TriangleMesh) -> Vec<f64> {
    let mut l = vec![0.0; mesh.vertex_count()];
    for (a, b) in mesh.boundary_edges() {
        let len = (mesh.vertices()[a] - mesh.vertices()[b]).norm();
        l[a] += 0.5 * len;
        l[b] += 0.5 * len;
    }
    l
}

/// Area-weighted average of incident face normals, normalised.
pub fn vertex_normals(mesh: &TriangleMesh) -> Result<VertexField> {
    let v = mesh.vertices();
    let mut sum = vec![Vec3::zeros(); v.len()];
    let mut weight = vec![0.0; v.len()];
    for f in mesh.faces() {
        let n2 = (v[f[1]] - v[f[0]]).cross(&(v[f[2]] - v[f[0]]));
        let w = n2.norm();
        for &i in f {
            sum[i] += n2;
            weight[i] += w;
        }
    }
    let mut out = Vec::with_capacity(v.len());
    for (i, (s, w)) in sum.iter().zip(&weight).enumerate() {
        let len = s.norm();
        if !(len > 1e-12 * w.max(f64::MIN_POSITIVE)) {
            return Err(Error::DegenerateNormal { vertex: i });
        }
        out.push(s / len);
    }
    Ok(VertexField::Vector(out))
}

/// Raw cotangent Laplacian of the position, `(1/2) Σ (cot α + cot β)(x_j - x_i)`.
/// This is minus the gradient of the total area with respect to each vertex.
pub(crate) fn cotangent_laplacian_of_position(mesh: &TriangleMesh) -> Vec<Vec3> {
    let v = mesh.vertices();
    let mut out = vec![Vec3::zeros(); v.len()];
    for f in mesh.faces() {
        let cot = face_cotangents(v, f);
        for k in 0..3 {
            // the corner k is opposite edge (i, j)
            let i = f[(k + 1) % 3];
            let j = f[(k + 2) % 3];
            let w = 0.5 * cot[k];
            let d = v[j] - v[i];
            out[i] += w * d;
            out[j] -= w * d;
        }
    }
    out
}

/// Discrete mean curvature vector: cotangent Laplacian of position over the
/// lumped vertex area.
///
/// At boundary vertices the same expression is returned; there it also carries
/// the conormal contribution of the boundary (it is the discrete area gradient
/// divided by `-a_i`).
pub fn mean_curvature_vector(mesh: &TriangleMesh) -> VertexField {
    let lap = cotangent_laplacian_of_position(mesh);
    let area = vertex_areas(mesh);
    VertexField::Vector(
        lap.iter()
            .zip(&area)
            .map(|(l, a)| if *a > 0.0 { l / *a } else { Vec3::zeros() })
            .collect(),
    )
}

/// Per-vertex |A|² from a least-squares fit of the shape operator.
#[derive(Clone, Debug)]
pub struct SecondFundamentalNorm {
    pub norm_sq: Vec<f64>,
    /// false where the 1-ring spans fewer than 3 distinct directions
    pub reliable: Vec<bool>,
}

impl SecondFundamentalNorm {
    pub fn field(&self) -> VertexField {
        VertexField::Scalar(self.norm_sq.clone())
    }

    /// |A| (square root of the squared norm).
    pub fn norm(&self) -> Vec<f64> {
        self.norm_sq.iter().map(|x| x.sqrt()).collect()
    }

    pub fn unreliable_vertices(&self) -> Vec<usize> {
        (0..self.reliable.len()).filter(|&i| !self.reliable[i]).collect()
    }
}

/// Fits the shape operator `S d ≈ dν` over the 1-ring edge directions in the
/// tangent plane, symmetrises it and returns its squared Frobenius norm.
pub fn second_fundamental_norm(mesh: &TriangleMesh) -> Result<SecondFundamentalNorm> {
    let normals = vertex_normals(mesh)?;
    let normals = normals.as_vectors().expect("vector field");
    let neighbors = mesh.vertex_neighbors();
    let v = mesh.vertices();
    let mut norm_sq = vec![0.0; v.len()];
    let mut reliable = vec![true; v.len()];

    for i in 0..v.len() {
        let n = normals[i];
        let (e1, e2) = tangent_basis(&n);
        let mut dd = Matrix2::zeros();
        let mut gd = Matrix2::zeros();
        let mut dirs: Vec<Vector2<f64>> = Vec::new();
        for &j in &neighbors[i] {
            let e = v[j] - v[i];
            let d = Vector2::new(e.dot(&e1), e.dot(&e2));
            let dn = normals[j] - n;
            let g = Vector2::new(dn.dot(&e1), dn.dot(&e2));
            dd += d * d.transpose();
            gd += g * d.transpose();
            let len = d.norm();
            if len > 0.0 {
                let u = d / len;
                if !dirs.iter().any(|w| w.dot(&u) > 1.0 - 1e-9) {
                    dirs.push(u);
                }
            }
        }
        if dirs.len() < 3 {
            reliable[i] = false;
        }
        match dd.try_inverse() {
            Some(inv) if dd.determinant().abs() > 1e-300 => {
                let s = gd * inv;
                let sym = 0.5 * (s + s.transpose());
                norm_sq[i] = sym.norm_squared();
            }
            _ => {
                reliable[i] = false;
            }
        }
    }
    Ok(SecondFundamentalNorm { norm_sq, reliable })
}

/// Orthonormal pair spanning the plane orthogonal to the unit vector `n`.
pub(crate) fn tangent_basis(n: &Vec3) -> (Vec3, Vec3) {
    let axis = if n.x.abs() <= n.y.abs() && n.x.abs() <= n.z.abs() {
        Vec3::x()
    } else if n.y.abs() <= n.z.abs() {
        Vec3::y()
    } else {
        Vec3::z()
    };
    let e1 = (axis - n * n.dot(&axis)).normalize();
    let e2 = n.cross(&e1);
    (e1, e2)
}

/// Boundary turns sharper than this (angle between the outward normals of
/// the two incident boundary edges) make a vertex a corner.
pub const CORNER_ANGLE: f64 = std::f64::consts::FRAC_PI_4;

/// Outward unit conormal at every boundary vertex (`None` at interior vertices).
///
/// Averages the in-plane outward normals of the incident boundary edges,
/// projects onto the tangent plane and renormalises. At a constrained corner
/// (see [`CORNER_ANGLE`]) only edges to constrained neighbours are used, so the
/// conormal there is the one-sided conormal of the constrained arc.
pub fn boundary_conormal(mesh: &TriangleMesh) -> Result<Vec<Option<Vec3>>> {
    let v = mesh.vertices();
    let normals = vertex_normals(mesh)?;
    let normals = normals.as_vectors().expect("vector field");
    let constrained = mesh.constrained_flags();
    let boundary_edges: std::collections::HashSet<(usize, usize)> =
        mesh.boundary_edges().into_iter().collect();
    // outward normal of each incident boundary edge, tagged by the other endpoint
    let mut incident: Vec<Vec<(usize, Vec3)>> = vec![Vec::new(); v.len()];
    for f in mesh.faces() {
        let fnormal = face_normal(v, f);
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            if !boundary_edges.contains(&(a, b)) {
                continue;
            }
            let out = (v[b] - v[a]).cross(&fnormal);
            let len = out.norm();
            if len == 0.0 {
                continue;
            }
            incident[a].push((b, out / len));
            incident[b].push((a, out / len));
        }
    }

    let mut eta = vec![None; v.len()];
    for &i in mesh.boundary_loops().iter().flatten() {
        let edges = &incident[i];
        let corner = edges.len() == 2 && edges[0].1.angle(&edges[1].1) > CORNER_ANGLE;
        let one_sided = constrained[i] && corner && edges.iter().any(|(j, _)| constrained[*j]);
        let raw: Vec3 = edges
            .iter()
            .filter(|(j, _)| !one_sided || constrained[*j])
            .map(|(_, out)| *out)
            .sum();
        let n = normals[i];
        let t = raw - n * n.dot(&raw);
        let len = t.norm();
        if edges.is_empty() || !(len > 1e-12) {
            return Err(Error::UndefinedConormal { vertex: i });
        }
        eta[i] = Some(t / len);
    }
    Ok(eta)
}
