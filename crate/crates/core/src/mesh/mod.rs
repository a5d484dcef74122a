//! Triangle meshes with marked boundary, and the discrete operators the rest
//! of the crate is built on.
//!
//! A [`TriangleMesh`] is an immutable value: operations that move vertices
//! return a new mesh sharing the same combinatorics.

mod obj;
mod operators;
mod refine;
pub mod samplers;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub use obj::{read_constrained_sidecar, read_obj, write_constrained_sidecar, write_obj};
pub use operators::{
    boundary_conormal, boundary_length_weights, face_area, face_cotangents, face_normal,
    mean_curvature_vector, second_fundamental_norm, total_area, vertex_areas, vertex_normals,
    SecondFundamentalNorm, CORNER_ANGLE, COT_CLAMP,
};
pub use refine::refine;
pub(crate) use operators::cotangent_laplacian_of_position;

pub type Vec3 = Vector3<f64>;

/// Relative floor under which a face counts as degenerate: area must exceed
/// this times the squared mesh diameter.
pub const DEGENERATE_AREA_FACTOR: f64 = 1e-14;

/// Per-vertex values: one scalar or one 3-vector per vertex.
#[derive(Clone, Debug, PartialEq)]
pub enum VertexField {
    Scalar(Vec<f64>),
    Vector(Vec<Vec3>),
}

impl VertexField {
    pub fn len(&self) -> usize {
        match self {
            VertexField::Scalar(v) => v.len(),
            VertexField::Vector(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_finite(&self) -> bool {
        match self {
            VertexField::Scalar(v) => v.iter().all(|x| x.is_finite()),
            VertexField::Vector(v) => v.iter().all(|x| x.iter().all(|c| c.is_finite())),
        }
    }

    pub fn as_scalars(&self) -> Option<&[f64]> {
        match self {
            VertexField::Scalar(v) => Some(v),
            VertexField::Vector(_) => None,
        }
    }

    pub fn as_vectors(&self) -> Option<&[Vec3]> {
        match self {
            VertexField::Vector(v) => Some(v),
            VertexField::Scalar(_) => None,
        }
    }
}

/// An immersed surface with boundary, stored as an indexed triangle list.
///
/// Boundary loops are derived from the faces at construction time; each loop
/// follows the orientation induced by the faces. `constrained[i]` marks the
/// boundary vertices that must lie on the constraint hypersurface; the other
/// boundary vertices are held fixed by the solver.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    boundary_loops: Vec<Vec<usize>>,
    constrained: Vec<bool>,
}

impl TriangleMesh {
    /// Builds a mesh and extracts its boundary loops. No vertex is constrained.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Self {
        let boundary_loops = extract_boundary_loops(&faces);
        let constrained = vec![false; vertices.len()];
        TriangleMesh {
            vertices,
            faces,
            boundary_loops,
            constrained,
        }
    }

    /// Marks the given vertices as constrained. Interior vertices are ignored.
    pub fn with_constrained<I: IntoIterator<Item = usize>>(mut self, indices: I) -> Self {
        let boundary = self.boundary_vertex_set();
        for i in indices {
            if i < self.constrained.len() && boundary.contains(&i) {
                self.constrained[i] = true;
            }
        }
        self
    }

    /// Marks every boundary vertex accepted by `pred` as constrained.
    pub fn constrain_boundary_where(self, pred: impl Fn(&Vec3) -> bool) -> Self {
        let picked: Vec<usize> = self
            .boundary_vertices()
            .into_iter()
            .filter(|&i| pred(&self.vertices[i]))
            .collect();
        self.with_constrained(picked)
    }

    /// Marks every boundary vertex as constrained.
    pub fn constrain_all_boundary(self) -> Self {
        let all = self.boundary_vertices();
        self.with_constrained(all)
    }

    /// Same combinatorics and constraint flags, new positions.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Self {
        assert_eq!(vertices.len(), self.vertices.len(), "vertex count mismatch");
        TriangleMesh {
            vertices,
            faces: self.faces.clone(),
            boundary_loops: self.boundary_loops.clone(),
            constrained: self.constrained.clone(),
        }
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn boundary_loops(&self) -> &[Vec<usize>] {
        &self.boundary_loops
    }

    pub fn constrained_flags(&self) -> &[bool] {
        &self.constrained
    }

    pub fn is_constrained(&self, i: usize) -> bool {
        self.constrained[i]
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Boundary vertices in loop order.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        self.boundary_loops.iter().flatten().copied().collect()
    }

    pub fn boundary_vertex_set(&self) -> BTreeSet<usize> {
        self.boundary_loops.iter().flatten().copied().collect()
    }

    pub fn constrained_vertices(&self) -> Vec<usize> {
        (0..self.vertices.len()).filter(|&i| self.constrained[i]).collect()
    }

    /// `is_boundary[i]` for every vertex.
    pub fn boundary_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.vertices.len()];
        for &i in self.boundary_loops.iter().flatten() {
            mask[i] = true;
        }
        mask
    }

    /// Boundary edges as directed pairs following the face orientation.
    pub fn boundary_edges(&self) -> Vec<(usize, usize)> {
        directed_boundary_edges(&self.faces)
    }

    /// Undirected edges in first-seen order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                if seen.insert(key) {
                    out.push(key);
                }
            }
        }
        out
    }

    /// Sorted neighbour lists.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut sets = vec![BTreeSet::new(); self.vertices.len()];
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                sets[a].insert(b);
                sets[b].insert(a);
            }
        }
        sets.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    /// Diagonal of the axis-aligned bounding box.
    pub fn diameter(&self) -> f64 {
        if self.vertices.is_empty() {
            return 0.0;
        }
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (hi - lo).norm()
    }

    /// Longest edge length.
    pub fn max_edge_length(&self) -> f64 {
        self.edges()
            .iter()
            .map(|&(a, b)| (self.vertices[a] - self.vertices[b]).norm())
            .fold(0.0, f64::max)
    }

    /// Applies `map` to every vertex position.
    pub fn map_vertices(&self, map: impl FnMut(&Vec3) -> Vec3) -> Self {
        self.with_vertices(self.vertices.iter().map(map).collect())
    }

    /// Reverses every face, flipping the orientation.
    pub fn flipped(&self) -> Self {
        let faces = self.faces.iter().map(|f| [f[0], f[2], f[1]]).collect();
        let flags = self.constrained.clone();
        let mut m = TriangleMesh::new(self.vertices.clone(), faces);
        m.constrained = flags;
        m
    }

    pub(crate) fn from_parts(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>, constrained: Vec<bool>) -> Self {
        let mut m = TriangleMesh::new(vertices, faces);
        let boundary = m.boundary_mask();
        m.constrained = constrained
            .into_iter()
            .zip(boundary)
            .map(|(c, b)| c && b)
            .collect();
        m
    }

    /// Returns an error carrying the first few violations if the mesh is invalid.
    pub fn ensure_valid(&self) -> Result<()> {
        let violations = validate_mesh(self);
        if violations.is_empty() {
            Ok(())
        } else {
            let msg: Vec<String> = violations.iter().take(5).map(|v| v.to_string()).collect();
            Err(Error::InvalidMesh(msg.join("; ")))
        }
    }
}

/// A broken mesh invariant, naming the offending simplex.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    IndexOutOfRange { face: usize },
    RepeatedIndex { face: usize },
    NonFiniteVertex { vertex: usize },
    DegenerateFace { face: usize, area: f64 },
    EdgeSameDirection { a: usize, b: usize },
    EdgeOvershared { a: usize, b: usize, count: usize },
    NonManifoldBoundaryVertex { vertex: usize },
    ConstrainedInterior { vertex: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::IndexOutOfRange { face } => write!(f, "face {face}: index out of range"),
            Violation::RepeatedIndex { face } => {
                write!(f, "degenerate face {face}: repeated vertex index")
            }
            Violation::NonFiniteVertex { vertex } => write!(f, "vertex {vertex}: non-finite coordinate"),
            Violation::DegenerateFace { face, area } => {
                write!(f, "degenerate face {face}: area {area:e}")
            }
            Violation::EdgeSameDirection { a, b } => {
                write!(f, "edge ({a},{b}) appears twice in same direction")
            }
            Violation::EdgeOvershared { a, b, count } => {
                write!(f, "edge ({a},{b}) shared by {count} faces")
            }
            Violation::NonManifoldBoundaryVertex { vertex } => {
                write!(f, "vertex {vertex}: boundary is not a simple loop through it")
            }
            Violation::ConstrainedInterior { vertex } => {
                write!(f, "vertex {vertex}: constrained flag on an interior vertex")
            }
        }
    }
}

/// Checks every mesh invariant. An empty list means the mesh is valid.
pub fn validate_mesh(mesh: &TriangleMesh) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = mesh.vertices.len();

    for (i, v) in mesh.vertices.iter().enumerate() {
        if !v.iter().all(|c| c.is_finite()) {
            out.push(Violation::NonFiniteVertex { vertex: i });
        }
    }

    let diam = mesh.diameter();
    let area_floor = DEGENERATE_AREA_FACTOR * diam * diam;
    let mut index_ok = true;
    for (fi, f) in mesh.faces.iter().enumerate() {
        if f.iter().any(|&i| i >= n) {
            out.push(Violation::IndexOutOfRange { face: fi });
            index_ok = false;
            continue;
        }
        if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
            out.push(Violation::RepeatedIndex { face: fi });
            continue;
        }
        let area = face_area(&mesh.vertices, f);
        if !(area > area_floor) {
            out.push(Violation::DegenerateFace { face: fi, area });
        }
    }
    if !index_ok {
        return out;
    }

    let mut directed: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for f in &mesh.faces {
        for k in 0..3 {
            let e = (f[k], f[(k + 1) % 3]);
            if e.0 != e.1 {
                *directed.entry(e).or_default() += 1;
            }
        }
    }
    let mut undirected: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (&(a, b), &c) in &directed {
        if c > 1 {
            out.push(Violation::EdgeSameDirection { a, b });
        }
        *undirected.entry((a.min(b), a.max(b))).or_default() += c;
    }
    for (&(a, b), &c) in &undirected {
        if c > 2 {
            out.push(Violation::EdgeOvershared { a, b, count: c });
        }
    }

    // Boundary edges must form simple loops: one outgoing and one incoming
    // boundary edge per boundary vertex.
    let mut outgoing = vec![0usize; n];
    let mut incoming = vec![0usize; n];
    for (a, b) in directed_boundary_edges(&mesh.faces) {
        outgoing[a] += 1;
        incoming[b] += 1;
    }
    for i in 0..n {
        if outgoing[i] > 1 || incoming[i] > 1 || outgoing[i] != incoming[i] {
            out.push(Violation::NonManifoldBoundaryVertex { vertex: i });
        }
    }

    let boundary = mesh.boundary_mask();
    for (i, (&c, &b)) in mesh.constrained.iter().zip(&boundary).enumerate() {
        if c && !b {
            out.push(Violation::ConstrainedInterior { vertex: i });
        }
    }
    out
}

fn directed_boundary_edges(faces: &[[usize; 3]]) -> Vec<(usize, usize)> {
    let mut count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for f in faces {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let mut out = Vec::new();
    for f in faces {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            if count[&(a.min(b), a.max(b))] == 1 {
                out.push((a, b));
            }
        }
    }
    out
}

fn extract_boundary_loops(faces: &[[usize; 3]]) -> Vec<Vec<usize>> {
    let edges = directed_boundary_edges(faces);
    let mut next: BTreeMap<usize, usize> = BTreeMap::new();
    for &(a, b) in &edges {
        next.entry(a).or_insert(b);
    }
    let mut visited = BTreeSet::new();
    let mut loops = Vec::new();
    for &start in next.keys() {
        if visited.contains(&start) {
            continue;
        }
        let mut lp = vec![start];
        visited.insert(start);
        let mut cur = start;
        while let Some(&nx) = next.get(&cur) {
            if nx == start || !visited.insert(nx) {
                break;
            }
            lp.push(nx);
            cur = nx;
        }
        loops.push(lp);
    }
    loops
}
