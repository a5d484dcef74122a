use std::collections::HashMap;

use super::TriangleMesh;

/// Midpoint 1→4 subdivision.
///
/// Original vertices keep their indices; edge midpoints follow in order of
/// first appearance. A midpoint is constrained iff it splits a boundary edge
/// whose two endpoints are constrained. Midpoints are not projected onto any
/// constraint.
pub fn refine(mesh: &TriangleMesh) -> TriangleMesh {
    let v = mesh.vertices();
    let mut vertices = v.to_vec();
    let mut constrained = mesh.constrained_flags().to_vec();
    let boundary: std::collections::HashSet<(usize, usize)> = mesh
        .boundary_edges()
        .into_iter()
        .map(|(a, b)| (a.min(b), a.max(b)))
        .collect();
    let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
    let mut faces = Vec::with_capacity(4 * mesh.face_count());

    let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<_>, constrained: &mut Vec<bool>| {
        let key = (a.min(b), a.max(b));
        *mid.entry(key).or_insert_with(|| {
            vertices.push(0.5 * (v[a] + v[b]));
            constrained.push(boundary.contains(&key) && mesh.is_constrained(a) && mesh.is_constrained(b));
            vertices.len() - 1
        })
    };

    for f in mesh.faces() {
        let [a, b, c] = *f;
        let ab = midpoint(a, b, &mut vertices, &mut constrained);
        let bc = midpoint(b, c, &mut vertices, &mut constrained);
        let ca = midpoint(c, a, &mut vertices, &mut constrained);
        faces.push([a, ab, ca]);
        faces.push([ab, b, bc]);
        faces.push([ca, bc, c]);
        faces.push([ab, bc, ca]);
    }
    TriangleMesh::from_parts(vertices, faces, constrained)
}
