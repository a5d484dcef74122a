//! Wavefront OBJ subset (`v` and `f` records, 1-based indices) plus a JSON
//! sidecar listing constrained vertices as 0-based indices.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{TriangleMesh, Vec3};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    constrained: Vec<usize>,
}

/// Serialises vertices and faces in input order.
pub fn write_obj(mesh: &TriangleMesh) -> String {
    let mut s = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    s
}

pub fn read_obj(text: &str) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let bad = |what: &str| Error::Parse(format!("line {}: {what}", lineno + 1));
        match parts.next() {
            Some("v") => {
                let c: Vec<f64> = parts
                    .take(3)
                    .map(|t| t.parse::<f64>().map_err(|_| bad("bad coordinate")))
                    .collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(bad("vertex needs 3 coordinates"));
                }
                vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = parts
                    .map(|t| {
                        let first = t.split('/').next().unwrap_or("");
                        match first.parse::<usize>() {
                            Ok(i) if i >= 1 => Ok(i - 1),
                            _ => Err(bad("bad face index")),
                        }
                    })
                    .collect::<Result<_>>()?;
                if idx.len() != 3 {
                    return Err(bad("only triangle faces are supported"));
                }
                faces.push([idx[0], idx[1], idx[2]]);
            }
            Some(other) => return Err(bad(&format!("unsupported record `{other}`"))),
            None => {}
        }
    }
    Ok(TriangleMesh::new(vertices, faces))
}

pub fn write_constrained_sidecar(mesh: &TriangleMesh) -> String {
    let sc = Sidecar {
        constrained: mesh.constrained_vertices(),
    };
    serde_json::to_string(&sc).expect("sidecar serialises")
}

pub fn read_constrained_sidecar(mesh: TriangleMesh, text: &str) -> Result<TriangleMesh> {
    let sc: Sidecar = serde_json::from_str(text)?;
    if let Some(&bad) = sc.constrained.iter().find(|&&i| i >= mesh.vertex_count()) {
        return Err(Error::Parse(format!("constrained index {bad} out of range")));
    }
    Ok(mesh.with_constrained(sc.constrained))
}

impl TriangleMesh {
    /// Reads an OBJ file and, if present, its `.constrained.json` sidecar.
    pub fn load(path: &Path, sidecar: Option<&Path>) -> Result<TriangleMesh> {
        let mesh = read_obj(&std::fs::read_to_string(path)?)?;
        match sidecar {
            Some(sc) => read_constrained_sidecar(mesh, &std::fs::read_to_string(sc)?),
            None => Ok(mesh),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::samplers;
    use super::*;

    #[test]
    fn obj_round_trip_is_bit_exact() {
        let m = samplers::half_disk(1.0, 3, 7).constrain_boundary_where(|p| p.y > 1e-9);
        let text = write_obj(&m);
        let back = read_constrained_sidecar(read_obj(&text).unwrap(), &write_constrained_sidecar(&m)).unwrap();
        assert_eq!(back, m);
        assert_eq!(write_obj(&back), text);
    }

    #[test]
    fn quads_are_rejected() {
        let err = read_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap_err();
        assert!(err.to_string().contains("triangle"));
    }

    #[test]
    fn slash_indices_are_accepted() {
        let m = read_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1/1 2/2/2 3/3/3\n").unwrap();
        assert_eq!(m.faces(), &[[0, 1, 2]]);
    }
}
