//! Analytic mesh generators used by tests, examples and builtin scenarios.
//!
//! All generators return meshes with no constrained vertices; callers mark
//! the boundary pieces that should slide on a constraint.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{TriangleMesh, Vec3};

/// Structured grid over `[x0,x1]×[y0,y1]` in the plane z = 0, normals +z.
pub fn rect_grid(x0: f64, x1: f64, y0: f64, y1: f64, nx: usize, ny: usize) -> TriangleMesh {
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let x = x0 + (x1 - x0) * i as f64 / nx as f64;
            let y = y0 + (y1 - y0) * j as f64 / ny as f64;
            vertices.push(Vec3::new(x, y, 0.0));
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut faces = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriangleMesh::new(vertices, faces)
}

/// Unit square `[0,1]²` with `n` segments per side.
pub fn flat_square(n: usize) -> TriangleMesh {
    rect_grid(0.0, 1.0, 0.0, 1.0, n, n)
}

/// Polar mesh of the sector `r ≤ radius`, `θ ∈ [θ0, θ1]` in z = 0.
///
/// `closed` wraps the angular direction (full disk). Ring `k` has
/// `n_theta` angular segments; the centre is a single vertex.
fn polar_sector(radius: f64, n_r: usize, n_theta: usize, theta0: f64, theta1: f64, closed: bool) -> TriangleMesh {
    let cols = if closed { n_theta } else { n_theta + 1 };
    let mut vertices = vec![Vec3::zeros()];
    for k in 1..=n_r {
        let r = radius * k as f64 / n_r as f64;
        for j in 0..cols {
            let th = theta0 + (theta1 - theta0) * j as f64 / n_theta as f64;
            let (s, c) = th.sin_cos();
            let (x, y) = if k == n_r { snap_to_circle(radius, c, s) } else { (r * c, r * s) };
            vertices.push(Vec3::new(x, y, 0.0));
        }
    }
    let id = |k: usize, j: usize| if k == 0 { 0 } else { 1 + (k - 1) * cols + (j % cols) };
    let mut faces = Vec::new();
    for j in 0..n_theta {
        faces.push([0, id(1, j), id(1, j + 1)]);
    }
    for k in 1..n_r {
        for j in 0..n_theta {
            faces.push([id(k, j), id(k + 1, j), id(k + 1, j + 1)]);
            faces.push([id(k, j), id(k + 1, j + 1), id(k, j + 1)]);
        }
    }
    TriangleMesh::new(vertices, faces)
}

fn snap_to_circle(radius: f64, c: f64, s: f64) -> (f64, f64) {
    let n = (c * c + s * s).sqrt();
    (radius * c / n, radius * s / n)
}

/// Full flat disk of the given radius centred at the origin in z = 0.
pub fn disk(radius: f64, n_r: usize, n_theta: usize) -> TriangleMesh {
    polar_sector(radius, n_r, n_theta, 0.0, 2.0 * PI, true)
}

/// Flat half-disk `{y ≥ 0}` in z = 0; its diameter lies on the x-axis.
pub fn half_disk(radius: f64, n_r: usize, n_theta: usize) -> TriangleMesh {
    polar_sector(radius, n_r, n_theta, 0.0, PI, false)
}

/// Half-disk graph `z = h · y(1 − x² − y²) / m`, normalised so the bulge peaks at `h`.
/// The arc stays on the equator of the unit sphere and the diameter stays on the x-axis.
pub fn half_disk_bulge(height: f64, n_r: usize, n_theta: usize) -> TriangleMesh {
    let peak = 2.0 / (3.0 * 3.0_f64.sqrt());
    half_disk(1.0, n_r, n_theta).map_vertices(|p| {
        let z = height * p.y * (1.0 - p.x * p.x - p.y * p.y) / peak;
        Vec3::new(p.x, p.y, z)
    })
}

/// Full disk graph `z = h (1 − r²)` over the unit disk.
pub fn disk_bulge(height: f64, n_r: usize, n_theta: usize) -> TriangleMesh {
    disk(1.0, n_r, n_theta).map_vertices(|p| Vec3::new(p.x, p.y, height * (1.0 - p.x * p.x - p.y * p.y)))
}

/// Full disk graph `z = h · y(1 − r²) / m`, odd under `(x, y, z) ↦ (x, −y, −z)`,
/// normalised so the bulge peaks at `h`. The boundary stays on the equator.
pub fn disk_odd_bulge(height: f64, n_r: usize, n_theta: usize) -> TriangleMesh {
    let peak = 2.0 / (3.0 * 3.0_f64.sqrt());
    disk(1.0, n_r, n_theta).map_vertices(|p| {
        let z = height * p.y * (1.0 - p.x * p.x - p.y * p.y) / peak;
        Vec3::new(p.x, p.y, z)
    })
}

/// Flat disk cut from the unit ball by the plane through `(1,0,0)` tilted by
/// `angle` about the tangent line `(1, s, 0)`. It meets the unit sphere at the
/// constant angle `angle` away from orthogonal.
pub fn tilted_disk(angle: f64, n_r: usize, n_theta: usize) -> TriangleMesh {
    let (sa, ca) = angle.sin_cos();
    let normal = Vec3::new(sa, 0.0, ca);
    let centre = sa * normal;
    let u1 = Vec3::new(ca, 0.0, -sa);
    let u2 = Vec3::y();
    disk(ca, n_r, n_theta).map_vertices(|p| centre + p.x * u1 + p.y * u2)
}

/// Rotation of `p` about the x-axis by `angle`.
pub fn rotate_about_x(p: &Vec3, angle: f64) -> Vec3 {
    let (s, c) = angle.sin_cos();
    Vec3::new(p.x, c * p.y - s * p.z, s * p.y + c * p.z)
}

/// Surface of revolution about the z-axis, `(ρ(t) cos θ, ρ(t) sin θ, z(t))`,
/// `t ∈ [t0, t1]` with `n_t` segments and `n_theta` angular segments.
/// Faces are oriented so the normal points away from the axis.
fn revolution(n_theta: usize, n_t: usize, t0: f64, t1: f64, profile: impl Fn(f64) -> (f64, f64)) -> TriangleMesh {
    let mut vertices = Vec::with_capacity(n_theta * (n_t + 1));
    for j in 0..=n_t {
        let t = if j == n_t { t1 } else { t0 + (t1 - t0) * j as f64 / n_t as f64 };
        let (rho, z) = profile(t);
        for i in 0..n_theta {
            let th = 2.0 * PI * i as f64 / n_theta as f64;
            let (s, c) = th.sin_cos();
            vertices.push(Vec3::new(rho * c, rho * s, z));
        }
    }
    let id = |i: usize, j: usize| j * n_theta + (i % n_theta);
    let mut faces = Vec::with_capacity(2 * n_theta * n_t);
    for j in 0..n_t {
        for i in 0..n_theta {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriangleMesh::new(vertices, faces)
}

/// Catenoid `a (cosh t cos θ, cosh t sin θ, t)` for `t ∈ [t0, t1]`.
pub fn catenoid(a: f64, t0: f64, t1: f64, n_theta: usize, n_t: usize) -> TriangleMesh {
    revolution(n_theta, n_t, t0, t1, |t| (a * t.cosh(), a * t))
}

/// Cylinder of the given radius about the z-axis, `z ∈ [0, height]`.
pub fn cylinder(radius: f64, height: f64, n_theta: usize, n_z: usize) -> TriangleMesh {
    revolution(n_theta, n_z, 0.0, height, |t| (radius, t))
}

/// Root of `t tanh t = 1` by bisection on `[1, 2]`.
pub fn critical_catenoid_parameter() -> f64 {
    let f = |t: f64| t * t.tanh() - 1.0;
    let (mut lo, mut hi) = (1.0_f64, 2.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Scale `a` for which the catenoid with `t ∈ [-t0, t0]` has its boundary
/// circles on the unit sphere: `a² (cosh² t0 + t0²) = 1`.
pub fn catenoid_scale_for_unit_sphere(t0: f64) -> f64 {
    1.0 / (t0.cosh().powi(2) + t0 * t0).sqrt()
}

/// Catenoid `t ∈ [-t0, t0]` scaled so that both boundary circles lie on the unit sphere.
pub fn catenoid_in_unit_ball(t0: f64, n_theta: usize, n_t: usize) -> TriangleMesh {
    catenoid(catenoid_scale_for_unit_sphere(t0), -t0, t0, n_theta, n_t)
}

/// Icosahedron subdivided `level` times and projected onto the sphere.
pub fn icosphere(radius: f64, level: usize) -> TriangleMesh {
    let g = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, g, 0.0),
        (1.0, g, 0.0),
        (-1.0, -g, 0.0),
        (1.0, -g, 0.0),
        (0.0, -1.0, g),
        (0.0, 1.0, g),
        (0.0, -1.0, -g),
        (0.0, 1.0, -g),
        (g, 0.0, -1.0),
        (g, 0.0, 1.0),
        (-g, 0.0, -1.0),
        (-g, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut mid = |a: usize, b: usize, vs: &mut Vec<Vec3>| {
            *cache.entry((a.min(b), a.max(b))).or_insert_with(|| {
                vs.push((0.5 * (vs[a] + vs[b])).normalize());
                vs.len() - 1
            })
        };
        for f in &faces {
            let ab = mid(f[0], f[1], &mut vertices);
            let bc = mid(f[1], f[2], &mut vertices);
            let ca = mid(f[2], f[0], &mut vertices);
            next.extend_from_slice(&[[f[0], ab, ca], [ab, f[1], bc], [ca, bc, f[2]], [ab, bc, ca]]);
        }
        faces = next;
    }
    TriangleMesh::new(vertices.into_iter().map(|v| v * radius).collect(), faces)
}

/// Grid over `[0,1]²` with seeded random heights and in-plane jitter; used
/// as generic non-symmetric test input.
pub fn random_patch(n: usize, seed: u64) -> TriangleMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1.0 / n as f64;
    flat_square(n).map_vertices(|p| {
        let jx: f64 = rng.random_range(-0.2..0.2) * h;
        let jy: f64 = rng.random_range(-0.2..0.2) * h;
        let z: f64 = rng.random_range(-0.3..0.3) * h;
        Vec3::new(p.x + jx, p.y + jy, z + 0.2 * (3.0 * p.x).sin() * p.y)
    })
}

/// Two copies of `mesh` offset by `offset`, stored as one mesh.
pub fn stacked(mesh: &TriangleMesh, offset: Vec3) -> TriangleMesh {
    let n = mesh.vertex_count();
    let mut vertices = mesh.vertices().to_vec();
    vertices.extend(mesh.vertices().iter().map(|p| p + offset));
    let mut faces = mesh.faces().to_vec();
    faces.extend(mesh.faces().iter().map(|f| [f[0] + n, f[1] + n, f[2] + n]));
    let mut constrained = mesh.constrained_flags().to_vec();
    constrained.extend_from_slice(mesh.constrained_flags());
    TriangleMesh::from_parts(vertices, faces, constrained)
}
