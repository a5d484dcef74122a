//! Builtin scenario library.

use serde::Serialize;
use serde_json::{json, Value};

use super::scenario::{Scenario, SCHEMA};
use super::Batch;
use crate::error::{Error, Result};
use crate::mesh::samplers::critical_catenoid_parameter;

/// Prefix selecting a builtin instead of a config file.
pub const BUILTIN_PREFIX: &str = "builtin:";

/// One catalog line.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    /// Dimension of the geometry (2 for surfaces, 1 for curves) or `batch`.
    pub kind: &'static str,
    pub parameters: String,
    pub description: String,
}

const SINGLES: [&str; 7] = [
    "strip-on-plane",
    "disk-in-ball",
    "catenoid-in-ball",
    "half-catenoid-double",
    "graph-over-disk",
    "halfplane-monotone",
    "radial-segment-k1",
];

const BATCHES: [&str; 1] = ["stable-family-survey"];

fn scenario(value: Value) -> Scenario {
    let s: Scenario = serde_json::from_value(value).expect("builtin scenario parses");
    s.validate().expect("builtin scenario is valid");
    s
}

fn unit_sphere() -> Value {
    json!({"type": "sphere", "center": [0.0, 0.0, 0.0], "radius": 1.0})
}

fn half_disk_bulge(height: f64) -> Scenario {
    scenario(json!({
        "schema": SCHEMA,
        "name": format!("half-disk-bulge-{height}"),
        "description": "half-disk graph with its arc on the unit sphere and its diameter held fixed",
        "mesh": {"sampler": "half_disk_bulge", "height": height, "n_r": 10, "n_theta": 40},
        "constrain": "on_constraint_open",
        "constraint": unit_sphere(),
        "solve": {"max_iterations": 20000, "grad_tol": 1e-2, "ortho_tol": 2e-2},
        "verify": {},
        // the tilt about the fixed diameter is neutral; lumping shifts it by about -0.3/n_r^2
        "stability": {"boundary": "fix_unconstrained", "tol": 1e-2, "expect_stable": true}
    }))
}

/// Builds the named single scenario.
pub fn builtin_scenario(name: &str) -> Result<Scenario> {
    let t0 = critical_catenoid_parameter();
    let value = match name {
        "strip-on-plane" => json!({
            "schema": SCHEMA,
            "name": name,
            "description": "flat unit square with one edge on the plane x = 0",
            "mesh": {"sampler": "rect_grid", "x0": 0.0, "x1": 1.0, "y0": 0.0, "y1": 1.0, "nx": 8, "ny": 8},
            "constraint": {"type": "plane", "point": [0.0, 0.0, 0.0], "normal": [1.0, 0.0, 0.0]},
            "solve": {},
            "verify": {},
            "stability": {"expect_stable": true},
            "monotonicity": {"base_point": [0.0, 0.5, 0.0], "r_max": 0.4},
            "fermi": {"base_point": [0.0, 0.5, 0.0], "radius": 0.4},
            "doubling": {"point": [0.0, 0.0, 0.0], "normal": [1.0, 0.0, 0.0]}
        }),
        "disk-in-ball" => json!({
            "schema": SCHEMA,
            "name": name,
            "description": "equatorial disk in the unit ball",
            "mesh": {"sampler": "disk", "radius": 1.0, "n_r": 16, "n_theta": 64},
            "constraint": unit_sphere(),
            "solve": {},
            "verify": {},
            "stability": {"expect_stable": false},
            "monotonicity": {"base_point": [1.0, 0.0, 0.0], "radii": [0.05, 0.1, 0.2, 0.4]},
            "fermi": {"base_point": [1.0, 0.0, 0.0], "radius": 0.4}
        }),
        "catenoid-in-ball" => json!({
            "schema": SCHEMA,
            "name": name,
            "description": "critical catenoid in the unit ball, solved from a perturbed start",
            "mesh": {"sampler": "catenoid_in_ball", "t0": t0, "n_theta": 64, "n_t": 64, "perturbation": 0.01},
            "constraint": unit_sphere(),
            "solve": {"grad_tol": 5e-2, "ortho_tol": 2e-2},
            "verify": {"h_tol": 5e-2, "ortho_tol": 2e-2},
            "stability": {"expect_stable": false}
        }),
        "half-catenoid-double" => json!({
            "schema": SCHEMA,
            "name": name,
            "description": "catenoid t in [0, 1] with its waist on the plane z = 0, reflected across it",
            "mesh": {"sampler": "catenoid", "a": 1.0, "t0": 0.0, "t1": 1.0, "n_theta": 48, "n_t": 16},
            "constraint": {"type": "plane", "point": [0.0, 0.0, 0.0], "normal": [0.0, 0.0, 1.0]},
            "verify": {"h_tol": 5e-2, "ortho_tol": 5e-2},
            "doubling": {
                "point": [0.0, 0.0, 0.0],
                "normal": [0.0, 0.0, 1.0],
                "reference": {"sampler": "catenoid", "a": 1.0, "t0": -1.0, "t1": 1.0, "n_theta": 48, "n_t": 32}
            }
        }),
        "graph-over-disk" => json!({
            "schema": SCHEMA,
            "name": name,
            "description": "odd bulge over the disk with boundary on the unit sphere, relaxed to a flat equatorial disk",
            "mesh": {"sampler": "disk_odd_bulge", "height": 0.1, "n_r": 12, "n_theta": 48},
            "constraint": unit_sphere(),
            "solve": {"max_iterations": 20000, "grad_tol": 1e-2, "ortho_tol": 2e-2},
            "verify": {},
            "stability": {"expect_stable": false},
            "monotonicity": {"base_point": [1.0, 0.0, 0.0], "radii": [0.05, 0.1, 0.2, 0.4]}
        }),
        "halfplane-monotone" => json!({
            "schema": SCHEMA,
            "name": name,
            "description": "half-plane piece on the flat constraint x = 0; constant density pi/2",
            "mesh": {"sampler": "rect_grid", "x0": 0.0, "x1": 2.0, "y0": -2.0, "y1": 2.0, "nx": 16, "ny": 32},
            "constraint": {"type": "plane", "point": [0.0, 0.0, 0.0], "normal": [1.0, 0.0, 0.0]},
            "monotonicity": {"base_point": [0.0, 0.0, 0.0], "r_max": 1.0},
            "fermi": {"base_point": [0.0, 0.0, 0.0], "radius": 1.0}
        }),
        "radial-segment-k1" => json!({
            "schema": SCHEMA,
            "name": name,
            "description": "k=1 oracle: radial segment meeting the unit circle, density exp(6r)",
            "mesh": {"sampler": "polyline", "points": [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]},
            "constraint": unit_sphere(),
            "monotonicity": {"base_point": [1.0, 0.0, 0.0], "radii": [0.1, 0.2]}
        }),
        _ => return Err(Error::Parse(format!("unknown builtin scenario `{name}`"))),
    };
    Ok(scenario(value))
}

/// Builds the named batch.
pub fn builtin_batch(name: &str) -> Result<Batch> {
    match name {
        "stable-family-survey" => {
            let mut scenarios: Vec<Scenario> = [0.05, 0.1, 0.2].iter().map(|&h| half_disk_bulge(h)).collect();
            scenarios.push(builtin_scenario("strip-on-plane")?);
            scenarios.push(builtin_scenario("catenoid-in-ball")?);
            Ok(Batch {
                schema: SCHEMA.into(),
                name: name.into(),
                scenarios,
                survey: Some(super::SurveyConfig {
                    center: [0.0, 0.0, 0.0],
                    radius: 1.0,
                    area_bound: 2.0,
                }),
            })
        }
        _ => Err(Error::Parse(format!("unknown builtin batch `{name}`"))),
    }
}

/// Whether `name` is a builtin batch rather than a single scenario.
pub fn is_builtin_batch(name: &str) -> bool {
    BATCHES.contains(&name)
}

fn summarize(s: &Scenario) -> String {
    let mut mesh = serde_json::to_value(&s.mesh).expect("mesh source serializes");
    if let Some(obj) = mesh.as_object_mut() {
        obj.remove("sampler");
    }
    let mut parts = vec![];
    if let Some(obj) = mesh.as_object() {
        for (k, v) in obj {
            let shown = match v.as_f64() {
                Some(x) if k == "t0" && x.fract() != 0.0 => format!("{x:.5}"),
                _ => v.to_string(),
            };
            parts.push(format!("{k}={shown}"));
        }
    }
    parts.join(" ")
}

/// The builtin catalog in a fixed order.
pub fn list_scenarios() -> Vec<CatalogEntry> {
    let mut out: Vec<CatalogEntry> = SINGLES
        .iter()
        .map(|&name| {
            let s = builtin_scenario(name).expect("catalog names are builtins");
            let curve = matches!(s.mesh, super::scenario::MeshSource::Polyline { .. });
            CatalogEntry {
                name,
                kind: if curve { "k=1 oracle" } else { "k=2" },
                parameters: summarize(&s),
                description: s.description,
            }
        })
        .collect();
    for &name in &BATCHES {
        let b = builtin_batch(name).expect("catalog names are builtins");
        out.push(CatalogEntry {
            name,
            kind: "batch",
            parameters: b.scenarios.iter().map(|s| s.name.as_str()).collect::<Vec<_>>().join(","),
            description: "curvature survey over stable scenes in the unit ball".into(),
        });
    }
    out
}

/// Fixed-width table of [`list_scenarios`].
pub fn catalog_table() -> String {
    let entries = list_scenarios();
    let mut out = format!("{:<22} {:<11} {}\n", "name", "kind", "parameters");
    for e in &entries {
        out.push_str(&format!("{:<22} {:<11} {}\n", e.name, e.kind, e.parameters));
        out.push_str(&format!("{:<22} {:<11} {}\n", "", "", e.description));
    }
    out
}
