//! Scenario runner behind the `fbms` command line: loads configs, runs the
//! stage pipeline, writes fixed-name reports and a hashed manifest, and packs
//! deterministic report bundles.

mod builtins;
mod scenario;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub use builtins::{builtin_batch, builtin_scenario, catalog_table, is_builtin_batch, list_scenarios, CatalogEntry, BUILTIN_PREFIX};
pub use scenario::{
    ConstrainRule, DoublingConfig, FermiConfig, Geometry, MeshSource, MonotonicityConfig, Scenario, SolverConfig,
    StabilityConfig, VerifyConfig, SCHEMA,
};

use crate::blowup::{canonical_hash, curvature_survey, reflect_double, SurveyEntry, SurveyExclusion};
use crate::constraint::LevelSetConstraint;
use crate::error::{Error, Result};
use crate::fermi::{build_chart, graph_extract, neumann_residual, GraphFrame, GridSpec};
use crate::mesh::{mean_curvature_vector, write_constrained_sidecar, write_obj, TriangleMesh};
use crate::monotonicity::{area_growth, check_monotonicity, density_profile_with, DensityProfile, Rectifiable};
use crate::stability::is_stable_with;
use crate::variational::{free_boundary_residual, solve_minimal, verify_minimal};
use scenario::v3;

/// Stage names in execution order.
pub const STAGES: [&str; 6] = ["solve", "verify", "stability", "monotonicity", "fermi", "doubling"];

/// Name of the manifest written at the root of the output directory.
pub const MANIFEST_NAME: &str = "manifest.json";

/// Name of the archive written by [`emit_report_bundle`].
pub const BUNDLE_NAME: &str = "bundle.tar";

/// Curvature survey settings of a batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurveyConfig {
    pub center: [f64; 3],
    pub radius: f64,
    /// Area bound `C₀` inside the survey ball.
    pub area_bound: f64,
}

/// Several scenarios run together, optionally followed by a survey.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Batch {
    pub schema: String,
    pub name: String,
    pub scenarios: Vec<Scenario>,
    pub survey: Option<SurveyConfig>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScenarioRef {
    Named(String),
    Inline(Box<Scenario>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BatchFile {
    schema: String,
    name: String,
    scenarios: Vec<ScenarioRef>,
    #[serde(default)]
    survey: Option<SurveyConfig>,
}

/// Options of [`run_scenario`].
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub jobs: usize,
    /// Replaces every scenario seed when set.
    pub seed_override: Option<u64>,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        RunOptions {
            out_dir: out_dir.into(),
            jobs: 1,
            seed_override: None,
        }
    }
}

/// One file written by a run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputEntry {
    /// Path relative to the output directory, `/`-separated.
    pub path: String,
    pub stage: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub scenario: String,
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageStatus {
    pub stage: String,
    pub passed: bool,
}

/// Machine-readable failure report.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub scenario: String,
    pub stage: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub name: String,
    pub seed: u64,
    pub passed: bool,
    pub stages: Vec<StageStatus>,
    pub failure: Option<Failure>,
}

/// Record of a run: what went in, what came out and how long each stage took.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub schema: String,
    pub name: String,
    /// SHA-256 of the resolved scenario list (seeds included).
    pub scenario_hash: String,
    /// SHA-256 of every file read, keyed by path as written in the config.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<OutputEntry>,
    pub scenarios: Vec<ScenarioSummary>,
    pub passed: bool,
    /// Wall-clock seconds per stage; excluded from bundles.
    pub timings: Vec<StageTiming>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// Collects files written under one directory.
struct Sink {
    root: PathBuf,
    prefix: String,
    outputs: Vec<OutputEntry>,
}

impl Sink {
    fn write(&mut self, stage: &str, name: &str, contents: &str) -> Result<()> {
        let rel = format!("{}{name}", self.prefix);
        let path = self.root.join(&rel);
        fs::write(&path, contents).map_err(|e| Error::Stage {
            stage: stage.into(),
            message: format!("cannot write {}: {e}", path.display()),
        })?;
        self.outputs.push(OutputEntry {
            path: rel,
            stage: stage.into(),
            sha256: sha256_hex(contents.as_bytes()),
            bytes: contents.len() as u64,
        });
        Ok(())
    }
}

/// Result of one scenario's pipeline.
struct Outcome {
    summary: ScenarioSummary,
    outputs: Vec<OutputEntry>,
    timings: Vec<StageTiming>,
    mesh: Option<TriangleMesh>,
    verified: Option<bool>,
    stability: Option<(f64, bool)>,
}

fn doubling_report(
    mesh: &TriangleMesh,
    cfg: &DoublingConfig,
    base: Option<&Path>,
    constraint: &LevelSetConstraint,
) -> Result<(TriangleMesh, Value, bool)> {
    let doubled = reflect_double(mesh, &v3(&cfg.point), &v3(&cfg.normal))?;
    let h = mean_curvature_vector(&doubled);
    let h = h.as_vectors().expect("vector field");
    let boundary = doubled.boundary_mask();
    let (mut seam, mut off) = (0.0_f64, 0.0_f64);
    for i in 0..doubled.vertex_count() {
        if boundary[i] {
            continue;
        }
        if i < mesh.vertex_count() && mesh.is_constrained(i) {
            seam = seam.max(h[i].norm());
        } else {
            off = off.max(h[i].norm());
        }
    }
    let normal = v3(&cfg.normal).normalize();
    let max_offset = doubled
        .vertices()
        .iter()
        .map(|x| (x - v3(&cfg.point)).dot(&normal).abs())
        .fold(0.0, f64::max);
    let reference = match &cfg.reference {
        Some(src) => {
            let Geometry::Surface(r) = src.build(constraint, ConstrainRule::None, base)? else {
                return Err(Error::Parse("doubling reference must be a surface".into()));
            };
            let worst = doubled
                .vertices()
                .iter()
                .map(|x| r.vertices().iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min))
                .fold(0.0, f64::max);
            Some((worst, r.vertex_count() == doubled.vertex_count()))
        }
        None => None,
    };
    let seam_ok = seam <= 2.0 * off + 1e-10;
    let reference_ok = reference.is_none_or(|(d, same)| same && d <= cfg.reference_tol);
    let report = json!({
        "vertex_count": doubled.vertex_count(),
        "face_count": doubled.face_count(),
        "canonical_hash": canonical_hash(&doubled),
        "seam_max_h": seam,
        "off_seam_max_h": off,
        "max_offset_from_plane": max_offset,
        "reference_max_distance": reference.map(|r| r.0),
        "reference_tol": cfg.reference_tol,
        "passed": seam_ok && reference_ok,
    });
    Ok((doubled, report, seam_ok && reference_ok))
}

fn monotonicity_stage(
    measure: &impl Rectifiable,
    constraint: &LevelSetConstraint,
    cfg: &MonotonicityConfig,
    seed: u64,
    verified: Option<bool>,
) -> Result<(DensityProfile, Value, bool)> {
    let radii = cfg.radius_grid()?;
    let profile = density_profile_with(measure, constraint, &v3(&cfg.base_point), &radii, cfg.lambda, seed)?;
    let mut check = check_monotonicity(&profile, cfg.slack)?;
    if let Some(v) = verified {
        check = check.with_verification(v);
    }
    let growth = area_growth(&profile, cfg.slack);
    let passed = check.passed;
    let report = json!({"profile": profile, "check": check, "area_growth": growth});
    Ok((profile, report, passed))
}

fn run_pipeline(scn: &Scenario, base: Option<&Path>, sink: &mut Sink, seed: u64, timings: &mut Vec<StageTiming>) -> Outcome {
    let mut stages = Vec::new();
    let mut verified = None;
    let mut stability = None;
    let mut current: Option<TriangleMesh> = None;
    let mut stage_name = "load";
    let mut clock = Instant::now();

    let mut record = |stage: &str, passed: bool, clock: &mut Instant, stages: &mut Vec<StageStatus>| {
        timings.push(StageTiming {
            scenario: scn.name.clone(),
            stage: stage.into(),
            seconds: clock.elapsed().as_secs_f64(),
        });
        stages.push(StageStatus {
            stage: stage.into(),
            passed,
        });
        *clock = Instant::now();
    };

    let result: Result<()> = (|| {
        let c = &scn.constraint;
        let geometry = scn.mesh.build(c, scn.constrain, base)?;
        let mut mesh = match geometry {
            Geometry::Surface(m) => m,
            Geometry::Curve(curve) => {
                if let Some(cfg) = &scn.monotonicity {
                    stage_name = "monotonicity";
                    let (profile, report, passed) = monotonicity_stage(&curve, c, cfg, seed, None)?;
                    sink.write(stage_name, "density.csv", &profile.to_csv())?;
                    sink.write(stage_name, "density.json", &to_json(&report))?;
                    record(stage_name, passed, &mut clock, &mut stages);
                }
                return Ok(());
            }
        };

        if let Some(cfg) = &scn.solve {
            stage_name = "solve";
            let params = cfg.params_for(&mesh);
            params.validate()?;
            let report = solve_minimal(&mesh, c, &params)?;
            sink.write(stage_name, "solve.json", &to_json(&report))?;
            sink.write(stage_name, "area_history.csv", &report.history_csv())?;
            sink.write(stage_name, "final.obj", &write_obj(&report.final_mesh))?;
            sink.write(stage_name, "final.constrained.json", &write_constrained_sidecar(&report.final_mesh))?;
            mesh = report.final_mesh.clone();
            record(stage_name, report.converged, &mut clock, &mut stages);
        }
        current = Some(mesh.clone());

        if let Some(cfg) = &scn.verify {
            stage_name = "verify";
            let v = verify_minimal(&mesh, c, cfg.h_tol, cfg.ortho_tol)?;
            sink.write(stage_name, "verify.json", &to_json(&v))?;
            verified = Some(v.passed);
            record(stage_name, v.passed, &mut clock, &mut stages);
        }

        if let Some(cfg) = &scn.stability {
            stage_name = "stability";
            let report = is_stable_with(&mesh, c, cfg.tol, cfg.boundary, seed)?;
            let mut value = serde_json::to_value(&report).expect("report serializes");
            if let Some(obj) = value.as_object_mut() {
                obj.remove("eigenfunction");
                obj.insert("boundary".into(), serde_json::to_value(cfg.boundary).expect("serializes"));
                obj.insert("expect_stable".into(), json!(cfg.expect_stable));
            }
            sink.write(stage_name, "stability.json", &to_json(&value))?;
            sink.write(stage_name, "eigenfunction.csv", &report.eigenfunction_csv(&mesh))?;
            stability = Some((report.lambda_min, report.stable));
            let passed = cfg.expect_stable.is_none_or(|e| e == report.stable);
            record(stage_name, passed, &mut clock, &mut stages);
        }

        if let Some(cfg) = &scn.monotonicity {
            stage_name = "monotonicity";
            let (profile, report, passed) = monotonicity_stage(&mesh, c, cfg, seed, verified)?;
            sink.write(stage_name, "density.csv", &profile.to_csv())?;
            sink.write(stage_name, "density.json", &to_json(&report))?;
            record(stage_name, passed, &mut clock, &mut stages);
        }

        if let Some(cfg) = &scn.fermi {
            stage_name = "fermi";
            let chart = build_chart(c, &v3(&cfg.base_point), cfg.radius)?;
            let frame = GraphFrame::from_mesh(&chart, &mesh)?;
            let grid = GridSpec::for_chart(&chart);
            let sample = graph_extract(&chart, &mesh, &frame, &grid)?;
            let residual = neumann_residual(&sample)?;
            let ortho = free_boundary_residual(&mesh, c)?.max_angle;
            let passed = residual <= cfg.tol;
            sink.write(stage_name, "fermi.csv", &sample.to_csv())?;
            let report = json!({
                "neumann_residual": residual,
                "orthogonality_residual": ortho,
                "sheet_count": sample.sheet_count,
                "grid": grid,
                "frame": frame,
                "tol": cfg.tol,
                "passed": passed,
            });
            sink.write(stage_name, "fermi.json", &to_json(&report))?;
            record(stage_name, passed, &mut clock, &mut stages);
        }

        if let Some(cfg) = &scn.doubling {
            stage_name = "doubling";
            let (doubled, report, passed) = doubling_report(&mesh, cfg, base, c)?;
            sink.write(stage_name, "doubled.obj", &write_obj(&doubled))?;
            sink.write(stage_name, "doubling.json", &to_json(&report))?;
            record(stage_name, passed, &mut clock, &mut stages);
        }
        Ok(())
    })();

    let failure = match result {
        Ok(()) => None,
        Err(e) => {
            let failure = Failure {
                scenario: scn.name.clone(),
                stage: stage_name.into(),
                message: e.to_string(),
            };
            // a failure report that cannot be written still fails the run
            let _ = sink.write(stage_name, "failure.json", &to_json(&failure));
            Some(failure)
        }
    };
    let passed = failure.is_none() && stages.iter().all(|s| s.passed);
    Outcome {
        summary: ScenarioSummary {
            name: scn.name.clone(),
            seed,
            passed,
            stages,
            failure,
        },
        outputs: std::mem::take(&mut sink.outputs),
        timings: Vec::new(),
        mesh: current,
        verified,
        stability,
    }
}

/// Loads a config path (or `builtin:<name>`) into a batch. The second value
/// is the directory relative input paths are resolved against.
pub fn load_config(config: &str) -> Result<(Batch, bool, Option<PathBuf>)> {
    if let Some(name) = config.strip_prefix(BUILTIN_PREFIX) {
        if is_builtin_batch(name) {
            return Ok((builtin_batch(name)?, true, None));
        }
        let s = builtin_scenario(name)?;
        return Ok((
            Batch {
                schema: SCHEMA.into(),
                name: s.name.clone(),
                scenarios: vec![s],
                survey: None,
            },
            false,
            None,
        ));
    }
    let path = Path::new(config);
    let text = fs::read_to_string(path)?;
    let base = path.parent().map(Path::to_path_buf);
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    if value.get("scenarios").is_none() {
        let s = Scenario::from_json(&text)?;
        return Ok((
            Batch {
                schema: SCHEMA.into(),
                name: s.name.clone(),
                scenarios: vec![s],
                survey: None,
            },
            false,
            base,
        ));
    }
    let file: BatchFile = serde_json::from_value(value).map_err(|e| Error::Parse(e.to_string()))?;
    if file.schema != SCHEMA {
        return Err(Error::Parse(format!("unsupported schema `{}`, expected `{SCHEMA}`", file.schema)));
    }
    let mut scenarios = Vec::new();
    for r in file.scenarios {
        let s = match r {
            ScenarioRef::Inline(s) => {
                s.validate()?;
                *s
            }
            ScenarioRef::Named(n) => match n.strip_prefix(BUILTIN_PREFIX) {
                Some(b) => builtin_scenario(b)?,
                None => {
                    let p = base.as_deref().map_or_else(|| PathBuf::from(&n), |d| d.join(&n));
                    Scenario::from_json(&fs::read_to_string(p)?)?
                }
            },
        };
        scenarios.push(s);
    }
    Ok((
        Batch {
            schema: file.schema,
            name: file.name,
            scenarios,
            survey: file.survey,
        },
        true,
        base,
    ))
}

fn check_batch(batch: &Batch, base: Option<&Path>) -> Result<()> {
    if batch.scenarios.is_empty() {
        return Err(Error::Parse("batch has no scenarios".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for s in &batch.scenarios {
        if !seen.insert(s.name.as_str()) {
            return Err(Error::Parse(format!("duplicate scenario name `{}`", s.name)));
        }
        for p in s.mesh.input_files(base) {
            if !p.exists() {
                return Err(Error::Parse(format!("input file {} does not exist", p.display())));
            }
        }
    }
    Ok(())
}

/// Runs a config (path or `builtin:<name>`) and writes reports plus
/// `manifest.json` under `options.out_dir`.
///
/// Config errors are written to `failure.json` with stage `config` and
/// returned; stage errors end up in the manifest with `passed = false`.
pub fn run_scenario(config: &str, options: &RunOptions) -> Result<RunManifest> {
    fs::create_dir_all(&options.out_dir)?;
    let loaded = load_config(config).and_then(|(batch, nested, base)| {
        check_batch(&batch, base.as_deref())?;
        Ok((batch, nested, base))
    });
    let (mut batch, nested, base) = match loaded {
        Ok(x) => x,
        Err(e) => {
            let failure = Failure {
                scenario: config.into(),
                stage: "config".into(),
                message: e.to_string(),
            };
            fs::write(options.out_dir.join("failure.json"), to_json(&failure))?;
            return Err(e);
        }
    };
    if let Some(seed) = options.seed_override {
        for s in &mut batch.scenarios {
            s.seed = seed;
        }
    }
    run_batch(&batch, nested, base.as_deref(), options)
}

fn run_batch(batch: &Batch, nested: bool, base: Option<&Path>, options: &RunOptions) -> Result<RunManifest> {
    let mut inputs = BTreeMap::new();
    for s in &batch.scenarios {
        if let MeshSource::Obj { path, sidecar } = &s.mesh {
            for (shown, real) in std::iter::once(path).chain(sidecar).zip(s.mesh.input_files(base)) {
                inputs.insert(shown.display().to_string(), sha256_hex(&fs::read(real)?));
            }
        }
    }
    let scenario_hash = sha256_hex(serde_json::to_string(&batch.scenarios).expect("serializes").as_bytes());

    let jobs = options.jobs.max(1).min(batch.scenarios.len());
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Outcome>>> = batch.scenarios.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some(scn) = batch.scenarios.get(k) else { break };
                let prefix = if nested { format!("{}/", scn.name) } else { String::new() };
                let outcome = (|| {
                    fs::create_dir_all(options.out_dir.join(&prefix))?;
                    let mut sink = Sink {
                        root: options.out_dir.clone(),
                        prefix,
                        outputs: Vec::new(),
                    };
                    let mut timings = Vec::new();
                    let mut outcome = run_pipeline(scn, base, &mut sink, scn.seed, &mut timings);
                    outcome.timings = timings;
                    Ok::<Outcome, Error>(outcome)
                })()
                .unwrap_or_else(|e: Error| Outcome {
                    summary: ScenarioSummary {
                        name: scn.name.clone(),
                        seed: scn.seed,
                        passed: false,
                        stages: Vec::new(),
                        failure: Some(Failure {
                            scenario: scn.name.clone(),
                            stage: "load".into(),
                            message: e.to_string(),
                        }),
                    },
                    outputs: Vec::new(),
                    timings: Vec::new(),
                    mesh: None,
                    verified: None,
                    stability: None,
                });
                *slots[k].lock().expect("slot lock") = Some(outcome);
            });
        }
    });
    let outcomes: Vec<Outcome> = slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("every scenario ran"))
        .collect();

    let mut outputs: Vec<OutputEntry> = outcomes.iter().flat_map(|o| o.outputs.clone()).collect();
    let mut timings: Vec<StageTiming> = outcomes.iter().flat_map(|o| o.timings.clone()).collect();
    let mut passed = outcomes.iter().all(|o| o.summary.passed);

    if let Some(cfg) = &batch.survey {
        let start = Instant::now();
        let mut sink = Sink {
            root: options.out_dir.clone(),
            prefix: String::new(),
            outputs: Vec::new(),
        };
        let mut entries = Vec::new();
        let mut missing = Vec::new();
        for (scn, o) in batch.scenarios.iter().zip(&outcomes) {
            match (&o.mesh, o.stability) {
                (Some(mesh), Some((lambda_min, stable))) if o.summary.failure.is_none() => entries.push(SurveyEntry {
                    id: scn.name.clone(),
                    mesh: mesh.clone(),
                    lambda_min,
                    stable,
                    verified: o.verified.unwrap_or(false),
                }),
                _ => missing.push(SurveyExclusion {
                    scenario: scn.name.clone(),
                    reason: "no completed stability report".into(),
                }),
            }
        }
        let survey = curvature_survey(&entries, &v3(&cfg.center), cfg.radius, cfg.area_bound);
        match survey {
            Ok(mut survey) => {
                survey.excluded.extend(missing);
                sink.write("survey", "survey.csv", &survey.to_csv())?;
                sink.write("survey", "survey.json", &to_json(&survey))?;
                passed &= survey.empirical_c1.is_finite();
            }
            Err(e) => {
                let failure = Failure {
                    scenario: batch.name.clone(),
                    stage: "survey".into(),
                    message: e.to_string(),
                };
                sink.write("survey", "failure.json", &to_json(&failure))?;
                passed = false;
            }
        }
        outputs.extend(sink.outputs);
        timings.push(StageTiming {
            scenario: batch.name.clone(),
            stage: "survey".into(),
            seconds: start.elapsed().as_secs_f64(),
        });
    }

    outputs.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = RunManifest {
        tool: "fbms".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        schema: batch.schema.clone(),
        name: batch.name.clone(),
        scenario_hash,
        inputs,
        outputs,
        scenarios: outcomes.into_iter().map(|o| o.summary).collect(),
        passed,
        timings,
    };
    fs::write(options.out_dir.join(MANIFEST_NAME), to_json(&manifest))?;
    Ok(manifest)
}

/// Packs every output listed in the manifest, plus the manifest with its
/// timings removed, into `bundle.tar` next to the manifest.
///
/// Entries are sorted, with zero timestamps and fixed ownership, so equal
/// reports give byte-identical archives.
pub fn emit_report_bundle(manifest_path: &Path) -> Result<PathBuf> {
    let text = fs::read_to_string(manifest_path)?;
    let mut manifest: RunManifest = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    for entry in &manifest.outputs {
        let bytes = fs::read(root.join(&entry.path)).map_err(|e| Error::Stage {
            stage: entry.stage.clone(),
            message: format!("missing output {}: {e}", entry.path),
        })?;
        if sha256_hex(&bytes) != entry.sha256 {
            return Err(Error::Stage {
                stage: entry.stage.clone(),
                message: format!("output {} does not match its recorded hash", entry.path),
            });
        }
        files.push((entry.path.clone(), bytes));
    }
    manifest.timings.clear();
    files.push((MANIFEST_NAME.into(), to_json(&manifest).into_bytes()));
    files.sort_by(|a, b| a.0.cmp(&b.0));

    let out = root.join(BUNDLE_NAME);
    let mut builder = tar::Builder::new(fs::File::create(&out)?);
    builder.mode(tar::HeaderMode::Deterministic);
    for (path, bytes) in &files {
        let mut header = tar::Header::new_gnu();
        header.set_size(bytes.len() as u64);
        header.set_mode(0o644);
        header.set_mtime(0);
        header.set_uid(0);
        header.set_gid(0);
        header.set_entry_type(tar::EntryType::Regular);
        header.set_cksum();
        builder.append_data(&mut header, path, bytes.as_slice())?;
    }
    builder.into_inner()?.sync_all()?;
    Ok(out)
}
