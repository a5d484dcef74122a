//! Acceptance criteria 1-11. Prints one PASS/FAIL line per criterion and
//! exits nonzero when a criterion fails that is not listed in `UNATTAINABLE`.

use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::time::Instant;

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fbms::blowup::{canonical_hash, reflect_double, rescale, scaled_curvature_sup, RescaleMap};
use fbms::constraint::{estimate_kappa, zeta_gamma, LevelSetConstraint};
use fbms::fermi::{build_chart, graph_extract, neumann_residual, observed_order, GraphFrame, GridSpec, ROUND_OFF_FLOOR};
use fbms::harness::{builtin_scenario, run_scenario, Geometry, RunOptions};
use fbms::mesh::{mean_curvature_vector, read_constrained_sidecar, read_obj, samplers};
use fbms::monotonicity::{check_monotonicity, density_profile, geometric_radii, Polyline};
use fbms::stability::{assemble_stability_form, is_stable, lowest_eigenpair, quadratic_form_value};
use fbms::variational::{
    discrete_first_variation, finite_difference_variation, free_boundary_residual, neck_parameter, solve_minimal,
    verify_minimal,
};
use fbms::{TriangleMesh, Vec3, VertexField};

/// Criteria whose literal threshold no correct implementation can meet; see
/// the notes printed on their lines.
const UNATTAINABLE: [u32; 1] = [3];

/// `(id, name, runtime budget in seconds, check)`.
type Criterion = (u32, &'static str, f64, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    assert!(f(lo) * f(hi) < 0.0, "bracket does not change sign");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(lo) * f(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Modified Bessel function `I_n(s)` by its power series.
fn bessel_i(n: u32, s: f64) -> f64 {
    let mut term = (0.5 * s).powi(n as i32) / (1..=n).map(f64::from).product::<f64>();
    let mut sum = term;
    for k in 1..200 {
        term *= 0.25 * s * s / (k as f64 * (k + n) as f64);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    sum
}

fn constrained_where(mesh: TriangleMesh, pred: impl Fn(&Vec3) -> bool) -> TriangleMesh {
    mesh.constrain_boundary_where(pred)
}

fn criterion_1() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let mesh = samplers::random_patch(6 + (seed as usize % 4), seed);
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let field: Vec<Vec3> = (0..mesh.vertex_count())
            .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let field = VertexField::Vector(field);
        let exact = discrete_first_variation(&mesh, &field).expect("variation");
        // Richardson extrapolation of the central difference removes the O(t²) term
        let h = 1e-3;
        let coarse = finite_difference_variation(&mesh, &field, h).expect("fd");
        let fine = finite_difference_variation(&mesh, &field, 0.5 * h).expect("fd");
        let limit = (4.0 * fine - coarse) / 3.0;
        worst = worst.max((exact - limit).abs() / (1.0 + exact.abs()));
    }
    outcome(worst <= 1e-6, format!("20 pairs, worst |δA − FD limit|/(1+|δA|) = {worst:.2e} (tol 1e-6)"))
}

fn criterion_2() -> Outcome {
    let oracle = bisect(|t| t * t.tanh() - 1.0, 0.5, 2.0);
    let t0 = samplers::critical_catenoid_parameter();
    let scn = builtin_scenario("catenoid-in-ball").expect("builtin");
    let Geometry::Surface(mesh) = scn.mesh.build(&scn.constraint, scn.constrain, None).expect("mesh") else {
        unreachable!("catenoid is a surface")
    };
    let params = scn.solve.as_ref().expect("solve config").params_for(&mesh);
    let report = solve_minimal(&mesh, &scn.constraint, &params).expect("solve");
    let v = verify_minimal(&report.final_mesh, &scn.constraint, 5e-2, 2e-2).expect("verify");
    let neck = neck_parameter(&report.final_mesh);
    let neck_err = (neck * neck.tanh() - 1.0).abs();
    let passed = report.converged
        && (t0 - oracle).abs() <= 1e-10
        && (oracle - 1.19968).abs() <= 1e-5
        && neck_err <= 0.02
        && v.max_interior_h <= 5e-2
        && v.ortho_residual <= 2e-2;
    outcome(
        passed,
        format!(
            "t0 = {t0:.6} (bisection {oracle:.6}), solved neck {neck:.5} with |t tanh t − 1| = {neck_err:.2e} (tol 0.02), \
             max|H| = {:.2e} (tol 5e-2), ortho = {:.2e} rad (tol 2e-2), {} iterations",
            v.max_interior_h, v.ortho_residual, report.iterations
        ),
    )
}

fn criterion_3() -> Outcome {
    let plane = LevelSetConstraint::plane(Vec3::zeros(), Vec3::x());
    let strip = constrained_where(samplers::rect_grid(0.0, 1.0, 0.0, 1.0, 8, 8), |p| p.x.abs() < 1e-12);
    let strip_lambda = is_stable(&strip, &plane, 1e-8).expect("strip stability").lambda_min;

    let sphere = LevelSetConstraint::unit_sphere();
    let disk = samplers::disk(1.0, 16, 64).constrain_all_boundary();
    let form = assemble_stability_form(&disk, &sphere).expect("form");
    let ones = VertexField::Scalar(vec![1.0; disk.vertex_count()]);
    let q1 = quadratic_form_value(&form, &ones).expect("Q(1)");
    let mass: f64 = form.mass.iter().sum();
    let lambda = lowest_eigenpair(&form, 1e-10, 0).expect("eigenpair").lambda;
    // Robin problem −Δf = λf, ∂_η f = f on the unit disk: f = I₀(s r), λ = −s², s I₁(s) = I₀(s)
    let s = bisect(|s| s * bessel_i(1, s) - bessel_i(0, s), 0.5, 3.0);
    let robin = -s * s;

    let strip_ok = strip_lambda >= -1e-8;
    let q_ok = (q1 + 2.0 * PI).abs() <= 0.02 * 2.0 * PI;
    let literal_ok = lambda <= -4.0 * 0.95;
    outcome(
        strip_ok && q_ok && literal_ok,
        format!(
            "strip λ_min = {strip_lambda:.2e} (≥ −1e-8: {strip_ok}); disk Q(1) = {q1:.5} vs −2π (±2%: {q_ok}); \
             disk λ_min = {lambda:.5} vs literal bound ≤ −3.8: {literal_ok}. \
             Unattainable: Q(1)/∫1 = {:.4} ≥ λ_min, and the continuum value is {robin:.5} (Robin oracle), \
             so −4 = Q(1)/(π/2) uses the area of a half-disk, not the disk",
            q1 / mass
        ),
    )
}

fn criterion_4() -> Outcome {
    let plane = LevelSetConstraint::plane(Vec3::zeros(), Vec3::x());
    let mesh = constrained_where(samplers::rect_grid(0.0, 2.0, -2.0, 2.0, 16, 32), |p| p.x.abs() < 1e-12);
    let radii = geometric_radii(1.0, 6);
    let profile = density_profile(&mesh, &plane, &Vec3::zeros(), &radii).expect("profile");
    let worst = profile.theta.iter().map(|t| (t / (PI / 2.0) - 1.0).abs()).fold(0.0, f64::max);
    let deficit = profile.deficits.iter().fold(0.0_f64, |a, d| a.max(d.abs()));
    outcome(
        worst <= 0.01 && deficit == 0.0,
        format!("6 radii in [{:.4}, 1], max |Θ/(π/2) − 1| = {worst:.2e} (tol 1%), max deficit = {deficit:e}", radii[0]),
    )
}

fn criterion_5() -> Outcome {
    let sphere = LevelSetConstraint::unit_sphere();
    let mesh = samplers::disk(1.0, 16, 64).constrain_all_boundary();
    let radii: Vec<f64> = (0..4).map(|j| 0.05 * 2f64.powi(j)).collect();
    let profile = density_profile(&mesh, &sphere, &Vec3::x(), &radii).expect("profile");
    let check = check_monotonicity(&profile, 0.02).expect("check");
    let deficit = profile.deficits.iter().sum::<f64>();
    outcome(
        check.passed,
        format!(
            "radii {radii:?}, Θ = {:?}, total deficit {deficit:.3e}, worst margin {:.3e} at 2% slack",
            profile.theta.iter().map(|t| format!("{t:.4}")).collect::<Vec<_>>(),
            check.worst_margin
        ),
    )
}

fn criterion_6() -> Outcome {
    let sphere = LevelSetConstraint::unit_sphere();
    let segment = Polyline::new(vec![Vec3::zeros(), Vec3::x()]);
    let radii = [0.1, 0.2];
    let profile = density_profile(&segment, &sphere, &Vec3::x(), &radii).expect("profile");
    let worst = radii
        .iter()
        .zip(&profile.theta)
        .map(|(r, t)| (t - (6.0 * r).exp()).abs())
        .fold(0.0, f64::max);
    outcome(worst <= 1e-6, format!("Θ = {:?} vs e^(6r), max error {worst:.2e} (tol 1e-6)", profile.theta))
}

fn jacobian_norm(c: &LevelSetConstraint, p: &Vec3, x: &Vec3, step: f64) -> f64 {
    let mut j = Matrix3::zeros();
    for k in 0..3 {
        let mut e = Vec3::zeros();
        e[k] = step;
        let d = (c.zeta(p, &(x + e)).expect("zeta") - c.zeta(p, &(x - e)).expect("zeta")) / (2.0 * step);
        j.set_column(k, &d);
    }
    j.singular_values().max()
}

fn criterion_7() -> Outcome {
    let c = LevelSetConstraint::unit_sphere();
    let r0 = 1.0;
    let s = 0.5 * r0;
    let gamma = zeta_gamma(r0, s);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let unit = |rng: &mut ChaCha8Rng| loop {
        let q = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if q.norm() <= 1.0 && q.norm() > 1e-3 {
            return q;
        }
    };
    let (mut zeta_excess, mut jac_excess) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let step = 1e-6;
    let fd_error = 1e-6;
    for _ in 0..10_000 {
        let p = unit(&mut rng).normalize();
        let x = p + s * unit(&mut rng);
        let d = (x - p).norm();
        let z = c.zeta(&p, &x).expect("zeta").norm();
        zeta_excess = zeta_excess.max(z - gamma * d * d);
        jac_excess = jac_excess.max(jacobian_norm(&c, &p, &x, step) - 2.0 * gamma * d);
    }
    let kappa = estimate_kappa(&c, (Vec3::zeros(), 2.0), 10_000, 7).expect("kappa").kappa;
    let passed = gamma == 2.0 && zeta_excess <= 1e-8 && jac_excess <= fd_error && (0.98..=1.0).contains(&kappa);
    outcome(
        passed,
        format!(
            "γ = {gamma}; max(|ζ| − γ|x−p|²) = {zeta_excess:.2e} (≤ 1e-8); max(‖Dζ‖ − 2γ|x−p|) = {jac_excess:.2e} \
             (≤ {fd_error:e}); κ estimate {kappa:.6} in [0.98, 1]"
        ),
    )
}

/// Largest `|H|` over interior vertices of `doubled`, split into seam
/// (constrained vertices of `half`, which keep their indices) and the rest.
fn seam_split(half: &TriangleMesh, doubled: &TriangleMesh) -> (f64, f64) {
    let h = mean_curvature_vector(doubled);
    let h = h.as_vectors().expect("vectors");
    let boundary = doubled.boundary_mask();
    let (mut seam, mut off) = (0.0_f64, 0.0_f64);
    for i in (0..doubled.vertex_count()).filter(|&i| !boundary[i]) {
        if i < half.vertex_count() && half.is_constrained(i) {
            seam = seam.max(h[i].norm());
        } else {
            off = off.max(h[i].norm());
        }
    }
    (seam, off)
}

fn criterion_8() -> Outcome {
    let half = constrained_where(samplers::catenoid(1.0, 0.0, 1.0, 48, 16), |p| p.z.abs() < 1e-12);
    let doubled = reflect_double(&half, &Vec3::zeros(), &Vec3::z()).expect("double");
    let reference = samplers::catenoid(1.0, -1.0, 1.0, 48, 32);
    let distance = doubled
        .vertices()
        .iter()
        .map(|x| reference.vertices().iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    let same_count = doubled.vertex_count() == reference.vertex_count();
    let (seam, off) = seam_split(&half, &doubled);

    let strip = constrained_where(samplers::rect_grid(0.0, 1.0, 0.0, 1.0, 8, 8), |p| p.x.abs() < 1e-12);
    let flat = reflect_double(&strip, &Vec3::zeros(), &Vec3::x()).expect("double");
    let planar = flat.vertices().iter().all(|p| p.z == 0.0);
    let involution = canonical_hash(&reflect_double(&strip, &Vec3::zeros(), &Vec3::x()).expect("double"))
        == canonical_hash(&flat);
    outcome(
        distance <= 1e-8 && same_count && seam <= 2.0 * off && planar && involution,
        format!(
            "catenoid: {} vertices (reference {}), max distance {distance:.2e}, seam max|H| {seam:.3e} vs off-seam {off:.3e}; \
             flat strip doubled exactly planar: {planar}",
            doubled.vertex_count(),
            reference.vertex_count()
        ),
    )
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().expect("tempdir");
    let mut options = RunOptions::new(dir.path());
    options.jobs = 4;
    let manifest = run_scenario("builtin:stable-family-survey", &options).expect("survey run");
    let survey: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("survey.json")).expect("survey.json")).expect("json");
    let c1 = survey["empirical_c1"].as_f64().expect("c1");
    let center = Vec3::zeros();
    let radius = survey["radius"].as_f64().expect("radius");
    let factor = 3.0;
    let map = RescaleMap::new(center, factor).expect("map");
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for row in survey["rows"].as_array().expect("rows") {
        let name = row["scenario"].as_str().expect("name");
        if !name.starts_with("half-disk-bulge") {
            continue;
        }
        let sub = dir.path().join(name);
        let mesh = read_obj(&std::fs::read_to_string(sub.join("final.obj")).expect("obj")).expect("parse obj");
        let mesh = read_constrained_sidecar(mesh, &std::fs::read_to_string(sub.join("final.constrained.json")).expect("sidecar"))
            .expect("sidecar");
        let c = LevelSetConstraint::unit_sphere();
        let (big, _) = rescale(&mesh, &c, &map).expect("rescale");
        let before = scaled_curvature_sup(&mesh, &center, radius).expect("sup");
        let after = scaled_curvature_sup(&big, &center, factor * radius).expect("sup");
        worst = worst.max((after - before).abs() / before.max(f64::MIN_POSITIVE));
        checked += 1;
    }
    let bounded = c1.is_finite() && survey["rows"].as_array().expect("rows").iter().all(|r| r["sup_norm"].as_f64().is_some_and(f64::is_finite));
    outcome(
        manifest.passed && bounded && checked == 3 && worst <= 0.01,
        format!(
            "{} rows, {} excluded, empirical sup|A|·dist = {c1:.3e}; rescale ×{factor} covariance on {checked} half-disks: \
             max relative change {worst:.2e} (tol 1%)",
            survey["rows"].as_array().map_or(0, Vec::len),
            survey["excluded"].as_array().map_or(0, Vec::len)
        ),
    )
}

/// Neumann and orthogonality residuals on a refining family.
fn fermi_family(
    meshes: &[TriangleMesh],
    c: &LevelSetConstraint,
    base: &Vec3,
    radius: f64,
) -> (Vec<f64>, Vec<f64>) {
    let chart = build_chart(c, base, radius).expect("chart");
    let grid = GridSpec::for_chart(&chart);
    meshes
        .iter()
        .map(|m| {
            let frame = GraphFrame::from_mesh(&chart, m).expect("frame");
            let sample = graph_extract(&chart, m, &frame, &grid).expect("graph");
            (neumann_residual(&sample).expect("residual"), free_boundary_residual(m, c).expect("ortho").max_angle)
        })
        .unzip()
}

/// Each level either stays under the first-order envelope of the previous
/// level or sits at round-off.
fn first_order(spacings: &[f64], residuals: &[f64]) -> bool {
    spacings.windows(2).zip(residuals.windows(2)).all(|(h, r)| r[1] <= ROUND_OFF_FLOOR || r[1] <= r[0] * h[1] / h[0])
}

fn criterion_10() -> Outcome {
    let sphere = LevelSetConstraint::unit_sphere();
    let levels = [8usize, 16, 32, 64];
    let spacings: Vec<f64> = levels.iter().map(|&n| 1.0 / n as f64).collect();
    let disks: Vec<TriangleMesh> = levels.iter().map(|&n| samplers::disk(1.0, n, 4 * n).constrain_all_boundary()).collect();
    let (neumann, ortho) = fermi_family(&disks, &sphere, &Vec3::x(), 0.4);
    let correlated = neumann.iter().zip(&ortho).all(|(a, b)| *a <= 3.0 * b + 1e-6 && *b <= 3.0 * a + 1e-6);
    let disk_ok = first_order(&spacings, &neumann) && first_order(&spacings, &ortho) && correlated;

    // the disk is exact at every level; a curved family shows the rate itself
    let plane = LevelSetConstraint::plane(Vec3::zeros(), Vec3::z());
    let halves: Vec<TriangleMesh> = levels[..3]
        .iter()
        .map(|&n| constrained_where(samplers::catenoid(1.0, 0.0, 1.0, 4 * n, n), |p| p.z.abs() < 1e-12))
        .collect();
    let (cat_neumann, cat_ortho) = fermi_family(&halves, &plane, &Vec3::x(), 0.4);
    let order_n = observed_order(&spacings[..3], &cat_neumann);
    let order_o = observed_order(&spacings[..3], &cat_ortho);
    let rate_ok = order_n.is_some_and(|p| p >= 1.0) && order_o.is_some_and(|p| p >= 0.9);
    outcome(
        disk_ok && rate_ok,
        format!(
            "disk n = {levels:?}: Neumann {:?}, ortho {:?} (round-off floor {ROUND_OFF_FLOOR:e}, 3× correlation: {correlated}); \
             half-catenoid n = {:?}: Neumann {:?} order {order_n:.2?}, ortho order {order_o:.2?}",
            neumann.iter().map(|r| format!("{r:.1e}")).collect::<Vec<_>>(),
            ortho.iter().map(|r| format!("{r:.1e}")).collect::<Vec<_>>(),
            &levels[..3],
            cat_neumann.iter().map(|r| format!("{r:.1e}")).collect::<Vec<_>>(),
        ),
    )
}

fn cli_bundle(dir: &std::path::Path) -> Vec<u8> {
    let exe = env!("CARGO_BIN_EXE_fbms");
    let run = Command::new(exe)
        .args(["run", "builtin:disk-in-ball", "--out"])
        .arg(dir)
        .env_remove("FBMS_SEED")
        .output()
        .expect("run fbms");
    assert!(run.status.success(), "fbms run failed: {}", String::from_utf8_lossy(&run.stderr));
    let bundle = Command::new(exe).arg("bundle").arg(dir.join("manifest.json")).output().expect("bundle");
    assert!(bundle.status.success(), "fbms bundle failed: {}", String::from_utf8_lossy(&bundle.stderr));
    std::fs::read(dir.join("bundle.tar")).expect("bundle.tar")
}

fn criterion_11() -> Outcome {
    let (a, b) = (tempfile::tempdir().expect("tempdir"), tempfile::tempdir().expect("tempdir"));
    let first = cli_bundle(a.path());
    let second = cli_bundle(b.path());
    outcome(
        !first.is_empty() && first == second,
        format!("two `fbms run builtin:disk-in-ball` bundles: {} and {} bytes, identical: {}", first.len(), second.len(), first == second),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        (1, "first-variation oracle", 10.0, criterion_1),
        (2, "critical catenoid", 60.0, criterion_2),
        (3, "stability signs", 30.0, criterion_3),
        (4, "monotonicity, flat", f64::INFINITY, criterion_4),
        (5, "monotonicity, curved", 30.0, criterion_5),
        (6, "k=1 closed form", f64::INFINITY, criterion_6),
        (7, "ζ bounds and κ", 20.0, criterion_7),
        (8, "reflection", f64::INFINITY, criterion_8),
        (9, "curvature survey", f64::INFINITY, criterion_9),
        (10, "Fermi/Neumann", f64::INFINITY, criterion_10),
        (11, "determinism", f64::INFINITY, criterion_11),
    ];
    let mut unexpected = Vec::new();
    for (id, name, budget, run) in criteria {
        let start = Instant::now();
        let result = run();
        let seconds = start.elapsed().as_secs_f64();
        let in_time = seconds < budget;
        let passed = result.passed && in_time;
        let budget_note = if budget.is_finite() { format!(" (budget {budget} s)") } else { String::new() };
        let status = match (passed, UNATTAINABLE.contains(&id)) {
            (true, _) => "PASS",
            (false, true) => "FAIL (unattainable as stated)",
            (false, false) => "FAIL",
        };
        println!("criterion {id:>2} [{name}]: {status} in {seconds:.2} s{budget_note}: {}", result.detail);
        if !passed && !UNATTAINABLE.contains(&id) {
            unexpected.push(id);
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
