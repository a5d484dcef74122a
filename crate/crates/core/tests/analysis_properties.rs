//! Invariants of the density ratio, blow-up tools and Fermi charts.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fbms::blowup::{canonical_hash, mirrored, point_pick, reflect_double, rescale, scaled_curvature_sup, RescaleMap};
use fbms::constraint::LevelSetConstraint;
use fbms::fermi::build_chart;
use fbms::mesh::samplers;
use fbms::monotonicity::{area_growth, deficit_integral, density_profile, mass_in_ball, DEFAULT_SLACK};
use fbms::stability::{is_stable_with, BoundaryCondition};
use fbms::{TriangleMesh, Vec3};

fn half_plane() -> (TriangleMesh, LevelSetConstraint) {
    let mesh = samplers::rect_grid(0.0, 2.0, -2.0, 2.0, 8, 16).constrain_boundary_where(|p| p.x.abs() < 1e-12);
    (mesh, LevelSetConstraint::plane(Vec3::zeros(), Vec3::x()))
}

fn equatorial_disk() -> (TriangleMesh, LevelSetConstraint) {
    (samplers::disk(1.0, 8, 32).constrain_all_boundary(), LevelSetConstraint::unit_sphere())
}

/// Θ of a scene and of its zoom by `factor` about the base point, on the
/// correspondingly scaled radii.
fn theta_pair(mesh: &TriangleMesh, c: &LevelSetConstraint, p: Vec3, radii: &[f64], factor: f64) -> (Vec<f64>, Vec<f64>) {
    let before = density_profile(mesh, c, &p, radii).expect("profile");
    let map = RescaleMap::new(p, factor).expect("map");
    let (big, big_c) = rescale(mesh, c, &map).expect("rescale");
    let scaled: Vec<f64> = radii.iter().map(|r| factor * r).collect();
    let after = density_profile(&big, &big_c, &Vec3::zeros(), &scaled).expect("profile");
    assert!((after.constants.gamma * factor - before.constants.gamma).abs() <= 1e-12 * before.constants.gamma.max(1.0));
    (before.theta, after.theta)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mass_is_monotone_in_radius(seed in any::<u64>(), px in 0.0..1.0_f64, py in 0.0..1.0_f64, mut radii in prop::collection::vec(0.01..1.0_f64, 2..6)) {
        let mesh = samplers::random_patch(5, seed);
        let p = Vec3::new(px, py, 0.0);
        radii.sort_by(f64::total_cmp);
        // a shared clip resolution makes the clipped regions nested
        let resolution = radii[0] * 1e-3;
        let masses: Vec<f64> = radii
            .iter()
            .map(|&r| fbms::monotonicity::Rectifiable::ball_mass(&mesh, &p, r, resolution).mass)
            .collect();
        prop_assert!(masses.windows(2).all(|w| w[0] <= w[1]), "{masses:?}");
        prop_assert!(mass_in_ball(&mesh, &p, radii[0]).expect("mass").mass <= mass_in_ball(&mesh, &p, radii[radii.len() - 1]).expect("mass").mass);
    }

    #[test]
    fn deficit_is_nonnegative(seed in any::<u64>(), px in 0.0..1.0_f64, py in 0.0..1.0_f64, sigma in 0.05..0.3_f64, ratio in 1.1..3.0_f64, lambda1 in 0.0..10.0_f64, gamma in 0.0..3.0_f64) {
        let mesh = samplers::random_patch(5, seed);
        let p = Vec3::new(px, py, 0.1);
        let d = deficit_integral(&mesh, &p, sigma, sigma * ratio, lambda1, gamma).expect("deficit");
        prop_assert!(d >= 0.0);
    }

    #[test]
    fn theta_is_scale_covariant(factor in 0.25..4.0_f64) {
        let (mesh, plane) = half_plane();
        let (a, b) = theta_pair(&mesh, &plane, Vec3::zeros(), &[0.1, 0.2, 0.4], factor);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-6 * x.abs());
        }
        let (disk, sphere) = equatorial_disk();
        let (a, b) = theta_pair(&disk, &sphere, Vec3::x(), &[0.05, 0.1, 0.2], factor);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-6 * x.abs(), "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn curvature_statistic_is_scale_invariant(height in 0.0..0.3_f64, factor in 0.3..5.0_f64, cx in -0.2..0.2_f64) {
        let mesh = samplers::half_disk_bulge(height, 8, 32);
        let c = LevelSetConstraint::unit_sphere();
        let center = Vec3::new(cx, 0.0, 0.0);
        let map = RescaleMap::new(center, factor).expect("map");
        let (big, _) = rescale(&mesh, &c, &map).expect("rescale");
        let before = scaled_curvature_sup(&mesh, &center, 0.8).expect("sup");
        let after = scaled_curvature_sup(&big, &Vec3::zeros(), 0.8 * factor).expect("sup");
        prop_assert!((after - before).abs() <= 0.01 * before + 1e-12);
    }

    #[test]
    fn point_pick_survives_recentering(seed in any::<u64>(), cx in 0.2..0.8_f64, cy in 0.2..0.8_f64, radius in 0.2..0.6_f64) {
        let mesh = samplers::random_patch(6, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let curvature: Vec<f64> = (0..mesh.vertex_count()).map(|_| rng.random_range(0.0..5.0)).collect();
        let center = Vec3::new(cx, cy, 0.0);
        let pick = point_pick(&mesh, &curvature, &center, radius).expect("pick");
        let v = mesh.vertices();
        let y = v[pick.vertex];
        let brute = v
            .iter()
            .zip(&curvature)
            .filter(|(x, _)| (*x - center).norm() < radius)
            .map(|(x, a)| a * (radius - (x - center).norm()))
            .fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(pick.score, brute);
        let r_prime = radius - (y - center).norm();
        prop_assert_eq!(pick.recentered_radius, r_prime);
        let recentered = v
            .iter()
            .zip(&curvature)
            .filter(|(z, _)| (*z - y).norm() < r_prime)
            .map(|(z, a)| a * (r_prime - (z - y).norm()))
            .fold(f64::NEG_INFINITY, f64::max);
        // the picked point scores the same about itself and nothing beats it
        prop_assert_eq!(recentered, pick.score);
        prop_assert!(pick.recentering_holds);
    }

    #[test]
    fn doubling_is_an_involution(nx in 2usize..8, ny in 2usize..8, width in 0.5..2.0_f64) {
        let plane_n = Vec3::x();
        let half = samplers::rect_grid(0.0, width, 0.0, 1.0, nx, ny).constrain_boundary_where(|p| p.x.abs() < 1e-12);
        let doubled = reflect_double(&half, &Vec3::zeros(), &plane_n).expect("double");
        let other = mirrored(&half, &Vec3::zeros(), &plane_n).expect("mirror");
        let again = reflect_double(&other, &Vec3::zeros(), &plane_n).expect("double");
        prop_assert_eq!(canonical_hash(&doubled), canonical_hash(&again));
    }

    #[test]
    fn fermi_chart_is_a_normal_offset(radius in 0.5..3.0_f64, dir in (0.0..std::f64::consts::TAU, -0.9..0.9_f64), seed in any::<u64>()) {
        let c = LevelSetConstraint::sphere(Vec3::new(0.2, 0.0, -0.1), radius);
        let s = (1.0 - dir.1 * dir.1).sqrt();
        let p = Vec3::new(0.2, 0.0, -0.1) + radius * Vec3::new(s * dir.0.cos(), s * dir.0.sin(), dir.1);
        let chart = build_chart(&c, &p, 0.4 * radius).expect("chart");
        let h = 1e-5 * radius;
        let partial = |q: &Vec3, k: usize| {
            let mut e = Vec3::zeros();
            e[k] = h;
            (chart.from_fermi(&(q + e)).expect("chart") - chart.from_fermi(&(q - e)).expect("chart")) / (2.0 * h)
        };
        // differential at the base is an isometry
        let cols: Vec<Vec3> = (0..3).map(|k| partial(&Vec3::zeros(), k)).collect();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                prop_assert!((cols[i].dot(&cols[j]) - expect).abs() <= 1e-8);
            }
        }
        // g_tt = 1 and g_{x t} = 0 along t-lines
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let span = 0.2 * radius;
        for _ in 0..20 {
            let q = Vec3::new(rng.random_range(-span..span), rng.random_range(-span..span), rng.random_range(-span..span));
            let dt = partial(&q, 0);
            prop_assert!((dt.dot(&dt) - 1.0).abs() <= 1e-6);
            prop_assert!(dt.dot(&partial(&q, 1)).abs() <= 1e-6);
            prop_assert!(dt.dot(&partial(&q, 2)).abs() <= 1e-6);
        }
    }
}

#[test]
fn minimal_scenes_have_uniform_area_growth() {
    let (mesh, plane) = half_plane();
    let flat = density_profile(&mesh, &plane, &Vec3::zeros(), &[0.125, 0.25, 0.5, 1.0]).expect("profile");
    let (disk, sphere) = equatorial_disk();
    let curved = density_profile(&disk, &sphere, &Vec3::x(), &[0.05, 0.1, 0.2, 0.4]).expect("profile");
    for profile in [flat, curved] {
        let growth = area_growth(&profile, DEFAULT_SLACK);
        let r_max = *profile.radii.last().expect("radii");
        let bound = profile.theta.last().expect("theta") * (profile.constants.lambda1 * r_max).exp();
        assert!(growth.passed && growth.max_ratio <= bound * (1.0 + DEFAULT_SLACK), "{growth:?}");
    }
}

#[test]
fn flat_half_strip_and_its_double_are_stable() {
    let plane = LevelSetConstraint::plane(Vec3::zeros(), Vec3::x());
    let half = samplers::rect_grid(0.0, 1.0, 0.0, 1.0, 6, 6).constrain_boundary_where(|p| p.x.abs() < 1e-12);
    let doubled = reflect_double(&half, &Vec3::zeros(), &Vec3::x()).expect("double");
    for mesh in [&half, &doubled] {
        let report = is_stable_with(mesh, &plane, 1e-8, BoundaryCondition::Natural, 0).expect("stability");
        assert!(report.lambda_min >= -1e-8, "λ_min = {}", report.lambda_min);
    }
}
