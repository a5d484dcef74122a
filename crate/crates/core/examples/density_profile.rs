//! Weighted density ratio and its monotonicity check at a boundary point.

use fbms::constraint::LevelSetConstraint;
use fbms::mesh::samplers;
use fbms::monotonicity::{check_monotonicity, density_profile, Polyline, DEFAULT_SLACK};
use fbms::{Result, Vec3};

fn main() -> Result<()> {
    let sphere = LevelSetConstraint::unit_sphere();
    let disk = samplers::disk(1.0, 16, 64).constrain_all_boundary();
    let radii = [0.05, 0.1, 0.2, 0.4];
    let profile = density_profile(&disk, &sphere, &Vec3::x(), &radii)?;
    println!("equatorial disk at (1, 0, 0), Λ₁ = {}:", profile.constants.lambda1);
    print!("{}", profile.to_csv());
    let check = check_monotonicity(&profile, DEFAULT_SLACK)?;
    println!("monotone within {:.0}%: {} (worst margin {:.4})", 100.0 * DEFAULT_SLACK, check.passed, check.worst_margin);

    let segment = Polyline::new(vec![Vec3::zeros(), Vec3::x()]);
    let profile = density_profile(&segment, &sphere, &Vec3::x(), &[0.1, 0.2, 0.3])?;
    for (r, theta) in profile.radii.iter().zip(&profile.theta) {
        println!("radial segment r = {r}: Θ = {theta:.12}, e^(6r) = {:.12}", (6.0 * r).exp());
    }
    Ok(())
}
