//! Lowest eigenvalue of the second variation for stable and unstable free
//! boundary surfaces.

use fbms::constraint::LevelSetConstraint;
use fbms::mesh::samplers;
use fbms::stability::{assemble_stability_form, is_stable, quadratic_form_value};
use fbms::{Result, Vec3, VertexField};

fn main() -> Result<()> {
    let plane = LevelSetConstraint::plane(Vec3::zeros(), Vec3::x());
    let strip = samplers::rect_grid(0.0, 1.0, 0.0, 1.0, 8, 8).constrain_boundary_where(|p| p.x.abs() < 1e-12);
    let report = is_stable(&strip, &plane, 1e-8)?;
    println!("flat strip on a plane: λ_min = {:.2e}, stable {}", report.lambda_min, report.stable);

    let sphere = LevelSetConstraint::unit_sphere();
    for n in [4, 8, 16, 32] {
        let disk = samplers::disk(1.0, n, 4 * n).constrain_all_boundary();
        let report = is_stable(&disk, &sphere, 1e-8)?;
        let form = assemble_stability_form(&disk, &sphere)?;
        let q1 = quadratic_form_value(&form, &VertexField::Scalar(vec![1.0; disk.vertex_count()]))?;
        println!("equatorial disk n_r = {n:>2}: Q(1) = {q1:.5}, λ_min = {:.5}", report.lambda_min);
    }

    let t0 = samplers::critical_catenoid_parameter();
    let catenoid = samplers::catenoid_in_unit_ball(t0, 48, 32).constrain_all_boundary();
    let report = is_stable(&catenoid, &sphere, 1e-8)?;
    println!("critical catenoid: λ_min = {:.4}, stable {}", report.lambda_min, report.stable);
    Ok(())
}
