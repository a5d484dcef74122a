//! Doubling across a flat constraint, zooming about a point and picking the
//! point of largest scaled curvature.

use fbms::blowup::{canonical_hash, point_pick, reflect_double, rescale, scaled_curvature_sup, RescaleMap};
use fbms::constraint::LevelSetConstraint;
use fbms::mesh::{second_fundamental_norm, samplers};
use fbms::{Result, Vec3};

fn main() -> Result<()> {
    let plane = LevelSetConstraint::plane(Vec3::zeros(), Vec3::z());
    let half = samplers::catenoid(1.0, 0.0, 1.0, 48, 16).constrain_boundary_where(|p| p.z.abs() < 1e-12);
    let doubled = reflect_double(&half, &Vec3::zeros(), &Vec3::z())?;
    println!(
        "half-catenoid {} vertices doubled to {} (hash {}...)",
        half.vertex_count(),
        doubled.vertex_count(),
        &canonical_hash(&doubled)[..12]
    );

    let curvature = second_fundamental_norm(&doubled)?.norm();
    let pick = point_pick(&doubled, &curvature, &Vec3::zeros(), 1.5)?;
    println!(
        "point pick in B(0, 1.5): vertex {} score {:.4}, re-centred radius {:.4}, holds {}",
        pick.vertex, pick.score, pick.recentered_radius, pick.recentering_holds
    );

    for factor in [0.5, 1.0, 3.0, 10.0] {
        let map = RescaleMap::new(Vec3::zeros(), factor)?;
        let (zoomed, _) = rescale(&doubled, &plane, &map)?;
        let sup = scaled_curvature_sup(&zoomed, &Vec3::zeros(), 1.5 * factor)?;
        println!("zoom ×{factor:>4}: sup |A|·dist = {sup:.6}");
    }
    Ok(())
}
