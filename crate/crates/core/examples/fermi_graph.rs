//! Fermi chart at a boundary point and the Neumann residual of the surface
//! written as a graph in it.

use fbms::constraint::LevelSetConstraint;
use fbms::fermi::{build_chart, graph_extract, neumann_residual, observed_order, GraphFrame, GridSpec};
use fbms::mesh::samplers;
use fbms::variational::free_boundary_residual;
use fbms::{Result, Vec3};

fn main() -> Result<()> {
    let sphere = LevelSetConstraint::unit_sphere();
    let chart = build_chart(&sphere, &Vec3::x(), 0.4)?;
    let q = chart.from_fermi(&Vec3::new(-0.1, 0.2, 0.0))?;
    println!("chart point (t, x) = (-0.1, 0.2, 0) maps to {q:?}, back to {:?}", chart.to_fermi(&q)?);

    let plane = LevelSetConstraint::plane(Vec3::zeros(), Vec3::z());
    let chart = build_chart(&plane, &Vec3::x(), 0.4)?;
    let grid = GridSpec::for_chart(&chart);
    let (mut spacings, mut residuals) = (vec![], vec![]);
    for n in [4, 8, 16, 32] {
        let half = samplers::catenoid(1.0, 0.0, 1.0, 4 * n, n).constrain_boundary_where(|p| p.z.abs() < 1e-12);
        let frame = GraphFrame::from_mesh(&chart, &half)?;
        let sample = graph_extract(&chart, &half, &frame, &grid)?;
        let residual = neumann_residual(&sample)?;
        let ortho = free_boundary_residual(&half, &plane)?.max_angle;
        println!("half-catenoid n = {n:>2}: Neumann residual {residual:.3e}, orthogonality {ortho:.3e} rad");
        spacings.push(1.0 / n as f64);
        residuals.push(residual);
    }
    println!("observed order {:?}", observed_order(&spacings, &residuals));
    Ok(())
}
