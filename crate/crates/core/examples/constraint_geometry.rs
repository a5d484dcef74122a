//! Nearest-point projection, the ζ correction field and turning bounds of
//! level-set constraints.

use fbms::constraint::{estimate_kappa, zeta_gamma, LevelSetConstraint};
use fbms::{Result, Vec3};

fn main() -> Result<()> {
    let sphere = LevelSetConstraint::unit_sphere();
    let x = Vec3::new(0.3, 0.4, 1.2);
    let xi = sphere.project(&x)?;
    println!("ξ({x:?}) = {xi:?}, distance {:.6}", sphere.distance(&x)?);

    let p = Vec3::x();
    let r0 = sphere.radius_of_curvature((p, 4.0), 0)?;
    let gamma = zeta_gamma(r0, 0.5 * r0);
    println!("unit sphere: R₀ = {r0}, γ = {gamma}");
    for d in [0.05, 0.1, 0.2, 0.4] {
        let x = p + d * Vec3::new(-0.6, 0.8, 0.0);
        let z = sphere.zeta(&p, &x)?.norm();
        println!("  |x − p| = {d:.2}: |ζ| = {z:.3e} ≤ γ|x − p|² = {:.3e}", gamma * d * d);
    }

    let shapes = [
        ("ellipsoid (1, 1.5, 0.8)", LevelSetConstraint::ellipsoid(Vec3::zeros(), Vec3::new(1.0, 1.5, 0.8))),
        ("torus (2, 0.5)", LevelSetConstraint::torus(Vec3::zeros(), 2.0, 0.5)),
    ];
    for (name, c) in shapes {
        let bound = estimate_kappa(&c, (Vec3::zeros(), 3.0), 20_000, 1)?;
        println!("{name}: sampled κ ≥ {:.4}, closed form {:?}", bound.kappa, bound.analytic);
    }
    Ok(())
}
