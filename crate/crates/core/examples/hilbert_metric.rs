//! Hilbert projective metric on positive densities and Birkhoff contraction
//! of a positive kernel.

use kpz_sync::cone::{birkhoff, check_kernel_bounds, hilbert_distance, normalize, projective_apply, PositiveKernel};
use kpz_sync::field::{GridFunction, TorusGrid};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = TorusGrid::new(64)?;
    let tau = std::f64::consts::TAU;
    let f = normalize(&GridFunction::from_fn(grid, |x| 2.0 + (tau * x).sin()))?;
    let g = normalize(&GridFunction::from_fn(grid, |x| 1.5 + (2.0 * tau * x).cos()))?;
    let d0 = hilbert_distance(&f, &g)?;

    // A smooth periodic kernel bounded away from zero.
    let k = PositiveKernel::from_fn(grid, |x, y| 1.0 + 0.8 * (tau * (x - y)).cos())?;
    let b = birkhoff(&k)?;
    let bounds = check_kernel_bounds(&k);
    println!("kernel bounds  γ = {:.3}, δ = {:.3}", bounds.gamma, bounds.delta);
    println!("diameter Δ = {:.4}, τ = tanh(Δ/4) = {:.4}", b.diameter, b.tau);

    let (mut kf, mut kg) = (f, g);
    println!("step 0: d_H = {d0:.6e}");
    for step in 1..=5 {
        kf = projective_apply(&k, &kf)?;
        kg = projective_apply(&k, &kg)?;
        let d = hilbert_distance(&kf, &kg)?;
        println!("step {step}: d_H = {d:.6e}  (bound {:.6e})", b.tau.powi(step) * d0);
    }
    Ok(())
}
