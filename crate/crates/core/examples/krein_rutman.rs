//! Positive eigenfunction of a fixed kernel by projective power iteration,
//! compared with the heat kernel's known answer (the constant).

use kpz_sync::cone::{hilbert_distance, normalize, Density};
use kpz_sync::field::{GridFunction, TorusGrid};
use kpz_sync::noise::{FbmNoise, FgnMethod, SpatialProfile};
use kpz_sync::rds::{kernel_matrix, static_krein_rutman, Cocycle};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = TorusGrid::new(64)?;
    let nu = 0.05;

    let heat = kernel_matrix(&Cocycle::zero(grid, 64, nu)?, 0, 0.5)?;
    let u = static_krein_rutman(&heat, 1e-13)?;
    println!(
        "heat kernel: d_H(u, 1) = {:.2e}",
        hilbert_distance(&u, &Density::uniform(grid))?
    );

    let noise = FbmNoise::materialize(0.8, 64, 0..1, 9, FgnMethod::Auto)?;
    let c = Cocycle::fractional(grid, 64, nu, SpatialProfile::trig(grid, &[1.0], &[0.5]), noise)?;
    let k = kernel_matrix(&c, 0, 1.0)?;
    let u = static_krein_rutman(&k, 1e-13)?;
    let ku = normalize(&GridFunction::new(grid, k.apply(u.values()))?)?;
    println!("random kernel: d_H(Ku, u) = {:.2e}", hilbert_distance(&ku, &u)?);
    println!("eigenvalue ≈ {:.6}", k.apply(u.values())[0] / u.values()[0]);
    Ok(())
}
