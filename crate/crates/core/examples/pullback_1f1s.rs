//! One force, one solution: pulling back from ever earlier times produces a
//! single random density `u(ω)` independent of the initial data.

use std::f64::consts::{PI, TAU};

use kpz_sync::cone::hilbert_distance;
use kpz_sync::field::{GridFunction, TorusGrid};
use kpz_sync::noise::{FbmNoise, FgnMethod, SpatialProfile};
use kpz_sync::rds::{run_pullback, Cocycle};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = TorusGrid::new(64)?;
    let n_max = 10;
    let noise = FbmNoise::materialize(0.75, 64, -(n_max as i64)..2, 4, FgnMethod::Auto)?;
    let c = Cocycle::fractional(
        grid,
        64,
        3.0 / (4.0 * PI * PI),
        SpatialProfile::trig(grid, &[], &[1.0]),
        noise,
    )?;

    let a = run_pullback(&c, &GridFunction::from_fn(grid, |x| (TAU * x).cos().exp()), n_max, 0.0)?;
    let b = run_pullback(&c, &GridFunction::constant(grid, 1.0), n_max, 0.0)?;

    for (n, ((inc, diam), tau)) in a.increments.iter().zip(&a.diameters).zip(&a.tau_products).enumerate() {
        println!(
            "n = {:2}: d_H(u_n, u_n+1) = {inc:.3e}  diam = {diam:.3e}  Πτ = {tau:.3e}",
            n + 1
        );
    }
    println!("image diameters monotone: {}", a.monotone);
    println!(
        "limits from two initial data differ by {:.2e}",
        hilbert_distance(&a.limit, &b.limit)?
    );
    Ok(())
}
