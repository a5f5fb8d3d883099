//! Stochastic heat equation driven by fractional noise `ξ^H(t) V(x)`, its
//! decomposition `u = e^X w`, and the KPZ equation for `h = log u`.

use kpz_sync::field::{GridFunction, TorusGrid};
use kpz_sync::noise::{sample_fbm, SpatialProfile};
use kpz_sync::spde::{cole_hopf, kpz_residual, solve_she_fractional, SheParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = TorusGrid::new(128)?;
    let profile = SpatialProfile::trig(grid, &[0.3], &[1.0]);
    let beta = sample_fbm(0.7, 128, 2 * 128, 0, 5)?;
    let u0 = GridFunction::from_fn(grid, |x| 1.0 + 0.5 * (std::f64::consts::TAU * x).cos());
    let params = SheParams {
        t_end: 2.0,
        steps_per_unit: 512,
        diffusivity: 3.0 / (4.0 * std::f64::consts::PI.powi(2)),
        store_every: 64,
    };
    let d = solve_she_fractional(&profile, &beta, &u0, &params)?;
    let u = d.u_trajectory();
    for (t, s) in u.times.iter().zip(&u.snapshots).step_by(8) {
        println!("t = {t:.3}  min u = {:.4}  max u = {:.4}", s.min(), s.max());
    }
    let h = cole_hopf(u.last())?;
    println!("h(T) ranges over [{:.4}, {:.4}]", h.min(), h.max());
    println!("KPZ residual at t = 1: {:.3e}", kpz_residual(&d, &profile, &beta, 1.0)?);
    println!("{}", u.metadata());
    Ok(())
}
