//! Heat flow on the torus: spectral multipliers, the semigroup property and
//! mass conservation.

use kpz_sync::field::{fourier_coefficients, heat_multiplier, heat_semigroup, integrate, GridFunction, TorusGrid};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = TorusGrid::new(128)?;
    let f = GridFunction::from_fn(grid, |x| (2.0 * (2.0 * std::f64::consts::PI * x).sin()).exp());

    let s = 0.002;
    let t = 0.003;
    let composed = heat_semigroup(&heat_semigroup(&f, s), t);
    let direct = heat_semigroup(&f, s + t);
    println!("semigroup defect   {:.3e}", composed.sup_distance(&direct)?);
    println!("mass before/after  {:.12} {:.12}", integrate(&f), integrate(&direct));

    let before = fourier_coefficients(&f);
    let after = fourier_coefficients(&direct);
    for k in 1..5 {
        let ratio = after[k].norm() / before[k].norm();
        println!(
            "mode {k}: |f̂(t)|/|f̂(0)| = {ratio:.6}, multiplier {:.6}",
            heat_multiplier(k as i64, s + t)
        );
    }
    Ok(())
}
