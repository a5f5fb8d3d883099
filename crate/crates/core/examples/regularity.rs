//! Littlewood-Paley blocks of white noise, Hölder interpolation, the Schauder
//! smoothing ratio and the Besov distance between Dirac masses.

use kpz_sync::analysis::{
    besov_block_norms, dirac_distance, holder_seminorm, interpolation_check, schauder_check, space_time_block_norms, Lp,
};
use kpz_sync::field::{GridFunction, TorusGrid};
use kpz_sync::noise::sample_white;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = TorusGrid::new(256)?;
    let xi = sample_white(grid, 256, 256, 0, 1)?;
    let st = space_time_block_norms(&xi, Lp::Two);
    let slice = GridFunction::new(grid, xi.slab(0).to_vec())?;
    let sp = besov_block_norms(&slice, Lp::Two);
    println!(" j   log2 ‖Δ_j ξ‖²  (space-time, one slice)");
    for ((j, a), (_, b)) in st.blocks.iter().zip(&sp.blocks) {
        println!("{j:2}   {:7.3}   {:7.3}", (a * a).log2(), (b * b).log2());
    }

    let f = GridFunction::from_fn(grid, |x| (x - 0.5).abs().sqrt());
    println!(
        "[f]_0.4 = {:.4}, [f]_0.5 = {:.4}",
        holder_seminorm(&f, 0.4),
        holder_seminorm(&f, 0.5)
    );
    let i = interpolation_check(&f, 0.5, 0.5);
    println!("interpolation: {:.4} ≤ {:.4} ({})", i.lhs, i.rhs, i.holds());

    let scan = schauder_check(&slice, -0.6, 1.5, 0.1, Lp::Infinity);
    println!("Schauder ratio max {:.4} at t = {:.2e}", scan.max_ratio, scan.argmax);

    for k in 2..7 {
        let r = 0.5f64.powi(k);
        println!("‖δ_0 - δ_{r}‖ in B^(-1/2) = {:.4}", dirac_distance(0.0, r, 0.5, grid));
    }
    Ok(())
}
