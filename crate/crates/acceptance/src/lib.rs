//! Reference computations shared by the acceptance suite. Everything here is
//! written independently of the library internals: brute-force scans, closed
//! forms and plain random generators.

use std::f64::consts::TAU;

use kpz_sync::cone::PositiveKernel;
use kpz_sync::field::{GridFunction, TorusGrid};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Projective diameter of a kernel's image by scanning every index quadruple:
/// `max log (K_ik K_jl) / (K_il K_jk)`.
pub fn cross_ratio_diameter(k: &PositiveKernel) -> f64 {
    let n = k.grid().len();
    let mut best: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for a in 0..n {
                for b in 0..n {
                    let r = (k.get(i, a) * k.get(j, b)) / (k.get(i, b) * k.get(j, a));
                    best = best.max(r.ln());
                }
            }
        }
    }
    best
}

/// `Σ_k (a_k cos 2πkx + b_k sin 2πkx)` with coefficients uniform in
/// `[-amp, amp] / k`.
pub fn random_trig(rng: &mut ChaCha8Rng, grid: TorusGrid, modes: usize, amp: f64) -> GridFunction {
    let coeffs: Vec<(f64, f64)> = (1..=modes)
        .map(|k| {
            let s = amp / k as f64;
            (rng.random_range(-s..=s), rng.random_range(-s..=s))
        })
        .collect();
    GridFunction::from_fn(grid, |x| {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, (a, b))| {
                let w = TAU * (k + 1) as f64 * x;
                a * w.cos() + b * w.sin()
            })
            .sum()
    })
}

/// `exp` of a random trigonometric polynomial, scaled by a random mass.
pub fn random_positive(rng: &mut ChaCha8Rng, grid: TorusGrid) -> GridFunction {
    let modes = rng.random_range(1..=6);
    let amp = rng.random_range(0.1..3.0);
    let mass = rng.random_range(0.2..5.0);
    random_trig(rng, grid, modes, amp).map(|h| mass * h.exp())
}

/// Kernel with independent entries uniform in `[lo, hi]`.
pub fn random_kernel(rng: &mut ChaCha8Rng, grid: TorusGrid, lo: f64, hi: f64) -> PositiveKernel {
    let n = grid.len();
    let entries = (0..n * n).map(|_| rng.random_range(lo..=hi)).collect();
    PositiveKernel::new(grid, entries).expect("positive entries")
}

/// Ordinary least-squares slope.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
