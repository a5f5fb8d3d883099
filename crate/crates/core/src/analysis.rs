//! Regularity estimators on the grid: Hölder seminorms, Littlewood–Paley
//! blocks and Besov norms (for functions on the torus and for space-time noise
//! slabs), the interpolation bound for Hölder seminorms, heat-flow Schauder
//! ratios and Besov distances between point masses.
//!
//! The dyadic partition is built from the radial cutoff `χ`, equal to 1 on
//! `|ξ| ≤ 3/4` and to 0 on `|ξ| ≥ 4/3`, with the smooth step
//! `s ↦ ψ(1-s)/(ψ(1-s)+ψ(s))`, `ψ(x) = e^{-1/x}`, in between. Then
//! `ϱ_{-1} = χ` and `ϱ_j(ξ) = χ(2^{-j-1}ξ) - χ(2^{-j}ξ)` for `j ≥ 0`, supported
//! in the annulus `2^j·3/4 ≤ |ξ| ≤ 2^j·8/3`; the blocks sum to one.
//! Frequencies are wavenumbers `k` (not `2πk`).

use std::fmt::Write as _;

use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::field::{fft_pair, fourier_coefficients, heat_semigroup, GridFunction, TorusGrid};
use crate::noise::WhiteNoiseField;

/// Inner and outer radius of the transition region of `χ`.
pub const CUTOFF_INNER: f64 = 3.0 / 4.0;
pub const CUTOFF_OUTER: f64 = 4.0 / 3.0;

fn psi(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp()
    }
}

/// Low-frequency cutoff `χ(r)`.
pub fn cutoff(r: f64) -> f64 {
    let r = r.abs();
    if r <= CUTOFF_INNER {
        1.0
    } else if r >= CUTOFF_OUTER {
        0.0
    } else {
        let s = (r - CUTOFF_INNER) / (CUTOFF_OUTER - CUTOFF_INNER);
        psi(1.0 - s) / (psi(1.0 - s) + psi(s))
    }
}

/// Partition function `ϱ_j(r)` for `j ≥ -1`.
pub fn dyadic_weight(j: i32, r: f64) -> f64 {
    if j < 0 {
        cutoff(r)
    } else {
        cutoff(r / 2f64.powi(j + 1)) - cutoff(r / 2f64.powi(j))
    }
}

/// Largest block index whose annulus meets frequencies up to `kmax`.
pub fn max_block(kmax: f64) -> i32 {
    let mut j = -1;
    while 2f64.powi(j + 1) * CUTOFF_INNER <= kmax {
        j += 1;
    }
    j
}

/// Which `L^p` norm the blocks are measured in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Lp {
    One,
    Two,
    Infinity,
}

impl Lp {
    /// Norm of samples with quadrature weight `w` per cell.
    fn norm(self, values: &[f64], w: f64) -> f64 {
        match self {
            Lp::One => w * values.iter().map(|v| v.abs()).sum::<f64>(),
            Lp::Two => (w * values.iter().map(|v| v * v).sum::<f64>()).sqrt(),
            Lp::Infinity => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }
}

/// Littlewood–Paley block norms `‖Δ_j f‖_{L^p}`, `j = -1..=j_max`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BesovProfile {
    pub p: Lp,
    pub blocks: Vec<(i32, f64)>,
}

impl BesovProfile {
    /// `‖f‖_{B^α_{p,∞}} = sup_j 2^{jα} ‖Δ_j f‖_{L^p}`.
    pub fn norm(&self, alpha: f64) -> f64 {
        self.blocks
            .iter()
            .map(|&(j, b)| 2f64.powf(j as f64 * alpha) * b)
            .fold(0.0, f64::max)
    }

    pub fn block(&self, j: i32) -> Option<f64> {
        self.blocks.iter().find(|b| b.0 == j).map(|b| b.1)
    }

    /// CSV `j,block_norm`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,block_norm\n");
        for (j, b) in &self.blocks {
            let _ = writeln!(out, "{j},{b:.16e}");
        }
        out
    }
}

/// Block norms of a grid function.
pub fn besov_block_norms(f: &GridFunction, p: Lp) -> BesovProfile {
    let grid = f.grid();
    let n = grid.len();
    let coeffs = fourier_coefficients(f);
    let jmax = max_block((n / 2) as f64);
    let inverse = fft_pair(n).inverse;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut values = vec![0.0; n];
    let blocks = (-1..=jmax)
        .map(|j| {
            for (i, c) in coeffs.iter().enumerate() {
                let k = grid.wavenumber(i).unsigned_abs() as f64;
                buf[i] = *c * dyadic_weight(j, k);
            }
            inverse.process(&mut buf);
            for (v, c) in values.iter_mut().zip(&buf) {
                *v = c.re;
            }
            (j, p.norm(&values, grid.dx()))
        })
        .collect();
    BesovProfile { p, blocks }
}

fn signed_frequency(i: usize, len: usize) -> f64 {
    if i <= len / 2 {
        i as f64
    } else {
        i as f64 - len as f64
    }
}

/// Block norms of a space-time slab over `[origin, origin + steps·dt) × 𝕋`,
/// taken as a two-dimensional torus with time period `steps·dt`. The blocks
/// use the Euclidean length of `(k_t/T, k_x)`.
pub fn space_time_block_norms(xi: &WhiteNoiseField, p: Lp) -> BesovProfile {
    let nx = xi.grid().len();
    let nt = xi.steps();
    let period = nt as f64 * xi.dt();
    let mut data: Vec<Complex64> = xi.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let (fx, ft) = (fft_pair(nx), fft_pair(nt));
    fft2(&mut data, nt, nx, true, &fx, &ft);
    let kmax = (nx / 2) as f64;
    let jmax = max_block(kmax.min((nt / 2) as f64 / period));
    let radius: Vec<f64> = (0..nt * nx)
        .map(|idx| {
            let kt = signed_frequency(idx / nx, nt) / period;
            let kx = signed_frequency(idx % nx, nx);
            (kt * kt + kx * kx).sqrt()
        })
        .collect();
    let w = xi.dt() * xi.grid().dx();
    let scale = 1.0 / (nt * nx) as f64;
    let mut buf = vec![Complex64::new(0.0, 0.0); nt * nx];
    let mut values = vec![0.0; nt * nx];
    let blocks = (-1..=jmax)
        .map(|j| {
            for ((b, d), r) in buf.iter_mut().zip(&data).zip(&radius) {
                *b = *d * dyadic_weight(j, *r);
            }
            fft2(&mut buf, nt, nx, false, &fx, &ft);
            for (v, b) in values.iter_mut().zip(&buf) {
                *v = b.re * scale;
            }
            (j, p.norm(&values, w))
        })
        .collect();
    BesovProfile { p, blocks }
}

/// Unnormalized 2-D transform of a row-major `rows × cols` array.
fn fft2(
    data: &mut [Complex64],
    rows: usize,
    cols: usize,
    forward: bool,
    fx: &crate::field::FftPair,
    ft: &crate::field::FftPair,
) {
    let (row_fft, col_fft) = if forward {
        (&fx.forward, &ft.forward)
    } else {
        (&fx.inverse, &ft.inverse)
    };
    row_fft.process(data);
    let mut col = vec![Complex64::new(0.0, 0.0); rows];
    for c in 0..cols {
        for r in 0..rows {
            col[r] = data[r * cols + c];
        }
        col_fft.process(&mut col);
        for r in 0..rows {
            data[r * cols + c] = col[r];
        }
    }
}

/// `max |f(x_i) - f(x_j)| / d(x_i, x_j)^α` over distinct nodes, `d` the torus
/// distance.
///
/// # Panics
/// If `α ∉ (0, 1]`.
pub fn holder_seminorm(f: &GridFunction, alpha: f64) -> f64 {
    assert!(
        alpha > 0.0 && alpha <= 1.0,
        "Hölder exponent must be in (0, 1], got {alpha}"
    );
    let grid = f.grid();
    let v = f.values();
    let n = grid.len();
    let mut best: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = grid.torus_distance(i, j);
            best = best.max((v[i] - v[j]).abs() / d.powf(alpha));
        }
    }
    best
}

/// Both sides of `[f]_{θβ} ≤ (2‖f‖_∞)^{1-θ} [f]_β^θ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interpolation {
    pub lhs: f64,
    pub rhs: f64,
}

impl Interpolation {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs * (1.0 + 1e-12)
    }
}

/// # Panics
/// Unless `0 < θ < 1` and `0 < β ≤ 1`.
pub fn interpolation_check(f: &GridFunction, beta: f64, theta: f64) -> Interpolation {
    assert!(theta > 0.0 && theta < 1.0, "θ must be in (0, 1)");
    assert!(beta > 0.0 && beta <= 1.0, "β must be in (0, 1]");
    let lhs = holder_seminorm(f, theta * beta);
    let rhs = (2.0 * f.sup_norm()).powf(1.0 - theta) * holder_seminorm(f, beta).powf(theta);
    Interpolation { lhs, rhs }
}

/// Scan of `t^{β/2} ‖P_t f‖_{B^{α+β}_{p,∞}} / ‖f‖_{B^α_{p,∞}}` over a
/// logarithmic time grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SchauderScan {
    pub times: Vec<f64>,
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub argmax: f64,
}

/// Points per decade of the Schauder time grid.
pub const SCHAUDER_POINTS_PER_DECADE: usize = 16;

/// Scans `t ∈ [t_max·10^{-decades}, t_max]`; `decades` is chosen so that the
/// grid reaches below the smoothing time `dx²` of the finest mode.
///
/// # Panics
/// Unless `0 ≤ β < 2` and `t_max > 0`.
pub fn schauder_check(f: &GridFunction, alpha: f64, beta: f64, t_max: f64, p: Lp) -> SchauderScan {
    assert!((0.0..2.0).contains(&beta), "β must be in [0, 2)");
    assert!(t_max > 0.0, "time horizon must be positive");
    let dx = f.grid().dx();
    let t_min = 0.01 * dx * dx / (4.0 * std::f64::consts::PI * std::f64::consts::PI);
    let decades = (t_max / t_min).log10().ceil().max(1.0);
    let count = (decades as usize) * SCHAUDER_POINTS_PER_DECADE + 1;
    let base = besov_block_norms(f, p).norm(alpha);
    let mut times = Vec::with_capacity(count);
    let mut ratios = Vec::with_capacity(count);
    for i in 0..count {
        let t = t_max * 10f64.powf(-decades * (1.0 - i as f64 / (count - 1) as f64));
        let smoothed = besov_block_norms(&heat_semigroup(f, t), p).norm(alpha + beta);
        times.push(t);
        ratios.push(t.powf(beta / 2.0) * smoothed / base);
    }
    let (k, &max_ratio) =
        ratios.iter().enumerate().fold(
            (0, &f64::NEG_INFINITY),
            |acc, (i, r)| if *r > *acc.1 { (i, r) } else { acc },
        );
    SchauderScan {
        argmax: times[k],
        times,
        ratios,
        max_ratio,
    }
}

/// Nearest node to position `x` on the torus.
fn node(grid: TorusGrid, x: f64) -> usize {
    let n = grid.len();
    ((x.rem_euclid(1.0) * n as f64).round() as usize) % n
}

/// `‖δ_x - δ_y‖_{B^{-γ}_{1,∞}}` with point masses represented by the scaled
/// indicators `1/dx` at the nearest nodes.
///
/// # Panics
/// If `γ ≤ 0`.
pub fn dirac_distance(x: f64, y: f64, gamma: f64, grid: TorusGrid) -> f64 {
    assert!(gamma > 0.0, "γ must be positive");
    let (i, j) = (node(grid, x), node(grid, y));
    if i == j {
        return 0.0;
    }
    let mut values = vec![0.0; grid.len()];
    values[i] += 1.0 / grid.dx();
    values[j] -= 1.0 / grid.dx();
    let f = GridFunction::new(grid, values).expect("finite");
    besov_block_norms(&f, Lp::One).norm(-gamma)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn grid(n: usize) -> TorusGrid {
        TorusGrid::new(n).unwrap()
    }

    #[test]
    fn partition_sums_to_one() {
        for k in 0..2000 {
            let r = k as f64 * 0.173;
            let s: f64 = (-1..=max_block(r) + 2).map(|j| dyadic_weight(j, r)).sum();
            assert!((s - 1.0).abs() < 1e-14, "r = {r}: {s}");
        }
        assert_eq!(dyadic_weight(2, 2.9), 0.0);
        assert_eq!(dyadic_weight(2, 10.7), 0.0);
        assert!(dyadic_weight(2, 4.0) > 0.0);
    }

    #[test]
    fn blocks_reconstruct_the_function() {
        let g = grid(64);
        let f = GridFunction::from_fn(g, |x| (2.0 * PI * x).sin().exp());
        let p = besov_block_norms(&f, Lp::Two);
        assert_eq!(p.blocks.first().unwrap().0, -1);
        assert_eq!(p.blocks.last().unwrap().0, max_block(32.0));
        let constant = besov_block_norms(&GridFunction::constant(g, 2.0), Lp::Infinity);
        assert!((constant.block(-1).unwrap() - 2.0).abs() < 1e-14);
        assert!(constant.blocks[1..].iter().all(|b| b.1 < 1e-14));
    }

    #[test]
    fn single_mode_sits_in_neighbouring_blocks() {
        let g = grid(128);
        let f = GridFunction::from_fn(g, |x| (2.0 * PI * 4.0 * x).cos());
        let p = besov_block_norms(&f, Lp::Two);
        for (j, b) in &p.blocks {
            if *j == 1 || *j == 2 {
                assert!(*b > 0.0);
            } else {
                assert!(*b < 1e-14, "block {j}: {b}");
            }
        }
        assert!(p.to_csv().starts_with("j,block_norm\n-1,"));
    }

    #[test]
    fn holder_basics() {
        let g = grid(512);
        assert_eq!(holder_seminorm(&GridFunction::constant(g, 3.0), 0.5), 0.0);
        let f = GridFunction::from_fn(g, |x| (2.0 * PI * x).sin());
        let h = holder_seminorm(&f, 0.99);
        assert!((h / (2.0 * PI) - 1.0).abs() < 0.05, "{h}");
        let scaled = holder_seminorm(&f.scale(3.5), 0.4);
        assert!((scaled - 3.5 * holder_seminorm(&f, 0.4)).abs() < 1e-12);
    }

    #[test]
    fn interpolation_on_constant_and_sine() {
        let g = grid(128);
        let c = interpolation_check(&GridFunction::constant(g, 1.0), 0.8, 0.5);
        assert_eq!((c.lhs, c.rhs), (0.0, 0.0));
        let s = interpolation_check(&GridFunction::from_fn(g, |x| (2.0 * PI * x).sin()), 0.8, 0.5);
        assert!(s.holds() && s.lhs > 0.0);
    }

    #[test]
    fn schauder_without_smoothing_gain_is_contractive() {
        let g = grid(64);
        let f = GridFunction::from_fn(g, |x| (2.0 * PI * x).cos() + 0.3 * (2.0 * PI * 9.0 * x).sin());
        let s = schauder_check(&f, 0.5, 0.0, 1.0, Lp::Infinity);
        assert!(s.max_ratio <= 1.0 + 1e-12);
    }

    #[test]
    fn single_mode_schauder_peak() {
        let g = grid(256);
        let k = 16.0;
        let f = GridFunction::from_fn(g, |x| (2.0 * PI * k * x).cos());
        let beta = 1.0;
        let s = schauder_check(&f, 0.0, beta, 1.0, Lp::Infinity);
        let t_star = beta / (8.0 * PI * PI * k * k);
        assert!((s.argmax / t_star).ln().abs() < 0.2, "{} vs {t_star}", s.argmax);
    }

    #[test]
    fn dirac_distance_basics() {
        let g = grid(256);
        assert_eq!(dirac_distance(0.25, 0.25, 0.5, g), 0.0);
        let far = dirac_distance(0.0, 0.5, 0.5, g);
        let near = dirac_distance(0.0, 0.25, 0.5, g);
        assert!(far.is_finite() && near < far);
    }
}
