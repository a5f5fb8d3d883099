//! Uniform periodic grid on the unit torus, quadrature and Fourier operators.
//!
//! Fourier coefficients follow the convention `f̂(k) = dx · Σ_j f(x_j) e^{-2πi k x_j}`
//! with wavenumbers `k ∈ (-n/2, n/2]`, so `f(x_j) = Σ_k f̂(k) e^{2πi k x_j}`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("grid size {0} must be a power of two and at least 8")]
    InvalidSize(usize),
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value at node {0}")]
    NonFinite(usize),
    #[error("grids differ: {0} vs {1} points")]
    GridMismatch(usize, usize),
    #[error("malformed csv at line {line}: {reason}")]
    Csv { line: usize, reason: String },
}

/// Uniform grid of `n` points on the torus `[0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusGrid {
    n: usize,
}

impl TorusGrid {
    pub const MIN_POINTS: usize = 8;

    pub fn new(n: usize) -> Result<Self, FieldError> {
        if n < Self::MIN_POINTS || !n.is_power_of_two() {
            return Err(FieldError::InvalidSize(n));
        }
        Ok(Self { n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid spacing; exact because `n` is a power of two.
    pub fn dx(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.point(i))
    }

    /// Signed wavenumber carried by FFT index `j`.
    pub fn wavenumber(&self, j: usize) -> i64 {
        if j <= self.n / 2 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    /// Periodic distance between nodes `i` and `j`.
    pub fn torus_distance(&self, i: usize, j: usize) -> f64 {
        let d = i.abs_diff(j);
        d.min(self.n - d) as f64 * self.dx()
    }
}

/// Samples of a function on a [`TorusGrid`]; `values[i] ≈ f(i·dx)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self, FieldError> {
        if values.len() != grid.len() {
            return Err(FieldError::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FieldError::NonFinite(i));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at the grid nodes. Panics if `f` produces a non-finite value.
    pub fn from_fn(grid: TorusGrid, f: impl Fn(f64) -> f64) -> Self {
        let values: Vec<f64> = grid.points().map(f).collect();
        Self::new(grid, values).expect("sampled function must be finite")
    }

    pub fn constant(grid: TorusGrid, c: f64) -> Self {
        Self::from_fn(grid, |_| c)
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pointwise map; panics if `f` produces a non-finite value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect()).expect("mapped values must be finite")
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn sup_distance(&self, other: &Self) -> Result<f64, FieldError> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<(), FieldError> {
        if self.grid != other.grid {
            return Err(FieldError::GridMismatch(self.grid.len(), other.grid.len()));
        }
        Ok(())
    }

    /// CSV with header `x,value`, values written with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,value\n");
        for (i, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{:.16e},{:.16e}", self.grid.point(i), v);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, FieldError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "x,value" => {}
            _ => {
                return Err(FieldError::Csv {
                    line: 1,
                    reason: "expected header `x,value`".into(),
                })
            }
        }
        let mut values = Vec::new();
        for (ln, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let field = line.split(',').nth(1).ok_or_else(|| FieldError::Csv {
                line: ln + 1,
                reason: "missing value column".into(),
            })?;
            let v: f64 = field.trim().parse().map_err(|e| FieldError::Csv {
                line: ln + 1,
                reason: format!("{e}"),
            })?;
            values.push(v);
        }
        let grid = TorusGrid::new(values.len())?;
        Self::new(grid, values)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv())
    }
}

/// Rectangle-rule quadrature `dx · Σ f(x_i)`.
pub fn integrate(f: &GridFunction) -> f64 {
    f.grid.dx() * f.values.iter().sum::<f64>()
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
    static PLANS: RefCell<HashMap<usize, FftPair>> = RefCell::new(HashMap::new());
}

#[derive(Clone)]
pub(crate) struct FftPair {
    pub forward: Arc<dyn Fft<f64>>,
    pub inverse: Arc<dyn Fft<f64>>,
}

pub(crate) fn fft_pair(n: usize) -> FftPair {
    PLANS.with(|plans| {
        plans
            .borrow_mut()
            .entry(n)
            .or_insert_with(|| {
                PLANNER.with(|p| {
                    let mut p = p.borrow_mut();
                    FftPair {
                        forward: p.plan_fft_forward(n),
                        inverse: p.plan_fft_inverse(n),
                    }
                })
            })
            .clone()
    })
}

/// Fourier coefficients indexed by FFT position (see [`TorusGrid::wavenumber`]).
pub fn fourier_coefficients(f: &GridFunction) -> Vec<Complex64> {
    let n = f.grid.len();
    let mut buf: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_pair(n).forward.process(&mut buf);
    let dx = f.grid.dx();
    buf.iter_mut().for_each(|c| *c *= dx);
    buf
}

/// Inverse of [`fourier_coefficients`]; the imaginary part is discarded.
pub fn from_fourier(grid: TorusGrid, coeffs: &[Complex64]) -> GridFunction {
    assert_eq!(coeffs.len(), grid.len(), "coefficient count must match the grid");
    let mut buf = coeffs.to_vec();
    fft_pair(grid.len()).inverse.process(&mut buf);
    GridFunction::new(grid, buf.iter().map(|c| c.re).collect())
        .expect("inverse transform of finite coefficients is finite")
}

fn apply_multiplier(f: &GridFunction, mult: impl Fn(i64) -> Complex64) -> GridFunction {
    let grid = f.grid;
    let mut coeffs = fourier_coefficients(f);
    for (j, c) in coeffs.iter_mut().enumerate() {
        *c *= mult(grid.wavenumber(j));
    }
    from_fourier(grid, &coeffs)
}

/// Heat-flow multiplier `e^{-4π²k²t}` on wavenumber `k`.
pub fn heat_multiplier(k: i64, t: f64) -> f64 {
    (-4.0 * PI * PI * (k * k) as f64 * t).exp()
}

/// Periodic heat semigroup `P_t f` for `∂_t = ∂_x²`.
///
/// # Panics
/// If `t < 0`.
pub fn heat_semigroup(f: &GridFunction, t: f64) -> GridFunction {
    assert!(t >= 0.0, "heat semigroup needs t >= 0, got {t}");
    if t == 0.0 {
        return f.clone();
    }
    apply_multiplier(f, |k| Complex64::new(heat_multiplier(k, t), 0.0))
}

/// Fourier multiplier `(2πik)^order`. The Nyquist mode is dropped for odd orders,
/// where it has no real-valued derivative.
///
/// # Panics
/// If `order` is not 1 or 2.
pub fn spectral_derivative(f: &GridFunction, order: u32) -> GridFunction {
    assert!(order == 1 || order == 2, "derivative order must be 1 or 2");
    let nyquist = (f.grid.len() / 2) as i64;
    apply_multiplier(f, |k| {
        if order % 2 == 1 && k == nyquist {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::new(0.0, 2.0 * PI * k as f64).powu(order)
    })
}

/// Diagonal Fourier multiplier applied in place to a batch of states stored
/// back to back (`states.len()` a multiple of the grid size).
pub(crate) struct FourierMultiplier {
    n: usize,
    mult: Vec<f64>,
    fft: FftPair,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl FourierMultiplier {
    /// Heat flow over time `t` (diffusivity already folded in by the caller).
    pub fn heat(grid: TorusGrid, t: f64) -> Self {
        let n = grid.len();
        let inv_n = 1.0 / n as f64;
        let mult = (0..n).map(|j| heat_multiplier(grid.wavenumber(j), t) * inv_n).collect();
        let fft = fft_pair(n);
        let scratch_len = fft
            .forward
            .get_inplace_scratch_len()
            .max(fft.inverse.get_inplace_scratch_len());
        Self {
            n,
            mult,
            fft,
            buf: Vec::new(),
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    pub fn apply(&mut self, states: &mut [f64]) {
        debug_assert_eq!(states.len() % self.n, 0);
        self.buf.clear();
        self.buf.extend(states.iter().map(|&v| Complex64::new(v, 0.0)));
        self.fft.forward.process_with_scratch(&mut self.buf, &mut self.scratch);
        for chunk in self.buf.chunks_exact_mut(self.n) {
            for (c, m) in chunk.iter_mut().zip(&self.mult) {
                *c *= *m;
            }
        }
        self.fft.inverse.process_with_scratch(&mut self.buf, &mut self.scratch);
        for (s, c) in states.iter_mut().zip(&self.buf) {
            *s = c.re;
        }
    }
}
