//! Projective geometry of the cone of positive functions on the torus.
//!
//! States live on the slice of unit-integral, strictly positive grid functions
//! ([`Density`]). The Hilbert projective distance is computed entirely in log
//! space as the oscillation of `log(f/g)`.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::field::{integrate, FieldError, GridFunction, TorusGrid};

/// Smallest admissible density value. Anything below is rejected, not clamped.
pub const MIN_DENSITY_VALUE: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConeError {
    #[error("input is not strictly positive (min value {min:e} at node {index})")]
    NonPositiveInput { index: usize, min: f64 },
    #[error("grids differ: {0} vs {1} points")]
    GridMismatch(usize, usize),
    #[error("kernel is not strictly positive (min entry {0:e})")]
    NonPositiveKernel(f64),
    #[error("kernel entries must be finite and nonnegative (entry {0})")]
    InvalidKernelEntry(usize),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("malformed kernel csv at line {line}: {reason}")]
    Csv { line: usize, reason: String },
}

/// Strictly positive grid function with unit integral.
#[derive(Clone, Debug, PartialEq)]
pub struct Density(GridFunction);

impl Density {
    /// Uniform density `1` on the torus.
    pub fn uniform(grid: TorusGrid) -> Self {
        Density(GridFunction::constant(grid, 1.0))
    }

    pub fn grid(&self) -> TorusGrid {
        self.0.grid()
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }

    pub fn as_function(&self) -> &GridFunction {
        &self.0
    }

    pub fn into_function(self) -> GridFunction {
        self.0
    }

    pub fn log_values(&self) -> Vec<f64> {
        self.0.values().iter().map(|v| v.ln()).collect()
    }
}

fn check_positive(values: &[f64]) -> Result<(), ConeError> {
    let (index, min) = values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    if !(min > MIN_DENSITY_VALUE) {
        return Err(ConeError::NonPositiveInput { index, min });
    }
    Ok(())
}

/// Projects a strictly positive function onto the unit-integral slice.
pub fn normalize(f: &GridFunction) -> Result<Density, ConeError> {
    check_positive(f.values())?;
    let mass = integrate(f);
    let scaled = f.scale(1.0 / mass);
    check_positive(scaled.values())?;
    Ok(Density(scaled))
}

/// Oscillation of `log(f_i) - log(g_i)` over the two raw value slices.
pub(crate) fn log_ratio_oscillation(f: &[f64], g: &[f64]) -> f64 {
    let (lo, hi) = f
        .iter()
        .zip(g)
        .map(|(a, b)| a.ln() - b.ln())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r), hi.max(r)));
    hi - lo
}

/// Hilbert projective distance `log M(f,g) - log m(f,g)`.
pub fn hilbert_distance(f: &Density, g: &Density) -> Result<f64, ConeError> {
    if f.grid() != g.grid() {
        return Err(ConeError::GridMismatch(f.grid().len(), g.grid().len()));
    }
    Ok(log_ratio_oscillation(f.values(), g.values()))
}

/// Dense kernel matrix `K(x_i, y_j)` of an integral operator, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PositiveKernel {
    grid: TorusGrid,
    entries: Vec<f64>,
}

impl PositiveKernel {
    /// Entries must be finite and nonnegative; strict positivity is checked by
    /// the operations that need it (see [`check_kernel_bounds`]).
    pub fn new(grid: TorusGrid, entries: Vec<f64>) -> Result<Self, ConeError> {
        let n = grid.len();
        if entries.len() != n * n {
            return Err(FieldError::LengthMismatch {
                expected: n * n,
                got: entries.len(),
            }
            .into());
        }
        if let Some(i) = entries.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(ConeError::InvalidKernelEntry(i));
        }
        Ok(Self { grid, entries })
    }

    pub fn from_fn(grid: TorusGrid, k: impl Fn(f64, f64) -> f64) -> Result<Self, ConeError> {
        let n = grid.len();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(k(grid.point(i), grid.point(j)));
            }
        }
        Self::new(grid, entries)
    }

    /// Builds a kernel from its columns (`columns[j][i] = K(x_i, y_j)`).
    pub fn from_columns(grid: TorusGrid, columns: &[f64]) -> Result<Self, ConeError> {
        let n = grid.len();
        let mut entries = vec![0.0; n * n];
        for (j, col) in columns.chunks_exact(n).enumerate() {
            for (i, v) in col.iter().enumerate() {
                entries[i * n + j] = *v;
            }
        }
        Self::new(grid, entries)
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.grid.len() + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        let n = self.grid.len();
        (0..n).map(|i| self.entries[i * n + j]).collect()
    }

    /// Quadrature of `∫ K(x, y) f(y) dy`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        let dx = self.grid.dx();
        self.entries
            .chunks_exact(n)
            .map(|row| dx * row.iter().zip(f).map(|(k, v)| k * v).sum::<f64>())
            .collect()
    }

    /// Kernel of the composition `self ∘ other` (`dx · K_self · K_other`).
    pub fn compose(&self, other: &PositiveKernel) -> Result<PositiveKernel, ConeError> {
        if self.grid != other.grid {
            return Err(ConeError::GridMismatch(self.grid.len(), other.grid.len()));
        }
        let n = self.grid.len();
        let dx = self.grid.dx();
        let mut out = vec![0.0; n * n];
        out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            for l in 0..n {
                let a = dx * self.entries[i * n + l];
                let brow = &other.entries[l * n..(l + 1) * n];
                for (o, b) in row.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        });
        PositiveKernel::new(self.grid, out)
    }

    /// Rescales every column to unit integral; the projective action and the
    /// Birkhoff diameter are unchanged.
    pub fn normalize_columns(&mut self) {
        let n = self.grid.len();
        let dx = self.grid.dx();
        for j in 0..n {
            let mass: f64 = dx * (0..n).map(|i| self.entries[i * n + j]).sum::<f64>();
            if mass > 0.0 {
                for i in 0..n {
                    self.entries[i * n + j] /= mass;
                }
            }
        }
    }

    /// CSV matrix, row-major, with a `# n=<n> t=<t>` header line.
    pub fn to_csv(&self, t: f64) -> String {
        let n = self.grid.len();
        let mut out = format!("# n={n} t={t}\n");
        for row in self.entries.chunks_exact(n) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }

    /// Parses the format written by [`PositiveKernel::to_csv`]; returns the kernel and `t`.
    pub fn from_csv(text: &str) -> Result<(Self, f64), ConeError> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        let bad = |line: usize, reason: &str| ConeError::Csv {
            line,
            reason: reason.to_string(),
        };
        let rest = header
            .strip_prefix("# ")
            .ok_or_else(|| bad(1, "expected `# n=<n> t=<t>` header"))?;
        let mut n = None;
        let mut t = None;
        for part in rest.split_whitespace() {
            if let Some(v) = part.strip_prefix("n=") {
                n = v.parse::<usize>().ok();
            } else if let Some(v) = part.strip_prefix("t=") {
                t = v.parse::<f64>().ok();
            }
        }
        let (n, t) = n.zip(t).ok_or_else(|| bad(1, "header must carry n and t"))?;
        let grid = TorusGrid::new(n)?;
        let mut entries = Vec::with_capacity(n * n);
        for (ln, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            for field in line.split(',') {
                let v = field.trim().parse::<f64>().map_err(|e| bad(ln + 2, &e.to_string()))?;
                entries.push(v);
            }
        }
        Ok((Self::new(grid, entries)?, t))
    }

    pub fn write_csv(&self, t: f64, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv(t))
    }
}

/// Projective action `A^π f = A f / λ(A f)`.
pub fn projective_apply(k: &PositiveKernel, f: &Density) -> Result<Density, ConeError> {
    if k.grid() != f.grid() {
        return Err(ConeError::GridMismatch(k.grid().len(), f.grid().len()));
    }
    let image = GridFunction::new(k.grid(), k.apply(f.values()))?;
    normalize(&image)
}

/// Projective diameter of a kernel's image and its contraction coefficient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Birkhoff {
    pub diameter: f64,
    pub tau: f64,
    /// `log tanh(diameter / 4)`, evaluated without cancellation for large diameters.
    pub log_tau: f64,
}

impl Birkhoff {
    pub fn from_diameter(diameter: f64) -> Self {
        let y = diameter / 4.0;
        let log_tau = if y == 0.0 {
            f64::NEG_INFINITY
        } else if y > 1.0 {
            let e = (-2.0 * y).exp();
            (-e).ln_1p() - e.ln_1p()
        } else {
            y.tanh().ln()
        };
        Self {
            diameter,
            tau: y.tanh(),
            log_tau,
        }
    }
}

/// Birkhoff diameter via column pairs: the image of the cone is spanned by the
/// columns (images of point masses), so the diameter is the largest Hilbert
/// distance between two columns.
pub fn birkhoff(k: &PositiveKernel) -> Result<Birkhoff, ConeError> {
    let bounds = check_kernel_bounds(k);
    if !bounds.strictly_positive() {
        return Err(ConeError::NonPositiveKernel(bounds.gamma));
    }
    let n = k.grid().len();
    // Column-major log entries so each column is contiguous.
    let mut logs = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            logs[j * n + i] = k.get(i, j).ln();
        }
    }
    let diameter = (0..n)
        .into_par_iter()
        .map(|j| {
            let cj = &logs[j * n..(j + 1) * n];
            let mut best: f64 = 0.0;
            for jp in (j + 1)..n {
                let cjp = &logs[jp * n..(jp + 1) * n];
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for (a, b) in cj.iter().zip(cjp) {
                    let r = a - b;
                    lo = lo.min(r);
                    hi = hi.max(r);
                }
                best = best.max(hi - lo);
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    Ok(Birkhoff::from_diameter(diameter))
}

/// Two-sided bounds `γ ≤ K ≤ δ` on the kernel entries.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelBounds {
    pub gamma: f64,
    pub delta: f64,
}

impl KernelBounds {
    pub fn strictly_positive(&self) -> bool {
        self.gamma > 0.0
    }
}

pub fn check_kernel_bounds(k: &PositiveKernel) -> KernelBounds {
    let (gamma, delta) = k
        .entries()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    KernelBounds { gamma, delta }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::field::heat_semigroup;

    fn grid(n: usize) -> TorusGrid {
        TorusGrid::new(n).unwrap()
    }

    #[test]
    fn normalize_constant_and_rejects_zero() {
        let g = grid(16);
        let d = normalize(&GridFunction::constant(g, 2.0)).unwrap();
        assert!(d.values().iter().all(|v| (v - 1.0).abs() < 1e-15));
        let mut v = vec![1.0; 16];
        v[5] = 0.0;
        let f = GridFunction::new(g, v).unwrap();
        assert_eq!(normalize(&f), Err(ConeError::NonPositiveInput { index: 5, min: 0.0 }));
        let tiny = GridFunction::new(g, vec![1e-301; 16]).unwrap();
        assert!(normalize(&tiny).is_err());
    }

    #[test]
    fn normalize_is_idempotent() {
        let g = grid(32);
        let f = GridFunction::from_fn(g, |x| (2.0 * PI * x).sin().exp());
        let d = normalize(&f).unwrap();
        let dd = normalize(d.as_function()).unwrap();
        assert!(d.as_function().sup_distance(dd.as_function()).unwrap() < 1e-15);
    }

    #[test]
    fn distance_basics() {
        let g = grid(256);
        let f = normalize(&GridFunction::from_fn(g, |x| (2.0 * PI * x).sin().exp())).unwrap();
        assert_eq!(hilbert_distance(&f, &f).unwrap(), 0.0);
        let scaled = normalize(&f.as_function().scale(7.3)).unwrap();
        assert!(hilbert_distance(&f, &scaled).unwrap() < 1e-14);
        let one = Density::uniform(g);
        // sin hits ±1 exactly at nodes n/4 and 3n/4.
        assert!((hilbert_distance(&one, &f).unwrap() - 2.0).abs() < 1e-6);
        let other = Density::uniform(grid(128));
        assert!(matches!(
            hilbert_distance(&one, &other),
            Err(ConeError::GridMismatch(256, 128))
        ));
    }

    #[test]
    fn constant_and_separable_kernels_have_zero_diameter() {
        let g = grid(16);
        let c = PositiveKernel::from_fn(g, |_, _| 3.0).unwrap();
        let b = birkhoff(&c).unwrap();
        assert_eq!((b.diameter, b.tau), (0.0, 0.0));
        let s = PositiveKernel::from_fn(g, |x, y| (1.5 + (2.0 * PI * x).cos()) * (2.0 + y)).unwrap();
        let b = birkhoff(&s).unwrap();
        assert!(b.diameter < 1e-14 && b.tau < 1e-14);
    }

    #[test]
    fn constant_kernel_collapses_to_uniform() {
        let g = grid(16);
        let k = PositiveKernel::from_fn(g, |_, _| 1.0).unwrap();
        let f = normalize(&GridFunction::from_fn(g, |x| 1.0 + x)).unwrap();
        let out = projective_apply(&k, &f).unwrap();
        assert!(out.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn kernel_bounds_and_zero_entry() {
        let g = grid(8);
        let k = PositiveKernel::from_fn(g, |_, _| 0.7).unwrap();
        assert_eq!(check_kernel_bounds(&k), KernelBounds { gamma: 0.7, delta: 0.7 });
        let mut e = vec![1.0; 64];
        e[10] = 0.0;
        let z = PositiveKernel::new(g, e).unwrap();
        let b = check_kernel_bounds(&z);
        assert_eq!(b.gamma, 0.0);
        assert!(!b.strictly_positive());
        assert!(matches!(birkhoff(&z), Err(ConeError::NonPositiveKernel(_))));
        assert!(PositiveKernel::new(g, vec![-1.0; 64]).is_err());
    }

    #[test]
    fn heat_kernel_bounds_at_unit_time() {
        // Spectral evaluation of Σ_k e^{-4π²k²} e^{2πik(x-y)}.
        let g = grid(32);
        let k = PositiveKernel::from_fn(g, |x, y| {
            (-20i64..=20)
                .map(|m| crate::field::heat_multiplier(m, 1.0) * (2.0 * PI * m as f64 * (x - y)).cos())
                .sum()
        })
        .unwrap();
        let b = check_kernel_bounds(&k);
        assert!(b.gamma > 0.99 && b.delta < 1.01);
    }

    #[test]
    fn projective_apply_matches_heat_flow() {
        let g = grid(64);
        let t = 0.1;
        let heat = PositiveKernel::from_fn(g, |x, y| {
            (-32i64..=32)
                .map(|m| crate::field::heat_multiplier(m, t) * (2.0 * PI * m as f64 * (x - y)).cos())
                .sum()
        })
        .unwrap();
        let f = normalize(&GridFunction::from_fn(g, |x| 1.0 + 0.5 * (2.0 * PI * x).sin())).unwrap();
        let got = projective_apply(&heat, &f).unwrap();
        let want = normalize(&heat_semigroup(f.as_function(), t)).unwrap();
        assert!(got.as_function().sup_distance(want.as_function()).unwrap() < 1e-8);
    }

    #[test]
    fn projective_apply_of_composition() {
        let g = grid(16);
        let k1 = PositiveKernel::from_fn(g, |x, y| 1.0 + 0.5 * (2.0 * PI * (x - y)).cos()).unwrap();
        let k2 = PositiveKernel::from_fn(g, |x, y| 2.0 + x * y).unwrap();
        let f = normalize(&GridFunction::from_fn(g, |x| 1.0 + x)).unwrap();
        let two_step = projective_apply(&k2, &projective_apply(&k1, &f).unwrap()).unwrap();
        let composed = projective_apply(&k2.compose(&k1).unwrap(), &f).unwrap();
        assert!(two_step.as_function().sup_distance(composed.as_function()).unwrap() < 1e-10);
    }

    #[test]
    fn log_tau_is_stable_for_large_diameters() {
        let b = Birkhoff::from_diameter(200.0);
        assert_eq!(b.tau, 1.0);
        assert!(b.log_tau < 0.0 && b.log_tau.is_finite());
        let s = Birkhoff::from_diameter(1e-3);
        assert!((s.log_tau - (2.5e-4f64).tanh().ln()).abs() < 1e-12);
    }

    #[test]
    fn kernel_csv_roundtrip() {
        let g = grid(8);
        let k = PositiveKernel::from_fn(g, |x, y| 1.0 + x + 2.0 * y).unwrap();
        let text = k.to_csv(0.25);
        assert!(text.starts_with("# n=8 t=0.25\n"));
        let (back, t) = PositiveKernel::from_csv(&text).unwrap();
        assert_eq!((back, t), (k, 0.25));
    }
}
