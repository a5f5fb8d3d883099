//! Driving noises: space-time white noise on the torus and fractional noise
//! `ξ^H(t) V(x)` with Hurst index `H ∈ (1/2, 1)`, together with the integer
//! time shift `θ^z`.
//!
//! White noise is drawn from a counter-based stream keyed by
//! `(seed, absolute time step)`, so a shift is a pure re-indexing. Fractional
//! noise is materialized once over an explicit window of absolute time; paths
//! are views into that window and shifting moves the view.

use std::fmt::Write as _;
use std::ops::Range;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use thiserror::Error;

use crate::field::{fft_pair, FieldError, GridFunction, TorusGrid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("H must be in (1/2, 1), got {0}")]
    InvalidHurst(f64),
    #[error("steps per unit time must be positive")]
    InvalidStep,
    #[error("circulant embedding is not positive semidefinite (min eigenvalue {0:e})")]
    EmbeddingNotPsd(f64),
    #[error("dense covariance factorization failed")]
    FactorizationFailed,
    #[error("requested window [{start}, {end}) steps lies outside the materialized window [{have_start}, {have_end})")]
    WindowUnavailable {
        start: i64,
        end: i64,
        have_start: i64,
        have_end: i64,
    },
    #[error("ensemble needs at least {needed} realizations, got {got}")]
    InsufficientEnsemble { needed: usize, got: usize },
    #[error("empty window")]
    EmptyWindow,
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Mixes a base seed with an index into an independent stream key (splitmix64).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fills `out` with the white-noise slab of absolute time step `abs_step`:
/// iid `N(0, 1/(dt·dx))` values.
pub(crate) fn white_slab(seed: u64, abs_step: i64, dt: f64, dx: f64, out: &mut [f64]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(abs_step as u64);
    let sd = 1.0 / (dt * dx).sqrt();
    for v in out.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *v = sd * z;
    }
}

/// Space-time white noise on `[origin, origin + steps·dt) × 𝕋`.
#[derive(Clone, Debug, PartialEq)]
pub struct WhiteNoiseField {
    grid: TorusGrid,
    steps_per_unit: usize,
    steps: usize,
    origin: i64,
    seed: u64,
    values: Vec<f64>,
}

/// Samples white noise with `dt = 1/steps_per_unit`. Row `m` holds the slab of
/// absolute step `origin·steps_per_unit + m`.
pub fn sample_white(
    grid: TorusGrid,
    steps_per_unit: usize,
    steps: usize,
    origin: i64,
    seed: u64,
) -> Result<WhiteNoiseField, NoiseError> {
    if steps_per_unit == 0 {
        return Err(NoiseError::InvalidStep);
    }
    if steps == 0 {
        return Err(NoiseError::EmptyWindow);
    }
    let n = grid.len();
    let dt = 1.0 / steps_per_unit as f64;
    let base = origin * steps_per_unit as i64;
    let mut values = vec![0.0; steps * n];
    for (m, row) in values.chunks_exact_mut(n).enumerate() {
        white_slab(seed, base + m as i64, dt, grid.dx(), row);
    }
    Ok(WhiteNoiseField {
        grid,
        steps_per_unit,
        steps,
        origin,
        seed,
        values,
    })
}

impl WhiteNoiseField {
    /// Identically zero field (noise switched off).
    pub fn zeros(grid: TorusGrid, steps_per_unit: usize, steps: usize, origin: i64) -> Self {
        Self {
            grid,
            steps_per_unit: steps_per_unit.max(1),
            steps,
            origin,
            seed: 0,
            values: vec![0.0; steps * grid.len()],
        }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.steps_per_unit as f64
    }

    pub fn steps_per_unit(&self) -> usize {
        self.steps_per_unit
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn origin(&self) -> i64 {
        self.origin
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slab(&self, m: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[m * n..(m + 1) * n]
    }

    /// `θ^z`: the same realization observed `z` time units later.
    pub fn shift(&self, z: i64) -> WhiteNoiseField {
        sample_white(self.grid, self.steps_per_unit, self.steps, self.origin + z, self.seed)
            .expect("parameters were validated at construction")
    }

    /// CSV `t,x,value` with absolute times.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,value\n");
        let dt = self.dt();
        for m in 0..self.steps {
            let t = self.origin as f64 + m as f64 * dt;
            for (i, v) in self.slab(m).iter().enumerate() {
                let _ = writeln!(out, "{t:.16e},{:.16e},{v:.16e}", self.grid.point(i));
            }
        }
        out
    }

    pub fn metadata(&self) -> String {
        format!(
            "kind=white\nseed={}\norigin={}\nsteps_per_unit={}\nsteps={}\nn={}\n",
            self.seed,
            self.origin,
            self.steps_per_unit,
            self.steps,
            self.grid.len()
        )
    }
}

/// Autocovariance of unit-step fractional Gaussian noise at lag `k`.
pub fn fgn_autocovariance(hurst: f64, k: usize) -> f64 {
    let h2 = 2.0 * hurst;
    let k = k as f64;
    0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum FgnMethod {
    /// Circulant embedding, falling back to dense factorization if the
    /// embedding is not positive semidefinite.
    #[default]
    Auto,
    CirculantEmbedding,
    DenseCholesky,
}

fn fgn_circulant(hurst: f64, count: usize, scale: f64, rng: &mut ChaCha8Rng) -> Result<Vec<f64>, NoiseError> {
    let m = 2 * count.next_power_of_two();
    let half = m / 2;
    let mut c: Vec<Complex64> = (0..m)
        .map(|j| {
            let lag = if j <= half { j } else { m - j };
            Complex64::new(fgn_autocovariance(hurst, lag), 0.0)
        })
        .collect();
    let fft = fft_pair(m).forward;
    fft.process(&mut c);
    let max_eig = c.iter().fold(0.0f64, |a, v| a.max(v.re));
    let min_eig = c.iter().fold(f64::INFINITY, |a, v| a.min(v.re));
    if min_eig < -1e-10 * max_eig {
        return Err(NoiseError::EmbeddingNotPsd(min_eig));
    }
    let mut w: Vec<Complex64> = c
        .iter()
        .map(|lambda| {
            let s = (lambda.re.max(0.0) / m as f64).sqrt();
            let a: f64 = StandardNormal.sample(rng);
            let b: f64 = StandardNormal.sample(rng);
            Complex64::new(s * a, s * b)
        })
        .collect();
    fft.process(&mut w);
    Ok(w[..count].iter().map(|v| scale * v.re).collect())
}

fn fgn_dense(hurst: f64, count: usize, scale: f64, rng: &mut ChaCha8Rng) -> Result<Vec<f64>, NoiseError> {
    let cov = DMatrix::from_fn(count, count, |i, j| fgn_autocovariance(hurst, i.abs_diff(j)));
    let chol = cov.cholesky().ok_or(NoiseError::FactorizationFailed)?;
    let z = nalgebra::DVector::from_fn(count, |_, _| StandardNormal.sample(rng));
    let x = chol.l() * z;
    Ok(x.iter().map(|v| scale * v).collect())
}

/// `count` increments of fractional Gaussian noise with step `dt`.
///
/// Accepts any `H ∈ (0, 1)`; the public samplers restrict to `H > 1/2`.
pub fn fractional_gaussian_noise(
    hurst: f64,
    count: usize,
    dt: f64,
    rng: &mut ChaCha8Rng,
    method: FgnMethod,
) -> Result<Vec<f64>, NoiseError> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(NoiseError::InvalidHurst(hurst));
    }
    if count == 0 {
        return Err(NoiseError::EmptyWindow);
    }
    let scale = dt.powf(hurst);
    match method {
        FgnMethod::CirculantEmbedding => fgn_circulant(hurst, count, scale, rng),
        FgnMethod::DenseCholesky => fgn_dense(hurst, count, scale, rng),
        FgnMethod::Auto => match fgn_circulant(hurst, count, scale, rng) {
            Err(NoiseError::EmbeddingNotPsd(_)) => fgn_dense(hurst, count, scale, rng),
            other => other,
        },
    }
}

fn check_hurst(hurst: f64) -> Result<(), NoiseError> {
    if hurst > 0.5 && hurst < 1.0 {
        Ok(())
    } else {
        Err(NoiseError::InvalidHurst(hurst))
    }
}

/// One realization of fractional noise, materialized over a window of
/// absolute time `[start, end)` (in time units).
#[derive(Clone, Debug, PartialEq)]
pub struct FbmNoise {
    hurst: f64,
    steps_per_unit: usize,
    seed: u64,
    start_step: i64,
    increments: Arc<[f64]>,
}

impl FbmNoise {
    pub fn materialize(
        hurst: f64,
        steps_per_unit: usize,
        window: Range<i64>,
        seed: u64,
        method: FgnMethod,
    ) -> Result<Self, NoiseError> {
        check_hurst(hurst)?;
        if steps_per_unit == 0 {
            return Err(NoiseError::InvalidStep);
        }
        if window.end <= window.start {
            return Err(NoiseError::EmptyWindow);
        }
        let spu = steps_per_unit as i64;
        Self::materialize_steps(
            hurst,
            steps_per_unit,
            window.start * spu..window.end * spu,
            seed,
            method,
        )
    }

    fn materialize_steps(
        hurst: f64,
        steps_per_unit: usize,
        steps: Range<i64>,
        seed: u64,
        method: FgnMethod,
    ) -> Result<Self, NoiseError> {
        let count = (steps.end - steps.start) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dt = 1.0 / steps_per_unit as f64;
        let increments = fractional_gaussian_noise(hurst, count, dt, &mut rng, method)?;
        Ok(Self {
            hurst,
            steps_per_unit,
            seed,
            start_step: steps.start,
            increments: increments.into(),
        })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn steps_per_unit(&self) -> usize {
        self.steps_per_unit
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Materialized absolute-step range.
    pub fn step_range(&self) -> Range<i64> {
        self.start_step..self.start_step + self.increments.len() as i64
    }

    /// Increment `β(t_{k+1}) - β(t_k)` over absolute step `k`.
    pub fn increment(&self, abs_step: i64) -> Option<f64> {
        let idx = abs_step - self.start_step;
        if idx < 0 {
            return None;
        }
        self.increments.get(idx as usize).copied()
    }

    pub(crate) fn check_steps(&self, steps: Range<i64>) -> Result<(), NoiseError> {
        let have = self.step_range();
        if steps.start < have.start || steps.end > have.end {
            return Err(NoiseError::WindowUnavailable {
                start: steps.start,
                end: steps.end,
                have_start: have.start,
                have_end: have.end,
            });
        }
        Ok(())
    }

    /// Path view of `steps` steps starting at absolute time `origin`.
    pub fn path(&self, origin: i64, steps: usize) -> Result<FbmPath, NoiseError> {
        let first = origin * self.steps_per_unit as i64;
        self.check_steps(first..first + steps as i64)?;
        Ok(FbmPath {
            noise: self.clone(),
            origin,
            steps,
        })
    }
}

/// Fractional Brownian path `β^H` on `[origin, origin + steps·dt]`, re-based so
/// that its value at local time 0 is exactly 0.
#[derive(Clone, Debug, PartialEq)]
pub struct FbmPath {
    noise: FbmNoise,
    origin: i64,
    steps: usize,
}

/// Samples an fBm path; the realization is materialized over exactly the
/// requested window, so shifts beyond it fail with `WindowUnavailable`.
pub fn sample_fbm(
    hurst: f64,
    steps_per_unit: usize,
    steps: usize,
    origin: i64,
    seed: u64,
) -> Result<FbmPath, NoiseError> {
    check_hurst(hurst)?;
    if steps_per_unit == 0 {
        return Err(NoiseError::InvalidStep);
    }
    if steps == 0 {
        return Err(NoiseError::EmptyWindow);
    }
    let first = origin * steps_per_unit as i64;
    let noise = FbmNoise::materialize_steps(
        hurst,
        steps_per_unit,
        first..first + steps as i64,
        seed,
        FgnMethod::Auto,
    )?;
    noise.path(origin, steps)
}

impl FbmPath {
    pub fn hurst(&self) -> f64 {
        self.noise.hurst
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.noise.steps_per_unit as f64
    }

    pub fn steps_per_unit(&self) -> usize {
        self.noise.steps_per_unit
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn origin(&self) -> i64 {
        self.origin
    }

    pub fn seed(&self) -> u64 {
        self.noise.seed
    }

    pub fn source(&self) -> &FbmNoise {
        &self.noise
    }

    fn first_step(&self) -> i64 {
        self.origin * self.noise.steps_per_unit as i64
    }

    /// Increments over local steps `0..steps`.
    pub fn increments(&self) -> &[f64] {
        let start = (self.first_step() - self.noise.start_step) as usize;
        &self.noise.increments[start..start + self.steps]
    }

    /// `β` at local times `k·dt`, `k = 0..=steps`; the first value is 0.
    pub fn values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.steps + 1);
        let mut acc = 0.0;
        out.push(acc);
        for d in self.increments() {
            acc += d;
            out.push(acc);
        }
        out
    }

    /// Piecewise-linear interpolation of `β` at local time `t`.
    pub fn value_at(&self, t: f64) -> f64 {
        let values = self.values();
        let x = (t / self.dt()).clamp(0.0, self.steps as f64);
        let k = (x.floor() as usize).min(self.steps.saturating_sub(1));
        let frac = x - k as f64;
        values[k] + frac * (values[k + 1] - values[k])
    }

    /// `θ^z`: the same realization re-based at `origin + z`.
    pub fn shift(&self, z: i64) -> Result<FbmPath, NoiseError> {
        self.noise.path(self.origin + z, self.steps)
    }

    /// CSV `t,value` with absolute times.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,value\n");
        let dt = self.dt();
        for (k, v) in self.values().iter().enumerate() {
            let _ = writeln!(out, "{:.16e},{v:.16e}", self.origin as f64 + k as f64 * dt);
        }
        out
    }

    pub fn metadata(&self) -> String {
        let r = self.noise.step_range();
        format!(
            "kind=fbm\nhurst={}\nseed={}\norigin={}\nsteps_per_unit={}\nsteps={}\nwindow_steps={}..{}\n",
            self.hurst(),
            self.seed(),
            self.origin,
            self.steps_per_unit(),
            self.steps,
            r.start,
            r.end
        )
    }
}

/// Smooth spatial profile `V` multiplying the fractional noise.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialProfile {
    v: GridFunction,
}

impl SpatialProfile {
    pub fn new(v: GridFunction) -> Self {
        Self { v }
    }

    pub fn zero(grid: TorusGrid) -> Self {
        Self::new(GridFunction::constant(grid, 0.0))
    }

    /// `V(x) = Σ_k cos[k]·cos(2πkx) + Σ_k sin[k-1]·sin(2πkx)`.
    pub fn trig(grid: TorusGrid, cos: &[f64], sin: &[f64]) -> Self {
        use std::f64::consts::PI;
        Self::new(GridFunction::from_fn(grid, |x| {
            let c: f64 = cos
                .iter()
                .enumerate()
                .map(|(k, a)| a * (2.0 * PI * k as f64 * x).cos())
                .sum();
            let s: f64 = sin
                .iter()
                .enumerate()
                .map(|(k, b)| b * (2.0 * PI * (k + 1) as f64 * x).sin())
                .sum();
            c + s
        }))
    }

    pub fn values(&self) -> &[f64] {
        self.v.values()
    }

    pub fn as_function(&self) -> &GridFunction {
        &self.v
    }

    pub fn grid(&self) -> TorusGrid {
        self.v.grid()
    }
}

/// Noise realizations that can be tested against functions and shifted.
pub trait Pairing: Sized {
    type TestFunction: ?Sized;

    /// `⟨ξ, φ⟩` with `φ` evaluated in local time.
    fn pair(&self, phi: &Self::TestFunction) -> f64;

    fn shifted(&self, z: i64) -> Result<Self, NoiseError>;
}

impl Pairing for WhiteNoiseField {
    type TestFunction = dyn Fn(f64, f64) -> f64 + Sync;

    fn pair(&self, phi: &Self::TestFunction) -> f64 {
        let dt = self.dt();
        let dx = self.grid.dx();
        let mut acc = 0.0;
        for m in 0..self.steps {
            let t = (m as f64 + 0.5) * dt;
            for (i, v) in self.slab(m).iter().enumerate() {
                acc += phi(t, self.grid.point(i)) * v;
            }
        }
        acc * dt * dx
    }

    fn shifted(&self, z: i64) -> Result<Self, NoiseError> {
        Ok(self.shift(z))
    }
}

impl Pairing for FbmPath {
    type TestFunction = dyn Fn(f64) -> f64 + Sync;

    fn pair(&self, phi: &Self::TestFunction) -> f64 {
        let dt = self.dt();
        self.increments()
            .iter()
            .enumerate()
            .map(|(k, d)| phi((k as f64 + 0.5) * dt) * d)
            .sum()
    }

    fn shifted(&self, z: i64) -> Result<Self, NoiseError> {
        self.shift(z)
    }
}

/// Empirical covariance with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct CovarianceEstimate {
    pub value: f64,
    pub std_error: f64,
}

pub const MIN_PROBE_ENSEMBLE: usize = 100;

/// Empirical `Cov(⟨ξ, φ_a⟩, ⟨θ^z ξ, φ_b⟩)` over independent realizations.
pub fn covariance_probe<N: Pairing>(
    ensemble: &[N],
    phi_a: &N::TestFunction,
    phi_b: &N::TestFunction,
    z: i64,
) -> Result<CovarianceEstimate, NoiseError> {
    if ensemble.len() < MIN_PROBE_ENSEMBLE {
        return Err(NoiseError::InsufficientEnsemble {
            needed: MIN_PROBE_ENSEMBLE,
            got: ensemble.len(),
        });
    }
    let mut xs = Vec::with_capacity(ensemble.len());
    let mut ys = Vec::with_capacity(ensemble.len());
    for w in ensemble {
        xs.push(w.pair(phi_a));
        ys.push(w.shifted(z)?.pair(phi_b));
    }
    let r = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / r;
    let my = ys.iter().sum::<f64>() / r;
    let prods: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let value = prods.iter().sum::<f64>() / (r - 1.0);
    let mean_p = prods.iter().sum::<f64>() / r;
    let var_p = prods.iter().map(|p| (p - mean_p).powi(2)).sum::<f64>() / (r - 1.0);
    Ok(CovarianceEstimate {
        value,
        std_error: (var_p / r).sqrt(),
    })
}
