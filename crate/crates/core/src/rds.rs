//! Random dynamical system generated by the solution operators: cocycle
//! evaluation on shifted noise, kernel extraction, Lyapunov-rate estimation,
//! forward synchronization, pullback convergence (one force, one solution),
//! static Krein–Rutman fixed points and the time evolution of the centering
//! constants.
//!
//! The shift `θ^z` acts by whole time units; `φ_t(θ^z ω)` is the solution map
//! over `[z, z + t]` of the absolute noise time line.

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};
use std::fmt::Write as _;
use thiserror::Error;

use crate::cone::{
    birkhoff, hilbert_distance, normalize, projective_apply, Birkhoff, ConeError, Density, PositiveKernel,
};
use crate::field::{integrate, spectral_derivative, FieldError, GridFunction, TorusGrid};
use crate::noise::{white_slab, FbmNoise, NoiseError, SpatialProfile};
use crate::spde::{check_white_step, steps_in, SpdeError, Stepper};

/// Hilbert distances below this are treated as converged to round-off.
pub const UNDERFLOW_DISTANCE: f64 = 1e-13;

/// Fraction of the admissible series used by the tail fits.
pub const TAIL_FRACTION: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RdsError {
    #[error("time {t} is not a nonnegative multiple of the step {dt}")]
    InvalidTime { t: f64, dt: f64 },
    #[error("kernel has {count} nonpositive entries (min {min:e}); step too large or time too short")]
    NonPositive { min: f64, count: usize },
    #[error("at least {needed} samples required, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("no convergence after {iterations} iterations (last increment {increment:e})")]
    NoConvergence { iterations: usize, increment: f64 },
    #[error("white-noise cocycles are not supported by this operation")]
    WhiteNoiseUnsupported,
    #[error(transparent)]
    Spde(#[from] SpdeError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Driving noise of a cocycle.
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseModel {
    Zero,
    /// `ξ^H(t) V(x)` with a materialized fBm realization.
    Fractional {
        profile: SpatialProfile,
        noise: FbmNoise,
    },
    /// Space-time white noise from the counter-based stream of `seed`, one slab
    /// per solver step.
    White {
        seed: u64,
    },
}

impl NoiseModel {
    pub fn kind(&self) -> &'static str {
        match self {
            NoiseModel::Zero => "zero",
            NoiseModel::Fractional { .. } => "fractional",
            NoiseModel::White { .. } => "white",
        }
    }
}

/// Solution cocycle `φ_t(ω)` of the multiplicative heat equation with
/// diffusivity `ν` on a fixed grid and time step.
#[derive(Clone, Debug, PartialEq)]
pub struct Cocycle {
    grid: TorusGrid,
    steps_per_unit: usize,
    diffusivity: f64,
    noise: NoiseModel,
}

impl Cocycle {
    pub fn zero(grid: TorusGrid, steps_per_unit: usize, diffusivity: f64) -> Result<Self, RdsError> {
        if steps_per_unit == 0 {
            return Err(NoiseError::InvalidStep.into());
        }
        Ok(Self {
            grid,
            steps_per_unit,
            diffusivity,
            noise: NoiseModel::Zero,
        })
    }

    /// The solver step must divide the noise step.
    pub fn fractional(
        grid: TorusGrid,
        steps_per_unit: usize,
        diffusivity: f64,
        profile: SpatialProfile,
        noise: FbmNoise,
    ) -> Result<Self, RdsError> {
        if profile.grid() != grid {
            return Err(SpdeError::GridMismatch(profile.grid().len(), grid.len()).into());
        }
        let noise_spu = noise.steps_per_unit();
        if steps_per_unit < noise_spu || !steps_per_unit.is_multiple_of(noise_spu) {
            return Err(SpdeError::IncompatibleStep {
                solver: steps_per_unit,
                noise: noise_spu,
            }
            .into());
        }
        Ok(Self {
            grid,
            steps_per_unit,
            diffusivity,
            noise: NoiseModel::Fractional { profile, noise },
        })
    }

    /// Fails with `StepTooLarge` unless `dt ≤ dx/25`.
    pub fn white(grid: TorusGrid, steps_per_unit: usize, diffusivity: f64, seed: u64) -> Result<Self, RdsError> {
        if steps_per_unit == 0 {
            return Err(NoiseError::InvalidStep.into());
        }
        check_white_step(grid, 1.0 / steps_per_unit as f64)?;
        Ok(Self {
            grid,
            steps_per_unit,
            diffusivity,
            noise: NoiseModel::White { seed },
        })
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn steps_per_unit(&self) -> usize {
        self.steps_per_unit
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.steps_per_unit as f64
    }

    pub fn diffusivity(&self) -> f64 {
        self.diffusivity
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    fn steps_for(&self, t: f64) -> Result<usize, RdsError> {
        steps_in(t, self.steps_per_unit).ok_or(RdsError::InvalidTime { t, dt: self.dt() })
    }

    /// Advances a batch of states (stored back to back) by `steps` solver steps
    /// starting at absolute time `shift`. Returns the number of white-noise
    /// steps with a nonpositive Itô factor.
    pub(crate) fn propagate(&self, shift: i64, steps: usize, states: &mut [f64]) -> Result<usize, RdsError> {
        self.propagate_steps(shift * self.steps_per_unit as i64, steps, states)
    }

    /// As [`Cocycle::propagate`], starting at absolute solver step `first`.
    pub(crate) fn propagate_steps(&self, first: i64, steps: usize, states: &mut [f64]) -> Result<usize, RdsError> {
        let spu = self.steps_per_unit as i64;
        let mut stepper = Stepper::new(self.grid, self.dt(), self.diffusivity);
        let mut flags = 0;
        match &self.noise {
            NoiseModel::Zero => {
                for _ in 0..steps {
                    stepper.diffuse(states);
                }
            }
            NoiseModel::Fractional { profile, noise } => {
                let sub = spu / noise.steps_per_unit() as i64;
                let last = first + steps as i64;
                if steps > 0 {
                    noise.check_steps(first.div_euclid(sub)..(last - 1).div_euclid(sub) + 1)?;
                }
                for abs in first..last {
                    let inc = noise.increment(abs.div_euclid(sub)).expect("window checked");
                    stepper.fractional(states, profile.values(), inc / sub as f64);
                }
            }
            NoiseModel::White { seed } => {
                let mut xi = vec![0.0; self.grid.len()];
                let dt = self.dt();
                for abs in first..first + steps as i64 {
                    white_slab(*seed, abs, dt, self.grid.dx(), &mut xi);
                    flags += stepper.white(states, &xi, dt) as usize;
                }
            }
        }
        Ok(flags)
    }
}

/// `φ_t(θ^shift ω) u0`.
pub fn apply_cocycle(c: &Cocycle, shift: i64, t: f64, u0: &GridFunction) -> Result<GridFunction, RdsError> {
    u0.check_same_grid(&GridFunction::constant(c.grid, 0.0))?;
    let steps = c.steps_for(t)?;
    let mut u = u0.values().to_vec();
    c.propagate(shift, steps, &mut u)?;
    Ok(GridFunction::new(c.grid, u)?)
}

/// Kernel `K(x, y) = φ_t(θ^shift ω)(δ_y)(x)`, column `j` being the image of the
/// scaled indicator `1/dx` at node `j`. All columns are advanced together.
pub fn kernel_matrix(c: &Cocycle, shift: i64, t: f64) -> Result<PositiveKernel, RdsError> {
    let steps = c.steps_for(t)?;
    if steps == 0 {
        return Err(RdsError::InvalidTime { t, dt: c.dt() });
    }
    let n = c.grid.len();
    let mut columns = vec![0.0; n * n];
    let inv_dx = 1.0 / c.grid.dx();
    for j in 0..n {
        columns[j * n + j] = inv_dx;
    }
    c.propagate(shift, steps, &mut columns)?;
    let (min, count) = columns
        .iter()
        .fold((f64::INFINITY, 0), |(m, k), &v| (m.min(v), k + (v <= 0.0) as usize));
    if count > 0 || !min.is_finite() {
        return Err(RdsError::NonPositive { min, count });
    }
    Ok(PositiveKernel::from_columns(c.grid, &columns)?)
}

/// Least-squares line with the standard error of the slope.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub slope_se: f64,
    pub points: usize,
}

/// Ordinary least squares; needs at least three points.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let m = xs.len().min(ys.len());
    if m < 3 {
        return None;
    }
    let mf = m as f64;
    let mx = xs[..m].iter().sum::<f64>() / mf;
    let my = ys[..m].iter().sum::<f64>() / mf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys).take(m) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .take(m)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let slope_se = (sse / (mf - 2.0) / sxx).sqrt();
    Some(LinearFit {
        slope,
        intercept,
        r2,
        slope_se,
        points: m,
    })
}

/// Fits `log d` against `x` over the last [`TAIL_FRACTION`] of the points
/// preceding the first value below [`UNDERFLOW_DISTANCE`].
fn tail_fit(xs: &[f64], ds: &[f64]) -> Option<LinearFit> {
    let usable = ds.iter().position(|&d| d < UNDERFLOW_DISTANCE).unwrap_or(ds.len());
    let start = usable - ((usable as f64 * TAIL_FRACTION).ceil() as usize).min(usable);
    let x = &xs[start..usable];
    let y: Vec<f64> = ds[start..usable].iter().map(|d| d.ln()).collect();
    fit_line(x, &y)
}

/// Batch-means estimate of `E log τ(φ_1)` along one noise path.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LyapunovEstimate {
    pub samples: Vec<f64>,
    pub mean: f64,
    pub std_error: f64,
    /// Half width of the 95% Student-t interval over the batch means.
    pub ci_half_width: f64,
    pub batches: usize,
    pub running_average: Vec<f64>,
}

impl LyapunovEstimate {
    pub fn from_samples(samples: Vec<f64>) -> Result<Self, RdsError> {
        let n = samples.len();
        if n < 4 {
            return Err(RdsError::TooFewSamples { needed: 4, got: n });
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let mut acc = 0.0;
        let running_average = samples
            .iter()
            .enumerate()
            .map(|(i, s)| {
                acc += s;
                acc / (i + 1) as f64
            })
            .collect();
        let batches = ((n as f64).sqrt().floor() as usize).max(2);
        let size = n / batches;
        let means: Vec<f64> = samples
            .chunks_exact(size)
            .take(batches)
            .map(|b| b.iter().sum::<f64>() / size as f64)
            .collect();
        let bm = means.iter().sum::<f64>() / batches as f64;
        let var = means.iter().map(|m| (m - bm).powi(2)).sum::<f64>() / (batches - 1) as f64;
        let std_error = (var / batches as f64).sqrt();
        let t = StudentsT::new(0.0, 1.0, (batches - 1) as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.975);
        Ok(Self {
            samples,
            mean,
            std_error,
            ci_half_width: t * std_error,
            batches,
            running_average,
        })
    }
}

/// Birkhoff coefficients of the unit-time kernels `φ_1(θ^i ω)`, `i ∈ shifts`.
pub fn unit_birkhoff(c: &Cocycle, shifts: &[i64]) -> Result<Vec<Birkhoff>, RdsError> {
    shifts
        .par_iter()
        .map(|&i| Ok(birkhoff(&kernel_matrix(c, i, 1.0)?)?))
        .collect()
}

/// Samples `log τ(φ_1(θ^i ω))` for `i = 0..count` on one contiguous path.
pub fn estimate_lyapunov(c: &Cocycle, count: usize) -> Result<LyapunovEstimate, RdsError> {
    if count < 10 {
        return Err(RdsError::TooFewSamples { needed: 10, got: count });
    }
    let shifts: Vec<i64> = (0..count as i64).collect();
    let samples = unit_birkhoff(c, &shifts)?.iter().map(|b| b.log_tau).collect();
    LyapunovEstimate::from_samples(samples)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SyncOptions {
    /// Also compute `τ(φ_1(θ^i ω))` along the path, giving the product bound and
    /// a Lyapunov estimate on the same noise.
    pub track_tau: bool,
}

/// Forward synchronization of two initial states driven by one noise path.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SyncReport {
    pub times: Vec<f64>,
    pub d_h: Vec<f64>,
    /// `sup |h_a - h_b - c(t)|` with `c` the spatial mean of `h_a - h_b`.
    pub sup_norm_centered: Vec<f64>,
    /// Spatial-mean centering `∫ (h_a - h_b) dx`.
    pub c_mean: Vec<f64>,
    /// Normalization centering `log ∫ u_a - log ∫ u_b`.
    pub c_mass: Vec<f64>,
    /// First index with `d_H <` [`UNDERFLOW_DISTANCE`].
    pub underflow_at: Option<usize>,
    pub fit: Option<LinearFit>,
    pub lyapunov: Option<LyapunovEstimate>,
    /// `Π_{i<n} τ(φ_1(θ^i ω)) · d_H(u_a, u_b)`.
    pub product_bound: Option<Vec<f64>>,
}

impl SyncReport {
    /// CSV `n,dH,log_dH,sup_norm_centered`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,dH,log_dH,sup_norm_centered\n");
        for (i, d) in self.d_h.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e}",
                self.times[i],
                d,
                d.ln(),
                self.sup_norm_centered[i]
            );
        }
        out
    }

    /// Largest violation of `d_H(n) ≤ product_bound(n)`, if the bound was tracked.
    pub fn bound_excess(&self) -> Option<f64> {
        self.product_bound.as_ref().map(|b| {
            self.d_h
                .iter()
                .zip(b)
                .map(|(d, p)| d - p)
                .fold(f64::NEG_INFINITY, f64::max)
        })
    }
}

/// State normalized to unit mass plus the accumulated log of the removed mass.
struct Tracked {
    u: Vec<f64>,
    log_mass: f64,
}

impl Tracked {
    fn new(u0: &GridFunction) -> Result<Self, RdsError> {
        let d = normalize(u0)?;
        Ok(Self {
            log_mass: integrate(u0).ln(),
            u: d.into_function().into_values(),
        })
    }

    fn renormalize(&mut self, grid: TorusGrid) -> Result<Density, RdsError> {
        let f = GridFunction::new(grid, std::mem::take(&mut self.u))?;
        let mass = integrate(&f);
        let d = normalize(&f)?;
        self.log_mass += mass.ln();
        self.u = d.values().to_vec();
        Ok(d)
    }
}

fn centered_stats(a: &Density, b: &Density) -> (f64, f64) {
    let diff: Vec<f64> = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| x.ln() - y.ln())
        .collect();
    let mean = diff.iter().sum::<f64>() / diff.len() as f64;
    let sup = diff.iter().map(|d| (d - mean).abs()).fold(0.0, f64::max);
    (sup, mean)
}

/// Evolves `u_a`, `u_b` through `φ_1(θ^n ω)` for `n = 0..steps`, recording the
/// Hilbert distance and both centering constants at integer times.
pub fn run_forward_sync(
    c: &Cocycle,
    u_a: &GridFunction,
    u_b: &GridFunction,
    steps: usize,
    opts: SyncOptions,
) -> Result<SyncReport, RdsError> {
    let grid = c.grid;
    let mut a = Tracked::new(u_a)?;
    let mut b = Tracked::new(u_b)?;
    let mut times = Vec::with_capacity(steps + 1);
    let mut d_h = Vec::with_capacity(steps + 1);
    let mut sup = Vec::with_capacity(steps + 1);
    let mut c_mean = Vec::with_capacity(steps + 1);
    let mut c_mass = Vec::with_capacity(steps + 1);

    let mut record = |n: usize, da: &Density, db: &Density, a: &Tracked, b: &Tracked| -> Result<(), RdsError> {
        let (s, m) = centered_stats(da, db);
        times.push(n as f64);
        d_h.push(hilbert_distance(da, db)?);
        sup.push(s);
        c_mean.push(m + a.log_mass - b.log_mass);
        c_mass.push(a.log_mass - b.log_mass);
        Ok(())
    };
    let da = normalize(u_a)?;
    let db = normalize(u_b)?;
    record(0, &da, &db, &a, &b)?;

    let unit = c.steps_per_unit;
    let n = grid.len();
    let mut pair = vec![0.0; 2 * n];
    for step in 0..steps {
        pair[..n].copy_from_slice(&a.u);
        pair[n..].copy_from_slice(&b.u);
        c.propagate(step as i64, unit, &mut pair)?;
        a.u = pair[..n].to_vec();
        b.u = pair[n..].to_vec();
        let da = a.renormalize(grid)?;
        let db = b.renormalize(grid)?;
        record(step + 1, &da, &db, &a, &b)?;
    }

    let underflow_at = d_h.iter().position(|&d| d < UNDERFLOW_DISTANCE);
    let fit = tail_fit(&times, &d_h);
    let (lyapunov, product_bound) = if opts.track_tau && steps > 0 {
        let shifts: Vec<i64> = (0..steps as i64).collect();
        let taus = unit_birkhoff(c, &shifts)?;
        let mut bound = Vec::with_capacity(steps + 1);
        let mut log_prod = 0.0;
        bound.push(d_h[0]);
        for t in &taus {
            log_prod += t.log_tau;
            bound.push(d_h[0] * log_prod.exp());
        }
        let samples: Vec<f64> = taus.iter().map(|t| t.log_tau).collect();
        let est = if samples.len() >= 4 {
            Some(LyapunovEstimate::from_samples(samples)?)
        } else {
            None
        };
        (est, Some(bound))
    } else {
        (None, None)
    };
    Ok(SyncReport {
        times,
        d_h,
        sup_norm_centered: sup,
        c_mean,
        c_mass,
        underflow_at,
        fit,
        lyapunov,
        product_bound,
    })
}

/// Pullback iterates `u_n = φ^π_{n+t_obs}(θ^{-n} ω) u0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PullbackReport {
    pub t_obs: f64,
    /// `d_H(u_n, u_{n+1})` for `n = 1..n_max`.
    pub increments: Vec<f64>,
    /// Birkhoff diameter of `φ_n(θ^{-n} ω)`, `n = 1..=n_max`: the projective
    /// diameter of the pullback image sets, which must not increase.
    pub diameters: Vec<f64>,
    /// `Π_{i=1}^{n} τ(φ_1(θ^{-i} ω))`, `n = 1..=n_max`.
    pub tau_products: Vec<f64>,
    pub monotone: bool,
    pub fit: Option<LinearFit>,
    #[serde(skip)]
    pub limit: Density,
}

impl PullbackReport {
    /// CSV `n,increment,diameter,tau_product`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,increment,diameter,tau_product\n");
        for (i, (d, p)) in self.diameters.iter().zip(&self.tau_products).enumerate() {
            let inc = self.increments.get(i).copied().unwrap_or(f64::NAN);
            let _ = writeln!(out, "{},{inc:.16e},{d:.16e},{p:.16e}", i + 1);
        }
        out
    }
}

/// Slack for the monotonicity of the diameter proxies.
const MONOTONE_SLACK: f64 = 1e-9;

fn pullback_iterate(c: &Cocycle, u0: &GridFunction, n: usize, t_obs: f64) -> Result<Density, RdsError> {
    let grid = c.grid;
    let mut s = Tracked::new(u0)?;
    for k in 0..n {
        c.propagate(k as i64 - n as i64, c.steps_per_unit, &mut s.u)?;
        s.renormalize(grid)?;
    }
    let obs = c.steps_for(t_obs)?;
    c.propagate(0, obs, &mut s.u)?;
    s.renormalize(grid)
}

/// Runs the pullback scheme up to `n_max` and returns the last iterate as the
/// approximation of the one-force-one-solution profile at time `t_obs`.
pub fn run_pullback(c: &Cocycle, u0: &GridFunction, n_max: usize, t_obs: f64) -> Result<PullbackReport, RdsError> {
    if n_max < 2 {
        return Err(RdsError::TooFewSamples { needed: 2, got: n_max });
    }
    c.steps_for(t_obs)?;
    let iterates: Vec<Density> = (1..=n_max)
        .into_par_iter()
        .map(|n| pullback_iterate(c, u0, n, t_obs))
        .collect::<Result<_, _>>()?;
    let increments = iterates
        .windows(2)
        .map(|w| hilbert_distance(&w[0], &w[1]))
        .collect::<Result<Vec<_>, _>>()?;

    let shifts: Vec<i64> = (1..=n_max as i64).map(|i| -i).collect();
    let kernels: Vec<PositiveKernel> = shifts
        .par_iter()
        .map(|&i| kernel_matrix(c, i, 1.0))
        .collect::<Result<_, _>>()?;
    let mut diameters = Vec::with_capacity(n_max);
    let mut tau_products = Vec::with_capacity(n_max);
    let mut log_prod = 0.0;
    let mut product: Option<PositiveKernel> = None;
    for k in &kernels {
        let next = match product {
            None => k.clone(),
            Some(p) => p.compose(k)?,
        };
        let mut next = next;
        next.normalize_columns();
        diameters.push(birkhoff(&next)?.diameter);
        log_prod += birkhoff(k)?.log_tau;
        tau_products.push(log_prod.exp());
        product = Some(next);
    }
    let monotone = diameters.windows(2).all(|w| w[1] <= w[0] + MONOTONE_SLACK);
    let xs: Vec<f64> = (1..n_max).map(|n| n as f64).collect();
    let fit = tail_fit(&xs, &increments);
    Ok(PullbackReport {
        t_obs,
        increments,
        diameters,
        tau_products,
        monotone,
        fit,
        limit: iterates.into_iter().last().expect("n_max ≥ 2"),
    })
}

/// Maximum number of projective iterations in [`static_krein_rutman`].
pub const KREIN_RUTMAN_MAX_ITER: usize = 10_000;

/// Perron density of a strictly positive kernel by projective power iteration
/// from the uniform density, stopping when `d_H(A^π u, u) < tol`.
pub fn static_krein_rutman(k: &PositiveKernel, tol: f64) -> Result<Density, RdsError> {
    let mut u = Density::uniform(k.grid());
    let mut increment = f64::INFINITY;
    for _ in 0..KREIN_RUTMAN_MAX_ITER {
        let next = projective_apply(k, &u)?;
        increment = hilbert_distance(&next, &u)?;
        u = next;
        if increment < tol {
            return Ok(u);
        }
    }
    Err(RdsError::NoConvergence {
        iterations: KREIN_RUTMAN_MAX_ITER,
        increment,
    })
}

/// Evolution of the constant `c(t) = ∫ (h_a - h_b) dx` between two KPZ
/// solutions `h = log u`, compared with
/// `dc/dt = ν ∫ ∂_x(h_a - h_b) ∂_x(h_a + h_b) dx`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstantsReport {
    pub times: Vec<f64>,
    pub c: Vec<f64>,
    /// Centered difference of `c`; `NaN` at the two endpoints.
    pub dc_dt: Vec<f64>,
    pub rhs: Vec<f64>,
    /// `max |dc/dt - rhs|` over interior samples.
    pub max_residual: f64,
    /// Fit of `log |c(n) - c(T)|` at integer `n ≤ T/2`.
    pub decay_fit: Option<LinearFit>,
}

impl ConstantsReport {
    pub fn decay_rate(&self) -> Option<f64> {
        self.decay_fit.map(|f| -f.slope)
    }

    /// CSV `t,c,dc_dt,rhs`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,c,dc_dt,rhs\n");
        for i in 0..self.times.len() {
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                self.times[i], self.c[i], self.dc_dt[i], self.rhs[i]
            );
        }
        out
    }
}

/// Values of `|c(n) - c(T)|` below this are not used in the decay fit.
const CONSTANT_FLOOR: f64 = 1e-11;

/// Tracks `c(t)` at every solver step over `[0, units]` for a zero or
/// fractional noise cocycle.
pub fn track_constants(
    c: &Cocycle,
    u_a: &GridFunction,
    u_b: &GridFunction,
    units: usize,
) -> Result<ConstantsReport, RdsError> {
    if matches!(c.noise, NoiseModel::White { .. }) {
        return Err(RdsError::WhiteNoiseUnsupported);
    }
    let grid = c.grid;
    let n = grid.len();
    let nu = c.diffusivity;
    let spu = c.steps_per_unit;
    let mut pair = [u_a.values(), u_b.values()].concat();
    let mut times = Vec::with_capacity(units * spu + 1);
    let mut cs = Vec::with_capacity(units * spu + 1);
    let mut rhs = Vec::with_capacity(units * spu + 1);

    let mut sample = |step: usize, pair: &[f64]| -> Result<(), RdsError> {
        let ha = GridFunction::new(grid, pair[..n].iter().map(|v| v.ln()).collect())?;
        let hb = GridFunction::new(grid, pair[n..].iter().map(|v| v.ln()).collect())?;
        let diff = GridFunction::new(grid, ha.values().iter().zip(hb.values()).map(|(x, y)| x - y).collect())?;
        let sum = GridFunction::new(grid, ha.values().iter().zip(hb.values()).map(|(x, y)| x + y).collect())?;
        let dd = spectral_derivative(&diff, 1);
        let ds = spectral_derivative(&sum, 1);
        let prod = GridFunction::new(grid, dd.values().iter().zip(ds.values()).map(|(x, y)| x * y).collect())?;
        times.push(step as f64 / spu as f64);
        cs.push(integrate(&diff));
        rhs.push(nu * integrate(&prod));
        Ok(())
    };
    if u_a.min() <= 0.0 || u_b.min() <= 0.0 {
        return Err(ConeError::NonPositiveInput {
            index: 0,
            min: u_a.min().min(u_b.min()),
        }
        .into());
    }
    sample(0, &pair)?;
    for unit in 0..units {
        for s in 0..spu {
            let step = unit * spu + s;
            c.propagate_steps(step as i64, 1, &mut pair)?;
            sample(step + 1, &pair)?;
        }
        // Common rescaling leaves h_a - h_b unchanged.
        let mass = integrate(&GridFunction::new(grid, pair[..n].to_vec())?);
        if !(mass > 0.0) {
            return Err(ConeError::NonPositiveInput { index: 0, min: mass }.into());
        }
        for v in pair.iter_mut() {
            *v /= mass;
        }
    }

    let m = cs.len();
    let dt = c.dt();
    let mut dc_dt = vec![f64::NAN; m];
    let mut max_residual: f64 = 0.0;
    for i in 1..m.saturating_sub(1) {
        dc_dt[i] = (cs[i + 1] - cs[i - 1]) / (2.0 * dt);
        max_residual = max_residual.max((dc_dt[i] - rhs[i]).abs());
    }

    let c_end = *cs.last().expect("at least one sample");
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for unit in 1..=units / 2 {
        let v = (cs[unit * spu] - c_end).abs();
        if v > CONSTANT_FLOOR {
            xs.push(unit as f64);
            ys.push(v.ln());
        }
    }
    Ok(ConstantsReport {
        times,
        c: cs,
        dc_dt,
        rhs,
        max_residual,
        decay_fit: fit_line(&xs, &ys),
    })
}
