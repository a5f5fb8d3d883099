//! Solvers for the multiplicative stochastic heat equation
//! `∂_t u = ν ∂_x² u + η u` on the torus, for fractional noise
//! `η = ξ^H(t) V(x)` and for space-time white noise, plus the Cole–Hopf map
//! `h = log u` to the KPZ equation.
//!
//! `ν` is the diffusivity; `ν = 1` is the unscaled equation. All schemes are
//! linear one-step maps of the state that depend only on the noise of the
//! current step, so restarting a run on a shifted noise window reproduces the
//! continuous run.

use std::fmt::Write as _;

use thiserror::Error;

use crate::field::{spectral_derivative, FieldError, FourierMultiplier, GridFunction, TorusGrid};
use crate::noise::{FbmPath, NoiseError, SpatialProfile, WhiteNoiseField};

/// Largest admissible `dt / dx` for the Itô white-noise step. Per-cell factors
/// `1 + ξ dt` have standard deviation `sqrt(dt/dx)`, so this keeps them
/// positive up to five standard deviations.
pub const WHITE_STEP_BUDGET: f64 = 1.0 / 25.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpdeError {
    #[error("time step {dt} exceeds the stability limit {limit}")]
    StepTooLarge { dt: f64, limit: f64 },
    #[error("solver steps per unit ({solver}) must be a multiple of the noise steps per unit ({noise})")]
    IncompatibleStep { solver: usize, noise: usize },
    #[error("horizon {t_end} is not a whole number of steps of size {dt}")]
    InvalidHorizon { t_end: f64, dt: f64 },
    #[error("noise window covers {available} steps, {needed} needed")]
    NoiseTooShort { needed: usize, available: usize },
    #[error("input is not strictly positive (min {0:e})")]
    NonPositiveInput(f64),
    #[error("time {0} is not an interior stored time")]
    TimeNotStored(f64),
    #[error("grids differ: {0} vs {1} points")]
    GridMismatch(usize, usize),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Number of steps of size `1/steps_per_unit` in `t`, if `t` is a whole multiple.
pub(crate) fn steps_in(t: f64, steps_per_unit: usize) -> Option<usize> {
    if !(t >= 0.0) || !t.is_finite() {
        return None;
    }
    let x = t * steps_per_unit as f64;
    let m = x.round();
    ((x - m).abs() <= 1e-9 * x.max(1.0)).then_some(m as usize)
}

/// One-step maps shared by the solvers and the cocycle layer. States are
/// stored back to back in a flat buffer.
pub(crate) struct Stepper {
    n: usize,
    heat: FourierMultiplier,
    factor: Vec<f64>,
}

impl Stepper {
    pub fn new(grid: TorusGrid, dt: f64, diffusivity: f64) -> Self {
        Self {
            n: grid.len(),
            heat: FourierMultiplier::heat(grid, diffusivity * dt),
            factor: vec![0.0; grid.len()],
        }
    }

    fn scale_and_diffuse(&mut self, states: &mut [f64]) {
        for chunk in states.chunks_exact_mut(self.n) {
            for (s, f) in chunk.iter_mut().zip(&self.factor) {
                *s *= f;
            }
        }
        self.heat.apply(states);
    }

    /// `u ← P_{νdt}(e^{V Δβ} u)`.
    pub fn fractional(&mut self, states: &mut [f64], profile: &[f64], dbeta: f64) {
        for (f, v) in self.factor.iter_mut().zip(profile) {
            *f = (v * dbeta).exp();
        }
        self.scale_and_diffuse(states);
    }

    /// Itô step `u ← P_{νdt}(u + u ξ dt)`; returns whether some factor `1 + ξ dt`
    /// was nonpositive.
    pub fn white(&mut self, states: &mut [f64], xi: &[f64], dt: f64) -> bool {
        let mut flagged = false;
        for (f, x) in self.factor.iter_mut().zip(xi) {
            *f = 1.0 + x * dt;
            flagged |= *f <= 0.0;
        }
        self.scale_and_diffuse(states);
        flagged
    }

    pub fn diffuse(&mut self, states: &mut [f64]) {
        self.heat.apply(states);
    }
}

/// Checks `dt·n` against [`WHITE_STEP_BUDGET`].
pub(crate) fn check_white_step(grid: TorusGrid, dt: f64) -> Result<(), SpdeError> {
    let limit = WHITE_STEP_BUDGET * grid.dx();
    if dt > limit * (1.0 + 1e-12) {
        return Err(SpdeError::StepTooLarge { dt, limit });
    }
    Ok(())
}

/// Solver parameters and provenance attached to a [`Trajectory`].
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryMeta {
    pub solver: &'static str,
    pub dt: f64,
    pub n: usize,
    pub diffusivity: f64,
    pub seed: u64,
    pub noise: &'static str,
    pub hurst: Option<f64>,
    pub profile: Option<String>,
    /// Steps at which some Itô factor `1 + ξ dt` was nonpositive.
    pub positivity_flags: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<GridFunction>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn last(&self) -> &GridFunction {
        self.snapshots
            .last()
            .expect("trajectories hold at least the initial state")
    }

    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|s| (s - t).abs() <= 1e-9 * t.abs().max(1.0))
    }

    /// CSV `t,x,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,value\n");
        for (t, snap) in self.times.iter().zip(&self.snapshots) {
            for (i, v) in snap.values().iter().enumerate() {
                let _ = writeln!(out, "{t:.16e},{:.16e},{v:.16e}", snap.grid().point(i));
            }
        }
        out
    }

    /// `key=value` sidecar describing how the trajectory was produced.
    pub fn metadata(&self) -> String {
        let m = &self.meta;
        let mut out = String::new();
        let _ = writeln!(out, "solver={}", m.solver);
        let _ = writeln!(out, "dt={}", m.dt);
        let _ = writeln!(out, "n={}", m.n);
        let _ = writeln!(out, "diffusivity={}", m.diffusivity);
        let _ = writeln!(out, "seed={}", m.seed);
        let _ = writeln!(out, "noise={}", m.noise);
        if let Some(h) = m.hurst {
            let _ = writeln!(out, "hurst={h}");
        }
        if let Some(v) = &m.profile {
            let _ = writeln!(out, "profile={v}");
        }
        let _ = writeln!(out, "positivity_flags={}", m.positivity_flags);
        out
    }
}

/// Time stepping parameters for the fractional solver.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SheParams {
    pub t_end: f64,
    pub steps_per_unit: usize,
    pub diffusivity: f64,
    /// Store a snapshot every this many steps (the final time is always stored).
    pub store_every: usize,
}

impl SheParams {
    pub fn dt(&self) -> f64 {
        1.0 / self.steps_per_unit as f64
    }
}

/// Solution of the fractional equation split as `u = e^X w`, where `X` solves
/// the additive equation `∂_t X = ν∂_x² X + ξ^H V`, `X_0 = 0`, and `w` solves
/// `∂_t w = ν(∂_x² w + 2 ∂_x X ∂_x w + (∂_x X)² w)`, `w_0 = u_0`.
#[derive(Clone, Debug, PartialEq)]
pub struct FractionalDecomposition {
    pub x: Trajectory,
    pub w: Trajectory,
}

impl FractionalDecomposition {
    pub fn times(&self) -> &[f64] {
        &self.x.times
    }

    pub fn diffusivity(&self) -> f64 {
        self.x.meta.diffusivity
    }

    /// `u = e^X w` at stored index `i`.
    pub fn u(&self, i: usize) -> GridFunction {
        let x = &self.x.snapshots[i];
        let w = &self.w.snapshots[i];
        let values = x.values().iter().zip(w.values()).map(|(a, b)| a.exp() * b).collect();
        GridFunction::new(x.grid(), values).expect("finite product")
    }

    pub fn u_trajectory(&self) -> Trajectory {
        Trajectory {
            times: self.x.times.clone(),
            snapshots: (0..self.x.times.len()).map(|i| self.u(i)).collect(),
            meta: TrajectoryMeta {
                solver: "fractional-u",
                ..self.x.meta.clone()
            },
        }
    }
}

fn profile_label(v: &SpatialProfile) -> String {
    let vals = v.values();
    format!(
        "grid({} points, min {:.6}, max {:.6})",
        vals.len(),
        v.as_function().min(),
        v.as_function().max()
    )
}

/// Solves the equation driven by `ξ^H(t) V(x)` with `β = beta` (local time 0
/// of the path is solver time 0).
///
/// Each step uses the increment `Δβ` of the piecewise-linear path and
/// advances
///
/// ```text
/// Y = X_m + V Δβ,   X_{m+1} = P_{νdt} Y,   w_{m+1} = e^{-X_{m+1}} P_{νdt}(e^{Y} w_m)
/// ```
///
/// which is an exponential integrator for the `w` equation and makes
/// `e^{X} w` follow `u_{m+1} = P_{νdt}(e^{VΔβ} u_m)` exactly. The solver step
/// must divide the noise step.
pub fn solve_she_fractional(
    profile: &SpatialProfile,
    beta: &FbmPath,
    u0: &GridFunction,
    params: &SheParams,
) -> Result<FractionalDecomposition, SpdeError> {
    let grid = u0.grid();
    if profile.grid() != grid {
        return Err(SpdeError::GridMismatch(profile.grid().len(), grid.len()));
    }
    let noise_spu = beta.steps_per_unit();
    let dt = params.dt();
    if params.steps_per_unit < noise_spu {
        return Err(SpdeError::StepTooLarge { dt, limit: beta.dt() });
    }
    if !params.steps_per_unit.is_multiple_of(noise_spu) {
        return Err(SpdeError::IncompatibleStep {
            solver: params.steps_per_unit,
            noise: noise_spu,
        });
    }
    let sub = params.steps_per_unit / noise_spu;
    let steps = steps_in(params.t_end, params.steps_per_unit).ok_or(SpdeError::InvalidHorizon {
        t_end: params.t_end,
        dt,
    })?;
    let needed = steps.div_ceil(sub);
    if needed > beta.steps() {
        return Err(SpdeError::NoiseTooShort {
            needed,
            available: beta.steps(),
        });
    }
    let n = grid.len();
    let v = profile.values();
    let incs = beta.increments();
    let store_every = params.store_every.max(1);

    let mut heat = FourierMultiplier::heat(grid, params.diffusivity * dt);
    let mut x = vec![0.0; n];
    let mut w = u0.values().to_vec();
    // [Y | e^Y w] diffused together.
    let mut pair = vec![0.0; 2 * n];

    let mut times = vec![0.0];
    let mut xs = vec![GridFunction::new(grid, x.clone())?];
    let mut ws = vec![u0.clone()];

    for m in 0..steps {
        let dbeta = incs[m / sub] / sub as f64;
        let (y, ew) = pair.split_at_mut(n);
        for i in 0..n {
            y[i] = x[i] + v[i] * dbeta;
            ew[i] = y[i].exp() * w[i];
        }
        heat.apply(&mut pair);
        let (y, ew) = pair.split_at(n);
        for i in 0..n {
            x[i] = y[i];
            w[i] = ew[i] * (-y[i]).exp();
        }
        if (m + 1) % store_every == 0 || m + 1 == steps {
            times.push((m + 1) as f64 * dt);
            xs.push(GridFunction::new(grid, x.clone())?);
            ws.push(GridFunction::new(grid, w.clone())?);
        }
    }

    let meta = TrajectoryMeta {
        solver: "fractional-x",
        dt,
        n,
        diffusivity: params.diffusivity,
        seed: beta.seed(),
        noise: "fbm",
        hurst: Some(beta.hurst()),
        profile: Some(profile_label(profile)),
        positivity_flags: 0,
    };
    Ok(FractionalDecomposition {
        x: Trajectory {
            times: times.clone(),
            snapshots: xs,
            meta: meta.clone(),
        },
        w: Trajectory {
            times,
            snapshots: ws,
            meta: TrajectoryMeta {
                solver: "fractional-w",
                ..meta
            },
        },
    })
}

/// Time stepping parameters for the white-noise solver; `dt` comes from the field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WhiteParams {
    pub t_end: f64,
    pub diffusivity: f64,
    pub store_every: usize,
}

/// Itô exponential-Euler scheme `u_{m+1} = P_{νdt}(u_m + u_m ξ_m dt)` with the
/// noise slab taken at the left endpoint. Steps where some factor `1 + ξ dt`
/// is nonpositive are counted in `meta.positivity_flags`.
pub fn solve_she_white(u0: &GridFunction, xi: &WhiteNoiseField, params: &WhiteParams) -> Result<Trajectory, SpdeError> {
    let grid = u0.grid();
    if xi.grid() != grid {
        return Err(SpdeError::GridMismatch(xi.grid().len(), grid.len()));
    }
    let dt = xi.dt();
    check_white_step(grid, dt)?;
    let steps = steps_in(params.t_end, xi.steps_per_unit()).ok_or(SpdeError::InvalidHorizon {
        t_end: params.t_end,
        dt,
    })?;
    if steps > xi.steps() {
        return Err(SpdeError::NoiseTooShort {
            needed: steps,
            available: xi.steps(),
        });
    }
    let store_every = params.store_every.max(1);
    let mut stepper = Stepper::new(grid, dt, params.diffusivity);
    let mut u = u0.values().to_vec();
    let mut flags = 0;
    let mut times = vec![0.0];
    let mut snaps = vec![u0.clone()];
    for m in 0..steps {
        flags += stepper.white(&mut u, xi.slab(m), dt) as usize;
        if (m + 1) % store_every == 0 || m + 1 == steps {
            times.push((m + 1) as f64 * dt);
            snaps.push(GridFunction::new(grid, u.clone())?);
        }
    }
    Ok(Trajectory {
        times,
        snapshots: snaps,
        meta: TrajectoryMeta {
            solver: "white-ito",
            dt,
            n: grid.len(),
            diffusivity: params.diffusivity,
            seed: xi.seed(),
            noise: "white",
            hurst: None,
            profile: None,
            positivity_flags: flags,
        },
    })
}

/// Cole–Hopf transform `h = log u`.
pub fn cole_hopf(u: &GridFunction) -> Result<GridFunction, SpdeError> {
    let min = u.min();
    if !(min > 0.0) {
        return Err(SpdeError::NonPositiveInput(min));
    }
    Ok(u.map(f64::ln))
}

/// Inverse Cole–Hopf transform `u = exp h`.
pub fn exp_hopf(h: &GridFunction) -> GridFunction {
    h.map(f64::exp)
}

/// Sup norm of the discrete KPZ residual
/// `(∂_t - ν∂_x²)h - ν(∂_x h)² - V Δβ/Δt` at stored time `t`, with `h = log u`
/// and centered differences in time over the neighbouring snapshots.
pub fn kpz_residual(
    decomp: &FractionalDecomposition,
    profile: &SpatialProfile,
    beta: &FbmPath,
    t: f64,
) -> Result<f64, SpdeError> {
    let times = decomp.times();
    let i = decomp
        .x
        .index_of(t)
        .filter(|&i| i > 0 && i + 1 < times.len())
        .ok_or(SpdeError::TimeNotStored(t))?;
    let dm = times[i] - times[i - 1];
    let dp = times[i + 1] - times[i];
    if (dm - dp).abs() > 1e-12 * dp {
        return Err(SpdeError::TimeNotStored(t));
    }
    let nu = decomp.diffusivity();
    let h_prev = cole_hopf(&decomp.u(i - 1))?;
    let h = cole_hopf(&decomp.u(i))?;
    let h_next = cole_hopf(&decomp.u(i + 1))?;
    let hx = spectral_derivative(&h, 1);
    let hxx = spectral_derivative(&h, 2);
    let forcing = (beta.value_at(times[i + 1]) - beta.value_at(times[i - 1])) / (2.0 * dp);
    let residual = (0..h.grid().len())
        .map(|k| {
            let dt_h = (h_next.values()[k] - h_prev.values()[k]) / (2.0 * dp);
            let r = dt_h - nu * hxx.values()[k] - nu * hx.values()[k].powi(2) - profile.values()[k] * forcing;
            r.abs()
        })
        .fold(0.0, f64::max);
    Ok(residual)
}
