//! Configuration-driven experiments: TOML configuration with validation of
//! every field, replicate scheduling, CSV and JSON outputs, run manifests and
//! gnuplot-ready data.
//!
//! A configuration has a top level (`kind`, `seed`, `replicates`, `out`) and
//! the sections `[grid]`, `[noise]`, `[initial]` and `[run]`; see
//! [`ExperimentConfig`] for the keys and defaults. Replicate `r` uses the seed
//! `derive_seed(seed, r)` and writes into `out/rep-RRR/`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{
    besov_block_norms, dirac_distance, interpolation_check, schauder_check, space_time_block_norms, Lp,
};
use crate::cone::{birkhoff, check_kernel_bounds, hilbert_distance, normalize, projective_apply, ConeError};
use crate::field::{FieldError, GridFunction, TorusGrid};
use crate::noise::{
    covariance_probe, derive_seed, fgn_autocovariance, sample_fbm, sample_white, FbmNoise, FgnMethod, NoiseError,
    SpatialProfile, WhiteNoiseField,
};
use crate::rds::{
    apply_cocycle, estimate_lyapunov, fit_line, kernel_matrix, run_forward_sync, run_pullback, static_krein_rutman,
    track_constants, Cocycle, RdsError, SyncOptions,
};
use crate::spde::{
    kpz_residual, solve_she_fractional, solve_she_white, SheParams, SpdeError, Trajectory, TrajectoryMeta, WhiteParams,
    WHITE_STEP_BUDGET,
};

/// Diffusivity used by default: the unit-time heat flow contracts the first
/// Fourier mode by `e^{-3}`.
pub const DEFAULT_DIFFUSIVITY: f64 = 3.0 / (4.0 * PI * PI);

pub const MAX_REPLICATES: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    NoiseCheck,
    She,
    Lyapunov,
    SyncForward,
    SyncPullback,
    KreinRutman,
    Constants,
    Regularity,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::NoiseCheck,
        ExperimentKind::She,
        ExperimentKind::Lyapunov,
        ExperimentKind::SyncForward,
        ExperimentKind::SyncPullback,
        ExperimentKind::KreinRutman,
        ExperimentKind::Constants,
        ExperimentKind::Regularity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::NoiseCheck => "noise-check",
            ExperimentKind::She => "she",
            ExperimentKind::Lyapunov => "lyapunov",
            ExperimentKind::SyncForward => "sync-forward",
            ExperimentKind::SyncPullback => "sync-pullback",
            ExperimentKind::KreinRutman => "krein-rutman",
            ExperimentKind::Constants => "constants",
            ExperimentKind::Regularity => "regularity",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Zero,
    Fractional,
    White,
}

impl NoiseKind {
    fn from_name(s: &str) -> Option<Self> {
        match s {
            "zero" => Some(NoiseKind::Zero),
            "fractional" => Some(NoiseKind::Fractional),
            "white" => Some(NoiseKind::White),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    /// Grid points, a power of two in `[8, 4096]`.
    pub n: usize,
    /// Solver steps per time unit (`dt = 1/steps_per_unit`).
    pub steps_per_unit: usize,
    pub diffusivity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    #[serde(rename = "type")]
    pub kind: NoiseKind,
    pub hurst: f64,
    /// fBm steps per time unit; must divide `grid.steps_per_unit`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps_per_unit: Option<usize>,
    /// `V(x) = Σ_k cos[k] cos(2πkx) + Σ_k sin[k-1] sin(2πkx)`.
    pub profile_cos: Vec<f64>,
    pub profile_sin: Vec<f64>,
}

/// Initial data `u = exp(h)` with `h` a trigonometric polynomial in the same
/// coefficient layout as the noise profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialConfig {
    pub a_cos: Vec<f64>,
    pub a_sin: Vec<f64>,
    pub b_cos: Vec<f64>,
    pub b_sin: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Whole time units simulated.
    pub horizon: usize,
    pub snapshots_per_unit: usize,
    /// Lyapunov samples.
    pub samples: usize,
    pub n_max: usize,
    pub t_obs: f64,
    pub tol: f64,
    pub kernel_time: f64,
    pub track_tau: bool,
    pub ensemble: usize,
    pub probe_shift: i64,
    pub holder_beta: f64,
    pub theta: f64,
    pub schauder_alpha: f64,
    pub schauder_beta: f64,
    pub schauder_horizon: f64,
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub replicates: usize,
    pub out: String,
    pub grid: GridConfig,
    pub noise: NoiseConfig,
    pub initial: InitialConfig,
    pub run: RunConfig,
}

impl ExperimentConfig {
    pub fn defaults(kind: ExperimentKind) -> Self {
        let n = if kind == ExperimentKind::Regularity { 1024 } else { 64 };
        Self {
            kind,
            seed: 1,
            replicates: 1,
            out: "out".into(),
            grid: GridConfig {
                n,
                steps_per_unit: 64,
                diffusivity: DEFAULT_DIFFUSIVITY,
            },
            noise: NoiseConfig {
                kind: NoiseKind::Fractional,
                hurst: 0.75,
                steps_per_unit: None,
                profile_cos: vec![],
                profile_sin: vec![1.0],
            },
            initial: InitialConfig {
                a_cos: vec![],
                a_sin: vec![0.8],
                b_cos: vec![0.0, 0.5],
                b_sin: vec![],
            },
            run: RunConfig {
                horizon: 16,
                snapshots_per_unit: 8,
                samples: 64,
                n_max: 20,
                t_obs: 0.0,
                tol: 1e-12,
                kernel_time: 1.0,
                track_tau: true,
                ensemble: 200,
                probe_shift: 3,
                holder_beta: 0.8,
                theta: 0.5,
                schauder_alpha: -0.6,
                schauder_beta: 1.5,
                schauder_horizon: 0.1,
                gamma: 0.5,
            },
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn grid(&self) -> TorusGrid {
        TorusGrid::new(self.grid.n).expect("validated grid size")
    }

    fn noise_steps_per_unit(&self) -> usize {
        self.noise.steps_per_unit.unwrap_or(self.grid.steps_per_unit)
    }

    fn profile(&self) -> SpatialProfile {
        SpatialProfile::trig(self.grid(), &self.noise.profile_cos, &self.noise.profile_sin)
    }

    fn initial(&self, which: char) -> GridFunction {
        let (cos, sin) = match which {
            'a' => (&self.initial.a_cos, &self.initial.a_sin),
            _ => (&self.initial.b_cos, &self.initial.b_sin),
        };
        SpatialProfile::trig(self.grid(), cos, sin).as_function().map(f64::exp)
    }
}

/// Configuration failures.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid override `{0}` (expected key=value)")]
    Override(String),
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure in {stage}: {message}")]
    Numerical { stage: &'static str, message: String },
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("missing output: {0}")]
    MissingOutput(String),
}

impl ExperimentError {
    /// 2 configuration, 3 numerical, 4 input/output.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 2,
            ExperimentError::Numerical { .. } => 3,
            ExperimentError::Io { .. } | ExperimentError::MissingOutput(_) => 4,
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            ExperimentError::Config(_) => "config",
            ExperimentError::Numerical { .. } => "numerical",
            ExperimentError::Io { .. } => "io",
            ExperimentError::MissingOutput(_) => "missing-output",
        }
    }

    /// Machine-readable error record.
    pub fn record(&self) -> Value {
        let mut rec = json!({
            "exit_code": self.exit_code(),
            "category": self.category(),
            "message": self.to_string(),
        });
        if let ExperimentError::Config(ConfigError::Validation(v)) = self {
            rec["violations"] = json!(v);
        }
        rec
    }

    fn io(path: &Path, e: impl fmt::Display) -> Self {
        ExperimentError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}

macro_rules! numerical_from {
    ($($t:ty => $stage:literal),*) => {$(
        impl From<$t> for ExperimentError {
            fn from(e: $t) -> Self {
                ExperimentError::Numerical { stage: $stage, message: e.to_string() }
            }
        }
    )*};
}

numerical_from!(RdsError => "rds", SpdeError => "spde", NoiseError => "noise", ConeError => "cone", FieldError => "field");

/// Reads typed values out of one TOML table, recording every violation and
/// every key it consumed.
struct Section<'a> {
    name: &'a str,
    table: Option<&'a toml::Table>,
    seen: Vec<&'static str>,
    errors: &'a mut Vec<String>,
}

impl<'a> Section<'a> {
    fn key(&self, key: &str) -> String {
        if self.name.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.name)
        }
    }

    fn raw(&mut self, key: &'static str) -> Option<&'a toml::Value> {
        self.seen.push(key);
        self.table.and_then(|t| t.get(key))
    }

    fn integer(&mut self, key: &'static str, default: i64) -> i64 {
        match self.raw(key) {
            None => default,
            Some(toml::Value::Integer(i)) => *i,
            Some(other) => {
                let k = self.key(key);
                self.errors
                    .push(format!("{k}: expected an integer, got {}", other.type_str()));
                default
            }
        }
    }

    fn count(&mut self, key: &'static str, default: usize) -> usize {
        let v = self.integer(key, default as i64);
        if v < 0 {
            let k = self.key(key);
            self.errors.push(format!("{k}: must be nonnegative, got {v}"));
            return default;
        }
        v as usize
    }

    fn float(&mut self, key: &'static str, default: f64) -> f64 {
        match self.raw(key) {
            None => default,
            Some(toml::Value::Float(f)) => *f,
            Some(toml::Value::Integer(i)) => *i as f64,
            Some(other) => {
                let k = self.key(key);
                self.errors
                    .push(format!("{k}: expected a number, got {}", other.type_str()));
                default
            }
        }
    }

    fn boolean(&mut self, key: &'static str, default: bool) -> bool {
        match self.raw(key) {
            None => default,
            Some(toml::Value::Boolean(b)) => *b,
            Some(other) => {
                let k = self.key(key);
                self.errors
                    .push(format!("{k}: expected a boolean, got {}", other.type_str()));
                default
            }
        }
    }

    fn string(&mut self, key: &'static str) -> Option<&'a str> {
        match self.raw(key) {
            None => None,
            Some(toml::Value::String(s)) => Some(s),
            Some(other) => {
                let k = self.key(key);
                self.errors
                    .push(format!("{k}: expected a string, got {}", other.type_str()));
                None
            }
        }
    }

    fn floats(&mut self, key: &'static str, default: &[f64]) -> Vec<f64> {
        match self.raw(key) {
            None => default.to_vec(),
            Some(toml::Value::Array(a)) => {
                let mut out = Vec::with_capacity(a.len());
                for v in a {
                    match v {
                        toml::Value::Float(f) => out.push(*f),
                        toml::Value::Integer(i) => out.push(*i as f64),
                        other => {
                            let k = self.key(key);
                            self.errors
                                .push(format!("{k}: expected numbers, found {}", other.type_str()));
                            return default.to_vec();
                        }
                    }
                }
                out
            }
            Some(other) => {
                let k = self.key(key);
                self.errors
                    .push(format!("{k}: expected an array, got {}", other.type_str()));
                default.to_vec()
            }
        }
    }

    fn check(&mut self, ok: bool, key: &str, message: impl fmt::Display) {
        if !ok {
            let k = self.key(key);
            self.errors.push(format!("{k}: {message}"));
        }
    }

    /// Reports keys present in the table but never read.
    fn finish(self) {
        if let Some(t) = self.table {
            for key in t.keys() {
                if !self.seen.contains(&key.as_str()) && !(self.name.is_empty() && SECTIONS.contains(&key.as_str())) {
                    let k = if self.name.is_empty() {
                        key.clone()
                    } else {
                        format!("{}.{key}", self.name)
                    };
                    self.errors.push(format!("unknown key `{k}`"));
                }
            }
        }
    }
}

const SECTIONS: [&str; 4] = ["grid", "noise", "initial", "run"];

fn is_step_multiple(t: f64, steps_per_unit: usize) -> bool {
    let x = t * steps_per_unit as f64;
    t.is_finite() && t >= 0.0 && (x - x.round()).abs() <= 1e-9 * x.max(1.0)
}

fn section<'a>(root: &'a toml::Table, name: &str, errors: &mut Vec<String>) -> Option<&'a toml::Table> {
    match root.get(name) {
        None => None,
        Some(toml::Value::Table(t)) => Some(t),
        Some(_) => {
            errors.push(format!("{name}: expected a table"));
            None
        }
    }
}

/// Builds and validates a configuration from a parsed TOML table. `kind`
/// overrides the `kind` key (the CLI subcommand).
pub fn config_from_table(root: &toml::Table, kind: Option<ExperimentKind>) -> Result<ExperimentConfig, ConfigError> {
    let mut errors = Vec::new();
    let grid_t = section(root, "grid", &mut errors);
    let noise_t = section(root, "noise", &mut errors);
    let initial_t = section(root, "initial", &mut errors);
    let run_t = section(root, "run", &mut errors);

    let mut top = Section {
        name: "",
        table: Some(root),
        seen: vec![],
        errors: &mut errors,
    };
    let kind = match (kind, top.string("kind")) {
        (Some(k), _) => k,
        (None, Some(s)) => match ExperimentKind::from_name(s) {
            Some(k) => k,
            None => {
                let names: Vec<_> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
                top.check(
                    false,
                    "kind",
                    format!("unknown experiment `{s}` (one of {})", names.join(", ")),
                );
                ExperimentKind::SyncForward
            }
        },
        (None, None) => {
            top.check(false, "kind", "missing experiment kind");
            ExperimentKind::SyncForward
        }
    };
    let d = ExperimentConfig::defaults(kind);
    let seed = top.integer("seed", d.seed as i64);
    top.check(seed >= 0, "seed", format!("must be nonnegative, got {seed}"));
    let replicates = top.count("replicates", d.replicates);
    top.check(
        (1..=MAX_REPLICATES).contains(&replicates),
        "replicates",
        format!("must be in [1, {MAX_REPLICATES}], got {replicates}"),
    );
    let out = top.string("out").unwrap_or(&d.out).to_string();
    top.check(!out.is_empty(), "out", "must not be empty");
    top.finish();

    let mut g = Section {
        name: "grid",
        table: grid_t,
        seen: vec![],
        errors: &mut errors,
    };
    let n = g.count("n", d.grid.n);
    g.check(
        n.is_power_of_two() && (8..=4096).contains(&n),
        "n",
        format!("must be a power of two in [8, 4096], got {n}"),
    );
    let spu = g.count("steps_per_unit", d.grid.steps_per_unit);
    g.check(spu >= 1, "steps_per_unit", "must be positive");
    let diffusivity = g.float("diffusivity", d.grid.diffusivity);
    g.check(
        diffusivity.is_finite() && diffusivity > 0.0,
        "diffusivity",
        format!("must be positive, got {diffusivity}"),
    );
    g.finish();
    let spu = spu.max(1);

    let mut s = Section {
        name: "noise",
        table: noise_t,
        seen: vec![],
        errors: &mut errors,
    };
    let noise_kind = match s.string("type") {
        None => d.noise.kind,
        Some(t) => NoiseKind::from_name(t).unwrap_or_else(|| {
            s.check(false, "type", format!("unknown noise `{t}` (zero, fractional, white)"));
            d.noise.kind
        }),
    };
    let hurst = s.float("hurst", d.noise.hurst);
    if noise_kind == NoiseKind::Fractional {
        s.check(
            hurst > 0.5 && hurst < 1.0,
            "hurst",
            format!("H must be in (1/2, 1), got {hurst}"),
        );
    }
    let noise_spu = match s.raw("steps_per_unit") {
        None => None,
        Some(_) => {
            s.seen.pop();
            Some(s.count("steps_per_unit", spu))
        }
    };
    if let Some(m) = noise_spu {
        s.check(
            m >= 1 && spu.is_multiple_of(m.max(1)),
            "steps_per_unit",
            format!("must divide grid.steps_per_unit = {spu}, got {m}"),
        );
    }
    if noise_kind == NoiseKind::White && n.is_power_of_two() && n >= 8 {
        let min_spu = (n as f64 / WHITE_STEP_BUDGET).ceil() as usize;
        s.check(
            spu >= min_spu,
            "type",
            format!("white noise needs grid.steps_per_unit ≥ {min_spu} (dt ≤ dx/25), got {spu}"),
        );
    }
    let profile_cos = s.floats("profile_cos", &d.noise.profile_cos);
    let profile_sin = s.floats("profile_sin", &d.noise.profile_sin);
    for (key, v) in [("profile_cos", &profile_cos), ("profile_sin", &profile_sin)] {
        s.check(v.iter().all(|x| x.is_finite()), key, "coefficients must be finite");
        s.check(
            v.len() < n / 2,
            key,
            format!("at most {} modes on this grid", n / 2 - 1),
        );
    }
    s.finish();

    let mut i = Section {
        name: "initial",
        table: initial_t,
        seen: vec![],
        errors: &mut errors,
    };
    let a_cos = i.floats("a_cos", &d.initial.a_cos);
    let a_sin = i.floats("a_sin", &d.initial.a_sin);
    let b_cos = i.floats("b_cos", &d.initial.b_cos);
    let b_sin = i.floats("b_sin", &d.initial.b_sin);
    for (key, v) in [
        ("a_cos", &a_cos),
        ("a_sin", &a_sin),
        ("b_cos", &b_cos),
        ("b_sin", &b_sin),
    ] {
        i.check(
            v.iter().all(|x| x.is_finite() && x.abs() <= 50.0),
            key,
            "coefficients must be finite with |c| ≤ 50",
        );
        i.check(
            v.len() < n / 2,
            key,
            format!("at most {} modes on this grid", n / 2 - 1),
        );
    }
    i.finish();

    let dr = &d.run;
    let mut r = Section {
        name: "run",
        table: run_t,
        seen: vec![],
        errors: &mut errors,
    };
    let horizon = r.count("horizon", dr.horizon);
    r.check(
        (1..=1000).contains(&horizon),
        "horizon",
        format!("must be in [1, 1000], got {horizon}"),
    );
    let snapshots_per_unit = r.count("snapshots_per_unit", dr.snapshots_per_unit);
    r.check(
        snapshots_per_unit >= 1 && spu.is_multiple_of(snapshots_per_unit.max(1)),
        "snapshots_per_unit",
        format!("must divide grid.steps_per_unit = {spu}, got {snapshots_per_unit}"),
    );
    let samples = r.count("samples", dr.samples);
    r.check(samples >= 10, "samples", format!("at least 10 required, got {samples}"));
    let n_max = r.count("n_max", dr.n_max);
    r.check(n_max >= 2, "n_max", format!("at least 2 required, got {n_max}"));
    let t_obs = r.float("t_obs", dr.t_obs);
    r.check(
        is_step_multiple(t_obs, spu),
        "t_obs",
        format!("must be a nonnegative multiple of dt, got {t_obs}"),
    );
    let tol = r.float("tol", dr.tol);
    r.check(
        tol > 0.0 && tol.is_finite(),
        "tol",
        format!("must be positive, got {tol}"),
    );
    let kernel_time = r.float("kernel_time", dr.kernel_time);
    r.check(
        kernel_time > 0.0 && is_step_multiple(kernel_time, spu),
        "kernel_time",
        format!("must be a positive multiple of dt, got {kernel_time}"),
    );
    let track_tau = r.boolean("track_tau", dr.track_tau);
    let ensemble = r.count("ensemble", dr.ensemble);
    if kind == ExperimentKind::NoiseCheck {
        r.check(
            ensemble >= 100,
            "ensemble",
            format!("at least 100 realizations required, got {ensemble}"),
        );
    }
    let probe_shift = r.integer("probe_shift", dr.probe_shift);
    r.check(probe_shift >= 0, "probe_shift", "must be nonnegative");
    let holder_beta = r.float("holder_beta", dr.holder_beta);
    r.check(
        holder_beta > 0.0 && holder_beta < 1.0,
        "holder_beta",
        format!("must be in (0, 1), got {holder_beta}"),
    );
    let theta = r.float("theta", dr.theta);
    r.check(
        theta > 0.0 && theta < 1.0,
        "theta",
        format!("must be in (0, 1), got {theta}"),
    );
    let schauder_alpha = r.float("schauder_alpha", dr.schauder_alpha);
    r.check(schauder_alpha.is_finite(), "schauder_alpha", "must be finite");
    let schauder_beta = r.float("schauder_beta", dr.schauder_beta);
    r.check(
        (0.0..2.0).contains(&schauder_beta),
        "schauder_beta",
        format!("must be in [0, 2), got {schauder_beta}"),
    );
    let schauder_horizon = r.float("schauder_horizon", dr.schauder_horizon);
    r.check(
        schauder_horizon > 0.0 && schauder_horizon.is_finite(),
        "schauder_horizon",
        "must be positive",
    );
    let gamma = r.float("gamma", dr.gamma);
    r.check(
        gamma > 0.0 && gamma.is_finite(),
        "gamma",
        format!("must be positive, got {gamma}"),
    );
    r.finish();

    match kind {
        ExperimentKind::Constants if noise_kind == NoiseKind::White => {
            errors.push("noise.type: constants requires zero or fractional noise".into())
        }
        ExperimentKind::NoiseCheck if noise_kind == NoiseKind::Zero => {
            errors.push("noise.type: noise-check requires white or fractional noise".into())
        }
        _ => {}
    }

    if !errors.is_empty() {
        return Err(ConfigError::Validation(errors));
    }
    Ok(ExperimentConfig {
        kind,
        seed: seed as u64,
        replicates,
        out,
        grid: GridConfig {
            n,
            steps_per_unit: spu,
            diffusivity,
        },
        noise: NoiseConfig {
            kind: noise_kind,
            hurst,
            steps_per_unit: noise_spu,
            profile_cos,
            profile_sin,
        },
        initial: InitialConfig {
            a_cos,
            a_sin,
            b_cos,
            b_sin,
        },
        run: RunConfig {
            horizon,
            snapshots_per_unit,
            samples,
            n_max,
            t_obs,
            tol,
            kernel_time,
            track_tau,
            ensemble,
            probe_shift,
            holder_beta,
            theta,
            schauder_alpha,
            schauder_beta,
            schauder_horizon,
            gamma,
        },
    })
}

/// Sets `section.key = value` (or a top-level `key`) in a TOML table; the value
/// is read as a TOML literal and falls back to a plain string.
pub fn apply_override(root: &mut toml::Table, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| ConfigError::Override(assignment.into()))?;
    let (key, raw) = (key.trim(), raw.trim());
    if key.is_empty() {
        return Err(ConfigError::Override(assignment.into()));
    }
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut parts: Vec<&str> = key.split('.').collect();
    let leaf = parts.pop().expect("split yields at least one part");
    let mut table = root;
    for p in parts {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::Override(assignment.into()))?;
    }
    table.insert(leaf.to_string(), value);
    Ok(())
}

/// Parses configuration text, applies `key=value` overrides and validates.
pub fn parse_config_str(
    text: &str,
    kind: Option<ExperimentKind>,
    overrides: &[String],
) -> Result<ExperimentConfig, ConfigError> {
    let mut root: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    for o in overrides {
        apply_override(&mut root, o)?;
    }
    config_from_table(&root, kind)
}

/// Reads and validates a configuration file.
pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig, ConfigError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| ConfigError::Read {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config_str(&text, None, &[])
}

/// Record of one run: enough to reproduce it and to locate its outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub kind: ExperimentKind,
    pub config_hash: String,
    pub version: String,
    pub seeds: Vec<u64>,
    pub wall_clock_seconds: f64,
    pub out_dir: PathBuf,
    /// Paths relative to `out_dir`, sorted.
    pub outputs: Vec<String>,
    pub config: String,
}

impl RunManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| ExperimentError::io(path, e))
    }
}

/// Files and summary produced by one replicate.
struct ReplicateOutput {
    files: Vec<(String, String)>,
    summary: Value,
}

fn fit_json(fit: &Option<crate::rds::LinearFit>) -> Value {
    serde_json::to_value(fit).expect("plain data")
}

fn fractional_cocycle(
    cfg: &ExperimentConfig,
    seed: u64,
    window: std::ops::Range<i64>,
) -> Result<Cocycle, ExperimentError> {
    let noise = FbmNoise::materialize(
        cfg.noise.hurst,
        cfg.noise_steps_per_unit(),
        window,
        seed,
        FgnMethod::Auto,
    )?;
    Ok(Cocycle::fractional(
        cfg.grid(),
        cfg.grid.steps_per_unit,
        cfg.grid.diffusivity,
        cfg.profile(),
        noise,
    )?)
}

fn cocycle(cfg: &ExperimentConfig, seed: u64, window: std::ops::Range<i64>) -> Result<Cocycle, ExperimentError> {
    let (g, spu, nu) = (cfg.grid(), cfg.grid.steps_per_unit, cfg.grid.diffusivity);
    Ok(match cfg.noise.kind {
        NoiseKind::Zero => Cocycle::zero(g, spu, nu)?,
        NoiseKind::White => Cocycle::white(g, spu, nu, seed)?,
        NoiseKind::Fractional => fractional_cocycle(cfg, seed, window)?,
    })
}

fn run_noise_check(cfg: &ExperimentConfig, seed: u64) -> Result<ReplicateOutput, ExperimentError> {
    let g = cfg.grid();
    let spu = cfg.grid.steps_per_unit;
    let steps = cfg.run.horizon * spu;
    let mut files = Vec::new();
    let summary = match cfg.noise.kind {
        NoiseKind::White => {
            let xi = sample_white(g, spu, steps, 0, seed)?;
            let v = xi.values();
            let var = v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
            let expected = 1.0 / (xi.dt() * g.dx());
            files.push(("white.csv".into(), xi.to_csv()));
            files.push(("white.meta".into(), xi.metadata()));
            let ensemble: Vec<WhiteNoiseField> = (0..cfg.run.ensemble)
                .into_par_iter()
                .map(|k| sample_white(g, spu, spu, 0, derive_seed(seed, k as u64 + 1)))
                .collect::<Result<_, _>>()?;
            let phi = |t: f64, x: f64| if t < 0.5 && x < 0.5 { 1.0 } else { 0.0 };
            let same = covariance_probe(&ensemble, &phi, &phi, 0)?;
            let far = covariance_probe(&ensemble, &phi, &phi, cfg.run.probe_shift)?;
            json!({
                "noise": "white",
                "cells": v.len(),
                "variance": var,
                "expected_variance": expected,
                "variance_ratio": var / expected,
                "probe_same": same,
                "probe_shifted": far,
                "probe_shift": cfg.run.probe_shift,
            })
        }
        _ => {
            let nspu = cfg.noise_steps_per_unit();
            let path = sample_fbm(cfg.noise.hurst, nspu, cfg.run.horizon * nspu, 0, seed)?;
            let inc = path.increments();
            let m = inc.len() as f64;
            let c0 = inc.iter().map(|x| x * x).sum::<f64>() / m;
            let c1 = inc.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / (m - 1.0);
            let h = cfg.noise.hurst;
            files.push(("fbm.csv".into(), path.to_csv()));
            files.push(("fbm.meta".into(), path.metadata()));
            let ensemble = (0..cfg.run.ensemble)
                .into_par_iter()
                .map(|k| {
                    let noise = FbmNoise::materialize(
                        h,
                        nspu,
                        0..cfg.run.probe_shift + 1,
                        derive_seed(seed, k as u64 + 1),
                        FgnMethod::Auto,
                    )?;
                    noise.path(0, nspu)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let phi = |t: f64| if t < 0.5 { 1.0 } else { 0.0 };
            let same = covariance_probe(&ensemble, &phi, &phi, 0)?;
            let far = covariance_probe(&ensemble, &phi, &phi, cfg.run.probe_shift)?;
            json!({
                "noise": "fractional",
                "hurst": h,
                "beta_at_zero": path.values()[0],
                "increment_variance": c0,
                "expected_increment_variance": path.dt().powf(2.0 * h),
                "lag1_correlation": c1 / c0,
                "expected_lag1_correlation": fgn_autocovariance(h, 1) / fgn_autocovariance(h, 0),
                "probe_same": same,
                "probe_shifted": far,
                "probe_shift": cfg.run.probe_shift,
            })
        }
    };
    Ok(ReplicateOutput { files, summary })
}

fn run_she(cfg: &ExperimentConfig, seed: u64) -> Result<ReplicateOutput, ExperimentError> {
    let g = cfg.grid();
    let spu = cfg.grid.steps_per_unit;
    let store_every = spu / cfg.run.snapshots_per_unit;
    let u0 = cfg.initial('a');
    let t_end = cfg.run.horizon as f64;
    let mut files = Vec::new();
    let mut summary = json!({ "noise": cfg.noise.kind, "t_end": t_end });
    let traj = match cfg.noise.kind {
        NoiseKind::Fractional => {
            let nspu = cfg.noise_steps_per_unit();
            let beta = sample_fbm(cfg.noise.hurst, nspu, cfg.run.horizon * nspu, 0, seed)?;
            let params = SheParams {
                t_end,
                steps_per_unit: spu,
                diffusivity: cfg.grid.diffusivity,
                store_every,
            };
            let d = solve_she_fractional(&cfg.profile(), &beta, &u0, &params)?;
            let mid = d.times()[d.times().len() / 2];
            summary["kpz_residual_time"] = json!(mid);
            summary["kpz_residual"] = json!(kpz_residual(&d, &cfg.profile(), &beta, mid)?);
            files.push(("x.csv".into(), d.x.to_csv()));
            files.push(("w.csv".into(), d.w.to_csv()));
            d.u_trajectory()
        }
        NoiseKind::White => {
            let xi = sample_white(g, spu, cfg.run.horizon * spu, 0, seed)?;
            let params = WhiteParams {
                t_end,
                diffusivity: cfg.grid.diffusivity,
                store_every,
            };
            solve_she_white(&u0, &xi, &params)?
        }
        NoiseKind::Zero => {
            let c = Cocycle::zero(g, spu, cfg.grid.diffusivity)?;
            let dt_store = 1.0 / cfg.run.snapshots_per_unit as f64;
            let count = cfg.run.horizon * cfg.run.snapshots_per_unit;
            let mut snaps = vec![u0.clone()];
            for k in 0..count {
                let shift_free = apply_cocycle(&c, 0, dt_store, &snaps[k])?;
                snaps.push(shift_free);
            }
            Trajectory {
                times: (0..=count).map(|k| k as f64 * dt_store).collect(),
                snapshots: snaps,
                meta: TrajectoryMeta {
                    solver: "heat",
                    dt: c.dt(),
                    n: g.len(),
                    diffusivity: cfg.grid.diffusivity,
                    seed,
                    noise: "zero",
                    hurst: None,
                    profile: None,
                    positivity_flags: 0,
                },
            }
        }
    };
    let min_u = traj.snapshots.iter().map(|s| s.min()).fold(f64::INFINITY, f64::min);
    summary["min_u"] = json!(min_u);
    summary["positivity_flags"] = json!(traj.meta.positivity_flags);
    summary["snapshots"] = json!(traj.times.len());
    files.push(("u.csv".into(), traj.to_csv()));
    files.push(("u.meta".into(), traj.metadata()));
    Ok(ReplicateOutput { files, summary })
}

fn run_lyapunov(cfg: &ExperimentConfig, seed: u64) -> Result<ReplicateOutput, ExperimentError> {
    let c = cocycle(cfg, seed, 0..cfg.run.samples as i64)?;
    let est = estimate_lyapunov(&c, cfg.run.samples)?;
    let mut csv = String::from("i,log_tau,running_average\n");
    for (i, (s, r)) in est.samples.iter().zip(&est.running_average).enumerate() {
        csv.push_str(&format!("{i},{s:.16e},{r:.16e}\n"));
    }
    let summary = json!({
        "noise": c.noise().kind(),
        "samples": est.samples.len(),
        "mean": est.mean,
        "std_error": est.std_error,
        "ci_half_width": est.ci_half_width,
        "batches": est.batches,
        "ci_excludes_zero": est.mean + est.ci_half_width < 0.0,
    });
    Ok(ReplicateOutput {
        files: vec![("lyapunov.csv".into(), csv)],
        summary,
    })
}

fn run_sync_forward(cfg: &ExperimentConfig, seed: u64) -> Result<ReplicateOutput, ExperimentError> {
    let c = cocycle(cfg, seed, 0..cfg.run.horizon as i64)?;
    let opts = SyncOptions {
        track_tau: cfg.run.track_tau,
    };
    let r = run_forward_sync(&c, &cfg.initial('a'), &cfg.initial('b'), cfg.run.horizon, opts)?;
    let summary = json!({
        "noise": c.noise().kind(),
        "steps": cfg.run.horizon,
        "initial_distance": r.d_h[0],
        "final_distance": r.d_h.last(),
        "underflow_at": r.underflow_at,
        "fit": fit_json(&r.fit),
        "lyapunov": r.lyapunov.as_ref().map(|l| json!({
            "mean": l.mean, "std_error": l.std_error, "ci_half_width": l.ci_half_width,
        })),
        "bound_excess": r.bound_excess(),
        "c_mean_final": r.c_mean.last(),
        "c_mass_final": r.c_mass.last(),
    });
    let mut centering = String::from("n,c_mean,c_mass\n");
    for (i, (a, b)) in r.c_mean.iter().zip(&r.c_mass).enumerate() {
        centering.push_str(&format!("{i},{a:.16e},{b:.16e}\n"));
    }
    Ok(ReplicateOutput {
        files: vec![("sync.csv".into(), r.to_csv()), ("centering.csv".into(), centering)],
        summary,
    })
}

fn run_sync_pullback(cfg: &ExperimentConfig, seed: u64) -> Result<ReplicateOutput, ExperimentError> {
    let end = cfg.run.t_obs.ceil() as i64 + 1;
    let c = cocycle(cfg, seed, -(cfg.run.n_max as i64)..end)?;
    let ra = run_pullback(&c, &cfg.initial('a'), cfg.run.n_max, cfg.run.t_obs)?;
    let rb = run_pullback(&c, &cfg.initial('b'), cfg.run.n_max, cfg.run.t_obs)?;
    let d0 = hilbert_distance(&normalize(&cfg.initial('a'))?, &normalize(&cfg.initial('b'))?)?;
    let summary = json!({
        "noise": c.noise().kind(),
        "n_max": cfg.run.n_max,
        "t_obs": cfg.run.t_obs,
        "monotone": ra.monotone,
        "fit": fit_json(&ra.fit),
        "final_increment": ra.increments.last(),
        "final_diameter": ra.diameters.last(),
        "tau_product": ra.tau_products.last(),
        "limits_distance": hilbert_distance(&ra.limit, &rb.limit)?,
        "product_bound": ra.tau_products.last().map(|p| p * d0),
    });
    Ok(ReplicateOutput {
        files: vec![
            ("pullback.csv".into(), ra.to_csv()),
            ("limit.csv".into(), ra.limit.as_function().to_csv()),
        ],
        summary,
    })
}

fn run_krein_rutman(cfg: &ExperimentConfig, seed: u64) -> Result<ReplicateOutput, ExperimentError> {
    let c = cocycle(cfg, seed, 0..cfg.run.kernel_time.ceil() as i64)?;
    let k = kernel_matrix(&c, 0, cfg.run.kernel_time)?;
    let b = birkhoff(&k)?;
    let bounds = check_kernel_bounds(&k);
    let u = static_krein_rutman(&k, cfg.run.tol)?;
    let residual = hilbert_distance(&projective_apply(&k, &u)?, &u)?;
    let summary = json!({
        "noise": c.noise().kind(),
        "kernel_time": cfg.run.kernel_time,
        "gamma": bounds.gamma,
        "delta": bounds.delta,
        "diameter": b.diameter,
        "tau": b.tau,
        "fixed_point_residual": residual,
    });
    Ok(ReplicateOutput {
        files: vec![
            ("kernel.csv".into(), k.to_csv(cfg.run.kernel_time)),
            ("eigenfunction.csv".into(), u.as_function().to_csv()),
        ],
        summary,
    })
}

fn run_constants(cfg: &ExperimentConfig, seed: u64) -> Result<ReplicateOutput, ExperimentError> {
    let c = cocycle(cfg, seed, 0..cfg.run.horizon as i64)?;
    let r = track_constants(&c, &cfg.initial('a'), &cfg.initial('b'), cfg.run.horizon)?;
    let summary = json!({
        "noise": c.noise().kind(),
        "horizon": cfg.run.horizon,
        "c_initial": r.c.first(),
        "c_final": r.c.last(),
        "max_residual": r.max_residual,
        "decay_fit": fit_json(&r.decay_fit),
        "decay_rate": r.decay_rate(),
    });
    Ok(ReplicateOutput {
        files: vec![("constants.csv".into(), r.to_csv())],
        summary,
    })
}

fn run_regularity(cfg: &ExperimentConfig, seed: u64) -> Result<ReplicateOutput, ExperimentError> {
    let g = cfg.grid();
    let n = g.len();
    let xi = sample_white(g, n, n, 0, seed)?;
    let st = space_time_block_norms(&xi, Lp::Two);
    let slice = GridFunction::new(g, xi.slab(0).to_vec())?;
    let sp = besov_block_norms(&slice, Lp::Two);
    let slope = |p: &crate::analysis::BesovProfile| {
        let pts: Vec<(f64, f64)> = p
            .blocks
            .iter()
            .filter(|(j, b)| *j >= 2 && *j <= p.blocks.last().map_or(0, |l| l.0) - 2 && *b > 0.0)
            .map(|(j, b)| (*j as f64, (b * b).log2()))
            .collect();
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        fit_line(&x, &y).map(|f| f.slope)
    };
    let gamma = cfg.run.gamma;
    let mut dirac = String::from("separation,distance\n");
    let (mut lx, mut ly) = (Vec::new(), Vec::new());
    let mut k = 4;
    while 0.5f64.powi(k) >= 16.0 * g.dx() {
        let r = 0.5f64.powi(k);
        let d = dirac_distance(0.0, r, gamma, g);
        dirac.push_str(&format!("{r:.16e},{d:.16e}\n"));
        lx.push(r.ln());
        ly.push(d.ln());
        k += 1;
    }
    let scan = schauder_check(
        &slice,
        cfg.run.schauder_alpha,
        cfg.run.schauder_beta,
        cfg.run.schauder_horizon,
        Lp::Infinity,
    );
    let mut schauder = String::from("t,ratio\n");
    for (t, r) in scan.times.iter().zip(&scan.ratios) {
        schauder.push_str(&format!("{t:.16e},{r:.16e}\n"));
    }
    let interp = interpolation_check(&cfg.initial('a').map(f64::ln), cfg.run.holder_beta, cfg.run.theta);
    let summary = json!({
        "space_time_slope": slope(&st),
        "space_slope": slope(&sp),
        "dirac_gamma": gamma,
        "dirac_exponent": fit_line(&lx, &ly).map(|f| f.slope),
        "schauder_max_ratio": scan.max_ratio,
        "schauder_argmax": scan.argmax,
        "interpolation": { "lhs": interp.lhs, "rhs": interp.rhs, "holds": interp.holds() },
    });
    Ok(ReplicateOutput {
        files: vec![
            ("besov_space_time.csv".into(), st.to_csv()),
            ("besov_space.csv".into(), sp.to_csv()),
            ("dirac.csv".into(), dirac),
            ("schauder.csv".into(), schauder),
        ],
        summary,
    })
}

fn run_replicate(cfg: &ExperimentConfig, seed: u64) -> Result<ReplicateOutput, ExperimentError> {
    match cfg.kind {
        ExperimentKind::NoiseCheck => run_noise_check(cfg, seed),
        ExperimentKind::She => run_she(cfg, seed),
        ExperimentKind::Lyapunov => run_lyapunov(cfg, seed),
        ExperimentKind::SyncForward => run_sync_forward(cfg, seed),
        ExperimentKind::SyncPullback => run_sync_pullback(cfg, seed),
        ExperimentKind::KreinRutman => run_krein_rutman(cfg, seed),
        ExperimentKind::Constants => run_constants(cfg, seed),
        ExperimentKind::Regularity => run_regularity(cfg, seed),
    }
}

fn write(out: &Path, rel: &str, contents: &str, written: &mut Vec<String>) -> Result<(), ExperimentError> {
    let path = out.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| ExperimentError::io(parent, e))?;
    }
    fs::write(&path, contents).map_err(|e| ExperimentError::io(&path, e))?;
    written.push(rel.to_string());
    Ok(())
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize") + "\n"
}

/// Runs every replicate on a pool of `jobs` threads (0 = all cores), merges
/// results by replicate index and writes outputs, `summary.json`,
/// `config.toml` and `manifest.json` under `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<RunManifest, ExperimentError> {
    let start = Instant::now();
    let out = PathBuf::from(&cfg.out);
    fs::create_dir_all(&out).map_err(|e| ExperimentError::io(&out, e))?;
    let seeds: Vec<u64> = (0..cfg.replicates as u64).map(|r| derive_seed(cfg.seed, r)).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| ExperimentError::Io {
            path: "thread pool".into(),
            message: e.to_string(),
        })?;
    let results: Vec<Result<ReplicateOutput, ExperimentError>> =
        pool.install(|| seeds.par_iter().map(|&s| run_replicate(cfg, s)).collect());

    let mut written = Vec::new();
    let mut summaries = Vec::with_capacity(results.len());
    for (r, (res, seed)) in results.into_iter().zip(&seeds).enumerate() {
        let rep = res?;
        let dir = format!("rep-{r:03}");
        for (name, contents) in &rep.files {
            write(&out, &format!("{dir}/{name}"), contents, &mut written)?;
        }
        let summary = json!({ "replicate": r, "seed": seed, "result": rep.summary });
        write(&out, &format!("{dir}/summary.json"), &pretty(&summary), &mut written)?;
        summaries.push(summary);
    }
    let summary = json!({
        "kind": cfg.kind,
        "config_hash": cfg.hash(),
        "replicates": summaries,
    });
    write(&out, "summary.json", &pretty(&summary), &mut written)?;
    write(&out, "config.toml", &cfg.to_toml(), &mut written)?;
    written.push("manifest.json".into());
    written.sort();
    let manifest = RunManifest {
        kind: cfg.kind,
        config_hash: cfg.hash(),
        version: env!("CARGO_PKG_VERSION").into(),
        seeds,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        out_dir: out.clone(),
        outputs: written,
        config: cfg.to_toml(),
    };
    let path = out.join("manifest.json");
    fs::write(
        &path,
        serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n",
    )
    .map_err(|e| ExperimentError::io(&path, e))?;
    Ok(manifest)
}

/// Reads a CSV output as rows of numbers (header skipped).
fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>, ExperimentError> {
    let text = fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(|v| v.trim().parse().unwrap_or(f64::NAN)).collect())
        .collect();
    if rows.is_empty() {
        return Err(ExperimentError::MissingOutput(format!(
            "{} has no data rows",
            path.display()
        )));
    }
    Ok(rows)
}

fn two_columns(points: impl IntoIterator<Item = (f64, f64)>) -> String {
    let mut s = String::new();
    for (x, y) in points {
        s.push_str(&format!("{x:.10e} {y:.10e}\n"));
    }
    s
}

/// Writes gnuplot-ready two-column `.dat` files next to each report in the
/// manifest: `log_dH.dat` and `fit.dat` for synchronization runs,
/// `running_average.dat` for Lyapunov runs, `log_increment.dat` and
/// `limit.dat` for pullback runs, `c.dat` for constants runs, and one file per
/// profile, path or final snapshot for the remaining kinds. Returns the
/// written paths.
pub fn emit_plotdata(manifest: &RunManifest) -> Result<Vec<PathBuf>, ExperimentError> {
    let mut written = Vec::new();
    let mut emit = |path: PathBuf, contents: String| -> Result<(), ExperimentError> {
        fs::write(&path, contents).map_err(|e| ExperimentError::io(&path, e))?;
        written.push(path);
        Ok(())
    };
    let mut by_dir: BTreeMap<PathBuf, Vec<String>> = BTreeMap::new();
    for o in &manifest.outputs {
        let p = manifest.out_dir.join(o);
        let dir = p.parent().map(Path::to_path_buf).unwrap_or_default();
        let name = p
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        by_dir.entry(dir).or_default().push(name);
    }
    for (dir, names) in &by_dir {
        let has = |n: &str| names.iter().any(|x| x == n);
        if has("sync.csv") {
            let rows = read_rows(&dir.join("sync.csv"))?;
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.len() >= 3 && r[2].is_finite())
                .map(|r| (r[0], r[2]))
                .collect();
            if pts.is_empty() {
                return Err(ExperimentError::MissingOutput(format!(
                    "{}: no finite distances",
                    dir.display()
                )));
            }
            emit(dir.join("log_dH.dat"), two_columns(pts.iter().copied()))?;
            let summary: Value = serde_json::from_str(
                &fs::read_to_string(dir.join("summary.json"))
                    .map_err(|e| ExperimentError::io(&dir.join("summary.json"), e))?,
            )
            .map_err(|e| ExperimentError::io(&dir.join("summary.json"), e))?;
            let fit = &summary["result"]["fit"];
            let (slope, intercept) = (fit["slope"].as_f64(), fit["intercept"].as_f64());
            let line = match (slope, intercept) {
                (Some(s), Some(b)) => two_columns(pts.iter().map(|(x, _)| (*x, b + s * x))),
                _ => String::new(),
            };
            emit(dir.join("fit.dat"), line)?;
        }
        if has("lyapunov.csv") {
            let rows = read_rows(&dir.join("lyapunov.csv"))?;
            emit(
                dir.join("running_average.dat"),
                two_columns(rows.iter().map(|r| (r[0] + 1.0, r[2]))),
            )?;
        }
        if has("pullback.csv") {
            let rows = read_rows(&dir.join("pullback.csv"))?;
            emit(
                dir.join("log_increment.dat"),
                two_columns(
                    rows.iter()
                        .filter(|r| r[1].is_finite() && r[1] > 0.0)
                        .map(|r| (r[0], r[1].ln())),
                ),
            )?;
        }
        if has("constants.csv") {
            let rows = read_rows(&dir.join("constants.csv"))?;
            emit(dir.join("c.dat"), two_columns(rows.iter().map(|r| (r[0], r[1]))))?;
        }
        for (csv, dat) in [
            ("eigenfunction.csv", "eigenfunction.dat"),
            ("limit.csv", "limit.dat"),
            ("fbm.csv", "fbm.dat"),
            ("schauder.csv", "schauder.dat"),
        ] {
            if has(csv) {
                let rows = read_rows(&dir.join(csv))?;
                emit(dir.join(dat), two_columns(rows.iter().map(|r| (r[0], r[1]))))?;
            }
        }
        for (csv, dat) in [
            ("besov_space.csv", "besov_space.dat"),
            ("besov_space_time.csv", "besov_space_time.dat"),
        ] {
            if has(csv) {
                let rows = read_rows(&dir.join(csv))?;
                emit(
                    dir.join(dat),
                    two_columns(rows.iter().filter(|r| r[1] > 0.0).map(|r| (r[0], r[1].log2()))),
                )?;
            }
        }
        if has("dirac.csv") {
            let rows = read_rows(&dir.join("dirac.csv"))?;
            emit(
                dir.join("log_dirac.dat"),
                two_columns(rows.iter().map(|r| (r[0].ln(), r[1].ln()))),
            )?;
        }
        for csv in ["u.csv", "white.csv"] {
            if has(csv) {
                let rows = read_rows(&dir.join(csv))?;
                let t = if csv == "u.csv" {
                    rows[rows.len() - 1][0]
                } else {
                    rows[0][0]
                };
                let stem = csv.trim_end_matches(".csv");
                let which = if csv == "u.csv" { "final" } else { "first" };
                emit(
                    dir.join(format!("{stem}_{which}.dat")),
                    two_columns(rows.iter().filter(|r| r[0] == t).map(|r| (r[1], r[2]))),
                )?;
            }
        }
    }
    if written.is_empty() {
        return Err(ExperimentError::MissingOutput(
            "manifest lists no report with plottable data".into(),
        ));
    }
    Ok(written)
}
