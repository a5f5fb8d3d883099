//! Synchronization experiments for KPZ-type equations on the one-dimensional
//! torus.
//!
//! The multiplicative stochastic heat equation `∂_t u = ν∂_x²u + η u` generates
//! a linear random dynamical system of positive kernel operators. Its
//! projective action contracts in the Hilbert metric, so solutions started from
//! different positive data synchronize exponentially, and pullback iterates
//! converge to a single noise-dependent profile (one force, one solution).
//! Through the Cole–Hopf map `h = log u` these statements transfer to the KPZ
//! equation.
//!
//! Modules, bottom up:
//!
//! - [`field`]: periodic grid, quadrature, FFT-based heat semigroup and derivatives.
//! - [`cone`]: densities, Hilbert distance, positive kernels, Birkhoff coefficients.
//! - [`noise`]: white noise, fractional Brownian motion, time shifts, covariance probes.
//! - [`spde`]: solvers for the fractional and white-noise equations, Cole–Hopf.
//! - [`rds`]: cocycles, kernels, Lyapunov rates, forward and pullback synchronization.
//! - [`analysis`]: Hölder and Besov estimators, Schauder and Dirac checks.
//! - [`experiment`]: configuration files, experiment runner, manifests, plot data.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cone;
pub mod experiment;
pub mod field;
pub mod noise;
pub mod rds;
pub mod spde;

pub use cone::{birkhoff, hilbert_distance, normalize, projective_apply, Density, PositiveKernel};
pub use field::{heat_semigroup, integrate, GridFunction, TorusGrid};
