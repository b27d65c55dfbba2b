//! Monte Carlo simulation of one-dimensional jump-type McKean-Vlasov SDEs.
//!
//! The crate builds interacting particle systems and Euler schemes on top of
//! reproducible, coupled noise, and measures how fast they converge: in the
//! number of particles, in the step size, and for the empirical measure of
//! i.i.d. samples.
//!
//! Module map:
//! - [`model`]: coefficients, mark measures, built-in models, assumption probes
//! - [`measure`]: empirical measures and exact 1-D Wasserstein distances
//! - [`yamada`]: the Yamada–Watanabe smoothing of `|x|`
//! - [`drivers`]: keyed random streams, Brownian bridges, Poisson jump schedules
//! - [`solver`]: particle, limit-system and Picard time steppers
//! - [`study`]: convergence experiments and log-log rate fits
//! - [`cli`]: configuration, orchestration and artifact output

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod drivers;
pub mod exec;
pub mod measure;
pub mod model;
pub mod solver;
pub mod study;
pub mod yamada;

pub use exec::Execution;
