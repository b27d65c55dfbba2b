//! Time stepping for the interacting particle system, the coupled limit
//! system and the distribution-iterated (Picard) flow.
//!
//! All schemes share the jump-adapted Euler step of [`engine`]: Brownian and
//! drift terms advance on the grid, jumps land at their exact times, and the
//! coefficients are evaluated at an anchor point fixed by the [`Mode`].

mod engine;
mod grid;
mod law;
mod picard;

use thiserror::Error;

use crate::drivers::DriverError;
use crate::measure::MeasureError;
use crate::model::ModelError;

pub use engine::{
    drivers_for, run_system, simulate_interacting, simulate_limit_coupled, step_interacting,
    MeasureSource, Mode, ParticleSystemState, Stepping, Trajectory, BLOW_UP,
};
pub use grid::SimGrid;
pub use law::LawFlow;
pub use picard::{picard_flow, PicardConfig, PicardReport};

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("invalid grid: T = {horizon}, h = {step} (need T > 0, 0 < h < 1)")]
    BadGrid { horizon: f64, step: f64 },
    #[error("particle {particle} blew up at t = {time} (value {value})")]
    BlowUp { particle: usize, time: f64, value: f64 },
    #[error("law flow has no checkpoint near t = {time}")]
    MissingCheckpoint { time: f64 },
    #[error("malformed law flow: {0}")]
    BadLawFlow(String),
    #[error("pool size must be at least 2, got {0}")]
    BadPoolSize(usize),
    #[error("k_max must be at least 1, got {0}")]
    BadIterations(usize),
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("a run needs at least one particle and one initial value per particle")]
    NoParticles,
    #[error("runs are on different grids or particle sets")]
    Incomparable,
    #[error(transparent)]
    Drivers(#[from] DriverError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}
