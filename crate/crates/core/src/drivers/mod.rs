//! Reproducible noise: keyed substreams, Brownian paths, jump schedules.
//!
//! Every random input of particle `i` in an experiment comes from its own
//! ChaCha stream keyed by `(master seed, experiment, i, kind)`. Two schemes
//! that read the same bundle therefore see identical Brownian paths, jump
//! times and marks, on any grid and under any thread schedule.

mod brownian;
mod jumps;
mod seed;

use thiserror::Error;

use crate::exec::Execution;
use crate::model::{InitialLaw, MarkMeasure, ModelSpec};

pub use brownian::{BrownianPath, SKELETON_DEPTH};
pub use jumps::{merge_events, sample_jump_schedule, JumpEvent, JumpSchedule, JumpSource};
pub use seed::{DriverKind, ExperimentKey, SeedPlan, KEYING_VERSION};

#[derive(Debug, Error, PartialEq)]
pub enum DriverError {
    #[error("grid time {time} outside [0, {horizon}]")]
    OutsideHorizon { time: f64, horizon: f64 },
    #[error("grid not increasing at position {0}")]
    NotIncreasing(usize),
    #[error("more than 64 off-skeleton points inside skeleton cell {cell}")]
    TooDense { cell: u64 },
    #[error("horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error("scheme {scheme:?} runs to T = {requested} but the coupled bundle covers T = {available}")]
    HorizonMismatch {
        scheme: String,
        requested: f64,
        available: f64,
    },
}

/// Everything one particle needs for a run on a fixed output grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleDrivers {
    pub xi: f64,
    /// `W` at the output grid times.
    pub brownian: Vec<f64>,
    pub jumps0: JumpSchedule,
    pub jumps1: JumpSchedule,
    /// `jumps0 ∪ jumps1` in time order.
    pub events: Vec<JumpEvent>,
    /// `W` at each event time, aligned with `events`.
    pub event_brownian: Vec<f64>,
}

/// Read-only source of the drivers of one experiment.
#[derive(Clone, Debug)]
pub struct DriverBundle {
    plan: SeedPlan,
    experiment: ExperimentKey,
    horizon: f64,
    nu0: MarkMeasure,
    nu1: MarkMeasure,
    initial: InitialLaw,
}

impl DriverBundle {
    pub fn new(
        plan: SeedPlan,
        experiment: ExperimentKey,
        horizon: f64,
        model: &ModelSpec,
        initial: InitialLaw,
    ) -> Result<Self, DriverError> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(DriverError::BadHorizon(horizon));
        }
        Ok(Self {
            plan,
            experiment,
            horizon,
            nu0: model.nu0().clone(),
            nu1: model.nu1().clone(),
            initial,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn plan(&self) -> SeedPlan {
        self.plan
    }

    pub fn experiment(&self) -> ExperimentKey {
        self.experiment
    }

    pub fn initial_law(&self) -> InitialLaw {
        self.initial
    }

    pub fn brownian(&self, i: usize) -> BrownianPath {
        let i = i as u64;
        BrownianPath::new(
            self.horizon,
            self.plan.stream(self.experiment, i, DriverKind::Brownian),
            self.plan.stream(self.experiment, i, DriverKind::BrownianFine),
        )
    }

    pub fn brownian_increments(&self, i: usize, grid: &[f64]) -> Result<Vec<f64>, DriverError> {
        self.brownian(i).increments(grid)
    }

    pub fn jump_schedule(&self, i: usize, source: JumpSource) -> JumpSchedule {
        let (kind, measure) = match source {
            JumpSource::Compensated => (DriverKind::Jumps0, &self.nu0),
            JumpSource::Raw => (DriverKind::Jumps1, &self.nu1),
        };
        let mut rng = self.plan.stream(self.experiment, i as u64, kind);
        sample_jump_schedule(measure, self.horizon, &mut rng)
    }

    pub fn initial_value(&self, i: usize) -> f64 {
        let mut rng = self.plan.stream(self.experiment, i as u64, DriverKind::Initial);
        self.initial.sample(&mut rng)
    }

    pub fn particle(&self, i: usize, times: &[f64]) -> Result<ParticleDrivers, DriverError> {
        let jumps0 = self.jump_schedule(i, JumpSource::Compensated);
        let jumps1 = self.jump_schedule(i, JumpSource::Raw);
        let events = merge_events(&jumps0, &jumps1);
        // one sorted query so grid and event values come from the same path
        let mut query: Vec<(f64, bool)> = times
            .iter()
            .map(|&t| (t, false))
            .chain(events.iter().map(|e| (e.time, true)))
            .collect();
        query.sort_by(|a, b| a.0.total_cmp(&b.0));
        let ts: Vec<f64> = query.iter().map(|q| q.0).collect();
        let w = self.brownian(i).values_at(&ts)?;
        let (mut brownian, mut event_brownian) = (Vec::with_capacity(times.len()), Vec::with_capacity(events.len()));
        for (&(_, is_event), w) in query.iter().zip(w) {
            if is_event {
                event_brownian.push(w);
            } else {
                brownian.push(w);
            }
        }
        Ok(ParticleDrivers {
            xi: self.initial_value(i),
            brownian,
            jumps0,
            jumps1,
            events,
            event_brownian,
        })
    }

    /// Drivers of particles `0..n` on `times`.
    pub fn materialize(
        &self,
        n: usize,
        times: &[f64],
        exec: Execution,
    ) -> Result<Vec<ParticleDrivers>, DriverError> {
        exec.try_map(n, |i| self.particle(i, times))
    }

    /// Hands the same drivers to several schemes, checking that all of them
    /// run on the horizon this bundle covers.
    pub fn couple<'a>(&'a self, schemes: &[SchemeRequest]) -> Result<CoupledView<'a>, DriverError> {
        let first = schemes.first().map(|s| s.horizon);
        for s in schemes {
            if Some(s.horizon) != first || s.horizon > self.horizon {
                return Err(DriverError::HorizonMismatch {
                    scheme: s.id.clone(),
                    requested: s.horizon,
                    available: first.unwrap_or(self.horizon).min(self.horizon),
                });
            }
        }
        Ok(CoupledView {
            bundle: self,
            schemes: schemes.iter().map(|s| s.id.clone()).collect(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchemeRequest {
    pub id: String,
    pub horizon: f64,
}

impl SchemeRequest {
    pub fn new(id: impl Into<String>, horizon: f64) -> Self {
        Self {
            id: id.into(),
            horizon,
        }
    }
}

/// Shared view of one bundle; every scheme reads identical drivers.
#[derive(Clone, Debug)]
pub struct CoupledView<'a> {
    bundle: &'a DriverBundle,
    schemes: Vec<String>,
}

impl<'a> CoupledView<'a> {
    pub fn bundle(&self) -> &'a DriverBundle {
        self.bundle
    }

    pub fn schemes(&self) -> &[String] {
        &self.schemes
    }
}
