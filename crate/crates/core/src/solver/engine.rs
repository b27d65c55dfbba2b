//! The shared time stepper.
//!
//! Every system (interacting cloud, limit particles driven by an external law,
//! Picard iterates) runs through [`run_system`]; they differ only in where the
//! measure argument comes from. Sharing the arithmetic is what makes coupled
//! differences exactly zero in degenerate cases.

use serde::{Deserialize, Serialize};

use super::{LawFlow, SimGrid, SolverError};
use crate::drivers::{DriverBundle, JumpSource, ParticleDrivers, SchemeRequest};
use crate::exec::Execution;
use crate::measure::EmpiricalMeasure;
use crate::model::{compensator_integral, ModelSpec};

/// Positions beyond this magnitude abort the run.
pub const BLOW_UP: f64 = 1e12;

/// Where coefficients are evaluated inside a step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// All terms at `(X_{t_h}, μ_{t_h})`.
    #[default]
    Frozen,
    /// Re-anchored at every output point; jump coefficients additionally see
    /// the jumps already taken inside the step.
    Continuous,
}

/// A scheme: step `h`, output every `h / substeps`, and a mode.
///
/// With `substeps > 1` a frozen scheme is evaluated on a finer output grid
/// without changing its coefficients, so it can be compared pointwise with a
/// fine reference.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stepping {
    pub grid: SimGrid,
    pub substeps: usize,
    pub mode: Mode,
}

impl Stepping {
    pub fn new(grid: SimGrid, mode: Mode) -> Self {
        Self {
            grid,
            substeps: 1,
            mode,
        }
    }

    pub fn frozen(grid: SimGrid) -> Self {
        Self::new(grid, Mode::Frozen)
    }

    pub fn continuous(grid: SimGrid) -> Self {
        Self::new(grid, Mode::Continuous)
    }

    pub fn with_substeps(mut self, substeps: usize) -> Self {
        self.substeps = substeps.max(1);
        self
    }

    pub fn output_grid(&self) -> Result<SimGrid, SolverError> {
        self.grid.refine(self.substeps)
    }

    fn anchor_every(&self) -> usize {
        match self.mode {
            Mode::Frozen => self.substeps,
            Mode::Continuous => 1,
        }
    }
}

/// Positions of a cloud at one time with their empirical measure.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleSystemState {
    pub time: f64,
    pub positions: Vec<f64>,
    pub measure: EmpiricalMeasure,
}

impl ParticleSystemState {
    pub fn new(time: f64, positions: Vec<f64>) -> Result<Self, SolverError> {
        let measure = EmpiricalMeasure::new(positions.clone())?;
        Ok(Self {
            time,
            positions,
            measure,
        })
    }
}

/// A simulated path of the whole system.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    /// Output grid.
    pub times: Vec<f64>,
    /// `positions[k][i]`: particle `i` at `times[k]`.
    pub positions: Vec<Vec<f64>>,
    /// Per particle, the value right after each of its jumps, in event order.
    pub jump_values: Vec<Vec<f64>>,
    /// Per particle, the largest `|X|` seen on the grid and at jump times.
    pub running_sup: Vec<f64>,
}

impl Trajectory {
    pub fn particles(&self) -> usize {
        self.running_sup.len()
    }

    pub fn final_positions(&self) -> &[f64] {
        self.positions.last().expect("grid has at least two points")
    }

    pub fn state(&self, k: usize) -> Result<ParticleSystemState, SolverError> {
        ParticleSystemState::new(self.times[k], self.positions[k].clone())
    }

    /// `sup_t |X_t^i − Y_t^i|` per particle over grid points and jump times.
    ///
    /// Both trajectories must come from the same drivers and output grid.
    pub fn sup_distance(&self, other: &Trajectory) -> Result<Vec<f64>, SolverError> {
        if self.times != other.times || self.particles() != other.particles() {
            return Err(SolverError::Incomparable);
        }
        let mut sup = vec![0.0f64; self.particles()];
        for (a, b) in self.positions.iter().zip(&other.positions) {
            for (s, (x, y)) in sup.iter_mut().zip(a.iter().zip(b)) {
                *s = s.max((x - y).abs());
            }
        }
        for (s, (a, b)) in sup.iter_mut().zip(self.jump_values.iter().zip(&other.jump_values)) {
            if a.len() != b.len() {
                return Err(SolverError::Incomparable);
            }
            for (x, y) in a.iter().zip(b) {
                *s = s.max((x - y).abs());
            }
        }
        Ok(sup)
    }
}

/// Where the measure argument of the coefficients comes from.
#[derive(Clone, Copy, Debug)]
pub enum MeasureSource<'a> {
    /// The simulated cloud itself (interacting system).
    Cloud,
    /// An external law flow (limit system, Picard iterate).
    Law(&'a LawFlow),
}

struct BlockOut {
    values: Vec<f64>,
    jumps: Vec<f64>,
}

fn guard(x: f64, particle: usize, time: f64) -> Result<f64, SolverError> {
    if x.is_finite() && x.abs() <= BLOW_UP {
        Ok(x)
    } else {
        Err(SolverError::BlowUp {
            particle,
            time,
            value: x,
        })
    }
}

/// Advances one particle from output index `k0` to `k1` with coefficients
/// anchored at `(x0, mu)`.
#[allow(clippy::too_many_arguments)]
fn advance_block(
    model: &ModelSpec,
    mode: Mode,
    times: &[f64],
    k0: usize,
    k1: usize,
    particle: usize,
    d: &ParticleDrivers,
    x0: f64,
    mu: &EmpiricalMeasure,
) -> Result<BlockOut, SolverError> {
    let comp = compensator_integral(model, x0, mu)?.value;
    let a = model.drift(x0, mu) - comp;
    let s = model.sigma(x0);
    let t_start = times[k0];
    let mut ev = d.events.partition_point(|e| e.time <= t_start);
    let mut out = BlockOut {
        values: Vec::with_capacity(k1 - k0),
        jumps: Vec::new(),
    };
    let mut x = x0;
    let mut block_jumps = 0.0;
    for k in k0..k1 {
        let (t, w) = (times[k], d.brownian[k]);
        let t_next = times[k + 1];
        let mut jsum = 0.0;
        while ev < d.events.len() && d.events[ev].time <= t_next {
            let e = d.events[ev];
            let arg = match mode {
                Mode::Frozen => x0,
                Mode::Continuous => x0 + block_jumps,
            };
            let jump = match e.source {
                JumpSource::Compensated => model.f0(arg, mu, e.mark),
                JumpSource::Raw => model.f1(arg, mu, e.mark),
            };
            jsum += jump;
            block_jumps += jump;
            let at = x + a * (e.time - t) + s * (d.event_brownian[ev] - w) + jsum;
            out.jumps.push(guard(at, particle, e.time)?);
            ev += 1;
        }
        x = guard(x + a * (t_next - t) + s * (d.brownian[k + 1] - w) + jsum, particle, t_next)?;
        out.values.push(x);
    }
    Ok(out)
}

/// Runs `drivers.len()` particles on `stepping`'s output grid.
///
/// `drivers[i]` must be materialized on that output grid.
pub fn run_system(
    model: &ModelSpec,
    stepping: &Stepping,
    drivers: &[ParticleDrivers],
    initial: Vec<f64>,
    source: MeasureSource<'_>,
    exec: Execution,
) -> Result<Trajectory, SolverError> {
    let n = drivers.len();
    if n == 0 || initial.len() != n {
        return Err(SolverError::NoParticles);
    }
    let times = stepping.output_grid()?.points();
    if drivers.iter().any(|d| d.brownian.len() != times.len()) {
        return Err(SolverError::Incomparable);
    }
    for (i, &x) in initial.iter().enumerate() {
        guard(x, i, 0.0)?;
    }
    let steps = times.len() - 1;
    let every = stepping.anchor_every();
    let mut positions = Vec::with_capacity(times.len());
    let mut jump_values = vec![Vec::new(); n];
    let mut running_sup: Vec<f64> = initial.iter().map(|x| x.abs()).collect();
    positions.push(initial);

    let mut k0 = 0;
    while k0 < steps {
        let k1 = (k0 + every).min(steps);
        let current = positions.last().unwrap();
        let cloud;
        let mu = match source {
            MeasureSource::Cloud => {
                // barrier: every particle sees the same snapshot
                cloud = EmpiricalMeasure::new(current.clone())?;
                &cloud
            }
            MeasureSource::Law(law) => law.at(times[k0])?,
        };
        let blocks = exec.try_map(n, |i| {
            advance_block(model, stepping.mode, &times, k0, k1, i, &drivers[i], current[i], mu)
        })?;
        let mut rows = vec![Vec::with_capacity(n); k1 - k0];
        for (i, b) in blocks.into_iter().enumerate() {
            let sup = &mut running_sup[i];
            for (row, &v) in rows.iter_mut().zip(&b.values) {
                *sup = sup.max(v.abs());
                row.push(v);
            }
            for &v in &b.jumps {
                *sup = sup.max(v.abs());
            }
            jump_values[i].extend(b.jumps);
        }
        positions.extend(rows);
        k0 = k1;
    }
    Ok(Trajectory {
        times,
        positions,
        jump_values,
        running_sup,
    })
}

/// Materializes the drivers of particles `0..n` for `stepping`, checking the
/// bundle covers its horizon.
pub fn drivers_for(
    bundle: &DriverBundle,
    n: usize,
    stepping: &Stepping,
    exec: Execution,
) -> Result<Vec<ParticleDrivers>, SolverError> {
    let grid = stepping.output_grid()?;
    bundle.couple(&[SchemeRequest::new("scheme", grid.horizon())])?;
    Ok(bundle.materialize(n, &grid.points(), exec)?)
}

/// One step of the interacting system from output index `k`.
///
/// Advances all particles to the next anchor point (one step `h` in frozen
/// mode) and recomputes the empirical measure.
pub fn step_interacting(
    model: &ModelSpec,
    state: &ParticleSystemState,
    stepping: &Stepping,
    drivers: &[ParticleDrivers],
    k: usize,
    exec: Execution,
) -> Result<ParticleSystemState, SolverError> {
    let times = stepping.output_grid()?.points();
    if drivers.len() != state.positions.len() || k + 1 >= times.len() {
        return Err(SolverError::Incomparable);
    }
    let k1 = (k + stepping.anchor_every()).min(times.len() - 1);
    let blocks = exec.try_map(drivers.len(), |i| {
        advance_block(
            model,
            stepping.mode,
            &times,
            k,
            k1,
            i,
            &drivers[i],
            state.positions[i],
            &state.measure,
        )
    })?;
    let positions = blocks.iter().map(|b| *b.values.last().unwrap()).collect();
    ParticleSystemState::new(times[k1], positions)
}

/// The interacting `N`-particle system with initial positions `ξ_i`.
pub fn simulate_interacting(
    model: &ModelSpec,
    n: usize,
    stepping: &Stepping,
    bundle: &DriverBundle,
    exec: Execution,
) -> Result<Trajectory, SolverError> {
    let drivers = drivers_for(bundle, n, stepping, exec)?;
    let initial = drivers.iter().map(|d| d.xi).collect();
    run_system(model, stepping, &drivers, initial, MeasureSource::Cloud, exec)
}

/// `N` independent particles whose measure argument is read from `law`,
/// driven by the same noise as interacting particles `0..N`.
pub fn simulate_limit_coupled(
    model: &ModelSpec,
    n: usize,
    stepping: &Stepping,
    bundle: &DriverBundle,
    law: &LawFlow,
    exec: Execution,
) -> Result<Trajectory, SolverError> {
    let drivers = drivers_for(bundle, n, stepping, exec)?;
    let initial = drivers.iter().map(|d| d.xi).collect();
    run_system(model, stepping, &drivers, initial, MeasureSource::Law(law), exec)
}
