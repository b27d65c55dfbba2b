use serde::{Deserialize, Serialize};

use super::{drivers_for, run_system, LawFlow, MeasureSource, SolverError, Stepping};
use crate::drivers::DriverBundle;
use crate::exec::Execution;
use crate::measure::EmpiricalMeasure;
use crate::model::ModelSpec;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardConfig {
    pub pool_size: usize,
    pub k_max: usize,
    pub tol: f64,
}

#[derive(Clone, Debug)]
pub struct PicardReport {
    pub flow: LawFlow,
    /// `distances[k-1] = sup_t W₂(μ^(k)_t, μ^(k-1)_t)`.
    pub distances: Vec<f64>,
    pub converged: bool,
}

impl PicardReport {
    pub fn iterations(&self) -> usize {
        self.distances.len()
    }
}

/// Distribution-iterated scheme: iterate `k` is a pool of `M` particles
/// solving the equation with the law frozen to iterate `k-1`.
///
/// All iterates share one set of drivers, so successive flows differ only
/// through the measure argument. The iteration starts from the initial pool
/// held constant in time.
pub fn picard_flow(
    model: &ModelSpec,
    config: &PicardConfig,
    stepping: &Stepping,
    bundle: &DriverBundle,
    exec: Execution,
) -> Result<PicardReport, SolverError> {
    if config.pool_size < 2 {
        return Err(SolverError::BadPoolSize(config.pool_size));
    }
    if config.k_max < 1 {
        return Err(SolverError::BadIterations(config.k_max));
    }
    if !(config.tol > 0.0) {
        return Err(SolverError::BadTolerance(config.tol));
    }
    let drivers = drivers_for(bundle, config.pool_size, stepping, exec)?;
    let initial: Vec<f64> = drivers.iter().map(|d| d.xi).collect();
    let times = stepping.output_grid()?.points();
    let mut flow = LawFlow::constant(EmpiricalMeasure::new(initial.clone())?, times)?;
    let mut distances = Vec::new();
    loop {
        let traj = run_system(
            model,
            stepping,
            &drivers,
            initial.clone(),
            MeasureSource::Law(&flow),
            exec,
        )?;
        let next = LawFlow::from_trajectory(traj)?;
        let d = next.sup_w2(&flow)?;
        distances.push(d);
        flow = next;
        if d < config.tol {
            return Ok(PicardReport {
                flow,
                distances,
                converged: true,
            });
        }
        if distances.len() == config.k_max {
            return Ok(PicardReport {
                flow,
                distances,
                converged: false,
            });
        }
    }
}
