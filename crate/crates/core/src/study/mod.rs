//! Convergence experiments: particle-number error against the limit system,
//! step-size error against a fine reference, and the empirical-measure rate
//! of i.i.d. clouds. Each returns Monte Carlo estimates with replication
//! standard errors; [`fit_rate`] turns a sweep into a log-log slope.

mod fit;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::drivers::{DriverBundle, DriverKind, ExperimentKey, SeedPlan};
use crate::exec::Execution;
use crate::measure::{wasserstein_p, EmpiricalMeasure, MeasureError};
use crate::model::{InitialLaw, ModelSpec};
use crate::solver::{
    drivers_for, run_system, LawFlow, MeasureSource, Mode, SimGrid, SolverError, Stepping,
};

pub use fit::{fit_rate, is_nonincreasing, ErrorSample, RateFit, RateReport};

/// Reference slopes for the three sweeps, with where they come from.
pub const CHAOS_THEORY: (f64, &str) = (-0.5, "chaos bound N^(-1/2) for p = 2, Lipschitz case");
pub const EULER_THEORY: (f64, &str) = (0.5, "strong Euler bound h^(1/2) for p = 2, alpha = beta = 1");
pub const FG_THEORY: (f64, &str) = (-0.5, "empirical-measure bound N^(-1/2) for E[W2^2] in d = 1");

#[derive(Debug, Error, PartialEq)]
pub enum StudyError {
    #[error("at least 2 replications are needed for a standard error, got {0}")]
    TooFewReplications(usize),
    #[error("only p = 1 or p = 2 is supported, got {0}")]
    BadExponent(u32),
    #[error("a rate fit needs at least 3 positive estimates, got {0}")]
    TooFewPositive(usize),
    #[error("all parameters coincide; no slope to fit")]
    DegenerateFit,
    #[error("step {h} is not a power-of-two multiple of the reference step {h_ref}")]
    NotNested { h: f64, h_ref: f64 },
    #[error("sweep needs at least {required} values, got {got}")]
    ShortSweep { required: usize, got: usize },
    #[error("cloud size must be at least 1")]
    EmptyCloud,
    #[error("sampler lacks a finite moment of order {0}")]
    HeavyTailedSampler(f64),
    #[error("{context}: {source}")]
    Solver {
        context: String,
        #[source]
        source: SolverError,
    },
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

fn solver_ctx(context: impl Into<String>) -> impl FnOnce(SolverError) -> StudyError {
    let context = context.into();
    move |source| StudyError::Solver { context, source }
}

/// Randomness and execution settings shared by one experiment.
#[derive(Clone, Copy, Debug)]
pub struct Context {
    pub plan: SeedPlan,
    pub experiment: ExperimentKey,
    pub initial: InitialLaw,
    pub exec: Execution,
}

impl Context {
    fn bundle(&self, key: ExperimentKey, horizon: f64, model: &ModelSpec) -> Result<DriverBundle, StudyError> {
        DriverBundle::new(self.plan, key, horizon, model, self.initial)
            .map_err(|e| solver_ctx("drivers")(e.into()))
    }
}

fn check_common(replications: usize, p: u32) -> Result<(), StudyError> {
    if replications < 2 {
        return Err(StudyError::TooFewReplications(replications));
    }
    if p != 1 && p != 2 {
        return Err(StudyError::BadExponent(p));
    }
    Ok(())
}

/// `(1/N) Σ_i sup_t |X^a − X^b|^p` for two runs on the same drivers.
fn particle_average(sup: &[f64], p: u32) -> f64 {
    sup.iter().map(|d| d.powi(p as i32)).sum::<f64>() / sup.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChaosConfig {
    pub n: usize,
    pub stepping: Stepping,
    pub replications: usize,
    pub p: u32,
    /// Size `M` of the interacting pool standing in for the limit law.
    pub pool_size: usize,
}

/// Estimates `E[sup_t |X^{N,i} − X^i|^p]`.
///
/// Each replication couples an `N`-particle interacting run with `N` limit
/// particles on the same drivers; the limit law is an independent
/// interacting pool of `pool_size` particles (conventionally `64·N`).
pub fn chaos_error(model: &ModelSpec, cfg: &ChaosConfig, ctx: &Context) -> Result<ErrorSample, StudyError> {
    check_common(cfg.replications, cfg.p)?;
    if cfg.n == 0 {
        return Err(StudyError::EmptyCloud);
    }
    let horizon = cfg.stepping.grid.horizon();
    let mut stats = Vec::with_capacity(cfg.replications);
    for r in 0..cfg.replications {
        let key = ctx.experiment.child(cfg.n as u64).child(r as u64);
        let where_ = |what: &str| format!("chaos N = {} replication {r}: {what}", cfg.n);
        let bundle = ctx.bundle(key, horizon, model)?;
        let pool = ctx.bundle(key.sub("law-pool"), horizon, model)?;
        let law = LawFlow::from_pool(model, cfg.pool_size, &cfg.stepping, &pool, ctx.exec)
            .map_err(solver_ctx(where_("law pool")))?;
        let drivers = drivers_for(&bundle, cfg.n, &cfg.stepping, ctx.exec).map_err(solver_ctx(where_("drivers")))?;
        let initial: Vec<f64> = drivers.iter().map(|d| d.xi).collect();
        let inter = run_system(model, &cfg.stepping, &drivers, initial.clone(), MeasureSource::Cloud, ctx.exec)
            .map_err(solver_ctx(where_("interacting system")))?;
        let limit = run_system(model, &cfg.stepping, &drivers, initial, MeasureSource::Law(&law), ctx.exec)
            .map_err(solver_ctx(where_("limit system")))?;
        let sup = inter.sup_distance(&limit).map_err(solver_ctx(where_("comparison")))?;
        stats.push(particle_average(&sup, cfg.p));
    }
    ErrorSample::from_replications(cfg.n as f64, cfg.p, &stats)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerConfig {
    pub n: usize,
    pub horizon: f64,
    pub h_list: Vec<f64>,
    pub h_ref: f64,
    pub replications: usize,
    pub p: u32,
    pub reference_mode: Mode,
}

/// Estimates `E[sup_t |X^{h,N,i} − X^{ref,N,i}|^p]` for each `h`.
///
/// The frozen scheme at step `h` is evaluated on the reference grid (its
/// coefficients still frozen at multiples of `h`) and compared pointwise
/// with a reference run at `h_ref` on the same drivers.
pub fn euler_error(model: &ModelSpec, cfg: &EulerConfig, ctx: &Context) -> Result<Vec<ErrorSample>, StudyError> {
    check_common(cfg.replications, cfg.p)?;
    if cfg.n == 0 {
        return Err(StudyError::EmptyCloud);
    }
    let grid_err = solver_ctx("euler grid");
    let fine = SimGrid::new(cfg.horizon, cfg.h_ref).map_err(grid_err)?;
    let mut schemes = Vec::with_capacity(cfg.h_list.len());
    for &h in &cfg.h_list {
        let coarse = SimGrid::new(cfg.horizon, h).map_err(solver_ctx("euler grid"))?;
        let ratio = coarse
            .dyadic_ratio(&fine)
            .ok_or(StudyError::NotNested { h, h_ref: cfg.h_ref })?;
        schemes.push(Stepping::frozen(coarse).with_substeps(ratio));
    }
    let reference = Stepping::new(fine, cfg.reference_mode);
    let mut stats = vec![Vec::with_capacity(cfg.replications); schemes.len()];
    for r in 0..cfg.replications {
        let key = ctx.experiment.child(r as u64);
        let where_ = |what: String| format!("euler replication {r}: {what}");
        let bundle = ctx.bundle(key, cfg.horizon, model)?;
        let drivers = drivers_for(&bundle, cfg.n, &reference, ctx.exec).map_err(solver_ctx(where_("drivers".into())))?;
        let initial: Vec<f64> = drivers.iter().map(|d| d.xi).collect();
        let ref_run = run_system(model, &reference, &drivers, initial.clone(), MeasureSource::Cloud, ctx.exec)
            .map_err(solver_ctx(where_(format!("reference h = {}", cfg.h_ref))))?;
        for (scheme, acc) in schemes.iter().zip(stats.iter_mut()) {
            let h = scheme.grid.step();
            let run = run_system(model, scheme, &drivers, initial.clone(), MeasureSource::Cloud, ctx.exec)
                .map_err(solver_ctx(where_(format!("scheme h = {h}"))))?;
            let sup = run.sup_distance(&ref_run).map_err(solver_ctx(where_("comparison".into())))?;
            acc.push(particle_average(&sup, cfg.p));
        }
    }
    cfg.h_list
        .iter()
        .zip(&stats)
        .map(|(&h, s)| ErrorSample::from_replications(h, cfg.p, s))
        .collect()
}

fn draw_cloud(sampler: &InitialLaw, plan: &SeedPlan, key: ExperimentKey, n: usize) -> Result<EmpiricalMeasure, StudyError> {
    let xs = (0..n)
        .map(|i| {
            let mut rng = plan.stream(key, i as u64, DriverKind::Initial);
            sampler.sample(&mut rng)
        })
        .collect();
    Ok(EmpiricalMeasure::new(xs)?)
}

/// Estimates `E[W₂(μ, μ^N)²]` by the two-sample proxy `E[W₂(μ^N, μ'^N)²] / 2`.
///
/// For independent clouds the cross term vanishes in expectation, so halving
/// the two-sample cost recovers the one-sample cost without a reference cloud.
pub fn fg_samples(
    sampler: &InitialLaw,
    n: usize,
    replications: usize,
    plan: &SeedPlan,
    experiment: ExperimentKey,
    exec: Execution,
) -> Result<ErrorSample, StudyError> {
    if replications < 2 {
        return Err(StudyError::TooFewReplications(replications));
    }
    if n == 0 {
        return Err(StudyError::EmptyCloud);
    }
    let stats = exec.try_map(replications, |r| {
        let key = experiment.child(n as u64).child(r as u64);
        let a = draw_cloud(sampler, plan, key, n)?;
        let b = draw_cloud(sampler, plan, key.sub("twin"), n)?;
        Ok::<_, StudyError>(wasserstein_p(&a, &b, 2.0)?.powi(2) / 2.0)
    })?;
    ErrorSample::from_replications(n as f64, 2, &stats)
}

/// Sweeps `n_list` with [`fg_samples`] and fits the log-log slope.
///
/// A sampler with all estimates zero (a point mass) yields a report without
/// a fit rather than an error.
pub fn fg_rate(
    sampler: &InitialLaw,
    n_list: &[usize],
    replications: usize,
    plan: &SeedPlan,
    experiment: ExperimentKey,
    exec: Execution,
) -> Result<RateReport, StudyError> {
    if n_list.len() < 3 {
        return Err(StudyError::ShortSweep {
            required: 3,
            got: n_list.len(),
        });
    }
    // q > 2p with p = 2
    if !sampler.has_finite_moment(5.0) {
        return Err(StudyError::HeavyTailedSampler(5.0));
    }
    let samples = n_list
        .iter()
        .map(|&n| fg_samples(sampler, n, replications, plan, experiment, exec))
        .collect::<Result<Vec<_>, _>>()?;
    let report = match fit_rate(&samples) {
        Ok(r) => r,
        Err(StudyError::TooFewPositive(k)) => RateReport {
            samples,
            fit: None,
            theory_slope: None,
            theory_source: String::new(),
            notes: vec![format!("only {k} positive estimates; no slope fitted")],
        },
        Err(e) => return Err(e),
    };
    Ok(report.with_theory(FG_THEORY.0, FG_THEORY.1))
}

#[cfg(test)]
mod tests;
