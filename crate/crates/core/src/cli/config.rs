use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::model::{builtin_model, InitialLaw, Params};
use crate::solver::{Mode, SimGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Simulate,
    Chaos,
    EulerRate,
    FgRate,
    Picard,
    YwCheck,
    Wasserstein,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Chaos => "chaos",
            Experiment::EulerRate => "euler-rate",
            Experiment::FgRate => "fg-rate",
            Experiment::Picard => "picard",
            Experiment::YwCheck => "yw-check",
            Experiment::Wasserstein => "wasserstein",
        }
    }
}

pub const DEFAULT_HORIZON: f64 = 1.0;
pub const DEFAULT_REPLICATIONS: usize = 16;
pub const DEFAULT_P: u32 = 2;
/// Law pool size per particle when `M` is not given.
pub const POOL_FACTOR: usize = 64;
pub const DEFAULT_STEP: f64 = 1.0 / 256.0;
pub const DEFAULT_EULER_N: usize = 256;
pub const DEFAULT_TOL: f64 = 1e-3;
pub const DEFAULT_K_MAX: usize = 10;
pub const DEFAULT_PROBES: usize = 100_000;
pub const DEFAULT_EPS_RANGE: [f64; 2] = [0.01, 0.5];
pub const DEFAULT_PAIRS: usize = 500;
pub const DEFAULT_MAX_ATOMS: usize = 6;

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

/// A run description. After [`parse_config`] every field the experiment
/// uses is filled in, so serializing and re-parsing is the identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default, skip_serializing_if = "Params::is_empty")]
    pub params: Params,
    #[serde(rename = "T", default = "default_horizon")]
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_ref: Option<f64>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(rename = "N_list", default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(rename = "R", default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_p")]
    pub p: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_mode: Option<Mode>,
    #[serde(default)]
    pub initial: InitialLaw,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_range: Option<[f64; 2]>,
    /// Two cloud CSVs to compare; random oracle pairs when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clouds: Option<[PathBuf; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_atoms: Option<usize>,
}

fn default_model() -> String {
    "M_OU".into()
}
fn default_horizon() -> f64 {
    DEFAULT_HORIZON
}
fn default_replications() -> usize {
    DEFAULT_REPLICATIONS
}
fn default_p() -> u32 {
    DEFAULT_P
}

impl RunConfig {
    /// A config for `experiment` with nothing but defaults.
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            model: default_model(),
            params: Params::new(),
            horizon: DEFAULT_HORIZON,
            h: None,
            h_list: None,
            h_ref: None,
            n: None,
            n_list: None,
            m: None,
            replications: DEFAULT_REPLICATIONS,
            p: DEFAULT_P,
            tol: None,
            k_max: None,
            master_seed: 0,
            output_dir: None,
            mode: Mode::Frozen,
            reference_mode: None,
            initial: InitialLaw::default(),
            probes: None,
            eps_range: None,
            clouds: None,
            pairs: None,
            max_atoms: None,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs are plain data")
    }

    /// Fills experiment-specific defaults and checks every range.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        use Experiment::*;
        let e = self.experiment;
        positive("T", self.horizon)?;
        self.initial
            .validate()
            .map_err(|err| invalid("initial", err.to_string()))?;
        if matches!(e, Simulate | Chaos | EulerRate | Picard) {
            builtin_model(&self.model, &self.params).map_err(|err| invalid("model", err.to_string()))?;
        }
        if matches!(e, Simulate | Chaos | Picard) {
            let h = *self.h.get_or_insert(DEFAULT_STEP);
            SimGrid::new(self.horizon, h).map_err(|err| invalid("h", err.to_string()))?;
        }
        if matches!(e, Chaos | EulerRate | FgRate) && self.replications < 2 {
            return Err(invalid("R", "at least 2 replications are needed for a standard error"));
        }
        if matches!(e, Chaos | EulerRate) && self.p != 1 && self.p != 2 {
            return Err(invalid("p", "only p = 1 or p = 2 is supported"));
        }
        match e {
            Simulate => {
                let n = require(self.n, "N")?;
                at_least("N", n, 1)?;
            }
            Chaos | FgRate => {
                let list = require(self.n_list.as_ref(), "N_list")?;
                if list.is_empty() || list.contains(&0) {
                    return Err(invalid("N_list", "particle counts must be positive"));
                }
                if e == FgRate && list.len() < 3 {
                    return Err(invalid("N_list", "a rate fit needs at least 3 sizes"));
                }
                if let Some(m) = self.m {
                    at_least("M", m, 2)?;
                }
            }
            EulerRate => {
                let n = *self.n.get_or_insert(DEFAULT_EULER_N);
                at_least("N", n, 1)?;
                let list = require(self.h_list.as_ref(), "h_list")?.clone();
                if list.is_empty() {
                    return Err(invalid("h_list", "needs at least one step"));
                }
                let min = list.iter().copied().fold(f64::INFINITY, f64::min);
                let h_ref = *self.h_ref.get_or_insert(min / 8.0);
                let fine = SimGrid::new(self.horizon, h_ref).map_err(|err| invalid("h_ref", err.to_string()))?;
                if !(h_ref < min / 4.0) {
                    return Err(invalid("h_ref", format!("must be below min(h_list)/4 = {}", min / 4.0)));
                }
                for h in list {
                    let g = SimGrid::new(self.horizon, h).map_err(|err| invalid("h_list", err.to_string()))?;
                    if g.dyadic_ratio(&fine).is_none() {
                        return Err(invalid("h_list", format!("{h} is not a power-of-two multiple of h_ref = {h_ref}")));
                    }
                }
                self.reference_mode.get_or_insert(Mode::Continuous);
            }
            Picard => {
                let m = match (self.m, self.n) {
                    (Some(m), _) => m,
                    (None, Some(n)) => POOL_FACTOR * n,
                    (None, None) => return Err(invalid("M", "picard needs a pool size M (or N, giving M = 64·N)")),
                };
                at_least("M", m, 2)?;
                self.m = Some(m);
                let tol = *self.tol.get_or_insert(DEFAULT_TOL);
                if !(tol > 0.0) {
                    return Err(invalid("tol", "must be positive"));
                }
                at_least("k_max", *self.k_max.get_or_insert(DEFAULT_K_MAX), 1)?;
            }
            YwCheck => {
                at_least("probes", *self.probes.get_or_insert(DEFAULT_PROBES), 1)?;
                let [lo, hi] = *self.eps_range.get_or_insert(DEFAULT_EPS_RANGE);
                if !(lo > 0.0 && lo < hi && hi < 1.0) {
                    return Err(invalid("eps_range", "need 0 < lo < hi < 1"));
                }
            }
            Wasserstein => {
                if !(self.p >= 1) {
                    return Err(invalid("p", "must be at least 1"));
                }
                if self.clouds.is_none() {
                    at_least("pairs", *self.pairs.get_or_insert(DEFAULT_PAIRS), 1)?;
                    let k = *self.max_atoms.get_or_insert(DEFAULT_MAX_ATOMS);
                    if !(1..=8).contains(&k) {
                        return Err(invalid("max_atoms", "the permutation oracle handles 1..=8 atoms"));
                    }
                }
            }
        }
        Ok(self)
    }
}

fn invalid(field: &str, message: impl Into<String>) -> CliError {
    CliError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

fn require<T>(v: Option<T>, field: &str) -> Result<T, CliError> {
    v.ok_or_else(|| invalid(field, "required for this experiment"))
}

fn positive(field: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive and finite, got {v}")))
    }
}

fn at_least(field: &str, v: usize, min: usize) -> Result<(), CliError> {
    if v >= min {
        Ok(())
    } else {
        Err(invalid(field, format!("must be at least {min}, got {v}")))
    }
}

/// Parses and resolves a TOML run description.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let raw: RunConfig = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    raw.resolve()
}
