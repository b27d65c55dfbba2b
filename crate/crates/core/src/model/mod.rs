//! Jump-type McKean-Vlasov models
//!
//! ```text
//! dX = (b1 + b2)(X, μ) dt + σ(X) dW + ∫ f0(X-, μ, u) Ñ0(dt, du) + ∫ f1(X-, μ, u) N1(dt, du)
//! ```
//!
//! with finite mark measures ν0 and ν1. The compensated ν0-integral is
//! realized as the raw jumps minus the drift `∫ f0(x, μ, u) ν0(du)`.

mod builtin;
mod initial;
mod marks;
mod validate;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::measure::EmpiricalMeasure;

pub use builtin::{builtin_model, BuiltinModel, Params};
pub use initial::InitialLaw;
pub use marks::{Integral, MarkFamily, MarkMeasure, Quadrature};
pub use validate::{validate_assumptions, AssumptionCheck, ProbePlan, ValidationReport};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("unknown model {0:?} (expected M_OU, M_HOLDER or M_CHAOS)")]
    UnknownModel(String),
    #[error("parameter {name} = {value} out of range: {reason}")]
    BadParameter {
        name: String,
        value: f64,
        reason: String,
    },
    #[error("unknown parameter {param:?} for model {model}")]
    UnknownParameter { model: String, param: String },
    #[error("invalid mark measure: {0}")]
    BadMarks(String),
    #[error("continuous marks need a declared quadrature rule")]
    MissingQuadrature,
    #[error("non-finite coefficient {coefficient} at probe {probe}")]
    NonFinite { coefficient: String, probe: String },
    #[error("invalid initial law: {0}")]
    BadInitialLaw(String),
}

pub type DriftFn = Arc<dyn Fn(f64, &EmpiricalMeasure) -> f64 + Send + Sync>;
pub type DiffusionFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type JumpFn = Arc<dyn Fn(f64, &EmpiricalMeasure, f64) -> f64 + Send + Sync>;

/// Declared constants of the growth and continuity assumptions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AssumptionConstants {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
}

impl Default for AssumptionConstants {
    fn default() -> Self {
        Self {
            k1: 1.0,
            k2: 1.0,
            k3: 1.0,
            m1: 1.0,
            m2: 1.0,
            m3: 1.0,
        }
    }
}

/// Immutable model description; cheap to clone and safe to share across threads.
#[derive(Clone)]
pub struct ModelSpec {
    name: String,
    b1: DriftFn,
    b2: DriftFn,
    sigma: DiffusionFn,
    f0: JumpFn,
    f1: JumpFn,
    nu0: MarkMeasure,
    nu1: MarkMeasure,
    alpha: f64,
    beta: f64,
    constants: AssumptionConstants,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("nu0", &self.nu0)
            .field("nu1", &self.nu1)
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .field("constants", &self.constants)
            .finish_non_exhaustive()
    }
}

impl ModelSpec {
    pub fn builder(name: impl Into<String>) -> ModelBuilder {
        ModelBuilder::new(name)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn b1(&self, x: f64, mu: &EmpiricalMeasure) -> f64 {
        (self.b1)(x, mu)
    }

    pub fn b2(&self, x: f64, mu: &EmpiricalMeasure) -> f64 {
        (self.b2)(x, mu)
    }

    pub fn drift(&self, x: f64, mu: &EmpiricalMeasure) -> f64 {
        self.b1(x, mu) + self.b2(x, mu)
    }

    pub fn sigma(&self, x: f64) -> f64 {
        (self.sigma)(x)
    }

    pub fn f0(&self, x: f64, mu: &EmpiricalMeasure, u: f64) -> f64 {
        (self.f0)(x, mu, u)
    }

    pub fn f1(&self, x: f64, mu: &EmpiricalMeasure, u: f64) -> f64 {
        (self.f1)(x, mu, u)
    }

    pub fn nu0(&self) -> &MarkMeasure {
        &self.nu0
    }

    pub fn nu1(&self) -> &MarkMeasure {
        &self.nu1
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn constants(&self) -> &AssumptionConstants {
        &self.constants
    }
}

/// `∫ f0(x, μ, u) ν0(du)`, the drift removed by compensating the ν0 jumps.
pub fn compensator_integral(
    model: &ModelSpec,
    x: f64,
    mu: &EmpiricalMeasure,
) -> Result<Integral, ModelError> {
    model.nu0.integrate(|u| model.f0(x, mu, u))
}

pub struct ModelBuilder {
    spec: ModelSpec,
}

impl ModelBuilder {
    fn new(name: impl Into<String>) -> Self {
        Self {
            spec: ModelSpec {
                name: name.into(),
                b1: Arc::new(|_, _| 0.0),
                b2: Arc::new(|_, _| 0.0),
                sigma: Arc::new(|_| 0.0),
                f0: Arc::new(|_, _, _| 0.0),
                f1: Arc::new(|_, _, _| 0.0),
                nu0: MarkMeasure::none(),
                nu1: MarkMeasure::none(),
                alpha: 1.0,
                beta: 1.0,
                constants: AssumptionConstants::default(),
            },
        }
    }

    pub fn b1(mut self, f: impl Fn(f64, &EmpiricalMeasure) -> f64 + Send + Sync + 'static) -> Self {
        self.spec.b1 = Arc::new(f);
        self
    }

    pub fn b2(mut self, f: impl Fn(f64, &EmpiricalMeasure) -> f64 + Send + Sync + 'static) -> Self {
        self.spec.b2 = Arc::new(f);
        self
    }

    pub fn sigma(mut self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.spec.sigma = Arc::new(f);
        self
    }

    pub fn f0(
        mut self,
        f: impl Fn(f64, &EmpiricalMeasure, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.spec.f0 = Arc::new(f);
        self
    }

    pub fn f1(
        mut self,
        f: impl Fn(f64, &EmpiricalMeasure, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.spec.f1 = Arc::new(f);
        self
    }

    pub fn nu0(mut self, m: MarkMeasure) -> Self {
        self.spec.nu0 = m;
        self
    }

    pub fn nu1(mut self, m: MarkMeasure) -> Self {
        self.spec.nu1 = m;
        self
    }

    pub fn exponents(mut self, alpha: f64, beta: f64) -> Self {
        self.spec.alpha = alpha;
        self.spec.beta = beta;
        self
    }

    pub fn constants(mut self, c: AssumptionConstants) -> Self {
        self.spec.constants = c;
        self
    }

    pub fn build(self) -> Result<ModelSpec, ModelError> {
        let s = &self.spec;
        let bad = |name: &str, value: f64, reason: &str| ModelError::BadParameter {
            name: name.into(),
            value,
            reason: reason.into(),
        };
        if !(0.5..=1.0).contains(&s.alpha) {
            return Err(bad("alpha", s.alpha, "must lie in [1/2, 1]"));
        }
        if !(s.beta > 0.0 && s.beta <= 1.0) {
            return Err(bad("beta", s.beta, "must lie in (0, 1]"));
        }
        let c = &s.constants;
        for (name, v) in [
            ("K1", c.k1),
            ("K2", c.k2),
            ("K3", c.k3),
            ("M1", c.m1),
            ("M2", c.m2),
            ("M3", c.m3),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(bad(name, v, "constants must be positive and finite"));
            }
        }
        Ok(self.spec)
    }
}
