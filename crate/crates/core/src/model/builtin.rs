use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::{AssumptionConstants, MarkMeasure, ModelError, ModelSpec};

pub type Params = BTreeMap<String, f64>;

/// Relative slack on the analytically derived constants so that floating-point
/// rounding in the probes cannot push an equality case above the bound.
const HEADROOM: f64 = 1.0 + 1e-9;
const FLOOR: f64 = 1e-12;

fn declared(v: f64) -> f64 {
    if v > 0.0 {
        v * HEADROOM
    } else {
        FLOOR
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BuiltinModel {
    /// Linear mean-field OU with symmetric unit jumps.
    Ou,
    /// Hölder diffusion and Hölder monotone drift.
    Holder,
    /// The OU model with a nonzero mean-field coupling enforced.
    Chaos,
}

impl BuiltinModel {
    pub fn name(self) -> &'static str {
        match self {
            BuiltinModel::Ou => "M_OU",
            BuiltinModel::Holder => "M_HOLDER",
            BuiltinModel::Chaos => "M_CHAOS",
        }
    }

    fn defaults(self) -> &'static [(&'static str, f64)] {
        match self {
            BuiltinModel::Ou => &[
                ("a", 1.0),
                ("c", 0.5),
                ("s", 0.2),
                ("g0", 0.1),
                ("g1", 0.1),
                ("lambda0", 1.0),
                ("lambda1", 1.0),
            ],
            BuiltinModel::Chaos => &[
                ("a", 1.0),
                ("c", 0.8),
                ("s", 0.5),
                ("g0", 0.2),
                ("g1", 0.2),
                ("lambda0", 1.0),
                ("lambda1", 1.0),
            ],
            BuiltinModel::Holder => &[
                ("alpha", 0.5),
                ("beta", 0.5),
                ("s", 0.5),
                ("c", 0.5),
                ("g0", 0.1),
                ("g1", 0.1),
                ("lambda0", 1.0),
                ("lambda1", 1.0),
                ("r_clip", 1e6),
            ],
        }
    }
}

impl FromStr for BuiltinModel {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "M_OU" => Ok(BuiltinModel::Ou),
            "M_HOLDER" => Ok(BuiltinModel::Holder),
            "M_CHAOS" => Ok(BuiltinModel::Chaos),
            other => Err(ModelError::UnknownModel(other.to_string())),
        }
    }
}

impl fmt::Display for BuiltinModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

struct Resolved<'a> {
    model: BuiltinModel,
    values: BTreeMap<&'a str, f64>,
}

impl Resolved<'_> {
    fn get(&self, key: &str) -> f64 {
        self.values[key]
    }

    fn require(&self, key: &str, ok: impl Fn(f64) -> bool, reason: &str) -> Result<f64, ModelError> {
        let v = self.get(key);
        if v.is_finite() && ok(v) {
            Ok(v)
        } else {
            Err(ModelError::BadParameter {
                name: format!("{}.{key}", self.model),
                value: v,
                reason: reason.into(),
            })
        }
    }
}

fn resolve(model: BuiltinModel, params: &Params) -> Result<Resolved<'static>, ModelError> {
    let mut values: BTreeMap<&'static str, f64> = model.defaults().iter().copied().collect();
    for (k, v) in params {
        match values.get_mut(k.as_str()) {
            Some(slot) => *slot = *v,
            None => {
                return Err(ModelError::UnknownParameter {
                    model: model.name().into(),
                    param: k.clone(),
                })
            }
        }
    }
    Ok(Resolved { model, values })
}

/// Instantiates one of the shipped models; unspecified parameters take their defaults.
pub fn builtin_model(name: &str, params: &Params) -> Result<ModelSpec, ModelError> {
    let kind: BuiltinModel = name.parse()?;
    let r = resolve(kind, params)?;
    let any = |_: f64| true;
    let nonneg = |v: f64| v >= 0.0;

    let c = r.require("c", any, "must be finite")?;
    let s = r.require("s", nonneg, "diffusion scale must be nonnegative")?;
    let g0 = r.require("g0", any, "must be finite")?;
    let g1 = r.require("g1", any, "must be finite")?;
    let lambda0 = r.require("lambda0", nonneg, "jump intensity must be nonnegative")?;
    let lambda1 = r.require("lambda1", nonneg, "jump intensity must be nonnegative")?;
    if kind == BuiltinModel::Chaos && c == 0.0 {
        return Err(ModelError::BadParameter {
            name: "M_CHAOS.c".into(),
            value: c,
            reason: "the chaos model needs a nonzero mean-field coupling".into(),
        });
    }

    let jump_m2 = lambda0 * g0.abs().min(g0 * g0);
    let jump_m3 = lambda1 * g1.abs();

    let builder = ModelSpec::builder(kind.name())
        .b2(move |_, mu| c * mu.mean())
        .f0(move |_, _, u| g0 * u)
        .f1(move |_, _, u| g1 * u)
        .nu0(MarkMeasure::symmetric_unit(lambda0)?)
        .nu1(MarkMeasure::symmetric_unit(lambda1)?);

    match kind {
        BuiltinModel::Ou | BuiltinModel::Chaos => {
            let a = r.require("a", nonneg, "b1 = -a x is non-increasing only for a >= 0")?;
            builder
                .b1(move |x, _| -a * x)
                .sigma(move |_| s)
                .exponents(1.0, 1.0)
                .constants(AssumptionConstants {
                    k1: declared(a.max(c.abs())),
                    k2: declared(0.0),
                    k3: declared(0.0),
                    m1: declared((2.0 * a * a).max(2.0 * c * c).max(s * s)),
                    m2: declared(jump_m2),
                    m3: declared(jump_m3),
                })
                .build()
        }
        BuiltinModel::Holder => {
            let alpha = r.require("alpha", |v| (0.5..=1.0).contains(&v), "must lie in [1/2, 1]")?;
            let beta = r.require("beta", |v| v > 0.0 && v <= 1.0, "must lie in (0, 1]")?;
            let r_clip = r.require("r_clip", |v| v > 0.0, "must be positive")?;
            builder
                .b1(move |x, _| -x.signum() * x.abs().powf(beta))
                .sigma(move |x| s * x.abs().min(r_clip).powf(alpha))
                .exponents(alpha, beta)
                .constants(AssumptionConstants {
                    // sgn(x)|x|^β is β-Hölder with constant 2^{1-β} (worst case y = -x)
                    k1: declared(2f64.powf(1.0 - beta).max(c.abs())),
                    k2: declared(s),
                    k3: declared(0.0),
                    m1: declared(2f64.max(2.0 * c * c).max(s * s)),
                    m2: declared(jump_m2),
                    m3: declared(jump_m3),
                })
                .build()
        }
    }
}
