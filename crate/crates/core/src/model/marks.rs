use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ModelError;

/// Normalized distribution of a continuous mark.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum MarkFamily {
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
}

impl MarkFamily {
    fn density(&self, u: f64) -> f64 {
        match *self {
            MarkFamily::Uniform { lo, hi } => {
                if (lo..=hi).contains(&u) {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            MarkFamily::Normal { mean, sd } => {
                let z = (u - mean) / sd;
                (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
            }
        }
    }

    /// Integration range; the normal is cut at eight standard deviations.
    fn range(&self) -> (f64, f64) {
        match *self {
            MarkFamily::Uniform { lo, hi } => (lo, hi),
            MarkFamily::Normal { mean, sd } => (mean - 8.0 * sd, mean + 8.0 * sd),
        }
    }
}

/// Composite Simpson rule with `panels` (even) subintervals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quadrature {
    pub panels: usize,
}

/// A value together with an estimate of its numerical error (0 when exact).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error_bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
enum Shape {
    Discrete {
        /// `(mark, weight)`; weights sum to the total mass.
        atoms: Vec<(f64, f64)>,
        /// cumulative weights normalized to 1, for sampling
        cdf: Vec<f64>,
    },
    Continuous {
        total_mass: f64,
        family: MarkFamily,
        quadrature: Option<Quadrature>,
    },
}

/// A finite mark measure ν on the real line.
///
/// Jump times driven by ν form a Poisson process of rate `ν(U)`, and marks are
/// i.i.d. draws from `ν / ν(U)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkMeasure {
    shape: Shape,
}

impl MarkMeasure {
    /// The zero measure: no jumps at all.
    pub fn none() -> Self {
        Self {
            shape: Shape::Discrete {
                atoms: Vec::new(),
                cdf: Vec::new(),
            },
        }
    }

    pub fn discrete(atoms: Vec<(f64, f64)>) -> Result<Self, ModelError> {
        for &(u, w) in &atoms {
            if !u.is_finite() || !(w > 0.0 && w.is_finite()) {
                return Err(ModelError::BadMarks(format!(
                    "atom ({u}, {w}) needs a finite mark and positive finite weight"
                )));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        let mut acc = 0.0;
        let cdf = atoms
            .iter()
            .map(|&(_, w)| {
                acc += w;
                acc / total
            })
            .collect();
        Ok(Self {
            shape: Shape::Discrete { atoms, cdf },
        })
    }

    /// Two atoms at `±1` with mass `rate/2` each.
    pub fn symmetric_unit(rate: f64) -> Result<Self, ModelError> {
        if rate == 0.0 {
            return Ok(Self::none());
        }
        Self::discrete(vec![(1.0, rate / 2.0), (-1.0, rate / 2.0)])
    }

    pub fn continuous(
        total_mass: f64,
        family: MarkFamily,
        quadrature: Option<Quadrature>,
    ) -> Result<Self, ModelError> {
        if !(total_mass >= 0.0 && total_mass.is_finite()) {
            return Err(ModelError::BadMarks(format!(
                "total mass {total_mass} must be finite and nonnegative"
            )));
        }
        let ok = match family {
            MarkFamily::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            MarkFamily::Normal { mean, sd } => mean.is_finite() && sd > 0.0 && sd.is_finite(),
        };
        if !ok {
            return Err(ModelError::BadMarks(format!("degenerate family {family:?}")));
        }
        if let Some(q) = quadrature {
            if q.panels < 2 || q.panels % 2 != 0 {
                return Err(ModelError::BadMarks(format!(
                    "Simpson rule needs an even panel count >= 2, got {}",
                    q.panels
                )));
            }
        }
        Ok(Self {
            shape: Shape::Continuous {
                total_mass,
                family,
                quadrature,
            },
        })
    }

    pub fn total_mass(&self) -> f64 {
        match &self.shape {
            Shape::Discrete { atoms, .. } => atoms.iter().map(|a| a.1).sum(),
            Shape::Continuous { total_mass, .. } => *total_mass,
        }
    }

    pub fn atoms(&self) -> Option<&[(f64, f64)]> {
        match &self.shape {
            Shape::Discrete { atoms, .. } => Some(atoms),
            Shape::Continuous { .. } => None,
        }
    }

    /// Draws one mark from the normalized measure.
    pub fn sample_mark<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.shape {
            Shape::Discrete { atoms, cdf } => {
                let u: f64 = rng.random();
                let k = cdf.partition_point(|&c| c <= u).min(atoms.len() - 1);
                atoms[k].0
            }
            Shape::Continuous { family, .. } => match *family {
                MarkFamily::Uniform { lo, hi } => rng.random_range(lo..hi),
                MarkFamily::Normal { mean, sd } => Normal::new(mean, sd).unwrap().sample(rng),
            },
        }
    }

    /// `∫ g(u) ν(du)`: an exact finite sum for discrete marks, Simpson with a
    /// Richardson error estimate for continuous ones.
    pub fn integrate<G: Fn(f64) -> f64>(&self, g: G) -> Result<Integral, ModelError> {
        match &self.shape {
            Shape::Discrete { atoms, .. } => Ok(Integral {
                value: atoms.iter().map(|&(u, w)| g(u) * w).sum(),
                error_bound: 0.0,
            }),
            Shape::Continuous {
                total_mass,
                family,
                quadrature,
            } => {
                let q = quadrature.ok_or(ModelError::MissingQuadrature)?;
                let (lo, hi) = family.range();
                let f = |u: f64| g(u) * family.density(u);
                let fine = simpson(&f, lo, hi, q.panels);
                let coarse = if q.panels >= 4 && q.panels % 4 == 0 {
                    simpson(&f, lo, hi, q.panels / 2)
                } else {
                    simpson(&f, lo, hi, q.panels * 2)
                };
                Ok(Integral {
                    value: total_mass * fine,
                    error_bound: total_mass * (fine - coarse).abs() / 15.0,
                })
            }
        }
    }
}

fn simpson<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, panels: usize) -> f64 {
    let h = (hi - lo) / panels as f64;
    let inner: f64 = (1..panels)
        .map(|k| {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            w * f(lo + k as f64 * h)
        })
        .sum();
    (f(lo) + f(hi) + inner) * h / 3.0
}
