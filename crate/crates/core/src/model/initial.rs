use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use super::ModelError;

/// Law of the initial condition ξ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialLaw {
    PointMass { at: f64 },
    Normal { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl Default for InitialLaw {
    fn default() -> Self {
        InitialLaw::Normal { mean: 1.0, sd: 0.5 }
    }
}

impl InitialLaw {
    pub fn validate(&self) -> Result<(), ModelError> {
        let ok = match *self {
            InitialLaw::PointMass { at } => at.is_finite(),
            InitialLaw::Normal { mean, sd } => mean.is_finite() && sd > 0.0 && sd.is_finite(),
            InitialLaw::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
        };
        if ok {
            Ok(())
        } else {
            Err(ModelError::BadInitialLaw(format!("{self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            InitialLaw::PointMass { at } => at,
            InitialLaw::Normal { mean, sd } => Normal::new(mean, sd).unwrap().sample(rng),
            InitialLaw::Uniform { lo, hi } => rng.random_range(lo..hi),
        }
    }

    /// Every shipped family has moments of all orders.
    pub fn has_finite_moment(&self, _q: f64) -> bool {
        true
    }

    /// `E|ξ|^p` where a closed form is available.
    pub fn moment(&self, p: f64) -> Option<f64> {
        match *self {
            InitialLaw::PointMass { at } => Some(at.abs().powf(p)),
            InitialLaw::Normal { mean: 0.0, sd } => Some(
                sd.powf(p) * 2f64.powf(p / 2.0) * gamma((p + 1.0) / 2.0)
                    / std::f64::consts::PI.sqrt(),
            ),
            InitialLaw::Normal { mean, sd } if p == 2.0 => Some(mean * mean + sd * sd),
            InitialLaw::Normal { mean, sd } if p == 4.0 => {
                let (m2, s2) = (mean * mean, sd * sd);
                Some(m2 * m2 + 6.0 * m2 * s2 + 3.0 * s2 * s2)
            }
            InitialLaw::Normal { .. } => None,
            InitialLaw::Uniform { lo, hi } => {
                let prim = |x: f64| x.signum() * x.abs().powf(p + 1.0) / (p + 1.0);
                Some((prim(hi) - prim(lo)) / (hi - lo))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mc_moment(law: InitialLaw, p: f64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 400_000;
        (0..n).map(|_| law.sample(&mut rng).abs().powf(p)).sum::<f64>() / n as f64
    }

    #[test]
    fn closed_form_moments_match_monte_carlo() {
        for (law, p) in [
            (InitialLaw::Normal { mean: 0.0, sd: 1.5 }, 1.0),
            (InitialLaw::Normal { mean: 0.0, sd: 1.0 }, 3.0),
            (InitialLaw::Normal { mean: 1.0, sd: 0.5 }, 2.0),
            (InitialLaw::Normal { mean: 1.0, sd: 0.5 }, 4.0),
            (InitialLaw::Uniform { lo: -1.0, hi: 2.0 }, 2.5),
        ] {
            let exact = law.moment(p).unwrap();
            let mc = mc_moment(law, p);
            assert!((mc - exact).abs() < 0.02 * exact, "{law:?} p={p}: {mc} vs {exact}");
        }
        assert_eq!(InitialLaw::PointMass { at: -2.0 }.moment(3.0), Some(8.0));
        assert_eq!(InitialLaw::Normal { mean: 1.0, sd: 1.0 }.moment(3.0), None);
    }

    #[test]
    fn validation() {
        assert!(InitialLaw::Normal { mean: 0.0, sd: 0.0 }.validate().is_err());
        assert!(InitialLaw::Uniform { lo: 1.0, hi: 0.0 }.validate().is_err());
        assert!(InitialLaw::default().validate().is_ok());
    }
}
