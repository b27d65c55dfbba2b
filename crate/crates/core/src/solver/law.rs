use super::{simulate_interacting, SolverError, Stepping, Trajectory};
use crate::drivers::DriverBundle;
use crate::exec::Execution;
use crate::measure::{wasserstein_p, EmpiricalMeasure};
use crate::model::ModelSpec;

/// A time-indexed family of equal-size clouds standing in for `μ_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct LawFlow {
    times: Vec<f64>,
    measures: Vec<EmpiricalMeasure>,
}

impl LawFlow {
    pub fn new(times: Vec<f64>, measures: Vec<EmpiricalMeasure>) -> Result<Self, SolverError> {
        if times.is_empty() || times.len() != measures.len() {
            return Err(SolverError::BadLawFlow("need one cloud per checkpoint".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SolverError::BadLawFlow("checkpoints must increase".into()));
        }
        let m = measures[0].len();
        if measures.iter().any(|mu| mu.len() != m) {
            return Err(SolverError::BadLawFlow("pool size varies across checkpoints".into()));
        }
        Ok(Self { times, measures })
    }

    /// The same cloud at every checkpoint.
    pub fn constant(measure: EmpiricalMeasure, times: Vec<f64>) -> Result<Self, SolverError> {
        let measures = vec![measure; times.len()];
        Self::new(times, measures)
    }

    /// Snapshots of a simulated cloud at every output point.
    pub fn from_trajectory(traj: Trajectory) -> Result<Self, SolverError> {
        let measures = traj
            .positions
            .into_iter()
            .map(EmpiricalMeasure::new)
            .collect::<Result<_, _>>()?;
        Self::new(traj.times, measures)
    }

    /// Law surrogate from an interacting pool of `pool_size` particles driven
    /// by `bundle` (which should be independent of the system it feeds).
    pub fn from_pool(
        model: &ModelSpec,
        pool_size: usize,
        stepping: &Stepping,
        bundle: &DriverBundle,
        exec: Execution,
    ) -> Result<Self, SolverError> {
        if pool_size < 2 {
            return Err(SolverError::BadPoolSize(pool_size));
        }
        Self::from_trajectory(simulate_interacting(model, pool_size, stepping, bundle, exec)?)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn measures(&self) -> &[EmpiricalMeasure] {
        &self.measures
    }

    pub fn pool_size(&self) -> usize {
        self.measures[0].len()
    }

    /// The cloud at the checkpoint nearest to `t` (earlier one on ties).
    pub fn at(&self, t: f64) -> Result<&EmpiricalMeasure, SolverError> {
        let (first, last) = (self.times[0], *self.times.last().unwrap());
        let slack = 1e-9 * last.abs().max(1.0);
        if !(t >= first - slack && t <= last + slack) {
            return Err(SolverError::MissingCheckpoint { time: t });
        }
        let j = self.times.partition_point(|&c| c < t);
        let k = if j == 0 {
            0
        } else if j == self.times.len() || t - self.times[j - 1] <= self.times[j] - t {
            j - 1
        } else {
            j
        };
        Ok(&self.measures[k])
    }

    /// `sup_k W₂(μ_k, ν_k)` over shared checkpoints.
    pub fn sup_w2(&self, other: &LawFlow) -> Result<f64, SolverError> {
        if self.times != other.times {
            return Err(SolverError::Incomparable);
        }
        let mut sup = 0.0f64;
        for (a, b) in self.measures.iter().zip(&other.measures) {
            sup = sup.max(wasserstein_p(a, b, 2.0)?);
        }
        Ok(sup)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flow() -> LawFlow {
        let ms = (0..3).map(|k| EmpiricalMeasure::new(vec![k as f64, k as f64 + 1.0]).unwrap()).collect();
        LawFlow::new(vec![0.0, 0.5, 1.0], ms).unwrap()
    }

    #[test]
    fn nearest_checkpoint_lookup() {
        let f = flow();
        assert_eq!(f.at(0.0).unwrap().atoms(), &[0.0, 1.0]);
        assert_eq!(f.at(0.2).unwrap().atoms(), &[0.0, 1.0]);
        assert_eq!(f.at(0.25).unwrap().atoms(), &[0.0, 1.0]);
        assert_eq!(f.at(0.3).unwrap().atoms(), &[1.0, 2.0]);
        assert_eq!(f.at(1.0).unwrap().atoms(), &[2.0, 3.0]);
        assert!(matches!(f.at(1.5), Err(SolverError::MissingCheckpoint { .. })));
        assert!(f.at(-0.1).is_err());
    }

    #[test]
    fn rejects_malformed_flows() {
        let m = EmpiricalMeasure::dirac(0.0);
        assert!(LawFlow::new(vec![], vec![]).is_err());
        assert!(LawFlow::new(vec![0.0, 0.0], vec![m.clone(), m.clone()]).is_err());
        let two = EmpiricalMeasure::new(vec![0.0, 1.0]).unwrap();
        assert!(LawFlow::new(vec![0.0, 1.0], vec![m, two]).is_err());
    }

    #[test]
    fn sup_w2_of_translated_flow() {
        let f = flow();
        let g = LawFlow::new(
            f.times().to_vec(),
            f.measures().iter().enumerate().map(|(k, m)| m.translate(0.1 * k as f64)).collect(),
        )
        .unwrap();
        assert!((f.sup_w2(&g).unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(f.sup_w2(&f).unwrap(), 0.0);
    }
}
