use serde::{Deserialize, Serialize};

use super::StudyError;

/// One point of a convergence study: a Monte Carlo estimate of
/// `E[sup_t |Z_t|^p]` (or of a transport cost) at one parameter value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorSample {
    /// `N` or `h`.
    pub param: f64,
    pub replications: usize,
    pub estimate: f64,
    pub se: f64,
    pub p: u32,
}

impl ErrorSample {
    /// Mean and standard error of per-replication statistics.
    pub fn from_replications(param: f64, p: u32, stats: &[f64]) -> Result<Self, StudyError> {
        let r = stats.len();
        if r < 2 {
            return Err(StudyError::TooFewReplications(r));
        }
        let mean = stats.iter().sum::<f64>() / r as f64;
        let var = stats.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (r - 1) as f64;
        Ok(Self {
            param,
            replications: r,
            estimate: mean,
            se: (var / r as f64).sqrt(),
            p,
        })
    }
}

/// Least-squares line through `(ln param, ln estimate)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS of the log-space residuals.
    pub residual: f64,
    /// Number of samples used.
    pub used: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub samples: Vec<ErrorSample>,
    /// `None` when fewer than three samples were positive.
    pub fit: Option<RateFit>,
    pub theory_slope: Option<f64>,
    pub theory_source: String,
    pub notes: Vec<String>,
}

impl RateReport {
    pub fn slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }

    pub fn with_theory(mut self, slope: f64, source: impl Into<String>) -> Self {
        self.theory_slope = Some(slope);
        self.theory_source = source.into();
        self
    }
}

/// Ordinary least squares on logs. Zero estimates are dropped with a note.
pub fn fit_rate(samples: &[ErrorSample]) -> Result<RateReport, StudyError> {
    let mut notes = Vec::new();
    let mut pts = Vec::with_capacity(samples.len());
    for s in samples {
        if s.estimate > 0.0 && s.param > 0.0 {
            pts.push((s.param.ln(), s.estimate.ln()));
        } else {
            notes.push(format!("excluded param {} (estimate {})", s.param, s.estimate));
        }
    }
    if pts.len() < 3 {
        return Err(StudyError::TooFewPositive(pts.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(StudyError::DegenerateFit);
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(RateReport {
        samples: samples.to_vec(),
        fit: Some(RateFit {
            slope,
            intercept,
            residual,
            used: pts.len(),
        }),
        theory_slope: None,
        theory_source: String::new(),
        notes,
    })
}

/// Whether estimates never rise by more than `slack` standard errors
/// (the larger of the two neighbours') from one sample to the next.
pub fn is_nonincreasing(samples: &[ErrorSample], slack: f64) -> bool {
    samples
        .windows(2)
        .all(|w| w[1].estimate <= w[0].estimate + slack * w[0].se.max(w[1].se))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(param: f64, estimate: f64) -> ErrorSample {
        ErrorSample {
            param,
            replications: 2,
            estimate,
            se: 0.0,
            p: 2,
        }
    }

    #[test]
    fn exact_power_laws() {
        let r = fit_rate(&[sample(1.0, 1.0), sample(2.0, 2.0), sample(4.0, 4.0)]).unwrap();
        let f = r.fit.unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12);
        assert!(f.residual < 1e-12);
        let r = fit_rate(&[sample(1.0, 3.0), sample(2.0, 3.0), sample(4.0, 3.0)]).unwrap();
        assert!(r.slope().unwrap().abs() < 1e-12);
    }

    #[test]
    fn noisy_square_root() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s: Vec<_> = (0..8)
            .map(|k| {
                let x = 2f64.powi(k);
                sample(x, 0.7 * x.sqrt() * (1.0 + 0.01 * (2.0 * rng.random::<f64>() - 1.0)))
            })
            .collect();
        let slope = fit_rate(&s).unwrap().slope().unwrap();
        assert!((0.45..=0.55).contains(&slope), "{slope}");
    }

    #[test]
    fn zeros_are_excluded_with_a_note() {
        let s = [sample(1.0, 0.0), sample(2.0, 1.0), sample(4.0, 0.5), sample(8.0, 0.25)];
        let r = fit_rate(&s).unwrap();
        assert_eq!(r.fit.unwrap().used, 3);
        assert_eq!(r.notes.len(), 1);
        assert_eq!(
            fit_rate(&[sample(1.0, 0.0), sample(2.0, 1.0), sample(4.0, 1.0)]),
            Err(StudyError::TooFewPositive(2))
        );
        assert_eq!(fit_rate(&[sample(1.0, 1.0), sample(2.0, 1.0)]), Err(StudyError::TooFewPositive(2)));
    }

    #[test]
    fn replication_statistics() {
        let s = ErrorSample::from_replications(8.0, 2, &[1.0, 3.0]).unwrap();
        assert_eq!(s.estimate, 2.0);
        assert!((s.se - 1.0).abs() < 1e-15);
        assert_eq!(ErrorSample::from_replications(8.0, 2, &[1.0]), Err(StudyError::TooFewReplications(1)));
    }

    #[test]
    fn monotone_check_uses_slack() {
        let mut s = vec![sample(8.0, 1.0), sample(32.0, 1.05), sample(128.0, 0.5)];
        assert!(!is_nonincreasing(&s, 2.0));
        s[1].se = 0.03;
        assert!(is_nonincreasing(&s, 2.0));
    }
}
