//! Uniform empirical measures on the real line.
//!
//! On the line the optimal coupling between two equal-size uniform clouds is
//! the monotone one, so Wasserstein distances reduce to matching order
//! statistics. [`wasserstein_oracle`] minimizes over every permutation
//! instead and exists to cross-check that shortcut.

use std::io::{Read, Write};

use itertools::Itertools;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MeasureError {
    #[error("empirical measure needs at least one atom")]
    Empty,
    #[error("atom {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("exponent p must be positive, got {0}")]
    BadExponent(f64),
    #[error("clouds of sizes {0} and {1} are not comparable (equal sizes or one Dirac required)")]
    SizeMismatch(usize, usize),
    #[error("permutation oracle refused for n = {0} (limit 8)")]
    OracleTooLarge(usize),
    #[error("cloud csv: {0}")]
    Csv(String),
}

/// A uniform probability measure `(1/n) Σ δ_{x_i}` with sorted atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMeasure {
    atoms: Vec<f64>,
    // cached: mean-field coefficients query it once per particle
    mean: f64,
}

impl EmpiricalMeasure {
    pub fn new(mut atoms: Vec<f64>) -> Result<Self, MeasureError> {
        if atoms.is_empty() {
            return Err(MeasureError::Empty);
        }
        if let Some((index, &value)) = atoms.iter().find_position(|x| !x.is_finite()) {
            return Err(MeasureError::NonFinite { index, value });
        }
        // stable: ties keep input order, cost is unaffected
        atoms.sort_by(f64::total_cmp);
        Ok(Self::from_sorted(atoms))
    }

    /// The Dirac mass at `x`.
    pub fn dirac(x: f64) -> Self {
        Self::from_sorted(vec![x])
    }

    fn from_sorted(atoms: Vec<f64>) -> Self {
        // summed in sorted order, so the mean ignores input permutation
        let mean = atoms.iter().sum::<f64>() / atoms.len() as f64;
        Self { atoms, mean }
    }

    pub fn dirac_zero() -> Self {
        Self::dirac(0.0)
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_dirac(&self) -> bool {
        self.atoms.len() == 1
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.atoms.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / self.len() as f64
    }

    pub fn translate(&self, c: f64) -> Self {
        Self::from_sorted(self.atoms.iter().map(|x| x + c).collect())
    }

    /// Writes one atom per row under a `position` header.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), MeasureError> {
        let mut wtr = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| MeasureError::Csv(e.to_string());
        wtr.write_record(["position"]).map_err(csv_err)?;
        for x in &self.atoms {
            wtr.write_record([x.to_string()]).map_err(csv_err)?;
        }
        wtr.flush().map_err(|e| MeasureError::Csv(e.to_string()))
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, MeasureError> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut atoms = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| MeasureError::Csv(e.to_string()))?;
            let field = rec.get(0).unwrap_or("");
            let x: f64 = field
                .trim()
                .parse()
                .map_err(|_| MeasureError::Csv(format!("bad position {field:?}")))?;
            atoms.push(x);
        }
        Self::new(atoms)
    }
}

fn check_exponent(p: f64) -> Result<(), MeasureError> {
    if p > 0.0 && p.is_finite() {
        Ok(())
    } else {
        Err(MeasureError::BadExponent(p))
    }
}

/// Applies the outer `1/(1 ∨ p)` root to an averaged transport cost.
fn finish(cost: f64, p: f64) -> f64 {
    if p >= 1.0 {
        cost.powf(1.0 / p)
    } else {
        cost
    }
}

/// `(1/n) Σ |x_i|^p`.
pub fn moment(mu: &EmpiricalMeasure, p: f64) -> Result<f64, MeasureError> {
    check_exponent(p)?;
    Ok(mu.atoms.iter().map(|x| x.abs().powf(p)).sum::<f64>() / mu.len() as f64)
}

/// `W_p(μ, δ_0)`.
pub fn distance_to_dirac0(mu: &EmpiricalMeasure, p: f64) -> Result<f64, MeasureError> {
    Ok(finish(moment(mu, p)?, p))
}

/// Exact `W_p` between equal-size clouds, or between a cloud and a Dirac.
pub fn wasserstein_p(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    p: f64,
) -> Result<f64, MeasureError> {
    check_exponent(p)?;
    let cost = if mu.len() == nu.len() {
        mu.atoms
            .iter()
            .zip(&nu.atoms)
            .map(|(x, y)| (x - y).abs().powf(p))
            .sum::<f64>()
            / mu.len() as f64
    } else if nu.is_dirac() {
        dirac_cost(mu, nu.atoms[0], p)
    } else if mu.is_dirac() {
        dirac_cost(nu, mu.atoms[0], p)
    } else {
        return Err(MeasureError::SizeMismatch(mu.len(), nu.len()));
    };
    Ok(finish(cost, p))
}

fn dirac_cost(mu: &EmpiricalMeasure, at: f64, p: f64) -> f64 {
    mu.atoms.iter().map(|x| (x - at).abs().powf(p)).sum::<f64>() / mu.len() as f64
}

/// Transport cost of the identity pairing `x_i ↔ y_i` on unsorted samples.
///
/// Always an upper bound for `W_p(μ,ν)^p` of the corresponding clouds.
pub fn pairing_cost(xs: &[f64], ys: &[f64], p: f64) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    xs.iter()
        .zip(ys)
        .map(|(x, y)| (x - y).abs().powf(p))
        .sum::<f64>()
        / xs.len() as f64
}

/// Brute-force `W_p` over all `n!` permutation couplings. Test oracle only.
pub fn wasserstein_oracle(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    p: f64,
) -> Result<f64, MeasureError> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(MeasureError::BadExponent(p));
    }
    let n = mu.len();
    if n != nu.len() {
        return Err(MeasureError::SizeMismatch(n, nu.len()));
    }
    if n > 8 {
        return Err(MeasureError::OracleTooLarge(n));
    }
    let best = (0..n)
        .permutations(n)
        .map(|perm| {
            perm.iter()
                .enumerate()
                .map(|(i, &j)| (mu.atoms[i] - nu.atoms[j]).abs().powf(p))
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    Ok(finish(best / n as f64, p))
}
