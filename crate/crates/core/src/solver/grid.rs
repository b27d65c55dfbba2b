use serde::{Deserialize, Serialize};

use super::SolverError;

/// Uniform time grid `0, h, 2h, …` on `[0, T]`; the last point is clipped
/// to `T` when `h` does not divide it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimGrid {
    horizon: f64,
    step: f64,
    steps: usize,
}

impl SimGrid {
    pub fn new(horizon: f64, step: f64) -> Result<Self, SolverError> {
        if !(horizon > 0.0 && horizon.is_finite()) || !(step > 0.0 && step < 1.0) {
            return Err(SolverError::BadGrid { horizon, step });
        }
        // tolerate T/h landing a hair above an integer
        let steps = (horizon / step - 1e-9).ceil().max(1.0) as usize;
        Ok(Self {
            horizon,
            step,
            steps,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn time(&self, k: usize) -> f64 {
        if k >= self.steps {
            self.horizon
        } else {
            k as f64 * self.step
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }

    /// `t_h = ⌊t/h⌋·h`.
    pub fn project(&self, t: f64) -> f64 {
        (t / self.step).floor() * self.step
    }

    /// The grid with step `h / factor`.
    pub fn refine(&self, factor: usize) -> Result<Self, SolverError> {
        Self::new(self.horizon, self.step / factor as f64)
    }

    /// `h / h_fine` when it is a power of two and both grids share `T`.
    pub fn dyadic_ratio(&self, fine: &SimGrid) -> Option<usize> {
        if self.horizon != fine.horizon {
            return None;
        }
        let r = self.step / fine.step;
        let k = r.log2().round();
        ((0.0..63.0).contains(&k) && self.step == fine.step * 2f64.powi(k as i32)).then(|| 1usize << k as u32)
    }
}
