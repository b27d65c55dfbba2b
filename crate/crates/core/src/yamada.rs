//! Yamada–Watanabe smoothing of `|x|`.
//!
//! The bump is `φ(z) = 1 / (z ln λ)` on `[ε/λ, ε]` and zero elsewhere. It
//! integrates to one, stays within half of the admissible bound
//! `2 / (z ln λ)`, and yields closed forms for `V`, `V'` and `V''`.
//! `V` is C¹ everywhere; `V''` jumps at the two knots and is reported with
//! the closed-interval convention there.
//!
//! `ln λ` is stored instead of `λ` because the usual choice `λ = e^{1/ε}`
//! overflows an `f64` once `ε < 1/709`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum YamadaError {
    #[error("epsilon must lie in (0,1), got {0}")]
    BadEpsilon(f64),
    #[error("ln(lambda) must be positive, got {0}")]
    BadLambda(f64),
    #[error("V'' is undefined at x = 0")]
    UndefinedAtZero,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct YwFunction {
    eps: f64,
    ln_lambda: f64,
}

impl YwFunction {
    /// `λ = e^{1/ε}`.
    pub fn new(eps: f64) -> Result<Self, YamadaError> {
        Self::with_ln_lambda(eps, 1.0 / eps)
    }

    pub fn with_ln_lambda(eps: f64, ln_lambda: f64) -> Result<Self, YamadaError> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(YamadaError::BadEpsilon(eps));
        }
        if !(ln_lambda > 0.0 && ln_lambda.is_finite()) {
            return Err(YamadaError::BadLambda(ln_lambda));
        }
        Ok(Self { eps, ln_lambda })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn ln_lambda(&self) -> f64 {
        self.ln_lambda
    }

    /// Normalization `1 / ln λ`.
    pub fn normalization(&self) -> f64 {
        1.0 / self.ln_lambda
    }

    /// Lower end of the support, `ε/λ` (may underflow to zero).
    pub fn lower_knot(&self) -> f64 {
        self.eps * (-self.ln_lambda).exp()
    }

    pub fn upper_knot(&self) -> f64 {
        self.eps
    }

    fn in_support(&self, z: f64) -> bool {
        z >= self.lower_knot() && z <= self.eps && z > 0.0
    }

    /// `ln(λ z / ε) / ln λ`, the cumulative mass of φ on `[0, z]` inside the support.
    fn ramp(&self, z: f64) -> f64 {
        (self.ln_lambda + z.ln() - self.eps.ln()) / self.ln_lambda
    }

    pub fn phi(&self, z: f64) -> f64 {
        if self.in_support(z) {
            1.0 / (z * self.ln_lambda)
        } else {
            0.0
        }
    }

    /// Closed form of `∫ φ` over the support: `(1/ln λ) · ln(ε / (ε/λ))`.
    pub fn phi_mass(&self) -> f64 {
        let log_eps = self.eps.ln();
        self.normalization() * (log_eps - (log_eps - self.ln_lambda))
    }

    pub fn v(&self, x: f64) -> f64 {
        let a = x.abs();
        let lo = self.lower_knot();
        if a <= lo {
            0.0
        } else if a <= self.eps {
            let log_ratio = self.ln_lambda + a.ln() - self.eps.ln();
            (a * log_ratio - a + lo) / self.ln_lambda
        } else {
            a - (self.eps - lo) / self.ln_lambda
        }
    }

    pub fn v_prime(&self, x: f64) -> f64 {
        let a = x.abs();
        let mag = if a < self.lower_knot() || a == 0.0 {
            0.0
        } else if a <= self.eps {
            self.ramp(a).clamp(0.0, 1.0)
        } else {
            1.0
        };
        mag.copysign(x)
    }

    pub fn v_double_prime(&self, x: f64) -> Result<f64, YamadaError> {
        if x == 0.0 {
            return Err(YamadaError::UndefinedAtZero);
        }
        Ok(self.phi(x.abs()))
    }
}

/// Worst violations of the closed-form bounds over a random probe set.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoundCheck {
    pub probes: usize,
    /// Largest excess over any of the inequalities, 0 when all hold.
    pub max_violation: f64,
    pub violations: usize,
    pub fd_probes: usize,
    pub max_fd_error: f64,
}

impl BoundCheck {
    pub fn passed(&self, bound_tol: f64, fd_tol: f64) -> bool {
        self.violations == 0 && self.max_violation <= bound_tol && self.max_fd_error < fd_tol
    }
}

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-6;
pub const BOUND_TOL: f64 = 1e-12;

/// Probes `|x| − ε ≤ V ≤ |x|`, `sgn(x)V' ∈ [0,1]` and
/// `0 ≤ V'' ≤ 2/(|x| ln λ)·1_{[ε/λ,ε]}(|x|)` on `probes` random `(x, ε)` pairs with
/// `λ = e^{1/ε}`, then central-difference checks of `V'` and `V''`.
///
/// Finite differences are taken only where the FD truncation error of this
/// particular φ (which is singular like `1/z` near the origin) is below the
/// tolerance and at least `10·step` away from both knots.
pub fn check_bounds(probes: usize, eps_range: (f64, f64), seed: u64) -> BoundCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = BoundCheck {
        probes,
        ..Default::default()
    };
    let note = |excess: f64, out: &mut BoundCheck| {
        if excess > BOUND_TOL {
            out.violations += 1;
        }
        out.max_violation = out.max_violation.max(excess);
    };
    for _ in 0..probes {
        let eps = rng.random_range(eps_range.0..eps_range.1);
        let yw = YwFunction::new(eps).expect("eps range within (0,1)");
        let x = sample_x(&mut rng, eps);
        let a = x.abs();
        let v = yw.v(x);
        note((a - eps) - v, &mut out);
        note(v - a, &mut out);
        let sv = x.signum() * yw.v_prime(x);
        note(-sv, &mut out);
        note(sv - 1.0, &mut out);
        if x != 0.0 {
            let vpp = yw.v_double_prime(x).unwrap();
            note(-vpp, &mut out);
            let cap = if yw.in_support(a) {
                2.0 / (a * yw.ln_lambda)
            } else {
                0.0
            };
            note(vpp - cap, &mut out);
        }

        let h = FD_STEP;
        if fd_admissible(&yw, a, h) {
            out.fd_probes += 1;
            let d1 = (yw.v(x + h) - yw.v(x - h)) / (2.0 * h);
            let d2 = (yw.v_prime(x + h) - yw.v_prime(x - h)) / (2.0 * h);
            let e1 = (d1 - yw.v_prime(x)).abs();
            let e2 = (d2 - yw.v_double_prime(x).unwrap()).abs();
            out.max_fd_error = out.max_fd_error.max(e1).max(e2);
        }
    }
    out
}

/// Mix of scales: the support of φ sits at `|x| ≤ ε`, far below unit scale.
fn sample_x<R: Rng>(rng: &mut R, eps: f64) -> f64 {
    let mag = match rng.random_range(0..3) {
        0 => rng.random_range(0.0..2.0 * eps),
        1 => eps * 10f64.powf(rng.random_range(-12.0..0.0)),
        _ => rng.random_range(0.0..5.0),
    };
    if rng.random_bool(0.5) {
        -mag
    } else {
        mag
    }
}

/// Smallest `|x|` at which the FD truncation error `step²/6 · |V''''|` of `V''`
/// stays below `tol/4`, with `|V''''| = 2 / (|x|³ ln λ)` on the ramp.
pub fn fd_floor(yw: &YwFunction, step: f64) -> f64 {
    (4.0 * step * step / (3.0 * FD_TOL * yw.ln_lambda)).cbrt()
}

fn fd_admissible(yw: &YwFunction, a: f64, step: f64) -> bool {
    let guard = 10.0 * step;
    a >= fd_floor(yw, step)
        && (a - yw.lower_knot()).abs() >= guard
        && (a - yw.upper_knot()).abs() >= guard
}
