//! Probe-based spot checks of the continuity and growth assumptions.
//!
//! Every check reports `observed / bound − 1` maximized over the probes, so a
//! value `≤ 0` means the declared constant dominates everywhere it was tested.
//! Monotonicity of `b1` reports the largest increase between neighbouring
//! sorted probes, scaled by the Hölder bound.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ModelError, ModelSpec};
use crate::measure::{wasserstein_p, EmpiricalMeasure};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbePlan {
    pub probes: usize,
    /// Probes are drawn from `[-x_range, x_range]`, with extra mass near zero.
    pub x_range: f64,
    pub cloud_size: usize,
    /// Number of clouds along which monotonicity of `b1` is scanned.
    pub monotone_clouds: usize,
    pub seed: u64,
}

impl Default for ProbePlan {
    fn default() -> Self {
        Self {
            probes: 1000,
            x_range: 10.0,
            cloud_size: 5,
            monotone_clouds: 16,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub max_ratio: f64,
    pub worst_probe: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<AssumptionCheck>,
    pub tol: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.max_ratio <= self.tol)
    }

    pub fn failures(&self) -> Vec<&AssumptionCheck> {
        self.checks.iter().filter(|c| c.max_ratio > self.tol).collect()
    }

    pub fn check(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Probe {
    x: f64,
    y: f64,
    mu: EmpiricalMeasure,
    nu: EmpiricalMeasure,
}

impl Probe {
    fn describe(&self) -> String {
        format!(
            "x={}, y={}, mu={:?}, nu={:?}",
            self.x,
            self.y,
            self.mu.atoms(),
            self.nu.atoms()
        )
    }
}

fn draw_point<R: Rng>(rng: &mut R, range: f64) -> f64 {
    let mag = match rng.random_range(0..4) {
        0 => range * 10f64.powf(rng.random_range(-8.0..0.0)),
        _ => rng.random_range(0.0..range),
    };
    if rng.random_bool(0.5) {
        -mag
    } else {
        mag
    }
}

fn draw_probe<R: Rng>(rng: &mut R, plan: &ProbePlan) -> Probe {
    let x = draw_point(rng, plan.x_range);
    let y = match rng.random_range(0..4) {
        0 => x + draw_point(rng, 1e-3 * plan.x_range),
        1 => -x,
        _ => draw_point(rng, plan.x_range),
    };
    let cloud = |rng: &mut R| {
        EmpiricalMeasure::new((0..plan.cloud_size).map(|_| draw_point(rng, plan.x_range)).collect())
            .expect("finite probe cloud")
    };
    let mu = cloud(rng);
    let nu = match rng.random_range(0..3) {
        0 => mu.translate(draw_point(rng, plan.x_range)),
        _ => cloud(rng),
    };
    Probe { x, y, mu, nu }
}

/// `num / den − 1`, with `0/0 → −1` and `num/0 → +∞`.
fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        -1.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den - 1.0
    }
}

struct Tracker {
    name: &'static str,
    max: f64,
    worst: String,
}

impl Tracker {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            max: f64::NEG_INFINITY,
            worst: String::new(),
        }
    }

    fn observe(&mut self, r: f64, probe: impl FnOnce() -> String) {
        if r > self.max {
            self.max = r;
            self.worst = probe();
        }
    }

    fn finish(self) -> AssumptionCheck {
        AssumptionCheck {
            name: self.name,
            max_ratio: self.max,
            worst_probe: self.worst,
        }
    }
}

fn finite(value: f64, coefficient: &str, probe: &dyn Fn() -> String) -> Result<f64, ModelError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(ModelError::NonFinite {
            coefficient: coefficient.into(),
            probe: probe(),
        })
    }
}

pub fn validate_assumptions(
    model: &ModelSpec,
    plan: &ProbePlan,
    tol: f64,
) -> Result<ValidationReport, ModelError> {
    if !(tol >= 0.0) {
        return Err(ModelError::BadParameter {
            name: "tol".into(),
            value: tol,
            reason: "must be nonnegative".into(),
        });
    }
    let k = model.constants();
    let (alpha, beta) = (model.alpha(), model.beta());
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let probes: Vec<Probe> = (0..plan.probes).map(|_| draw_probe(&mut rng, plan)).collect();

    let mut b1_measure = Tracker::new("H1.b1_measure");
    let mut b1_holder = Tracker::new("H1.b1_holder");
    let mut b2_lip = Tracker::new("H1.b2_lipschitz");
    let mut sigma_holder = Tracker::new("H2.sigma_holder");
    let mut jumps: Vec<[Tracker; 3]> = vec![
        [
            Tracker::new("H3.f0_linear_branch"),
            Tracker::new("H3.f0_quadratic_branch"),
            Tracker::new("H3.f0"),
        ],
        [
            Tracker::new("H3.f1_linear_branch"),
            Tracker::new("H3.f1_quadratic_branch"),
            Tracker::new("H3.f1"),
        ],
    ];
    let mut growth_b = Tracker::new("H4.drift_diffusion");
    let mut growth_f0 = Tracker::new("H4.f0");
    let mut growth_f1 = Tracker::new("H4.f1");

    for p in &probes {
        let desc = || p.describe();
        let w2 = wasserstein_p(&p.mu, &p.nu, 2.0).expect("equal-size probe clouds");
        let dxy = (p.x - p.y).abs();

        let b1_xmu = finite(model.b1(p.x, &p.mu), "b1", &desc)?;
        let b1_xnu = finite(model.b1(p.x, &p.nu), "b1", &desc)?;
        let b1_ymu = finite(model.b1(p.y, &p.mu), "b1", &desc)?;
        b1_measure.observe(ratio((b1_xmu - b1_xnu).abs(), k.k1 * w2), desc);
        b1_holder.observe(ratio((b1_xmu - b1_ymu).abs(), k.k1 * dxy.powf(beta)), desc);

        let b2_xmu = finite(model.b2(p.x, &p.mu), "b2", &desc)?;
        let b2_ynu = finite(model.b2(p.y, &p.nu), "b2", &desc)?;
        b2_lip.observe(ratio((b2_xmu - b2_ynu).abs(), k.k1 * (dxy + w2)), desc);

        let sx = finite(model.sigma(p.x), "sigma", &desc)?;
        let sy = finite(model.sigma(p.y), "sigma", &desc)?;
        sigma_holder.observe(ratio((sx - sy).abs(), k.k2 * dxy.powf(alpha)), desc);

        let h3_den = k.k3 * (dxy * dxy + w2 * w2);
        for (which, trackers) in jumps.iter_mut().enumerate() {
            let (nu, name) = if which == 0 {
                (model.nu0(), "f0")
            } else {
                (model.nu1(), "f1")
            };
            let f = |x: f64, m: &EmpiricalMeasure, u: f64| {
                if which == 0 {
                    model.f0(x, m, u)
                } else {
                    model.f1(x, m, u)
                }
            };
            let diff = |u: f64| f(p.x, &p.mu, u) - f(p.y, &p.nu, u);
            let lin = nu.integrate(|u| dxy * diff(u).abs())?.value;
            let quad = nu.integrate(|u| diff(u).powi(2))?.value;
            let both = nu.integrate(|u| (dxy * diff(u).abs()).max(diff(u).powi(2)))?.value;
            let both = finite(both, name, &desc)?;
            let [tl, tq, tb] = trackers;
            tl.observe(ratio(lin, h3_den), desc);
            tq.observe(ratio(quad, h3_den), desc);
            tb.observe(ratio(both, h3_den), desc);
        }

        let w2_0 = wasserstein_p(&p.mu, &EmpiricalMeasure::dirac_zero(), 2.0).unwrap();
        let b = b1_xmu + b2_xmu;
        growth_b.observe(
            ratio((b * b).max(sx * sx), k.m1 * (1.0 + p.x * p.x + w2_0 * w2_0)),
            desc,
        );
        let lin_den = 1.0 + p.x.abs() + w2_0;
        let g0 = model
            .nu0()
            .integrate(|u| {
                let v = model.f0(p.x, &p.mu, u).abs();
                v.min(v * v)
            })?
            .value;
        growth_f0.observe(ratio(finite(g0, "f0", &desc)?, k.m2 * lin_den), desc);
        let g1 = model.nu1().integrate(|u| model.f1(p.x, &p.mu, u).abs())?.value;
        growth_f1.observe(ratio(finite(g1, "f1", &desc)?, k.m3 * lin_den), desc);
    }

    let mut monotone = Tracker::new("H1.b1_monotone");
    let mut xs: Vec<f64> = probes.iter().flat_map(|p| [p.x, p.y]).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    for p in probes.iter().take(plan.monotone_clouds) {
        let vals = xs
            .iter()
            .map(|&x| finite(model.b1(x, &p.mu), "b1", &|| format!("x={x}, mu={:?}", p.mu.atoms())))
            .collect::<Result<Vec<_>, _>>()?;
        for i in 1..xs.len() {
            let rise = vals[i] - vals[i - 1];
            let scale = k.k1 * (xs[i] - xs[i - 1]).powf(beta);
            let r = if rise <= 0.0 { rise.min(0.0) / scale.max(f64::MIN_POSITIVE) } else { rise / scale };
            let r = if r.is_nan() { 0.0 } else { r };
            monotone.observe(r, || format!("x={}, y={}, mu={:?}", xs[i - 1], xs[i], p.mu.atoms()));
        }
    }

    let mut checks = vec![
        b1_measure.finish(),
        b1_holder.finish(),
        b2_lip.finish(),
        monotone.finish(),
        sigma_holder.finish(),
    ];
    for t in jumps {
        checks.extend(t.into_iter().map(Tracker::finish));
    }
    checks.extend([growth_b.finish(), growth_f0.finish(), growth_f1.finish()]);
    Ok(ValidationReport { checks, tol })
}
