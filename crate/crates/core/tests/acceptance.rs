//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Runs as a plain binary (`harness = false`) so the criteria execute in a
//! fixed order and their timings are not distorted by each other.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mvjump::cli::{parse_config, run_with_threads};
use mvjump::drivers::{DriverBundle, ExperimentKey, SeedPlan};
use mvjump::measure::{wasserstein_p, EmpiricalMeasure};
use mvjump::model::{builtin_model, InitialLaw, ModelSpec, Params};
use mvjump::solver::{picard_flow, simulate_interacting, Mode, PicardConfig, SimGrid, Stepping, Trajectory};
use mvjump::study::{
    chaos_error, euler_error, fg_rate, fit_rate, is_nonincreasing, ChaosConfig, Context, ErrorSample, EulerConfig,
};
use mvjump::yamada::{check_bounds, BOUND_TOL, FD_TOL};
use mvjump::Execution;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn params(kv: &[(&str, f64)]) -> Params {
    kv.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

fn ou(kv: &[(&str, f64)]) -> ModelSpec {
    builtin_model("M_OU", &params(kv)).unwrap()
}

fn chaos_model() -> ModelSpec {
    builtin_model("M_CHAOS", &Params::new()).unwrap()
}

fn ctx(label: &str) -> Context {
    Context {
        plan: SeedPlan::new(20_240_601),
        experiment: ExperimentKey::named(label),
        initial: InitialLaw::default(),
        exec: Execution::default(),
    }
}

fn grid(h: f64) -> SimGrid {
    SimGrid::new(1.0, h).unwrap()
}

fn dyadic(k: i32) -> f64 {
    2f64.powi(-k)
}

fn fmt_samples(s: &[ErrorSample]) -> String {
    s.iter()
        .map(|e| format!("{}:{:.3e}±{:.1e}", e.param, e.estimate, e.se))
        .join(" ")
}

/// Minimum transport cost over all n! pairings; independent of the sorted shortcut.
fn brute_force_wp(xs: &[f64], ys: &[f64], p: f64) -> f64 {
    let n = xs.len();
    let best = (0..n)
        .permutations(n)
        .map(|perm| perm.iter().enumerate().map(|(i, &j)| (xs[i] - ys[j]).abs().powf(p)).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    (best / n as f64).powf(1.0 / p)
}

fn c1_wasserstein_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for pair in 0..500 {
        let n = rng.random_range(1..=6);
        let p = if pair % 2 == 0 { 1.0 } else { 2.0 };
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let fast = wasserstein_p(
            &EmpiricalMeasure::new(xs.clone()).unwrap(),
            &EmpiricalMeasure::new(ys.clone()).unwrap(),
            p,
        )
        .unwrap();
        worst = worst.max((fast - brute_force_wp(&xs, &ys, p)).abs());
    }
    outcome(worst <= 1e-12, format!("max |sorted - oracle| = {worst:.2e} over 500 pairs"))
}

fn c2_yamada_bounds() -> Outcome {
    let b = check_bounds(100_000, (0.01, 0.5), 7);
    outcome(
        b.violations == 0 && b.max_violation <= BOUND_TOL && b.max_fd_error < FD_TOL,
        format!(
            "{} violations, max excess {:.1e}; finite differences: max error {:.1e} on {} probes",
            b.violations, b.max_violation, b.max_fd_error, b.fd_probes
        ),
    )
}

fn c3_coupling_soundness() -> Outcome {
    let model = ou(&[("c", 0.0)]);
    let cfg = ChaosConfig {
        n: 64,
        stepping: Stepping::frozen(grid(dyadic(6))),
        replications: 4,
        p: 2,
        pool_size: 64 * 64,
    };
    let chaos = chaos_error(&model, &cfg, &ctx("acc-coupling-chaos")).unwrap();
    let h = dyadic(7);
    let euler = euler_error(
        &ou(&[]),
        &EulerConfig {
            n: 64,
            horizon: 1.0,
            h_list: vec![h],
            h_ref: h,
            replications: 4,
            p: 2,
            reference_mode: Mode::Frozen,
        },
        &ctx("acc-coupling-euler"),
    )
    .unwrap();
    outcome(
        chaos.estimate == 0.0 && euler[0].estimate == 0.0,
        format!("chaos estimate {}, euler estimate {}", chaos.estimate, euler[0].estimate),
    )
}

fn c4_deterministic_limit() -> Outcome {
    let model = ou(&[("c", 0.0), ("s", 0.0), ("g0", 0.0), ("g1", 0.0)]);
    let bundle = DriverBundle::new(
        SeedPlan::new(0),
        ExperimentKey::named("acc-ode"),
        1.0,
        &model,
        InitialLaw::PointMass { at: 1.0 },
    )
    .unwrap();
    let mut samples = Vec::new();
    let mut within = true;
    for k in [4, 6, 8] {
        let h = dyadic(k);
        let traj = simulate_interacting(&model, 1, &Stepping::frozen(grid(h)), &bundle, Execution::default()).unwrap();
        let err = (traj.final_positions()[0] - (-1f64).exp()).abs();
        within &= err <= 2.0 * h;
        samples.push(ErrorSample {
            param: h,
            replications: 1,
            estimate: err,
            se: 0.0,
            p: 1,
        });
    }
    let slope = fit_rate(&samples).unwrap().slope().unwrap();
    outcome(
        within && (0.9..=1.1).contains(&slope),
        format!("errors {}; slope {slope:.4}", fmt_samples(&samples)),
    )
}

fn sup_moment(t: &Trajectory, p: i32) -> f64 {
    t.running_sup.iter().map(|s| s.powi(p)).sum::<f64>() / t.particles() as f64
}

fn c5_moment_bounds() -> Outcome {
    let model = ou(&[]);
    let bundle = DriverBundle::new(
        SeedPlan::new(5),
        ExperimentKey::named("acc-moments"),
        1.0,
        &model,
        InitialLaw::default(),
    )
    .unwrap();
    let run = |k| simulate_interacting(&model, 256, &Stepping::frozen(grid(dyadic(k))), &bundle, Execution::default());
    let (coarse, fine) = match (run(6), run(8)) {
        (Ok(a), Ok(b)) => (a, b),
        (a, b) => return outcome(false, format!("blow-up: {:?} / {:?}", a.err(), b.err())),
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for p in [2, 4] {
        let ratio = sup_moment(&fine, p) / sup_moment(&coarse, p);
        ok &= (0.5..=2.0).contains(&ratio);
        parts.push(format!("p={p}: ratio {ratio:.4}"));
    }
    outcome(ok, parts.join(", "))
}

fn c6_propagation_of_chaos() -> Outcome {
    let model = chaos_model();
    let c = ctx("acc-chaos");
    let samples: Vec<_> = [8, 32, 128, 512]
        .iter()
        .map(|&n| {
            let cfg = ChaosConfig {
                n,
                stepping: Stepping::frozen(grid(dyadic(8))),
                replications: 16,
                p: 2,
                pool_size: 64 * n,
            };
            chaos_error(&model, &cfg, &c).unwrap()
        })
        .collect();
    let monotone = is_nonincreasing(&samples, 2.0);
    let slope = fit_rate(&samples).unwrap().slope().unwrap();
    outcome(
        monotone && slope <= -0.25,
        format!("{}; monotone {monotone}; slope {slope:.4}", fmt_samples(&samples)),
    )
}

fn c7_euler_rate() -> Outcome {
    let cfg = EulerConfig {
        n: 256,
        horizon: 1.0,
        h_list: (4..=8).map(dyadic).collect(),
        h_ref: dyadic(11),
        replications: 16,
        p: 2,
        reference_mode: Mode::Continuous,
    };
    let samples = euler_error(&ou(&[]), &cfg, &ctx("acc-euler")).unwrap();
    let slope = fit_rate(&samples).unwrap().slope().unwrap();
    outcome(slope >= 0.4, format!("{}; slope {slope:.4}", fmt_samples(&samples)))
}

fn c8_empirical_measure_rate() -> Outcome {
    let r = fg_rate(
        &InitialLaw::Normal { mean: 0.0, sd: 1.0 },
        &[16, 64, 256, 1024],
        64,
        &SeedPlan::new(8),
        ExperimentKey::named("acc-fg"),
        Execution::default(),
    )
    .unwrap();
    let slope = r.slope().unwrap();
    outcome(slope <= -0.4, format!("{}; slope {slope:.4}", fmt_samples(&r.samples)))
}

fn c9_picard_contraction() -> Outcome {
    let model = chaos_model();
    let bundle = DriverBundle::new(
        SeedPlan::new(9),
        ExperimentKey::named("acc-picard"),
        1.0,
        &model,
        InitialLaw::default(),
    )
    .unwrap();
    let cfg = PicardConfig {
        pool_size: 512,
        k_max: 10,
        tol: 1e-3,
    };
    let r = picard_flow(&model, &cfg, &Stepping::frozen(grid(dyadic(8))), &bundle, Execution::default()).unwrap();
    let decreasing = r.distances[1..].windows(2).all(|w| w[1] < w[0]);
    let early = r.converged && r.iterations() < cfg.k_max;
    outcome(
        decreasing && early,
        format!(
            "distances [{}]; converged at k = {}",
            r.distances.iter().map(|d| format!("{d:.2e}")).join(", "),
            r.iterations()
        ),
    )
}

fn csv_outputs(text: &str, threads: usize, dir: &Path) -> Vec<Vec<u8>> {
    let mut cfg = parse_config(text).unwrap();
    cfg.output_dir = Some(dir.to_path_buf());
    let out = run_with_threads(&cfg, Some(threads)).unwrap();
    out.manifest.outputs.iter().map(|o| fs::read(&o.path).unwrap()).collect()
}

fn c10_determinism() -> Outcome {
    let runs = [
        ("coupling", "experiment = \"chaos\"\nN_list = [64]\nR = 4\nh = 0.015625\n[params]\nc = 0.0\n"),
        ("chaos", "experiment = \"chaos\"\nmodel = \"M_CHAOS\"\nN_list = [8, 32, 128]\nR = 4\nh = 0.0078125\n"),
        ("euler", "experiment = \"euler-rate\"\nN = 64\nh_list = [0.0625, 0.03125, 0.015625]\nh_ref = 0.001953125\nR = 4\n"),
        ("fg", "experiment = \"fg-rate\"\nN_list = [16, 64, 256, 1024]\nR = 64\n[initial]\nlaw = \"normal\"\nmean = 0.0\nsd = 1.0\n"),
        ("picard", "experiment = \"picard\"\nmodel = \"M_CHAOS\"\nM = 512\n"),
        ("simulate", "experiment = \"simulate\"\nN = 256\nh = 0.015625\n"),
    ];
    let mut mismatched = Vec::new();
    for (name, text) in runs {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        if csv_outputs(text, 1, a.path()) != csv_outputs(text, 8, b.path()) {
            mismatched.push(name);
        }
    }
    outcome(
        mismatched.is_empty(),
        if mismatched.is_empty() {
            format!("{} runs byte-identical at 1 and 8 threads", runs.len())
        } else {
            format!("differing CSVs: {}", mismatched.join(", "))
        },
    )
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let criteria: [Criterion; 10] = [
        ("C1 wasserstein oracle equivalence", secs(10), c1_wasserstein_oracle),
        ("C2 yamada-watanabe bounds", secs(10), c2_yamada_bounds),
        ("C3 coupling soundness", secs(60), c3_coupling_soundness),
        ("C4 deterministic-limit order", secs(10), c4_deterministic_limit),
        ("C5 moment bounds", secs(120), c5_moment_bounds),
        ("C6 propagation of chaos", secs(600), c6_propagation_of_chaos),
        ("C7 euler rate envelope", secs(900), c7_euler_rate),
        ("C8 empirical-measure rate", secs(120), c8_empirical_measure_rate),
        ("C9 picard contraction", secs(300), c9_picard_contraction),
        ("C10 determinism across thread counts", secs(600), c10_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, budget, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let o = check();
        let took = start.elapsed();
        let in_time = took <= budget;
        let pass = o.passed && in_time;
        failed += usize::from(!pass);
        println!(
            "{} {name} [{:.1}s / {}s{}]: {}",
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            budget.as_secs(),
            if in_time { "" } else { ", over budget" },
            o.detail
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
