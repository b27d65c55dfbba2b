use super::*;
use crate::model::{builtin_model, Params};

fn params(kv: &[(&str, f64)]) -> Params {
    kv.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

fn ctx(label: &str) -> Context {
    Context {
        plan: SeedPlan::new(2024),
        experiment: ExperimentKey::named(label),
        initial: InitialLaw::default(),
        exec: Execution::Parallel,
    }
}

fn chaos_cfg(n: usize, h: f64, replications: usize) -> ChaosConfig {
    ChaosConfig {
        n,
        stepping: Stepping::frozen(SimGrid::new(1.0, h).unwrap()),
        replications,
        p: 2,
        pool_size: 64 * n,
    }
}

fn euler_cfg(h_list: Vec<f64>, h_ref: f64, p: u32, reference_mode: Mode) -> EulerConfig {
    EulerConfig {
        n: 32,
        horizon: 1.0,
        h_list,
        h_ref,
        replications: 4,
        p,
        reference_mode,
    }
}

#[test]
fn chaos_error_vanishes_without_interaction() {
    let model = builtin_model("M_OU", &params(&[("c", 0.0)])).unwrap();
    let s = chaos_error(&model, &chaos_cfg(64, 1.0 / 32.0, 4), &ctx("chaos-c0")).unwrap();
    assert_eq!(s.estimate, 0.0);
    assert_eq!(s.se, 0.0);
}

#[test]
fn chaos_error_decreases_with_n() {
    let model = builtin_model("M_CHAOS", &Params::new()).unwrap();
    let c = ctx("chaos-trend");
    let small = chaos_error(&model, &chaos_cfg(8, 1.0 / 32.0, 4), &c).unwrap();
    let large = chaos_error(&model, &chaos_cfg(512, 1.0 / 32.0, 4), &c).unwrap();
    assert!(large.estimate < small.estimate, "{large:?} vs {small:?}");
}

#[test]
fn chaos_rejects_bad_requests() {
    let model = builtin_model("M_CHAOS", &Params::new()).unwrap();
    let c = ctx("chaos-bad");
    assert_eq!(
        chaos_error(&model, &chaos_cfg(8, 0.25, 1), &c),
        Err(StudyError::TooFewReplications(1))
    );
    let mut cfg = chaos_cfg(8, 0.25, 2);
    cfg.p = 3;
    assert_eq!(chaos_error(&model, &cfg, &c), Err(StudyError::BadExponent(3)));
}

#[test]
fn chaos_is_execution_independent() {
    let model = builtin_model("M_CHAOS", &Params::new()).unwrap();
    let mut c = ctx("chaos-det");
    let cfg = chaos_cfg(16, 1.0 / 16.0, 3);
    let par = chaos_error(&model, &cfg, &c).unwrap();
    c.exec = Execution::Sequential;
    assert_eq!(par, chaos_error(&model, &cfg, &c).unwrap());
}

#[test]
fn euler_error_vanishes_at_reference_step() {
    let model = builtin_model("M_CHAOS", &Params::new()).unwrap();
    let h = 1.0 / 64.0;
    let s = euler_error(&model, &euler_cfg(vec![h], h, 2, Mode::Frozen), &ctx("euler-0")).unwrap();
    assert_eq!(s[0].estimate, 0.0);
}

#[test]
fn euler_error_shrinks_with_h() {
    let model = builtin_model("M_OU", &Params::new()).unwrap();
    let cfg = euler_cfg(vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0], 1.0 / 256.0, 2, Mode::Continuous);
    let s = euler_error(&model, &cfg, &ctx("euler-trend")).unwrap();
    assert!(s[1].estimate < s[0].estimate && s[2].estimate < s[1].estimate, "{s:?}");
}

#[test]
fn zero_noise_euler_gap_is_first_order() {
    let model = builtin_model("M_OU", &params(&[("s", 0.0), ("g0", 0.0), ("g1", 0.0)])).unwrap();
    let h_list: Vec<f64> = (3..=6).map(|k| 2f64.powi(-k)).collect();
    let cfg = euler_cfg(h_list, 2f64.powi(-12), 1, Mode::Continuous);
    let s = euler_error(&model, &cfg, &ctx("euler-ode")).unwrap();
    let slope = fit_rate(&s).unwrap().slope().unwrap();
    assert!((slope - 1.0).abs() < 0.1, "{slope}");
}

#[test]
fn euler_rejects_unnested_steps() {
    let model = builtin_model("M_OU", &Params::new()).unwrap();
    let cfg = euler_cfg(vec![0.1], 1.0 / 64.0, 2, Mode::Continuous);
    assert!(matches!(
        euler_error(&model, &cfg, &ctx("euler-bad")),
        Err(StudyError::NotNested { .. })
    ));
}

#[test]
fn fg_point_mass_is_exact() {
    let r = fg_rate(
        &InitialLaw::PointMass { at: 2.0 },
        &[4, 8, 16],
        4,
        &SeedPlan::new(0),
        ExperimentKey::named("fg-dirac"),
        Execution::Parallel,
    )
    .unwrap();
    assert!(r.samples.iter().all(|s| s.estimate == 0.0));
    assert!(r.fit.is_none());
}

#[test]
fn fg_gaussian_rate() {
    let r = fg_rate(
        &InitialLaw::Normal { mean: 0.0, sd: 1.0 },
        &[16, 64, 256, 1024],
        64,
        &SeedPlan::new(1),
        ExperimentKey::named("fg-gauss"),
        Execution::Parallel,
    )
    .unwrap();
    let slope = r.slope().unwrap();
    assert!(slope <= -0.5, "{slope}");
    assert_eq!(r.theory_slope, Some(-0.5));
}

#[test]
fn fg_needs_three_sizes() {
    let e = fg_rate(
        &InitialLaw::default(),
        &[16, 64],
        4,
        &SeedPlan::new(0),
        ExperimentKey::named("fg-short"),
        Execution::Parallel,
    );
    assert_eq!(e.unwrap_err(), StudyError::ShortSweep { required: 3, got: 2 });
}
