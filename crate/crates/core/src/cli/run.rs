use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::config::{Experiment, RunConfig, POOL_FACTOR};
use super::CliError;
use crate::drivers::{DriverBundle, DriverKind, ExperimentKey, SeedPlan};
use crate::exec::Execution;
use crate::measure::{wasserstein_oracle, wasserstein_p, EmpiricalMeasure};
use crate::model::builtin_model;
use crate::solver::{picard_flow, simulate_interacting, PicardConfig, SimGrid, Stepping};
use crate::study::{
    chaos_error, euler_error, fg_rate, fit_rate, is_nonincreasing, ChaosConfig, Context, ErrorSample,
    EulerConfig, RateReport, StudyError, CHAOS_THEORY, EULER_THEORY,
};
use crate::yamada::{check_bounds, BOUND_TOL, FD_TOL};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "MVJ_OUT_DIR";
const FALLBACK_OUT_DIR: &str = "mvjump-out";

const CHAOS_SLOPE_MAX: f64 = -0.25;
const EULER_SLOPE_MIN: f64 = 0.4;
const FG_SLOPE_MAX: f64 = -0.4;
const MONOTONE_SLACK: f64 = 2.0;
const ORACLE_TOL: f64 = 1e-12;

/// One envelope check; `--assert` turns a failure into a nonzero exit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            passed,
            detail,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputFile {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub library_version: &'static str,
    pub experiment_id: String,
    pub seed_plan: SeedPlan,
    pub threads: Option<usize>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub wall_seconds: f64,
    pub status: &'static str,
    pub error: Option<String>,
    /// Set when the run stopped before writing all of its artifacts.
    pub partial: bool,
    pub summary: Value,
    pub checks: Vec<Check>,
    pub outputs: Vec<OutputFile>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub manifest_path: PathBuf,
    pub manifest: RunManifest,
}

impl RunOutcome {
    pub fn failed_checks(&self) -> Vec<&Check> {
        self.manifest.checks.iter().filter(|c| !c.passed).collect()
    }
}

/// Config value, then `MVJ_OUT_DIR`, then `./mvjump-out`.
pub fn output_dir(config: &RunConfig) -> PathBuf {
    config
        .output_dir
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(FALLBACK_OUT_DIR))
}

/// Runs inside a dedicated pool of `threads` workers when given.
pub fn run_with_threads(config: &RunConfig, threads: Option<usize>) -> Result<RunOutcome, CliError> {
    #[cfg(feature = "parallel")]
    if let Some(t) = threads {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::ThreadPool(e.to_string()))?;
        return pool.install(|| execute(config, Execution::Parallel, threads));
    }
    execute(config, Execution::default(), threads)
}

pub fn run(config: &RunConfig, exec: Execution) -> Result<RunOutcome, CliError> {
    execute(config, exec, None)
}

struct Artifacts {
    files: Vec<(&'static str, Vec<u8>)>,
    summary: Value,
    checks: Vec<Check>,
}

fn unix_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn execute(config: &RunConfig, exec: Execution, threads: Option<usize>) -> Result<RunOutcome, CliError> {
    let config = config.clone().resolve()?;
    let dir = output_dir(&config);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let key = ExperimentKey::named(config.experiment.name());
    let plan = SeedPlan::new(config.master_seed);
    let started = unix_ms();
    let clock = Instant::now();
    let stem = format!("{}-{:016x}-{}", config.experiment.name(), key.0, started);

    let result = match config.experiment {
        Experiment::Simulate => simulate(&config, plan, key, exec),
        Experiment::Chaos => chaos(&config, plan, key, exec),
        Experiment::EulerRate => euler(&config, plan, key, exec),
        Experiment::FgRate => fg(&config, plan, key, exec),
        Experiment::Picard => picard(&config, plan, key, exec),
        Experiment::YwCheck => yw(&config),
        Experiment::Wasserstein => wasserstein(&config, plan, key),
    };

    let mut outputs = Vec::new();
    let (summary, checks, error) = match result {
        Ok(art) => {
            for (suffix, bytes) in &art.files {
                let path = dir.join(format!("{stem}-{suffix}.csv"));
                fs::write(&path, bytes).map_err(io_err(&path))?;
                outputs.push(OutputFile {
                    path,
                    sha256: hex(&Sha256::digest(bytes)),
                });
            }
            (art.summary, art.checks, None)
        }
        Err(e) => (Value::Null, Vec::new(), Some(e)),
    };
    let manifest = RunManifest {
        config: config.clone(),
        library_version: env!("CARGO_PKG_VERSION"),
        experiment_id: format!("{:016x}", key.0),
        seed_plan: plan,
        threads,
        started_unix_ms: started,
        finished_unix_ms: unix_ms(),
        wall_seconds: clock.elapsed().as_secs_f64(),
        status: if error.is_none() { "ok" } else { "failed" },
        error: error.as_ref().map(|e| e.to_string()),
        partial: error.is_some(),
        summary,
        checks,
        outputs,
    };
    let manifest_path = dir.join(format!("{stem}.manifest.json"));
    let text = serde_json::to_string_pretty(&manifest).expect("manifest is plain data");
    fs::write(&manifest_path, text).map_err(io_err(&manifest_path))?;
    match error {
        Some(e) => Err(e),
        None => Ok(RunOutcome {
            manifest_path,
            manifest,
        }),
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn csv_bytes<const K: usize>(header: [&str; K], rows: impl IntoIterator<Item = [String; K]>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn rate_csv(samples: &[ErrorSample]) -> Vec<u8> {
    csv_bytes(
        ["param", "estimate", "se", "R"],
        samples.iter().map(|s| {
            [
                s.param.to_string(),
                s.estimate.to_string(),
                s.se.to_string(),
                s.replications.to_string(),
            ]
        }),
    )
}

fn report_json(report: &RateReport, seed: u64) -> Value {
    json!({
        "slope": report.fit.map(|f| f.slope),
        "intercept": report.fit.map(|f| f.intercept),
        "residual": report.fit.map(|f| f.residual),
        "theory_slope": report.theory_slope,
        "theory_source": report.theory_source,
        "notes": report.notes,
        "seed": seed,
    })
}

/// Fits when possible; a sweep with fewer than three positive estimates is
/// reported without a slope.
fn try_fit(samples: &[ErrorSample]) -> Result<RateReport, StudyError> {
    match fit_rate(samples) {
        Ok(r) => Ok(r),
        Err(StudyError::TooFewPositive(k)) => Ok(RateReport {
            samples: samples.to_vec(),
            fit: None,
            theory_slope: None,
            theory_source: String::new(),
            notes: vec![format!("only {k} positive estimates; no slope fitted")],
        }),
        Err(e) => Err(e),
    }
}

fn slope_check(name: &str, report: &RateReport, ok: impl Fn(f64) -> bool, bound: &str) -> Check {
    match report.slope() {
        Some(s) => Check::new(name, ok(s), format!("slope {s:.4} (required {bound})")),
        None => Check::new(name, false, "no slope could be fitted".into()),
    }
}

fn model_of(config: &RunConfig) -> Result<crate::model::ModelSpec, CliError> {
    Ok(builtin_model(&config.model, &config.params)?)
}

fn stepping(config: &RunConfig) -> Result<Stepping, CliError> {
    let grid = SimGrid::new(config.horizon, config.h.expect("resolved"))?;
    Ok(Stepping::new(grid, config.mode))
}

fn context(config: &RunConfig, plan: SeedPlan, key: ExperimentKey, exec: Execution) -> Context {
    Context {
        plan,
        experiment: key,
        initial: config.initial,
        exec,
    }
}

fn simulate(config: &RunConfig, plan: SeedPlan, key: ExperimentKey, exec: Execution) -> Result<Artifacts, CliError> {
    let model = model_of(config)?;
    let n = config.n.expect("resolved");
    let stepping = stepping(config)?;
    let bundle = DriverBundle::new(plan, key, config.horizon, &model, config.initial)?;
    let traj = simulate_interacting(&model, n, &stepping, &bundle, exec)?;
    let rows = traj.times.iter().zip(&traj.positions).flat_map(|(t, row)| {
        row.iter()
            .enumerate()
            .map(move |(i, x)| [t.to_string(), i.to_string(), x.to_string()])
    });
    let trajectory = csv_bytes(["time", "particle", "position"], rows);
    let fin = traj.final_positions();
    let summary = json!({
        "model": config.model,
        "N": n,
        "steps": traj.times.len() - 1,
        "mode": config.mode,
        "final_mean": fin.iter().sum::<f64>() / n as f64,
        "max_abs": traj.running_sup.iter().copied().fold(0.0, f64::max),
        "jumps": traj.jump_values.iter().map(Vec::len).sum::<usize>(),
    });
    Ok(Artifacts {
        files: vec![("trajectory", trajectory)],
        summary,
        checks: Vec::new(),
    })
}

fn chaos(config: &RunConfig, plan: SeedPlan, key: ExperimentKey, exec: Execution) -> Result<Artifacts, CliError> {
    let model = model_of(config)?;
    let stepping = stepping(config)?;
    let ctx = context(config, plan, key, exec);
    let mut samples = Vec::new();
    for &n in config.n_list.as_ref().expect("resolved") {
        let cfg = ChaosConfig {
            n,
            stepping,
            replications: config.replications,
            p: config.p,
            pool_size: config.m.unwrap_or(POOL_FACTOR * n),
        };
        samples.push(chaos_error(&model, &cfg, &ctx)?);
    }
    let report = try_fit(&samples)?.with_theory(CHAOS_THEORY.0, CHAOS_THEORY.1);
    let monotone = is_nonincreasing(&samples, MONOTONE_SLACK);
    let mut checks = vec![Check::new(
        "chaos.monotone",
        monotone,
        format!("estimates non-increasing in N up to {MONOTONE_SLACK}·SE"),
    )];
    if samples.len() >= 3 && samples.iter().any(|s| s.estimate > 0.0) {
        checks.push(slope_check("chaos.slope", &report, |s| s <= CHAOS_SLOPE_MAX, "<= -0.25"));
    }
    Ok(Artifacts {
        files: vec![("rate", rate_csv(&samples))],
        summary: report_json(&report, config.master_seed),
        checks,
    })
}

fn euler(config: &RunConfig, plan: SeedPlan, key: ExperimentKey, exec: Execution) -> Result<Artifacts, CliError> {
    let model = model_of(config)?;
    let cfg = EulerConfig {
        n: config.n.expect("resolved"),
        horizon: config.horizon,
        h_list: config.h_list.clone().expect("resolved"),
        h_ref: config.h_ref.expect("resolved"),
        replications: config.replications,
        p: config.p,
        reference_mode: config.reference_mode.expect("resolved"),
    };
    let samples = euler_error(&model, &cfg, &context(config, plan, key, exec))?;
    let mut report = try_fit(&samples)?.with_theory(EULER_THEORY.0, EULER_THEORY.1);
    let lipschitz = model.alpha() == 1.0 && model.beta() == 1.0;
    let mut checks = Vec::new();
    if lipschitz && config.p == 2 && samples.len() >= 3 {
        checks.push(slope_check("euler.slope", &report, |s| s >= EULER_SLOPE_MIN, ">= 0.4"));
    } else {
        report
            .notes
            .push("slope reported only: the envelope is asserted for alpha = beta = 1, p = 2".into());
    }
    Ok(Artifacts {
        files: vec![("rate", rate_csv(&samples))],
        summary: report_json(&report, config.master_seed),
        checks,
    })
}

fn fg(config: &RunConfig, plan: SeedPlan, key: ExperimentKey, exec: Execution) -> Result<Artifacts, CliError> {
    let report = fg_rate(
        &config.initial,
        config.n_list.as_ref().expect("resolved"),
        config.replications,
        &plan,
        key,
        exec,
    )?;
    let mut checks = Vec::new();
    if report.samples.iter().any(|s| s.estimate > 0.0) {
        checks.push(slope_check("fg.slope", &report, |s| s <= FG_SLOPE_MAX, "<= -0.4"));
    }
    Ok(Artifacts {
        files: vec![("rate", rate_csv(&report.samples))],
        summary: report_json(&report, config.master_seed),
        checks,
    })
}

fn picard(config: &RunConfig, plan: SeedPlan, key: ExperimentKey, exec: Execution) -> Result<Artifacts, CliError> {
    let model = model_of(config)?;
    let stepping = stepping(config)?;
    let bundle = DriverBundle::new(plan, key, config.horizon, &model, config.initial)?;
    let cfg = PicardConfig {
        pool_size: config.m.expect("resolved"),
        k_max: config.k_max.expect("resolved"),
        tol: config.tol.expect("resolved"),
    };
    let report = picard_flow(&model, &cfg, &stepping, &bundle, exec)?;
    let iterations = csv_bytes(
        ["iteration", "distance"],
        report
            .distances
            .iter()
            .enumerate()
            .map(|(k, d)| [(k + 1).to_string(), d.to_string()]),
    );
    let flow = &report.flow;
    let rows = flow.times().iter().zip(flow.measures()).flat_map(|(t, mu)| {
        mu.atoms()
            .iter()
            .enumerate()
            .map(move |(rank, x)| [t.to_string(), rank.to_string(), x.to_string()])
    });
    let flow_csv = csv_bytes(["time", "rank", "position"], rows);
    let contracting = report.distances.iter().skip(1).collect::<Vec<_>>().windows(2).all(|w| w[1] < w[0]);
    let checks = vec![
        Check::new(
            "picard.converged",
            report.converged,
            format!("{} iterations, last distance {:e}", report.iterations(), report.distances.last().unwrap()),
        ),
        Check::new(
            "picard.contraction",
            contracting,
            "distances strictly decreasing after iteration 2".into(),
        ),
    ];
    let summary = json!({
        "iterations": report.iterations(),
        "converged": report.converged,
        "distances": report.distances,
        "warning": (!report.converged).then_some("k_max reached before tol"),
    });
    Ok(Artifacts {
        files: vec![("iterations", iterations), ("flow", flow_csv)],
        summary,
        checks,
    })
}

fn yw(config: &RunConfig) -> Result<Artifacts, CliError> {
    let probes = config.probes.expect("resolved");
    let [lo, hi] = config.eps_range.expect("resolved");
    let b = check_bounds(probes, (lo, hi), config.master_seed);
    let csv = csv_bytes(
        ["probes", "eps_min", "eps_max", "violations", "max_violation", "fd_probes", "max_fd_error"],
        [[
            b.probes.to_string(),
            lo.to_string(),
            hi.to_string(),
            b.violations.to_string(),
            b.max_violation.to_string(),
            b.fd_probes.to_string(),
            b.max_fd_error.to_string(),
        ]],
    );
    let checks = vec![
        Check::new(
            "yw.bounds",
            b.violations == 0 && b.max_violation <= BOUND_TOL,
            format!("{} violations over {} probes, max excess {:e}", b.violations, b.probes, b.max_violation),
        ),
        Check::new(
            "yw.finite_difference",
            b.max_fd_error < FD_TOL,
            format!("max error {:e} over {} probes", b.max_fd_error, b.fd_probes),
        ),
    ];
    Ok(Artifacts {
        files: vec![("bounds", csv)],
        summary: json!({ "probes": probes, "eps_range": [lo, hi] }),
        checks,
    })
}

fn read_cloud(path: &Path) -> Result<EmpiricalMeasure, CliError> {
    let f = fs::File::open(path).map_err(io_err(path))?;
    Ok(EmpiricalMeasure::read_csv(f)?)
}

/// Random clouds of 1..=max_atoms uniform atoms on [-5, 5], one stream per pair.
pub(crate) fn random_pair(plan: &SeedPlan, key: ExperimentKey, j: usize, max_atoms: usize) -> (EmpiricalMeasure, EmpiricalMeasure) {
    let mut rng = plan.stream(key, j as u64, DriverKind::Initial);
    let n = rng.random_range(1..=max_atoms);
    let mut cloud = || {
        let xs = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        EmpiricalMeasure::new(xs).expect("finite atoms")
    };
    let a = cloud();
    (a, cloud())
}

fn wasserstein(config: &RunConfig, plan: SeedPlan, key: ExperimentKey) -> Result<Artifacts, CliError> {
    let p = config.p as f64;
    if let Some([a, b]) = &config.clouds {
        let (mu, nu) = (read_cloud(a)?, read_cloud(b)?);
        let d = wasserstein_p(&mu, &nu, p)?;
        let csv = csv_bytes(
            ["p", "n_a", "n_b", "distance"],
            [[p.to_string(), mu.len().to_string(), nu.len().to_string(), d.to_string()]],
        );
        return Ok(Artifacts {
            files: vec![("distance", csv)],
            summary: json!({ "distance": d, "p": p }),
            checks: Vec::new(),
        });
    }
    let pairs = config.pairs.expect("resolved");
    let max_atoms = config.max_atoms.expect("resolved");
    let mut rows = Vec::with_capacity(pairs);
    let mut worst = 0.0f64;
    for j in 0..pairs {
        let (mu, nu) = random_pair(&plan, key, j, max_atoms);
        let fast = wasserstein_p(&mu, &nu, p)?;
        let slow = wasserstein_oracle(&mu, &nu, p)?;
        worst = worst.max((fast - slow).abs());
        rows.push([
            j.to_string(),
            mu.len().to_string(),
            fast.to_string(),
            slow.to_string(),
            (fast - slow).abs().to_string(),
        ]);
    }
    Ok(Artifacts {
        files: vec![("oracle", csv_bytes(["pair", "n", "sorted", "oracle", "abs_diff"], rows))],
        summary: json!({ "pairs": pairs, "p": p, "max_abs_diff": worst }),
        checks: vec![Check::new(
            "wasserstein.oracle",
            worst <= ORACLE_TOL,
            format!("max |sorted - oracle| = {worst:e} over {pairs} pairs"),
        )],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::parse_config;

    fn in_dir(text: &str, dir: &Path) -> RunConfig {
        let mut c = parse_config(text).unwrap();
        c.output_dir = Some(dir.to_path_buf());
        c
    }

    fn read_csv_rows(path: &Path) -> Vec<Vec<String>> {
        let mut r = csv::Reader::from_path(path).unwrap();
        r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
    }

    #[test]
    fn yw_check_passes_and_writes_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let out = run(&in_dir("experiment = \"yw-check\"\nprobes = 2000\n", dir.path()), Execution::Parallel).unwrap();
        assert!(out.failed_checks().is_empty(), "{:?}", out.manifest.checks);
        assert_eq!(out.manifest.outputs.len(), 1);
        let text = fs::read_to_string(&out.manifest_path).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["status"], "ok");
        let bytes = fs::read(&out.manifest.outputs[0].path).unwrap();
        assert_eq!(v["outputs"][0]["sha256"], hex(&Sha256::digest(&bytes)));
    }

    #[test]
    fn chaos_without_interaction_writes_zeros() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = in_dir(
            "experiment = \"chaos\"\nN_list = [4, 8]\nR = 2\nh = 0.125\n[params]\nc = 0.0\n",
            dir.path(),
        );
        let out = run(&cfg, Execution::Parallel).unwrap();
        let rows = read_csv_rows(&out.manifest.outputs[0].path);
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r[1] == "0"));
    }

    #[test]
    fn zero_noise_trajectory_tracks_exponential() {
        let dir = tempfile::tempdir().unwrap();
        let h = 1.0 / 64.0;
        let cfg = in_dir(
            &format!(
                "experiment = \"simulate\"\nN = 1\nh = {h}\n[params]\nc = 0.0\ns = 0.0\ng0 = 0.0\ng1 = 0.0\n[initial]\nlaw = \"point_mass\"\nat = 1.0\n"
            ),
            dir.path(),
        );
        let out = run(&cfg, Execution::Sequential).unwrap();
        let rows = read_csv_rows(&out.manifest.outputs[0].path);
        assert_eq!(rows.len(), 65);
        for r in rows {
            let t: f64 = r[0].parse().unwrap();
            let x: f64 = r[2].parse().unwrap();
            assert!((x - (-t).exp()).abs() <= 2.0 * h);
        }
    }

    #[test]
    fn wasserstein_oracle_mode_and_cloud_files() {
        let dir = tempfile::tempdir().unwrap();
        let out = run(&in_dir("experiment = \"wasserstein\"\npairs = 50\n", dir.path()), Execution::Parallel).unwrap();
        assert!(out.failed_checks().is_empty());

        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        EmpiricalMeasure::new(vec![0.0, 1.0]).unwrap().write_csv(fs::File::create(&a).unwrap()).unwrap();
        EmpiricalMeasure::new(vec![2.0, 3.0]).unwrap().write_csv(fs::File::create(&b).unwrap()).unwrap();
        let text = format!("experiment = \"wasserstein\"\np = 1\nclouds = [{:?}, {:?}]\n", a, b);
        let out = run(&in_dir(&text, dir.path()), Execution::Parallel).unwrap();
        assert_eq!(out.manifest.summary["distance"], 2.0);
    }

    #[test]
    fn failures_leave_a_partial_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let text = "experiment = \"wasserstein\"\nclouds = [\"/nonexistent/a.csv\", \"/nonexistent/b.csv\"]\n";
        assert!(run(&in_dir(text, dir.path()), Execution::Parallel).is_err());
        let manifest = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().path())
            .find(|p| p.to_string_lossy().ends_with(".manifest.json"))
            .unwrap();
        let v: Value = serde_json::from_str(&fs::read_to_string(manifest).unwrap()).unwrap();
        assert_eq!(v["partial"], true);
        assert_eq!(v["status"], "failed");
    }

    #[test]
    fn csv_bytes_are_thread_count_independent() {
        let text = "experiment = \"chaos\"\nmodel = \"M_CHAOS\"\nN_list = [4, 8, 16]\nR = 2\nh = 0.0625\n";
        let mut digests = Vec::new();
        for threads in [1, 8] {
            let dir = tempfile::tempdir().unwrap();
            let out = run_with_threads(&in_dir(text, dir.path()), Some(threads)).unwrap();
            digests.push(fs::read(&out.manifest.outputs[0].path).unwrap());
        }
        assert_eq!(digests[0], digests[1]);
    }
}
