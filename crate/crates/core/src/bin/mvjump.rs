//! `mvjump <experiment> [--config PATH] [--seed N] [--threads N] [--out DIR] [--assert]`

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mvjump::cli::{parse_config, run_with_threads, Experiment, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "mvjump", version, about = "Monte Carlo experiments for jump-type McKean-Vlasov SDEs")]
struct Args {
    /// Experiment to run.
    #[arg(value_enum)]
    experiment: Experiment,
    /// TOML run description; its `experiment` must match the subcommand.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory. Falls back to the config's `output_dir`, then to
    /// $MVJ_OUT_DIR, then to ./mvjump-out.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with status 3 if any envelope check fails.
    #[arg(long = "assert")]
    assert_checks: bool,
}

fn load(args: &Args) -> Result<RunConfig, String> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let c = parse_config(&text).map_err(|e| e.to_string())?;
            if c.experiment != args.experiment {
                return Err(format!(
                    "config describes `{}` but `{}` was requested",
                    c.experiment.name(),
                    args.experiment.name()
                ));
            }
            c
        }
        None => RunConfig::new(args.experiment),
    };
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(out) = &args.out {
        config.output_dir = Some(out.clone());
    }
    Ok(config)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let config = match load(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let outcome = match run_with_threads(&config, args.threads) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {} failed: {e}", config.experiment.name());
            return ExitCode::from(1);
        }
    };
    for check in &outcome.manifest.checks {
        let tag = if check.passed { "PASS" } else { "FAIL" };
        println!("{tag} {}: {}", check.name, check.detail);
    }
    for out in &outcome.manifest.outputs {
        println!("wrote {}", out.path.display());
    }
    println!("manifest {}", outcome.manifest_path.display());
    let failed = outcome.failed_checks();
    if args.assert_checks && !failed.is_empty() {
        for c in failed {
            eprintln!("assertion failed: {}", c.name);
        }
        return ExitCode::from(3);
    }
    ExitCode::SUCCESS
}
