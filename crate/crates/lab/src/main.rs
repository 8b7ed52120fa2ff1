use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use inflate_lab::{fmt_sig, parse_ranks, run, Experiment, ExperimentConfig, LabError, EXIT_CHECK_FAILED, FULL_SAMPLES};

/// Reproduce entanglement-inflation experiments and write CSV plus a JSON summary.
#[derive(Parser, Debug)]
#[command(name = "inflate-lab", author, version)]
struct Cli {
    experiment: Experiment,
    /// Monte Carlo samples per group (default 5000).
    #[arg(long)]
    samples: Option<usize>,
    /// Master seed; sample i uses the stream (seed, i).
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated measurement ranks, e.g. 2,3,4.
    #[arg(long)]
    ranks: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use 50000 samples unless --samples is given.
    #[arg(long)]
    full: bool,
    /// Exit with status 2 when any reference comparison fails.
    #[arg(long)]
    check: bool,
    /// JSON file with an ExperimentConfig; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig, LabError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::new(cli.experiment),
    };
    cfg.experiment = cli.experiment;
    if cli.full {
        cfg.samples = FULL_SAMPLES;
    }
    if let Some(n) = cli.samples {
        cfg.samples = n;
    }
    if let Some(s) = cli.seed {
        cfg.master_seed = s;
    }
    if let Some(r) = &cli.ranks {
        cfg.ranks = parse_ranks(r)?;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = build_config(&cli).and_then(|cfg| run(&cfg));
    match result {
        Ok(report) => {
            for c in &report.checks {
                let status = if c.passed { "PASS" } else { "FAIL" };
                match (c.expected, c.tolerance) {
                    (Some(e), Some(t)) => println!("{status} {} observed={} expected={e}±{t}", c.name, fmt_sig(c.observed)),
                    _ => println!("{status} {} observed={}", c.name, fmt_sig(c.observed)),
                }
            }
            if cli.check && !report.all_passed() {
                eprintln!("{} check(s) failed", report.failed_checks().count());
                return ExitCode::from(EXIT_CHECK_FAILED as u8);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
