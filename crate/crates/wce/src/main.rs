use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{CommandFactory, Parser, Subcommand};
use wce::config::{parse_config, Overrides, ScenarioConfig};
use wce::io::write_json;
use wce::parallel::RayonExecutor;
use wce::scenario::{classify_scenario, run_samples, run_scenario};
use wce::verify::{verify, VerifySettings, ALL_CRITERIA};

/// Wiener chaos solver for linear stochastic parabolic equations.
///
/// Exit codes: 0 success, 1 usage or runtime error, 2 a comparison or
/// acceptance threshold failed. The worker count follows WCE_THREADS.
#[derive(Parser)]
#[command(name = "wce", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Scenario config (TOML).
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory; overrides output.dir.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Overrides oracle.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides truncation.order.
    #[arg(long)]
    order: Option<u32>,
    /// Overrides oracle.paths.
    #[arg(long)]
    paths: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Classify, solve, run diagnostics and comparisons, write the report bundle.
    Solve(Common),
    /// Run the acceptance criteria; without --config the reference configuration is used.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Comma-separated criterion numbers (default: all).
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<u8>,
    },
    /// Print the parabolicity classification, weights and C₂ as JSON.
    Classify(Common),
    /// Evaluate the chaos solution on seeded Gaussian samples.
    Sample {
        #[command(flatten)]
        common: Common,
        /// Overrides oracle.samples.
        #[arg(long)]
        samples: Option<usize>,
    },
}

/// `println!` that tolerates a closed stdout (e.g. piped into `head`).
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

fn load(common: &Common, required: bool) -> Result<Option<ScenarioConfig>> {
    let Some(path) = &common.config else {
        anyhow::ensure!(!required, "--config is required for this command");
        return Ok(None);
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = parse_config(&text).with_context(|| format!("invalid config {}", path.display()))?;
    cfg.apply(&Overrides { seed: common.seed, order: common.order, paths: common.paths, out: common.out.clone() })
        .context("invalid override")?;
    Ok(Some(cfg))
}

fn run(cli: Cli) -> Result<u8> {
    let executor = RayonExecutor::from_env()?;
    match cli.command {
        Command::Solve(common) => {
            let cfg = load(&common, true)?.expect("required");
            let report = run_scenario(&cfg, &executor)?;
            for c in &report.checks {
                out!("{:<24} {:?} {}", c.name, c.status, c.detail);
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            Ok(report.exit_code as u8)
        }
        Command::Verify { common, criteria } => {
            let cfg = match load(&common, false)? {
                Some(c) => c,
                None => {
                    let mut c = ScenarioConfig::defaults(wce::config::ScenarioKind::HeatAdvection);
                    c.apply(&Overrides {
                        seed: common.seed,
                        order: common.order,
                        paths: common.paths,
                        out: common.out.clone(),
                    })?;
                    c
                }
            };
            let ids = if criteria.is_empty() { ALL_CRITERIA.to_vec() } else { criteria };
            let summary = verify(&VerifySettings::from_config(&cfg), &ids, &executor);
            for c in &summary.criteria {
                out!("{}", c.summary_line());
            }
            write_json(&cfg.output.dir.join("verify.json"), &summary)?;
            Ok(if summary.pass { 0 } else { 2 })
        }
        Command::Classify(common) => {
            let cfg = load(&common, true)?.expect("required");
            out!("{}", serde_json::to_string_pretty(&classify_scenario(&cfg)?)?);
            Ok(0)
        }
        Command::Sample { common, samples } => {
            let cfg = load(&common, true)?.expect("required");
            run_samples(&cfg, samples.unwrap_or(cfg.oracle.samples), &executor)?;
            out!("wrote samples to {}", Path::new(&cfg.output.dir).display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            eprintln!("{}", Cli::command().render_usage());
            ExitCode::from(1)
        }
    }
}
