use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ou_contract::app::{run, EXIT_ABORTED};
use ou_contract::config::{RunConfig, Suite};

/// Verification lab for gradient contractivity of the Ornstein-Uhlenbeck
/// resolvent on Gaussian-convex domains.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the boundary and check the sign of the Gaussian mean curvature.
    Curvature(Common),
    /// Solve the resolvent once and write nodal values.
    Solve(Common),
    /// Measure the gradient contraction ratios.
    Contract(Common),
    /// Check the pointwise and boundary ingredients of the contraction argument.
    Lemma(Common),
    /// Compare against analytic curvature, Hermite eigenfunctions and Feynman-Kac.
    Oracle(Common),
    /// Path-space examples: series identities, functionals, curvature audits.
    Wiener(Common),
    /// Convergence of finite-dimensional approximations.
    Converge(Common),
    /// Everything in the config.
    All(Common),
}

#[derive(Args)]
struct Common {
    /// TOML suite file; the built-in oracle and path-space suites when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Multiplies every asserted tolerance.
    #[arg(long, default_value_t = 1.0)]
    tol_scale: f64,
    /// Overrides the grid spacing of grid-based suites.
    #[arg(long)]
    grid_h: Option<f64>,
    /// Fail on violated checks (default).
    #[arg(long, overrides_with = "no_assert")]
    assert: bool,
    /// Record checks without failing.
    #[arg(long)]
    no_assert: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (suite, c) = match cli.command {
        Command::Curvature(c) => (Suite::Curvature, c),
        Command::Solve(c) => (Suite::Solve, c),
        Command::Contract(c) => (Suite::Contract, c),
        Command::Lemma(c) => (Suite::Lemma, c),
        Command::Oracle(c) => (Suite::Oracle, c),
        Command::Wiener(c) => (Suite::Wiener, c),
        Command::Converge(c) => (Suite::Converge, c),
        Command::All(c) => (Suite::All, c),
    };
    if let Some(n) = std::env::var("OU_CONTRACT_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cfg = match RunConfig::new(suite, c.config, c.out, c.seed, c.tol_scale, c.grid_h, !c.no_assert) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ABORTED as u8);
        }
    };
    match run(&cfg) {
        Ok(outcome) => {
            let failures = outcome.report.failures();
            for f in &failures {
                let bound = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:e}"));
                eprintln!(
                    "FAIL [{}] {}: observed {:e}, bounds [{}, {}]",
                    f.suite,
                    f.name,
                    f.observed,
                    bound(f.lower),
                    bound(f.upper)
                );
            }
            if let Some(msg) = &outcome.aborted {
                eprintln!("error: {msg}");
            }
            println!(
                "{}: {} checks, {} asserted failures, artifacts in {}",
                suite.label(),
                outcome.report.checks.len(),
                failures.len(),
                cfg.out_dir.display()
            );
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ABORTED as u8)
        }
    }
}
