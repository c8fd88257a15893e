//! Runs a configured suite and writes its artifacts.

use std::path::PathBuf;

use crate::config::{RunConfig, Suite};
use crate::error::Result;
use crate::report::{emit_plotdata, Environment, SuiteReport};
use crate::rng::GENERATOR_NAME;
use crate::suites::{contract_suite, converge_suite, curvature_suite, oracle_suite, solve_suite, wiener_suite, Ctx};

/// Every asserted check passed.
pub const EXIT_OK: i32 = 0;
/// At least one asserted check failed.
pub const EXIT_CHECK_FAILED: i32 = 1;
/// Bad configuration, or a suite aborted before finishing.
pub const EXIT_ABORTED: i32 = 2;

#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub report: SuiteReport,
    /// Set when a suite stopped with an error; the partial report is still written.
    pub aborted: Option<String>,
    pub written: Vec<PathBuf>,
}

/// Runs the selected suites. Only I/O failures while writing artifacts
/// surface as `Err`.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.check_nonempty()?;
    let env = Environment {
        version: env!("CARGO_PKG_VERSION").into(),
        suite: cfg.suite.label().into(),
        seed: cfg.seed,
        generator: GENERATOR_NAME.into(),
        tol_scale: cfg.tol_scale,
        grid_h: cfg.grid_h,
        assert: cfg.assert,
        grids: Vec::new(),
    };
    let mut report = SuiteReport::new(env, serde_json::to_value(&cfg.file)?);
    let ctx = Ctx { seed: cfg.seed, tol_scale: cfg.tol_scale, assert: cfg.assert };
    let aborted = run_suites(cfg, &ctx, &mut report).err().map(|e| e.to_string());
    if let Some(msg) = &aborted {
        report.sections.insert("aborted".into(), serde_json::Value::String(msg.clone()));
    }
    let mut written = report.write(&cfg.out_dir)?;
    written.extend(emit_plotdata(&report, &cfg.out_dir.join("plotdata"))?);
    let exit_code = if aborted.is_some() {
        EXIT_ABORTED
    } else if report.passed() {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    };
    Ok(RunOutcome { exit_code, report, aborted, written })
}

fn run_suites(cfg: &RunConfig, ctx: &Ctx, rep: &mut SuiteReport) -> Result<()> {
    let f = &cfg.file;
    let s = cfg.suite;
    if s.includes(Suite::Curvature) && !f.curvature.is_empty() {
        curvature_suite(&f.curvature, ctx, rep)?;
    }
    if s.includes(Suite::Solve) && !f.solve.is_empty() {
        solve_suite(&f.solve, ctx, rep)?;
    }
    let contract = s.includes(Suite::Contract);
    let lemma = s.includes(Suite::Lemma);
    if (contract || lemma) && !f.contract.is_empty() {
        contract_suite(&f.contract, ctx, rep, contract, lemma)?;
    }
    if s.includes(Suite::Oracle) {
        if let Some(o) = &f.oracle {
            oracle_suite(o, ctx, rep)?;
        }
    }
    if s.includes(Suite::Wiener) {
        if let Some(w) = &f.wiener {
            wiener_suite(w, ctx, rep)?;
        }
    }
    if s.includes(Suite::Converge) && !f.converge.is_empty() {
        converge_suite(&f.converge, ctx, rep)?;
    }
    Ok(())
}
