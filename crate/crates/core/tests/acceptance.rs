//! End-to-end acceptance run: one PASS/FAIL line per criterion, with
//! timings. Criteria run in sequence and every failure is reported before
//! the test fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use ou_contract::config::{EigenOracleConfig, FkOracleConfig, RunConfig, Suite};
use ou_contract::report::{CheckRecord, Environment, SuiteReport};
use ou_contract::suites::{
    contract_suite, converge_suite, curvature_oracles, eigen_oracle, fk_cross_check, series_checks, wiener_suite, Ctx,
};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str, suite: Suite) -> RunConfig {
    let out = std::env::temp_dir().join("ou-contract-acceptance");
    RunConfig::new(suite, Some(configs().join(name)), out, None, 1.0, None, true).expect("shipped config loads")
}

fn empty_report(cfg: &RunConfig) -> SuiteReport {
    let env = Environment {
        version: env!("CARGO_PKG_VERSION").into(),
        suite: cfg.suite.label().into(),
        seed: cfg.seed,
        generator: ou_contract::rng::GENERATOR_NAME.into(),
        tol_scale: 1.0,
        grid_h: None,
        assert: true,
        grids: Vec::new(),
    };
    SuiteReport::new(env, serde_json::Value::Null)
}

fn ctx(cfg: &RunConfig) -> Ctx {
    Ctx { seed: cfg.seed, tol_scale: 1.0, assert: true }
}

/// Failures among asserted checks matching `select`, plus a guard that at
/// least one such check exists.
fn failures(checks: &[CheckRecord], select: impl Fn(&CheckRecord) -> bool) -> Result<usize, String> {
    let chosen: Vec<&CheckRecord> = checks.iter().filter(|c| c.asserted && select(c)).collect();
    if chosen.is_empty() {
        return Err("no asserted checks".into());
    }
    let bad: Vec<String> = chosen.iter().filter(|c| !c.pass).map(|c| format!("{} = {:e}", c.name, c.observed)).collect();
    if bad.is_empty() {
        Ok(chosen.len())
    } else {
        Err(bad.join("; "))
    }
}

fn within(elapsed: Duration, budget_s: u64) -> Result<(), String> {
    if elapsed > Duration::from_secs(budget_s) {
        Err(format!("took {:.1} s, budget {budget_s} s", elapsed.as_secs_f64()))
    } else {
        Ok(())
    }
}

struct Outcome {
    id: usize,
    title: &'static str,
    result: Result<String, String>,
    elapsed: Duration,
}

fn criterion(id: usize, title: &'static str, body: impl FnOnce() -> Result<String, String>) -> Outcome {
    let start = Instant::now();
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(body))
        .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
    let out = Outcome { id, title, result, elapsed: start.elapsed() };
    let (tag, detail) = match &out.result {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("{tag} criterion {:>2} {} [{:.1} s]: {detail}", out.id, out.title, out.elapsed.as_secs_f64());
    out
}

fn curvature_oracle_criterion() -> Result<String, String> {
    let rows = curvature_oracles(64, 1, 1.0).map_err(|e| e.to_string())?;
    let worst = rows.iter().map(|r| r.max_error).fold(0.0, f64::max);
    let bad: Vec<String> = rows.iter().filter(|r| !r.pass).map(|r| format!("{} {}: {:e}", r.case, r.quantity, r.max_error)).collect();
    if rows.len() != 15 {
        return Err(format!("expected 15 oracle rows, got {}", rows.len()));
    }
    if bad.is_empty() {
        Ok(format!("15 cases, worst error {worst:.1e}"))
    } else {
        Err(bad.join("; "))
    }
}

fn eigen_criterion() -> Result<String, String> {
    let start = Instant::now();
    let rows = eigen_oracle(&EigenOracleConfig::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let cfg = EigenOracleConfig::default();
    let bad: Vec<String> = rows
        .iter()
        .filter(|r| !(r.converged && r.error <= cfg.tol && r.ratio >= cfg.min_ratio))
        .map(|r| format!("k={} sigma={}: error {:e}, ratio {:.2}", r.k, r.sigma, r.error, r.ratio))
        .collect();
    if !bad.is_empty() {
        return Err(bad.join("; "));
    }
    within(elapsed, 10)?;
    let worst = rows.iter().map(|r| r.error).fold(0.0, f64::max);
    let min_ratio = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    Ok(format!("{} cases, worst error {worst:.1e}, min refinement ratio {min_ratio:.2}", rows.len()))
}

fn fk_criterion() -> Result<String, String> {
    let cfg = FkOracleConfig::default();
    let start = Instant::now();
    let rows = fk_cross_check(&cfg, ou_contract::config::DEFAULT_SEED).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    if rows.len() != 10 || rows.iter().any(|r| r.n_paths != 200_000 || r.dt != 1e-3) {
        return Err("expected 5 probes per domain at N = 2e5, dt = 1e-3".into());
    }
    let bad: Vec<String> = rows.iter().filter(|r| !(r.z.abs() <= 3.0)).map(|r| format!("{} {:?}: z = {:.2}", r.domain, r.x, r.z)).collect();
    if !bad.is_empty() {
        return Err(bad.join("; "));
    }
    within(elapsed, 120)?;
    let worst = rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
    Ok(format!("10 probes, max |z| = {worst:.2}"))
}

const CONTRACT_CONFIGS: [&str; 3] = ["halfspace.toml", "ball.toml", "cylinder_affine.toml"];

/// One shared sweep feeds the contractivity, lemma and identity criteria.
fn contract_report() -> Result<(SuiteReport, Duration), String> {
    let start = Instant::now();
    let mut all: Option<SuiteReport> = None;
    for name in CONTRACT_CONFIGS {
        let cfg = load(name, Suite::All);
        let rep = all.get_or_insert_with(|| empty_report(&cfg));
        contract_suite(&cfg.file.contract, &ctx(&cfg), rep, true, true).map_err(|e| format!("{name}: {e}"))?;
    }
    Ok((all.unwrap(), start.elapsed()))
}

fn contract_criterion(rep: &Result<(SuiteReport, Duration), String>) -> Result<String, String> {
    let (rep, elapsed) = rep.as_ref().map_err(Clone::clone)?;
    let base = rep.ratios.iter().filter(|r| !r.informational).count();
    if base != 3 * 3 * 4 * 3 {
        return Err(format!("expected 108 base ratios, got {base}"));
    }
    let n = failures(&rep.checks, |c| c.suite == "contract" && !c.name.contains("near-identity"))?;
    within(*elapsed, 300)?;
    let worst = rep.ratios.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(format!("{n} checks, 108 ratios, max ratio {worst:.3}, shared sweep {:.1} s", elapsed.as_secs_f64()))
}

fn lemma_criterion(rep: &Result<(SuiteReport, Duration), String>) -> Result<String, String> {
    let (rep, _) = rep.as_ref().map_err(Clone::clone)?;
    let n = failures(&rep.checks, |c| c.suite == "lemma")?;
    Ok(format!("{n} pointwise and sign-integral checks"))
}

fn identity_criterion(rep: &Result<(SuiteReport, Duration), String>) -> Result<String, String> {
    let (rep, _) = rep.as_ref().map_err(Clone::clone)?;
    let chosen: Vec<&CheckRecord> = rep.checks.iter().filter(|c| c.name.contains("near-identity")).collect();
    let n = failures(&rep.checks, |c| c.name.contains("near-identity"))?;
    let bad: Vec<String> = chosen.iter().filter(|c| !(0.9..=1.02).contains(&c.observed)).map(|c| c.name.clone()).collect();
    if !bad.is_empty() {
        return Err(bad.join("; "));
    }
    let lo = chosen.iter().map(|c| c.observed).fold(f64::INFINITY, f64::min);
    let hi = chosen.iter().map(|c| c.observed).fold(0.0, f64::max);
    Ok(format!("{n} ratios in [{lo:.3}, {hi:.3}]"))
}

fn series_criterion() -> Result<String, String> {
    let start = Instant::now();
    let s = series_checks().map_err(|e| e.to_string())?;
    within(start.elapsed(), 5)?;
    if s.basel_gap <= 2e-3 && s.bm_trace_gap <= 1e-3 && s.bridge_sup_error <= 2e-3 && s.basel_monotone {
        Ok(format!("gaps {:.1e}, {:.1e}, {:.1e}", s.basel_gap, s.bm_trace_gap, s.bridge_sup_error))
    } else {
        Err(format!("{s:?}"))
    }
}

fn audit_criterion() -> Result<String, String> {
    let cfg = load("wiener.toml", Suite::Wiener);
    let mut rep = empty_report(&cfg);
    wiener_suite(cfg.file.wiener.as_ref().ok_or("no [wiener] section")?, &ctx(&cfg), &mut rep).map_err(|e| e.to_string())?;
    let rejected = rep.checks.iter().any(|c| c.name == "invalid-identity: validation rejects" && c.pass);
    if !rejected {
        return Err("the invalid spec was not rejected".into());
    }
    let n = failures(&rep.checks, |c| c.name.contains("m=") || c.name.contains("validation"))?;
    let worst = rep
        .checks
        .iter()
        .filter(|c| c.name.ends_with("min Gaussian curvature"))
        .map(|c| c.observed)
        .fold(f64::INFINITY, f64::min);
    Ok(format!("{n} audit checks, min H^gamma {worst:.3}, invalid spec rejected"))
}

fn converge_criterion() -> Result<String, String> {
    let start = Instant::now();
    let cfg = load("converge.toml", Suite::Converge);
    let mut rep = empty_report(&cfg);
    converge_suite(&cfg.file.converge, &ctx(&cfg), &mut rep).map_err(|e| e.to_string())?;
    let n = failures(&rep.checks, |c| c.suite == "converge")?;
    within(start.elapsed(), 600)?;
    let at = |sigma: f64, k: usize| rep.convergence.iter().find(|r| r.sigma == sigma && r.n == k).map(|r| r.d_l2);
    match (at(1.0, 1), at(1.0, 2)) {
        (Some(d1), Some(d2)) if d1.is_finite() && d2 <= d1 => Ok(format!("{n} checks, D_1 = {d1:.2e}, D_2 = {d2:.2e}")),
        other => Err(format!("unexpected D_n at sigma = 1: {other:?}")),
    }
}

fn negative_control_criterion() -> Result<String, String> {
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = configs().join("ball_negative.toml");
    let exe = env!("CARGO_BIN_EXE_ou-contract");
    let code = |suite: &str, dir: &str| {
        Command::new(exe)
            .args([suite, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(out.path().join(dir))
            .output()
            .map_err(|e| e.to_string())
            .map(|o| o.status.code())
    };
    let curvature = code("curvature", "curvature")?;
    if curvature != Some(1) {
        return Err(format!("curvature exited {curvature:?}, expected 1"));
    }
    let contract = code("contract", "contract")?;
    let text = std::fs::read_to_string(out.path().join("contract/report.json")).map_err(|e| e.to_string())?;
    let report: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let checks = report["report"]["checks"].as_array().ok_or("no checks")?;
    let ratios = checks.iter().filter(|c| c["name"].as_str().is_some_and(|n| n.contains("ratio"))).count();
    let asserted = checks.iter().filter(|c| c["asserted"] == true).count();
    if contract != Some(0) || ratios == 0 || asserted != 0 {
        return Err(format!("contract exited {contract:?} with {ratios} ratio records, {asserted} asserted"));
    }
    Ok(format!("curvature exits 1; {ratios} contraction records, none asserted"))
}

#[test]
fn acceptance_criteria() {
    let mut outcomes = vec![
        criterion(1, "curvature oracles", curvature_oracle_criterion),
        criterion(2, "solver eigenfunction oracle", eigen_criterion),
        criterion(3, "finite differences agree with Feynman-Kac", fk_criterion),
    ];
    let sweep = contract_report();
    outcomes.push(criterion(4, "gradient contractivity", || contract_criterion(&sweep)));
    outcomes.push(criterion(5, "lemma and boundary sign checks", || lemma_criterion(&sweep)));
    outcomes.push(criterion(6, "near-identity limit", || identity_criterion(&sweep)));
    outcomes.push(criterion(7, "path-space series identities", series_criterion));
    outcomes.push(criterion(8, "curvature audits", audit_criterion));
    outcomes.push(criterion(9, "cylindrical convergence study", converge_criterion));
    outcomes.push(criterion(10, "negative control", negative_control_criterion));
    let failed: Vec<String> = outcomes.iter().filter(|o| o.result.is_err()).map(|o| format!("{} ({})", o.id, o.title)).collect();
    assert!(failed.is_empty(), "failed criteria: {}", failed.join(", "));
}
