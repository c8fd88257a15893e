//! The verification suites behind the CLI subcommands.
//!
//! Each suite appends check records, plot series, JSON sections and CSV
//! tables to a [`SuiteReport`]. Tolerances are multiplied by the run's
//! tolerance scale.

use std::f64::consts::PI;

use serde::Serialize;
use serde_json::json;

use crate::config::{BumpConfig, ContractConfig, ConvergeConfig, CurvatureConfig, EigenOracleConfig, Expectation, FkOracleConfig, GridConfig, OracleConfig, SolveConfig, WienerConfig};
use crate::contract::{contract_tolerance, contractivity_sweep, make_bump, BumpFunction, ContractJob, ContractRecord, SweepOutcome};
use crate::domain::{curvature_sign_scan, project_to_boundary, BoundaryPoint, gaussian_curvature, mean_curvature, LevelSetDomain, CURVATURE_SIGN_TOL};
use crate::error::{Error, Result};
use crate::feynman_kac::{mc_resolvent, KilledPathEstimator};
use crate::gauss::hermite_poly;
use crate::grid::{GaussianGrid, GridSpec, ScalarField};
use crate::report::{num, CheckRecord, CurvatureSeries, DnRow, SuiteReport, Table};
use crate::solver::{discrete_gradient, solve_resolvent, ResolventJob, SolverOptions};
use crate::wiener::{
    audit_tolerance, basel_check, cylindrical_curvature_audit, epigraph_curvature_audit, resolvent_convergence_study, trace_density,
    validate_functional, CylindricalDomain, KlBasis, KlKind, SQuadrature,
};

/// Per-run settings shared by all suites.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Ctx {
    pub seed: u64,
    pub tol_scale: f64,
    /// When false every check is recorded as unasserted.
    pub assert: bool,
}

impl Default for Ctx {
    fn default() -> Self {
        Self { seed: crate::config::DEFAULT_SEED, tol_scale: 1.0, assert: true }
    }
}

fn grid_spec(g: &GridConfig) -> Result<GridSpec> {
    GridSpec::with_spacing(g.lower.clone(), g.upper.clone(), g.h)
}

fn bumps_for(domain: &LevelSetDomain, bumps: &[BumpConfig]) -> Result<Vec<BumpFunction>> {
    bumps.iter().map(|b| make_bump(domain, &b.center, b.radius, b.margin)).collect()
}

fn coords(x: &[f64]) -> String {
    x.iter().map(|v| num(*v)).collect::<Vec<_>>().join(";")
}

// ---------------------------------------------------------------- curvature

/// Boundary scan of H^γ with an optional nonnegativity assertion.
pub fn curvature_suite(cfgs: &[CurvatureConfig], ctx: &Ctx, rep: &mut SuiteReport) -> Result<()> {
    let mut table = Table::new("curvature.csv", &["domain", "x", "mean_curvature", "gaussian_curvature"]);
    let mut sections = Vec::new();
    for cfg in cfgs {
        let dom = cfg.domain.build()?;
        let asserted = ctx.assert && cfg.assert_nonnegative;
        match curvature_sign_scan(&dom, cfg.samples, ctx.seed) {
            Ok(scan) => {
                for s in &scan.samples {
                    table.push(vec![dom.name().into(), coords(&s.x), num(s.mean), num(s.gaussian)]);
                }
                rep.checks.push(CheckRecord::new(
                    "curvature",
                    format!("{}: min Gaussian curvature >= 0", dom.name()),
                    &(&cfg.domain, cfg.samples, ctx.seed),
                    scan.min_gaussian,
                    Some(-CURVATURE_SIGN_TOL * ctx.tol_scale),
                    None,
                    asserted,
                ));
                rep.curvature.push(CurvatureSeries {
                    source: dom.name().into(),
                    values: scan.samples.iter().map(|s| s.gaussian).collect(),
                });
                sections.push(json!({
                    "domain": dom.name(),
                    "min_gaussian_curvature": scan.min_gaussian,
                    "argmin": scan.argmin,
                    "violations": scan.violations,
                    "samples": scan.samples.len(),
                }));
            }
            // Whole space: no boundary, nothing to violate.
            Err(Error::NoBoundary { .. }) => {
                sections.push(json!({ "domain": dom.name(), "boundary": "none reachable" }));
            }
            Err(e) => return Err(e),
        }
    }
    rep.sections.insert("curvature".into(), json!(sections));
    rep.tables.push(table);
    Ok(())
}

// -------------------------------------------------------------------- solve

/// Single resolvent solves with nodal output.
pub fn solve_suite(cfgs: &[SolveConfig], ctx: &Ctx, rep: &mut SuiteReport) -> Result<()> {
    let mut diags = Vec::new();
    for (k, cfg) in cfgs.iter().enumerate() {
        let dom = cfg.domain.build()?;
        let bump = make_bump(&dom, &cfg.bump.center, cfg.bump.radius, cfg.bump.margin)?;
        let spec = grid_spec(&cfg.grid)?;
        rep.environment.grids.push(spec.clone());
        let grid = GaussianGrid::new(spec, dom.clone())?;
        let y = ScalarField::from_fn(&grid, |x| bump.value(x));
        let opts = SolverOptions { tol: cfg.solver_tol, max_iter: None };
        let sol = solve_resolvent(&ResolventJob::new(cfg.sigma, y)?, &opts)?;
        rep.checks.push(CheckRecord::flag("solve", format!("{}: solver converged", dom.name()), cfg, sol.converged, ctx.assert));
        let grad = discrete_gradient(&sol.u).norms();
        let mut header: Vec<String> = (1..=grid.dim()).map(|i| format!("x{i}")).collect();
        header.extend(["u".into(), "grad_norm".into()]);
        let mut table = Table { file: format!("solve_{k}.csv"), header, rows: Vec::with_capacity(grid.len()) };
        for i in 0..grid.len() {
            let mut row: Vec<String> = grid.coords(i).iter().map(|v| num(*v)).collect();
            row.push(num(sol.u.values()[i]));
            row.push(num(grad.values()[i]));
            table.push(row);
        }
        rep.tables.push(table);
        diags.push(json!({ "domain": dom.name(), "diagnostics": sol.diagnostics }));
    }
    rep.sections.insert("solve".into(), json!(diags));
    Ok(())
}

// ---------------------------------------------------------- contract, lemma

fn contract_job(cfg: &ContractConfig, dom: &LevelSetDomain, spec: GridSpec, ctx: &Ctx) -> Result<ContractJob> {
    let mut job = ContractJob::new(dom.clone(), spec, bumps_for(dom, &cfg.bumps)?);
    job.sigmas = cfg.sigmas.clone();
    job.ps = cfg.ps.clone();
    job.eps = vec![cfg.eps];
    job.solver = SolverOptions { tol: cfg.solver_tol, max_iter: None };
    job.boundary_samples = cfg.boundary_samples;
    job.seed = ctx.seed;
    job.check_scale = ctx.tol_scale;
    Ok(job)
}

fn record_row(r: &ContractRecord, kind: &str) -> Vec<String> {
    vec![
        r.domain.clone(),
        kind.into(),
        num(r.h),
        r.bump.to_string(),
        num(r.sigma),
        num(r.p),
        num(r.lhs),
        num(r.rhs),
        num(r.ratio),
        num(r.residual),
        r.converged.to_string(),
    ]
}

fn ratio_checks(rep: &mut SuiteReport, records: &[ContractRecord], asserted: bool, ctx: &Ctx, label: &str) {
    for r in records.iter().filter(|r| !r.informational) {
        let inputs = (&r.domain, r.bump, r.sigma, r.p, r.h);
        rep.checks.push(CheckRecord::new(
            "contract",
            format!("{}: {label} ratio bump {} sigma {} p {} h {}", r.domain, r.bump, r.sigma, r.p, r.h),
            &inputs,
            r.ratio,
            None,
            Some(1.0 + contract_tolerance(r.h) * ctx.tol_scale),
            asserted,
        ));
        rep.checks.push(CheckRecord::flag(
            "contract",
            format!("{}: {label} solve converged bump {} sigma {} h {}", r.domain, r.bump, r.sigma, r.h),
            &inputs,
            r.converged,
            asserted,
        ));
    }
}

fn excess_checks(rep: &mut SuiteReport, base: &[ContractRecord], fine: &[ContractRecord], asserted: bool, ctx: &Ctx) {
    let mut any = false;
    for r in base.iter().filter(|r| !r.informational && r.ratio > 1.0) {
        any = true;
        let f = fine.iter().find(|f| f.bump == r.bump && f.sigma == r.sigma && f.p == r.p);
        let fine_excess = f.map_or(f64::NAN, |f| f.ratio - 1.0);
        rep.checks.push(CheckRecord::new(
            "contract",
            format!("{}: excess shrinks under refinement bump {} sigma {} p {}", r.domain, r.bump, r.sigma, r.p),
            &(&r.domain, r.bump, r.sigma, r.p, r.h),
            fine_excess,
            None,
            Some((r.ratio - 1.0) / 2.0 * ctx.tol_scale),
            asserted,
        ));
    }
    if !any {
        if let Some(r) = base.first() {
            rep.checks.push(CheckRecord::flag("contract", format!("{}: no ratio above 1 at h {}", r.domain, r.h), &(&r.domain, r.h), true, asserted));
        }
    }
}

/// Contractivity sweeps (`contract`) and the pointwise/boundary checks
/// (`lemma`) over every configured domain.
pub fn contract_suite(cfgs: &[ContractConfig], ctx: &Ctx, rep: &mut SuiteReport, contract: bool, lemma: bool) -> Result<()> {
    let mut ratio_table = Table::new(
        "contract.csv",
        &["domain", "kind", "h", "bump", "sigma", "p", "lhs", "rhs", "ratio", "residual", "converged"],
    );
    let mut lemma_table = Table::new(
        "lemma.csv",
        &["domain", "h", "bump", "sigma", "eps", "lemma_violations", "lemma_max_slack", "boundary_violations", "boundary_max_derivative", "boundary_checked", "p", "sign_integral"],
    );
    let mut contract_sections = Vec::new();
    let mut lemma_sections = Vec::new();
    for cfg in cfgs {
        let dom = cfg.domain.build()?;
        let spec = grid_spec(&cfg.grid)?;
        rep.environment.grids.push(spec.clone());
        let job = contract_job(cfg, &dom, spec, ctx)?;
        let base: SweepOutcome = contractivity_sweep(&job)?;
        // Contractivity is only claimed where the curvature hypothesis holds.
        let asserted = ctx.assert && cfg.assert && base.curvature_nonnegative;
        rep.checks.push(CheckRecord::new(
            "contract",
            format!("{}: sampled Gaussian curvature (hypothesis)", dom.name()),
            &cfg.domain,
            base.min_gaussian_curvature,
            Some(-CURVATURE_SIGN_TOL),
            None,
            false,
        ));
        let h = base.h;
        if contract {
            ratio_checks(rep, &base.records, asserted, ctx, "base");
            base.records.iter().for_each(|r| ratio_table.push(record_row(r, "base")));
            rep.ratios.extend(base.records.iter().cloned());

            let mut id_job = job.clone();
            id_job.sigmas = vec![cfg.identity_sigma];
            let identity = contractivity_sweep(&id_job)?;
            let [lo, hi] = cfg.identity_band;
            for r in identity.records.iter().filter(|r| !r.informational) {
                rep.checks.push(CheckRecord::new(
                    "contract",
                    format!("{}: near-identity ratio bump {} sigma {} p {}", r.domain, r.bump, r.sigma, r.p),
                    &(&r.domain, r.bump, r.sigma, r.p, r.h),
                    r.ratio,
                    Some(1.0 - (1.0 - lo) * ctx.tol_scale),
                    Some(1.0 + (hi - 1.0) * ctx.tol_scale),
                    asserted,
                ));
                ratio_table.push(record_row(r, "identity"));
            }

            let mut refined_records = Vec::new();
            if cfg.refine {
                let mut fine_job = job.clone();
                fine_job.grid = grid_spec(&GridConfig { h: cfg.grid.h / 2.0, ..cfg.grid.clone() })?;
                rep.environment.grids.push(fine_job.grid.clone());
                let fine = contractivity_sweep(&fine_job)?;
                ratio_checks(rep, &fine.records, asserted, ctx, "refined");
                excess_checks(rep, &base.records, &fine.records, asserted, ctx);
                fine.records.iter().for_each(|r| ratio_table.push(record_row(r, "refined")));
                refined_records = fine.records;
            }
            contract_sections.push(json!({
                "domain": dom.name(),
                "h": h,
                "min_gaussian_curvature": base.min_gaussian_curvature,
                "curvature_nonnegative": base.curvature_nonnegative,
                "asserted": asserted,
                "records": base.records,
                "identity": identity.records,
                "refined": refined_records,
            }));
        }
        if lemma {
            for a in &base.aux {
                let inputs = (&a.domain, a.bump, a.sigma, a.eps, a.h);
                rep.checks.push(CheckRecord::new(
                    "lemma",
                    format!("{}: pointwise violations bump {} sigma {}", a.domain, a.bump, a.sigma),
                    &inputs,
                    a.lemma_violations as f64,
                    None,
                    Some(0.0),
                    asserted,
                ));
                rep.checks.push(CheckRecord::new(
                    "lemma",
                    format!("{}: boundary normal-derivative violations bump {} sigma {}", a.domain, a.bump, a.sigma),
                    &inputs,
                    a.boundary_violations as f64,
                    None,
                    Some(0.0),
                    false,
                ));
                for &(p, v) in &a.sign_integrals {
                    rep.checks.push(CheckRecord::new(
                        "lemma",
                        format!("{}: boundary sign integral bump {} sigma {} p {}", a.domain, a.bump, a.sigma, p),
                        &(&inputs, p),
                        v,
                        None,
                        Some(20.0 * a.h * ctx.tol_scale),
                        asserted,
                    ));
                    lemma_table.push(vec![
                        a.domain.clone(),
                        num(a.h),
                        a.bump.to_string(),
                        num(a.sigma),
                        num(a.eps),
                        a.lemma_violations.to_string(),
                        num(a.lemma_max_slack),
                        a.boundary_violations.to_string(),
                        num(a.boundary_max_derivative),
                        a.boundary_checked.to_string(),
                        num(p),
                        num(v),
                    ]);
                }
            }
            lemma_sections.push(json!({ "domain": dom.name(), "h": h, "asserted": asserted, "aux": base.aux }));
        }
    }
    if contract {
        rep.sections.insert("contract".into(), json!(contract_sections));
        rep.tables.push(ratio_table);
    }
    if lemma {
        rep.sections.insert("lemma".into(), json!(lemma_sections));
        rep.tables.push(lemma_table);
    }
    Ok(())
}

// ------------------------------------------------------------------- oracle

/// One analytic curvature comparison.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureOracleRow {
    pub case: String,
    pub quantity: String,
    pub expected: f64,
    pub max_error: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Boundary residual for oracle samples.
const ORACLE_TOL_BD: f64 = 1e-13;

/// Balls (mean and Gaussian curvature) and halfspaces (Gaussian
/// curvature) against closed forms, at projected boundary samples.
pub fn curvature_oracles(samples: usize, seed: u64, tol_scale: f64) -> Result<Vec<CurvatureOracleRow>> {
    let mut rows = Vec::new();
    let max_err = |dom: &LevelSetDomain, f: &dyn Fn(&LevelSetDomain, &BoundaryPoint) -> Result<f64>, expected: f64| -> Result<f64> {
        let scan = curvature_sign_scan(dom, samples, seed)?;
        let mut worst: f64 = 0.0;
        for s in &scan.samples {
            // Re-project tightly so the oracle measures curvature, not placement.
            let bp = project_to_boundary(dom, &s.x, Some(ORACLE_TOL_BD))?;
            worst = worst.max((f(dom, &bp)? - expected).abs());
        }
        Ok(worst)
    };
    for d in [2usize, 3] {
        for r in [0.5, 1.0, 2.0] {
            let dom = LevelSetDomain::ball(d, r)?;
            let case = format!("ball d={d} R={r}");
            let tol = 1e-8 * tol_scale;
            let mean = (d - 1) as f64 / r;
            let e = max_err(&dom, &mean_curvature, mean)?;
            rows.push(CurvatureOracleRow { case: case.clone(), quantity: "mean".into(), expected: mean, max_error: e, tol, pass: e <= tol });
            let gauss = mean - r;
            let e = max_err(&dom, &gaussian_curvature, gauss)?;
            rows.push(CurvatureOracleRow { case, quantity: "gaussian".into(), expected: gauss, max_error: e, tol, pass: e <= tol });
        }
    }
    for c in [0.0, 1.0, 3.0] {
        let dom = LevelSetDomain::halfspace(2, 0, c)?;
        let tol = 1e-10 * tol_scale;
        let e = max_err(&dom, &gaussian_curvature, c)?;
        rows.push(CurvatureOracleRow {
            case: format!("halfspace x1 < -{c}"),
            quantity: "gaussian".into(),
            expected: c,
            max_error: e,
            tol,
            pass: e <= tol,
        });
    }
    Ok(rows)
}

/// Solver error against the Hermite eigenfunction J_σ He_k = He_k/(1+σk).
#[derive(Debug, Clone, Serialize)]
pub struct EigenOracleRow {
    pub k: usize,
    pub sigma: f64,
    pub h: f64,
    pub error: f64,
    pub error_refined: f64,
    pub ratio: f64,
    /// Error on the wider, reported-only window.
    pub error_wide: f64,
    pub converged: bool,
}

fn eigen_error(cfg: &EigenOracleConfig, h: f64, k: usize, sigma: f64) -> Result<(f64, f64, bool)> {
    let grid = GaussianGrid::new(GridSpec::cube(1, cfg.half_width, h)?, LevelSetDomain::whole_space(1)?)?;
    let y = ScalarField::from_fn(&grid, |x| hermite_poly(k, x[0]));
    let sol = solve_resolvent(&ResolventJob::new(sigma, y)?, &SolverOptions::default())?;
    let (mut inner, mut wide) = (0.0f64, 0.0f64);
    for &i in grid.interior() {
        let x = grid.coord(i, 0);
        let e = (sol.u.values()[i] - hermite_poly(k, x) / (1.0 + sigma * k as f64)).abs();
        if x.abs() <= cfg.window + 1e-12 {
            inner = inner.max(e);
        }
        if x.abs() <= cfg.report_window + 1e-12 {
            wide = wide.max(e);
        }
    }
    Ok((inner, wide, sol.converged))
}

pub fn eigen_oracle(cfg: &EigenOracleConfig) -> Result<Vec<EigenOracleRow>> {
    let mut rows = Vec::new();
    for &k in &cfg.ks {
        for &sigma in &cfg.sigmas {
            let (error, error_wide, c1) = eigen_error(cfg, cfg.h, k, sigma)?;
            let (error_refined, _, c2) = eigen_error(cfg, cfg.h / 2.0, k, sigma)?;
            rows.push(EigenOracleRow { k, sigma, h: cfg.h, error, error_refined, ratio: error / error_refined, error_wide, converged: c1 && c2 });
        }
    }
    Ok(rows)
}

/// Finite-difference solution against the killed-path estimate at a probe.
#[derive(Debug, Clone, Serialize)]
pub struct FkOracleRow {
    pub domain: String,
    pub x: Vec<f64>,
    pub fd: f64,
    pub mc: f64,
    pub se: f64,
    pub z: f64,
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
}

pub fn fk_cross_check(cfg: &FkOracleConfig, seed: u64) -> Result<Vec<FkOracleRow>> {
    let mut rows = Vec::new();
    for (c, case) in cfg.cases.iter().enumerate() {
        let dom = case.domain.build()?;
        let bump = make_bump(&dom, &case.bump.center, case.bump.radius, case.bump.margin)?;
        let grid = GaussianGrid::new(grid_spec(&case.grid)?, dom.clone())?;
        let y = ScalarField::from_fn(&grid, |x| bump.value(x));
        let opts = SolverOptions::default();
        let sol = solve_resolvent(&ResolventJob::new(cfg.sigma, y)?, &opts)?.require_converged()?;
        let est = KilledPathEstimator::new(dom.clone(), cfg.sigma, cfg.dt, cfg.n_paths, seed.wrapping_add(c as u64))?;
        let f = |x: &[f64]| bump.value(x);
        for x in &case.probes {
            let mc = mc_resolvent(&est, &f, x)?;
            let fd = sol.u.interpolate(x);
            rows.push(FkOracleRow {
                domain: dom.name().into(),
                x: x.clone(),
                fd,
                mc: mc.estimate,
                se: mc.se,
                z: (mc.estimate - fd) / mc.se,
                n_paths: est.n_paths,
                dt: est.dt,
                seed: est.seed,
            });
        }
    }
    Ok(rows)
}

/// Analytic curvature, Hermite eigenfunction and Feynman-Kac oracles.
pub fn oracle_suite(cfg: &OracleConfig, ctx: &Ctx, rep: &mut SuiteReport) -> Result<()> {
    let s = ctx.tol_scale;
    let mut section = serde_json::Map::new();
    if cfg.curvature {
        let rows = curvature_oracles(16, ctx.seed, s)?;
        let mut t = Table::new("oracle_curvature.csv", &["case", "quantity", "expected", "max_error", "tol", "pass"]);
        for r in &rows {
            rep.checks.push(CheckRecord::new("oracle", format!("{} {} curvature", r.case, r.quantity), &(&r.case, &r.quantity), r.max_error, None, Some(r.tol), ctx.assert));
            t.push(vec![r.case.clone(), r.quantity.clone(), num(r.expected), num(r.max_error), num(r.tol), r.pass.to_string()]);
        }
        rep.tables.push(t);
        section.insert("curvature".into(), json!(rows));
    }
    let rows = eigen_oracle(&cfg.eigen)?;
    let mut t = Table::new("oracle_eigen.csv", &["k", "sigma", "h", "error", "error_refined", "ratio", "error_wide", "converged"]);
    for r in &rows {
        let inputs = (r.k, r.sigma, r.h, &cfg.eigen);
        rep.checks.push(CheckRecord::new(
            "oracle",
            format!("eigen k={} sigma={} error on |x| <= {}", r.k, r.sigma, cfg.eigen.window),
            &inputs,
            r.error,
            None,
            Some(cfg.eigen.tol * s),
            ctx.assert,
        ));
        rep.checks.push(CheckRecord::new(
            "oracle",
            format!("eigen k={} sigma={} refinement ratio", r.k, r.sigma),
            &inputs,
            r.ratio,
            Some(cfg.eigen.min_ratio / s),
            None,
            ctx.assert,
        ));
        rep.checks.push(CheckRecord::new(
            "oracle",
            format!("eigen k={} sigma={} error on |x| <= {} (reported)", r.k, r.sigma, cfg.eigen.report_window),
            &inputs,
            r.error_wide,
            None,
            None,
            false,
        ));
        t.push(vec![r.k.to_string(), num(r.sigma), num(r.h), num(r.error), num(r.error_refined), num(r.ratio), num(r.error_wide), r.converged.to_string()]);
    }
    rep.tables.push(t);
    section.insert("eigen".into(), json!(rows));
    if cfg.fk.enabled {
        let rows = fk_cross_check(&cfg.fk, ctx.seed)?;
        let mut t = Table::new("oracle_fk.csv", &["domain", "x", "fd", "mc", "se", "z", "N", "dt", "seed"]);
        for r in &rows {
            rep.checks.push(CheckRecord::new(
                "oracle",
                format!("{} Feynman-Kac agreement at {:?}", r.domain, r.x),
                &(&r.domain, &r.x, r.n_paths, r.dt, r.seed),
                r.z.abs(),
                None,
                Some(cfg.fk.z_max * s),
                ctx.assert,
            ));
            t.push(vec![r.domain.clone(), coords(&r.x), num(r.fd), num(r.mc), num(r.se), num(r.z), r.n_paths.to_string(), num(r.dt), r.seed.to_string()]);
        }
        rep.tables.push(t);
        section.insert("feynman_kac".into(), json!(rows));
    }
    rep.sections.insert("oracle".into(), serde_json::Value::Object(section));
    Ok(())
}

// ------------------------------------------------------------------- wiener

/// Series identities behind the path-space examples.
#[derive(Debug, Clone, Serialize)]
pub struct SeriesOutcome {
    /// |π²/2 - Σ_{n≤1000} (n-½)^{-2}|.
    pub basel_gap: f64,
    /// |∫ f_200 - ½| for Brownian motion.
    pub bm_trace_gap: f64,
    /// sup over 101 points of |f_500(s) - (s - s²)| for the bridge.
    pub bridge_sup_error: f64,
    pub basel_monotone: bool,
}

pub fn series_checks() -> Result<SeriesOutcome> {
    let limit = PI * PI / 2.0;
    let partials: Vec<f64> = [1usize, 10, 100, 1000].iter().map(|&m| basel_check(m)).collect();
    let basel_monotone = partials.windows(2).all(|w| w[0] < w[1]) && partials.iter().all(|s| *s < limit);
    let quad = SQuadrature::composite(64, 16)?;
    let bm_trace_gap = (quad.integrate(|s| trace_density(KlKind::BrownianMotion, 200, s)) - 0.5).abs();
    let bridge_sup_error = (0..=100)
        .map(|k| {
            let s = k as f64 / 100.0;
            (trace_density(KlKind::BrownianBridge, 500, s) - (s - s * s)).abs()
        })
        .fold(0.0, f64::max);
    Ok(SeriesOutcome { basel_gap: (limit - basel_check(1000)).abs(), bm_trace_gap, bridge_sup_error, basel_monotone })
}

/// Series identities, basis orthonormality, functional validation and the
/// curvature audits.
pub fn wiener_suite(cfg: &WienerConfig, ctx: &Ctx, rep: &mut SuiteReport) -> Result<()> {
    let s = ctx.tol_scale;
    let a = ctx.assert;
    let mut section = serde_json::Map::new();
    if cfg.series {
        let out = series_checks()?;
        rep.checks.push(CheckRecord::new("wiener", "Basel-type partial sum at m = 1000", &1000, out.basel_gap, None, Some(2e-3 * s), a));
        rep.checks.push(CheckRecord::flag("wiener", "Basel-type partial sums increase below the limit", &[1, 10, 100, 1000], out.basel_monotone, a));
        rep.checks.push(CheckRecord::new("wiener", "Brownian motion trace density mass at m = 200", &200, out.bm_trace_gap, None, Some(1e-3 * s), a));
        rep.checks.push(CheckRecord::new("wiener", "Brownian bridge trace density sup error at m = 500", &500, out.bridge_sup_error, None, Some(2e-3 * s), a));
        section.insert("series".into(), json!(out));
    }
    let mut ortho = Vec::new();
    for kind in [KlKind::BrownianMotion, KlKind::BrownianBridge] {
        let err = KlBasis::new(kind, cfg.orthonormality_m)?.orthonormality_error();
        rep.checks.push(CheckRecord::new(
            "wiener",
            format!("{} basis orthonormal in H, m = {}", kind.label(), cfg.orthonormality_m),
            &(kind, cfg.orthonormality_m),
            err,
            None,
            Some(1e-10 * s),
            a,
        ));
        ortho.push(json!({ "basis": kind, "m": cfg.orthonormality_m, "max_error": err }));
    }
    section.insert("orthonormality".into(), json!(ortho));

    let tol = audit_tolerance() * s;
    let mut table = Table::new("wiener.csv", &["kind", "name", "m", "samples", "min_gaussian_curvature", "min_bound_excess", "pass"]);
    let mut functionals = Vec::new();
    for entry in &cfg.functionals {
        let spec = entry.functional.spec()?;
        let verdict = validate_functional(spec);
        let accepted = verdict.is_ok();
        let reason = verdict.as_ref().err().map(|e| e.to_string());
        let expected_valid = entry.expect == Expectation::Valid;
        rep.checks.push(CheckRecord::flag(
            "wiener",
            format!("{}: validation {}", entry.name, if expected_valid { "accepts" } else { "rejects" }),
            spec,
            accepted == expected_valid,
            a,
        ));
        let mut audits = Vec::new();
        if accepted && expected_valid {
            for &m in &entry.audit_dims {
                let dom = CylindricalDomain::new(spec.clone(), m)?;
                let audit = cylindrical_curvature_audit(&dom, entry.samples, ctx.seed)?;
                let inputs = (spec, m, entry.samples, ctx.seed);
                let name = format!("{} m={m}", entry.name);
                rep.checks.push(CheckRecord::new("wiener", format!("{name}: min Gaussian curvature"), &inputs, audit.min_gaussian_curvature, Some(-tol), None, a));
                rep.checks.push(CheckRecord::new("wiener", format!("{name}: curvature minus lower bound"), &inputs, audit.min_bound_excess, Some(-tol), None, a));
                rep.checks.push(CheckRecord::new(
                    "wiener",
                    format!("{name}: first-coordinate derivative floor"),
                    &inputs,
                    audit.min_first_partial,
                    Some(audit.first_partial_floor * (1.0 - 1e-9)),
                    None,
                    a,
                ));
                rep.checks.push(CheckRecord::new("wiener", format!("{name}: projection failures"), &inputs, audit.projection_failures as f64, None, Some(0.0), a));
                table.push(vec![
                    "functional".into(),
                    entry.name.clone(),
                    m.to_string(),
                    audit.samples.to_string(),
                    num(audit.min_gaussian_curvature),
                    num(audit.min_bound_excess),
                    audit.pass.to_string(),
                ]);
                audits.push(audit);
            }
        }
        functionals.push(json!({ "name": entry.name, "accepted": accepted, "reason": reason, "audits": audits }));
    }
    section.insert("functionals".into(), json!(functionals));

    let mut epigraphs = Vec::new();
    for entry in &cfg.epigraphs {
        for &m in &entry.audit_dims {
            let name = format!("{} m={m}", entry.name);
            let inputs = (&entry.spec, m, entry.samples, ctx.seed);
            match epigraph_curvature_audit(&entry.spec, m, entry.samples, ctx.seed) {
                Ok(audit) => {
                    rep.checks.push(CheckRecord::new("wiener", format!("{name}: min Gaussian curvature"), &inputs, audit.min_gaussian_curvature, Some(-tol), None, a));
                    rep.checks.push(CheckRecord::new("wiener", format!("{name}: curvature minus lower bound"), &inputs, audit.min_bound_excess, Some(-tol), None, a));
                    rep.checks.push(CheckRecord::new("wiener", format!("{name}: projection failures"), &inputs, audit.projection_failures as f64, None, Some(0.0), a));
                    table.push(vec![
                        "epigraph".into(),
                        entry.name.clone(),
                        m.to_string(),
                        audit.samples.to_string(),
                        num(audit.min_gaussian_curvature),
                        num(audit.min_bound_excess),
                        audit.pass.to_string(),
                    ]);
                    epigraphs.push(json!({ "name": entry.name, "m": m, "audit": audit }));
                }
                Err(e @ Error::SpecRejected { .. }) => {
                    rep.checks.push(CheckRecord::flag("wiener", format!("{name}: declared constants hold"), &inputs, false, a));
                    epigraphs.push(json!({ "name": entry.name, "m": m, "rejected": e.to_string() }));
                }
                Err(e) => return Err(e),
            }
        }
    }
    section.insert("epigraphs".into(), json!(epigraphs));
    rep.sections.insert("wiener".into(), serde_json::Value::Object(section));
    rep.tables.push(table);
    Ok(())
}

// ----------------------------------------------------------------- converge

/// Cylindrical-approximation convergence studies.
pub fn converge_suite(cfgs: &[ConvergeConfig], ctx: &Ctx, rep: &mut SuiteReport) -> Result<()> {
    let mut table = Table::new("converge.csv", &["sigma", "n", "d_l2", "d_grad", "residual_n", "residual_next"]);
    let mut sections = Vec::new();
    for cfg in cfgs {
        let spec = cfg.functional.spec()?;
        let bump = BumpFunction::new(vec![cfg.bump_center], cfg.bump_radius, 1.0)?;
        for (sigma, identity) in [(cfg.sigma, false), (cfg.identity_sigma, true)] {
            let inputs = (spec, &bump, sigma, &cfg.dims, &cfg.grid);
            let study = match resolvent_convergence_study(spec, &bump, sigma, &cfg.dims, &cfg.grid) {
                Ok(s) => s,
                Err(e @ (Error::NotConverged { .. } | Error::InvalidParameter(_))) => {
                    rep.checks.push(CheckRecord::flag("converge", format!("study at sigma {sigma} completed"), &inputs, false, ctx.assert));
                    sections.push(json!({ "sigma": sigma, "aborted": e.to_string() }));
                    continue;
                }
                Err(e) => return Err(e),
            };
            let finite = !study.rows.is_empty() && study.rows.iter().all(|r| r.d_l2.is_finite() && r.d_grad.is_finite());
            rep.checks.push(CheckRecord::flag("converge", format!("sigma {sigma}: all D_n finite"), &inputs, finite, ctx.assert));
            for r in &study.rows {
                table.push(vec![num(sigma), r.n.to_string(), num(r.d_l2), num(r.d_grad), num(r.residual_n), num(r.residual_next)]);
                rep.convergence.push(DnRow { sigma, n: r.n, d_l2: r.d_l2, d_grad: r.d_grad });
                if identity {
                    let bound = Some(cfg.identity_bound * ctx.tol_scale);
                    rep.checks.push(CheckRecord::new("converge", format!("sigma {sigma}: D_{} in L2", r.n), &inputs, r.d_l2, None, bound, ctx.assert));
                    rep.checks.push(CheckRecord::new("converge", format!("sigma {sigma}: D_{} in gradient L2", r.n), &inputs, r.d_grad, None, bound, ctx.assert));
                }
            }
            if !identity {
                for w in study.rows.windows(2) {
                    for (sense, lo, hi) in [("L2", w[0].d_l2, w[1].d_l2), ("gradient L2", w[0].d_grad, w[1].d_grad)] {
                        rep.checks.push(CheckRecord::new(
                            "converge",
                            format!("sigma {sigma}: D_{} <= D_{} in {sense}", w[1].n, w[0].n),
                            &inputs,
                            hi,
                            None,
                            Some(lo * ctx.tol_scale),
                            ctx.assert,
                        ));
                    }
                }
            }
            rep.environment.grids.extend(study.solves.iter().map(|d| d.grid.clone()));
            sections.push(json!(study));
        }
    }
    rep.sections.insert("converge".into(), json!(sections));
    rep.tables.push(table);
    Ok(())
}
