//! Suite reports: check records, JSON with a content digest, CSV tables and
//! plot-ready data files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::contract::ContractRecord;
use crate::error::Result;
use crate::grid::GridSpec;

/// Short SHA-256 digest of a serializable value.
pub fn digest_of<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).unwrap_or_default();
    hex::encode(&Sha256::digest(&bytes)[..8])
}

/// One verified quantity with its admissible interval.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub suite: String,
    pub name: String,
    pub inputs_digest: String,
    pub observed: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    /// Unasserted checks are recorded but never fail a run.
    pub asserted: bool,
    pub pass: bool,
}

impl CheckRecord {
    pub fn new<I: Serialize + ?Sized>(
        suite: &str,
        name: impl Into<String>,
        inputs: &I,
        observed: f64,
        lower: Option<f64>,
        upper: Option<f64>,
        asserted: bool,
    ) -> Self {
        let pass = !observed.is_nan() && lower.is_none_or(|l| observed >= l) && upper.is_none_or(|u| observed <= u);
        Self { suite: suite.into(), name: name.into(), inputs_digest: digest_of(inputs), observed, lower, upper, asserted, pass }
    }

    /// A yes/no check recorded as 1/0 against the interval [1, 1].
    pub fn flag<I: Serialize + ?Sized>(suite: &str, name: impl Into<String>, inputs: &I, ok: bool, asserted: bool) -> Self {
        Self::new(suite, name, inputs, if ok { 1.0 } else { 0.0 }, Some(1.0), None, asserted)
    }

    pub fn failed(&self) -> bool {
        self.asserted && !self.pass
    }
}

/// Reproducibility stamp.
#[derive(Debug, Clone, Serialize)]
pub struct Environment {
    pub version: String,
    pub suite: String,
    pub seed: u64,
    pub generator: String,
    pub tol_scale: f64,
    pub grid_h: Option<f64>,
    pub assert: bool,
    pub grids: Vec<GridSpec>,
}

/// A CSV table destined for the output directory.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: &str, header: &[&str]) -> Self {
        Self { file: file.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn to_csv(&self, comment: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(c) = comment {
            let _ = writeln!(out, "# {c}");
        }
        let _ = writeln!(out, "{}", self.header.join(","));
        for r in &self.rows {
            let _ = writeln!(out, "{}", r.join(","));
        }
        out
    }
}

/// Formats a float for CSV with full round-trip precision.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

/// H^γ values from one source, for the histogram.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureSeries {
    pub source: String,
    pub values: Vec<f64>,
}

/// One consecutive-truncation distance.
#[derive(Debug, Clone, Serialize)]
pub struct DnRow {
    pub sigma: f64,
    pub n: usize,
    pub d_l2: f64,
    pub d_grad: f64,
}

/// Everything a run verified.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub environment: Environment,
    pub config: serde_json::Value,
    pub checks: Vec<CheckRecord>,
    /// Base-grid contractivity ratios.
    pub ratios: Vec<ContractRecord>,
    pub convergence: Vec<DnRow>,
    pub curvature: Vec<CurvatureSeries>,
    /// Suite-specific payloads keyed by suite name.
    pub sections: BTreeMap<String, serde_json::Value>,
    #[serde(skip)]
    pub tables: Vec<Table>,
}

/// On-disk layout of report.json: the payload, its digest and a timestamp
/// that the digest excludes.
#[derive(Serialize)]
struct ReportFile<'a> {
    generated_unix: u64,
    digest: String,
    report: &'a SuiteReport,
}

impl SuiteReport {
    pub fn new(environment: Environment, config: serde_json::Value) -> Self {
        Self {
            environment,
            config,
            checks: Vec::new(),
            ratios: Vec::new(),
            convergence: Vec::new(),
            curvature: Vec::new(),
            sections: BTreeMap::new(),
            tables: Vec::new(),
        }
    }

    pub fn failures(&self) -> Vec<&CheckRecord> {
        self.checks.iter().filter(|c| c.failed()).collect()
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }

    /// Full SHA-256 of the serialized payload.
    pub fn digest(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(serde_json::to_vec(self)?)))
    }

    pub fn to_json(&self) -> Result<String> {
        let generated_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Ok(serde_json::to_string_pretty(&ReportFile { generated_unix, digest: self.digest()?, report: self })?)
    }

    fn checks_table(&self) -> Table {
        let mut t = Table::new("checks.csv", &["suite", "name", "inputs_digest", "observed", "lower", "upper", "asserted", "pass"]);
        for c in &self.checks {
            let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
            t.push(vec![
                c.suite.clone(),
                c.name.replace(',', ";"),
                c.inputs_digest.clone(),
                num(c.observed),
                opt(c.lower),
                opt(c.upper),
                c.asserted.to_string(),
                c.pass.to_string(),
            ]);
        }
        t
    }

    /// Writes report.json, checks.csv and every suite table into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let path = dir.join("report.json");
        std::fs::write(&path, self.to_json()?)?;
        written.push(path);
        for t in std::iter::once(self.checks_table()).chain(self.tables.iter().cloned()) {
            let path = dir.join(&t.file);
            std::fs::write(&path, t.to_csv(None))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Bins for the H^γ histogram.
pub const HISTOGRAM_BINS: usize = 20;

/// One CSV per figure kind in `dir`: ratio-vs-σ, ratio-vs-p, D_n-vs-n and the
/// H^γ histogram. An empty report yields header-only files.
pub fn emit_plotdata(report: &SuiteReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    // (domain, p, sigma) -> (h, max, min) over bumps, first-seen order.
    let mut groups: Vec<(String, f64, f64, f64, f64, f64)> = Vec::new();
    for r in report.ratios.iter().filter(|r| !r.informational) {
        match groups.iter_mut().find(|g| g.0 == r.domain && g.1 == r.p && g.2 == r.sigma) {
            Some(g) => {
                g.4 = g.4.max(r.ratio);
                g.5 = g.5.min(r.ratio);
            }
            None => groups.push((r.domain.clone(), r.p, r.sigma, r.h, r.ratio, r.ratio)),
        }
    }
    let ratio_header = ["domain", "p", "sigma", "h", "max_ratio", "min_ratio"];
    let row = |g: &(String, f64, f64, f64, f64, f64)| vec![g.0.clone(), num(g.1), num(g.2), num(g.3), num(g.4), num(g.5)];

    let mut by_sigma = groups.clone();
    by_sigma.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2)));
    let mut t_sigma = Table::new("ratio_vs_sigma.csv", &ratio_header);
    by_sigma.iter().for_each(|g| t_sigma.push(row(g)));

    let mut by_p = groups;
    by_p.sort_by(|a, b| a.0.cmp(&b.0).then(a.2.total_cmp(&b.2)).then(a.1.total_cmp(&b.1)));
    let mut t_p = Table::new("ratio_vs_p.csv", &ratio_header);
    by_p.iter().for_each(|g| t_p.push(row(g)));

    let mut t_dn = Table::new("dn_vs_n.csv", &["sigma", "n", "d_l2", "d_grad"]);
    for d in &report.convergence {
        t_dn.push(vec![num(d.sigma), d.n.to_string(), num(d.d_l2), num(d.d_grad)]);
    }

    let mut t_hist = Table::new("hgamma_hist.csv", &["source", "bin_lo", "bin_hi", "count"]);
    for s in &report.curvature {
        let finite: Vec<f64> = s.values.iter().copied().filter(|v| v.is_finite()).collect();
        if finite.is_empty() {
            continue;
        }
        let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let bins = if hi > lo { HISTOGRAM_BINS } else { 1 };
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        let mut counts = vec![0usize; bins];
        for v in finite {
            let k = (((v - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        for (k, c) in counts.iter().enumerate() {
            let a = lo + k as f64 * width;
            t_hist.push(vec![s.source.clone(), num(a), num(if bins == 1 { hi } else { a + width }), c.to_string()]);
        }
    }

    let comments = [
        "ratio |grad J_sigma y|_p / |grad y|_p grouped over test functions; rows ordered by domain, p, sigma",
        "ratio |grad J_sigma y|_p / |grad y|_p grouped over test functions; rows ordered by domain, sigma, p",
        "consecutive-truncation distances D_n in L2(gamma) and gradient-L2(gamma)",
        "histogram of sampled Gaussian mean curvature per source",
    ];
    let mut written = Vec::new();
    for (t, c) in [t_sigma, t_p, t_dn, t_hist].iter().zip(comments) {
        let path = dir.join(&t.file);
        std::fs::write(&path, t.to_csv(Some(&format!("columns: {}; {c}", t.header.join(", ")))))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> Environment {
        Environment {
            version: "0".into(),
            suite: "test".into(),
            seed: 1,
            generator: "g".into(),
            tol_scale: 1.0,
            grid_h: None,
            assert: true,
            grids: Vec::new(),
        }
    }

    fn record(sigma: f64, p: f64, bump: usize, ratio: f64) -> ContractRecord {
        ContractRecord {
            domain: "d".into(),
            bump,
            sigma,
            p,
            lhs: ratio,
            rhs: 1.0,
            ratio,
            h: 0.1,
            residual: 0.0,
            converged: true,
            informational: false,
        }
    }

    fn data_rows(path: &Path) -> usize {
        std::fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).count() - 1
    }

    #[test]
    fn check_intervals() {
        assert!(CheckRecord::new("s", "n", &1, 0.5, None, Some(1.0), true).pass);
        assert!(!CheckRecord::new("s", "n", &1, f64::NAN, None, Some(1.0), true).pass);
        let f = CheckRecord::new("s", "n", &1, 2.0, Some(0.0), Some(1.0), false);
        assert!(!f.pass && !f.failed());
    }

    #[test]
    fn ratio_tables_have_one_row_per_sigma_p() {
        let mut rep = SuiteReport::new(env(), serde_json::Value::Null);
        for b in 0..3 {
            for s in [0.1, 1.0, 10.0] {
                for p in [1.5, 2.0, 3.0, 4.0] {
                    rep.ratios.push(record(s, p, b, 0.9 + 0.01 * b as f64));
                }
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let files = emit_plotdata(&rep, dir.path()).unwrap();
        assert_eq!(data_rows(&files[0]), 12);
        assert_eq!(data_rows(&files[1]), 12);
        let body = std::fs::read_to_string(&files[0]).unwrap();
        assert!(body.lines().nth(2).unwrap().ends_with("0.92,0.9"));
    }

    #[test]
    fn empty_report_gives_header_only_files() {
        let rep = SuiteReport::new(env(), serde_json::Value::Null);
        let dir = tempfile::tempdir().unwrap();
        for f in emit_plotdata(&rep, dir.path()).unwrap() {
            assert_eq!(data_rows(&f), 0);
        }
    }

    #[test]
    fn digest_ignores_timestamp() {
        let rep = SuiteReport::new(env(), serde_json::json!({"a": 1}));
        let a: serde_json::Value = serde_json::from_str(&rep.to_json().unwrap()).unwrap();
        assert_eq!(a["digest"].as_str().unwrap(), rep.digest().unwrap());
    }
}
