//! Wiener-space examples at desk scale.
//!
//! A Karhunen-Loève truncation turns a path functional G(x) = ∫₀¹ g(x(s)) ds - r
//! into a level set over R^m: the path is x(s) = Σ ξ_i h_i(s), and since the
//! h_i are orthonormal in the Cameron-Martin space, coordinates ξ are
//! isometric and the Gaussian curvature machinery of [`crate::domain`]
//! applies unchanged.

use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::Arc;

use gauss_quad::legendre::GaussLegendre;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::contract::BumpFunction;
use crate::domain::{gaussian_curvature, project_to_boundary, EpigraphProfile, LevelSet, LevelSetDomain};
use crate::error::{invalid, Error, Result};
use crate::gauss::{sample_gaussian, QuadratureRule};
use crate::grid::{GaussianGrid, GridSpec, ScalarField};
use crate::solver::{discrete_gradient, solve_resolvent, ResolventJob, SolveDiagnostics, SolverOptions};

/// Which Gaussian path measure the basis diagonalizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlKind {
    #[default]
    BrownianMotion,
    BrownianBridge,
}

impl KlKind {
    /// Angular frequency of the n-th mode (n ≥ 1).
    pub fn frequency(self, n: usize) -> f64 {
        match self {
            Self::BrownianMotion => (n as f64 - 0.5) * PI,
            Self::BrownianBridge => n as f64 * PI,
        }
    }

    /// Covariance eigenvalue λ_n.
    pub fn eigenvalue(self, n: usize) -> f64 {
        self.frequency(n).powi(-2)
    }

    /// ∫₀¹ f(s) ds for the full trace density f = Σ h_n².
    pub fn trace_mass(self) -> f64 {
        match self {
            Self::BrownianMotion => 0.5,
            Self::BrownianBridge => 1.0 / 6.0,
        }
    }

    /// ∫₀¹ h₁(s) ds. Both first modes are nonnegative on [0, 1].
    pub fn first_mode_mass(self) -> f64 {
        match self {
            Self::BrownianMotion => 4.0 * 2f64.sqrt() / (PI * PI),
            Self::BrownianBridge => 2.0 * 2f64.sqrt() / (PI * PI),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::BrownianMotion => "brownian_motion",
            Self::BrownianBridge => "brownian_bridge",
        }
    }
}

/// Default composite Gauss-Legendre layout on [0, 1]: 8 panels of 16 nodes.
pub const DEFAULT_PANELS: usize = 8;
pub const DEFAULT_PANEL_ORDER: usize = 16;
/// Fewest s-nodes accepted for path functionals.
pub const MIN_S_NODES: usize = 64;
/// Declared s-quadrature error budget for audits on the default layout.
pub const S_QUADRATURE_ERROR: f64 = 1e-10;

/// Composite Gauss-Legendre nodes and weights on [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct SQuadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SQuadrature {
    pub fn composite(panels: usize, order: usize) -> Result<Self> {
        let order = NonZeroUsize::new(order).ok_or_else(|| invalid("panel order must be >= 1"))?;
        if panels == 0 {
            return Err(invalid("need at least one panel"));
        }
        let rule = GaussLegendre::new(order);
        let width = 1.0 / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order.get());
        let mut weights = Vec::with_capacity(panels * order.get());
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * width;
            for &(x, w) in rule.as_node_weight_pairs().iter() {
                nodes.push(mid + 0.5 * width * x);
                weights.push(0.5 * width * w);
            }
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&s, &w)| w * f(s)).sum()
    }
}

/// Truncated Karhunen-Loève system (λ_n, e_n, h_n), n = 1..m.
///
/// Truncating at m is the projection onto span{h₁, …, h_m}.
#[derive(Debug, Clone)]
pub struct KlBasis {
    kind: KlKind,
    m: usize,
    quad: SQuadrature,
    /// h_n(s_k), row n - 1.
    table: Vec<f64>,
}

impl KlBasis {
    pub fn new(kind: KlKind, m: usize) -> Result<Self> {
        Self::with_quadrature(kind, m, DEFAULT_PANELS, DEFAULT_PANEL_ORDER)
    }

    pub fn with_quadrature(kind: KlKind, m: usize, panels: usize, order: usize) -> Result<Self> {
        let quad = SQuadrature::composite(panels, order)?;
        if quad.len() < MIN_S_NODES {
            return Err(invalid(format!("s-quadrature needs >= {MIN_S_NODES} nodes, got {}", quad.len())));
        }
        let mut table = Vec::with_capacity(m * quad.len());
        for n in 1..=m {
            table.extend(quad.nodes.iter().map(|&s| h_mode(kind, n, s)));
        }
        Ok(Self { kind, m, quad, table })
    }

    pub fn kind(&self) -> KlKind {
        self.kind
    }

    pub fn truncation(&self) -> usize {
        self.m
    }

    pub fn quadrature(&self) -> &SQuadrature {
        &self.quad
    }

    pub fn eigenvalue(&self, n: usize) -> f64 {
        self.kind.eigenvalue(n)
    }

    /// L²-normalized mode e_n(s) = √2 sin(ω_n s).
    pub fn x_mode(&self, n: usize, s: f64) -> f64 {
        2f64.sqrt() * (self.kind.frequency(n) * s).sin()
    }

    /// Cameron-Martin mode h_n = √λ_n e_n.
    pub fn h_mode(&self, n: usize, s: f64) -> f64 {
        h_mode(self.kind, n, s)
    }

    /// h_n'(s) = √2 cos(ω_n s).
    pub fn h_mode_derivative(&self, n: usize, s: f64) -> f64 {
        2f64.sqrt() * (self.kind.frequency(n) * s).cos()
    }

    /// Tabulated h_n at the s-nodes.
    pub fn h_row(&self, n: usize) -> &[f64] {
        let q = self.quad.len();
        &self.table[(n - 1) * q..n * q]
    }

    /// Path Σ ξ_i h_i(s) at an arbitrary s.
    pub fn path(&self, coeffs: &[f64], s: f64) -> f64 {
        coeffs.iter().enumerate().map(|(i, c)| c * self.h_mode(i + 1, s)).sum()
    }

    /// Gram matrix ∫ h_i' h_j' ds (row-major m × m).
    pub fn h_gram(&self) -> Vec<f64> {
        let m = self.m;
        let mut gram = vec![0.0; m * m];
        for i in 1..=m {
            for j in i..=m {
                let v = self.quad.integrate(|s| self.h_mode_derivative(i, s) * self.h_mode_derivative(j, s));
                gram[(i - 1) * m + (j - 1)] = v;
                gram[(j - 1) * m + (i - 1)] = v;
            }
        }
        gram
    }

    /// max |⟨h_i, h_j⟩_H - δ_ij|.
    pub fn orthonormality_error(&self) -> f64 {
        let m = self.m;
        self.h_gram()
            .iter()
            .enumerate()
            .map(|(k, v)| (v - if k / m == k % m { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max)
    }

    /// sup over an `n_grid`-point uniform s-grid of |Σ ξ_i h_i(s)|.
    pub fn sup_norm(&self, coeffs: &[f64], n_grid: usize) -> f64 {
        let n_grid = n_grid.max(2);
        (0..n_grid)
            .map(|k| self.path(coeffs, k as f64 / (n_grid - 1) as f64).abs())
            .fold(0.0, f64::max)
    }
}

fn h_mode(kind: KlKind, n: usize, s: f64) -> f64 {
    let w = kind.frequency(n);
    2f64.sqrt() * (w * s).sin() / w
}

/// Partial sum Σ_{n≤m} (n - ½)^{-2}; increases to π²/2.
pub fn basel_check(m: usize) -> f64 {
    // Summed from the small end to keep the tail's digits.
    (1..=m).rev().map(|n| (n as f64 - 0.5).powi(-2)).sum()
}

/// f_m(s) = Σ_{n≤m} h_n(s)².
pub fn trace_density(kind: KlKind, m: usize, s: f64) -> f64 {
    (1..=m).rev().map(|n| h_mode(kind, n, s).powi(2)).sum()
}

/// g = p/q with ascending coefficient tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalG {
    pub num: Vec<f64>,
    #[serde(default = "unit_poly")]
    pub den: Vec<f64>,
}

fn unit_poly() -> Vec<f64> {
    vec![1.0]
}

/// Value and first two derivatives of a polynomial.
fn poly_eval(c: &[f64], x: f64) -> (f64, f64, f64) {
    let (mut p, mut d1, mut d2) = (0.0, 0.0, 0.0);
    for &a in c.iter().rev() {
        d2 = d2 * x + 2.0 * d1;
        d1 = d1 * x + p;
        p = p * x + a;
    }
    (p, d1, d2)
}

impl RationalG {
    pub fn polynomial(num: Vec<f64>) -> Self {
        Self { num, den: unit_poly() }
    }

    /// (g, g', g'') at ξ.
    pub fn eval(&self, xi: f64) -> (f64, f64, f64) {
        let (p, p1, p2) = poly_eval(&self.num, xi);
        let (q, q1, q2) = poly_eval(&self.den, xi);
        let g = p / q;
        let w = (p1 * q - p * q1) / (q * q);
        let g2 = (p2 * q - p * q2) / (q * q) - 2.0 * q1 * w / q;
        (g, w, g2)
    }

    pub fn value(&self, xi: f64) -> f64 {
        poly_eval(&self.num, xi).0 / poly_eval(&self.den, xi).0
    }
}

/// A path functional with its declared envelope constants.
///
/// Constants are declared, never inferred; [`validate_functional`] checks
/// them on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSpec {
    #[serde(default)]
    pub basis: KlKind,
    pub g: RationalG,
    /// Lower bound on |g'|.
    pub c: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Level: G(x) = ∫ g(x(s)) ds - r.
    pub r: f64,
    /// Declared bound on sup |g''|.
    pub g2_sup: f64,
}

impl FunctionalSpec {
    /// g(ξ) = a ξ + b: constant derivative, g'' = 0.
    pub fn affine(basis: KlKind, slope: f64, intercept: f64, r: f64) -> Self {
        Self {
            basis,
            g: RationalG::polynomial(vec![intercept, slope]),
            c: slope.abs(),
            alpha1: 1.0,
            alpha2: 1.0,
            beta1: -intercept,
            beta2: -intercept,
            r,
            g2_sup: 0.0,
        }
    }

    /// g(ξ) = ξ + bξ/(1 + ξ²) for 0 ≤ b < 8, with exact constants.
    ///
    /// ξg' - g = -2bξ³/(1+ξ²)², whose extremes sit at ξ = ±√3; g'' peaks at
    /// ξ = √2 - 1.
    pub fn odd_rational(basis: KlKind, b: f64, r: f64) -> Self {
        let beta = 3.0 * 3f64.sqrt() * b / 8.0;
        let t = 2f64.sqrt() - 1.0;
        let g2_sup = 2.0 * b * t * (3.0 - t * t) / (1.0 + t * t).powi(3);
        Self {
            basis,
            g: RationalG { num: vec![0.0, 1.0 + b, 0.0, 1.0], den: vec![1.0, 0.0, 1.0] },
            c: 1.0 - b / 8.0,
            alpha1: 1.0,
            alpha2: 1.0,
            beta1: -beta,
            beta2: beta,
            r,
            g2_sup,
        }
    }

    /// Largest |g''| share the curvature chain charges: ‖g''‖∞·∫f.
    pub fn trace_charge(&self) -> f64 {
        self.g2_sup * self.basis.trace_mass()
    }

    /// -(α₂r + β₂ + ‖g''‖∞·∫f); nonnegative iff the threshold holds.
    pub fn threshold_slack(&self) -> f64 {
        -(self.alpha2 * self.r + self.beta2 + self.trace_charge())
    }
}

/// Validation grid: ξ ∈ [-20, 20], step 1e-2.
pub const VALIDATION_HALF_WIDTH: f64 = 20.0;
pub const VALIDATION_STEP: f64 = 1e-2;

/// Worst slack of each declared inequality over the validation grid.
///
/// A slack is (allowed - observed); all are ≥ 0 on an accepted spec.
#[derive(Debug, Clone, Serialize)]
pub struct FunctionalReport {
    pub derivative_floor: f64,
    pub lower_envelope: f64,
    pub upper_envelope: f64,
    pub second_derivative: f64,
    pub threshold: f64,
    pub grid_points: usize,
}

impl FunctionalReport {
    pub fn worst_slack(&self) -> f64 {
        [self.derivative_floor, self.lower_envelope, self.upper_envelope, self.second_derivative, self.threshold]
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Scans the envelope inequalities, the |g''| bound and the level threshold.
///
/// Rejects with the first witnessing ξ on any violation. A rounding
/// allowance of 1e-12 relative is granted so that exact declared constants
/// pass.
pub fn validate_functional(spec: &FunctionalSpec) -> Result<FunctionalReport> {
    if !(spec.c > 0.0) {
        return Err(Error::SpecRejected { reason: format!("c must be positive, got {}", spec.c), witness: None });
    }
    if !(spec.g2_sup >= 0.0) {
        return Err(Error::SpecRejected { reason: "declared sup |g''| must be >= 0".into(), witness: None });
    }
    let reject = |what: &str, xi: f64| Error::SpecRejected { reason: format!("{what} violated at xi = {xi}"), witness: Some(xi) };
    let n = (2.0 * VALIDATION_HALF_WIDTH / VALIDATION_STEP).round() as usize + 1;
    let mut report = FunctionalReport {
        derivative_floor: f64::INFINITY,
        lower_envelope: f64::INFINITY,
        upper_envelope: f64::INFINITY,
        second_derivative: f64::INFINITY,
        threshold: spec.threshold_slack(),
        grid_points: n,
    };
    let (mut g_min, mut g_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..n {
        let xi = -VALIDATION_HALF_WIDTH + k as f64 * VALIDATION_STEP;
        let q = poly_eval(&spec.g.den, xi).0;
        if !(q > 0.0) {
            return Err(reject("positive denominator", xi));
        }
        let (g, g1, g2) = spec.g.eval(xi);
        let allow = 1e-12 * (1.0 + g.abs() + (xi * g1).abs());
        let floor = g1.abs() - spec.c;
        let lower = xi * g1 - (spec.alpha1 * g + spec.beta1);
        let upper = spec.alpha2 * g + spec.beta2 - xi * g1;
        let second = spec.g2_sup - g2.abs();
        if floor < -1e-12 {
            return Err(reject("|g'| >= c", xi));
        }
        if lower < -allow {
            return Err(reject("alpha1 g + beta1 <= xi g'", xi));
        }
        if upper < -allow {
            return Err(reject("xi g' <= alpha2 g + beta2", xi));
        }
        if second < -1e-12 * (1.0 + spec.g2_sup) {
            return Err(reject("|g''| <= declared sup", xi));
        }
        report.derivative_floor = report.derivative_floor.min(floor);
        report.lower_envelope = report.lower_envelope.min(lower);
        report.upper_envelope = report.upper_envelope.min(upper);
        report.second_derivative = report.second_derivative.min(second);
        g_min = g_min.min(g);
        g_max = g_max.max(g);
    }
    if !(spec.r >= g_min && spec.r <= g_max) {
        return Err(Error::SpecRejected {
            reason: format!("level r = {} outside the scanned range of g [{g_min}, {g_max}]", spec.r),
            witness: None,
        });
    }
    if report.threshold < -1e-12 {
        return Err(Error::SpecRejected {
            reason: format!(
                "threshold alpha2 r <= -(beta2 + sup|g''|/{}) fails: slack {}",
                if spec.basis == KlKind::BrownianMotion { 2 } else { 6 },
                report.threshold
            ),
            witness: None,
        });
    }
    Ok(report)
}

/// The truncated functional G_m(ξ) = ∫ g(Σ ξ_i h_i(s)) ds - r over R^m.
///
/// Value and derivatives share one s-quadrature.
#[derive(Debug, Clone)]
pub struct CylindricalDomain {
    basis: Arc<KlBasis>,
    spec: FunctionalSpec,
}

impl CylindricalDomain {
    pub fn new(spec: FunctionalSpec, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(invalid("cylindrical truncation needs m >= 1"));
        }
        let basis = Arc::new(KlBasis::new(spec.basis, m)?);
        Self::with_basis(spec, basis)
    }

    pub fn with_basis(spec: FunctionalSpec, basis: Arc<KlBasis>) -> Result<Self> {
        if basis.kind() != spec.basis {
            return Err(invalid("basis kind does not match the functional spec"));
        }
        Ok(Self { basis, spec })
    }

    pub fn basis(&self) -> &KlBasis {
        &self.basis
    }

    pub fn spec(&self) -> &FunctionalSpec {
        &self.spec
    }

    pub fn truncation(&self) -> usize {
        self.basis.truncation()
    }

    pub fn into_domain(self) -> Result<LevelSetDomain> {
        let name = format!("cylindrical-{}-m{}", self.spec.basis.label(), self.truncation());
        LevelSetDomain::new(name, Arc::new(self), crate::domain::DEFAULT_GRAD_FLOOR)
    }

    fn path_at(&self, xi: &[f64], k: usize) -> f64 {
        let q = self.basis.quad.len();
        xi.iter().enumerate().map(|(i, c)| c * self.basis.table[i * q + k]).sum()
    }
}

impl LevelSet for CylindricalDomain {
    fn dim(&self) -> usize {
        self.truncation()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let w = &self.basis.quad.weights;
        (0..w.len()).map(|k| w[k] * self.spec.g.value(self.path_at(x, k))).sum::<f64>() - self.spec.r
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let m = self.truncation();
        let q = self.basis.quad.len();
        let mut grad = vec![0.0; m];
        for k in 0..q {
            let g1 = self.spec.g.eval(self.path_at(x, k)).1 * self.basis.quad.weights[k];
            for (i, slot) in grad.iter_mut().enumerate() {
                *slot += g1 * self.basis.table[i * q + k];
            }
        }
        grad
    }

    fn hessian(&self, x: &[f64]) -> Vec<f64> {
        let m = self.truncation();
        let q = self.basis.quad.len();
        let mut hess = vec![0.0; m * m];
        for k in 0..q {
            let g2 = self.spec.g.eval(self.path_at(x, k)).2 * self.basis.quad.weights[k];
            for i in 0..m {
                let hi = self.basis.table[i * q + k];
                for j in i..m {
                    hess[i * m + j] += g2 * hi * self.basis.table[j * q + k];
                }
            }
        }
        for i in 0..m {
            for j in 0..i {
                hess[i * m + j] = hess[j * m + i];
            }
        }
        hess
    }
}

/// G_m(ξ) by s-quadrature.
pub fn pathwise_g_eval(spec: &FunctionalSpec, basis: &KlBasis, coeffs: &[f64]) -> Result<f64> {
    if coeffs.len() != basis.truncation() {
        return Err(Error::DimensionMismatch { expected: basis.truncation(), got: coeffs.len() });
    }
    if basis.kind() != spec.basis {
        return Err(invalid("basis kind does not match the functional spec"));
    }
    Ok(basis.quad.integrate(|s| spec.g.value(basis.path(coeffs, s))) - spec.r)
}

/// Tolerance below zero accepted by the curvature audits.
pub fn audit_tolerance() -> f64 {
    1e-6 + S_QUADRATURE_ERROR
}

/// Largest truncation the boundary-sampling audits accept.
pub const MAX_AUDIT_DIM: usize = 4;

/// Outcome of [`cylindrical_curvature_audit`].
#[derive(Debug, Clone, Serialize)]
pub struct CylindricalAudit {
    pub m: usize,
    pub basis: KlKind,
    pub samples: usize,
    pub projection_failures: usize,
    pub min_gaussian_curvature: f64,
    /// min over samples of H^γ - bound.
    pub min_bound_excess: f64,
    /// -(‖g''‖∞·∫f + α₂r + β₂), the numerator of the lower bound.
    pub bound_numerator: f64,
    /// min |∂₁G_m| over samples.
    pub min_first_partial: f64,
    /// c·∫h₁, the floor on |∂₁G_m|.
    pub first_partial_floor: f64,
    /// min (∂₁G_m)² against the literal constant 8c/π².
    pub min_first_partial_sq: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Samples ∂𝒪_m, evaluates H^γ with the analytic derivatives and compares
/// with the lower bound numerator/‖∇G_m‖.
pub fn cylindrical_curvature_audit(dom: &CylindricalDomain, n_samples: usize, seed: u64) -> Result<CylindricalAudit> {
    let m = dom.truncation();
    if m > MAX_AUDIT_DIM {
        return Err(invalid(format!("curvature audit supports m <= {MAX_AUDIT_DIM}, got {m}")));
    }
    if n_samples == 0 {
        return Err(invalid("audit needs n_samples >= 1"));
    }
    let spec = dom.spec().clone();
    validate_functional(&spec)?;
    let numerator = spec.threshold_slack();
    let domain = dom.clone().into_domain()?;
    let tol = audit_tolerance();
    let mut audit = CylindricalAudit {
        m,
        basis: spec.basis,
        samples: 0,
        projection_failures: 0,
        min_gaussian_curvature: f64::INFINITY,
        min_bound_excess: f64::INFINITY,
        bound_numerator: numerator,
        min_first_partial: f64::INFINITY,
        first_partial_floor: spec.c * spec.basis.first_mode_mass(),
        min_first_partial_sq: f64::INFINITY,
        tol,
        pass: false,
    };
    for x0 in sample_gaussian(m, n_samples, seed)? {
        let bp = match project_to_boundary(&domain, &x0, None) {
            Ok(bp) => bp,
            Err(Error::NoBoundary { .. } | Error::DegenerateLevelSet { .. } | Error::NotOnBoundary { .. }) => {
                audit.projection_failures += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let hg = gaussian_curvature(&domain, &bp)?;
        let grad = domain.gradient(&bp.x);
        let gn = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        audit.samples += 1;
        audit.min_gaussian_curvature = audit.min_gaussian_curvature.min(hg);
        audit.min_bound_excess = audit.min_bound_excess.min(hg - numerator / gn);
        audit.min_first_partial = audit.min_first_partial.min(grad[0].abs());
        audit.min_first_partial_sq = audit.min_first_partial_sq.min(grad[0] * grad[0]);
    }
    audit.pass = audit.projection_failures == 0
        && audit.samples > 0
        && audit.min_gaussian_curvature >= -tol
        && audit.min_bound_excess >= -tol
        && audit.min_first_partial >= audit.first_partial_floor * (1.0 - 1e-9);
    Ok(audit)
}

/// Epigraph G(ξ) = ξ₁ + Φ(ξ₂, …, ξ_m) with its declared constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpigraphSpec {
    pub profile: EpigraphProfile,
    /// Floor on Φ.
    pub c: f64,
    /// Bound on ‖D²Φ‖_HS, also used for -tr D²Φ.
    pub c1: f64,
    /// Bound on ⟨∇Φ(t), t⟩.
    pub c2: f64,
    /// Bound on the operator norm of D²Φ.
    pub c3: f64,
}

impl EpigraphSpec {
    /// Φ ≡ c: the halfspace {ξ₁ < -c}.
    pub fn constant(c: f64) -> Self {
        Self { profile: EpigraphProfile::Constant { c }, c, c1: 0.0, c2: 0.0, c3: 0.0 }
    }

    /// Saturating profile with the constants valid up to truncation `m_max`.
    ///
    /// With s = rate|t|² and ψ(s) = a s/(1+s): ⟨∇Φ(t),t⟩ = 2sψ'(s) ≤ a/2, the
    /// Hessian eigenvalues are 2·rate·ψ' and 2·rate·a(1-3s)/(1+s)³, both
    /// bounded by 2·a·rate in absolute value.
    pub fn saturating(base: f64, amplitude: f64, rate: f64, m_max: usize) -> Self {
        let op = 2.0 * amplitude * rate;
        Self {
            profile: EpigraphProfile::Saturating { base, amplitude, rate },
            c: base,
            c1: op * ((m_max.max(2) - 1) as f64).sqrt(),
            c2: amplitude / 2.0,
            c3: op,
        }
    }

    pub fn margin(&self) -> f64 {
        self.c - self.c1 - self.c2 - self.c3
    }
}

/// Largest observed value of each declared quantity.
#[derive(Debug, Clone, Serialize)]
pub struct EpigraphObserved {
    pub min_profile: f64,
    pub max_hilbert_schmidt: f64,
    pub max_negative_trace: f64,
    pub max_radial_derivative: f64,
    pub max_operator_norm: f64,
}

/// Outcome of [`epigraph_curvature_audit`].
#[derive(Debug, Clone, Serialize)]
pub struct EpigraphAudit {
    pub m: usize,
    pub samples: usize,
    pub projection_failures: usize,
    pub margin: f64,
    pub min_gaussian_curvature: f64,
    pub min_bound_excess: f64,
    pub observed: EpigraphObserved,
    pub tol: f64,
    pub pass: bool,
}

fn observe_profile(profile: &EpigraphProfile, tail: &[f64], obs: &mut EpigraphObserved) {
    let n = tail.len();
    obs.min_profile = obs.min_profile.min(profile.value(tail));
    if n == 0 {
        return;
    }
    let grad = profile.gradient(tail);
    let hess = profile.hessian(tail);
    let radial: f64 = grad.iter().zip(tail).map(|(a, b)| a * b).sum();
    let trace: f64 = (0..n).map(|i| hess[i * n + i]).sum();
    let hs = hess.iter().map(|v| v * v).sum::<f64>().sqrt();
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(n, n, &hess));
    let op = eig.eigenvalues.iter().map(|v| v.abs()).fold(0.0, f64::max);
    obs.max_hilbert_schmidt = obs.max_hilbert_schmidt.max(hs);
    obs.max_negative_trace = obs.max_negative_trace.max(-trace);
    obs.max_radial_derivative = obs.max_radial_derivative.max(radial);
    obs.max_operator_norm = obs.max_operator_norm.max(op);
}

/// Audits the epigraph in R^m: declared constants on samples, then H^γ ≥ 0
/// and H^γ ≥ (C - C₁ - C₂ - C₃)/‖∇G‖ on projected boundary samples.
pub fn epigraph_curvature_audit(spec: &EpigraphSpec, m: usize, n_samples: usize, seed: u64) -> Result<EpigraphAudit> {
    if !(2..=MAX_AUDIT_DIM).contains(&m) {
        return Err(invalid(format!("epigraph audit needs 2 <= m <= {MAX_AUDIT_DIM}, got {m}")));
    }
    if n_samples == 0 {
        return Err(invalid("audit needs n_samples >= 1"));
    }
    let margin = spec.margin();
    if margin < 0.0 || [spec.c, spec.c1, spec.c2, spec.c3].iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::SpecRejected {
            reason: format!("constants must be >= 0 with C - C1 - C2 - C3 >= 0, got margin {margin}"),
            witness: Some(margin),
        });
    }
    let domain = LevelSetDomain::epigraph(m, spec.profile.clone())?;
    let tol = audit_tolerance();
    let mut obs = EpigraphObserved {
        min_profile: f64::INFINITY,
        max_hilbert_schmidt: 0.0,
        max_negative_trace: f64::NEG_INFINITY,
        max_radial_derivative: f64::NEG_INFINITY,
        max_operator_norm: 0.0,
    };
    let draws = sample_gaussian(m, n_samples, seed)?;
    let mut audit = EpigraphAudit {
        m,
        samples: 0,
        projection_failures: 0,
        margin,
        min_gaussian_curvature: f64::INFINITY,
        min_bound_excess: f64::INFINITY,
        observed: obs.clone(),
        tol,
        pass: false,
    };
    for x0 in &draws {
        observe_profile(&spec.profile, &x0[1..], &mut obs);
        let bp = match project_to_boundary(&domain, x0, None) {
            Ok(bp) => bp,
            Err(Error::NoBoundary { .. } | Error::DegenerateLevelSet { .. } | Error::NotOnBoundary { .. }) => {
                audit.projection_failures += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        observe_profile(&spec.profile, &bp.x[1..], &mut obs);
        let hg = gaussian_curvature(&domain, &bp)?;
        let gn = domain.gradient_norm(&bp.x);
        audit.samples += 1;
        audit.min_gaussian_curvature = audit.min_gaussian_curvature.min(hg);
        audit.min_bound_excess = audit.min_bound_excess.min(hg - margin / gn);
    }
    let slack = 1e-12;
    let checks = [
        ("Phi >= C", spec.c - obs.min_profile),
        ("|D2 Phi|_HS <= C1", obs.max_hilbert_schmidt - spec.c1),
        ("-tr D2 Phi <= C1", obs.max_negative_trace - spec.c1),
        ("<grad Phi(t), t> <= C2", obs.max_radial_derivative - spec.c2),
        ("|D2 Phi|_op <= C3", obs.max_operator_norm - spec.c3),
    ];
    for (what, excess) in checks {
        if excess > slack {
            return Err(Error::SpecRejected { reason: format!("{what} violated on samples by {excess:e}"), witness: Some(excess) });
        }
    }
    audit.observed = obs;
    audit.pass = audit.projection_failures == 0
        && audit.samples > 0
        && audit.min_gaussian_curvature >= -tol
        && audit.min_bound_excess >= -tol;
    Ok(audit)
}

/// Grid and quadrature settings for [`resolvent_convergence_study`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyGrid {
    /// Box extent along ξ₁.
    pub lower: f64,
    pub upper: f64,
    /// Half-width of the box along ξ₂, ξ₃.
    pub transverse: f64,
    pub h: f64,
    /// Gauss-Hermite nodes per axis of the comparison rule.
    pub gh_nodes: usize,
    pub tol: f64,
}

impl Default for StudyGrid {
    fn default() -> Self {
        Self { lower: -7.0, upper: 1.0, transverse: 6.0, h: 0.1, gh_nodes: 16, tol: 1e-10 }
    }
}

/// One consecutive-truncation comparison.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    /// ‖u_n - u_{n+1}‖_{L²(γ)}.
    pub d_l2: f64,
    /// ‖∇u_n - ∇u_{n+1}‖_{L²(γ)}.
    pub d_grad: f64,
    pub residual_n: f64,
    pub residual_next: f64,
}

/// Output of [`resolvent_convergence_study`].
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub sigma: f64,
    pub dims: Vec<usize>,
    pub grid: StudyGrid,
    pub rows: Vec<ConvergenceRow>,
    pub solves: Vec<SolveDiagnostics>,
    /// Whether D_n (both senses) is nonincreasing along the table.
    pub nonincreasing: bool,
}

struct TruncatedSolve {
    u: ScalarField,
    grad: Vec<Vec<f64>>,
    residual: f64,
}

/// Largest truncation the grid study handles.
pub const MAX_STUDY_DIM: usize = 3;

fn solve_truncation(spec: &FunctionalSpec, f: &BumpFunction, sigma: f64, n: usize, grid: &StudyGrid) -> Result<(TruncatedSolve, SolveDiagnostics)> {
    let domain = CylindricalDomain::new(spec.clone(), n)?.into_domain()?;
    let mut lower = vec![-grid.transverse; n];
    let mut upper = vec![grid.transverse; n];
    lower[0] = grid.lower;
    upper[0] = grid.upper;
    let g = GaussianGrid::new(GridSpec::with_spacing(lower, upper, grid.h)?, domain)?;
    let rhs = ScalarField::from_fn(&g, |x| f.value(x));
    let opts = SolverOptions { tol: grid.tol, max_iter: None };
    let sol = solve_resolvent(&ResolventJob::new(sigma, rhs)?, &opts)?.require_converged()?;
    let field = discrete_gradient(&sol.u);
    let grad = (0..n).map(|k| (0..g.len()).map(|i| field.at(i)[k]).collect()).collect();
    Ok((TruncatedSolve { u: sol.u, grad, residual: sol.relative_residual }, sol.diagnostics))
}

/// Solves the Dirichlet resolvent on 𝒪_n for each n in `dims` and compares
/// consecutive truncations on a Gauss-Hermite tensor rule of dimension n + 1,
/// extending u_n cylindrically.
///
/// `f` must depend on ξ₁ only (a bump with a one-coordinate center).
pub fn resolvent_convergence_study(
    spec: &FunctionalSpec,
    f: &BumpFunction,
    sigma: f64,
    dims: &[usize],
    grid: &StudyGrid,
) -> Result<ConvergenceReport> {
    if f.center.len() != 1 {
        return Err(invalid("convergence study needs a right-hand side depending on the first coordinate only"));
    }
    let mut dims = dims.to_vec();
    dims.sort_unstable();
    dims.dedup();
    if dims.is_empty() || dims[0] == 0 || *dims.last().unwrap() > MAX_STUDY_DIM {
        return Err(invalid(format!("study dims must lie in 1..={MAX_STUDY_DIM}")));
    }
    let mut solved = Vec::with_capacity(dims.len());
    let mut solves = Vec::with_capacity(dims.len());
    for &n in &dims {
        let (s, diag) = solve_truncation(spec, f, sigma, n, grid)?;
        solved.push((n, s));
        solves.push(diag);
    }
    let mut rows = Vec::new();
    for pair in solved.windows(2) {
        let (n, ref lo) = pair[0];
        let (n1, ref hi) = pair[1];
        if n1 != n + 1 {
            continue;
        }
        let rule = QuadratureRule::gauss_hermite(n1, grid.gh_nodes)?;
        let (lo_grid, hi_grid) = (lo.u.grid(), hi.u.grid());
        let (mut l2, mut gr) = (0.0, 0.0);
        for (x, w) in rule.iter() {
            let head = &x[..n];
            let du = lo.u.interpolate(head) - hi.u.interpolate(x);
            l2 += w * du * du;
            for k in 0..n1 {
                let a = if k < n { lo_grid.interpolate(&lo.grad[k], head) } else { 0.0 };
                let b = hi_grid.interpolate(&hi.grad[k], x);
                gr += w * (a - b) * (a - b);
            }
        }
        rows.push(ConvergenceRow { n, d_l2: l2.sqrt(), d_grad: gr.sqrt(), residual_n: lo.residual, residual_next: hi.residual });
    }
    let nonincreasing = rows.windows(2).all(|w| w[1].d_l2 <= w[0].d_l2 && w[1].d_grad <= w[0].d_grad);
    Ok(ConvergenceReport { sigma, dims, grid: grid.clone(), rows, solves, nonincreasing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use approx::assert_abs_diff_eq;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn bases_are_orthonormal_in_cameron_martin_norm() {
        for kind in [KlKind::BrownianMotion, KlKind::BrownianBridge] {
            let basis = KlBasis::new(kind, 8).unwrap();
            assert!(basis.orthonormality_error() < 1e-10, "{kind:?}");
        }
    }

    #[test]
    fn sup_norm_is_dominated_by_cameron_martin_norm() {
        let mut rng = stream_rng(11, 0);
        for kind in [KlKind::BrownianMotion, KlKind::BrownianBridge] {
            let basis = KlBasis::new(kind, 6).unwrap();
            for _ in 0..50 {
                let xi: Vec<f64> = (0..6).map(|_| StandardNormal.sample(&mut rng)).collect();
                let h_norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!(basis.sup_norm(&xi, 801) <= h_norm);
            }
            for n in 1..=6 {
                let mut e = vec![0.0; 6];
                e[n - 1] = 1.0;
                assert!(basis.sup_norm(&e, 801) <= 1.0);
            }
        }
    }

    #[test]
    fn first_modes_integrate_in_closed_form() {
        for kind in [KlKind::BrownianMotion, KlKind::BrownianBridge] {
            let basis = KlBasis::new(kind, 1).unwrap();
            let mass = basis.quadrature().integrate(|s| basis.h_mode(1, s));
            assert_abs_diff_eq!(mass, kind.first_mode_mass(), epsilon = 1e-14);
        }
    }

    #[test]
    fn basel_partial_sums() {
        assert_eq!(basel_check(1), 4.0);
        let limit = PI * PI / 2.0;
        let mut prev = 0.0;
        for m in [1, 2, 10, 100, 1000] {
            let s = basel_check(m);
            assert!(s > prev && s < limit);
            prev = s;
        }
        // Integral-test tail: Σ_{n>m} (n-½)^{-2} ≈ 1/m.
        assert!((limit - basel_check(1000)).abs() < 2e-3);
    }

    #[test]
    fn trace_densities_converge() {
        assert_eq!(trace_density(KlKind::BrownianMotion, 0, 0.3), 0.0);
        let q = SQuadrature::composite(64, 16).unwrap();
        let mass = q.integrate(|s| trace_density(KlKind::BrownianMotion, 200, s));
        assert!((mass - 0.5).abs() < 1e-3);
        assert!(mass < 0.5);
        assert!((trace_density(KlKind::BrownianBridge, 500, 0.5) - 0.25).abs() < 1e-3);
        let sup = (0..=100)
            .map(|k| {
                let s = k as f64 / 100.0;
                (trace_density(KlKind::BrownianBridge, 500, s) - (s - s * s)).abs()
            })
            .fold(0.0, f64::max);
        assert!(sup <= 2e-3);
    }

    #[test]
    fn rational_derivatives_match_closed_form() {
        let b = 0.7;
        let spec = FunctionalSpec::odd_rational(KlKind::BrownianMotion, b, -1.0);
        for xi in [-3.0, -0.4, 0.0, 0.9, 2.5] {
            let (g, g1, g2) = spec.g.eval(xi);
            let q = 1.0 + xi * xi;
            assert_abs_diff_eq!(g, xi + b * xi / q, epsilon = 1e-13);
            assert_abs_diff_eq!(g1, 1.0 + b * (1.0 - xi * xi) / (q * q), epsilon = 1e-13);
            assert_abs_diff_eq!(g2, 2.0 * b * xi * (xi * xi - 3.0) / q.powi(3), epsilon = 1e-13);
        }
    }

    #[test]
    fn identity_functional_threshold() {
        let ok = FunctionalSpec::affine(KlKind::BrownianMotion, 1.0, 0.0, -1.0);
        let rep = validate_functional(&ok).unwrap();
        assert_abs_diff_eq!(rep.threshold, 1.0, epsilon = 1e-15);
        let bad = FunctionalSpec::affine(KlKind::BrownianMotion, 1.0, 0.0, 1.0);
        assert!(matches!(validate_functional(&bad), Err(Error::SpecRejected { .. })));
    }

    #[test]
    fn odd_rational_constants_are_exact() {
        let spec = FunctionalSpec::odd_rational(KlKind::BrownianMotion, 0.5, -1.0);
        let rep = validate_functional(&spec).unwrap();
        // Envelopes and the g'' bound are attained, so their slack is tiny.
        assert!(rep.upper_envelope < 1e-4 && rep.lower_envelope < 1e-4);
        assert!(rep.second_derivative < 1e-4);
        let mut loose = spec.clone();
        loose.beta2 *= 0.99;
        match validate_functional(&loose) {
            Err(Error::SpecRejected { witness: Some(xi), .. }) => assert!(xi < 0.0),
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn bridge_threshold_is_weaker() {
        let b = 0.5;
        let bm = FunctionalSpec::odd_rational(KlKind::BrownianMotion, b, 0.0);
        let r = -(bm.beta2 + bm.g2_sup / 4.0);
        let bm = FunctionalSpec { r, ..bm };
        let br = FunctionalSpec { basis: KlKind::BrownianBridge, ..bm.clone() };
        assert!(validate_functional(&bm).is_err());
        assert!(validate_functional(&br).is_ok());
    }

    #[test]
    fn pathwise_functional_closed_forms() {
        let spec = FunctionalSpec::affine(KlKind::BrownianMotion, 1.0, 0.0, -1.0);
        let basis = KlBasis::new(KlKind::BrownianMotion, 3).unwrap();
        let g = pathwise_g_eval(&spec, &basis, &[1.0, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(g, 4.0 * 2f64.sqrt() / (PI * PI) + 1.0, epsilon = 1e-14);
        let rational = FunctionalSpec::odd_rational(KlKind::BrownianMotion, 0.5, -1.0);
        let z = pathwise_g_eval(&rational, &basis, &[0.0; 3]).unwrap();
        assert_abs_diff_eq!(z, rational.g.value(0.0) + 1.0, epsilon = 1e-15);
    }

    #[test]
    fn s_quadrature_is_converged_for_polynomials() {
        let spec = FunctionalSpec {
            g: RationalG::polynomial(vec![0.3, -1.0, 0.5, 0.2, -0.1, 0.05, 0.01]),
            ..FunctionalSpec::affine(KlKind::BrownianMotion, 1.0, 0.0, 0.0)
        };
        let coarse = KlBasis::new(KlKind::BrownianMotion, 4).unwrap();
        let fine = KlBasis::with_quadrature(KlKind::BrownianMotion, 4, 16, 16).unwrap();
        let xi = [1.3, -0.7, 2.1, 0.4];
        let a = pathwise_g_eval(&spec, &coarse, &xi).unwrap();
        let b = pathwise_g_eval(&spec, &fine, &xi).unwrap();
        assert!((a - b).abs() < 1e-10);
        assert!(KlBasis::with_quadrature(KlKind::BrownianMotion, 2, 2, 16).is_err());
    }

    #[test]
    fn cylindrical_derivatives_agree_with_finite_differences() {
        let spec = FunctionalSpec::odd_rational(KlKind::BrownianBridge, 0.8, -1.0);
        let cyl = CylindricalDomain::new(spec, 3).unwrap();
        let x = [0.4, -1.1, 0.7];
        let fd_g = crate::domain::fd_gradient(|y| cyl.value(y), &x);
        let fd_h = crate::domain::fd_hessian(|y| cyl.value(y), &x);
        for (a, b) in cyl.gradient(&x).iter().zip(&fd_g) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
        for (a, b) in cyl.hessian(&x).iter().zip(&fd_h) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-5);
        }
    }

    #[test]
    fn affine_cylinder_is_a_tilted_halfspace() {
        let spec = FunctionalSpec::affine(KlKind::BrownianMotion, 1.0, 0.0, -1.0);
        let cyl = CylindricalDomain::new(spec, 2).unwrap();
        let audit = cylindrical_curvature_audit(&cyl, 64, 3).unwrap();
        assert!(audit.pass, "{audit:?}");
        // H = 0 and ⟨x, ∇G⟩ = r on the boundary, so H^γ equals the bound.
        assert!(audit.min_bound_excess.abs() < 1e-9);
        assert!(audit.min_gaussian_curvature > 0.0);
    }

    #[test]
    fn tight_rational_spec_passes_audit() {
        for kind in [KlKind::BrownianMotion, KlKind::BrownianBridge] {
            let base = FunctionalSpec::odd_rational(kind, 0.5, 0.0);
            let spec = FunctionalSpec { r: -(base.beta2 + base.trace_charge()), ..base };
            for m in 1..=3 {
                let cyl = CylindricalDomain::new(spec.clone(), m).unwrap();
                let audit = cylindrical_curvature_audit(&cyl, 48, 5).unwrap();
                assert!(audit.pass, "{kind:?} m={m}: {audit:?}");
                assert!(audit.bound_numerator.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn epigraph_audits() {
        let flat = epigraph_curvature_audit(&EpigraphSpec::constant(2.0), 3, 40, 1).unwrap();
        assert!(flat.pass);
        assert_abs_diff_eq!(flat.min_gaussian_curvature, 2.0, epsilon = 1e-9);
        let zero = epigraph_curvature_audit(&EpigraphSpec::constant(0.0), 2, 40, 1).unwrap();
        assert!(zero.pass && zero.min_gaussian_curvature.abs() < 1e-9);
        let sat = EpigraphSpec::saturating(1.0, 0.5, 0.2, 4);
        assert!(sat.margin() >= 0.0);
        let audit = epigraph_curvature_audit(&sat, 4, 80, 2).unwrap();
        assert!(audit.pass, "{audit:?}");
        let mut wrong = sat.clone();
        wrong.c2 = 0.1;
        wrong.c = wrong.c1 + wrong.c2 + wrong.c3;
        assert!(matches!(epigraph_curvature_audit(&wrong, 4, 80, 2), Err(Error::SpecRejected { .. })));
    }
}
