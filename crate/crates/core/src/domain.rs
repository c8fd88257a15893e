//! Level-set domains O = {G < 0}, outer normals, boundary projection and the
//! two boundary curvature functionals.
//!
//! Curvatures use the unnormalized convention
//! `H = ΔG/|∇G| - <D²G ∇G, ∇G>/|∇G|³`; the geometric mean curvature (divided
//! by d - 1) is only available through [`geometric_mean_curvature`].

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gauss::sample_gaussian;

/// A scalar function G: R^d -> R with first and second derivatives.
///
/// The default derivative methods are central finite differences; library
/// domains override them with closed forms.
pub trait LevelSet: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        fd_gradient(|y| self.value(y), x)
    }

    /// Row-major d×d Hessian.
    fn hessian(&self, x: &[f64]) -> Vec<f64> {
        fd_hessian(|y| self.value(y), x)
    }

    /// |∇G(x)|; overridden where it is cheaper than the full gradient.
    fn gradient_norm(&self, x: &[f64]) -> f64 {
        norm(&self.gradient(x))
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Central-difference gradient, step cbrt(eps)·(1 + |x|).
pub fn fd_gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> Vec<f64> {
    let h = f64::EPSILON.cbrt() * (1.0 + norm(x));
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            y[i] = x[i] + h;
            let fp = f(&y);
            y[i] = x[i] - h;
            let fm = f(&y);
            y[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Central second differences of values, step eps^{1/4}·(1 + |x|).
pub fn fd_hessian<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let h = f64::EPSILON.powf(0.25) * (1.0 + norm(x));
    let f0 = f(x);
    let mut y = x.to_vec();
    let mut hess = vec![0.0; d * d];
    for i in 0..d {
        y[i] = x[i] + h;
        let fp = f(&y);
        y[i] = x[i] - h;
        let fm = f(&y);
        y[i] = x[i];
        hess[i * d + i] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in 0..i {
            let mut corner = |si: f64, sj: f64| {
                y[i] = x[i] + si * h;
                y[j] = x[j] + sj * h;
                let v = f(&y);
                y[i] = x[i];
                y[j] = x[j];
                v
            };
            let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0))
                / (4.0 * h * h);
            hess[i * d + j] = v;
            hess[j * d + i] = v;
        }
    }
    hess
}

/// G ≡ -1: every point is interior. Used for whole-box problems.
#[derive(Debug, Clone)]
pub struct WholeSpace {
    pub dim: usize,
}

impl LevelSet for WholeSpace {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _x: &[f64]) -> f64 {
        -1.0
    }
    fn gradient(&self, _x: &[f64]) -> Vec<f64> {
        vec![0.0; self.dim]
    }
    fn hessian(&self, _x: &[f64]) -> Vec<f64> {
        vec![0.0; self.dim * self.dim]
    }
    fn gradient_norm(&self, _x: &[f64]) -> f64 {
        0.0
    }
}

/// G(x) = <n, x> + c.
#[derive(Debug, Clone)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl LevelSet for Halfspace {
    fn dim(&self) -> usize {
        self.normal.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        dot(&self.normal, x) + self.offset
    }
    fn gradient(&self, _x: &[f64]) -> Vec<f64> {
        self.normal.clone()
    }
    fn gradient_norm(&self, _x: &[f64]) -> f64 {
        norm(&self.normal)
    }
    fn hessian(&self, _x: &[f64]) -> Vec<f64> {
        vec![0.0; self.dim() * self.dim()]
    }
}

/// G(x) = |x - c|² - R².
#[derive(Debug, Clone)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl LevelSet for Ball {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>()
            - self.radius * self.radius
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.center).map(|(a, c)| 2.0 * (a - c)).collect()
    }
    fn gradient_norm(&self, x: &[f64]) -> f64 {
        2.0 * x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt()
    }
    fn hessian(&self, _x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut h = vec![0.0; d * d];
        for i in 0..d {
            h[i * d + i] = 2.0;
        }
        h
    }
}

/// G(x) = Σ x_i²/a_i² - 1.
#[derive(Debug, Clone)]
pub struct Ellipsoid {
    pub semi_axes: Vec<f64>,
}

impl LevelSet for Ellipsoid {
    fn dim(&self) -> usize {
        self.semi_axes.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.semi_axes).map(|(v, a)| v * v / (a * a)).sum::<f64>() - 1.0
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.semi_axes).map(|(v, a)| 2.0 * v / (a * a)).collect()
    }
    fn hessian(&self, _x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut h = vec![0.0; d * d];
        for (i, a) in self.semi_axes.iter().enumerate() {
            h[i * d + i] = 2.0 / (a * a);
        }
        h
    }
}

/// Profile Φ of an epigraph domain G(x) = x₁ + Φ(x₂, …, x_d).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EpigraphProfile {
    /// Φ ≡ c.
    Constant { c: f64 },
    /// Φ(ξ) = base + amplitude·s/(1+s) with s = rate·|ξ|².
    Saturating { base: f64, amplitude: f64, rate: f64 },
}

impl EpigraphProfile {
    pub fn value(&self, tail: &[f64]) -> f64 {
        match *self {
            Self::Constant { c } => c,
            Self::Saturating { base, amplitude, rate } => {
                let s = rate * dot(tail, tail);
                base + amplitude * s / (1.0 + s)
            }
        }
    }

    pub fn gradient(&self, tail: &[f64]) -> Vec<f64> {
        match *self {
            Self::Constant { .. } => vec![0.0; tail.len()],
            Self::Saturating { amplitude, rate, .. } => {
                let s = rate * dot(tail, tail);
                let k = 2.0 * amplitude * rate / ((1.0 + s) * (1.0 + s));
                tail.iter().map(|t| k * t).collect()
            }
        }
    }

    pub fn hessian(&self, tail: &[f64]) -> Vec<f64> {
        let n = tail.len();
        let mut h = vec![0.0; n * n];
        if let Self::Saturating { amplitude, rate, .. } = *self {
            let s = rate * dot(tail, tail);
            let diag = 2.0 * amplitude * rate / ((1.0 + s) * (1.0 + s));
            let outer = 8.0 * amplitude * rate * rate / ((1.0 + s).powi(3));
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] = -outer * tail[i] * tail[j] + if i == j { diag } else { 0.0 };
                }
            }
        }
        h
    }
}

/// G(x) = x₁ + Φ(x₂, …, x_d).
#[derive(Debug, Clone)]
pub struct Epigraph {
    pub dim: usize,
    pub profile: EpigraphProfile,
}

impl LevelSet for Epigraph {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        x[0] + self.profile.value(&x[1..])
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![1.0];
        g.extend(self.profile.gradient(&x[1..]));
        g
    }
    fn hessian(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let tail = self.profile.hessian(&x[1..]);
        let mut h = vec![0.0; d * d];
        for i in 1..d {
            for j in 1..d {
                h[i * d + j] = tail[(i - 1) * (d - 1) + (j - 1)];
            }
        }
        h
    }
}

/// One monomial `coef · Π x_i^{powers_i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    pub powers: Vec<u32>,
}

/// Polynomial level set given by a coefficient table.
#[derive(Debug, Clone)]
pub struct PolynomialLevelSet {
    pub dim: usize,
    pub terms: Vec<Monomial>,
}

impl PolynomialLevelSet {
    fn eval_with(&self, x: &[f64], shift: &[u32]) -> f64 {
        // Evaluates Σ coef · ∂^{shift} Π x_i^{p_i}.
        self.terms
            .iter()
            .map(|t| {
                let mut v = t.coef;
                for i in 0..self.dim {
                    let p = t.powers[i];
                    let s = shift[i];
                    if s > p {
                        return 0.0;
                    }
                    let falling: f64 = (0..s).map(|k| (p - k) as f64).product();
                    v *= falling * x[i].powi((p - s) as i32);
                }
                v
            })
            .sum()
    }
}

impl LevelSet for PolynomialLevelSet {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.eval_with(x, &vec![0; self.dim])
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| {
                let mut s = vec![0; self.dim];
                s[i] = 1;
                self.eval_with(x, &s)
            })
            .collect()
    }
    fn hessian(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut h = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let mut s = vec![0; d];
                s[i] += 1;
                s[j] += 1;
                h[i * d + j] = self.eval_with(x, &s);
            }
        }
        h
    }
}

/// G_Q(x) = G(Qᵀx) for an orthogonal Q (row-major).
#[derive(Debug, Clone)]
pub struct Rotated {
    pub inner: Arc<dyn LevelSet>,
    pub q: Vec<f64>,
}

impl Rotated {
    fn apply(&self, v: &[f64], transpose: bool) -> Vec<f64> {
        let d = v.len();
        (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| if transpose { self.q[j * d + i] } else { self.q[i * d + j] } * v[j])
                    .sum()
            })
            .collect()
    }
}

impl LevelSet for Rotated {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.inner.value(&self.apply(x, true))
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.apply(&self.inner.gradient(&self.apply(x, true)), false)
    }
    fn hessian(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let h = self.inner.hessian(&self.apply(x, true));
        let q = &self.q;
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    for l in 0..d {
                        acc += q[i * d + k] * h[k * d + l] * q[j * d + l];
                    }
                }
                out[i * d + j] = acc;
            }
        }
        out
    }
}

/// Hides the closed-form derivatives of a level set so the finite-difference
/// fallback is used.
#[derive(Debug, Clone)]
pub struct FiniteDifference(pub Arc<dyn LevelSet>);

impl LevelSet for FiniteDifference {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.0.value(x)
    }
}

/// Default declared floor on |∇G| near the boundary.
pub const DEFAULT_GRAD_FLOOR: f64 = 1e-6;

/// A domain O = G^{-1}((-∞, 0)).
#[derive(Clone)]
pub struct LevelSetDomain {
    name: String,
    level_set: Arc<dyn LevelSet>,
    grad_floor: f64,
}

impl fmt::Debug for LevelSetDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LevelSetDomain")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("grad_floor", &self.grad_floor)
            .finish()
    }
}

impl LevelSetDomain {
    pub fn new(name: impl Into<String>, level_set: Arc<dyn LevelSet>, grad_floor: f64) -> Result<Self> {
        if level_set.dim() == 0 {
            return Err(invalid("domain dimension must be >= 1"));
        }
        if !(grad_floor > 0.0) {
            return Err(invalid("grad_floor must be positive"));
        }
        Ok(Self { name: name.into(), level_set, grad_floor })
    }

    pub fn whole_space(dim: usize) -> Result<Self> {
        Self::new("whole_space", Arc::new(WholeSpace { dim }), DEFAULT_GRAD_FLOOR)
    }

    /// {x_axis < -c}, i.e. G = x_axis + c.
    pub fn halfspace(dim: usize, axis: usize, c: f64) -> Result<Self> {
        if axis >= dim {
            return Err(invalid("halfspace axis out of range"));
        }
        let mut normal = vec![0.0; dim];
        normal[axis] = 1.0;
        Self::affine(normal, c)
    }

    /// {<n, x> + c < 0}.
    pub fn affine(normal: Vec<f64>, c: f64) -> Result<Self> {
        Self::new("halfspace", Arc::new(Halfspace { normal, offset: c }), DEFAULT_GRAD_FLOOR)
    }

    pub fn ball(dim: usize, radius: f64) -> Result<Self> {
        Self::ball_centered(vec![0.0; dim], radius)
    }

    pub fn ball_centered(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(invalid("ball radius must be positive"));
        }
        Self::new("ball", Arc::new(Ball { center, radius }), DEFAULT_GRAD_FLOOR)
    }

    pub fn ellipsoid(semi_axes: Vec<f64>) -> Result<Self> {
        if semi_axes.iter().any(|a| !(*a > 0.0)) {
            return Err(invalid("ellipsoid semi-axes must be positive"));
        }
        Self::new("ellipsoid", Arc::new(Ellipsoid { semi_axes }), DEFAULT_GRAD_FLOOR)
    }

    pub fn epigraph(dim: usize, profile: EpigraphProfile) -> Result<Self> {
        Self::new("epigraph", Arc::new(Epigraph { dim, profile }), DEFAULT_GRAD_FLOOR)
    }

    pub fn polynomial(dim: usize, terms: Vec<Monomial>) -> Result<Self> {
        if terms.iter().any(|t| t.powers.len() != dim) {
            return Err(invalid("monomial powers must have length dim"));
        }
        Self::new("polynomial", Arc::new(PolynomialLevelSet { dim, terms }), DEFAULT_GRAD_FLOOR)
    }

    pub fn with_grad_floor(mut self, grad_floor: f64) -> Result<Self> {
        if !(grad_floor > 0.0) {
            return Err(invalid("grad_floor must be positive"));
        }
        self.grad_floor = grad_floor;
        Ok(self)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// The same domain rotated by the orthogonal matrix `q` (row-major).
    pub fn rotated(&self, q: Vec<f64>) -> Result<Self> {
        let d = self.dim();
        if q.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, got: q.len() });
        }
        Self::new(
            format!("{}_rotated", self.name),
            Arc::new(Rotated { inner: self.level_set.clone(), q }),
            self.grad_floor,
        )
    }

    /// The same domain with derivatives replaced by finite differences.
    pub fn finite_difference(&self) -> Self {
        Self {
            name: format!("{}_fd", self.name),
            level_set: Arc::new(FiniteDifference(self.level_set.clone())),
            grad_floor: self.grad_floor,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.level_set.dim()
    }

    pub fn grad_floor(&self) -> f64 {
        self.grad_floor
    }

    pub fn level_set(&self) -> &Arc<dyn LevelSet> {
        &self.level_set
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.level_set.value(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.level_set.gradient(x)
    }

    pub fn hessian(&self, x: &[f64]) -> Vec<f64> {
        self.level_set.hessian(x)
    }

    pub fn gradient_norm(&self, x: &[f64]) -> f64 {
        self.level_set.gradient_norm(x)
    }

    /// G(x) < 0.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.value(x) < 0.0
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }
}

/// A point on ∂O with its unit outer normal ∇G/|∇G|.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub x: Vec<f64>,
    pub nu: Vec<f64>,
}

/// Default boundary tolerance 1e-10·(1 + |G(x0)|).
pub fn default_tol_bd(g0: f64) -> f64 {
    1e-10 * (1.0 + g0.abs())
}

impl BoundaryPoint {
    /// Validates |G(x)| ≤ tol_bd and |∇G(x)| ≥ the domain's floor.
    pub fn new(dom: &LevelSetDomain, x: Vec<f64>, tol_bd: f64) -> Result<Self> {
        dom.check_dim(&x)?;
        let residual = dom.value(&x).abs();
        if residual > tol_bd {
            return Err(Error::NotOnBoundary { x, residual, tol: tol_bd });
        }
        let grad = dom.gradient(&x);
        let gn = norm(&grad);
        if gn < dom.grad_floor() {
            return Err(Error::DegenerateLevelSet { x, grad_norm: gn, floor: dom.grad_floor() });
        }
        let nu = grad.iter().map(|g| g / gn).collect();
        Ok(Self { x, nu })
    }
}

fn nondegenerate_gradient(dom: &LevelSetDomain, x: &[f64]) -> Result<Vec<f64>> {
    let grad = dom.gradient(x);
    let gn = norm(&grad);
    if gn < dom.grad_floor() {
        return Err(Error::DegenerateLevelSet { x: x.to_vec(), grad_norm: gn, floor: dom.grad_floor() });
    }
    Ok(grad)
}

/// Unnormalized (inner) mean curvature ΔG/|∇G| - <D²G∇G,∇G>/|∇G|³.
///
/// In d = 1 the second fundamental form is empty and the value is 0.
pub fn mean_curvature(dom: &LevelSetDomain, bp: &BoundaryPoint) -> Result<f64> {
    let grad = nondegenerate_gradient(dom, &bp.x)?;
    let d = dom.dim();
    if d == 1 {
        return Ok(0.0);
    }
    let hess = dom.hessian(&bp.x);
    let gn = norm(&grad);
    let lap: f64 = (0..d).map(|i| hess[i * d + i]).sum();
    let mut quad = 0.0;
    for i in 0..d {
        for j in 0..d {
            quad += grad[i] * hess[i * d + j] * grad[j];
        }
    }
    Ok(lap / gn - quad / gn.powi(3))
}

/// Geometric mean curvature: the unnormalized value divided by d - 1.
pub fn geometric_mean_curvature(dom: &LevelSetDomain, bp: &BoundaryPoint) -> Result<f64> {
    let d = dom.dim();
    if d < 2 {
        return Err(invalid("geometric mean curvature needs d >= 2"));
    }
    Ok(mean_curvature(dom, bp)? / (d - 1) as f64)
}

/// Gaussian mean curvature H^γ(x) = H(x) - <x, ν(x)>.
pub fn gaussian_curvature(dom: &LevelSetDomain, bp: &BoundaryPoint) -> Result<f64> {
    Ok(mean_curvature(dom, bp)? - dot(&bp.x, &bp.nu))
}

const MAX_PROJECTION_ITERS: usize = 100;

/// Moves `x0` along -sign(G)·∇G(x0) until |G| ≤ tol_bd.
///
/// The search brackets a sign change by doubling the step, then runs a
/// Newton iteration safeguarded by bisection. At most 100 evaluations of the
/// line function are spent.
pub fn project_to_boundary(dom: &LevelSetDomain, x0: &[f64], tol_bd: Option<f64>) -> Result<BoundaryPoint> {
    dom.check_dim(x0)?;
    let g0 = dom.value(x0);
    let tol = tol_bd.unwrap_or_else(|| default_tol_bd(g0));
    if g0.abs() <= tol {
        return BoundaryPoint::new(dom, x0.to_vec(), tol);
    }
    let grad0 = dom.gradient(x0);
    let gn0 = norm(&grad0);
    let no_boundary = || Error::NoBoundary { x0: x0.to_vec() };
    if !(gn0 > 0.0) || !gn0.is_finite() {
        return Err(no_boundary());
    }
    let sign = g0.signum();
    let dir: Vec<f64> = grad0.iter().map(|g| -sign * g / gn0).collect();
    let point = |t: f64| -> Vec<f64> { x0.iter().zip(&dir).map(|(a, b)| a + t * b).collect() };
    let line = |t: f64| dom.value(&point(t));

    let mut evals = 0;
    let (mut lo, mut hi) = (0.0, (g0.abs() / gn0).max(1e-12));
    let mut g_hi = line(hi);
    evals += 1;
    while g_hi.signum() == sign && g_hi != 0.0 {
        if evals >= MAX_PROJECTION_ITERS || !g_hi.is_finite() {
            return Err(no_boundary());
        }
        lo = hi;
        hi *= 2.0;
        g_hi = line(hi);
        evals += 1;
    }
    // Sign change in [lo, hi].
    let mut t = hi;
    let mut gt = g_hi;
    while gt.abs() > tol {
        if evals >= MAX_PROJECTION_ITERS {
            return Err(no_boundary());
        }
        let slope = dot(&dom.gradient(&point(t)), &dir);
        let mut next = if slope != 0.0 { t - gt / slope } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let gn = line(next);
        evals += 1;
        if gn.signum() == sign {
            lo = next;
        } else {
            hi = next;
        }
        t = next;
        gt = gn;
        if hi - lo <= f64::EPSILON * (1.0 + hi.abs()) && gt.abs() > tol {
            return Err(no_boundary());
        }
    }
    BoundaryPoint::new(dom, point(t), tol)
}

/// One evaluated boundary sample.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureSample {
    pub x: Vec<f64>,
    pub mean: f64,
    pub gaussian: f64,
}

/// Result of [`curvature_sign_scan`].
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureScan {
    pub min_gaussian: f64,
    pub argmin: Vec<f64>,
    pub violations: usize,
    pub tol: f64,
    pub samples: Vec<CurvatureSample>,
}

/// Tolerance below zero that still counts as nonnegative curvature.
pub const CURVATURE_SIGN_TOL: f64 = 1e-9;

/// Projects `n_samples` seeded Gaussian draws onto ∂O and evaluates H^γ.
pub fn curvature_sign_scan(dom: &LevelSetDomain, n_samples: usize, seed: u64) -> Result<CurvatureScan> {
    if n_samples == 0 {
        return Err(invalid("curvature scan needs n_samples >= 1"));
    }
    let draws = sample_gaussian(dom.dim(), n_samples, seed)?;
    let mut samples = Vec::with_capacity(n_samples);
    for x0 in &draws {
        let bp = project_to_boundary(dom, x0, None)?;
        let mean = mean_curvature(dom, &bp)?;
        let gaussian = mean - dot(&bp.x, &bp.nu);
        samples.push(CurvatureSample { x: bp.x, mean, gaussian });
    }
    let (arg, min) = samples
        .iter()
        .enumerate()
        .map(|(i, s)| (i, s.gaussian))
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    let violations = samples.iter().filter(|s| s.gaussian < -CURVATURE_SIGN_TOL).count();
    Ok(CurvatureScan {
        min_gaussian: min,
        argmin: samples[arg].x.clone(),
        violations,
        tol: CURVATURE_SIGN_TOL,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bp(dom: &LevelSetDomain, x: Vec<f64>) -> BoundaryPoint {
        BoundaryPoint::new(dom, x, 1e-9).unwrap()
    }

    #[test]
    fn halfspace_has_flat_boundary() {
        let dom = LevelSetDomain::halfspace(2, 0, 1.0).unwrap();
        let p = bp(&dom, vec![-1.0, 3.0]);
        assert_eq!(mean_curvature(&dom, &p).unwrap(), 0.0);
        assert_abs_diff_eq!(gaussian_curvature(&dom, &p).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn ball_curvatures_match_closed_form() {
        let dom = LevelSetDomain::ball(2, 0.5).unwrap();
        let p = bp(&dom, vec![0.3, 0.4]);
        assert_abs_diff_eq!(mean_curvature(&dom, &p).unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(geometric_mean_curvature(&dom, &p).unwrap(), 2.0, epsilon = 1e-12);
        let dom3 = LevelSetDomain::ball(3, 1.0).unwrap();
        let p3 = bp(&dom3, vec![0.0, 0.6, 0.8]);
        assert_abs_diff_eq!(mean_curvature(&dom3, &p3).unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gaussian_curvature(&dom3, &p3).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn interval_violates_curvature_hypothesis() {
        let dom = LevelSetDomain::ball(1, 0.7).unwrap();
        let p = bp(&dom, vec![0.7]);
        assert_eq!(mean_curvature(&dom, &p).unwrap(), 0.0);
        assert_abs_diff_eq!(gaussian_curvature(&dom, &p).unwrap(), -0.7, epsilon = 1e-14);
    }

    #[test]
    fn degenerate_gradient_is_reported() {
        // G = x1^2 + x2^2 has a degenerate zero level set at the origin.
        let dom = LevelSetDomain::polynomial(
            2,
            vec![Monomial { coef: 1.0, powers: vec![2, 0] }, Monomial { coef: 1.0, powers: vec![0, 2] }],
        )
        .unwrap();
        let err = BoundaryPoint::new(&dom, vec![0.0, 0.0], 1e-9).unwrap_err();
        assert!(matches!(err, Error::DegenerateLevelSet { .. }));
        let fake = BoundaryPoint { x: vec![0.0, 0.0], nu: vec![1.0, 0.0] };
        assert!(matches!(mean_curvature(&dom, &fake), Err(Error::DegenerateLevelSet { .. })));
    }

    #[test]
    fn projection_examples() {
        let ball = LevelSetDomain::ball(2, 1.0).unwrap();
        let p = project_to_boundary(&ball, &[2.0, 0.0], Some(1e-12)).unwrap();
        assert_abs_diff_eq!(p.x[0], 1.0, epsilon = 1e-11);
        assert_abs_diff_eq!(p.x[1], 0.0, epsilon = 1e-14);

        let half = LevelSetDomain::halfspace(2, 0, 1.0).unwrap();
        let p = project_to_boundary(&half, &[0.0, 5.0], None).unwrap();
        assert_abs_diff_eq!(p.x[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.x[1], 5.0, epsilon = 1e-14);

        let epi = LevelSetDomain::epigraph(2, EpigraphProfile::Constant { c: 2.0 }).unwrap();
        let p = project_to_boundary(&epi, &[0.0, 0.0], None).unwrap();
        assert_abs_diff_eq!(p.x[0], -2.0, epsilon = 1e-12);
    }

    #[test]
    fn projection_without_sign_change_fails() {
        // G = x1^2 + 1 is positive everywhere.
        let dom = LevelSetDomain::polynomial(
            1,
            vec![Monomial { coef: 1.0, powers: vec![2] }, Monomial { coef: 1.0, powers: vec![0] }],
        )
        .unwrap();
        assert!(matches!(project_to_boundary(&dom, &[1.0], None), Err(Error::NoBoundary { .. })));
    }

    #[test]
    fn boundary_point_normal_is_outward_unit() {
        let dom = LevelSetDomain::ellipsoid(vec![2.0, 0.5]).unwrap();
        let p = project_to_boundary(&dom, &[0.7, 0.9], None).unwrap();
        assert_abs_diff_eq!(norm(&p.nu), 1.0, epsilon = 1e-12);
        let probe: Vec<f64> = p.x.iter().zip(&p.nu).map(|(x, n)| x + 1e-6 * n).collect();
        assert!(dom.value(&probe) > 0.0);
    }

    #[test]
    fn finite_difference_derivatives_match_closed_form() {
        let dom = LevelSetDomain::epigraph(
            3,
            EpigraphProfile::Saturating { base: 2.0, amplitude: 0.5, rate: 0.5 },
        )
        .unwrap();
        let fd = dom.finite_difference();
        let x = [0.3, -0.8, 1.1];
        for (a, b) in dom.gradient(&x).iter().zip(fd.gradient(&x)) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-9);
        }
        for (a, b) in dom.hessian(&x).iter().zip(fd.hessian(&x)) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-6);
        }
    }

    #[test]
    fn polynomial_matches_ball() {
        // |x|² - 4 written as a coefficient table.
        let poly = LevelSetDomain::polynomial(
            2,
            vec![
                Monomial { coef: 1.0, powers: vec![2, 0] },
                Monomial { coef: 1.0, powers: vec![0, 2] },
                Monomial { coef: -4.0, powers: vec![0, 0] },
            ],
        )
        .unwrap();
        let ball = LevelSetDomain::ball(2, 2.0).unwrap();
        let x = [1.2, -1.6];
        assert_abs_diff_eq!(poly.value(&x), ball.value(&x), epsilon = 1e-14);
        assert_eq!(poly.gradient(&x), ball.gradient(&x));
        assert_eq!(poly.hessian(&x), ball.hessian(&x));
    }

    #[test]
    fn scan_counts_violations() {
        let good = LevelSetDomain::ball(2, 0.9).unwrap();
        let scan = curvature_sign_scan(&good, 50, 3).unwrap();
        assert_eq!(scan.violations, 0);
        assert_abs_diff_eq!(scan.min_gaussian, 1.0 / 0.9 - 0.9, epsilon = 1e-8);

        let bad = LevelSetDomain::ball(2, 1.5).unwrap();
        let scan = curvature_sign_scan(&bad, 50, 3).unwrap();
        assert_eq!(scan.violations, 50);

        let flat = LevelSetDomain::halfspace(2, 0, 0.0).unwrap();
        let scan = curvature_sign_scan(&flat, 50, 3).unwrap();
        assert_abs_diff_eq!(scan.min_gaussian, 0.0, epsilon = 1e-10);
        assert_eq!(scan.violations, 0);
    }
}
