//! Gradient-contractivity experiments: bump test functions, the pointwise
//! inequality for φ_ε = √(ε² + |∇u|²), the boundary checks and the L^p
//! contractivity sweep.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{curvature_sign_scan, project_to_boundary, LevelSetDomain};
use crate::error::{invalid, Error, Result};
use crate::gauss::sample_gaussian;
use crate::grid::{GaussianGrid, GridSpec, NodeClass, ScalarField};
use crate::solver::{discrete_gradient, discrete_ou_apply, solve_resolvent, ResolventJob, SolverOptions};

/// y(x) = A·exp(1 - 1/(1 - |x-x₀|²/r²)) inside B(x₀, r), 0 outside.
///
/// A center shorter than the ambient dimension acts on the leading
/// coordinates only, giving a bump in those variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpFunction {
    pub center: Vec<f64>,
    pub radius: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

impl BumpFunction {
    /// Unchecked constructor; see [`make_bump`] for the containment check.
    pub fn new(center: Vec<f64>, radius: f64, amplitude: f64) -> Result<Self> {
        if center.is_empty() || !(radius > 0.0) || !amplitude.is_finite() {
            return Err(invalid("bump needs a center, radius > 0 and finite amplitude"));
        }
        Ok(Self { center, radius, amplitude })
    }

    fn scaled_r2(&self, x: &[f64]) -> f64 {
        self.center.iter().zip(x).map(|(c, v)| (v - c) * (v - c)).sum::<f64>() / (self.radius * self.radius)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let q = self.scaled_r2(x);
        if q < 1.0 {
            self.amplitude * (1.0 - 1.0 / (1.0 - q)).exp()
        } else {
            0.0
        }
    }

    /// Closed-form gradient in the ambient dimension `x.len()`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        let q = self.scaled_r2(x);
        if q < 1.0 {
            let y = self.amplitude * (1.0 - 1.0 / (1.0 - q)).exp();
            let k = -y / ((1.0 - q) * (1.0 - q)) * 2.0 / (self.radius * self.radius);
            for (gi, (c, v)) in g.iter_mut().zip(self.center.iter().zip(x)) {
                *gi = k * (v - c);
            }
        }
        g
    }

    pub fn gradient_norm(&self, x: &[f64]) -> f64 {
        self.gradient(x).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest |∇y| over the support (attained on the radial profile).
    pub fn max_gradient_norm(&self) -> f64 {
        (0..=2000)
            .map(|k| {
                let mut x = self.center.clone();
                x[0] += self.radius * k as f64 / 2000.0;
                self.gradient_norm(&x)
            })
            .fold(0.0, f64::max)
    }
}

/// Unit directions covering the sphere S^{d-1}, deterministic.
fn sphere_directions(d: usize) -> Vec<Vec<f64>> {
    match d {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..720)
            .map(|k| {
                let t = k as f64 * std::f64::consts::PI / 360.0;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            let mut dirs: Vec<Vec<f64>> = sample_gaussian(d, 4000, 0x5eed)
                .expect("nonzero sizes")
                .into_iter()
                .map(|v| {
                    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                    v.into_iter().map(|a| a / n).collect()
                })
                .collect();
            for axis in 0..d {
                for s in [-1.0, 1.0] {
                    let mut e = vec![0.0; d];
                    e[axis] = s;
                    dirs.push(e);
                }
            }
            dirs
        }
    }
}

/// A unit-amplitude bump whose support, widened by `margin`, lies in O.
///
/// Containment is checked by sampling G on the sphere of radius r + margin
/// (and at the center).
pub fn make_bump(domain: &LevelSetDomain, center: &[f64], radius: f64, margin: f64) -> Result<BumpFunction> {
    if center.len() != domain.dim() {
        return Err(Error::DimensionMismatch { expected: domain.dim(), got: center.len() });
    }
    if !(margin >= 0.0) {
        return Err(invalid("margin must be nonnegative"));
    }
    let bump = BumpFunction::new(center.to_vec(), radius, 1.0)?;
    let reach = radius + margin;
    let check = |x: &[f64]| -> Result<()> {
        let g = domain.value(x);
        if g < 0.0 {
            Ok(())
        } else {
            Err(Error::SupportNotInside { x: x.to_vec(), value: g })
        }
    };
    check(center)?;
    for dir in sphere_directions(domain.dim()) {
        let x: Vec<f64> = center.iter().zip(&dir).map(|(c, u)| c + reach * u).collect();
        check(&x)?;
    }
    Ok(bump)
}

/// φ = |∇_h u| and φ_ε = √(ε² + φ²) from the discrete gradient.
///
/// Both are defined on interior and frame nodes; exterior nodes keep the
/// field convention value 0, so φ_ε ≥ ε holds off the exterior.
pub fn phi_fields(u: &ScalarField, eps: f64) -> Result<(ScalarField, ScalarField)> {
    if !(eps > 0.0) {
        return Err(invalid("epsilon must be positive"));
    }
    let phi = discrete_gradient(u).norms();
    let grid = u.grid();
    let phi_eps: Vec<f64> = phi.values().iter().map(|p| (eps * eps + p * p).sqrt()).collect();
    Ok((phi, ScalarField::from_values(grid, phi_eps)?))
}

/// Interior node none of whose axis neighbors is exterior or on the frame.
fn is_clean(grid: &GaussianGrid, i: usize) -> bool {
    grid.is_interior(i)
        && (0..grid.dim()).all(|a| {
            [-1, 1].iter().all(|&s| grid.neighbor(i, a, s).is_some_and(|j| grid.is_interior(j)))
        })
}

/// Radius of the region where the θ-weighted solve resolves nodal values.
///
/// The conjugate-gradient residual is measured in the θ-weighted norm, so
/// beyond |x| ≈ 6 the nodal error is only controlled up to a factor θ^{-1/2};
/// pointwise checks are restricted to |x| ≤ this radius.
pub const RESOLVED_RADIUS: f64 = 6.0;

fn within_resolved(x: &[f64]) -> bool {
    x.iter().map(|v| v * v).sum::<f64>() <= RESOLVED_RADIUS * RESOLVED_RADIUS
}

/// Nodes where L_h φ_ε only touches values built from central differences.
pub fn full_stencil_nodes(grid: &GaussianGrid) -> Vec<usize> {
    grid.interior()
        .iter()
        .copied()
        .filter(|&i| {
            is_clean(grid, i)
                && (0..grid.dim()).all(|a| {
                    [-1, 1].iter().all(|&s| grid.neighbor(i, a, s).is_some_and(|j| is_clean(grid, j)))
                })
        })
        .collect()
}

/// Outcome of [`check_lemma_pointwise`].
#[derive(Debug, Clone, Serialize)]
pub struct LemmaCheck {
    /// (node, excess over |∇y| + tol) for each violation.
    pub violations: Vec<(usize, f64)>,
    /// Largest value of lhs - |∇y| over the checked nodes.
    pub max_slack: f64,
    pub checked: usize,
    pub tol: f64,
}

/// Checks φ²/φ_ε - σ·L_hφ_ε ≤ |∇_h y| + tol at full-stencil nodes within
/// [`RESOLVED_RADIUS`].
///
/// Both sides use the same discrete gradient, so for σ → 0 the inequality
/// reduces to φ²/φ_ε ≤ φ exactly and the remaining defect is the O(σh²)
/// commutator between the difference quotient and L_h.
pub fn check_lemma_pointwise(u: &ScalarField, y: &ScalarField, sigma: f64, eps: f64, tol: f64) -> Result<LemmaCheck> {
    let grid = u.grid();
    if !Arc::ptr_eq(grid, y.grid()) {
        return Err(invalid("solution and right-hand side must share a grid"));
    }
    let grad_y = discrete_gradient(y).norms();
    let (phi, phi_eps) = phi_fields(u, eps)?;
    let l_phi = discrete_ou_apply(&phi_eps);
    let mut violations = Vec::new();
    let mut max_slack = f64::NEG_INFINITY;
    let nodes: Vec<usize> =
        full_stencil_nodes(grid).into_iter().filter(|&i| within_resolved(&grid.coords(i))).collect();
    for &i in &nodes {
        let p = phi.values()[i];
        let lhs = p * p / phi_eps.values()[i] - sigma * l_phi.values()[i];
        let slack = lhs - grad_y.values()[i];
        max_slack = max_slack.max(slack);
        if slack > tol {
            violations.push((i, slack - tol));
        }
    }
    Ok(LemmaCheck { violations, max_slack, checked: nodes.len(), tol })
}

/// Outcome of [`check_boundary_normal_derivative`].
#[derive(Debug, Clone, Serialize)]
pub struct BoundaryCheck {
    /// (boundary point, one-sided derivative) for each violation.
    pub violations: Vec<(Vec<f64>, f64)>,
    pub max_derivative: f64,
    pub checked: usize,
    pub tol: f64,
}

/// One-sided differences of the interpolated φ_ε along the outer normal at
/// sampled boundary points must be ≤ tol.
///
/// From a boundary point x_b the probes x_b - kδν (δ = max spacing) walk
/// inward until two consecutive probes sit in cells whose corners all carry
/// central-difference gradients (no exterior neighbor); the derivative is (φ_ε(p_k) - φ_ε(p_{k+1}))/δ. Samples whose
/// boundary point lies outside the box or beyond [`RESOLVED_RADIUS`] are
/// skipped.
pub fn check_boundary_normal_derivative(
    u: &ScalarField,
    eps: f64,
    n_samples: usize,
    seed: u64,
    tol: f64,
) -> Result<BoundaryCheck> {
    let grid = u.grid();
    let domain = grid.domain();
    let (_, phi_eps) = phi_fields(u, eps)?;
    let delta = grid.spec().max_spacing();
    let cell_ok = |x: &[f64]| -> bool { grid.cell_corners(x).is_some_and(|c| c.iter().all(|&j| is_clean(grid, j))) };
    let mut violations = Vec::new();
    let mut max_derivative = f64::NEG_INFINITY;
    let mut checked = 0;
    if n_samples == 0 {
        return Err(invalid("boundary check needs at least one sample"));
    }
    for x0 in sample_gaussian(domain.dim(), n_samples, seed)? {
        let Ok(bp) = project_to_boundary(domain, &x0, None) else {
            continue;
        };
        if !within_resolved(&bp.x) {
            continue;
        }
        let probe = |k: usize| -> Vec<f64> {
            bp.x.iter().zip(&bp.nu).map(|(x, n)| x - k as f64 * delta * n).collect()
        };
        let Some(k) = (1..=6).find(|&k| cell_ok(&probe(k)) && cell_ok(&probe(k + 1))) else {
            continue;
        };
        let d = (phi_eps.interpolate(&probe(k)) - phi_eps.interpolate(&probe(k + 1))) / delta;
        checked += 1;
        max_derivative = max_derivative.max(d);
        if d > tol {
            violations.push((bp.x.clone(), d));
        }
    }
    Ok(BoundaryCheck { violations, max_derivative, checked, tol })
}

/// Smooth convex stand-in for t ↦ t^p.
///
/// For p < 2: g_δ(t) = (t² + δ²)^{p/2} - δ^p, within δ^p of t^p.
/// For p ≥ 2: t^p itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexSurrogate {
    pub p: f64,
    pub delta: f64,
}

pub fn convexity_surrogate(p: f64, delta: f64) -> Result<ConvexSurrogate> {
    if !(p >= 1.0) || !(delta > 0.0) {
        return Err(invalid("surrogate needs p >= 1 and delta > 0"));
    }
    Ok(ConvexSurrogate { p, delta })
}

impl ConvexSurrogate {
    pub fn value(&self, t: f64) -> f64 {
        if self.p >= 2.0 {
            t.abs().powf(self.p)
        } else {
            (t * t + self.delta * self.delta).powf(self.p / 2.0) - self.delta.powf(self.p)
        }
    }
}

/// Σ θ·vol·L_hψ_ε over full-stencil nodes, with ψ_ε = g(φ_ε).
pub fn check_boundary_sign_integral(u: &ScalarField, eps: f64, g: &ConvexSurrogate) -> Result<f64> {
    let grid = u.grid();
    let (_, phi_eps) = phi_fields(u, eps)?;
    let psi: Vec<f64> = phi_eps
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| if grid.class(i) == NodeClass::Exterior { 0.0 } else { g.value(*v) })
        .collect();
    let psi = ScalarField::from_values(grid, psi)?;
    let l_psi = discrete_ou_apply(&psi);
    let vol = grid.cell_volume();
    Ok(full_stencil_nodes(grid).iter().map(|&i| grid.theta(i) * vol * l_psi.values()[i]).sum())
}

/// Sweep configuration for one domain.
#[derive(Debug, Clone)]
pub struct ContractJob {
    pub domain: LevelSetDomain,
    pub grid: GridSpec,
    pub sigmas: Vec<f64>,
    pub ps: Vec<f64>,
    pub bumps: Vec<BumpFunction>,
    pub eps: Vec<f64>,
    pub solver: SolverOptions,
    /// Boundary samples for the curvature scan and the normal-derivative check.
    pub boundary_samples: usize,
    pub seed: u64,
    /// Smoothing parameter of the convex surrogate for p < 2.
    pub surrogate_delta: f64,
    /// Multiplies the pointwise and boundary check tolerances (5h and 10h).
    pub check_scale: f64,
}

impl ContractJob {
    pub fn new(domain: LevelSetDomain, grid: GridSpec, bumps: Vec<BumpFunction>) -> Self {
        Self {
            domain,
            grid,
            sigmas: vec![0.1, 1.0, 10.0],
            ps: vec![1.5, 2.0, 3.0, 4.0],
            bumps,
            eps: vec![1e-3],
            solver: SolverOptions::default(),
            boundary_samples: 200,
            seed: 0,
            surrogate_delta: 1e-3,
            check_scale: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.sigmas.iter().any(|s| !(*s > 0.0)) {
            return Err(invalid("sweep sigmas must be positive"));
        }
        if self.ps.iter().any(|p| !(*p >= 1.0)) {
            return Err(invalid("sweep exponents must be >= 1"));
        }
        if self.eps.is_empty() || self.eps.iter().any(|e| !(*e > 0.0)) {
            return Err(invalid("sweep needs positive epsilons"));
        }
        if !(self.check_scale > 0.0) {
            return Err(invalid("check scale must be positive"));
        }
        if self.bumps.is_empty() {
            return Err(invalid("sweep needs at least one test function"));
        }
        Ok(())
    }
}

/// One (domain, y, σ, p) measurement.
#[derive(Debug, Clone, Serialize)]
pub struct ContractRecord {
    pub domain: String,
    pub bump: usize,
    pub sigma: f64,
    pub p: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub h: f64,
    pub residual: f64,
    pub converged: bool,
    /// p = 1: reported, never asserted.
    pub informational: bool,
}

/// Auxiliary checks for one (y, σ, ε) solve.
#[derive(Debug, Clone, Serialize)]
pub struct AuxRecord {
    pub domain: String,
    pub bump: usize,
    pub sigma: f64,
    pub eps: f64,
    pub h: f64,
    pub lemma_violations: usize,
    pub lemma_max_slack: f64,
    pub boundary_violations: usize,
    pub boundary_max_derivative: f64,
    pub boundary_checked: usize,
    /// (p, Σ θ L_hψ_ε) per exponent.
    pub sign_integrals: Vec<(f64, f64)>,
}

/// Everything a sweep produces.
#[derive(Debug, Clone, Serialize)]
pub struct SweepOutcome {
    pub domain: String,
    pub h: f64,
    /// Smallest H^γ over the boundary samples.
    pub min_gaussian_curvature: f64,
    /// Whether contractivity is claimed on this domain (H^γ ≥ 0 on samples).
    pub curvature_nonnegative: bool,
    pub records: Vec<ContractRecord>,
    pub aux: Vec<AuxRecord>,
}

/// tol_contract = max(0.02, 10h).
pub fn contract_tolerance(h: f64) -> f64 {
    (10.0 * h).max(0.02)
}

/// (Σ θ·vol·|v|^p)^{1/p} over interior nodes.
fn weighted_lp(grid: &GaussianGrid, values: impl Fn(usize) -> f64, p: f64) -> f64 {
    let vol = grid.cell_volume();
    grid.interior()
        .iter()
        .map(|&i| grid.theta(i) * vol * values(i).abs().powf(p))
        .sum::<f64>()
        .powf(1.0 / p)
}

/// Solves every (y, σ), records ‖∇J_σy‖_p / ‖∇y‖_p for each p and runs
/// the pointwise and boundary checks.
///
/// Gradient norms use the same interior cell rule on both sides: the
/// discrete gradient of the solution (one-sided next to the boundary) and the
/// closed-form gradient of the bump.
pub fn contractivity_sweep(job: &ContractJob) -> Result<SweepOutcome> {
    job.validate()?;
    let grid = GaussianGrid::new(job.grid.clone(), job.domain.clone())?;
    let h = job.grid.max_spacing();
    let scan = curvature_sign_scan(&job.domain, job.boundary_samples, job.seed);
    let (min_gaussian_curvature, curvature_nonnegative) = match &scan {
        Ok(s) => (s.min_gaussian, s.violations == 0),
        // No reachable boundary (whole space): nothing to violate.
        Err(Error::NoBoundary { .. }) => (f64::INFINITY, true),
        Err(e) => return Err(clone_err(e)),
    };
    let pairs: Vec<(usize, f64)> = (0..job.bumps.len())
        .flat_map(|b| job.sigmas.iter().map(move |&s| (b, s)))
        .collect();
    let results: Vec<Result<(Vec<ContractRecord>, Vec<AuxRecord>)>> = pairs
        .par_iter()
        .map(|&(b, sigma)| sweep_point(job, &grid, h, b, sigma))
        .collect();
    let mut records = Vec::new();
    let mut aux = Vec::new();
    for r in results {
        let (rec, ax) = r?;
        records.extend(rec);
        aux.extend(ax);
    }
    Ok(SweepOutcome {
        domain: job.domain.name().to_string(),
        h,
        min_gaussian_curvature,
        curvature_nonnegative,
        records,
        aux,
    })
}

fn clone_err(e: &Error) -> Error {
    Error::InvalidParameter(e.to_string())
}

fn sweep_point(
    job: &ContractJob,
    grid: &Arc<GaussianGrid>,
    h: f64,
    b: usize,
    sigma: f64,
) -> Result<(Vec<ContractRecord>, Vec<AuxRecord>)> {
    let bump = &job.bumps[b];
    let y = ScalarField::from_fn(grid, |x| bump.value(x));
    let sol = solve_resolvent(&ResolventJob::new(sigma, y.clone())?, &job.solver)?;
    let grad_u = discrete_gradient(&sol.u).norms();
    let grad_y: Vec<f64> = (0..grid.len())
        .map(|i| if grid.is_interior(i) { bump.gradient_norm(&grid.coords(i)) } else { 0.0 })
        .collect();
    let records = job
        .ps
        .iter()
        .map(|&p| {
            let lhs = weighted_lp(grid, |i| grad_u.values()[i], p);
            let rhs = weighted_lp(grid, |i| grad_y[i], p);
            ContractRecord {
                domain: job.domain.name().to_string(),
                bump: b,
                sigma,
                p,
                lhs,
                rhs,
                ratio: if rhs > 0.0 { lhs / rhs } else { f64::NAN },
                h,
                residual: sol.relative_residual,
                converged: sol.converged,
                informational: p == 1.0,
            }
        })
        .collect();
    let mut aux = Vec::new();
    for &eps in &job.eps {
        let lemma = check_lemma_pointwise(&sol.u, &y, sigma, eps, 5.0 * h * job.check_scale)?;
        let boundary = check_boundary_normal_derivative(&sol.u, eps, job.boundary_samples, job.seed, 10.0 * h * job.check_scale)?;
        let sign_integrals = job
            .ps
            .iter()
            .map(|&p| {
                let g = convexity_surrogate(p, job.surrogate_delta)?;
                Ok((p, check_boundary_sign_integral(&sol.u, eps, &g)?))
            })
            .collect::<Result<Vec<_>>>()?;
        aux.push(AuxRecord {
            domain: job.domain.name().to_string(),
            bump: b,
            sigma,
            eps,
            h,
            lemma_violations: lemma.violations.len(),
            lemma_max_slack: lemma.max_slack,
            boundary_violations: boundary.violations.len(),
            boundary_max_derivative: boundary.max_derivative,
            boundary_checked: boundary.checked,
            sign_integrals,
        });
    }
    Ok((records, aux))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn make_bump_examples() {
        let ball = LevelSetDomain::ball(2, 2.0).unwrap();
        assert!(make_bump(&ball, &[0.0, 0.0], 1.0, 0.5).is_ok());
        let half = LevelSetDomain::halfspace(2, 0, 1.0).unwrap();
        assert!(make_bump(&half, &[-3.0, 0.0], 1.0, 0.5).is_ok());
        let unit = LevelSetDomain::ball(2, 1.0).unwrap();
        assert!(matches!(make_bump(&unit, &[0.0, 0.0], 1.2, 0.0), Err(Error::SupportNotInside { .. })));
    }

    #[test]
    fn bump_gradient_matches_differences() {
        let bump = BumpFunction::new(vec![0.3, -0.2], 1.3, 2.0).unwrap();
        let pts = sample_gaussian(2, 20, 77).unwrap();
        let h = 1e-5;
        for x in pts {
            let x: Vec<f64> = x.iter().map(|v| 0.4 * v).collect();
            let g = bump.gradient(&x);
            for k in 0..2 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                let fd = (bump.value(&xp) - bump.value(&xm)) / (2.0 * h);
                assert_abs_diff_eq!(g[k], fd, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn phi_fields_examples() {
        let whole = LevelSetDomain::whole_space(2).unwrap();
        let grid = GaussianGrid::new(GridSpec::cube(2, 2.0, 0.25).unwrap(), whole).unwrap();
        let (phi, phi_eps) = phi_fields(&ScalarField::zeros(&grid), 0.01).unwrap();
        assert!(phi.values().iter().all(|v| *v == 0.0));
        assert!(phi_eps.values().iter().all(|v| *v == 0.01));
        let lin = ScalarField::from_fn(&grid, |x| x[0]);
        let (phi, phi_eps) = phi_fields(&lin, 0.1).unwrap();
        for &i in grid.interior() {
            assert_abs_diff_eq!(phi.values()[i], 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(phi_eps.values()[i], 1.01f64.sqrt(), epsilon = 1e-12);
            assert!(phi_eps.values()[i] - phi.values()[i] <= 0.1);
        }
    }

    #[test]
    fn zero_solution_passes_every_check() {
        let dom = LevelSetDomain::halfspace(2, 0, 1.0).unwrap();
        let grid = GaussianGrid::new(GridSpec::with_spacing(vec![-6.0, -6.0], vec![0.0, 6.0], 0.2).unwrap(), dom).unwrap();
        let u = ScalarField::zeros(&grid);
        let lemma = check_lemma_pointwise(&u, &u, 1.0, 1e-3, 0.0).unwrap();
        assert!(lemma.violations.is_empty());
        let bd = check_boundary_normal_derivative(&u, 1e-3, 20, 1, 0.0).unwrap();
        assert!(bd.checked > 0 && bd.max_derivative <= 1e-12, "{bd:?}");
        let g = convexity_surrogate(2.0, 1e-3).unwrap();
        assert_abs_diff_eq!(check_boundary_sign_integral(&u, 1e-3, &g).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn surrogate_examples() {
        let g = convexity_surrogate(2.0, 0.5).unwrap();
        assert_eq!(g.value(1.7), 1.7f64.powi(2));
        let g = convexity_surrogate(1.5, 1e-3).unwrap();
        assert!((g.value(1.0) - 1.0).abs() <= 1e-4f64.powf(1.125));
        assert!((g.value(1.0) - 1.0).abs() <= 1e-3f64.powf(1.5));
        assert_eq!(g.value(0.0), 0.0);
        for p in [1.0, 1.5] {
            let g = convexity_surrogate(p, 1e-2).unwrap();
            let dt = 1e-3;
            for k in 1..2000 {
                let t = -1.0 + k as f64 * dt;
                let second = g.value(t + dt) - 2.0 * g.value(t) + g.value(t - dt);
                assert!(second >= -1e-15, "p={p} t={t}");
            }
        }
    }

    #[test]
    fn halfline_sweep_contracts_and_satisfies_checks() {
        let dom = LevelSetDomain::halfspace(1, 0, 1.0).unwrap();
        let bump = make_bump(&dom, &[-3.0], 1.0, 0.5).unwrap();
        let mut job = ContractJob::new(dom, GridSpec::with_spacing(vec![-8.0], vec![0.0], 0.02).unwrap(), vec![bump]);
        job.sigmas = vec![1.0];
        job.ps = vec![1.0, 2.0];
        let out = contractivity_sweep(&job).unwrap();
        assert!(out.curvature_nonnegative);
        for r in &out.records {
            assert!(r.converged);
            assert!(r.ratio <= 1.0 + contract_tolerance(r.h), "{r:?}");
        }
        assert!(out.records[0].informational && !out.records[1].informational);
        let aux = &out.aux[0];
        assert_eq!(aux.lemma_violations, 0, "{aux:?}");
        assert_eq!(aux.boundary_violations, 0, "{aux:?}");
        for (_, v) in &aux.sign_integrals {
            assert!(*v <= 20.0 * aux.h, "{aux:?}");
        }
    }
}
