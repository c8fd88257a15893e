//! Finite-difference Ornstein-Uhlenbeck operator with staircase Dirichlet
//! conditions and the resolvent solve (I - σL_h)u = y.
//!
//! The stencil is the flux form of Lf = θ⁻¹∇·(θ∇f): along axis k the face
//! weights are θ(x ± h e_k/2)/(θ(x) h²) = exp(∓x_k h/2 - h²/8)/h². With these
//! weights θ(x)w₊(x) = θ(x+h e_k)w₋(x+h e_k), so L_h is symmetric in the
//! θ-weighted inner product and -L_h is positive semidefinite.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::grid::{GaussianGrid, GridSpec, NodeClass, ScalarField, VectorField};

/// Face weights (toward +e_k, toward -e_k) at coordinate x_k with spacing h.
#[inline]
pub fn face_weights(xk: f64, h: f64) -> (f64, f64) {
    let base = (-h * h / 8.0).exp() / (h * h);
    (base * (-xk * h / 2.0).exp(), base * (xk * h / 2.0).exp())
}

/// Compressed sparse rows over the interior unknowns.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SparseMatrix {
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate().take(self.n) {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *out = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .find(|&k| self.cols[k] == r)
                    .map_or(0.0, |k| self.vals[k])
            })
            .collect()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn entry(&self, r: usize, c: usize) -> f64 {
        (self.row_ptr[r]..self.row_ptr[r + 1])
            .find(|&k| self.cols[k] == c)
            .map_or(0.0, |k| self.vals[k])
    }
}

/// A = I - σL_h restricted to interior nodes. Non-interior nodes are pinned
/// to 0, which is the identity row of the full system and is not stored.
#[derive(Debug, Clone)]
pub struct OuSystem {
    pub grid: Arc<GaussianGrid>,
    pub sigma: f64,
    pub matrix: SparseMatrix,
    /// Position of each grid node among the unknowns.
    pub unknown_of: Vec<Option<usize>>,
}

impl OuSystem {
    /// θ at each unknown.
    pub fn thetas(&self) -> Vec<f64> {
        self.grid.interior().iter().map(|&i| self.grid.theta(i)).collect()
    }

    /// Full-grid product A f, with identity rows on pinned nodes.
    pub fn apply_full(&self, f: &[f64]) -> Vec<f64> {
        let interior = self.grid.interior();
        let reduced: Vec<f64> = interior.iter().map(|&i| f[i]).collect();
        let mut out = f.to_vec();
        let mut tmp = vec![0.0; reduced.len()];
        self.matrix.apply(&reduced, &mut tmp);
        for (k, &i) in interior.iter().enumerate() {
            out[i] = tmp[k];
        }
        out
    }
}

/// Assembles I - σL_h. σ = 0 gives the identity; σ < 0 is rejected.
pub fn assemble_ou_operator(grid: &Arc<GaussianGrid>, sigma: f64) -> Result<OuSystem> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(invalid(format!("sigma must be finite and nonnegative, got {sigma}")));
    }
    let d = grid.dim();
    let interior = grid.interior();
    let mut unknown_of = vec![None; grid.len()];
    for (k, &i) in interior.iter().enumerate() {
        unknown_of[i] = Some(k);
    }
    let mut row_ptr = Vec::with_capacity(interior.len() + 1);
    let mut cols = Vec::with_capacity(interior.len() * (2 * d + 1));
    let mut vals = Vec::with_capacity(interior.len() * (2 * d + 1));
    row_ptr.push(0);
    for (k, &i) in interior.iter().enumerate() {
        let mut diag = 1.0;
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(2 * d);
        for axis in 0..d {
            let (wp, wm) = face_weights(grid.coord(i, axis), grid.spacing(axis));
            diag += sigma * (wp + wm);
            for (step, w) in [(1, wp), (-1, wm)] {
                let j = grid.neighbor(i, axis, step).expect("interior nodes have both neighbors");
                if let Some(col) = unknown_of[j] {
                    entries.push((col, -sigma * w));
                }
            }
        }
        entries.push((k, diag));
        entries.sort_by_key(|e| e.0);
        for (c, v) in entries {
            cols.push(c);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }
    Ok(OuSystem {
        grid: grid.clone(),
        sigma,
        matrix: SparseMatrix { n: interior.len(), row_ptr, cols, vals },
        unknown_of,
    })
}

/// L_h f at interior nodes using the actual neighbor values; 0 elsewhere.
pub fn discrete_ou_apply(f: &ScalarField) -> ScalarField {
    let grid = f.grid();
    let v = f.values();
    let mut out = vec![0.0; grid.len()];
    for &i in grid.interior() {
        let mut acc = 0.0;
        for axis in 0..grid.dim() {
            let (wp, wm) = face_weights(grid.coord(i, axis), grid.spacing(axis));
            let jp = grid.neighbor(i, axis, 1).expect("interior");
            let jm = grid.neighbor(i, axis, -1).expect("interior");
            acc += wp * (v[jp] - v[i]) + wm * (v[jm] - v[i]);
        }
        out[i] = acc;
    }
    ScalarField::from_values(grid, out).expect("grid-sized")
}

/// Gradient at interior nodes.
///
/// Central differences where neither axis neighbor is exterior; a one-sided
/// difference toward an exterior neighbor (whose pinned value is 0) when
/// exactly one is; 0 along an axis where both are.
pub fn discrete_gradient(u: &ScalarField) -> VectorField {
    let grid = u.grid();
    let v = u.values();
    let mut out = VectorField::zeros(grid);
    for &i in grid.interior() {
        let g = out.at_mut(i);
        for (axis, ga) in g.iter_mut().enumerate() {
            let h = grid.spacing(axis);
            let jp = grid.neighbor(i, axis, 1).expect("interior");
            let jm = grid.neighbor(i, axis, -1).expect("interior");
            let ext_p = grid.class(jp) == NodeClass::Exterior;
            let ext_m = grid.class(jm) == NodeClass::Exterior;
            *ga = match (ext_m, ext_p) {
                (false, false) => (v[jp] - v[jm]) / (2.0 * h),
                (false, true) => (0.0 - v[i]) / h,
                (true, false) => (v[i] - 0.0) / h,
                (true, true) => 0.0,
            };
        }
    }
    out
}

/// A resolvent problem (I - σL)u = y on the grid's domain.
#[derive(Debug, Clone)]
pub struct ResolventJob {
    pub sigma: f64,
    pub rhs: ScalarField,
}

impl ResolventJob {
    pub fn new(sigma: f64, rhs: ScalarField) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(invalid(format!("resolvent needs sigma > 0, got {sigma}")));
        }
        Ok(Self { sigma, rhs })
    }

    pub fn grid(&self) -> &Arc<GaussianGrid> {
        self.rhs.grid()
    }
}

/// Conjugate-gradient settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Relative residual target in the θ-weighted norm.
    pub tol: f64,
    /// Iteration cap; `None` means 50·√(interior nodes).
    pub max_iter: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: None }
    }
}

impl SolverOptions {
    pub fn iteration_cap(&self, n_unknowns: usize) -> usize {
        self.max_iter.unwrap_or_else(|| (50.0 * (n_unknowns as f64).sqrt()).ceil() as usize).max(1)
    }
}

/// Assembly and solve bookkeeping.
#[derive(Debug, Clone, Serialize)]
pub struct SolveDiagnostics {
    pub sigma: f64,
    pub grid: GridSpec,
    pub nodes: usize,
    pub interior: usize,
    pub cut: usize,
    pub nnz: usize,
    pub tail_mass: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub relative_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// u = J_σ y with its residual history summary.
#[derive(Debug, Clone)]
pub struct ResolventSolution {
    pub u: ScalarField,
    pub relative_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub diagnostics: SolveDiagnostics,
}

impl ResolventSolution {
    /// Errors when the iteration budget ran out.
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged { residual: self.relative_residual, iterations: self.iterations })
        }
    }

    /// Nodal CSV: coordinates, u and |∇u|.
    pub fn write_nodal_csv(&self, path: &Path) -> Result<()> {
        let grid = self.u.grid();
        let grad = discrete_gradient(&self.u).norms();
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        let header: Vec<String> = (1..=grid.dim()).map(|k| format!("x{k}")).collect();
        writeln!(out, "{},u,grad_norm", header.join(","))?;
        for i in 0..grid.len() {
            let coords: Vec<String> = grid.coords(i).iter().map(|c| format!("{c}")).collect();
            writeln!(out, "{},{},{}", coords.join(","), self.u.values()[i], grad.values()[i])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn diagnostics_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.diagnostics)?)
    }
}

fn theta_dot(a: &[f64], b: &[f64], theta: &[f64]) -> f64 {
    a.iter().zip(b).zip(theta).map(|((x, y), t)| x * y * t).sum()
}

/// Jacobi-preconditioned conjugate gradients in the θ inner product.
///
/// Stops when |Au - y|_θ ≤ tol·|y|_θ. When the budget runs out the iterate
/// with the smallest residual is returned with `converged = false`.
pub fn solve_resolvent(job: &ResolventJob, opts: &SolverOptions) -> Result<ResolventSolution> {
    if !(opts.tol > 0.0) {
        return Err(invalid("solver tolerance must be positive"));
    }
    let grid = job.grid().clone();
    let system = assemble_ou_operator(&grid, job.sigma)?;
    let a = &system.matrix;
    let n = a.n;
    let theta = system.thetas();
    let y: Vec<f64> = grid.interior().iter().map(|&i| job.rhs.values()[i]).collect();
    let max_iter = opts.iteration_cap(n);
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / d).collect();

    let y_norm = theta_dot(&y, &y, &theta).sqrt();
    let mut u = vec![0.0; n];
    let mut best = (0.0f64, u.clone());
    let mut iterations = 0;
    let mut rel = 0.0;
    if y_norm > 0.0 {
        let mut r = y.clone();
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, m)| r * m).collect();
        let mut p = z.clone();
        let mut rho = theta_dot(&r, &z, &theta);
        let mut q = vec![0.0; n];
        rel = 1.0;
        best.0 = 1.0;
        while rel > opts.tol && iterations < max_iter {
            a.apply(&p, &mut q);
            let alpha = rho / theta_dot(&p, &q, &theta);
            for k in 0..n {
                u[k] += alpha * p[k];
                r[k] -= alpha * q[k];
            }
            iterations += 1;
            rel = theta_dot(&r, &r, &theta).sqrt() / y_norm;
            if rel < best.0 {
                best.0 = rel;
                if rel > opts.tol {
                    best.1.copy_from_slice(&u);
                }
            }
            if rel <= opts.tol {
                break;
            }
            for k in 0..n {
                z[k] = r[k] * inv_diag[k];
            }
            let rho_next = theta_dot(&r, &z, &theta);
            let beta = rho_next / rho;
            rho = rho_next;
            for k in 0..n {
                p[k] = z[k] + beta * p[k];
            }
        }
        if rel > opts.tol {
            // Budget exhausted: fall back to the best iterate seen.
            u = best.1;
        }
        // The recursive residual drifts from the true one in floating point,
        // so convergence is judged on y - Au.
        let mut au = vec![0.0; n];
        a.apply(&u, &mut au);
        let res: Vec<f64> = y.iter().zip(&au).map(|(a, b)| a - b).collect();
        rel = theta_dot(&res, &res, &theta).sqrt() / y_norm;
    }
    let converged = rel <= opts.tol;
    let mut full = vec![0.0; grid.len()];
    for (k, &i) in grid.interior().iter().enumerate() {
        full[i] = u[k];
    }
    let diagnostics = SolveDiagnostics {
        sigma: job.sigma,
        grid: grid.spec().clone(),
        nodes: grid.len(),
        interior: n,
        cut: grid.cut_count(),
        nnz: a.nnz(),
        tail_mass: grid.tail_mass(),
        tol: opts.tol,
        max_iter,
        relative_residual: rel,
        iterations,
        converged,
    };
    Ok(ResolventSolution {
        u: ScalarField::from_values(&grid, full)?,
        relative_residual: rel,
        iterations,
        converged,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::LevelSetDomain;
    use crate::gauss::hermite_poly;
    use approx::assert_abs_diff_eq;
    use rand::{RngExt, SeedableRng};

    fn whole_box(dim: usize, r: f64, h: f64) -> Arc<GaussianGrid> {
        GaussianGrid::new(GridSpec::cube(dim, r, h).unwrap(), LevelSetDomain::whole_space(dim).unwrap()).unwrap()
    }

    #[test]
    fn sigma_zero_is_identity() {
        let grid = whole_box(1, 4.0, 0.1);
        let sys = assemble_ou_operator(&grid, 0.0).unwrap();
        for r in 0..sys.matrix.n {
            for c in 0..sys.matrix.n {
                assert_eq!(sys.matrix.entry(r, c), if r == c { 1.0 } else { 0.0 });
            }
        }
        assert!(assemble_ou_operator(&grid, -1.0).is_err());
        assert!(ResolventJob::new(0.0, ScalarField::zeros(&grid)).is_err());
    }

    #[test]
    fn operator_is_theta_symmetric() {
        let dom = LevelSetDomain::ball(2, 1.3).unwrap();
        let grid = GaussianGrid::new(GridSpec::cube(2, 2.0, 0.1).unwrap(), dom).unwrap();
        let sys = assemble_ou_operator(&grid, 0.7).unwrap();
        let theta = sys.thetas();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = sys.matrix.n;
        for _ in 0..100 {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            let lhs = theta[j] * sys.matrix.entry(j, i);
            let rhs = theta[i] * sys.matrix.entry(i, j);
            assert!((lhs - rhs).abs() <= 1e-14 * (lhs.abs() + rhs.abs()).max(1e-300));
        }
        // Neighbor pairs, where the entries are nonzero.
        for r in 0..n {
            for k in sys.matrix.row_ptr[r]..sys.matrix.row_ptr[r + 1] {
                let c = sys.matrix.cols[k];
                let lhs = theta[r] * sys.matrix.vals[k];
                let rhs = theta[c] * sys.matrix.entry(c, r);
                assert!((lhs - rhs).abs() <= 1e-13 * lhs.abs());
            }
        }
    }

    #[test]
    fn ou_apply_eigenrelations() {
        let grid = whole_box(1, 8.0, 0.01);
        let he3 = ScalarField::from_fn(&grid, |x| hermite_poly(3, x[0]));
        let l = discrete_ou_apply(&he3);
        for &i in grid.interior() {
            let x = grid.coord(i, 0);
            if x.abs() <= 2.0 {
                assert_abs_diff_eq!(l.values()[i], -3.0 * hermite_poly(3, x), epsilon = 1e-3);
            }
        }
        let one = ScalarField::from_fn(&grid, |_| 1.0);
        assert!(discrete_ou_apply(&one).values().iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn ou_apply_mixed_product() {
        let grid = whole_box(2, 4.0, 0.05);
        let f = ScalarField::from_fn(&grid, |x| x[0] * x[1]);
        let l = discrete_ou_apply(&f);
        for &i in grid.interior() {
            let x = grid.coords(i);
            if x[0].abs() <= 2.0 && x[1].abs() <= 2.0 {
                assert_abs_diff_eq!(l.values()[i], -2.0 * x[0] * x[1], epsilon = 5e-3);
            }
        }
    }

    #[test]
    fn gradient_exact_on_affine_and_quadratic() {
        let grid = whole_box(2, 2.0, 0.25);
        let c = ScalarField::from_fn(&grid, |_| 3.0);
        let g = discrete_gradient(&c);
        let lin = ScalarField::from_fn(&grid, |x| x[0]);
        let gl = discrete_gradient(&lin);
        let quad = ScalarField::from_fn(&grid, |x| x[0] * x[0] - 2.0 * x[0] * x[1]);
        let gq = discrete_gradient(&quad);
        for &i in grid.interior() {
            let x = grid.coords(i);
            assert_eq!(g.at(i), &[0.0, 0.0]);
            assert_abs_diff_eq!(gl.at(i)[0], 1.0, epsilon = 1e-13);
            assert_abs_diff_eq!(gl.at(i)[1], 0.0, epsilon = 1e-13);
            assert_abs_diff_eq!(gq.at(i)[0], 2.0 * x[0] - 2.0 * x[1], epsilon = 1e-12);
            assert_abs_diff_eq!(gq.at(i)[1], -2.0 * x[0], epsilon = 1e-12);
        }
    }

    #[test]
    fn gradient_is_one_sided_at_the_boundary() {
        let dom = LevelSetDomain::halfspace(1, 0, 1.0).unwrap();
        let grid = GaussianGrid::new(GridSpec::with_spacing(vec![-4.0], vec![0.0], 0.5).unwrap(), dom).unwrap();
        let u = ScalarField::from_fn(&grid, |x| -1.0 - x[0]);
        let g = discrete_gradient(&u);
        // Node -1.5 neighbors the exterior node -1.
        let i = grid.index_of(&[5]);
        assert_eq!(grid.coords(i), vec![-1.5]);
        assert_abs_diff_eq!(g.at(i)[0], -1.0, epsilon = 1e-14);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let grid = whole_box(1, 6.0, 0.1);
        let job = ResolventJob::new(1.0, ScalarField::zeros(&grid)).unwrap();
        let sol = solve_resolvent(&job, &SolverOptions::default()).unwrap();
        assert!(sol.converged);
        assert!(sol.u.values().iter().all(|v| *v == 0.0));
    }

    fn bulk_error(h: f64, k: usize, sigma: f64) -> f64 {
        let grid = whole_box(1, 8.0, h);
        let y = ScalarField::from_fn(&grid, |x| hermite_poly(k, x[0]));
        let sol = solve_resolvent(&ResolventJob::new(sigma, y).unwrap(), &SolverOptions::default())
            .unwrap()
            .require_converged()
            .unwrap();
        grid.interior()
            .iter()
            .filter(|&&i| grid.coord(i, 0).abs() <= 3.0)
            .map(|&i| {
                let x = grid.coord(i, 0);
                (sol.u.values()[i] - hermite_poly(k, x) / (1.0 + sigma * k as f64)).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn hermite_eigen_oracle() {
        let coarse = bulk_error(0.02, 2, 1.0);
        let fine = bulk_error(0.01, 2, 1.0);
        assert!(coarse <= 1e-3, "{coarse}");
        assert!(coarse / fine >= 1.8, "{coarse} {fine}");
    }

    #[test]
    fn budget_exhaustion_is_flagged() {
        let grid = whole_box(1, 8.0, 0.02);
        let y = ScalarField::from_fn(&grid, |x| hermite_poly(2, x[0]));
        let sol = solve_resolvent(
            &ResolventJob::new(1.0, y).unwrap(),
            &SolverOptions { tol: 1e-12, max_iter: Some(3) },
        )
        .unwrap();
        assert!(!sol.converged);
        assert!(sol.relative_residual < 1.0);
        assert!(sol.require_converged().is_err());
    }
}
