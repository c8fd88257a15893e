//! Standard Gaussian measure on R^d: density, quadrature, weighted norms,
//! Hermite reference polynomials and seeded sampling.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::hermite::GaussHermite;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::rng::stream_rng;

/// The standard Gaussian measure γ^d.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GaussianMeasure {
    dim: usize,
}

impl GaussianMeasure {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("Gaussian measure needs dim >= 1"));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// θ_d(x) = (2π)^{-d/2} exp(-|x|²/2).
    pub fn density(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        gauss_density(x)
    }
}

/// Standard Gaussian density in dimension `x.len()`.
pub fn gauss_density(x: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    (2.0 * PI).powf(-(x.len() as f64) / 2.0) * (-0.5 * r2).exp()
}

/// Probabilists' Hermite polynomial He_k(x), via He_{k+1} = x He_k - k He_{k-1}.
///
/// L He_k = -k He_k for the Ornstein-Uhlenbeck operator Lf = f'' - x f', so
/// these are the reference eigenfunctions for the solver tests.
pub fn hermite_poly(k: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for j in 0..k {
        let next = x * cur - j as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// A quadrature rule: nodes in R^d with nonnegative weights.
///
/// Weights are absolute Gaussian masses, so `∫ f dγ ≈ Σ w_i f(x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Builds a rule from flattened nodes (`dim` coordinates per node).
    pub fn new(dim: usize, nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 || nodes.len() != dim * weights.len() {
            return Err(invalid("quadrature nodes/weights shape mismatch"));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(invalid("quadrature weights must be nonnegative"));
        }
        Ok(Self { dim, nodes, weights })
    }

    /// One-dimensional Gauss-Hermite rule for γ¹ with `n` nodes.
    pub fn gauss_hermite_1d(n: usize) -> Result<Self> {
        let n = NonZeroUsize::new(n).ok_or_else(|| invalid("Gauss-Hermite needs n >= 1"))?;
        // gauss-quad integrates against exp(-x²); rescale to the standard normal.
        let rule = GaussHermite::new(n);
        let scale = 1.0 / PI.sqrt();
        let (nodes, weights) = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (x * 2f64.sqrt(), w * scale))
            .unzip();
        Self::new(1, nodes, weights)
    }

    /// Tensor Gauss-Hermite rule for γ^d with `n` nodes per axis.
    pub fn gauss_hermite(dim: usize, n: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("Gauss-Hermite needs dim >= 1"));
        }
        let base = Self::gauss_hermite_1d(n)?;
        let total = n.checked_pow(dim as u32).ok_or_else(|| invalid("tensor rule too large"))?;
        let mut nodes = Vec::with_capacity(total * dim);
        let mut weights = Vec::with_capacity(total);
        let mut idx = vec![0usize; dim];
        for _ in 0..total {
            let mut w = 1.0;
            for &i in &idx {
                nodes.push(base.nodes[i]);
                w *= base.weights[i];
            }
            weights.push(w);
            for slot in idx.iter_mut().rev() {
                *slot += 1;
                if *slot < n {
                    break;
                }
                *slot = 0;
            }
        }
        Self::new(dim, nodes, weights)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Total Gaussian mass carried by the rule.
    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.nodes.chunks_exact(self.dim).zip(self.weights.iter().copied())
    }

    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        self.iter().map(|(x, w)| w * f(x)).sum()
    }
}

/// (∫ |f|^p dγ)^{1/p} over the region covered by `rule`.
pub fn lp_gamma_norm<F: Fn(&[f64]) -> f64>(f: F, p: f64, rule: &QuadratureRule) -> Result<f64> {
    let values: Vec<f64> = rule.iter().map(|(x, _)| f(x)).collect();
    lp_gamma_norm_values(&values, p, rule)
}

/// Same as [`lp_gamma_norm`] with the integrand already evaluated at the nodes.
pub fn lp_gamma_norm_values(values: &[f64], p: f64, rule: &QuadratureRule) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(invalid(format!("L^p norm needs finite p >= 1, got {p}")));
    }
    if values.len() != rule.len() {
        return Err(Error::DimensionMismatch { expected: rule.len(), got: values.len() });
    }
    if rule.is_empty() || rule.mass() <= 0.0 {
        return Err(Error::RegionNoMass);
    }
    let sum: f64 = values
        .iter()
        .zip(rule.weights())
        .map(|(v, w)| w * v.abs().powf(p))
        .sum();
    Ok(sum.powf(1.0 / p))
}

/// `count` i.i.d. standard normal vectors in R^dim, reproducible from `seed`.
///
/// Draws come from stream 0 of the job generator in row-major order.
pub fn sample_gaussian(dim: usize, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if dim == 0 || count == 0 {
        return Err(invalid("sample_gaussian needs dim >= 1 and count >= 1"));
    }
    let mut rng = stream_rng(seed, 0);
    Ok((0..count)
        .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn double_factorial_odd(k: u32) -> f64 {
        (1..=k).map(|j| (2 * j - 1) as f64).product()
    }

    #[test]
    fn density_values() {
        assert_abs_diff_eq!(gauss_density(&[0.0]), 0.398_942_280_401_432_7, epsilon = 1e-15);
        assert_abs_diff_eq!(gauss_density(&[0.0, 0.0]), 1.0 / (2.0 * PI), epsilon = 1e-15);
        // e^{-1}/(2π), independently evaluated.
        assert_abs_diff_eq!(gauss_density(&[1.0, 1.0]), 0.058_549_831_524_319_17, epsilon = 1e-15);
    }

    #[test]
    fn density_integrates_to_one() {
        for d in 1..=3 {
            let rule = QuadratureRule::gauss_hermite(d, 40).unwrap();
            assert_abs_diff_eq!(rule.mass(), 1.0, epsilon = 1e-10);
        }
        // Independent route: trapezoid of θ_1 on [-12, 12].
        let h = 1e-3;
        let trap: f64 = (0..=24_000).map(|i| gauss_density(&[-12.0 + i as f64 * h]) * h).sum();
        assert_abs_diff_eq!(trap, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn gaussian_moments() {
        let rule = QuadratureRule::gauss_hermite_1d(40).unwrap();
        for k in 1..=4u32 {
            let m = rule.integrate(|x| x[0].powi(2 * k as i32));
            assert_abs_diff_eq!(m, double_factorial_odd(k), epsilon = 1e-8);
        }
    }

    #[test]
    fn hermite_values_and_orthogonality() {
        assert_eq!(hermite_poly(0, 3.7), 1.0);
        assert_eq!(hermite_poly(2, 2.0), 3.0);
        assert_eq!(hermite_poly(4, 1.0), -2.0);
        let rule = QuadratureRule::gauss_hermite_1d(40).unwrap();
        for j in 0..=6 {
            for k in 0..=6 {
                let ip = rule.integrate(|x| hermite_poly(j, x[0]) * hermite_poly(k, x[0]));
                let expected = if j == k { (1..=k).map(|i| i as f64).product() } else { 0.0 };
                assert_abs_diff_eq!(ip, expected, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn lp_norm_examples() {
        let rule = QuadratureRule::gauss_hermite_1d(60).unwrap();
        assert_abs_diff_eq!(lp_gamma_norm(|_| 1.0, 1.0, &rule).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(lp_gamma_norm(|x| x[0], 2.0, &rule).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            lp_gamma_norm(|x| x[0] * x[0], 2.0, &rule).unwrap(),
            3f64.sqrt(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn lp_norm_rejects_empty_region() {
        let empty = QuadratureRule::new(2, vec![], vec![]).unwrap();
        assert!(matches!(lp_gamma_norm(|_| 1.0, 2.0, &empty), Err(Error::RegionNoMass)));
        let zero = QuadratureRule::new(1, vec![0.0], vec![0.0]).unwrap();
        assert!(matches!(lp_gamma_norm(|_| 1.0, 2.0, &zero), Err(Error::RegionNoMass)));
        let rule = QuadratureRule::gauss_hermite_1d(4).unwrap();
        assert!(lp_gamma_norm(|_| 1.0, 0.5, &rule).is_err());
    }

    #[test]
    fn sampling_statistics_and_determinism() {
        let n = 100_000;
        let xs = sample_gaussian(1, n, 2024).unwrap();
        let mean = xs.iter().map(|x| x[0]).sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x[0] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() <= 5.0 / (n as f64).sqrt());
        assert!((0.98..=1.02).contains(&var), "variance {var}");

        let a = sample_gaussian(2, 1, 9).unwrap();
        let b = sample_gaussian(2, 1, 9).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b[0].iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
}
