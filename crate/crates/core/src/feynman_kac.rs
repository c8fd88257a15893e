//! Monte Carlo oracle for the Dirichlet resolvent through the killed
//! Ornstein-Uhlenbeck diffusion dX = -X dt + √2 dW.
//!
//! J_σ f(x) = σ⁻¹ E[∫₀^τ e^{-t/σ} f(X_t) dt], with τ the exit time of O.
//! Paths use Euler-Maruyama and are killed at the first step with G ≥ 0.
//! By default a path that stays inside at both ends of a step is also killed
//! with the Brownian-bridge crossing probability exp(-d₀d₁/dt), where d is the
//! first-order distance -G/|∇G| to the boundary; this removes the O(√dt)
//! bias of monitoring the boundary only at grid times.
//! The time integral over each step uses the exact exponential weight
//! ∫_{t_k}^{t_k+dt} e^{-t/σ} dt, so f ≡ 1 without killing is reproduced up
//! to the time-cap truncation e^{-T_max/σ}.

use rand::RngExt;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::domain::LevelSetDomain;
use crate::error::{invalid, Error, Result};
use crate::rng::stream_rng;

/// Paths per independently seeded work item.
pub const CHUNK_PATHS: usize = 1024;

/// Largest tolerated truncation weight e^{-T_max/σ}.
pub const TIME_CAP_BUDGET: f64 = 1e-6;

/// Crossing probabilities below e^{-40} are treated as zero.
const NEGLIGIBLE_EXPONENT: f64 = 40.0;

/// Integrand of the stochastic representation.
pub type Integrand<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

/// How boundary crossings between grid times are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Killing {
    /// Kill only when a grid-time position has G ≥ 0.
    GridTimes,
    /// Also kill with the Brownian-bridge crossing probability.
    #[default]
    BridgeCorrected,
}

/// Settings of the killed-path estimator.
#[derive(Debug, Clone)]
pub struct KilledPathEstimator {
    pub domain: LevelSetDomain,
    pub sigma: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub t_max: f64,
    pub killing: Killing,
}

impl KilledPathEstimator {
    /// Estimator with T_max = σ·ln(10⁶).
    pub fn new(domain: LevelSetDomain, sigma: f64, dt: f64, n_paths: usize, seed: u64) -> Result<Self> {
        let t_max = sigma * (1.0 / TIME_CAP_BUDGET).ln();
        Self::with_time_cap(domain, sigma, dt, n_paths, seed, t_max)
    }

    pub fn with_time_cap(
        domain: LevelSetDomain,
        sigma: f64,
        dt: f64,
        n_paths: usize,
        seed: u64,
        t_max: f64,
    ) -> Result<Self> {
        if !(sigma > 0.0) || !(dt > 0.0) || n_paths < 2 {
            return Err(invalid("estimator needs sigma > 0, dt > 0 and at least 2 paths"));
        }
        if (-t_max / sigma).exp() > TIME_CAP_BUDGET * (1.0 + 1e-12) {
            return Err(invalid(format!("time cap {t_max} leaves truncation weight above {TIME_CAP_BUDGET}")));
        }
        Ok(Self { domain, sigma, dt, n_paths, seed, t_max, killing: Killing::default() })
    }

    pub fn with_killing(mut self, killing: Killing) -> Self {
        self.killing = killing;
        self
    }

    fn steps(&self) -> usize {
        (self.t_max / self.dt).ceil() as usize
    }

    /// Weight of step k is decay^k·(1 - e^{-dt/σ}) after dividing by σ.
    fn step_weights(&self) -> (f64, f64) {
        let decay = (-self.dt / self.sigma).exp();
        (decay, 1.0 - decay)
    }

    fn require_interior(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.domain.dim() {
            return Err(Error::DimensionMismatch { expected: self.domain.dim(), got: x.len() });
        }
        let g = self.domain.value(x);
        if !(g < 0.0) {
            return Err(Error::NotInterior { x: x.to_vec(), value: g });
        }
        Ok(())
    }

    /// First-order distance to the boundary from an interior point.
    fn distance(&self, x: &[f64], g: f64) -> f64 {
        let n = self.domain.gradient_norm(x);
        if n > 0.0 {
            -g / n
        } else {
            f64::INFINITY
        }
    }

    /// Advances the survival state of one path after a step from a point at
    /// distance `d_prev` to `pos`. Returns the new distance, or `None` once
    /// the path is killed. `u` draws the uniform for the bridge test, and is
    /// only called when the crossing probability is not negligible.
    fn survive<U: FnMut() -> f64>(&self, pos: &[f64], d_prev: f64, mut u: U) -> Option<f64> {
        let g = self.domain.value(pos);
        if !(g < 0.0) {
            return None;
        }
        if self.killing == Killing::GridTimes {
            return Some(f64::INFINITY);
        }
        let d = self.distance(pos, g);
        let exponent = d_prev * d / self.dt;
        if exponent < NEGLIGIBLE_EXPONENT && u() < (-exponent).exp() {
            None
        } else {
            Some(d)
        }
    }

    fn start_distance(&self, x: &[f64]) -> f64 {
        match self.killing {
            Killing::GridTimes => f64::INFINITY,
            Killing::BridgeCorrected => self.distance(x, self.domain.value(x)),
        }
    }

    /// Runs `per_chunk` on every chunk and reduces (sum, sum of squares) in
    /// chunk order, independent of the worker count.
    fn reduce<F>(&self, per_chunk: F) -> (f64, f64)
    where
        F: Fn(u64, usize) -> (f64, f64) + Sync,
    {
        let n_chunks = self.n_paths.div_ceil(CHUNK_PATHS);
        let parts: Vec<(f64, f64)> = (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let count = CHUNK_PATHS.min(self.n_paths - c * CHUNK_PATHS);
                per_chunk(c as u64, count)
            })
            .collect();
        parts.into_iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1))
    }

    fn summarize(&self, sum: f64, sum_sq: f64) -> (f64, f64) {
        let n = self.n_paths as f64;
        let mean = sum / n;
        let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        (mean, (var / n).sqrt())
    }
}

/// A Monte Carlo value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub se: f64,
}

/// Record written per probe point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRecord {
    pub x: Vec<f64>,
    pub estimate: f64,
    pub se: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub dt: f64,
    pub seed: u64,
}

impl ProbeRecord {
    pub fn new(est: &KilledPathEstimator, x: &[f64], value: McEstimate) -> Self {
        Self { x: x.to_vec(), estimate: value.estimate, se: value.se, n: est.n_paths, dt: est.dt, seed: est.seed }
    }
}

/// Estimate of J_σ f(x) with its standard error.
pub fn mc_resolvent(est: &KilledPathEstimator, f: Integrand<'_>, x: &[f64]) -> Result<McEstimate> {
    est.require_interior(x)?;
    let d = x.len();
    let steps = est.steps();
    let (decay, w0) = est.step_weights();
    let drift = 1.0 - est.dt;
    let diffusion = (2.0 * est.dt).sqrt();
    let (sum, sum_sq) = est.reduce(|chunk, count| {
        let mut rng = stream_rng(est.seed, chunk);
        let mut pos = vec![0.0; d];
        let (mut s, mut s2) = (0.0, 0.0);
        let d_start = est.start_distance(x);
        for _ in 0..count {
            pos.copy_from_slice(x);
            let mut dist = d_start;
            let mut weight = w0;
            let mut acc = 0.0;
            for _ in 0..steps {
                acc += weight * f(&pos);
                weight *= decay;
                for p in pos.iter_mut() {
                    let xi: f64 = StandardNormal.sample(&mut rng);
                    *p = *p * drift + diffusion * xi;
                }
                match est.survive(&pos, dist, || rng.random()) {
                    Some(d) => dist = d,
                    None => break,
                }
            }
            s += acc;
            s2 += acc * acc;
        }
        (s, s2)
    });
    let (estimate, se) = est.summarize(sum, sum_sq);
    Ok(McEstimate { estimate, se })
}

/// Central differences of J_σ f at x along each axis, using common random
/// numbers for the paired starting points x ± h e_i.
pub fn mc_gradient_probe(
    est: &KilledPathEstimator,
    f: Integrand<'_>,
    x: &[f64],
    h_fd: f64,
) -> Result<Vec<McEstimate>> {
    if !(h_fd > 0.0) {
        return Err(invalid("finite-difference step must be positive"));
    }
    let d = x.len();
    let mut out = Vec::with_capacity(d);
    let steps = est.steps();
    let (decay, w0) = est.step_weights();
    let drift = 1.0 - est.dt;
    let diffusion = (2.0 * est.dt).sqrt();
    for axis in 0..d {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[axis] += h_fd;
        xm[axis] -= h_fd;
        est.require_interior(&xp)?;
        est.require_interior(&xm)?;
        let (da0, db0) = (est.start_distance(&xp), est.start_distance(&xm));
        let (sum, sum_sq) = est.reduce(|chunk, count| {
            let mut rng = stream_rng(est.seed, chunk);
            let mut a = vec![0.0; d];
            let mut b = vec![0.0; d];
            let mut noise = vec![0.0; d];
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                a.copy_from_slice(&xp);
                b.copy_from_slice(&xm);
                let (mut alive_a, mut alive_b) = (Some(da0), Some(db0));
                let mut weight = w0;
                let mut acc = 0.0;
                for _ in 0..steps {
                    if alive_a.is_some() {
                        acc += weight * f(&a);
                    }
                    if alive_b.is_some() {
                        acc -= weight * f(&b);
                    }
                    weight *= decay;
                    for n in noise.iter_mut() {
                        *n = StandardNormal.sample(&mut rng);
                    }
                    for k in 0..d {
                        a[k] = a[k] * drift + diffusion * noise[k];
                        b[k] = b[k] * drift + diffusion * noise[k];
                    }
                    // One uniform per step, shared by the pair.
                    let mut shared = None;
                    let mut draw = || *shared.get_or_insert_with(|| rng.random::<f64>());
                    alive_a = alive_a.and_then(|d| est.survive(&a, d, &mut draw));
                    alive_b = alive_b.and_then(|d| est.survive(&b, d, &mut draw));
                    if alive_a.is_none() && alive_b.is_none() {
                        break;
                    }
                }
                let diff = acc / (2.0 * h_fd);
                s += diff;
                s2 += diff * diff;
            }
            (s, s2)
        });
        let (estimate, se) = est.summarize(sum, sum_sq);
        out.push(McEstimate { estimate, se });
    }
    Ok(out)
}
