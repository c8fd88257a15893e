//! Tensor-product grids over a box, classified against a level-set domain,
//! and nodal fields living on them.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::LevelSetDomain;
use crate::error::{invalid, Error, Result};
use crate::gauss::{gauss_density, lp_gamma_norm_values, QuadratureRule};

/// Box bounds and node counts per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub counts: Vec<usize>,
}

impl GridSpec {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        let d = lower.len();
        if d == 0 || upper.len() != d || counts.len() != d {
            return Err(invalid("grid bounds and counts must share a nonzero dimension"));
        }
        for i in 0..d {
            if !(upper[i] > lower[i]) || !lower[i].is_finite() || !upper[i].is_finite() {
                return Err(invalid(format!("grid axis {i} has empty or infinite range")));
            }
            if counts[i] < 3 {
                return Err(invalid(format!("grid axis {i} needs at least 3 nodes")));
            }
        }
        Ok(Self { lower, upper, counts })
    }

    /// Box with the given bounds and spacing close to `h` (rounded so the
    /// bounds are nodes).
    pub fn with_spacing(lower: Vec<f64>, upper: Vec<f64>, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(invalid("grid spacing must be positive"));
        }
        let counts = lower
            .iter()
            .zip(&upper)
            .map(|(a, b)| ((b - a) / h).round() as usize + 1)
            .collect();
        Self::new(lower, upper, counts)
    }

    /// [-r, r]^dim with spacing close to `h`.
    pub fn cube(dim: usize, half_width: f64, h: f64) -> Result<Self> {
        Self::with_spacing(vec![-half_width; dim], vec![half_width; dim], h)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / (self.counts[axis] - 1) as f64
    }

    /// Largest spacing over all axes.
    pub fn max_spacing(&self) -> f64 {
        (0..self.dim()).map(|i| self.spacing(i)).fold(0.0, f64::max)
    }

    /// Same box with the spacing halved.
    pub fn refined(&self) -> Self {
        Self {
            lower: self.lower.clone(),
            upper: self.upper.clone(),
            counts: self.counts.iter().map(|m| 2 * m - 1).collect(),
        }
    }
}

/// Classification of a node against the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeClass {
    /// G < 0 and strictly inside the box: an unknown.
    Interior,
    /// G ≥ 0: pinned to 0.
    Exterior,
    /// G < 0 on a face of the box. Pinned to 0 in solves (box truncation).
    Frame,
}

/// Upper bound on the Gaussian mass beyond the box faces that are not
/// entirely exterior (one-dimensional Mills bound per face).
fn tail_bound(r: f64) -> f64 {
    if r <= 0.0 {
        return 0.5;
    }
    ((-0.5 * r * r).exp() / ((2.0 * PI).sqrt() * r)).min(0.5)
}

/// Largest tolerated Gaussian mass of O outside the box.
pub const TAIL_MASS_BUDGET: f64 = 1e-8;

/// A grid classified against a domain, with per-node Gaussian weights.
#[derive(Debug)]
pub struct GaussianGrid {
    spec: GridSpec,
    domain: LevelSetDomain,
    strides: Vec<usize>,
    len: usize,
    g_values: Vec<f64>,
    theta: Vec<f64>,
    class: Vec<NodeClass>,
    cut: Vec<bool>,
    interior: Vec<usize>,
    tail_mass: f64,
}

impl GaussianGrid {
    pub fn new(spec: GridSpec, domain: LevelSetDomain) -> Result<Arc<Self>> {
        let d = spec.dim();
        if domain.dim() != d {
            return Err(Error::DimensionMismatch { expected: domain.dim(), got: d });
        }
        let mut strides = vec![1; d];
        for i in (0..d.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * spec.counts[i + 1];
        }
        let len = spec.counts.iter().product::<usize>();
        let mut grid = Self {
            spec,
            domain,
            strides,
            len,
            g_values: Vec::with_capacity(len),
            theta: Vec::with_capacity(len),
            class: Vec::with_capacity(len),
            cut: vec![false; len],
            interior: Vec::new(),
            tail_mass: 0.0,
        };
        let mut x = vec![0.0; d];
        let mut face_interior = vec![[false; 2]; d];
        for i in 0..len {
            grid.coords_into(i, &mut x);
            let g = grid.domain.value(&x);
            let on_face = grid.face_of(i);
            let class = if !(g < 0.0) {
                NodeClass::Exterior
            } else if on_face.iter().any(|f| f.is_some()) {
                for (axis, f) in on_face.iter().enumerate() {
                    if let Some(side) = f {
                        face_interior[axis][*side] = true;
                    }
                }
                NodeClass::Frame
            } else {
                NodeClass::Interior
            };
            grid.g_values.push(g);
            grid.theta.push(gauss_density(&x));
            grid.class.push(class);
        }
        for i in 0..len {
            if grid.class[i] != NodeClass::Interior {
                continue;
            }
            grid.interior.push(i);
            grid.cut[i] = (0..d).any(|axis| {
                [-1, 1].iter().any(|&s| {
                    grid.neighbor(i, axis, s).is_some_and(|j| grid.class[j] == NodeClass::Exterior)
                })
            });
        }
        grid.tail_mass = (0..d)
            .map(|axis| {
                let lo = if face_interior[axis][0] { tail_bound(-grid.spec.lower[axis]) } else { 0.0 };
                let hi = if face_interior[axis][1] { tail_bound(grid.spec.upper[axis]) } else { 0.0 };
                lo + hi
            })
            .sum();
        Ok(Arc::new(grid))
    }

    fn face_of(&self, i: usize) -> Vec<Option<usize>> {
        (0..self.dim())
            .map(|axis| {
                let k = self.axis_index(i, axis);
                if k == 0 {
                    Some(0)
                } else if k + 1 == self.spec.counts[axis] {
                    Some(1)
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn domain(&self) -> &LevelSetDomain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.spec.spacing(axis)
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    pub fn axis_index(&self, i: usize, axis: usize) -> usize {
        (i / self.strides[axis]) % self.spec.counts[axis]
    }

    pub fn index_of(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(k, s)| k * s).sum()
    }

    pub fn coord(&self, i: usize, axis: usize) -> f64 {
        self.spec.lower[axis] + self.axis_index(i, axis) as f64 * self.spacing(axis)
    }

    pub fn coords_into(&self, i: usize, out: &mut [f64]) {
        for (axis, o) in out.iter_mut().enumerate() {
            *o = self.coord(i, axis);
        }
    }

    pub fn coords(&self, i: usize) -> Vec<f64> {
        (0..self.dim()).map(|a| self.coord(i, a)).collect()
    }

    /// Neighbor one step along `axis` in direction `step` (±1), if inside the box.
    pub fn neighbor(&self, i: usize, axis: usize, step: i32) -> Option<usize> {
        let k = self.axis_index(i, axis);
        match step {
            1 if k + 1 < self.spec.counts[axis] => Some(i + self.strides[axis]),
            -1 if k > 0 => Some(i - self.strides[axis]),
            _ => None,
        }
    }

    pub fn class(&self, i: usize) -> NodeClass {
        self.class[i]
    }

    pub fn is_interior(&self, i: usize) -> bool {
        self.class[i] == NodeClass::Interior
    }

    /// Interior node with at least one exterior neighbor.
    pub fn is_cut(&self, i: usize) -> bool {
        self.cut[i]
    }

    pub fn g_value(&self, i: usize) -> f64 {
        self.g_values[i]
    }

    pub fn theta(&self, i: usize) -> f64 {
        self.theta[i]
    }

    pub fn thetas(&self) -> &[f64] {
        &self.theta
    }

    /// Indices of interior nodes in increasing order.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn cut_count(&self) -> usize {
        self.cut.iter().filter(|c| **c).count()
    }

    /// Bound on γ(O outside the box).
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Interior nodes with weights θ·cell volume: a rule for ∫_O · dγ.
    pub fn interior_rule(&self) -> QuadratureRule {
        let vol = self.cell_volume();
        let mut nodes = Vec::with_capacity(self.interior.len() * self.dim());
        let mut weights = Vec::with_capacity(self.interior.len());
        for &i in &self.interior {
            nodes.extend(self.coords(i));
            weights.push(self.theta[i] * vol);
        }
        QuadratureRule::new(self.dim(), nodes, weights).expect("consistent shapes")
    }

    /// Lower corner multi-index and local coordinates of the cell holding x.
    fn locate(&self, x: &[f64]) -> Option<(Vec<usize>, Vec<f64>)> {
        let d = self.dim();
        let mut base = Vec::with_capacity(d);
        let mut frac = Vec::with_capacity(d);
        for axis in 0..d {
            let h = self.spacing(axis);
            let t = (x[axis] - self.spec.lower[axis]) / h;
            let m = self.spec.counts[axis];
            if !(t >= 0.0) || t > (m - 1) as f64 {
                return None;
            }
            let k = (t.floor() as usize).min(m - 2);
            base.push(k);
            frac.push(t - k as f64);
        }
        Some((base, frac))
    }

    /// Node indices of the 2^d corners of the cell holding x.
    pub fn cell_corners(&self, x: &[f64]) -> Option<Vec<usize>> {
        let (base, _) = self.locate(x)?;
        let d = self.dim();
        Some(
            (0..1usize << d)
                .map(|mask| {
                    let multi: Vec<usize> = (0..d).map(|a| base[a] + ((mask >> a) & 1)).collect();
                    self.index_of(&multi)
                })
                .collect(),
        )
    }

    /// Multilinear interpolation of nodal values; 0 outside the box.
    pub fn interpolate(&self, values: &[f64], x: &[f64]) -> f64 {
        let Some((base, frac)) = self.locate(x) else {
            return 0.0;
        };
        let d = self.dim();
        let mut acc = 0.0;
        let mut multi = vec![0; d];
        for mask in 0..1usize << d {
            let mut w = 1.0;
            for a in 0..d {
                let bit = (mask >> a) & 1;
                multi[a] = base[a] + bit;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            if w != 0.0 {
                acc += w * values[self.index_of(&multi)];
            }
        }
        acc
    }
}

/// Nodal values on a grid; exterior nodes carry exactly 0.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<GaussianGrid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Arc<GaussianGrid>) -> Self {
        Self { grid: grid.clone(), values: vec![0.0; grid.len()] }
    }

    /// Samples `f` at interior and frame nodes (the trivial extension by 0).
    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: &Arc<GaussianGrid>, f: F) -> Self {
        let mut x = vec![0.0; grid.dim()];
        let values = (0..grid.len())
            .map(|i| {
                if grid.class(i) == NodeClass::Exterior {
                    0.0
                } else {
                    grid.coords_into(i, &mut x);
                    f(&x)
                }
            })
            .collect();
        Self { grid: grid.clone(), values }
    }

    /// Wraps nodal values, zeroing exterior nodes.
    pub fn from_values(grid: &Arc<GaussianGrid>, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: values.len() });
        }
        for (i, v) in values.iter_mut().enumerate() {
            if grid.class(i) == NodeClass::Exterior {
                *v = 0.0;
            }
        }
        Ok(Self { grid: grid.clone(), values })
    }

    pub fn grid(&self) -> &Arc<GaussianGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn interpolate(&self, x: &[f64]) -> f64 {
        self.grid.interpolate(&self.values, x)
    }

    /// L^p(O, γ) norm over interior nodes.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        let rule = self.grid.interior_rule();
        let vals: Vec<f64> = self.grid.interior().iter().map(|&i| self.values[i]).collect();
        lp_gamma_norm_values(&vals, p, &rule)
    }
}

/// A vector per node; only interior nodes carry meaningful values.
#[derive(Debug, Clone)]
pub struct VectorField {
    grid: Arc<GaussianGrid>,
    data: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: &Arc<GaussianGrid>) -> Self {
        Self { grid: grid.clone(), data: vec![0.0; grid.len() * grid.dim()] }
    }

    pub fn grid(&self) -> &Arc<GaussianGrid> {
        &self.grid
    }

    pub fn at(&self, i: usize) -> &[f64] {
        let d = self.grid.dim();
        &self.data[i * d..(i + 1) * d]
    }

    pub fn at_mut(&mut self, i: usize) -> &mut [f64] {
        let d = self.grid.dim();
        &mut self.data[i * d..(i + 1) * d]
    }

    /// Pointwise Euclidean norms as a scalar field.
    pub fn norms(&self) -> ScalarField {
        let values = (0..self.grid.len())
            .map(|i| self.at(i).iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        ScalarField::from_values(&self.grid, values).expect("grid-sized")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn classification_follows_sign_of_g() {
        let dom = LevelSetDomain::halfspace(2, 0, 1.0).unwrap();
        let spec = GridSpec::cube(2, 3.0, 0.5).unwrap();
        let grid = GaussianGrid::new(spec, dom.clone()).unwrap();
        for i in 0..grid.len() {
            let x = grid.coords(i);
            let inside = dom.value(&x) < 0.0;
            assert_eq!(grid.class(i) == NodeClass::Exterior, !inside);
        }
        // x1 = -1 lies on the grid and is exterior (G = 0).
        let i = grid.index_of(&[4, 6]);
        assert_eq!(grid.coords(i), vec![-1.0, 0.0]);
        assert_eq!(grid.class(i), NodeClass::Exterior);
        assert!(grid.is_cut(grid.index_of(&[3, 6])));
    }

    #[test]
    fn tail_mass_ignores_exterior_faces() {
        let dom = LevelSetDomain::halfspace(1, 0, 1.0).unwrap();
        let grid = GaussianGrid::new(GridSpec::with_spacing(vec![-8.0], vec![0.0], 0.1).unwrap(), dom).unwrap();
        assert!(grid.tail_mass() < 1e-14);
        let whole = LevelSetDomain::whole_space(1).unwrap();
        let grid = GaussianGrid::new(GridSpec::cube(1, 3.0, 0.1).unwrap(), whole).unwrap();
        assert!(grid.tail_mass() > 1e-3);
    }

    #[test]
    fn interpolation_is_exact_for_multilinear() {
        let whole = LevelSetDomain::whole_space(2).unwrap();
        let grid = GaussianGrid::new(GridSpec::cube(2, 2.0, 0.25).unwrap(), whole).unwrap();
        let f = ScalarField::from_fn(&grid, |x| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1]);
        let x = [0.37, -1.11];
        assert_abs_diff_eq!(f.interpolate(&x), 1.0 + 0.74 + 1.11 - 0.5 * 0.37 * 1.11, epsilon = 1e-13);
        assert_eq!(f.interpolate(&[5.0, 0.0]), 0.0);
    }

    #[test]
    fn lp_norm_of_constant_is_mass_root() {
        let whole = LevelSetDomain::whole_space(1).unwrap();
        let grid = GaussianGrid::new(GridSpec::cube(1, 8.0, 0.01).unwrap(), whole).unwrap();
        let one = ScalarField::from_fn(&grid, |_| 1.0);
        assert_abs_diff_eq!(one.lp_norm(2.0).unwrap(), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn refinement_halves_spacing() {
        let spec = GridSpec::cube(2, 4.0, 0.2).unwrap();
        let fine = spec.refined();
        assert_abs_diff_eq!(fine.spacing(0), 0.1, epsilon = 1e-15);
    }
}
