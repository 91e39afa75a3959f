//! Quadrature rules and compensated summation.
//!
//! Node/weight generation is delegated to `gauss-quad`; this module adapts
//! the rules to the measures used throughout the crate (standard normal,
//! unit interval, ordered simplices of `[0,1]^k`) and evaluates Gaussian
//! expectations under arbitrary positive semidefinite covariances.

use std::num::NonZeroUsize;

use gauss_quad::hermite::GaussHermite;
use gauss_quad::legendre::GaussLegendre;
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{ensure, Result};

/// Kahan–Babuška compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated accumulator for complex values.
#[derive(Debug, Clone, Copy, Default)]
pub struct ComplexKahanSum {
    re: KahanSum,
    im: KahanSum,
}

impl ComplexKahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

/// Gauss–Hermite rule rescaled to the standard normal law:
/// `E[f(Z)] ≈ Σ_i weights[i] f(nodes[i])`, `Z ~ N(0, 1)`.
#[derive(Debug, Clone)]
pub struct NormalRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl NormalRule {
    pub fn new(n: usize) -> Result<Self> {
        let deg = NonZeroUsize::new(n)
            .ok_or_else(|| crate::MlveError::Argument("Gauss-Hermite rule needs n >= 1".into()))?;
        let rule = GaussHermite::new(deg);
        let sqrt2 = std::f64::consts::SQRT_2;
        let norm = std::f64::consts::PI.sqrt();
        let (nodes, weights) = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (sqrt2 * x, w / norm))
            .unzip();
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// One-dimensional expectation, summed in node order.
    pub fn expect(&self, mut f: impl FnMut(f64) -> Complex64) -> Complex64 {
        let mut acc = ComplexKahanSum::new();
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc.add(f(x) * w);
        }
        acc.value()
    }
}

/// Gauss–Legendre rule on `[0, 1]` (weights sum to one).
#[derive(Debug, Clone)]
pub struct UnitLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl UnitLegendre {
    pub fn new(n: usize) -> Result<Self> {
        let deg = NonZeroUsize::new(n)
            .ok_or_else(|| crate::MlveError::Argument("Gauss-Legendre rule needs n >= 1".into()))?;
        let rule = GaussLegendre::new(deg);
        let (nodes, weights) = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
            .unzip();
        Ok(Self { nodes, weights })
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        let mut acc = KahanSum::new();
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc.add(w * f(x));
        }
        acc.value()
    }
}

/// Cubature over `[0,1]^k` that splits the cube into the `k!` cells
/// `w_{π(1)} ≥ w_{π(2)} ≥ … ≥ w_{π(k)}`.
///
/// Inside a cell the parametrisation `w_{π(m)} = t_1 ⋯ t_m`, `t ∈ [0,1]^k`,
/// has Jacobian `∏_m t_m^{k-m}`. Functions built from `min` of the
/// coordinates are smooth in `t` on each cell, so a tensor Gauss–Legendre
/// rule in `t` converges spectrally.
#[derive(Debug, Clone)]
pub struct OrderedCubature {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl OrderedCubature {
    pub fn new(dim: usize, order: usize) -> Result<Self> {
        ensure!(dim <= 7, Budget, "ordered cubature limited to 7 dimensions, got {dim}");
        if dim == 0 {
            return Ok(Self { dim, points: Vec::new(), weights: vec![1.0] });
        }
        let rule = UnitLegendre::new(order)?;
        let q = rule.len_nodes();
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let perms = permutations(dim);
        let mut idx = vec![0usize; dim];
        let mut w = vec![0.0; dim];
        for perm in &perms {
            idx.iter_mut().for_each(|i| *i = 0);
            loop {
                let mut prod = 1.0;
                let mut weight = 1.0;
                for m in 0..dim {
                    let t = rule.nodes[idx[m]];
                    prod *= t;
                    w[perm[m]] = prod;
                    weight *= rule.weights[idx[m]] * t.powi((dim - 1 - m) as i32);
                }
                points.extend_from_slice(&w);
                weights.push(weight);
                if !advance_odometer(&mut idx, q) {
                    break;
                }
            }
        }
        Ok(Self { dim, points, weights })
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

    /// Iterates `(w, weight)` pairs; for `dim == 0` yields one empty point.
    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        (0..self.weights.len()).map(move |i| {
            (&self.points[i * self.dim..(i + 1) * self.dim], self.weights[i])
        })
    }

    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        let mut acc = KahanSum::new();
        for (w, weight) in self.iter() {
            acc.add(weight * f(w));
        }
        acc.value()
    }

    pub fn integrate_complex(&self, mut f: impl FnMut(&[f64]) -> Complex64) -> Complex64 {
        let mut acc = ComplexKahanSum::new();
        for (w, weight) in self.iter() {
            acc.add(f(w) * weight);
        }
        acc.value()
    }
}

impl UnitLegendre {
    fn len_nodes(&self) -> usize {
        self.nodes.len()
    }
}

/// Steps a mixed-radix counter with every digit in `0..base`; returns
/// `false` once it wraps back to all zeros.
pub(crate) fn advance_odometer(idx: &mut [usize], base: usize) -> bool {
    for d in (0..idx.len()).rev() {
        idx[d] += 1;
        if idx[d] < base {
            return true;
        }
        idx[d] = 0;
    }
    false
}

/// All permutations of `0..k` in lexicographic order.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let Some(i) = (1..k).rev().find(|&i| cur[i - 1] < cur[i]) else {
            break;
        };
        let j = (i..k).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
    out
}

/// Tensor-product grid for the standard normal law in `dim` dimensions,
/// with points whose product weight falls below `prune × max weight`
/// dropped.
#[derive(Debug, Clone)]
pub struct NormalGrid {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl NormalGrid {
    pub fn new(rule: &NormalRule, dim: usize, prune: f64) -> Self {
        if dim == 0 {
            return Self { dim, points: Vec::new(), weights: vec![1.0] };
        }
        let wmax = rule.weights.iter().cloned().fold(0.0, f64::max);
        let threshold = prune * wmax.powi(dim as i32);
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut coords = vec![0.0; dim];
        fn rec(
            rule: &NormalRule,
            level: usize,
            acc: f64,
            wmax: f64,
            threshold: f64,
            coords: &mut Vec<f64>,
            points: &mut Vec<f64>,
            weights: &mut Vec<f64>,
        ) {
            let dim = coords.len();
            let remaining = (dim - level - 1) as i32;
            for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
                let a = acc * w;
                if a * wmax.powi(remaining) < threshold {
                    continue;
                }
                coords[level] = x;
                if level + 1 == dim {
                    points.extend_from_slice(coords);
                    weights.push(a);
                } else {
                    rec(rule, level + 1, a, wmax, threshold, coords, points, weights);
                }
            }
        }
        rec(rule, 0, 1.0, wmax, threshold, &mut coords, &mut points, &mut weights);
        Self { dim, points, weights }
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
}

/// Factor `A` with `A Aᵀ = cov`, dropping eigen-directions whose eigenvalue
/// is below `cutoff`. The result is `n × r`, `r` the retained rank.
pub fn covariance_factor(cov: &DMatrix<f64>, cutoff: f64) -> Result<DMatrix<f64>> {
    let n = cov.nrows();
    ensure!(cov.ncols() == n, Argument, "covariance must be square");
    let eig = SymmetricEigen::new(cov.clone());
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    ensure!(
        n == 0 || min >= -1e-10,
        Internal,
        "covariance is not positive semidefinite (min eigenvalue {min:e})"
    );
    let keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > cutoff).collect();
    let mut a = DMatrix::zeros(n, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        let s = eig.eigenvalues[i].sqrt();
        for r in 0..n {
            a[(r, c)] = eig.eigenvectors[(r, i)] * s;
        }
    }
    Ok(a)
}

/// `E[f(σ)]` for `σ ~ N(0, cov)`, evaluated as `σ = A z` over a pruned tensor
/// Gauss–Hermite grid in the nondegenerate subspace.
///
/// The grid is split into fixed chunks whose partial sums are combined in
/// order, so the result does not depend on the number of worker threads.
pub fn gaussian_expectation<F>(
    cov: &DMatrix<f64>,
    rule: &NormalRule,
    prune: f64,
    cutoff: f64,
    f: F,
) -> Result<Complex64>
where
    F: Fn(&[f64]) -> Complex64 + Sync,
{
    let factor = covariance_factor(cov, cutoff)?;
    let grid = NormalGrid::new(rule, factor.ncols(), prune);
    Ok(expect_on_grid(&factor, &grid, f))
}

/// Same as [`gaussian_expectation`] with a precomputed factor and grid.
pub fn expect_on_grid<F>(factor: &DMatrix<f64>, grid: &NormalGrid, f: F) -> Complex64
where
    F: Fn(&[f64]) -> Complex64 + Sync,
{
    const CHUNK: usize = 4096;
    let n = factor.nrows();
    let r = factor.ncols();
    debug_assert_eq!(r, grid.dim);
    let npts = grid.len();
    let chunks: Vec<Complex64> = (0..npts.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut sigma = vec![0.0; n];
            let mut acc = ComplexKahanSum::new();
            for i in c * CHUNK..((c + 1) * CHUNK).min(npts) {
                let z = &grid.points[i * r..(i + 1) * r];
                for (row, s) in sigma.iter_mut().enumerate() {
                    let mut v = 0.0;
                    for (k, &zk) in z.iter().enumerate() {
                        v += factor[(row, k)] * zk;
                    }
                    *s = v;
                }
                acc.add(f(&sigma) * grid.weights[i]);
            }
            acc.value()
        })
        .collect();
    let mut total = ComplexKahanSum::new();
    for c in chunks {
        total.add(c);
    }
    total.value()
}
