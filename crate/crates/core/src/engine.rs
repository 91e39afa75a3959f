//! Order-by-order evaluation of `log Z` as a sum over two-level jungles.
//!
//! ```text
//! log Z = Σ_n 1/n! Σ_{spanning jungles J} Σ_{slices j}
//!         ∏_{blocks B} [∫ dw_B E_{X_B(w)} ∏_{a∈B} ∂^{d_a} W_{j_a}(σ_a)]
//!         × ∫ dw_F (fermionic factor)
//! ```
//!
//! `d_a` is the Bosonic degree of `a`, `X_B(w)` the path-minimum covariance
//! of the Bosonic tree of `B`, and the fermionic factor is the signed-minor
//! sum of [`crate::grassmann::fermionic_factor`]. Bosonic and Fermionic
//! weakening parameters are disjoint, so each `w` integral factorises.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::{Mutex, OnceLock};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{enumerate_jungles, Edge, Forest, Jungle};
use crate::error::{ensure, Result};
use crate::grassmann::{fermionic_factor, violates_hardcore, violates_slice_conservation, FermionicFactorInput};
use crate::interpolation::{InterpolationPoint, PathTable};
use crate::model::{ModelParams, SliceKernel, MAX_KERNEL_ORDER};
use crate::quadrature::{advance_odometer, covariance_factor, expect_on_grid, NormalGrid, NormalRule, OrderedCubature};

/// Quadrature budgets for term evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Gauss–Hermite nodes per dimension for blocks of up to three vertices.
    pub hermite_nodes: usize,
    /// Gauss–Hermite nodes per dimension for four-vertex blocks.
    pub hermite_nodes_large_block: usize,
    /// Gauss–Legendre nodes per Bosonic edge on each ordering cell.
    pub legendre_nodes: usize,
    /// Tensor-grid points with relative weight below this are dropped.
    pub hermite_prune: f64,
    /// Covariance eigenvalues below this are treated as zero.
    pub eigen_cutoff: f64,
    /// Largest order the engine accepts.
    pub max_order: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            hermite_nodes: 64,
            hermite_nodes_large_block: 32,
            legendre_nodes: 12,
            hermite_prune: 1e-18,
            eigen_cutoff: 1e-12,
            max_order: 4,
        }
    }
}

impl EngineConfig {
    /// Coarser budgets for integrands that are close to low-degree
    /// polynomials (large slices, where `W_j` is tiny and smooth).
    pub fn coarse() -> Self {
        Self { hermite_nodes: 24, hermite_nodes_large_block: 16, legendre_nodes: 6, ..Self::default() }
    }
}

/// Largest Bosonic block the engine integrates.
pub const MAX_BLOCK_SIZE: usize = 4;

/// Canonical description of a Bosonic block: local vertices ordered by
/// slice, with the tree edges expressed in that order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct BlockKey {
    slices: Vec<u32>,
    edges: Vec<Edge>,
}

impl BlockKey {
    /// `None` when two block vertices share a slice (the term vanishes).
    fn new(block: &[usize], bosonic: &Forest, slices: &[u32]) -> Option<Self> {
        let mut order: Vec<usize> = block.to_vec();
        order.sort_by_key(|&v| slices[v]);
        if order.windows(2).any(|w| slices[w[0]] == slices[w[1]]) {
            return None;
        }
        let local: HashMap<usize, usize> = order.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut edges: Vec<Edge> = bosonic
            .edges()
            .iter()
            .filter(|(a, _)| local.contains_key(a))
            .map(|&(a, b)| {
                let (x, y) = (local[&a], local[&b]);
                (x.min(y), x.max(y))
            })
            .collect();
        edges.sort_unstable();
        Some(Self { slices: order.iter().map(|&v| slices[v]).collect(), edges })
    }
}

/// One evaluated term of the jungle sum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermRecord {
    pub order: usize,
    /// Position of the jungle in enumeration order.
    pub jungle_index: usize,
    pub bosonic: Vec<Edge>,
    pub fermionic: Vec<Edge>,
    pub slices: Vec<u32>,
    pub value: Complex64,
}

/// Partial sums of the expansion, optionally compared with a reference.
#[derive(Debug, Clone, PartialEq)]
pub struct Truncation {
    /// `orders[k]` is the contribution of order `k + 1`.
    pub orders: Vec<Complex64>,
    /// `partial_sums[k] = Σ_{n ≤ k+1} orders`.
    pub partial_sums: Vec<Complex64>,
    /// `|S_n - reference|`, when a reference was supplied.
    pub distances: Option<Vec<f64>>,
}

impl Truncation {
    pub fn total(&self) -> Complex64 {
        self.partial_sums.last().copied().unwrap_or_default()
    }
}

/// Every map `0..n → [j_min, j_max]`, in odometer order.
pub fn slice_assignments(params: &ModelParams, n: usize) -> Vec<Vec<u32>> {
    let width = params.num_slices();
    let mut idx = vec![0usize; n];
    let mut out = Vec::new();
    loop {
        out.push(idx.iter().map(|&i| params.j_min + i as u32).collect());
        if !advance_odometer(&mut idx, width) {
            break;
        }
    }
    out
}

/// Evaluator for jungle terms at fixed model parameters.
pub struct Engine {
    params: ModelParams,
    config: EngineConfig,
    kernels: BTreeMap<u32, SliceKernel>,
    rules: [NormalRule; 2],
    /// Pruned grids indexed by `[rule][rank]`.
    grids: [[OnceLock<NormalGrid>; MAX_BLOCK_SIZE + 1]; 2],
    block_cache: Mutex<HashMap<BlockKey, Complex64>>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine").field("params", &self.params).field("config", &self.config).finish()
    }
}

impl Engine {
    pub fn new(params: ModelParams, config: EngineConfig) -> Result<Self> {
        ensure!(config.legendre_nodes >= 1, Argument, "legendre_nodes must be positive");
        ensure!(config.max_order <= 5, Budget, "max_order above 5 is not supported");
        let kernels = params
            .slice_labels()
            .map(|j| SliceKernel::new(&params, j).map(|k| (j, k)))
            .collect::<Result<_>>()?;
        let rules = [NormalRule::new(config.hermite_nodes)?, NormalRule::new(config.hermite_nodes_large_block)?];
        Ok(Self {
            params,
            config,
            kernels,
            rules,
            grids: Default::default(),
            block_cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn with_defaults(params: ModelParams) -> Result<Self> {
        Self::new(params, EngineConfig::default())
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    fn grid(&self, block_size: usize, rank: usize) -> &NormalGrid {
        let r = usize::from(block_size > 3);
        self.grids[r][rank].get_or_init(|| NormalGrid::new(&self.rules[r], rank, self.config.hermite_prune))
    }

    fn check_slices(&self, slices: &[u32]) -> Result<()> {
        for &j in slices {
            ensure!(
                self.kernels.contains_key(&j),
                Argument,
                "slice {j} outside window [{}, {}]",
                self.params.j_min,
                self.params.j_max
            );
        }
        Ok(())
    }

    /// `E[∏_a ∂^{d_a} W_{j_a}(σ_a)]` for `σ` Gaussian with covariance
    /// `X^T(w)`, where `T` is a spanning tree on the block's vertices
    /// (labeled `0..|B|`) and `d_a` its degrees.
    pub fn bosonic_block_value(&self, tree: &Forest, slices: &[u32], point: &InterpolationPoint) -> Result<Complex64> {
        let size = tree.n();
        ensure!(tree.is_spanning_tree(), Argument, "block tree must span its vertices");
        ensure!(size <= MAX_BLOCK_SIZE, Budget, "blocks limited to {MAX_BLOCK_SIZE} vertices");
        ensure!(slices.len() == size, Argument, "one slice per block vertex is required");
        ensure!(point.weights().len() == tree.num_edges(), Argument, "one weight per tree edge is required");
        self.check_slices(slices)?;
        let cov = PathTable::new(tree).matrix(point.weights());
        self.block_expectation(&cov, &tree.degrees(), slices)
    }

    fn block_expectation(&self, cov: &DMatrix<f64>, degrees: &[usize], slices: &[u32]) -> Result<Complex64> {
        let size = degrees.len();
        ensure!(degrees.iter().all(|&d| d <= MAX_KERNEL_ORDER), Budget, "derivative order too large");
        let factor = covariance_factor(cov, self.config.eigen_cutoff)?;
        let grid = self.grid(size, factor.ncols());
        let kernels: Vec<&SliceKernel> = slices.iter().map(|j| &self.kernels[j]).collect();
        let value = expect_on_grid(&factor, grid, |sigma| {
            let mut prod = Complex64::new(1.0, 0.0);
            for a in 0..size {
                match kernels[a].w_derivative(degrees[a], Complex64::new(sigma[a], 0.0)) {
                    Ok(v) => prod *= v,
                    Err(_) => return Complex64::new(f64::NAN, f64::NAN),
                }
            }
            prod
        });
        ensure!(
            value.re.is_finite() && value.im.is_finite(),
            Domain,
            "block integrand hit a pole of the slice kernel"
        );
        Ok(value)
    }

    /// `∫ dw_T E_{X^T(w)}[∏_a ∂^{d_a} W_{j_a}(σ_a)]` over the tree weights.
    pub fn bosonic_block_integral(&self, tree: &Forest, slices: &[u32]) -> Result<Complex64> {
        ensure!(tree.is_spanning_tree(), Argument, "block tree must span its vertices");
        ensure!(tree.n() <= MAX_BLOCK_SIZE, Budget, "blocks limited to {MAX_BLOCK_SIZE} vertices");
        ensure!(slices.len() == tree.n(), Argument, "one slice per block vertex is required");
        self.check_slices(slices)?;
        let table = PathTable::new(tree);
        let degrees = tree.degrees();
        let cubature = OrderedCubature::new(tree.num_edges(), self.config.legendre_nodes)?;
        let mut acc = crate::quadrature::ComplexKahanSum::new();
        let mut cov = DMatrix::zeros(tree.n(), tree.n());
        for (w, weight) in cubature.iter() {
            table.fill(w, &mut cov);
            acc.add(self.block_expectation(&cov, &degrees, slices)? * weight);
        }
        Ok(acc.value())
    }

    fn cached_block(&self, key: &BlockKey) -> Result<Complex64> {
        if let Some(v) = self.block_cache.lock().unwrap().get(key) {
            return Ok(*v);
        }
        let tree = Forest::new(key.slices.len(), key.edges.iter().copied())?;
        let v = self.bosonic_block_integral(&tree, &key.slices)?;
        self.block_cache.lock().unwrap().insert(key.clone(), v);
        Ok(v)
    }

    /// `∫ dw_F` of the fermionic factor. The factor is a polynomial of
    /// degree at most `n` in each weight on every ordering cell, so the
    /// Gauss–Legendre order below integrates it exactly.
    pub fn fermionic_integral(&self, jungle: &Jungle, slices: &[u32]) -> Result<f64> {
        let k = jungle.fermionic().len();
        let order = (jungle.n() + k) / 2 + 2;
        let cubature = OrderedCubature::new(k, order)?;
        let mut total = crate::quadrature::KahanSum::new();
        for (w, weight) in cubature.iter() {
            let point = InterpolationPoint::new(w.to_vec())?;
            let input = FermionicFactorInput { jungle, slices, weights: &point };
            total.add(weight * fermionic_factor(&input)?);
        }
        Ok(total.value())
    }

    fn block_keys(&self, jungle: &Jungle, slices: &[u32]) -> Option<Vec<BlockKey>> {
        jungle
            .blocks()
            .blocks()
            .iter()
            .map(|b| BlockKey::new(b, jungle.bosonic(), slices))
            .collect()
    }

    fn structurally_zero(jungle: &Jungle, slices: &[u32]) -> bool {
        violates_hardcore(&jungle.blocks().block_of(), slices) || violates_slice_conservation(jungle, slices)
    }

    fn validate_term(&self, jungle: &Jungle, slices: &[u32]) -> Result<()> {
        ensure!(jungle.is_spanning(), Argument, "jungle terms need a spanning jungle");
        ensure!(slices.len() == jungle.n(), Argument, "one slice per vertex is required");
        self.check_slices(slices)
    }

    /// One term of the jungle sum (without the `1/n!`): exactly zero on a
    /// hardcore or slice-conservation violation.
    pub fn jungle_term(&self, jungle: &Jungle, slices: &[u32]) -> Result<Complex64> {
        self.validate_term(jungle, slices)?;
        if Self::structurally_zero(jungle, slices) {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let keys = self.block_keys(jungle, slices).expect("hardcore already checked");
        let mut value = Complex64::new(self.fermionic_integral(jungle, slices)?, 0.0);
        for key in &keys {
            value *= self.cached_block(key)?;
        }
        Ok(value)
    }

    /// Every structurally nonzero term of order `n`, in enumeration order
    /// (jungles outer, slice assignments inner).
    pub fn order_terms(&self, n: usize) -> Result<Vec<TermRecord>> {
        ensure!(n >= 1, Argument, "orders start at 1");
        ensure!(n <= self.config.max_order, Budget, "order {n} exceeds budget {}", self.config.max_order);
        let assignments = slice_assignments(&self.params, n);
        let mut items = Vec::new();
        for (index, jungle) in enumerate_jungles(n, true)?.enumerate() {
            for slices in &assignments {
                if !Self::structurally_zero(&jungle, slices) {
                    items.push((index, jungle.clone(), slices.clone()));
                }
            }
        }
        // Every vertex carries a factor λ², so nothing needs integrating.
        if self.params.lambda == Complex64::new(0.0, 0.0) {
            return Ok(items
                .into_iter()
                .map(|(index, jungle, slices)| TermRecord {
                    order: n,
                    jungle_index: index,
                    bosonic: jungle.bosonic().edges().to_vec(),
                    fermionic: jungle.fermionic().to_vec(),
                    slices,
                    value: Complex64::new(0.0, 0.0),
                })
                .collect());
        }
        // Evaluate each distinct block once, largest blocks first so that the
        // inner Gaussian sums get the thread pool to themselves.
        let mut keys: Vec<BlockKey> = items
            .iter()
            .flat_map(|(_, j, s)| self.block_keys(j, s).expect("nonzero term"))
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        keys.sort_by(|a, b| b.slices.len().cmp(&a.slices.len()).then_with(|| a.cmp(b)));
        let small: Vec<&BlockKey> = keys.iter().filter(|k| k.slices.len() == 1).collect();
        for key in keys.iter().filter(|k| k.slices.len() > 1) {
            self.cached_block(key)?;
        }
        small.par_iter().map(|k| self.cached_block(k).map(|_| ())).collect::<Result<()>>()?;

        let fermionic: Vec<f64> = items
            .par_iter()
            .map(|(_, j, s)| self.fermionic_integral(j, s))
            .collect::<Result<_>>()?;
        items
            .into_iter()
            .zip(fermionic)
            .map(|((index, jungle, slices), fer)| {
                let mut value = Complex64::new(fer, 0.0);
                for key in self.block_keys(&jungle, &slices).expect("nonzero term") {
                    value *= self.cached_block(&key)?;
                }
                Ok(TermRecord {
                    order: n,
                    jungle_index: index,
                    bosonic: jungle.bosonic().edges().to_vec(),
                    fermionic: jungle.fermionic().to_vec(),
                    slices,
                    value,
                })
            })
            .collect()
    }

    /// `(1/n!) Σ_J Σ_j term`, summed in enumeration order.
    pub fn order_contribution(&self, n: usize) -> Result<Complex64> {
        let terms = self.order_terms(n)?;
        Ok(sum_terms(&terms) / factorial(n))
    }

    /// Partial sums `S_1..S_{n_max}`, with distances to `reference` if given.
    pub fn logz_truncation(&self, n_max: usize, reference: Option<Complex64>) -> Result<Truncation> {
        ensure!(n_max <= self.config.max_order, Budget, "order {n_max} exceeds budget {}", self.config.max_order);
        let mut orders = Vec::with_capacity(n_max);
        let mut partial_sums = Vec::with_capacity(n_max);
        let mut running = Complex64::new(0.0, 0.0);
        for n in 1..=n_max {
            let c = self.order_contribution(n)?;
            running += c;
            orders.push(c);
            partial_sums.push(running);
        }
        let distances = reference.map(|r| partial_sums.iter().map(|s| (s - r).norm()).collect());
        Ok(Truncation { orders, partial_sums, distances })
    }
}

/// Ordered compensated sum of term values.
pub fn sum_terms(terms: &[TermRecord]) -> Complex64 {
    let mut acc = crate::quadrature::ComplexKahanSum::new();
    for t in terms {
        acc.add(t.value);
    }
    acc.value()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Convenience wrapper: `log Z` truncated at `n_max` with default budgets.
pub fn logz_truncation(n_max: usize, params: &ModelParams) -> Result<Truncation> {
    Engine::with_defaults(*params)?.logz_truncation(n_max, None)
}

/// Convenience wrapper: contribution of order `n` with default budgets.
pub fn order_contribution(n: usize, params: &ModelParams) -> Result<Complex64> {
    Engine::with_defaults(*params)?.order_contribution(n)
}

/// Convenience wrapper: a single term with default budgets.
pub fn jungle_term(jungle: &Jungle, slices: &[u32], params: &ModelParams) -> Result<Complex64> {
    Engine::with_defaults(*params)?.jungle_term(jungle, slices)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{logz_oracle, slice_w_integral};

    fn desk(lambda: f64) -> ModelParams {
        ModelParams::real(lambda, 2, 1, 3).unwrap()
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn single_vertex_blocks() {
        let e = Engine::with_defaults(desk(0.0)).unwrap();
        let v = e.bosonic_block_value(&Forest::empty(1), &[2], &InterpolationPoint::ones(0)).unwrap();
        assert_eq!(v, c(0.0));

        let p = ModelParams::real(0.5, 2, 1, 2).unwrap();
        let e = Engine::with_defaults(p).unwrap();
        let v = e.bosonic_block_value(&Forest::empty(1), &[1], &InterpolationPoint::ones(0)).unwrap();
        let a = slice_w_integral(&p, 1, 100).unwrap();
        let b = slice_w_integral(&p, 1, 200).unwrap();
        assert!((a - b).norm() < 1e-9);
        assert!((v - b).norm() < 1e-9, "{v} vs {b}");
    }

    #[test]
    fn zero_weight_factorises() {
        let p = desk(0.3);
        let e = Engine::with_defaults(p).unwrap();
        let tree = Forest::new(2, [(0, 1)]).unwrap();
        let joint = e.bosonic_block_value(&tree, &[1, 3], &InterpolationPoint::new(vec![0.0]).unwrap()).unwrap();
        let d1 = crate::quadrature::NormalRule::new(200)
            .unwrap()
            .expect(|x| crate::model::dw_derivative(&p, 1, 1, c(x)).unwrap());
        let d3 = crate::quadrature::NormalRule::new(200)
            .unwrap()
            .expect(|x| crate::model::dw_derivative(&p, 3, 1, c(x)).unwrap());
        assert!((joint - d1 * d3).norm() < 1e-9);
    }

    #[test]
    fn first_order_is_sum_of_slice_averages() {
        let p = ModelParams::real(0.3, 2, 1, 2).unwrap();
        let order1 = order_contribution(1, &p).unwrap();
        let reference: Complex64 = p.slice_labels().map(|j| slice_w_integral(&p, j, 200).unwrap()).sum();
        assert!((order1 - reference).norm() < 1e-10, "{order1} vs {reference}");
        assert_eq!(order_contribution(1, &desk(0.0)).unwrap(), c(0.0));
    }

    #[test]
    fn fermionic_edge_across_slices_vanishes() {
        let e = Engine::with_defaults(desk(0.2)).unwrap();
        let j = Jungle::new(Forest::empty(2), [(0, 1)]).unwrap();
        assert_eq!(e.jungle_term(&j, &[1, 2]).unwrap(), c(0.0));
        let b = Jungle::new(Forest::new(2, [(0, 1)]).unwrap(), []).unwrap();
        assert_eq!(e.jungle_term(&b, &[3, 3]).unwrap(), c(0.0));
        assert!(e.jungle_term(&b, &[1, 4]).is_err());
    }

    #[test]
    fn second_order_improves_on_first() {
        let p = desk(0.2);
        let oracle = logz_oracle(&p, 200).unwrap();
        let engine = Engine::with_defaults(p).unwrap();
        let t = engine.logz_truncation(2, Some(oracle)).unwrap();
        let d = t.distances.unwrap();
        assert!(d[1] < d[0], "distances {d:?}");
        for o in &t.orders {
            assert!(o.im.abs() < 1e-10);
        }
    }

    #[test]
    fn truncation_edge_cases() {
        let e = Engine::with_defaults(desk(0.2)).unwrap();
        let t = e.logz_truncation(0, None).unwrap();
        assert!(t.orders.is_empty() && t.total() == c(0.0));
        assert!(matches!(e.logz_truncation(5, None), Err(crate::MlveError::Budget(_))));
        let zero = Engine::with_defaults(desk(0.0)).unwrap();
        assert_eq!(zero.logz_truncation(2, None).unwrap().total(), c(0.0));
    }

    #[test]
    fn slice_assignment_enumeration() {
        let a = slice_assignments(&desk(0.1), 2);
        assert_eq!(a.len(), 9);
        assert_eq!(a[0], vec![1, 1]);
        assert_eq!(a[8], vec![3, 3]);
    }

    #[test]
    fn zero_coupling_gives_zero_terms() {
        let e = Engine::with_defaults(desk(0.0)).unwrap();
        let terms = e.order_terms(3).unwrap();
        assert!(!terms.is_empty());
        assert!(terms.iter().all(|t| t.value == Complex64::new(0.0, 0.0)));
    }
}
