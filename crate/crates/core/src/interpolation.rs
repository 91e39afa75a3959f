//! Forest-formula interpolation.
//!
//! Given a forest `F` with a weakening parameter `w_ℓ ∈ [0,1]` per edge, the
//! interpolated matrix `X^F(w)` has unit diagonal and, off the diagonal, the
//! minimum of `w` along the forest path joining the two vertices (zero
//! across components). Such matrices are positive semidefinite, and
//! `f(1) = Σ_F ∫ dw_F ∂_F f(X^F(w))` for smooth `f` of the off-diagonal
//! entries.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::combinatorics::{enumerate_forests, Edge, Forest};
use crate::error::{ensure, MlveError, Result};
use crate::polynomial::Polynomial;
use crate::quadrature::{KahanSum, OrderedCubature};

/// Default Gauss–Legendre order per edge for forest-formula integrals.
pub const DEFAULT_EDGE_ORDER: usize = 16;

/// Eigenvalues at or above `-PSD_TOLERANCE` count as nonnegative.
pub const PSD_TOLERANCE: f64 = 1e-12;

/// One weakening parameter per forest edge, in the forest's edge order.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationPoint {
    weights: Vec<f64>,
}

impl InterpolationPoint {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        for (i, &w) in weights.iter().enumerate() {
            ensure!((0.0..=1.0).contains(&w), Argument, "weight {i} = {w} lies outside [0, 1]");
        }
        Ok(Self { weights })
    }

    pub fn ones(len: usize) -> Self {
        Self { weights: vec![1.0; len] }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Symmetric matrix with unit diagonal produced by path-minimum
/// interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    matrix: DMatrix<f64>,
}

impl CovarianceMatrix {
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        ensure!(matrix.is_square(), Argument, "covariance must be square");
        ensure!(
            (&matrix - matrix.transpose()).abs().max() == 0.0,
            Argument,
            "covariance must be symmetric"
        );
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.matrix)
    }

    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue() >= -PSD_TOLERANCE
    }
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(m.clone()).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Path structure of a forest, precomputed so that `X^F(w)` can be filled
/// repeatedly at many interpolation points.
#[derive(Debug, Clone)]
pub struct PathTable {
    n: usize,
    num_edges: usize,
    /// Upper-triangle pairs `(a, b, edges on the path)` for connected pairs.
    paths: Vec<(usize, usize, Vec<usize>)>,
}

impl PathTable {
    pub fn new(forest: &Forest) -> Self {
        let n = forest.n();
        let mut paths = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if let Some(p) = forest.path_edges(a, b) {
                    paths.push((a, b, p));
                }
            }
        }
        Self { n, num_edges: forest.num_edges(), paths }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    /// Writes `X^F(w)` into `out` (resized if needed).
    pub fn fill(&self, weights: &[f64], out: &mut DMatrix<f64>) {
        debug_assert_eq!(weights.len(), self.num_edges);
        if out.nrows() != self.n || out.ncols() != self.n {
            *out = DMatrix::zeros(self.n, self.n);
        } else {
            out.fill(0.0);
        }
        for i in 0..self.n {
            out[(i, i)] = 1.0;
        }
        for (a, b, path) in &self.paths {
            let m = path.iter().map(|&e| weights[e]).fold(1.0, f64::min);
            out[(*a, *b)] = m;
            out[(*b, *a)] = m;
        }
    }

    pub fn matrix(&self, weights: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, self.n);
        self.fill(weights, &mut out);
        out
    }
}

/// `X^F(w)`.
pub fn x_matrix(forest: &Forest, point: &InterpolationPoint) -> Result<CovarianceMatrix> {
    ensure!(
        point.weights().len() == forest.num_edges(),
        Argument,
        "interpolation point has {} weights for {} edges",
        point.weights().len(),
        forest.num_edges()
    );
    Ok(CovarianceMatrix { matrix: PathTable::new(forest).matrix(point.weights()) })
}

/// Block-level matrix `Y_{BB'}(w)`: minimum Fermionic weight along the
/// block-level path, zero for unconnected blocks.
pub fn y_block_matrix(
    num_blocks: usize,
    block_edges: &[Edge],
    point: &InterpolationPoint,
) -> Result<CovarianceMatrix> {
    let forest = Forest::new(num_blocks, block_edges.iter().copied())
        .map_err(|e| MlveError::Argument(format!("Fermionic edges must form a forest on blocks: {e}")))?;
    // Forest::new sorts edges; carry the weights along.
    let mut order: Vec<(Edge, f64)> = block_edges
        .iter()
        .map(|&(a, b)| if a < b { (a, b) } else { (b, a) })
        .zip(point.weights().iter().copied())
        .collect();
    ensure!(order.len() == block_edges.len() && point.weights().len() == block_edges.len(),
        Argument, "one weight per Fermionic edge is required");
    order.sort_by(|x, y| x.0.cmp(&y.0));
    let weights: Vec<f64> = order.into_iter().map(|(_, w)| w).collect();
    x_matrix(&forest, &InterpolationPoint::new(weights)?)
}

/// Quadratic form `Σ_ab x_a Y_{B(a)B(b)} δ_{j_a j_b} x_b` evaluated through
/// the layered decomposition: with the Fermionic weights sorted
/// decreasingly (`w_0 = 1`, `w_{k+1} = 0`),
/// `Σ_i (w_i - w_{i+1}) Σ_{f ∈ F^{(i)}} Σ_j (Σ_{a ∈ f, j_a = j} x_a)²`,
/// where `F^{(i)}` are the block clusters joined by the `i` largest edges.
pub fn layered_quadratic_form(
    num_blocks: usize,
    block_edges: &[Edge],
    weights: &[f64],
    vertex_block: &[usize],
    vertex_slice: &[u32],
    x: &[f64],
) -> Result<f64> {
    ensure!(weights.len() == block_edges.len(), Argument, "one weight per Fermionic edge");
    ensure!(
        vertex_block.len() == x.len() && vertex_slice.len() == x.len(),
        Argument,
        "vertex data length mismatch"
    );
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]));
    let mut sets = crate::combinatorics::DisjointSets::new(num_blocks);
    let mut total = KahanSum::new();
    for level in 0..=order.len() {
        if level > 0 {
            let (a, b) = block_edges[order[level - 1]];
            sets.union(a, b);
        }
        let upper = if level == 0 { 1.0 } else { weights[order[level - 1]] };
        let lower = if level == order.len() { 0.0 } else { weights[order[level]] };
        let gap = upper - lower;
        if gap == 0.0 {
            continue;
        }
        let mut sums: BTreeMap<(usize, u32), f64> = BTreeMap::new();
        for (a, &xa) in x.iter().enumerate() {
            let cluster = sets.find(vertex_block[a]);
            *sums.entry((cluster, vertex_slice[a])).or_insert(0.0) += xa;
        }
        for s in sums.values() {
            total.add(gap * s * s);
        }
    }
    Ok(total.value())
}

/// Index of edge `(a, b)`, `a < b`, among the upper-triangle pairs of `n`
/// vertices in lexicographic order.
pub fn pair_index(n: usize, a: usize, b: usize) -> usize {
    debug_assert!(a < b && b < n);
    a * n - a * (a + 1) / 2 + (b - a - 1)
}

/// A smooth function of the off-diagonal entries of a symmetric matrix,
/// together with its mixed first partial derivatives with respect to sets
/// of distinct entries.
pub trait ForestFunction {
    fn value(&self, x: &DMatrix<f64>) -> f64;

    /// `∂^{|edges|} f / ∏_{ℓ∈edges} ∂X_ℓ` at `x`, or `None` if the caller
    /// cannot supply it.
    fn forest_derivative(&self, edges: &[Edge], x: &DMatrix<f64>) -> Option<f64>;
}

/// `f(X) = exp(Σ_ℓ c_ℓ X_ℓ)` over the off-diagonal pairs.
#[derive(Debug, Clone)]
pub struct ExpFamily {
    pub coefficients: BTreeMap<Edge, f64>,
}

impl ForestFunction for ExpFamily {
    fn value(&self, x: &DMatrix<f64>) -> f64 {
        self.coefficients.iter().map(|(&(a, b), c)| c * x[(a, b)]).sum::<f64>().exp()
    }

    fn forest_derivative(&self, edges: &[Edge], x: &DMatrix<f64>) -> Option<f64> {
        let prefactor: f64 =
            edges.iter().map(|e| self.coefficients.get(e).copied().unwrap_or(0.0)).product();
        Some(prefactor * self.value(x))
    }
}

/// `f(X) = ∏_ℓ X_ℓ^{k_ℓ}` over the off-diagonal pairs.
#[derive(Debug, Clone)]
pub struct MonomialFamily {
    pub exponents: BTreeMap<Edge, u32>,
}

impl ForestFunction for MonomialFamily {
    fn value(&self, x: &DMatrix<f64>) -> f64 {
        self.exponents.iter().map(|(&(a, b), &k)| x[(a, b)].powi(k as i32)).product()
    }

    fn forest_derivative(&self, edges: &[Edge], x: &DMatrix<f64>) -> Option<f64> {
        let mut out = 1.0;
        for (&(a, b), &k) in &self.exponents {
            let v = x[(a, b)];
            if edges.contains(&(a, b)) {
                if k == 0 {
                    return Some(0.0);
                }
                out *= k as f64 * v.powi(k as i32 - 1);
            } else {
                out *= v.powi(k as i32);
            }
        }
        if edges.iter().any(|e| !self.exponents.contains_key(e)) {
            return Some(0.0);
        }
        Some(out)
    }
}

/// Right side of the forest formula, `Σ_F ∫ dw_F ∂_F f(X^F(w))`, with an
/// ordered-simplex Gauss–Legendre rule of `order` nodes per edge.
pub fn forest_formula_eval(n: usize, f: &dyn ForestFunction, order: usize) -> Result<f64> {
    ensure!((1..=5).contains(&n), Budget, "forest formula evaluation limited to 1 <= n <= 5");
    let forests = enumerate_forests(n)?;
    let mut rules: Vec<Option<OrderedCubature>> = vec![None; n];
    let mut total = KahanSum::new();
    let mut x = DMatrix::zeros(n, n);
    for forest in &forests {
        let k = forest.num_edges();
        if rules[k].is_none() {
            rules[k] = Some(OrderedCubature::new(k, order)?);
        }
        let table = PathTable::new(forest);
        let mut missing = false;
        let value = rules[k].as_ref().unwrap().integrate(|w| {
            table.fill(w, &mut x);
            f.forest_derivative(forest.edges(), &x).unwrap_or_else(|| {
                missing = true;
                0.0
            })
        });
        ensure!(!missing, Argument, "no derivative supplied for edge set {:?}", forest.edges());
        total.add(value);
    }
    Ok(total.value())
}

/// Both sides of the replica Gaussian identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicaIdentity {
    /// `∫ dμ_C(τ) ∏_i f_i(τ)`.
    pub single_replica: f64,
    /// `Σ_F ∫ dw_F ∫ dμ_{C⊗X^F(w)} ∂^C_F ∏_i f_i(τ_i)`.
    pub forest_sum: f64,
}

/// Evaluates both sides of the replica Gaussian identity for polynomial
/// integrands `f_i` on `R^{N_c}` and covariance `C`.
///
/// Gaussian moments are exact (Wick); the `w` integrals of polynomial
/// functions of `min` entries are exact on each ordering cell for the
/// Gauss–Legendre order chosen from the degree.
pub fn replica_gaussian_eval(cov: &DMatrix<f64>, integrands: &[Polynomial]) -> Result<ReplicaIdentity> {
    let n = integrands.len();
    let nc = cov.nrows();
    ensure!((1..=4).contains(&n), Budget, "replica identity limited to 1..=4 integrands");
    ensure!((1..=4).contains(&nc) && cov.is_square(), Argument, "covariance must be square of size 1..=4");
    ensure!(integrands.iter().all(|f| f.nvars() == nc), Argument, "integrand arity must match C");

    let single = integrands
        .iter()
        .fold(Polynomial::constant(nc, 1.0), |acc, f| acc.mul(f))
        .gaussian_expectation(cov)?;

    let big = n * nc;
    let product = integrands
        .iter()
        .enumerate()
        .fold(Polynomial::constant(big, 1.0), |acc, (i, f)| acc.mul(&f.embed(big, i * nc)));
    let mut total = KahanSum::new();
    for forest in enumerate_forests(n)? {
        let mut p = product.clone();
        for &(i, j) in forest.edges() {
            let mut next = Polynomial::zero(big);
            for a in 0..nc {
                for b in 0..nc {
                    if cov[(a, b)] != 0.0 {
                        let d = p.derivative(i * nc + a).derivative(j * nc + b);
                        next = next.add(&d.scale(cov[(a, b)]));
                    }
                }
            }
            p = next;
        }
        if p.is_zero() {
            continue;
        }
        let k = forest.num_edges();
        let order = p.degree() as usize + k + 2;
        let rule = OrderedCubature::new(k, order)?;
        let table = PathTable::new(&forest);
        let mut failure = None;
        let value = rule.integrate(|w| {
            let x = table.matrix(w);
            let full = x.kronecker(cov);
            p.gaussian_expectation(&full).unwrap_or_else(|e| {
                failure = Some(e);
                0.0
            })
        });
        if let Some(e) = failure {
            return Err(e);
        }
        total.add(value);
    }
    Ok(ReplicaIdentity { single_replica: single, forest_sum: total.value() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::enumerate_trees;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn point(w: &[f64]) -> InterpolationPoint {
        InterpolationPoint::new(w.to_vec()).unwrap()
    }

    #[test]
    fn x_matrix_examples() {
        let x = x_matrix(&Forest::empty(3), &point(&[])).unwrap();
        assert_eq!(x.matrix(), &DMatrix::identity(3, 3));
        let x = x_matrix(&Forest::new(2, [(0, 1)]).unwrap(), &point(&[0.7])).unwrap();
        assert_eq!(x.matrix()[(0, 1)], 0.7);
        let x = x_matrix(&Forest::new(3, [(0, 1), (1, 2)]).unwrap(), &point(&[0.5, 0.8])).unwrap();
        assert_eq!(x.matrix()[(0, 2)], 0.5);
        assert!(InterpolationPoint::new(vec![1.2]).is_err());
        assert!(x_matrix(&Forest::new(2, [(0, 1)]).unwrap(), &point(&[])).is_err());
    }

    #[test]
    fn y_block_matrix_examples() {
        let y = y_block_matrix(1, &[], &point(&[])).unwrap();
        assert_eq!(y.matrix(), &DMatrix::identity(1, 1));
        let y = y_block_matrix(2, &[(0, 1)], &point(&[0.4])).unwrap();
        assert_eq!(y.matrix(), &DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 1.0]));
        let y = y_block_matrix(3, &[(0, 1), (1, 2)], &point(&[0.9, 0.2])).unwrap();
        assert_eq!(y.matrix()[(0, 2)], 0.2);
        assert!(y.is_psd());
        // Weights follow their edges even when given out of order.
        let y = y_block_matrix(3, &[(2, 1), (0, 1)], &point(&[0.2, 0.9])).unwrap();
        assert_eq!(y.matrix()[(0, 1)], 0.9);
        assert!(y_block_matrix(3, &[(0, 1), (1, 2), (0, 2)], &point(&[0.1, 0.2, 0.3])).is_err());
    }

    #[test]
    fn non_example_is_not_positive() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0]);
        assert!(min_eigenvalue(&m) < -0.1);
    }

    #[test]
    fn block_matrices_are_unit_weight_limits() {
        let f = Forest::new(5, [(0, 2), (2, 4), (1, 3)]).unwrap();
        let x = x_matrix(&f, &InterpolationPoint::ones(3)).unwrap();
        for a in 0..5 {
            for b in 0..5 {
                let same = (a % 2) == (b % 2);
                assert_eq!(x.matrix()[(a, b)], if same { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn random_x_matrices_are_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=6 {
            let forests = enumerate_forests(n).unwrap();
            for _ in 0..10_000 {
                let f = &forests[rng.gen_range(0..forests.len())];
                let w: Vec<f64> = (0..f.num_edges()).map(|_| rng.gen()).collect();
                let x = x_matrix(f, &point(&w)).unwrap();
                let m = x.matrix();
                assert!(m.iter().all(|&v| (0.0..=1.0).contains(&v)));
                assert!((0..n).all(|i| m[(i, i)] == 1.0));
                assert_eq!(m, &m.transpose());
                assert!(x.min_eigenvalue() >= -PSD_TOLERANCE);
            }
        }
    }

    #[test]
    fn forest_formula_examples() {
        let square = MonomialFamily { exponents: [((0, 1), 2)].into_iter().collect() };
        assert!((forest_formula_eval(2, &square, 8).unwrap() - 1.0).abs() < 1e-14);
        struct Constant;
        impl ForestFunction for Constant {
            fn value(&self, _: &DMatrix<f64>) -> f64 {
                2.5
            }
            fn forest_derivative(&self, edges: &[Edge], _: &DMatrix<f64>) -> Option<f64> {
                Some(if edges.is_empty() { 2.5 } else { 0.0 })
            }
        }
        for n in 1..=4 {
            assert!((forest_formula_eval(n, &Constant, 4).unwrap() - 2.5).abs() < 1e-14);
        }
        let triangle =
            MonomialFamily { exponents: [((0, 1), 1), ((1, 2), 1), ((0, 2), 1)].into_iter().collect() };
        assert!((forest_formula_eval(3, &triangle, DEFAULT_EDGE_ORDER).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn forest_formula_missing_derivative() {
        struct Partial;
        impl ForestFunction for Partial {
            fn value(&self, _: &DMatrix<f64>) -> f64 {
                0.0
            }
            fn forest_derivative(&self, edges: &[Edge], _: &DMatrix<f64>) -> Option<f64> {
                (edges.len() < 2).then_some(0.0)
            }
        }
        assert!(matches!(forest_formula_eval(3, &Partial, 4), Err(MlveError::Argument(_))));
    }

    #[test]
    fn forest_formula_exp_family_n4() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let coefficients: BTreeMap<Edge, f64> = (0..4)
            .flat_map(|a| (a + 1..4).map(move |b| (a, b)))
            .map(|e| (e, rng.gen_range(-1.0..1.0)))
            .collect();
        let f = ExpFamily { coefficients };
        let ones = DMatrix::from_element(4, 4, 1.0);
        let v = forest_formula_eval(4, &f, 8).unwrap();
        assert!((v - f.value(&ones)).abs() < 1e-8, "{v} vs {}", f.value(&ones));
    }

    #[test]
    fn layered_form_matches_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for tree in enumerate_trees(4).unwrap() {
            let w: Vec<f64> = (0..3).map(|_| rng.gen()).collect();
            let y = y_block_matrix(4, tree.edges(), &point(&w)).unwrap();
            // Two vertices per block, slices 0/1 alternating.
            let vertex_block = [0, 0, 1, 1, 2, 2, 3, 3];
            let vertex_slice = [0, 1, 0, 1, 1, 0, 1, 1];
            let x: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut direct = 0.0;
            for a in 0..8 {
                for b in 0..8 {
                    if vertex_slice[a] == vertex_slice[b] {
                        direct += x[a] * y.matrix()[(vertex_block[a], vertex_block[b])] * x[b];
                    }
                }
            }
            let layered =
                layered_quadratic_form(4, tree.edges(), &w, &vertex_block, &vertex_slice, &x).unwrap();
            assert!((direct - layered).abs() < 1e-12);
        }
    }

    #[test]
    fn replica_identity_examples() {
        let c = DMatrix::from_element(1, 1, 1.0);
        let tau = Polynomial::variable(1, 0);
        let r = replica_gaussian_eval(&c, &[tau.clone(), tau.clone()]).unwrap();
        assert!((r.single_replica - 1.0).abs() < 1e-15 && (r.forest_sum - 1.0).abs() < 1e-13);
        let one = Polynomial::constant(1, 1.0);
        let r = replica_gaussian_eval(&c, &[one.clone(), one.clone(), one]).unwrap();
        assert_eq!((r.single_replica, r.forest_sum), (1.0, 1.0));
        let sq = tau.mul(&tau);
        let r = replica_gaussian_eval(&c, &[sq.clone(), sq.clone(), sq]).unwrap();
        assert_eq!(r.single_replica, 15.0);
        assert!((r.forest_sum - 15.0).abs() < 1e-12);
    }

    #[test]
    fn replica_identity_two_dimensional() {
        let c = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let (x, y) = (Polynomial::variable(2, 0), Polynomial::variable(2, 1));
        let f1 = x.mul(&y).add(&Polynomial::constant(2, 0.3));
        let f2 = x.mul(&x).scale(0.5).add(&y);
        let f3 = y.mul(&y).add(&x.scale(-1.0));
        let r = replica_gaussian_eval(&c, &[f1, f2, f3]).unwrap();
        assert!((r.single_replica - r.forest_sum).abs() < 1e-12 * r.single_replica.abs().max(1.0));
    }

    proptest! {
        #[test]
        fn pair_index_is_dense(n in 2usize..9) {
            let mut k = 0;
            for a in 0..n {
                for b in a + 1..n {
                    prop_assert_eq!(pair_index(n, a, b), k);
                    k += 1;
                }
            }
        }
    }
}
