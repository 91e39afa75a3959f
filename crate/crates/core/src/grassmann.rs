//! Gaussian Grassmann integrals.
//!
//! With the measure `∏_i dψ̄_i dψ_i` normalised so that
//! `∫ dψ̄ dψ e^{-ψ̄ a ψ} = a`, inserting pairs of generators into the
//! Gaussian produces signed minors:
//! `∫ e^{-ψ̄Mψ} ∏_i ψ_{a_i} ψ̄_{b_i} = ∂^k det M / ∏_i ∂M_{b_i a_i}`.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::Rng;

use crate::combinatorics::Jungle;
use crate::error::{ensure, Result};
use crate::interpolation::{y_block_matrix, InterpolationPoint};

/// Largest dimension accepted by [`brute_force_grassmann`].
pub const MAX_BRUTE_FORCE_DIM: usize = 8;

/// A matrix together with the generator insertions `ψ_{a_i}` (removed
/// columns) and `ψ̄_{b_i}` (removed rows).
#[derive(Debug, Clone, PartialEq)]
pub struct MinorSpec {
    pub matrix: DMatrix<f64>,
    pub removed_cols: Vec<usize>,
    pub removed_rows: Vec<usize>,
}

impl MinorSpec {
    pub fn new(matrix: DMatrix<f64>, removed_cols: Vec<usize>, removed_rows: Vec<usize>) -> Result<Self> {
        let spec = Self { matrix, removed_cols, removed_rows };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        let n = self.matrix.nrows();
        ensure!(self.matrix.is_square(), Argument, "minor needs a square matrix");
        ensure!(
            self.removed_cols.len() == self.removed_rows.len(),
            Argument,
            "removed rows and columns must have equal length"
        );
        ensure!(self.removed_cols.len() <= n, Argument, "more removals than the dimension");
        for list in [&self.removed_cols, &self.removed_rows] {
            ensure!(list.iter().all(|&i| i < n), Argument, "removed index out of range");
            let mut sorted = list.clone();
            sorted.sort_unstable();
            sorted.dedup();
            ensure!(sorted.len() == list.len(), Argument, "index collision in {list:?}");
        }
        Ok(())
    }

    /// `∫ e^{-ψ̄Mψ} ∏_i ψ_{a_i} ψ̄_{b_i}`.
    pub fn value(&self) -> Result<f64> {
        self.validate()?;
        Ok(signed_minor(&self.matrix, &self.removed_cols, &self.removed_rows))
    }
}

/// `∫ e^{-ψ̄Mψ} ∏_i ψ_{a_i} ψ̄_{b_i}` for column list `a` and row list `b`.
pub fn grassmann_minor(matrix: &DMatrix<f64>, removed_cols: &[usize], removed_rows: &[usize]) -> Result<f64> {
    MinorSpec::new(matrix.clone(), removed_cols.to_vec(), removed_rows.to_vec())?.value()
}

fn inversions(seq: &[usize]) -> usize {
    let mut count = 0;
    for i in 0..seq.len() {
        for j in i + 1..seq.len() {
            if seq[i] > seq[j] {
                count += 1;
            }
        }
    }
    count
}

/// Minors up to this size are expanded over permutations, which is exact
/// whenever the entries are small integers.
const LEIBNIZ_MAX: usize = 5;

fn leibniz_determinant(k: usize, entry: impl Fn(usize, usize) -> f64) -> f64 {
    static SIGNED_PERMUTATIONS: OnceLock<Vec<Vec<(f64, Vec<usize>)>>> = OnceLock::new();
    let table = SIGNED_PERMUTATIONS.get_or_init(|| {
        (0..=LEIBNIZ_MAX)
            .map(|k| {
                crate::quadrature::permutations(k)
                    .into_iter()
                    .map(|p| (if inversions(&p) % 2 == 0 { 1.0 } else { -1.0 }, p))
                    .collect()
            })
            .collect()
    });
    table[k].iter().map(|(sign, perm)| sign * (0..k).map(|r| entry(r, perm[r])).product::<f64>()).sum()
}

/// Unchecked core of [`grassmann_minor`]: sorting the pairs by row, the
/// sign is `(-1)^{Σ(a_i + b_i)}` times the parity of the column sequence.
fn signed_minor(m: &DMatrix<f64>, cols: &[usize], rows: &[usize]) -> f64 {
    let n = m.nrows();
    let mut pairs: Vec<(usize, usize)> = rows.iter().copied().zip(cols.iter().copied()).collect();
    pairs.sort_unstable();
    let col_seq: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    let index_sum: usize = cols.iter().sum::<usize>() + rows.iter().sum::<usize>();
    let parity = (index_sum + inversions(&col_seq)) % 2;
    let keep_rows: Vec<usize> = (0..n).filter(|i| !rows.contains(i)).collect();
    let keep_cols: Vec<usize> = (0..n).filter(|i| !cols.contains(i)).collect();
    if keep_rows.len() != keep_cols.len() {
        // A repeated generator: ψ_a² = 0.
        return 0.0;
    }
    let k = keep_rows.len();
    let det = if k <= LEIBNIZ_MAX {
        leibniz_determinant(k, |r, c| m[(keep_rows[r], keep_cols[c])])
    } else {
        DMatrix::from_fn(k, k, |r, c| m[(keep_rows[r], keep_cols[c])]).determinant()
    };
    if parity == 1 {
        -det
    } else {
        det
    }
}

/// A single Grassmann generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Generator {
    Psi(usize),
    PsiBar(usize),
}

impl Generator {
    fn bit(self) -> u32 {
        match self {
            Generator::Psi(i) => 2 * i as u32,
            Generator::PsiBar(i) => 2 * i as u32 + 1,
        }
    }
}

/// Sign of the product of canonically ordered monomials `a · b`
/// (zero if they share a generator).
fn monomial_product_sign(a: u32, b: u32) -> f64 {
    if a & b != 0 {
        return 0.0;
    }
    // Each generator of b must move left past every larger generator of a.
    let mut swaps = 0u32;
    let mut rest = b;
    while rest != 0 {
        let y = rest.trailing_zeros();
        rest &= rest - 1;
        swaps += (a >> (y + 1)).count_ones();
    }
    if swaps % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Dense element of the Grassmann algebra on `2·dim` generators; monomials
/// are bitmasks with bit `2i` for `ψ_i` and bit `2i + 1` for `ψ̄_i`.
#[derive(Debug, Clone)]
struct GrassmannElement {
    coeffs: Vec<f64>,
}

impl GrassmannElement {
    fn one(dim: usize) -> Self {
        let mut coeffs = vec![0.0; 1 << (2 * dim)];
        coeffs[0] = 1.0;
        Self { coeffs }
    }

    /// `self · (1 + c · m)` for a single monomial `m`.
    fn mul_one_plus(&mut self, c: f64, m: u32) {
        if c == 0.0 {
            return;
        }
        let mut next = self.coeffs.clone();
        for (mask, &v) in self.coeffs.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let s = monomial_product_sign(mask as u32, m);
            if s != 0.0 {
                next[mask | m as usize] += s * c * v;
            }
        }
        self.coeffs = next;
    }

    /// `self · m` for a single monomial `m`.
    fn mul_monomial(&mut self, m: u32) {
        let mut next = vec![0.0; self.coeffs.len()];
        for (mask, &v) in self.coeffs.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let s = monomial_product_sign(mask as u32, m);
            if s != 0.0 {
                next[mask | m as usize] += s * v;
            }
        }
        self.coeffs = next;
    }
}

/// `∫ ∏_i dψ̄_i dψ_i e^{-ψ̄Mψ} g_1 g_2 ⋯` evaluated by expanding the
/// exponential in the full Grassmann algebra.
///
/// A monomial that repeats a generator gives zero.
pub fn brute_force_grassmann(dim: usize, matrix: &DMatrix<f64>, monomial: &[Generator]) -> Result<f64> {
    ensure!(dim <= MAX_BRUTE_FORCE_DIM, Budget, "brute-force Grassmann limited to dim <= 8");
    ensure!(
        matrix.nrows() == dim && matrix.ncols() == dim,
        Argument,
        "matrix must be {dim} x {dim}"
    );
    for g in monomial {
        let (Generator::Psi(i) | Generator::PsiBar(i)) = *g;
        ensure!(i < dim, Argument, "generator index {i} out of range");
    }
    let mut x = GrassmannElement::one(dim);
    // The bilinears are even, so e^{-ψ̄Mψ} = ∏_{ij} (1 - M_ij ψ̄_i ψ_j).
    for i in 0..dim {
        for j in 0..dim {
            let bar = Generator::PsiBar(i).bit();
            let psi = Generator::Psi(j).bit();
            let m = (1u32 << bar) | (1u32 << psi);
            let sign = monomial_product_sign(1 << bar, 1 << psi);
            x.mul_one_plus(-matrix[(i, j)] * sign, m);
        }
    }
    for g in monomial {
        x.mul_monomial(1 << g.bit());
    }
    // The top monomial ψ_1ψ̄_1ψ_2ψ̄_2⋯ is already in canonical bit order and
    // integrates to one.
    Ok(x.coeffs[(1usize << (2 * dim)) - 1])
}

/// The monomial `∏_i ψ_{a_i} ψ̄_{b_i}`.
pub fn paired_monomial(removed_cols: &[usize], removed_rows: &[usize]) -> Vec<Generator> {
    removed_cols
        .iter()
        .zip(removed_rows)
        .flat_map(|(&a, &b)| [Generator::Psi(a), Generator::PsiBar(b)])
        .collect()
}

/// `𝐘_ab = Y_{B(a)B(b)} δ_{j_a j_b}`.
pub fn lift_by_slices(y_block: &DMatrix<f64>, vertex_block: &[usize], slices: &[u32]) -> DMatrix<f64> {
    let n = vertex_block.len();
    DMatrix::from_fn(n, n, |a, b| {
        if slices[a] == slices[b] {
            y_block[(vertex_block[a], vertex_block[b])]
        } else {
            0.0
        }
    })
}

/// `true` if two vertices of one Bosonic block share a slice.
pub fn violates_hardcore(vertex_block: &[usize], slices: &[u32]) -> bool {
    let n = slices.len();
    (0..n).any(|a| (a + 1..n).any(|b| vertex_block[a] == vertex_block[b] && slices[a] == slices[b]))
}

/// `true` if some Fermionic edge joins two different slices.
pub fn violates_slice_conservation(jungle: &Jungle, slices: &[u32]) -> bool {
    jungle.fermionic().iter().any(|&(a, b)| slices[a] != slices[b])
}

/// Inputs of the Fermionic factor of one jungle term.
#[derive(Debug, Clone)]
pub struct FermionicFactorInput<'a> {
    pub jungle: &'a Jungle,
    pub slices: &'a [u32],
    /// One weight per Fermionic edge, in [`Jungle::fermionic`] order.
    pub weights: &'a InterpolationPoint,
}

/// Fermionic factor of a jungle term: zero on hardcore or slice-conservation
/// violations, otherwise the sum over the `2^k` orientations of the
/// Fermionic edges of the signed minors of the lifted matrix `𝐘(w)`.
pub fn fermionic_factor(input: &FermionicFactorInput<'_>) -> Result<f64> {
    fermionic_factor_with(input, signed_minor)
}

/// [`fermionic_factor`] with a caller-supplied minor evaluator
/// `(matrix, removed_cols, removed_rows) -> value`.
pub fn fermionic_factor_with(
    input: &FermionicFactorInput<'_>,
    minor: impl Fn(&DMatrix<f64>, &[usize], &[usize]) -> f64,
) -> Result<f64> {
    let jungle = input.jungle;
    let n = jungle.n();
    ensure!(input.slices.len() == n, Argument, "one slice per vertex is required");
    ensure!(
        input.weights.weights().len() == jungle.fermionic().len(),
        Argument,
        "one weight per Fermionic edge is required"
    );
    let blocks = jungle.blocks();
    let vertex_block = blocks.block_of();
    if violates_hardcore(&vertex_block, input.slices) || violates_slice_conservation(jungle, input.slices) {
        return Ok(0.0);
    }
    let y = y_block_matrix(blocks.len(), &jungle.block_edges(), input.weights)?;
    let lifted = lift_by_slices(y.matrix(), &vertex_block, input.slices);
    let edges = jungle.fermionic();
    let k = edges.len();
    let mut cols = vec![0; k];
    let mut rows = vec![0; k];
    let mut total = 0.0;
    for mask in 0..1u32 << k {
        for (i, &(a, b)) in edges.iter().enumerate() {
            if mask >> i & 1 == 0 {
                (cols[i], rows[i]) = (a, b);
            } else {
                (cols[i], rows[i]) = (b, a);
            }
        }
        total += minor(&lifted, &cols, &rows);
    }
    Ok(total)
}

/// Worst-case margins found by [`check_minor_bound`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinorBoundReport {
    pub trials: usize,
    /// Largest `|minor|` seen (bounded by one).
    pub max_abs_minor: f64,
    /// Largest `minor_ab² - minor_aa · minor_bb` (nonpositive).
    pub max_cauchy_schwarz_excess: f64,
    /// Smallest and largest diagonal minor (within `[0, 1]`).
    pub min_diagonal_minor: f64,
    pub max_diagonal_minor: f64,
}

impl MinorBoundReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.max_abs_minor <= 1.0 + tol
            && self.max_cauchy_schwarz_excess <= tol
            && self.min_diagonal_minor >= -tol
            && self.max_diagonal_minor <= 1.0 + tol
    }
}

fn random_distinct(rng: &mut impl Rng, n: usize, k: usize) -> Vec<usize> {
    rand::seq::index::sample(rng, n, k).into_vec()
}

/// Samples `trials` random removal lists and checks `|minor| ≤ 1`,
/// Cauchy–Schwarz for minors and the Hadamard bound on diagonal minors.
pub fn check_minor_bound(matrix: &DMatrix<f64>, trials: usize, rng: &mut impl Rng) -> Result<MinorBoundReport> {
    let n = matrix.nrows();
    ensure!(matrix.is_square() && n >= 1, Argument, "need a nonempty square matrix");
    ensure!(
        (0..n).all(|i| (matrix[(i, i)] - 1.0).abs() <= 1e-12),
        Argument,
        "matrix must have unit diagonal"
    );
    ensure!(
        crate::interpolation::min_eigenvalue(matrix) >= -crate::interpolation::PSD_TOLERANCE,
        Argument,
        "matrix must be positive semidefinite"
    );
    let mut report = MinorBoundReport {
        trials,
        max_abs_minor: 0.0,
        max_cauchy_schwarz_excess: f64::NEG_INFINITY,
        min_diagonal_minor: f64::INFINITY,
        max_diagonal_minor: f64::NEG_INFINITY,
    };
    for _ in 0..trials {
        let k = rng.gen_range(0..=n);
        let a = random_distinct(rng, n, k);
        let b = random_distinct(rng, n, k);
        let ab = signed_minor(matrix, &a, &b);
        let aa = signed_minor(matrix, &a, &a);
        let bb = signed_minor(matrix, &b, &b);
        report.max_abs_minor = report.max_abs_minor.max(ab.abs()).max(aa.abs()).max(bb.abs());
        report.max_cauchy_schwarz_excess = report.max_cauchy_schwarz_excess.max(ab * ab - aa * bb);
        report.min_diagonal_minor = report.min_diagonal_minor.min(aa).min(bb);
        report.max_diagonal_minor = report.max_diagonal_minor.max(aa).max(bb);
    }
    Ok(report)
}

/// All ordered selections of `k` distinct indices from `0..n`.
pub fn ordered_selections(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    fn rec(n: usize, k: usize, cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in 0..n {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(n, k, cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    rec(n, k, &mut Vec::new(), &mut vec![false; n], &mut out);
    out
}
