//! Mayer expansion of a hardcore polymer gas.
//!
//! Polymers are nonempty subsets of a small monomer set, carried as
//! bitmasks. `Z` sums activity products over collections of pairwise
//! disjoint polymers; `log Z` is expanded as a sum over ordered polymer
//! tuples and spanning trees, each tree weighted by the forest-formula
//! factor `ε^T = ∫ dw_T ∏_{ℓ∈T} η_ℓ ∏_{ℓ∉T} (1 + η_ℓ X^T_ℓ(w))` with
//! `η_ℓ = -1` for intersecting pairs (identical polymers included) and 0
//! otherwise.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::combinatorics::{enumerate_trees, Forest, DisjointSets};
use crate::error::{ensure, Result};
use crate::interpolation::{pair_index, PathTable};
use crate::quadrature::{ComplexKahanSum, OrderedCubature};

/// Largest monomer set accepted by [`PolymerGas`].
pub const MAX_MONOMERS: usize = 8;
/// Largest expansion order.
pub const MAX_ORDER: usize = 5;
/// Largest number of ordered tuples enumerated in one order.
pub const MAX_TUPLES: u64 = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Polymer {
    /// Bit `m` set iff monomer `m` belongs to the polymer.
    pub support: u32,
    pub activity: Complex64,
}

impl Polymer {
    pub fn size(&self) -> u32 {
        self.support.count_ones()
    }

    pub fn monomers(&self) -> Vec<usize> {
        (0..32).filter(|m| self.support >> m & 1 == 1).collect()
    }

    pub fn intersects(&self, other: &Polymer) -> bool {
        self.support & other.support != 0
    }
}

/// Hardcore gas on monomers `0..num_monomers`; polymers absent from the
/// list have activity zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PolymerGas {
    num_monomers: usize,
    polymers: Vec<Polymer>,
}

impl PolymerGas {
    pub fn new<I, M>(num_monomers: usize, polymers: I) -> Result<Self>
    where
        I: IntoIterator<Item = (M, Complex64)>,
        M: AsRef<[usize]>,
    {
        ensure!(
            num_monomers <= MAX_MONOMERS,
            Budget,
            "polymer gases limited to {MAX_MONOMERS} monomers, got {num_monomers}"
        );
        let mut by_support: BTreeMap<u32, Complex64> = BTreeMap::new();
        for (monomers, activity) in polymers {
            let monomers = monomers.as_ref();
            ensure!(!monomers.is_empty(), Argument, "polymers must be nonempty");
            let mut support = 0u32;
            for &m in monomers {
                ensure!(m < num_monomers, Argument, "monomer {m} outside 0..{num_monomers}");
                ensure!(support >> m & 1 == 0, Argument, "monomer {m} repeated in a polymer");
                support |= 1 << m;
            }
            ensure!(
                by_support.insert(support, activity).is_none(),
                Argument,
                "polymer {monomers:?} listed twice"
            );
        }
        let polymers = by_support
            .into_iter()
            .filter(|(_, a)| *a != Complex64::new(0.0, 0.0))
            .map(|(support, activity)| Polymer { support, activity })
            .collect();
        Ok(Self { num_monomers, polymers })
    }

    pub fn num_monomers(&self) -> usize {
        self.num_monomers
    }

    /// Polymers with nonzero activity, ordered by support bitmask.
    pub fn polymers(&self) -> &[Polymer] {
        &self.polymers
    }

    pub fn activity(&self, monomers: &[usize]) -> Complex64 {
        let support = monomers.iter().fold(0u32, |s, &m| s | 1 << m);
        self.polymers
            .iter()
            .find(|p| p.support == support)
            .map_or(Complex64::new(0.0, 0.0), |p| p.activity)
    }
}

/// `Z` by direct enumeration of compatible polymer collections, including
/// the empty one.
pub fn polymer_z_direct(gas: &PolymerGas) -> Complex64 {
    // z[S] sums the collections supported inside S; split on the lowest
    // monomer of S being uncovered or covered by some polymer.
    let full = (1usize << gas.num_monomers) - 1;
    let mut z = vec![Complex64::new(0.0, 0.0); full + 1];
    z[0] = Complex64::new(1.0, 0.0);
    for set in 1..=full {
        let low = set & set.wrapping_neg();
        let mut acc = z[set & !low];
        for p in &gas.polymers {
            let s = p.support as usize;
            if s & low != 0 && s & !set == 0 {
                acc += p.activity * z[set & !s];
            }
        }
        z[set] = acc;
    }
    z[full]
}

/// `Σ_{P ∋ root} |A(P)| e^{|P|}`; below one the expansion converges
/// absolutely.
pub fn convergence_condition(gas: &PolymerGas, root: usize) -> Result<f64> {
    ensure!(root < gas.num_monomers, Argument, "root {root} outside 0..{}", gas.num_monomers);
    Ok(gas
        .polymers
        .iter()
        .filter(|p| p.support >> root & 1 == 1)
        .map(|p| p.activity.norm() * (p.size() as f64).exp())
        .sum())
}

/// Largest [`convergence_condition`] over all roots.
pub fn convergence_ratio(gas: &PolymerGas) -> f64 {
    (0..gas.num_monomers)
        .map(|r| convergence_condition(gas, r).expect("root in range"))
        .fold(0.0, f64::max)
}

/// Heuristic size of the terms beyond `n_max`: `|monomers| r^{n_max+1}/(1-r)`
/// with `r` the [`convergence_ratio`]; `None` when `r ≥ 1`.
pub fn truncation_tail_estimate(gas: &PolymerGas, n_max: usize) -> Option<f64> {
    let r = convergence_ratio(gas);
    (r < 1.0).then(|| gas.num_monomers as f64 * r.powi(n_max as i32 + 1) / (1.0 - r))
}

/// Edge mask of the intersection graph of an ordered tuple, bits indexed
/// by [`pair_index`].
pub fn intersection_graph(tuple: &[Polymer]) -> u32 {
    let n = tuple.len();
    let mut mask = 0u32;
    for a in 0..n {
        for b in a + 1..n {
            if tuple[a].intersects(&tuple[b]) {
                mask |= 1 << pair_index(n, a, b);
            }
        }
    }
    mask
}

fn is_connected(n: usize, mask: u32) -> bool {
    let mut sets = DisjointSets::new(n);
    let mut parts = n;
    for a in 0..n {
        for b in a + 1..n {
            if mask >> pair_index(n, a, b) & 1 == 1 && sets.union(a, b) {
                parts -= 1;
            }
        }
    }
    parts <= 1
}

fn tree_mask(tree: &Forest) -> u32 {
    tree.edges().iter().fold(0, |m, &(a, b)| m | 1 << pair_index(tree.n(), a, b))
}

/// `∏_{ℓ ∉ T} (1 + η_ℓ X^T_ℓ(w))` for the intersection graph `graph`.
/// Each factor lies in `[0, 1]`.
pub fn interaction_factor(table: &PathTable, tree: &Forest, graph: u32, weights: &[f64]) -> f64 {
    let n = tree.n();
    let x = table.matrix(weights);
    let tree_edges = tree_mask(tree);
    let mut prod = 1.0;
    for a in 0..n {
        for b in a + 1..n {
            let bit = 1 << pair_index(n, a, b);
            if graph & bit != 0 && tree_edges & bit == 0 {
                prod *= 1.0 - x[(a, b)];
            }
        }
    }
    prod
}

/// `Σ_{T ⊆ G} ε^T` by cubature over the tree weights. The integrand is a
/// polynomial on each ordering cell, so the rule below is exact.
pub fn connected_weight(n: usize, graph: u32) -> Result<f64> {
    ensure!((1..=MAX_ORDER).contains(&n), Budget, "connected weights limited to n <= {MAX_ORDER}");
    if n == 1 {
        return Ok(1.0);
    }
    if !is_connected(n, graph) {
        return Ok(0.0);
    }
    let extra = graph.count_ones() as usize - (n - 1);
    // Degree per cell variable is at most `extra + n - 2`.
    let cubature = OrderedCubature::new(n - 1, (extra + n) / 2 + 1)?;
    let sign = if n % 2 == 0 { -1.0 } else { 1.0 };
    let mut total = 0.0;
    for tree in enumerate_trees(n)? {
        let edges = tree_mask(&tree);
        if edges & !graph != 0 {
            continue;
        }
        let table = PathTable::new(&tree);
        total += sign * cubature.integrate(|w| interaction_factor(&table, &tree, graph, w));
    }
    Ok(total)
}

/// The same weight as a signed count of connected spanning subgraphs,
/// `Σ_{H ⊆ G connected} (-1)^{|H|}`.
pub fn ursell_weight(n: usize, graph: u32) -> Result<i64> {
    ensure!((1..=MAX_ORDER).contains(&n), Budget, "Ursell weights limited to n <= {MAX_ORDER}");
    let bits: Vec<u32> = (0..32).filter(|b| graph >> b & 1 == 1).map(|b| 1 << b).collect();
    let mut total = 0i64;
    for sub in 0u32..1 << bits.len() {
        let h = bits.iter().enumerate().filter(|(i, _)| sub >> i & 1 == 1).fold(0, |m, (_, &b)| m | b);
        if is_connected(n, h) {
            total += if h.count_ones() % 2 == 0 { 1 } else { -1 };
        }
    }
    Ok(total)
}

/// Per-order contributions `(1/n!) Σ_{tuples} ∏A Σ_T ε^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct MayerExpansion {
    pub orders: Vec<Complex64>,
}

impl MayerExpansion {
    pub fn total(&self) -> Complex64 {
        self.orders.iter().sum()
    }

    pub fn partial_sums(&self) -> Vec<Complex64> {
        self.orders
            .iter()
            .scan(Complex64::new(0.0, 0.0), |acc, &x| {
                *acc += x;
                Some(*acc)
            })
            .collect()
    }
}

/// Activity totals per intersection graph over all ordered `n`-tuples.
fn graph_activities(gas: &PolymerGas, n: usize) -> Result<BTreeMap<u32, Complex64>> {
    let k = gas.polymers.len();
    let count = (k as u64).checked_pow(n as u32).unwrap_or(u64::MAX);
    ensure!(count <= MAX_TUPLES, Budget, "{k}^{n} ordered tuples exceed the budget of {MAX_TUPLES}");
    let mut out: HashMap<u32, ComplexKahanSum> = HashMap::new();
    if k == 0 {
        return Ok(BTreeMap::new());
    }
    let mut idx = vec![0usize; n];
    let mut tuple = vec![gas.polymers[0]; n];
    loop {
        let mut act = Complex64::new(1.0, 0.0);
        for (slot, &i) in tuple.iter_mut().zip(&idx) {
            *slot = gas.polymers[i];
            act *= slot.activity;
        }
        let g = intersection_graph(&tuple);
        if is_connected(n, g) {
            out.entry(g).or_insert_with(ComplexKahanSum::new).add(act);
        }
        if !crate::quadrature::advance_odometer(&mut idx, k) {
            break;
        }
    }
    Ok(out.into_iter().map(|(g, s)| (g, s.value())).collect())
}

/// Truncated Mayer series for `log Z` through order `n_max`.
pub fn mayer_logz(gas: &PolymerGas, n_max: usize) -> Result<MayerExpansion> {
    ensure!(n_max <= MAX_ORDER, Budget, "Mayer orders limited to n <= {MAX_ORDER}, got {n_max}");
    let mut orders = Vec::with_capacity(n_max);
    let mut factorial = 1.0;
    for n in 1..=n_max {
        factorial *= n as f64;
        let graphs = graph_activities(gas, n)?;
        let weights: Vec<Result<f64>> = graphs.keys().collect::<Vec<_>>().par_iter().map(|&&g| connected_weight(n, g)).collect();
        let mut acc = ComplexKahanSum::new();
        for ((_, act), w) in graphs.iter().zip(weights) {
            acc.add(act * w?);
        }
        orders.push(acc.value() / factorial);
    }
    Ok(MayerExpansion { orders })
}
