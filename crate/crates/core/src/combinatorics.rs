//! Labeled trees, forests, set partitions and two-level jungles.
//!
//! Vertices are labeled `0..n`. Edges are stored as ordered pairs `(a, b)`
//! with `a < b`, sorted lexicographically.

use std::collections::BTreeMap;

use crate::error::{ensure, Result};
use crate::quadrature::advance_odometer;

pub const MAX_TREE_VERTICES: usize = 8;
pub const MAX_FOREST_VERTICES: usize = 8;
pub const MAX_JUNGLE_VERTICES: usize = 7;

pub type Edge = (usize, usize);

fn normalize(edge: Edge) -> Edge {
    if edge.0 < edge.1 {
        edge
    } else {
        (edge.1, edge.0)
    }
}

/// Union–find over `0..n` with path halving.
#[derive(Debug, Clone)]
pub struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the classes of `a` and `b`; `false` if they were already one.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Acyclic edge set on `n` labeled vertices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Forest {
    n: usize,
    edges: Vec<Edge>,
}

impl Forest {
    pub fn new(n: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut edges: Vec<Edge> = edges.into_iter().map(normalize).collect();
        edges.sort_unstable();
        let mut sets = DisjointSets::new(n);
        for &(a, b) in &edges {
            ensure!(b < n, Argument, "edge ({a}, {b}) out of range for {n} vertices");
            ensure!(a != b, Argument, "self-loop at vertex {a}");
            ensure!(sets.union(a, b), Argument, "edge ({a}, {b}) closes a cycle");
        }
        Ok(Self { n, edges })
    }

    pub fn empty(n: usize) -> Self {
        Self { n, edges: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn is_spanning_tree(&self) -> bool {
        self.n >= 1 && self.edges.len() == self.n - 1
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &(a, b) in &self.edges {
            d[a] += 1;
            d[b] += 1;
        }
        d
    }

    /// Connected components, each sorted, ordered by smallest vertex.
    pub fn components(&self) -> BlockPartition {
        let mut sets = DisjointSets::new(self.n);
        for &(a, b) in &self.edges {
            sets.union(a, b);
        }
        let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for v in 0..self.n {
            let r = sets.find(v);
            by_root.entry(r).or_default().push(v);
        }
        BlockPartition { blocks: by_root.into_values().collect() }
    }

    /// Indices (into [`Forest::edges`]) of the edges on the path from `from`
    /// to `to`, or `None` if they lie in different components.
    pub fn path_edges(&self, from: usize, to: usize) -> Option<Vec<usize>> {
        if from == to {
            return Some(Vec::new());
        }
        let mut adj = vec![Vec::new(); self.n];
        for (idx, &(a, b)) in self.edges.iter().enumerate() {
            adj[a].push((b, idx));
            adj[b].push((a, idx));
        }
        let mut via: Vec<Option<(usize, usize)>> = vec![None; self.n];
        let mut seen = vec![false; self.n];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(v) = stack.pop() {
            for &(u, idx) in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    via[u] = Some((v, idx));
                    stack.push(u);
                }
            }
        }
        if !seen[to] {
            return None;
        }
        let mut path = Vec::new();
        let mut cur = to;
        while let Some((prev, idx)) = via[cur] {
            path.push(idx);
            cur = prev;
        }
        path.reverse();
        Some(path)
    }
}

/// Partition of `0..n` into disjoint nonempty blocks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockPartition {
    blocks: Vec<Vec<usize>>,
}

impl BlockPartition {
    pub fn new(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n];
        let mut blocks: Vec<Vec<usize>> = blocks
            .into_iter()
            .map(|mut b| {
                b.sort_unstable();
                b
            })
            .collect();
        for b in &blocks {
            ensure!(!b.is_empty(), Argument, "empty block");
            for &v in b {
                ensure!(v < n, Argument, "vertex {v} out of range");
                ensure!(!seen[v], Argument, "vertex {v} appears in two blocks");
                seen[v] = true;
            }
        }
        ensure!(seen.iter().all(|&s| s), Argument, "blocks do not cover all {n} vertices");
        blocks.sort();
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn n(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    /// `block_of()[v]` is the index of the block holding `v`.
    pub fn block_of(&self) -> Vec<usize> {
        let mut out = vec![0; self.n()];
        for (i, b) in self.blocks.iter().enumerate() {
            for &v in b {
                out[v] = i;
            }
        }
        out
    }

    /// Size profile `q ↦ number of blocks of size q`.
    pub fn profile(&self) -> BTreeMap<usize, usize> {
        let mut out = BTreeMap::new();
        for b in &self.blocks {
            *out.entry(b.len()).or_insert(0) += 1;
        }
        out
    }
}

/// Two-level forest: a Bosonic forest plus Fermionic edges hooking its
/// components, with the union still acyclic.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Jungle {
    bosonic: Forest,
    fermionic: Vec<Edge>,
}

impl Jungle {
    pub fn new(bosonic: Forest, fermionic: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut fermionic: Vec<Edge> = fermionic.into_iter().map(normalize).collect();
        fermionic.sort_unstable();
        let n = bosonic.n();
        let union = bosonic.edges().iter().chain(&fermionic).copied();
        // Validates range and acyclicity of the union; a Fermionic edge inside
        // a Bosonic block would close a cycle, so block hooking follows.
        Forest::new(n, union)?;
        Ok(Self { bosonic, fermionic })
    }

    pub fn n(&self) -> usize {
        self.bosonic.n()
    }

    pub fn bosonic(&self) -> &Forest {
        &self.bosonic
    }

    pub fn fermionic(&self) -> &[Edge] {
        &self.fermionic
    }

    pub fn union(&self) -> Forest {
        Forest::new(self.n(), self.bosonic.edges().iter().chain(&self.fermionic).copied())
            .expect("validated at construction")
    }

    pub fn is_spanning(&self) -> bool {
        self.bosonic.num_edges() + self.fermionic.len() + 1 == self.n()
    }

    /// Bosonic blocks (components of the Bosonic forest).
    pub fn blocks(&self) -> BlockPartition {
        self.bosonic.components()
    }

    /// Fermionic edges expressed between block indices of [`Jungle::blocks`].
    pub fn block_edges(&self) -> Vec<Edge> {
        let block_of = self.blocks().block_of();
        self.fermionic.iter().map(|&(a, b)| normalize((block_of[a], block_of[b]))).collect()
    }
}

/// Decodes a Prüfer sequence over `0..n` (length `n - 2`) into a tree.
pub fn prufer_decode(n: usize, seq: &[usize]) -> Result<Forest> {
    ensure!(n >= 2, Argument, "Prüfer decoding needs n >= 2");
    ensure!(seq.len() == n - 2, Argument, "Prüfer sequence must have length n - 2");
    ensure!(seq.iter().all(|&v| v < n), Argument, "Prüfer entry out of range");
    let mut degree = vec![1usize; n];
    for &v in seq {
        degree[v] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &v in seq {
        let leaf = (0..n).find(|&u| degree[u] == 1).expect("a leaf always exists");
        edges.push((leaf, v));
        degree[leaf] -= 1;
        degree[v] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&u| degree[u] == 1).collect();
    edges.push((rest[0], rest[1]));
    Forest::new(n, edges)
}

/// Lazily yields every labeled spanning tree on `n` vertices, in Prüfer
/// sequence order.
pub fn enumerate_trees(n: usize) -> Result<impl Iterator<Item = Forest>> {
    ensure!(n >= 1, Argument, "tree enumeration needs n >= 1");
    ensure!(n <= MAX_TREE_VERTICES, Budget, "tree enumeration limited to n <= {MAX_TREE_VERTICES}");
    let len = n.saturating_sub(2);
    let mut seq = vec![0usize; len];
    let mut done = false;
    Ok(std::iter::from_fn(move || {
        if done {
            return None;
        }
        let tree = if n == 1 {
            Forest::empty(1)
        } else {
            prufer_decode(n, &seq).expect("valid sequence")
        };
        done = !advance_odometer(&mut seq, n);
        Some(tree)
    }))
}

/// Every acyclic edge subset of `K_n`, including the empty forest.
pub fn enumerate_forests(n: usize) -> Result<Vec<Forest>> {
    ensure!(n >= 1, Argument, "forest enumeration needs n >= 1");
    ensure!(
        n <= MAX_FOREST_VERTICES,
        Budget,
        "forest enumeration limited to n <= {MAX_FOREST_VERTICES}"
    );
    let all: Vec<Edge> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let mut out = Vec::new();
    fn rec(
        n: usize,
        all: &[Edge],
        idx: usize,
        sets: &DisjointSets,
        cur: &mut Vec<Edge>,
        out: &mut Vec<Forest>,
    ) {
        if idx == all.len() {
            out.push(Forest { n, edges: cur.clone() });
            return;
        }
        rec(n, all, idx + 1, sets, cur, out);
        let (a, b) = all[idx];
        let mut next = sets.clone();
        if next.union(a, b) {
            cur.push((a, b));
            rec(n, all, idx + 1, &next, cur, out);
            cur.pop();
        }
    }
    rec(n, &all, 0, &DisjointSets::new(n), &mut Vec::new(), &mut out);
    Ok(out)
}

/// Every jungle on `n` vertices (union a forest), or only the spanning ones
/// (union a spanning tree). Each union forest is expanded into its `2^E`
/// Bosonic/Fermionic colourings, Bosonic-heavy colourings first.
pub fn enumerate_jungles(n: usize, spanning: bool) -> Result<Box<dyn Iterator<Item = Jungle>>> {
    ensure!(n >= 1, Argument, "jungle enumeration needs n >= 1");
    ensure!(
        n <= MAX_JUNGLE_VERTICES,
        Budget,
        "jungle enumeration limited to n <= {MAX_JUNGLE_VERTICES}"
    );
    let unions: Box<dyn Iterator<Item = Forest>> = if spanning {
        Box::new(enumerate_trees(n)?)
    } else {
        Box::new(enumerate_forests(n)?.into_iter())
    };
    Ok(Box::new(unions.flat_map(|forest| {
        let e = forest.num_edges();
        (0..1u32 << e).map(move |mask| {
            let (mut bos, mut fer) = (Vec::new(), Vec::new());
            for (i, &edge) in forest.edges().iter().enumerate() {
                if mask >> i & 1 == 1 {
                    fer.push(edge);
                } else {
                    bos.push(edge);
                }
            }
            Jungle { bosonic: Forest { n: forest.n(), edges: bos }, fermionic: fer }
        })
    })))
}

/// Every set partition of `0..n`, in restricted-growth-string order.
pub fn enumerate_set_partitions(n: usize) -> Result<Vec<BlockPartition>> {
    ensure!(n <= 10, Budget, "set partition enumeration limited to n <= 10");
    let mut out = Vec::new();
    fn rec(v: usize, n: usize, blocks: &mut Vec<Vec<usize>>, out: &mut Vec<BlockPartition>) {
        if v == n {
            out.push(BlockPartition { blocks: blocks.clone() });
            return;
        }
        for i in 0..blocks.len() {
            blocks[i].push(v);
            rec(v + 1, n, blocks, out);
            blocks[i].pop();
        }
        blocks.push(vec![v]);
        rec(v + 1, n, blocks, out);
        blocks.pop();
    }
    rec(0, n, &mut Vec::new(), &mut out);
    Ok(out)
}

pub fn factorial(k: u64) -> u128 {
    (1..=k as u128).product()
}

pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k as u128 {
        acc = acc * (n as u128 - i) / (i + 1);
    }
    acc
}

/// Number of labeled trees on `q = degrees.len()` vertices with the given
/// degree sequence: `(q-2)! / ∏ (d_i - 1)!`.
pub fn count_trees_with_degrees(degrees: &[usize]) -> Result<u128> {
    let q = degrees.len();
    ensure!(q >= 2, Argument, "degree sequences need at least two vertices");
    ensure!(degrees.iter().all(|&d| d >= 1), Argument, "every degree must be at least 1");
    let sum: usize = degrees.iter().sum();
    ensure!(sum == 2 * q - 2, Argument, "degrees sum to {sum}, expected {}", 2 * q - 2);
    let denom: u128 = degrees.iter().map(|&d| factorial(d as u64 - 1)).product();
    Ok(factorial(q as u64 - 2) / denom)
}

/// Number of set partitions of `0..n` with `profile[q]` blocks of size `q`:
/// `n! / ∏ m_q! (q!)^{m_q}`.
pub fn count_partitions_by_profile(n: usize, profile: &BTreeMap<usize, usize>) -> Result<u128> {
    ensure!(!profile.contains_key(&0), Argument, "blocks of size 0 are not allowed");
    let total: usize = profile.iter().map(|(q, m)| q * m).sum();
    ensure!(total == n, Argument, "profile covers {total} vertices, expected {n}");
    ensure!(n <= 30, Budget, "profile counts limited to n <= 30");
    let mut denom: u128 = 1;
    for (&q, &m) in profile {
        denom *= factorial(m as u64) * factorial(q as u64).pow(m as u32);
    }
    Ok(factorial(n as u64) / denom)
}

/// `n^{n-2}`, with the value 1 at `n = 1`.
pub fn cayley(n: u64) -> u128 {
    if n <= 1 {
        1
    } else {
        (n as u128).pow(n as u32 - 2)
    }
}

/// Exact number of spanning two-level trees on `n` vertices,
/// `2^{n-1} n^{n-2}`.
pub fn count_two_level_trees(n: u64) -> u128 {
    assert!(n >= 1);
    (1u128 << (n - 1)) * cayley(n)
}

/// Upper bound `2^{2n} n^{n-2}` on the number of two-level trees.
pub fn two_level_tree_bound(n: u64) -> u128 {
    (1u128 << (2 * n)) * cayley(n)
}

/// Number of detailed Fermionic trees hooking the blocks of `partition`
/// into a tree: `n^{|P|-2} ∏ |B|`; one for a single block.
pub fn fermionic_forest_weight(partition: &BlockPartition) -> u128 {
    let k = partition.len();
    if k <= 1 {
        return 1;
    }
    let n = partition.n() as u128;
    let prod: u128 = partition.blocks().iter().map(|b| b.len() as u128).product();
    n.pow(k as u32 - 2) * prod
}

/// `Σ_{d_a ≥ 1, Σ d_a = 2b - 2} ∏ d_a` by direct enumeration of
/// compositions.
pub fn coordination_sum_bruteforce(b: usize) -> u128 {
    if b == 1 {
        return 1;
    }
    fn rec(slots: usize, remaining: usize) -> u128 {
        if slots == 1 {
            return remaining as u128;
        }
        (1..=remaining + 1 - slots).map(|d| d as u128 * rec(slots - 1, remaining - d)).sum()
    }
    rec(b, 2 * b - 2)
}

/// Closed form `C(3b - 3, b - 2)` of [`coordination_sum_bruteforce`].
pub fn coordination_sum(b: usize) -> u128 {
    if b == 1 {
        return 1;
    }
    binomial(3 * b as u64 - 3, b as u64 - 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn profile(pairs: &[(usize, usize)]) -> BTreeMap<usize, usize> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn tree_counts() {
        assert_eq!(enumerate_trees(1).unwrap().count(), 1);
        assert_eq!(enumerate_trees(2).unwrap().count(), 1);
        assert_eq!(enumerate_trees(4).unwrap().count(), 16);
        for n in 2..=7 {
            let trees: HashSet<Forest> = enumerate_trees(n).unwrap().collect();
            assert_eq!(trees.len() as u128, cayley(n as u64), "n = {n}");
            assert!(trees.iter().all(|t| t.is_spanning_tree()));
            assert!(trees.iter().all(|t| t.degrees().iter().sum::<usize>() == 2 * n - 2));
        }
        assert!(enumerate_trees(9).is_err());
        assert!(enumerate_trees(0).is_err());
    }

    #[test]
    fn forest_counts() {
        let expected = [1usize, 2, 7, 38, 291, 2932, 36961];
        for (i, &count) in expected.iter().enumerate() {
            let forests = enumerate_forests(i + 1).unwrap();
            assert_eq!(forests.len(), count);
            let unique: HashSet<_> = forests.iter().collect();
            assert_eq!(unique.len(), count);
        }
        assert!(enumerate_forests(9).is_err());
    }

    #[test]
    fn jungle_counts() {
        let one: Vec<_> = enumerate_jungles(1, true).unwrap().collect();
        assert_eq!(one.len(), 1);
        assert!(one[0].bosonic().edges().is_empty() && one[0].fermionic().is_empty());
        assert_eq!(enumerate_jungles(2, true).unwrap().count(), 2);
        assert_eq!(enumerate_jungles(4, true).unwrap().count(), 128);
        for n in 1..=6 {
            assert_eq!(
                enumerate_jungles(n, true).unwrap().count() as u128,
                count_two_level_trees(n as u64)
            );
        }
        // Non-spanning: Σ_F 2^{|F|}.
        let non_spanning: usize = enumerate_forests(4).unwrap().iter().map(|f| 1 << f.num_edges()).sum();
        assert_eq!(enumerate_jungles(4, false).unwrap().count(), non_spanning);
        assert!(enumerate_jungles(8, true).is_err());
    }

    #[test]
    fn jungle_closure() {
        for jungle in enumerate_jungles(5, true).unwrap() {
            assert!(jungle.is_spanning());
            let blocks = jungle.blocks();
            let block_tree = Forest::new(blocks.len(), jungle.block_edges()).unwrap();
            assert!(block_tree.is_spanning_tree());
        }
    }

    #[test]
    fn jungle_rejects_internal_fermionic_edge() {
        let bos = Forest::new(3, [(0, 1), (1, 2)]).unwrap();
        assert!(Jungle::new(bos, [(0, 2)]).is_err());
    }

    #[test]
    fn degree_sequence_examples() {
        assert_eq!(count_trees_with_degrees(&[1, 1]).unwrap(), 1);
        assert_eq!(count_trees_with_degrees(&[2, 1, 1]).unwrap(), 1);
        assert_eq!(count_trees_with_degrees(&[3, 1, 1, 1]).unwrap(), 1);
        assert!(count_trees_with_degrees(&[2, 2, 1]).is_err());
        assert!(count_trees_with_degrees(&[0, 2]).is_err());
    }

    #[test]
    fn degree_sequences_match_enumeration() {
        for n in 2..=7 {
            let mut counts: BTreeMap<Vec<usize>, u128> = BTreeMap::new();
            for t in enumerate_trees(n).unwrap() {
                *counts.entry(t.degrees()).or_insert(0) += 1;
            }
            for (degrees, count) in counts {
                assert_eq!(count_trees_with_degrees(&degrees).unwrap(), count);
            }
        }
    }

    #[test]
    fn profile_examples() {
        assert_eq!(count_partitions_by_profile(2, &profile(&[(2, 1)])).unwrap(), 1);
        assert_eq!(count_partitions_by_profile(3, &profile(&[(1, 1), (2, 1)])).unwrap(), 3);
        assert_eq!(count_partitions_by_profile(4, &profile(&[(2, 2)])).unwrap(), 3);
        assert!(count_partitions_by_profile(4, &profile(&[(2, 1)])).is_err());
    }

    #[test]
    fn profiles_match_enumeration() {
        for n in 1..=8 {
            let mut counts: BTreeMap<BTreeMap<usize, usize>, u128> = BTreeMap::new();
            for p in enumerate_set_partitions(n).unwrap() {
                *counts.entry(p.profile()).or_insert(0) += 1;
            }
            for (prof, count) in counts {
                assert_eq!(count_partitions_by_profile(n, &prof).unwrap(), count);
            }
        }
        let bell = [1, 1, 2, 5, 15, 52, 203, 877, 4140];
        for (n, &b) in bell.iter().enumerate() {
            assert_eq!(enumerate_set_partitions(n).unwrap().len(), b);
        }
    }

    #[test]
    fn two_level_tree_examples() {
        assert_eq!(count_two_level_trees(2), 2);
        assert_eq!(count_two_level_trees(3), 12);
        assert_eq!(count_two_level_trees(5), 2000);
        for n in 1..=20 {
            assert!(count_two_level_trees(n) <= two_level_tree_bound(n));
        }
    }

    /// Counts size-(|P|-1) sets of inter-block vertex pairs that connect the
    /// blocks, without building block-level trees first.
    fn detailed_trees_bruteforce(p: &BlockPartition) -> u128 {
        let n = p.n();
        let block_of = p.block_of();
        let pairs: Vec<Edge> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .filter(|&(a, b)| block_of[a] != block_of[b])
            .collect();
        let k = p.len() - 1;
        let mut count = 0;
        let mut choose = vec![0usize; k];
        fn rec(
            start: usize,
            depth: usize,
            pairs: &[Edge],
            choose: &mut Vec<usize>,
            block_of: &[usize],
            nblocks: usize,
            count: &mut u128,
        ) {
            if depth == choose.len() {
                let mut sets = DisjointSets::new(nblocks);
                if choose.iter().all(|&i| sets.union(block_of[pairs[i].0], block_of[pairs[i].1])) {
                    *count += 1;
                }
                return;
            }
            for i in start..pairs.len() {
                choose[depth] = i;
                rec(i + 1, depth + 1, pairs, choose, block_of, nblocks, count);
            }
        }
        rec(0, 0, &pairs, &mut choose, &block_of, p.len(), &mut count);
        count
    }

    #[test]
    fn fermionic_weight_examples() {
        let p = BlockPartition::new(2, vec![vec![0], vec![1]]).unwrap();
        assert_eq!(fermionic_forest_weight(&p), 1);
        let p = BlockPartition::new(3, vec![vec![0, 1], vec![2]]).unwrap();
        assert_eq!(fermionic_forest_weight(&p), 2);
        let p = BlockPartition::new(3, vec![vec![0], vec![1], vec![2]]).unwrap();
        assert_eq!(fermionic_forest_weight(&p), 3);
        let p = BlockPartition::new(3, vec![vec![0, 1, 2]]).unwrap();
        assert_eq!(fermionic_forest_weight(&p), 1);
    }

    #[test]
    fn fermionic_weight_matches_enumeration() {
        for n in 1..=6 {
            for p in enumerate_set_partitions(n).unwrap() {
                if p.len() >= 2 {
                    assert_eq!(fermionic_forest_weight(&p), detailed_trees_bruteforce(&p), "{p:?}");
                }
            }
        }
    }

    #[test]
    fn coordination_sum_identity() {
        assert_eq!(coordination_sum_bruteforce(3), 6);
        for b in 1..=8 {
            assert_eq!(coordination_sum_bruteforce(b), coordination_sum(b), "b = {b}");
        }
    }

    #[test]
    fn path_edges_in_forest() {
        let f = Forest::new(4, [(0, 1), (1, 2)]).unwrap();
        assert_eq!(f.path_edges(0, 2).unwrap().len(), 2);
        assert_eq!(f.path_edges(2, 2).unwrap(), Vec::<usize>::new());
        assert!(f.path_edges(0, 3).is_none());
    }

    proptest! {
        #[test]
        fn prufer_decoding_is_injective(seq in proptest::collection::vec(0usize..6, 4)) {
            let t = prufer_decode(6, &seq).unwrap();
            prop_assert!(t.is_spanning_tree());
            // Degree of v is one plus its multiplicity in the sequence.
            let d = t.degrees();
            for v in 0..6 {
                prop_assert_eq!(d[v], 1 + seq.iter().filter(|&&x| x == v).count());
            }
        }
    }
}
