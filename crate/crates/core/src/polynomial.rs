//! Sparse multivariate polynomials with exact Gaussian moments.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;

use crate::error::{ensure, Result};

/// `Σ coeff · ∏ x_k^{e_k}`, keyed by exponent vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Self { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    /// The coordinate `x_k`.
    pub fn variable(nvars: usize, k: usize) -> Self {
        let mut e = vec![0; nvars];
        e[k] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(e, 1.0);
        p
    }

    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Vec<u32>, f64)>) -> Result<Self> {
        let mut p = Self::zero(nvars);
        for (e, c) in terms {
            ensure!(e.len() == nvars, Argument, "exponent vector has wrong length");
            p.add_term(e, c);
        }
        Ok(p)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &f64)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    fn add_term(&mut self, e: Vec<u32>, c: f64) {
        if c == 0.0 {
            return;
        }
        let sum = self.terms.get(&e).copied().unwrap_or(0.0) + c;
        if sum == 0.0 {
            self.terms.remove(&e);
        } else {
            self.terms.insert(e, sum);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, &c) in &other.terms {
            out.add_term(e.clone(), c);
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, &c) in &self.terms {
            out.add_term(e.clone(), c * s);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e1, &c1) in &self.terms {
            for (e2, &c2) in &other.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                out.add_term(e, c1 * c2);
            }
        }
        out
    }

    pub fn derivative(&self, k: usize) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, &c) in &self.terms {
            if e[k] > 0 {
                let mut d = e.clone();
                d[k] -= 1;
                out.add_term(d, c * e[k] as f64);
            }
        }
        out
    }

    /// Re-indexes into a larger variable space: variable `k` becomes
    /// `offset + k`.
    pub fn embed(&self, nvars: usize, offset: usize) -> Self {
        let mut out = Self::zero(nvars);
        for (e, &c) in &self.terms {
            let mut big = vec![0; nvars];
            big[offset..offset + self.nvars].copy_from_slice(e);
            out.add_term(big, c);
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, &c)| c * e.iter().zip(x).map(|(&k, &v)| v.powi(k as i32)).product::<f64>())
            .sum()
    }

    /// `E[p(x)]` for centred Gaussian `x` with covariance `cov`, by Wick's
    /// theorem.
    pub fn gaussian_expectation(&self, cov: &DMatrix<f64>) -> Result<f64> {
        ensure!(
            cov.nrows() == self.nvars && cov.ncols() == self.nvars,
            Argument,
            "covariance dimension does not match the polynomial"
        );
        let mut memo = HashMap::new();
        Ok(self.terms.iter().map(|(e, &c)| c * wick_moment(e, cov, &mut memo)).sum())
    }
}

/// `E[∏ x_k^{e_k}]` through `E[x_a F] = Σ_b C_ab E[∂_b F]`.
pub fn wick_moment(e: &[u32], cov: &DMatrix<f64>, memo: &mut HashMap<Vec<u32>, f64>) -> f64 {
    let total: u32 = e.iter().sum();
    if total == 0 {
        return 1.0;
    }
    if total % 2 == 1 {
        return 0.0;
    }
    if let Some(&v) = memo.get(e) {
        return v;
    }
    let a = e.iter().position(|&k| k > 0).unwrap();
    let mut rest = e.to_vec();
    rest[a] -= 1;
    let mut acc = 0.0;
    for b in 0..e.len() {
        if rest[b] == 0 || cov[(a, b)] == 0.0 {
            continue;
        }
        let mult = rest[b] as f64;
        rest[b] -= 1;
        acc += cov[(a, b)] * mult * wick_moment(&rest, cov, memo);
        rest[b] += 1;
    }
    memo.insert(e.to_vec(), acc);
    acc
}
