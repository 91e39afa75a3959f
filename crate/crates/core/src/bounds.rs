//! Numerical instances of the convergence bounds.
//!
//! Block bounds for the Bosonic Gaussian integrals (real and complex
//! coupling), the geometric series controlling `log Z`, the factorial chain
//! used to absorb tree counting, the `M` threshold, and the Borel disk.
//! Every quantity with factorial or `M^{q²}` growth is evaluated through its
//! logarithm.

use std::f64::consts::LN_2;

use num_bigint::{BigInt, BigUint};
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::combinatorics::Jungle;
use crate::error::{ensure, Result};
use crate::model::integer_partitions;

/// Distance from the Borel circle below which a point counts as on it.
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;

/// `k!!` exactly, with `0!! = 1`.
pub fn double_factorial(k: u64) -> BigUint {
    let mut out = BigUint::one();
    let mut i = k;
    while i > 1 {
        out *= i;
        i -= 2;
    }
    out
}

/// `ln((2m)!!) = m ln 2 + ln m!`.
pub fn ln_even_double_factorial(m: u64) -> f64 {
    m as f64 * LN_2 + ln_factorial(m)
}

fn ln_factorial(k: u64) -> f64 {
    ln_gamma(k as f64 + 1.0)
}

fn check_block(degrees: &[usize], slices: &[u32]) -> Result<()> {
    let size = degrees.len();
    ensure!(size >= 1, Argument, "a block has at least one vertex");
    ensure!(slices.len() == size, Argument, "{} slices for {} degrees", slices.len(), size);
    let total: usize = degrees.iter().sum();
    ensure!(
        total == 2 * size - 2,
        Argument,
        "degrees of a tree on {size} vertices sum to {}, got {total}",
        2 * size - 2
    );
    ensure!(size == 1 || degrees.iter().all(|&d| d >= 1), Argument, "a tree on {size} vertices has no isolated vertex");
    Ok(())
}

fn block_product(degrees: &[usize], slices: &[u32], lambda_abs: f64, base: f64) -> f64 {
    let mut prod = double_factorial(4 * degrees.len() as u64 - 4).to_f64().unwrap_or(f64::INFINITY).sqrt();
    for (&d, &j) in degrees.iter().zip(slices) {
        prod *= ln_factorial(d as u64).exp() * lambda_abs.powi(d as i32) * base.powf(-(j as f64 - 2.0));
    }
    prod
}

/// Real-coupling bound on one Bosonic block integral:
/// `√((4|B|-4)!!) ∏_a d_a! |λ|^{d_a} M^{-(j_a-2)}`.
pub fn real_block_bound(degrees: &[usize], slices: &[u32], lambda: f64, base: f64) -> Result<f64> {
    check_block(degrees, slices)?;
    ensure!(lambda.abs() <= 1.0, Argument, "real-coupling block bound needs |λ| <= 1, got {lambda}");
    Ok(block_product(degrees, slices, lambda.abs(), base))
}

fn singleton_bound(lambda_abs: f64, slice: u32, base: f64) -> f64 {
    lambda_abs * lambda_abs * base.powf(-(slice as f64 - 2.0))
}

/// Complex-coupling block bound. A single vertex gets `|λ|² M^{-(j-2)}`;
/// larger blocks the real bound times `(cos 2γ)^{-|B|/2}`.
pub fn complex_block_bound(degrees: &[usize], slices: &[u32], lambda: Complex64, base: f64) -> Result<f64> {
    check_block(degrees, slices)?;
    let cos2g = (2.0 * lambda.arg()).cos();
    ensure!(
        in_coupling_domain(lambda),
        Domain,
        "|λ|² = {} is not below cos 2γ = {cos2g}",
        lambda.norm_sqr()
    );
    if degrees.len() == 1 {
        return Ok(singleton_bound(lambda.norm(), slices[0], base));
    }
    Ok(cos2g.powf(-(degrees.len() as f64) / 2.0) * block_product(degrees, slices, lambda.norm(), base))
}

/// Per-term bound for a jungle term: `2^{#Fermionic edges}` times the block
/// bounds, singletons taking the `|λ|² M^{-(j-2)}` form.
pub fn assemble_term_bound(jungle: &Jungle, slices: &[u32], lambda: f64, base: f64) -> Result<f64> {
    ensure!(slices.len() == jungle.n(), Argument, "{} slices for {} vertices", slices.len(), jungle.n());
    let degrees = jungle.bosonic().degrees();
    let mut bound = 2f64.powi(jungle.fermionic().len() as i32);
    for block in jungle.blocks().blocks() {
        let d: Vec<usize> = block.iter().map(|&a| degrees[a]).collect();
        let j: Vec<u32> = block.iter().map(|&a| slices[a]).collect();
        bound *= if block.len() == 1 {
            ensure!(lambda.abs() <= 1.0, Argument, "real-coupling bound needs |λ| <= 1, got {lambda}");
            singleton_bound(lambda.abs(), j[0], base)
        } else {
            real_block_bound(&d, &j, lambda, base)?
        };
    }
    Ok(bound)
}

fn log_sum_exp(logs: &[f64]) -> f64 {
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + logs.iter().map(|&l| (l - max).exp()).sum::<f64>().ln()
}

/// Result of the geometric series controlling `log Z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesReport {
    /// `S = Σ_q |λ|^{2q-2} 3^{3q} q^q M^{-q²/4}`.
    pub ratio: f64,
    pub ln_ratio: f64,
    /// `Σ_{B ≤ B_max} S^B`.
    pub partial_sum: f64,
    pub ln_partial_sum: f64,
    /// `S < 1`.
    pub converges: bool,
}

/// Partial sum `Σ_{B=0}^{B_max} S^B` with `S` truncated at `q_max`.
pub fn geometric_bound_series(lambda_abs: f64, base: f64, q_max: u32, b_max: u32) -> Result<SeriesReport> {
    ensure!(base > 4.0, Argument, "M must exceed 4, got {base}");
    ensure!(q_max >= 1, Argument, "q_max must be at least 1");
    ensure!(lambda_abs >= 0.0, Argument, "|λ| must be nonnegative");
    let ln_m = base.ln();
    let ln_l = lambda_abs.ln();
    let logs: Vec<f64> = (1..=q_max)
        .filter(|&q| q == 1 || lambda_abs > 0.0)
        .map(|q| {
            let qf = q as f64;
            let power = if q == 1 { 0.0 } else { (2.0 * qf - 2.0) * ln_l };
            power + 3.0 * qf * 3f64.ln() + qf * qf.ln() - qf * qf / 4.0 * ln_m
        })
        .collect();
    let ln_ratio = log_sum_exp(&logs);
    let ratio = ln_ratio.exp();
    // ln Σ_{B=0}^{B_max} S^B, stable on both sides of S = 1.
    let powers: Vec<f64> = (0..=b_max).map(|b| b as f64 * ln_ratio).collect();
    let ln_partial_sum = log_sum_exp(&powers);
    Ok(SeriesReport {
        ratio,
        ln_ratio,
        partial_sum: ln_partial_sum.exp(),
        ln_partial_sum,
        converges: ratio < 1.0,
    })
}

/// Inner tail `Σ_{q ≤ q_max} |λ|^{2q-2} M^{-q/8}` against its geometric
/// limit `1 / (M^{1/8} - |λ|²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailReport {
    pub sum: f64,
    pub bound: f64,
    pub holds: bool,
}

pub fn tail_check(lambda_abs: f64, base: f64, q_max: u32) -> Result<TailReport> {
    let root = base.powf(0.125);
    let l2 = lambda_abs * lambda_abs;
    ensure!(root > l2, Domain, "M^(1/8) = {root} does not exceed |λ|² = {l2}");
    let mut acc = crate::quadrature::KahanSum::new();
    for q in (1..=q_max).rev() {
        let qf = q as f64;
        acc.add(((qf - 1.0) * l2.ln() - qf / 8.0 * base.ln()).exp());
    }
    let sum = if l2 == 0.0 { 1.0 / root } else { acc.value() };
    let bound = 1.0 / (root - l2);
    // The partial sums increase to the bound; allow for rounding only.
    Ok(TailReport { sum, bound, holds: sum <= bound * (1.0 + 8.0 * f64::EPSILON) })
}

/// One row of the factorial chain
/// `2/(q-1)! √((4q-4)!!) (3q-3)!/(2q-1)! ≤ 3^{3q} e^{-q} q^q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StirlingRow {
    pub q: u32,
    pub ln_lhs: f64,
    pub ln_rhs: f64,
    /// `ln_rhs - ln_lhs`; nonnegative when the inequality holds.
    pub margin: f64,
    pub holds: bool,
}

pub fn stirling_chain_check(q_range: std::ops::RangeInclusive<u32>) -> Result<Vec<StirlingRow>> {
    ensure!(*q_range.start() >= 1, Argument, "the chain starts at q = 1");
    Ok(q_range
        .map(|q| {
            let q64 = q as u64;
            let ln_lhs = LN_2 - ln_factorial(q64 - 1) + 0.5 * ln_even_double_factorial(2 * q64 - 2)
                + ln_factorial(3 * q64 - 3)
                - ln_factorial(2 * q64 - 1);
            let qf = q as f64;
            let ln_rhs = 3.0 * qf * 3f64.ln() - qf + qf * qf.ln();
            let margin = ln_rhs - ln_lhs;
            StirlingRow { q, ln_lhs, ln_rhs, margin, holds: margin >= 0.0 }
        })
        .collect())
}

/// `3^{3q} q^q M^{-q²/8}` for one `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub q: u32,
    pub ln_value: f64,
    pub value: f64,
    /// The value exceeds one.
    pub violated: bool,
}

pub fn m_threshold_check(base: f64, q_range: std::ops::RangeInclusive<u32>) -> Result<Vec<ThresholdRow>> {
    ensure!(base > 1.0, Argument, "M must exceed 1, got {base}");
    ensure!(*q_range.start() >= 1, Argument, "q starts at 1");
    Ok(q_range
        .map(|q| {
            let qf = q as f64;
            let ln_value = 3.0 * qf * 3f64.ln() + qf * qf.ln() - qf * qf / 8.0 * base.ln();
            let value = ln_value.exp();
            ThresholdRow { q, ln_value, value, violated: value > 1.0 }
        })
        .collect())
}

/// `|λ|² < cos 2γ`, `γ = arg λ`.
pub fn in_coupling_domain(lambda: Complex64) -> bool {
    lambda.norm_sqr() < (2.0 * lambda.arg()).cos()
}

/// `|g - ½| < ½`.
pub fn in_borel_disk(g: Complex64) -> bool {
    (g - 0.5).norm() < 0.5
}

/// `Re(1/g) ≥ 1`; undefined at `g = 0`.
pub fn reciprocal_condition(g: Complex64) -> Option<bool> {
    if g == Complex64::new(0.0, 0.0) {
        return None;
    }
    Some(g.inv().re >= 1.0)
}

/// Membership of `g` in the Borel disk. The interior test is strict; points
/// within [`BOUNDARY_TOLERANCE`] of the circle are flagged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BorelMembership {
    pub inside: bool,
    pub on_boundary: bool,
    /// `|g - ½| - ½`.
    pub signed_distance: f64,
}

pub fn borel_domain(g: Complex64) -> BorelMembership {
    let signed_distance = (g - 0.5).norm() - 0.5;
    BorelMembership {
        inside: in_borel_disk(g),
        on_boundary: signed_distance.abs() <= BOUNDARY_TOLERANCE,
        signed_distance,
    }
}

/// Smallest `Σ_{a∈B} j_a` over injective slice assignments:
/// `j_min |B| + |B|(|B|-1)/2`.
pub fn hardcore_slice_sum_floor(block_size: u64, j_min: u64) -> u64 {
    j_min * block_size + block_size * block_size.saturating_sub(1) / 2
}

/// `Σ n^{Σ B_q} / ∏_q B_q! q^{B_q}` over profiles `Σ q B_q = n`, exactly.
/// It is the coefficient of `x^n` in `(1 - x)^{-n}`, i.e. `C(2n-1, n)`.
pub fn profile_coefficient_sum(n: usize) -> Result<BigRational> {
    ensure!(n >= 1, Argument, "n must be positive");
    let mut total = BigRational::zero();
    for part in integer_partitions(n)? {
        let blocks: u32 = part.multiplicities.iter().sum();
        let mut denom = BigInt::one();
        for (idx, &m) in part.multiplicities.iter().enumerate() {
            let mf: BigInt = (1..=m as u64).map(BigInt::from).product();
            denom *= mf * num_traits::pow(BigInt::from(idx as u64 + 1), m as usize);
        }
        total += BigRational::new(num_traits::pow(BigInt::from(n as u64), blocks as usize), denom);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::{binomial, Forest};
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn double_factorials() {
        assert_eq!(double_factorial(0), BigUint::one());
        assert_eq!(double_factorial(4), BigUint::from(8u32));
        assert_eq!(double_factorial(7), BigUint::from(105u32));
        for m in 0..20u64 {
            let exact = double_factorial(2 * m).to_f64().unwrap();
            assert!(close(ln_even_double_factorial(m), exact.ln(), 1e-12));
        }
    }

    #[test]
    fn block_bounds() {
        assert!(close(real_block_bound(&[0], &[3], 0.7, 10.0).unwrap(), 0.1, 1e-15));
        let b = real_block_bound(&[1, 1], &[3, 4], 1.0, 10.0).unwrap();
        assert!(close(b, 8f64.sqrt() * 1e-3, 1e-14));
        assert_eq!(real_block_bound(&[1, 1], &[3, 4], 0.0, 10.0).unwrap(), 0.0);
        assert_eq!(real_block_bound(&[2, 1, 1], &[3, 4, 5], 0.0, 10.0).unwrap(), 0.0);
        assert!(real_block_bound(&[1, 0], &[3, 4], 0.5, 10.0).is_err());
        assert!(real_block_bound(&[2, 0], &[3, 4], 0.5, 10.0).is_err());
        assert!(real_block_bound(&[1, 1], &[3, 4], 1.5, 10.0).is_err());
    }

    #[test]
    fn complex_block_bounds() {
        let l = Complex64::from_polar(0.3, std::f64::consts::PI / 8.0);
        assert!(close(complex_block_bound(&[0], &[3], l, 10.0).unwrap(), 0.009, 1e-14));
        for lam in [0.1, 0.5, 0.9] {
            let d = [1, 2, 1];
            let j = [3, 4, 6];
            assert_eq!(
                complex_block_bound(&d, &j, Complex64::new(lam, 0.0), 10.0).unwrap(),
                real_block_bound(&d, &j, lam, 10.0).unwrap()
            );
        }
        let mut last = 0.0;
        for eps in [1e-1, 1e-2, 1e-3, 1e-4] {
            let gamma = std::f64::consts::FRAC_PI_4 - eps;
            let l = Complex64::from_polar(0.01, gamma);
            let b = complex_block_bound(&[1, 1], &[3, 4], l, 10.0).unwrap();
            assert!(b > last);
            last = b;
        }
        assert!(complex_block_bound(&[1, 1], &[3, 4], Complex64::from_polar(0.5, 0.8), 10.0).is_err());
    }

    #[test]
    fn term_bound_assembly() {
        let single = Jungle::new(Forest::empty(1), []).unwrap();
        assert!(close(assemble_term_bound(&single, &[4], 0.5, 10.0).unwrap(), 0.25e-2, 1e-14));
        let fermionic = Jungle::new(Forest::empty(2), [(0, 1)]).unwrap();
        let b = assemble_term_bound(&fermionic, &[3, 3], 0.5, 10.0).unwrap();
        assert!(close(b, 2.0 * 0.025 * 0.025, 1e-14));
        let b = assemble_term_bound(&single, &[3], 1.0, 10.0).unwrap();
        assert!(close(b, 0.1, 1e-14));
        let bosonic = Jungle::new(Forest::new(2, [(0, 1)]).unwrap(), []).unwrap();
        let b = assemble_term_bound(&bosonic, &[3, 3], 0.5, 10.0).unwrap();
        assert!(b.is_finite() && b > 0.0);
    }

    #[test]
    fn series_values() {
        let r = geometric_bound_series(0.0, 16.0, 10, 50).unwrap();
        assert!(close(r.ratio, 27.0 / 2.0, 1e-14));
        assert!(!r.converges);
        let r = geometric_bound_series(0.0, 1e8, 10, 200).unwrap();
        let s = 27.0 * 1e-2;
        assert!(close(r.ratio, s, 1e-14));
        assert!(close(r.partial_sum, 1.0 / (1.0 - s), 1e-12));
        let r = geometric_bound_series(1.0, 1e8, 1000, 100).unwrap();
        assert!(r.converges);
        let r = geometric_bound_series(1.0, 5.0, 1000, 10).unwrap();
        assert!(!r.converges && r.partial_sum.is_finite());
    }

    #[test]
    fn tail_at_large_base() {
        let t = tail_check(1.0, 1e8, 1000).unwrap();
        assert!(close(t.bound, 1.0 / 9.0, 1e-12));
        assert!(t.holds && t.bound <= 1.0);
        assert!(tail_check(2.0, 10.0, 10).is_err());
    }

    #[test]
    fn stirling_chain() {
        let rows = stirling_chain_check(1..=1000).unwrap();
        assert!(close(rows[0].ln_lhs.exp(), 2.0, 1e-13));
        assert!(close(rows[0].ln_rhs.exp(), 27.0 / std::f64::consts::E, 1e-13));
        assert!(close(rows[1].ln_lhs.exp(), 2.0 * 8f64.sqrt(), 1e-13));
        assert!(close(rows[1].ln_rhs.exp(), 729.0 * 4.0 * (-2f64).exp(), 1e-13));
        assert!(rows.iter().all(|r| r.holds));
        assert!(stirling_chain_check(0..=3).is_err());
    }

    #[test]
    fn thresholds() {
        let rows = m_threshold_check(1e8, 1..=2).unwrap();
        assert!(close(rows[0].value, 2.7, 1e-13) && rows[0].violated);
        assert!(close(rows[1].value, 0.2916, 1e-13) && !rows[1].violated);
        let rows = m_threshold_check(1e16, 1..=1).unwrap();
        assert!(close(rows[0].value, 0.27, 1e-13) && !rows[0].violated);
    }

    #[test]
    fn borel_examples() {
        assert!(in_coupling_domain(Complex64::new(0.9, 0.0)));
        assert!(in_coupling_domain(Complex64::new(-0.9, 0.0)));
        assert!(!in_coupling_domain(Complex64::from_polar(1e-3, std::f64::consts::FRAC_PI_4)));
        let edge = borel_domain(Complex64::new(0.5, 0.5));
        assert!(!edge.inside && edge.on_boundary);
        assert_eq!(reciprocal_condition(Complex64::new(0.5, 0.5)), Some(true));
        assert_eq!(reciprocal_condition(Complex64::new(0.0, 0.0)), None);
        assert!(borel_domain(Complex64::new(0.5, 0.0)).inside);
        assert!(!borel_domain(Complex64::new(1.2, 0.0)).inside);
        assert!(borel_domain(Complex64::new(0.5, 0.49)).inside);
    }

    #[test]
    fn hardcore_floor_matches_bruteforce() {
        for size in 1..=6u64 {
            for j_min in 1..=3u64 {
                // Injective assignments from a window of 8 slices.
                let window: Vec<u64> = (j_min..j_min + 8).collect();
                let mut best = u64::MAX;
                let mut idx = vec![0usize; size as usize];
                loop {
                    let mut seen = std::collections::BTreeSet::new();
                    if idx.iter().all(|&i| seen.insert(i)) {
                        best = best.min(idx.iter().map(|&i| window[i]).sum());
                    }
                    if !crate::quadrature::advance_odometer(&mut idx, window.len()) {
                        break;
                    }
                }
                assert_eq!(best, hardcore_slice_sum_floor(size, j_min));
            }
        }
    }

    #[test]
    fn profile_identity() {
        for n in 1..=8usize {
            let expected = BigRational::from_integer(BigInt::from(binomial(2 * n as u64 - 1, n as u64)));
            assert_eq!(profile_coefficient_sum(n).unwrap(), expected);
        }
    }

    proptest! {
        #[test]
        fn series_ratio_monotone(lam in 0.0f64..1.0, m in 5.0f64..1e6, dm in 1.0f64..100.0, dl in 0.001f64..0.5) {
            let base = geometric_bound_series(lam, m, 60, 5).unwrap().ratio;
            let bigger_m = geometric_bound_series(lam, m * (1.0 + dm), 60, 5).unwrap().ratio;
            let bigger_l = geometric_bound_series(lam + dl, m, 60, 5).unwrap().ratio;
            prop_assert!(bigger_m < base);
            prop_assert!(bigger_l >= base);
        }

        #[test]
        fn domain_predicates_agree(r in 1e-6f64..1.5, gamma in -3.1f64..3.1) {
            let l = Complex64::from_polar(r, gamma);
            let m = borel_domain(l * l);
            if !m.on_boundary && m.signed_distance.abs() > 1e-9 {
                prop_assert_eq!(in_coupling_domain(l), m.inside);
                prop_assert_eq!(reciprocal_condition(l * l), Some(m.inside));
            }
        }
    }
}
