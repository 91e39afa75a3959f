//! The quartic vector toy model in its intermediate-field form.
//!
//! The propagator `1/p`, `p = 1..=N`, is cut into slices
//! `I_j = [M^{j-1}, M^j - 1]`. Each slice carries the interaction
//! `V_j(σ) = Σ_{p∈I_j} log₂(1 - iλσ/p)` with the subtracted logarithm
//! `log₂(1 - x) = x + log(1 - x)`, and `W_j = e^{-V_j} - 1`.

use std::sync::OnceLock;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{ensure, MlveError, Result};
use crate::quadrature::{ComplexKahanSum, KahanSum};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Coupling, slice base and slice window of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub lambda: Complex64,
    pub base: u64,
    pub j_min: u32,
    pub j_max: u32,
}

impl ModelParams {
    pub fn new(lambda: Complex64, base: u64, j_min: u32, j_max: u32) -> Result<Self> {
        ensure!(base >= 2, Argument, "slice base must be at least 2, got {base}");
        ensure!(j_min >= 1, Argument, "j_min must be at least 1, got {j_min}");
        ensure!(j_max >= j_min, Argument, "j_max ({j_max}) must be >= j_min ({j_min})");
        ensure!(
            base.checked_pow(j_max).is_some(),
            Argument,
            "cutoff {base}^{j_max} overflows 64 bits"
        );
        ensure!(lambda.re.is_finite() && lambda.im.is_finite(), Argument, "coupling must be finite");
        Ok(Self { lambda, base, j_min, j_max })
    }

    /// Real-coupling shorthand.
    pub fn real(lambda: f64, base: u64, j_min: u32, j_max: u32) -> Result<Self> {
        Self::new(Complex64::new(lambda, 0.0), base, j_min, j_max)
    }

    pub fn with_lambda(&self, lambda: Complex64) -> Self {
        Self { lambda, ..*self }
    }

    /// Ultraviolet cutoff `N = M^{j_max} - 1`.
    pub fn cutoff(&self) -> u64 {
        self.base.pow(self.j_max) - 1
    }

    /// Lowest propagator index covered by the window, `M^{j_min - 1}`.
    pub fn first_index(&self) -> u64 {
        self.base.pow(self.j_min - 1)
    }

    /// Coupling phase `γ = arg λ`.
    pub fn gamma(&self) -> f64 {
        self.lambda.arg()
    }

    /// `g = λ²`.
    pub fn g(&self) -> Complex64 {
        self.lambda * self.lambda
    }

    pub fn slice_labels(&self) -> std::ops::RangeInclusive<u32> {
        self.j_min..=self.j_max
    }

    pub fn num_slices(&self) -> usize {
        (self.j_max - self.j_min + 1) as usize
    }

    pub fn slice(&self, j: u32) -> Result<SliceIndexSet> {
        ensure!(
            (self.j_min..=self.j_max).contains(&j),
            Argument,
            "slice {j} outside window [{}, {}]",
            self.j_min,
            self.j_max
        );
        slice_range(self.base, j)
    }
}

/// The integer window `I_j = [M^{j-1}, M^j - 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SliceIndexSet {
    pub j: u32,
    pub lo: u64,
    pub hi: u64,
}

impl SliceIndexSet {
    pub fn len(&self) -> u64 {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, p: u64) -> bool {
        (self.lo..=self.hi).contains(&p)
    }

    /// Indices in descending order, the summation order used for all
    /// slice sums.
    pub fn descending(&self) -> impl Iterator<Item = u64> {
        (self.lo..=self.hi).rev()
    }
}

pub fn slice_range(base: u64, j: u32) -> Result<SliceIndexSet> {
    ensure!(base >= 2, Argument, "slice base must be at least 2, got {base}");
    ensure!(j >= 1, Argument, "slice label must be at least 1, got {j}");
    let hi = base
        .checked_pow(j)
        .ok_or_else(|| MlveError::Argument(format!("{base}^{j} overflows 64 bits")))?;
    Ok(SliceIndexSet { j, lo: base.pow(j - 1), hi: hi - 1 })
}

/// `-log₂(1 - x) = Σ_{k≥2} x^k / k`, accurate for all `x ≠ 1`.
fn neg_log2m(x: Complex64) -> Complex64 {
    if x.norm() < 0.125 {
        // 24 terms reach 8^-24 relative to the leading x²/2.
        let mut pow = x * x;
        let mut acc = Complex64::zero();
        for k in 2..26 {
            acc += pow / k as f64;
            pow *= x;
        }
        acc
    } else {
        -(x + (Complex64::new(1.0, 0.0) - x).ln())
    }
}

/// Subtracted logarithm: returns `log₂(1 - x) = x + log(1 - x)` (principal
/// branch).
pub fn log2m(x: Complex64) -> Result<Complex64> {
    ensure!(x != Complex64::new(1.0, 0.0), Domain, "log2m is singular at x = 1");
    Ok(-neg_log2m(x))
}

/// Harmonic number `L_N = Σ_{p=1}^N 1/p`.
pub fn self_loop_sum(n: u64) -> f64 {
    let mut acc = KahanSum::new();
    for p in (1..=n).rev() {
        acc.add(1.0 / p as f64);
    }
    acc.value()
}

/// `Σ_{p∈I_j} p^{-t}`.
pub fn power_sum(params: &ModelParams, j: u32, t: f64) -> Result<f64> {
    ensure!(t >= 1.0, Argument, "power_sum needs t >= 1, got {t}");
    let slice = params.slice(j)?;
    let mut acc = KahanSum::new();
    for p in slice.descending() {
        acc.add((p as f64).powf(-t));
    }
    Ok(acc.value())
}

/// Upper bound `M^j / M^{t(j-1)}` satisfied by [`power_sum`].
pub fn power_sum_bound(params: &ModelParams, j: u32, t: f64) -> f64 {
    let m = params.base as f64;
    m.powf(j as f64 - t * (j as f64 - 1.0))
}

fn check_pole(lambda: Complex64, sigma: Complex64, p: u64) -> Result<Complex64> {
    let x = I * lambda * sigma / p as f64;
    ensure!(
        (Complex64::new(1.0, 0.0) - x).norm() > 0.0,
        Domain,
        "pole of the slice logarithm at p = {p}"
    );
    Ok(x)
}

/// `V_j(σ)`.
///
/// Every argument `1 - iλσ/p` is required to have positive real part so
/// that the principal logarithm is continuous along the whole slice; this
/// always holds for real `λσ`.
pub fn v_kernel(params: &ModelParams, j: u32, sigma: Complex64) -> Result<Complex64> {
    let slice = params.slice(j)?;
    let mut acc = ComplexKahanSum::new();
    for p in slice.descending() {
        let x = check_pole(params.lambda, sigma, p)?;
        ensure!(
            1.0 - x.re > 0.0,
            BranchCut,
            "1 - iλσ/p leaves the right half-plane at p = {p}"
        );
        acc.add(-neg_log2m(x));
    }
    Ok(acc.value())
}

/// `e^z - 1` without cancellation for small `z`.
pub fn complex_expm1(z: Complex64) -> Complex64 {
    let (s, c) = z.im.sin_cos();
    let half = (0.5 * z.im).sin();
    Complex64::new(z.re.exp_m1() * c - 2.0 * half * half, z.re.exp() * s)
}

/// `W_j(σ) = e^{-V_j(σ)} - 1`.
///
/// Unlike [`v_kernel`], the exponential is single valued, so no branch
/// guard is applied here; only poles are rejected.
pub fn w_kernel(params: &ModelParams, j: u32, sigma: Complex64) -> Result<Complex64> {
    let slice = params.slice(j)?;
    Ok(complex_expm1(neg_v_direct(params.lambda, slice, sigma)?))
}

/// `W_j` from the product `∏_{p∈I_j} e^{-iλσ/p}/(1 - iλσ/p) - 1`.
pub fn w_kernel_product(params: &ModelParams, j: u32, sigma: Complex64) -> Result<Complex64> {
    let slice = params.slice(j)?;
    let mut prod = Complex64::new(1.0, 0.0);
    for p in slice.descending() {
        let x = check_pole(params.lambda, sigma, p)?;
        prod *= (-x).exp() / (Complex64::new(1.0, 0.0) - x);
    }
    Ok(prod - 1.0)
}

fn neg_v_direct(lambda: Complex64, slice: SliceIndexSet, sigma: Complex64) -> Result<Complex64> {
    let mut acc = ComplexKahanSum::new();
    for p in slice.descending() {
        acc.add(neg_log2m(check_pole(lambda, sigma, p)?));
    }
    Ok(acc.value())
}

fn factorial_f64(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn neg_v_derivative_direct(
    lambda: Complex64,
    slice: SliceIndexSet,
    k: usize,
    sigma: Complex64,
) -> Result<Complex64> {
    let il = I * lambda;
    let mut acc = ComplexKahanSum::new();
    if k == 1 {
        for p in slice.descending() {
            check_pole(lambda, sigma, p)?;
            let pf = p as f64;
            acc.add(-lambda * lambda * sigma / (pf * (pf - il * sigma)));
        }
        return Ok(acc.value());
    }
    let ilk = il.powu(k as u32);
    for p in slice.descending() {
        check_pole(lambda, sigma, p)?;
        acc.add(ilk / (p as f64 - il * sigma).powu(k as u32));
    }
    Ok(acc.value() * factorial_f64(k - 1))
}

/// `k`-th σ-derivative of `-V_j`, `k ≥ 1`, from the closed forms
/// `∂(-V) = Σ -λ²σ / (p(p - iλσ))` and
/// `∂^k(-V) = (k-1)! Σ (iλ)^k / (p - iλσ)^k`.
pub fn dv_derivative(params: &ModelParams, j: u32, k: usize, sigma: Complex64) -> Result<Complex64> {
    ensure!(k >= 1, Argument, "dv_derivative needs k >= 1");
    let slice = params.slice(j)?;
    neg_v_derivative_direct(params.lambda, slice, k, sigma)
}

/// `q`-th σ-derivative of `W_j`, assembled with Faà di Bruno's formula.
pub fn dw_derivative(params: &ModelParams, j: u32, q: usize, sigma: Complex64) -> Result<Complex64> {
    let slice = params.slice(j)?;
    let mut derivs = vec![Complex64::zero(); q + 1];
    derivs[0] = neg_v_direct(params.lambda, slice, sigma)?;
    for (k, d) in derivs.iter_mut().enumerate().skip(1) {
        *d = neg_v_derivative_direct(params.lambda, slice, k, sigma)?;
    }
    let mut out = vec![Complex64::zero(); q + 1];
    assemble_w_derivatives(&derivs, &mut out);
    Ok(out[q])
}

/// Given `[-V, ∂(-V), …, ∂^q(-V)]`, fills `out[r] = ∂^r W` for `r ≤ q`.
fn assemble_w_derivatives(neg_v: &[Complex64], out: &mut [Complex64]) {
    out[0] = complex_expm1(neg_v[0]);
    let e = neg_v[0].exp();
    for (r, slot) in out.iter_mut().enumerate().skip(1) {
        let mut acc = Complex64::zero();
        for part in cached_partitions(r) {
            let mut term = Complex64::new(part.coefficient as f64, 0.0);
            for (idx, &m) in part.multiplicities.iter().enumerate() {
                if m > 0 {
                    term *= neg_v[idx + 1].powu(m);
                }
            }
            acc += term;
        }
        *slot = e * acc;
    }
}

/// Partition of an integer `q` recorded as multiplicities:
/// `multiplicities[k-1] = m_k`, with `Σ k m_k = q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegerPartition {
    pub multiplicities: Vec<u32>,
    /// Faà di Bruno weight `q! / ∏ m_k! (k!)^{m_k}`.
    pub coefficient: u128,
}

impl IntegerPartition {
    /// Parts in non-increasing order.
    pub fn parts(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (idx, &m) in self.multiplicities.iter().enumerate().rev() {
            out.extend(std::iter::repeat(idx + 1).take(m as usize));
        }
        out
    }
}

fn factorial_u128(k: u32) -> u128 {
    (1..=k as u128).product()
}

/// All partitions of `q` in lexicographic order of their non-increasing part
/// lists (`1+1+…+1` first, `q` last). Weights are exact for `q ≤ 30`.
pub fn integer_partitions(q: usize) -> Result<Vec<IntegerPartition>> {
    ensure!(q <= 30, Budget, "partitions limited to q <= 30, got {q}");
    let mut lists = Vec::new();
    fn rec(remaining: usize, max_part: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if remaining == 0 {
            out.push(cur.clone());
            return;
        }
        for part in 1..=remaining.min(max_part) {
            cur.push(part);
            rec(remaining - part, part, cur, out);
            cur.pop();
        }
    }
    rec(q, q, &mut Vec::new(), &mut lists);
    lists.sort();
    let qf = factorial_u128(q as u32);
    Ok(lists
        .into_iter()
        .map(|parts| {
            let mut multiplicities = vec![0u32; q];
            for p in parts {
                multiplicities[p - 1] += 1;
            }
            let mut denom: u128 = 1;
            for (idx, &m) in multiplicities.iter().enumerate() {
                denom *= factorial_u128(m) * factorial_u128(idx as u32 + 1).pow(m);
            }
            IntegerPartition { multiplicities, coefficient: qf / denom }
        })
        .collect())
}

const PARTITION_CACHE: usize = 12;

fn cached_partitions(q: usize) -> &'static [IntegerPartition] {
    static CACHE: OnceLock<Vec<Vec<IntegerPartition>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| {
        (0..=PARTITION_CACHE)
            .map(|q| integer_partitions(q).expect("within budget"))
            .collect()
    });
    assert!(q <= PARTITION_CACHE, "derivative order {q} beyond {PARTITION_CACHE}");
    &cache[q]
}

/// `Σ_{Σ k m_k = d} 1 / ∏ m_k! k^{m_k}`, exactly. Equals one for every
/// `d ≥ 1` (the coefficient of `x^d` in `exp(-log(1 - x))`).
pub fn partition_weight_sum(d: usize) -> Result<BigRational> {
    let mut total = BigRational::zero();
    for part in integer_partitions(d)? {
        let mut denom = BigInt::one();
        for (idx, &m) in part.multiplicities.iter().enumerate() {
            let k = BigInt::from(idx as u64 + 1);
            denom *= BigInt::from(factorial_u128(m)) * num_traits::pow(k, m as usize);
        }
        total += BigRational::new(BigInt::one(), denom);
    }
    Ok(total)
}

/// Largest derivative order a [`SliceKernel`] evaluates.
pub const MAX_KERNEL_ORDER: usize = PARTITION_CACHE;

const SERIES_TERMS: usize = 64;
const SERIES_MIN_LO: u64 = 8;

/// Precomputed evaluator for `-V_j` and `W_j` (with derivatives) on one
/// slice at fixed coupling.
///
/// For slices far from the origin (`M^{j-1} ≥ 8`) and `|λσ| ≤ M^{j-1}/2`
/// the slice sum is replaced by the power series
/// `-V = Σ_{m≥2} u^m Ŝ_m / m`, `u = iλσ/M^{j-1}`,
/// `Ŝ_m = Σ_{p∈I_j} (M^{j-1}/p)^m`, which makes the cost independent of
/// the slice length. Other arguments fall back to the direct sum.
#[derive(Debug, Clone)]
pub struct SliceKernel {
    lambda: Complex64,
    slice: SliceIndexSet,
    scaled_sums: Vec<f64>,
}

impl SliceKernel {
    pub fn new(params: &ModelParams, j: u32) -> Result<Self> {
        let slice = params.slice(j)?;
        let mut scaled_sums = Vec::new();
        if slice.lo >= SERIES_MIN_LO {
            let lo = slice.lo as f64;
            let nterms = SERIES_TERMS + MAX_KERNEL_ORDER + 1;
            let mut accs = vec![KahanSum::new(); nterms];
            for p in slice.descending() {
                let r = lo / p as f64;
                let mut pow = 1.0;
                for acc in accs.iter_mut() {
                    acc.add(pow);
                    pow *= r;
                }
            }
            scaled_sums = accs.iter().map(KahanSum::value).collect();
        }
        Ok(Self { lambda: params.lambda, slice, scaled_sums })
    }

    pub fn slice(&self) -> SliceIndexSet {
        self.slice
    }

    /// Fills `out[0] = -V_j(σ)` and `out[k] = ∂^k(-V_j)(σ)` for
    /// `k < out.len()`.
    pub fn neg_v_derivatives(&self, sigma: Complex64, out: &mut [Complex64]) -> Result<()> {
        let kmax = out.len().saturating_sub(1);
        ensure!(kmax <= MAX_KERNEL_ORDER, Budget, "derivative order {kmax} too large");
        let lo = self.slice.lo as f64;
        let u = I * self.lambda * sigma / lo;
        if !self.scaled_sums.is_empty() && u.norm() <= 0.5 {
            self.series(u, out);
            return Ok(());
        }
        out[0] = neg_v_direct(self.lambda, self.slice, sigma)?;
        for (k, slot) in out.iter_mut().enumerate().skip(1) {
            *slot = neg_v_derivative_direct(self.lambda, self.slice, k, sigma)?;
        }
        Ok(())
    }

    fn series(&self, u: Complex64, out: &mut [Complex64]) {
        let lo = self.slice.lo as f64;
        let scale = I * self.lambda / lo;
        let unorm = u.norm();
        // Powers u^0..u^{SERIES_TERMS}.
        let mut pows = [Complex64::zero(); SERIES_TERMS + 1];
        pows[0] = Complex64::new(1.0, 0.0);
        for m in 1..=SERIES_TERMS {
            pows[m] = pows[m - 1] * u;
        }
        let mut scale_k = Complex64::new(1.0, 0.0);
        for (k, slot) in out.iter_mut().enumerate() {
            // d^k/dσ^k u^m = scale^k m!/(m-k)! u^{m-k}
            let mut acc = Complex64::zero();
            let start = k.max(2);
            let mut prev_mag = f64::INFINITY;
            for m in start..start + SERIES_TERMS {
                let mut falling = 1.0;
                for i in 0..k {
                    falling *= (m - i) as f64;
                }
                let coeff = falling * self.scaled_sums[m] / m as f64;
                let p = m - k;
                let term = if p <= SERIES_TERMS { pows[p] * coeff } else { break };
                acc += term;
                let mag = coeff * unorm.powi(p as i32);
                if mag < 1e-18 * acc.norm() && mag < prev_mag {
                    break;
                }
                prev_mag = mag;
            }
            *slot = acc * scale_k;
            scale_k *= scale;
        }
    }

    /// Fills `out[q] = ∂^q W_j(σ)` for `q < out.len()`.
    pub fn w_derivatives(&self, sigma: Complex64, out: &mut [Complex64]) -> Result<()> {
        let mut neg_v = [Complex64::zero(); MAX_KERNEL_ORDER + 1];
        let n = out.len();
        ensure!(n >= 1 && n <= MAX_KERNEL_ORDER + 1, Budget, "derivative order out of range");
        self.neg_v_derivatives(sigma, &mut neg_v[..n])?;
        assemble_w_derivatives(&neg_v[..n], out);
        Ok(())
    }

    /// `∂^q W_j(σ)`.
    pub fn w_derivative(&self, q: usize, sigma: Complex64) -> Result<Complex64> {
        let mut out = [Complex64::zero(); MAX_KERNEL_ORDER + 1];
        self.w_derivatives(sigma, &mut out[..=q])?;
        Ok(out[q])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn log2m_examples() {
        assert_eq!(log2m(c(0.0)).unwrap(), c(0.0));
        assert!((log2m(c(0.5)).unwrap().re + 0.1931471806).abs() < 1e-10);
        let x = 1e-4;
        let v = log2m(c(x)).unwrap().re;
        assert!(((v - (-x * x / 2.0)) / (x * x / 2.0)).abs() < 1e-4);
        assert!(matches!(log2m(c(1.0)), Err(MlveError::Domain(_))));
    }

    #[test]
    fn log2m_branches_agree_at_switch() {
        for &r in &[0.1249, 0.1251] {
            let x = Complex64::from_polar(r, 0.7);
            let direct = x + (c(1.0) - x).ln();
            assert!(rel(log2m(x).unwrap(), direct) < 1e-12);
        }
    }

    #[test]
    fn slice_range_examples() {
        assert_eq!(slice_range(2, 1).unwrap(), SliceIndexSet { j: 1, lo: 1, hi: 1 });
        let s = slice_range(10, 2).unwrap();
        assert_eq!((s.lo, s.hi), (10, 99));
        let s = slice_range(2, 3).unwrap();
        assert_eq!((s.lo, s.hi, s.len()), (4, 7, 4));
        assert!(slice_range(2, 0).is_err());
        assert!(slice_range(1, 3).is_err());
    }

    #[test]
    fn slices_tile_the_window() {
        let params = ModelParams::real(0.1, 3, 2, 5).unwrap();
        let mut next = params.first_index();
        for j in params.slice_labels() {
            let s = params.slice(j).unwrap();
            assert_eq!(s.lo, next);
            assert_eq!(s.len(), 3u64.pow(j) - 3u64.pow(j - 1));
            next = s.hi + 1;
        }
        assert_eq!(next - 1, params.cutoff());
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::real(0.1, 1, 1, 2).is_err());
        assert!(ModelParams::real(0.1, 2, 0, 2).is_err());
        assert!(ModelParams::real(0.1, 2, 3, 2).is_err());
        assert!(ModelParams::real(0.1, 10, 1, 30).is_err());
        assert_eq!(ModelParams::real(0.1, 2, 1, 3).unwrap().cutoff(), 7);
    }

    #[test]
    fn self_loop_sum_examples() {
        assert_eq!(self_loop_sum(1), 1.0);
        assert!((self_loop_sum(3) - 11.0 / 6.0).abs() < 1e-15);
        assert!((self_loop_sum(1_000_000) - 1e6f64.ln()).abs() < 1.0);
    }

    #[test]
    fn power_sum_examples() {
        let p = ModelParams::real(0.1, 2, 1, 3).unwrap();
        assert_eq!(power_sum(&p, 1, 2.0).unwrap(), 1.0);
        assert_eq!(power_sum_bound(&p, 1, 2.0), 2.0);
        let p = ModelParams::real(0.1, 10, 1, 3).unwrap();
        let v = power_sum(&p, 2, 2.0).unwrap();
        let direct: f64 = (10..=99).map(|q| 1.0 / (q * q) as f64).sum();
        assert!((v - direct).abs() < 1e-15 && (v - 0.0951162).abs() < 1e-7);
        assert!(v <= power_sum_bound(&p, 2, 2.0));
        for j in 1..=3 {
            assert!(power_sum(&p, j, 1.0).unwrap() <= 10.0);
        }
    }

    #[test]
    fn v_kernel_examples() {
        let p = ModelParams::real(0.5, 2, 1, 3).unwrap();
        assert_eq!(v_kernel(&p, 2, c(0.0)).unwrap(), c(0.0));
        let zero = p.with_lambda(c(0.0));
        assert_eq!(v_kernel(&zero, 3, c(2.0)).unwrap(), c(0.0));
        let v = v_kernel(&p, 1, c(1.0)).unwrap();
        assert!(rel(v, log2m(Complex64::new(0.0, 0.5)).unwrap()) < 1e-14);
        assert!(rel(v, Complex64::new(0.0, 0.5) + Complex64::new(1.0, -0.5).ln()) < 1e-14);
    }

    #[test]
    fn v_kernel_guards() {
        let p = ModelParams::new(Complex64::new(0.0, 1.0), 2, 1, 2).unwrap();
        // λ = i: x = iλσ/p = -σ/p; σ = -1, p = 1 gives x = 1, a pole.
        assert!(matches!(v_kernel(&p, 1, c(-1.0)), Err(MlveError::Domain(_))));
        assert!(matches!(v_kernel(&p, 1, c(-3.0)), Err(MlveError::BranchCut(_))));
        // W is single valued beyond the cut.
        assert!(w_kernel(&p, 1, c(-3.0)).is_ok());
        assert!(matches!(w_kernel(&p, 1, c(-1.0)), Err(MlveError::Domain(_))));
    }

    #[test]
    fn w_kernel_examples() {
        let p = ModelParams::real(0.3, 2, 1, 3).unwrap();
        assert_eq!(w_kernel(&p, 2, c(0.0)).unwrap(), c(0.0));
        assert_eq!(w_kernel(&p.with_lambda(c(0.0)), 2, c(0.7)).unwrap(), c(0.0));
        let a = w_kernel(&p, 2, c(0.7)).unwrap();
        let b = w_kernel_product(&p, 2, c(0.7)).unwrap();
        assert!(rel(a, b) < 1e-12);
    }

    fn fd_neg_v(p: &ModelParams, j: u32, s: f64, order: usize) -> Complex64 {
        let h = 1e-5;
        let f = |x: f64| -> Complex64 {
            if order == 1 {
                -v_kernel(p, j, c(x)).unwrap()
            } else {
                dv_derivative(p, j, order - 1, c(x)).unwrap()
            }
        };
        (f(s + h) - f(s - h)) / (2.0 * h)
    }

    #[test]
    fn dv_derivative_examples() {
        let p = ModelParams::real(0.4, 2, 1, 3).unwrap();
        assert_eq!(dv_derivative(&p, 2, 1, c(0.0)).unwrap(), c(0.0));
        for j in 1..=3 {
            let expected = -0.16 * power_sum(&p, j, 2.0).unwrap();
            assert!(rel(dv_derivative(&p, j, 2, c(0.0)).unwrap(), c(expected)) < 1e-14);
        }
        for order in 1..=3 {
            for &s in &[0.2, -0.7, 1.5] {
                let exact = dv_derivative(&p, 1, order, c(s)).unwrap();
                assert!(rel(exact, fd_neg_v(&p, 1, s, order)) < 1e-6, "k={order} s={s}");
            }
        }
        assert!(dv_derivative(&p, 1, 0, c(0.0)).is_err());
    }

    #[test]
    fn dw_derivative_examples() {
        let p = ModelParams::real(0.4, 2, 1, 3).unwrap();
        assert_eq!(dw_derivative(&p, 2, 0, c(0.3)).unwrap(), w_kernel(&p, 2, c(0.3)).unwrap());
        assert_eq!(dw_derivative(&p, 2, 1, c(0.0)).unwrap(), c(0.0));
        let expected = -0.16 * power_sum(&p, 2, 2.0).unwrap();
        assert!(rel(dw_derivative(&p, 2, 2, c(0.0)).unwrap(), c(expected)) < 1e-14);
        let h = 1e-5;
        for q in 1..=3 {
            for &s in &[0.3, -1.1] {
                let fd = (dw_derivative(&p, 1, q - 1, c(s + h)).unwrap()
                    - dw_derivative(&p, 1, q - 1, c(s - h)).unwrap())
                    / (2.0 * h);
                assert!(rel(dw_derivative(&p, 1, q, c(s)).unwrap(), fd) < 1e-5, "q={q} s={s}");
            }
        }
    }

    #[test]
    fn partitions_in_lexicographic_order() {
        let parts: Vec<_> = integer_partitions(4).unwrap().iter().map(|p| p.parts()).collect();
        assert_eq!(
            parts,
            vec![vec![1, 1, 1, 1], vec![2, 1, 1], vec![2, 2], vec![3, 1], vec![4]]
        );
        // Faà di Bruno weights of q = 4 sum to the Bell number 15.
        let total: u128 = integer_partitions(4).unwrap().iter().map(|p| p.coefficient).sum();
        assert_eq!(total, 15);
        assert_eq!(integer_partitions(0).unwrap().len(), 1);
    }

    #[test]
    fn partition_weight_identity() {
        for d in 1..=12 {
            assert!(partition_weight_sum(d).unwrap().is_one(), "d = {d}");
        }
    }

    #[test]
    fn slice_kernel_matches_direct_sums() {
        let p = ModelParams::real(0.7, 10, 1, 4).unwrap();
        for j in 1..=4 {
            let kernel = SliceKernel::new(&p, j).unwrap();
            for &s in &[0.0, 0.3, -2.5, 7.0, 400.0, -3000.0] {
                let mut out = [Complex64::zero(); 5];
                kernel.w_derivatives(c(s), &mut out).unwrap();
                for (q, v) in out.iter().enumerate() {
                    let direct = dw_derivative(&p, j, q, c(s)).unwrap();
                    let err = (v - direct).norm();
                    assert!(err <= 1e-12 * direct.norm().max(1e-300) + 1e-300, "j={j} s={s} q={q}: {v} vs {direct}");
                }
            }
        }
    }

    #[test]
    fn slice_kernel_complex_coupling() {
        let p = ModelParams::new(Complex64::from_polar(0.3, 0.4), 10, 2, 3).unwrap();
        let kernel = SliceKernel::new(&p, 3).unwrap();
        for &s in &[0.5, -4.0] {
            for q in 0..3 {
                let direct = dw_derivative(&p, 3, q, c(s)).unwrap();
                assert!(rel(kernel.w_derivative(q, c(s)).unwrap(), direct) < 1e-11);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn exponential_and_product_forms_agree(
            lambda in -1.0f64..1.0, sigma in -5.0f64..5.0, j in 1u32..=4
        ) {
            let p = ModelParams::real(lambda, 2, 1, 4).unwrap();
            let sum_form = w_kernel(&p, j, c(sigma)).unwrap() + 1.0;
            let prod_form = w_kernel_product(&p, j, c(sigma)).unwrap() + 1.0;
            prop_assert!(rel(sum_form, prod_form) < 1e-12);
        }

        #[test]
        fn real_kernel_is_contracting(
            lambda in -1.0f64..1.0, sigma in -50.0f64..50.0, j in 1u32..=3, base in 2u64..6
        ) {
            let p = ModelParams::real(lambda, base, 1, 3).unwrap();
            let v = v_kernel(&p, j, c(sigma)).unwrap();
            prop_assert!((-v).re <= 1e-15);
            prop_assert!((w_kernel(&p, j, c(sigma)).unwrap() + 1.0).norm() <= 1.0 + 1e-15);
        }
    }
}
