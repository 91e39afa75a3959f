//! Reference values for `Z(λ, N)` and `log Z`.
//!
//! In the intermediate-field representation the partition function is the
//! one-dimensional integral
//! `Z = ∫ dν(σ) ∏_p e^{-iλσ/p} / (1 - iλσ/p)`, `dν` the standard normal
//! law, with `p` running over the slice window `[M^{j_min-1}, M^{j_max}-1]`.
//! It is evaluated by Gauss–Hermite quadrature and certified by doubling
//! the node count.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{ensure, MlveError, Result};
use crate::model::{complex_expm1, ModelParams, SliceKernel};
use crate::quadrature::{ComplexKahanSum, NormalRule};

pub const DEFAULT_NODES: usize = 200;
pub const MIN_NODES: usize = 50;
/// Node-doubling change below which a quadrature value counts as reliable.
pub const RELIABILITY_TOLERANCE: f64 = 1e-10;
pub const MAX_PERTURBATIVE_ORDER: usize = 8;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Integrand `∏_p e^{-iλσ/p}/(1 - iλσ/p)` over the window, as a product over
/// individual propagator indices.
pub fn full_integrand(params: &ModelParams, sigma: f64) -> Complex64 {
    let mut prod = Complex64::new(1.0, 0.0);
    for p in (params.first_index()..=params.cutoff()).rev() {
        let x = I * params.lambda * sigma / p as f64;
        prod *= (-x).exp() / (1.0 - x);
    }
    prod
}

/// The same integrand as a product over slices, `∏_j (1 + W_j(σ))`.
pub fn slice_factorized_integrand(kernels: &[SliceKernel], sigma: f64) -> Result<Complex64> {
    let mut prod = Complex64::new(1.0, 0.0);
    for k in kernels {
        prod *= 1.0 + k.w_derivative(0, Complex64::new(sigma, 0.0))?;
    }
    Ok(prod)
}

pub fn slice_kernels(params: &ModelParams) -> Result<Vec<SliceKernel>> {
    params.slice_labels().map(|j| SliceKernel::new(params, j)).collect()
}

/// Gauss–Hermite approximation of `Z(λ, N)` with `nodes` nodes.
pub fn z_sigma_quadrature(params: &ModelParams, nodes: usize) -> Result<Complex64> {
    ensure!(nodes >= MIN_NODES, Argument, "at least {MIN_NODES} nodes required, got {nodes}");
    if params.lambda == Complex64::new(0.0, 0.0) {
        // The integrand is identically one and dν is normalised.
        return Ok(Complex64::new(1.0, 0.0));
    }
    let rule = NormalRule::new(nodes)?;
    let terms: Vec<Complex64> = rule
        .nodes
        .par_iter()
        .zip(&rule.weights)
        .map(|(&x, &w)| full_integrand(params, x) * w)
        .collect();
    let mut acc = ComplexKahanSum::new();
    for t in terms {
        acc.add(t);
    }
    Ok(acc.value())
}

/// A quadrature value with its node-doubling certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifiedValue {
    pub value: Complex64,
    /// Value at twice the node count.
    pub refined: Complex64,
    pub nodes: usize,
}

impl CertifiedValue {
    pub fn doubling_delta(&self) -> f64 {
        (self.refined - self.value).norm()
    }

    pub fn is_reliable(&self) -> bool {
        self.doubling_delta() < RELIABILITY_TOLERANCE
    }
}

/// `Z` at `nodes` and `2·nodes`, without judging the difference.
pub fn z_certified(params: &ModelParams, nodes: usize) -> Result<CertifiedValue> {
    Ok(CertifiedValue {
        value: z_sigma_quadrature(params, nodes)?,
        refined: z_sigma_quadrature(params, 2 * nodes)?,
        nodes,
    })
}

/// `Z`, rejected as unreliable if doubling the nodes moves it by
/// [`RELIABILITY_TOLERANCE`] or more.
pub fn z_reliable(params: &ModelParams, nodes: usize) -> Result<Complex64> {
    let c = z_certified(params, nodes)?;
    ensure!(
        c.is_reliable(),
        Unreliable,
        "node doubling {} -> {} moved Z by {:e}",
        nodes,
        2 * nodes,
        c.doubling_delta()
    );
    Ok(c.refined)
}

/// Principal logarithm of the certified `Z`.
pub fn logz_oracle(params: &ModelParams, nodes: usize) -> Result<Complex64> {
    let z = z_reliable(params, nodes)?;
    ensure!(z.norm() > 1e-12, Domain, "Z = {z} is too close to zero for a logarithm");
    Ok(z.ln())
}

/// `log Z` along a path of couplings, unwrapping the imaginary part so
/// that it is continuous from `log Z(0) = 0`.
pub fn logz_scan(params: &ModelParams, lambdas: &[Complex64], nodes: usize) -> Result<Vec<Complex64>> {
    let raw: Vec<Result<Complex64>> =
        lambdas.par_iter().map(|&l| logz_oracle(&params.with_lambda(l), nodes)).collect();
    let mut out = Vec::with_capacity(raw.len());
    let mut prev_im = 0.0;
    for v in raw {
        let mut v = v?;
        let turns = ((prev_im - v.im) / std::f64::consts::TAU).round();
        v.im += turns * std::f64::consts::TAU;
        prev_im = v.im;
        out.push(v);
    }
    Ok(out)
}

fn inverse_powers(lo: u64, hi: u64, max_power: usize) -> Vec<f64> {
    // s[k] = Σ_p p^{-k}, summed from the smallest terms up.
    let mut s = vec![0.0; max_power + 1];
    for k in 1..=max_power {
        let mut acc = crate::quadrature::KahanSum::new();
        for p in (lo..=hi).rev() {
            acc.add((p as f64).powi(-(k as i32)));
        }
        s[k] = acc.value();
    }
    s
}

fn double_factorial_odd(m: usize) -> f64 {
    // (2m - 1)!!
    (1..=m).map(|i| (2 * i - 1) as f64).product()
}

/// Coefficients `c_1..c_K` of the formal series `log(Σ_n z_n g^n)` given
/// `z_0 = 1`.
fn log_series(z: &[f64], order: usize) -> Vec<f64> {
    // L' Z = Z' → n ℓ_n = n z_n - Σ_{k=1}^{n-1} k ℓ_k z_{n-k}.
    let mut l = vec![0.0; order + 1];
    for n in 1..=order {
        let mut acc = n as f64 * z[n];
        for k in 1..n {
            acc -= k as f64 * l[k] * z[n - k];
        }
        l[n] = acc / n as f64;
    }
    l[1..].to_vec()
}

/// Perturbative coefficients of `log Z` in `g = λ²` for `p ∈ [lo, hi]`, from
/// exact Gaussian moments of the expanded intermediate-field integrand.
///
/// The integrand is `exp(Σ_{k≥2} (iλσ)^k s_k / k)`, `s_k = Σ_p p^{-k}`; its
/// Taylor coefficient `e_{2n}` of `(λσ)^{2n}` contributes
/// `e_{2n} (2n-1)!! g^n` to `Z`.
pub fn series_coefficients(lo: u64, hi: u64, order: usize) -> Result<Vec<f64>> {
    ensure!(order <= MAX_PERTURBATIVE_ORDER, Budget, "perturbative order limited to {MAX_PERTURBATIVE_ORDER}");
    if lo > hi {
        return Ok(vec![0.0; order]);
    }
    let deg = 2 * order;
    let s = inverse_powers(lo, hi, deg);
    // a_k = i^k s_k / k; only even total degrees survive, where i^m is real.
    let a: Vec<Complex64> = (0..=deg)
        .map(|k| if k < 2 { Complex64::new(0.0, 0.0) } else { I.powu(k as u32) * s[k] / k as f64 })
        .collect();
    // e = exp(Σ a_k t^k) via m e_m = Σ_k k a_k e_{m-k}.
    let mut e = vec![Complex64::new(0.0, 0.0); deg + 1];
    e[0] = Complex64::new(1.0, 0.0);
    for m in 1..=deg {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 2..=m {
            acc += a[k] * e[m - k] * k as f64;
        }
        e[m] = acc / m as f64;
    }
    let z: Vec<f64> = (0..=order).map(|n| e[2 * n].re * double_factorial_odd(n)).collect();
    Ok(log_series(&z, order))
}

/// The same coefficients by an independent route: `Z = E[e^{-gY²/2}]` with
/// `Y = Σ_p (X_p - 1/p)`, `X_p` exponential with mean `1/p`, whose
/// cumulants are `κ_r = (r-1)! Σ_p p^{-r}` for `r ≥ 2`.
pub fn series_coefficients_from_cumulants(lo: u64, hi: u64, order: usize) -> Result<Vec<f64>> {
    ensure!(order <= MAX_PERTURBATIVE_ORDER, Budget, "perturbative order limited to {MAX_PERTURBATIVE_ORDER}");
    if lo > hi {
        return Ok(vec![0.0; order]);
    }
    let deg = 2 * order;
    let s = inverse_powers(lo, hi, deg);
    let fact = |k: usize| (1..=k).map(|i| i as f64).product::<f64>();
    let kappa: Vec<f64> = (0..=deg).map(|r| if r < 2 { 0.0 } else { fact(r - 1) * s[r] }).collect();
    // μ_n = Σ_{k=1}^{n} C(n-1, k-1) κ_k μ_{n-k}
    let mut mu = vec![0.0; deg + 1];
    mu[0] = 1.0;
    for n in 1..=deg {
        let mut acc = 0.0;
        let mut binom = 1.0;
        for k in 1..=n {
            acc += binom * kappa[k] * mu[n - k];
            binom = binom * (n - k) as f64 / k as f64;
        }
        mu[n] = acc;
    }
    let z: Vec<f64> = (0..=order).map(|n| (-0.5f64).powi(n as i32) * mu[2 * n] / fact(n)).collect();
    Ok(log_series(&z, order))
}

/// First `order` perturbative coefficients of `log Z` in `g = λ²`. They
/// depend only on the set of propagator indices, not on `λ`.
pub fn perturbative_coefficients(params: &ModelParams, order: usize) -> Result<Vec<Complex64>> {
    Ok(series_coefficients(params.first_index(), params.cutoff(), order)?
        .into_iter()
        .map(|c| Complex64::new(c, 0.0))
        .collect())
}

/// Estimates the first `order` coefficients from oracle values of `log Z`
/// at small positive `g`, by a least-squares polynomial fit of degree
/// `fit_degree` through `g_k = k · g_max / samples`.
///
/// `log Z` is not analytic at `g = 0`, so the fit only probes `g > 0`.
pub fn fitted_coefficients(
    params: &ModelParams,
    order: usize,
    g_max: f64,
    samples: usize,
    fit_degree: usize,
    nodes: usize,
) -> Result<Vec<f64>> {
    ensure!(fit_degree >= order && samples > fit_degree, Argument, "fit is underdetermined");
    let gs: Vec<f64> = (1..=samples).map(|k| g_max * k as f64 / samples as f64).collect();
    let values: Vec<f64> = gs
        .par_iter()
        .map(|&g| logz_oracle(&params.with_lambda(Complex64::new(g.sqrt(), 0.0)), nodes).map(|v| v.re))
        .collect::<Result<_>>()?;
    // Columns g, g², …: log Z(0) = 0 is built in. Columns are rescaled by
    // g_max^k to keep the system well conditioned.
    let a = DMatrix::from_fn(samples, fit_degree, |r, c| (gs[r] / g_max).powi(c as i32 + 1));
    let b = DVector::from_vec(values);
    let sol = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| MlveError::Internal(format!("least-squares fit failed: {e}")))?;
    Ok((0..order).map(|k| sol[k] / g_max.powi(k as i32 + 1)).collect())
}

/// Single-slice reference `∫ dν(σ) W_j(σ)` from a plain Gauss–Hermite rule.
pub fn slice_w_integral(params: &ModelParams, j: u32, nodes: usize) -> Result<Complex64> {
    let rule = NormalRule::new(nodes)?;
    let slice = params.slice(j)?;
    let mut acc = ComplexKahanSum::new();
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        // Product over the slice, independent of the kernel code paths.
        let mut log = Complex64::new(0.0, 0.0);
        for p in slice.descending() {
            let t = I * params.lambda * x / p as f64;
            log += -t - (1.0 - t).ln();
        }
        acc.add(complex_expm1(log) * w);
    }
    Ok(acc.value())
}
