use std::process::ExitCode;

use anyhow::Result;
use mlve::oracle::{logz_scan, perturbative_coefficients, z_certified, MAX_PERTURBATIVE_ORDER, MIN_NODES};
use mlve::Complex64;
use serde::Serialize;

use crate::output::SCHEMA_VERSION;
use crate::{Context, UsageError};

#[derive(Serialize)]
struct Row {
    schema_version: u32,
    lambda_re: f64,
    lambda_im: f64,
    z_re: f64,
    z_im: f64,
    logz_re: f64,
    logz_im: f64,
    doubling_delta: f64,
    reliable: bool,
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a crate::config::Config,
    /// Coefficients of `g, g², …` in `log Z`, `g = λ²`.
    perturbative_coefficients: Vec<f64>,
    /// Perturbative partial sum at each scanned coupling.
    perturbative_logz: Vec<Complex64>,
    all_reliable: bool,
}

pub fn run(ctx: &Context) -> Result<ExitCode> {
    let config = &ctx.config;
    let params = config.model.params()?;
    let cfg = &config.oracle;
    if cfg.nodes < MIN_NODES {
        return Err(UsageError(format!("oracle.nodes must be at least {MIN_NODES}")).into());
    }
    if cfg.perturbative_order > MAX_PERTURBATIVE_ORDER {
        return Err(UsageError(format!("oracle.perturbative_order must be at most {MAX_PERTURBATIVE_ORDER}")).into());
    }
    let moduli = if cfg.lambdas.is_empty() { vec![config.model.lambda] } else { cfg.lambdas.clone() };
    let lambdas: Vec<Complex64> = moduli.iter().map(|&r| Complex64::from_polar(r, config.model.phase)).collect();

    // The scan keeps Im log Z continuous along the path.
    let logs = logz_scan(&params, &lambdas, cfg.nodes)?;
    let coefficients: Vec<f64> =
        perturbative_coefficients(&params, cfg.perturbative_order)?.into_iter().map(|c| c.re).collect();
    let mut rows = Vec::with_capacity(lambdas.len());
    let mut perturbative = Vec::with_capacity(lambdas.len());
    for (&lambda, &logz) in lambdas.iter().zip(&logs) {
        let cert = z_certified(&params.with_lambda(lambda), cfg.nodes)?;
        let g = lambda * lambda;
        let series: Complex64 = coefficients.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| (acc + c) * g);
        println!("λ = {lambda:.6}: Z = {:.12}, log Z = {logz:.12}, series {series:.12}", cert.refined);
        perturbative.push(series);
        rows.push(Row {
            schema_version: SCHEMA_VERSION,
            lambda_re: lambda.re,
            lambda_im: lambda.im,
            z_re: cert.refined.re,
            z_im: cert.refined.im,
            logz_re: logz.re,
            logz_im: logz.im,
            doubling_delta: cert.doubling_delta(),
            reliable: cert.is_reliable(),
        });
    }
    ctx.out.write_csv("oracle.csv", &rows)?;
    let all_reliable = rows.iter().all(|r| r.reliable);
    ctx.out.write_json(
        "oracle.json",
        &Summary { config, perturbative_coefficients: coefficients, perturbative_logz: perturbative, all_reliable },
    )?;
    Ok(ExitCode::SUCCESS)
}
