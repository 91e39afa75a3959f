use std::process::ExitCode;

use anyhow::Result;
use mlve::mayer::{convergence_ratio, mayer_logz, polymer_z_direct, truncation_tail_estimate, MAX_ORDER};
use mlve::Complex64;
use serde::Serialize;

use crate::output::SCHEMA_VERSION;
use crate::{Context, UsageError};

#[derive(Serialize)]
struct Row {
    schema_version: u32,
    n: usize,
    order_re: f64,
    order_im: f64,
    partial_sum_re: f64,
    partial_sum_im: f64,
    /// `|exp(partial sum) - Z|`.
    z_gap: f64,
    /// `|partial sum - log Z|`.
    logz_gap: f64,
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a crate::config::MayerConfig,
    z_direct: Complex64,
    logz_direct: Complex64,
    convergence_ratio: f64,
    /// Heuristic size of the omitted orders; absent when the ratio is at least 1.
    tail_estimate: Option<f64>,
    partial_sums: Vec<Complex64>,
}

pub fn run(ctx: &Context) -> Result<ExitCode> {
    let cfg = &ctx.config.mayer;
    if cfg.n_max == 0 || cfg.n_max > MAX_ORDER {
        return Err(UsageError(format!("mayer.n_max must be in 1..={MAX_ORDER}")).into());
    }
    let gas = cfg.gas.gas()?;
    let z = polymer_z_direct(&gas);
    let logz = z.ln();
    let expansion = mayer_logz(&gas, cfg.n_max)?;
    let sums = expansion.partial_sums();
    let rows: Vec<Row> = expansion
        .orders
        .iter()
        .zip(&sums)
        .enumerate()
        .map(|(k, (&order, &sum))| Row {
            schema_version: SCHEMA_VERSION,
            n: k + 1,
            order_re: order.re,
            order_im: order.im,
            partial_sum_re: sum.re,
            partial_sum_im: sum.im,
            z_gap: (sum.exp() - z).norm(),
            logz_gap: (sum - logz).norm(),
        })
        .collect();
    for r in &rows {
        println!("n = {}: partial sum {:.12}, |exp - Z| = {:.3e}", r.n, r.partial_sum_re, r.z_gap);
    }
    let ratio = convergence_ratio(&gas);
    let tail = truncation_tail_estimate(&gas, cfg.n_max);
    println!("Z = {z:.12}, convergence ratio {ratio:.4}");
    ctx.out.write_csv("mayer.csv", &rows)?;
    ctx.out.write_json(
        "mayer.json",
        &Summary {
            config: cfg,
            z_direct: z,
            logz_direct: logz,
            convergence_ratio: ratio,
            tail_estimate: tail,
            partial_sums: sums,
        },
    )?;
    Ok(ExitCode::SUCCESS)
}
