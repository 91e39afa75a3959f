use std::process::ExitCode;

use anyhow::Result;
use mlve::engine::{sum_terms, Engine};
use mlve::oracle::logz_oracle;
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
    oracle_distance: f64,
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a crate::config::Config,
    oracle_logz: Complex64,
    partial_sums: Vec<Complex64>,
    oracle_distances: Vec<f64>,
    /// `|S_1 - log Z| / |S_{n_max} - log Z|`, absent when the latter is 0.
    improvement: Option<f64>,
}

pub fn run(ctx: &Context) -> Result<ExitCode> {
    let config = &ctx.config;
    let params = config.model.params()?;
    let n_max = config.compare.n_max;
    if n_max == 0 || n_max > config.engine.max_order {
        return Err(UsageError(format!("compare.n_max must be in 1..={}", config.engine.max_order)).into());
    }
    let oracle = logz_oracle(&params, config.oracle.nodes)?;
    let engine = Engine::new(params, config.engine)?;
    let mut trace = if ctx.trace { Some(ctx.out.json_lines("trace.jsonl")?) } else { None };

    let mut rows = Vec::with_capacity(n_max);
    let mut partial = Complex64::new(0.0, 0.0);
    let mut factorial = 1.0;
    for n in 1..=n_max {
        factorial *= n as f64;
        let terms = engine.order_terms(n)?;
        if let Some(t) = trace.as_mut() {
            for record in &terms {
                t.write(record)?;
            }
        }
        let order = sum_terms(&terms) / factorial;
        partial += order;
        let distance = (partial - oracle).norm();
        eprintln!("n = {n}: S_n = {partial:.12}, |S_n - log Z| = {distance:.3e}");
        rows.push(Row {
            schema_version: SCHEMA_VERSION,
            n,
            order_re: order.re,
            order_im: order.im,
            partial_sum_re: partial.re,
            partial_sum_im: partial.im,
            oracle_distance: distance,
        });
    }
    if let Some(t) = trace {
        t.finish()?;
    }
    ctx.out.write_csv("compare.csv", &rows)?;
    let distances: Vec<f64> = rows.iter().map(|r| r.oracle_distance).collect();
    let summary = Summary {
        config,
        oracle_logz: oracle,
        partial_sums: rows.iter().map(|r| Complex64::new(r.partial_sum_re, r.partial_sum_im)).collect(),
        improvement: (distances[n_max - 1] > 0.0).then(|| distances[0] / distances[n_max - 1]),
        oracle_distances: distances,
    };
    ctx.out.write_json("compare.json", &summary)?;
    Ok(ExitCode::SUCCESS)
}
