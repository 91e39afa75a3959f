use std::process::ExitCode;

use anyhow::Result;
use mlve::bounds::{borel_domain, geometric_bound_series, m_threshold_check, stirling_chain_check, tail_check};
use mlve::bounds::{SeriesReport, TailReport};
use mlve::Complex64;
use serde::Serialize;

use crate::output::SCHEMA_VERSION;
use crate::{Context, UsageError};

#[derive(Serialize)]
struct StirlingCsv {
    schema_version: u32,
    q: u32,
    ln_lhs: f64,
    ln_rhs: f64,
    margin: f64,
    holds: bool,
}

#[derive(Serialize)]
struct ThresholdCsv {
    schema_version: u32,
    q: u32,
    ln_value: f64,
    value: f64,
    violated: bool,
}

#[derive(Serialize)]
struct SeriesDoc<'a> {
    config: &'a crate::config::BoundsConfig,
    series: SeriesReport,
    tail: TailReport,
    stirling_holds: bool,
    threshold_violations: Vec<u32>,
}

pub fn run_verify_bounds(ctx: &Context) -> Result<ExitCode> {
    let cfg = &ctx.config.bounds;
    if cfg.q_max == 0 {
        return Err(UsageError("bounds.q_max must be positive".into()).into());
    }
    if !(cfg.base > 4.0) {
        return Err(UsageError(format!("bounds.base must exceed 4, got {}", cfg.base)).into());
    }
    let stirling = stirling_chain_check(1..=cfg.q_max)?;
    let threshold = m_threshold_check(cfg.base, 1..=cfg.q_max)?;
    let series = geometric_bound_series(cfg.lambda, cfg.base, cfg.q_max, cfg.b_max)?;
    let tail = tail_check(cfg.lambda, cfg.base, cfg.q_max)?;

    ctx.out.write_csv(
        "stirling.csv",
        &stirling
            .iter()
            .map(|r| StirlingCsv {
                schema_version: SCHEMA_VERSION,
                q: r.q,
                ln_lhs: r.ln_lhs,
                ln_rhs: r.ln_rhs,
                margin: r.margin,
                holds: r.holds,
            })
            .collect::<Vec<_>>(),
    )?;
    ctx.out.write_csv(
        "threshold.csv",
        &threshold
            .iter()
            .map(|r| ThresholdCsv {
                schema_version: SCHEMA_VERSION,
                q: r.q,
                ln_value: r.ln_value,
                value: r.value,
                violated: r.violated,
            })
            .collect::<Vec<_>>(),
    )?;

    let stirling_holds = stirling.iter().all(|r| r.holds);
    let violations: Vec<u32> = threshold.iter().filter(|r| r.violated).map(|r| r.q).collect();
    let status = |ok: bool| if ok { "PASS" } else { "FAIL" };
    println!("{} factorial chain, q = 1..={}", status(stirling_holds), cfg.q_max);
    for r in threshold.iter().filter(|r| r.violated) {
        println!("WARN threshold at q = {}: {:.6} > 1", r.q, r.value);
    }
    println!(
        "{} geometric series: S = {:.6e}, partial sum {:.6e}",
        status(series.converges),
        series.ratio,
        series.partial_sum
    );
    println!("{} tail: {:.6e} <= {:.6e}", status(tail.holds), tail.sum, tail.bound);

    ctx.out.write_json(
        "series.json",
        &SeriesDoc { config: cfg, series, tail, stirling_holds, threshold_violations: violations },
    )?;
    let ok = stirling_holds && series.converges && tail.holds;
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

#[derive(Serialize)]
struct DomainCsv {
    schema_version: u32,
    re_g: f64,
    im_g: f64,
    inside: bool,
    on_boundary: bool,
    signed_distance: f64,
}

fn axis(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| if n == 1 { lo } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 })
}

pub fn run_domain_map(ctx: &Context) -> Result<ExitCode> {
    let cfg = &ctx.config.domain_map;
    if cfg.resolution == 0 || !(cfg.re_min <= cfg.re_max) || !(cfg.im_min <= cfg.im_max) {
        return Err(UsageError("domain_map needs a positive resolution and ordered bounds".into()).into());
    }
    let mut rows = Vec::with_capacity(cfg.resolution * cfg.resolution);
    for im in axis(cfg.im_min, cfg.im_max, cfg.resolution) {
        for re in axis(cfg.re_min, cfg.re_max, cfg.resolution) {
            let m = borel_domain(Complex64::new(re, im));
            rows.push(DomainCsv {
                schema_version: SCHEMA_VERSION,
                re_g: re,
                im_g: im,
                inside: m.inside,
                on_boundary: m.on_boundary,
                signed_distance: m.signed_distance,
            });
        }
    }
    let inside = rows.iter().filter(|r| r.inside).count();
    eprintln!("{inside} of {} grid points inside the disk", rows.len());
    ctx.out.write_csv("domain_map.csv", &rows)?;
    Ok(ExitCode::SUCCESS)
}
