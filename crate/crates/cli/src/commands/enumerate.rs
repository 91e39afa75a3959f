use std::process::ExitCode;

use anyhow::Result;
use mlve::combinatorics::{
    cayley, count_two_level_trees, enumerate_jungles, enumerate_set_partitions, enumerate_trees,
    two_level_tree_bound, MAX_JUNGLE_VERTICES, MAX_TREE_VERTICES,
};
use serde::Serialize;

use crate::output::SCHEMA_VERSION;
use crate::{Context, UsageError};

#[derive(Serialize)]
struct Row {
    schema_version: u32,
    n: usize,
    trees: u128,
    cayley: u128,
    spanning_jungles: u128,
    spanning_jungles_expected: u128,
    two_level_bound: u128,
    set_partitions: u128,
    matches: bool,
}

pub fn run(ctx: &Context) -> Result<ExitCode> {
    let n_max = ctx.config.enumerate.n_max;
    let limit = MAX_TREE_VERTICES.min(MAX_JUNGLE_VERTICES);
    if n_max == 0 || n_max > limit {
        return Err(UsageError(format!("enumerate.n_max must be in 1..={limit}")).into());
    }
    let mut rows = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let trees = enumerate_trees(n)?.count() as u128;
        let jungles = enumerate_jungles(n, true)?.count() as u128;
        let partitions = enumerate_set_partitions(n)?.len() as u128;
        let expected = count_two_level_trees(n as u64);
        let bound = two_level_tree_bound(n as u64);
        let matches = trees == cayley(n as u64) && jungles == expected && jungles <= bound;
        println!(
            "{} n = {n}: {trees} trees, {jungles} spanning jungles (expected {expected}, bound {bound}), \
             {partitions} set partitions",
            if matches { "PASS" } else { "FAIL" }
        );
        rows.push(Row {
            schema_version: SCHEMA_VERSION,
            n,
            trees,
            cayley: cayley(n as u64),
            spanning_jungles: jungles,
            spanning_jungles_expected: expected,
            two_level_bound: bound,
            set_partitions: partitions,
            matches,
        });
    }
    ctx.out.write_csv("enumerate.csv", &rows)?;
    Ok(if rows.iter().all(|r| r.matches) { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
