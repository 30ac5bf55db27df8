//! Tab-separated benchmark tables.

use std::collections::HashMap;
use std::fmt::Write;
use std::time::Instant;

use super::{run_solver, Algorithm, ORACLE_TOL};
use crate::constant_approx::{means_bound, medians_bound};
use crate::error::Result;
use crate::geometry::{Instance, ObjectiveKind};
use crate::oracle::{exact_chromatic, exact_unconstrained};
use crate::peeling::{peeling_baseline, PeelingConfig};

pub const BENCH_HEADER: &str = "instance\talgorithm\tseed\tstatus\tobjective\toracle\tratio\tc_hat\tbound\tseconds";

/// Relative 1-median error assumed in the medians bound.
pub const MEDIAN_BOUND_EPS: f64 = 1e-6;

pub struct BenchCase {
    pub name: String,
    pub instance: Instance,
}

#[derive(Clone, Debug)]
pub struct BenchOptions {
    pub algorithms: Vec<Algorithm>,
    pub seeds: Vec<u64>,
    /// Solver configuration; its seed is replaced by each entry of `seeds`.
    pub config: PeelingConfig,
    /// Record wall-clock times (makes tables non-reproducible).
    pub timing: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub instance: String,
    pub algorithm: Algorithm,
    pub seed: u64,
    /// `ok`, or the error that stopped the solver.
    pub status: String,
    pub objective: Option<f64>,
    pub oracle: Option<f64>,
    pub ratio: Option<f64>,
    /// Measured baseline factor, for the constant-factor solvers.
    pub c_hat: Option<f64>,
    /// The ratio bound implied by `c_hat`.
    pub bound: Option<f64>,
    pub seconds: Option<f64>,
}

/// `ĉ` and the implied ratio bound for the constant-factor solver of `kind`.
pub fn constant_bound(inst: &Instance, kind: ObjectiveKind, cfg: &PeelingConfig) -> Result<(f64, f64)> {
    let baseline = peeling_baseline(inst, kind, cfg)?;
    let opt = exact_unconstrained(&inst.all_points(), inst.k(), kind, ORACLE_TOL)?;
    let c_hat = if opt.objective > 0.0 { (baseline.objective / opt.objective).max(1.0) } else { 1.0 };
    let bound = match kind {
        ObjectiveKind::Means => means_bound(c_hat, inst.k()),
        ObjectiveKind::Medians => medians_bound(c_hat, inst.k(), MEDIAN_BOUND_EPS),
    };
    Ok((c_hat, bound))
}

pub fn run_bench(cases: &[BenchCase], opts: &BenchOptions) -> Vec<BenchRow> {
    let mut rows = Vec::new();
    for case in cases {
        let mut oracle: HashMap<ObjectiveKind, Option<f64>> = HashMap::new();
        for &algo in &opts.algorithms {
            let kind = algo.kind();
            let opt = *oracle
                .entry(kind)
                .or_insert_with(|| exact_chromatic(&case.instance, kind, ORACLE_TOL).ok().map(|r| r.objective));
            for &seed in &opts.seeds {
                let cfg = PeelingConfig { seed, ..opts.config.clone() };
                let start = Instant::now();
                let result = run_solver(&case.instance, algo, &cfg);
                let seconds = opts.timing.then(|| start.elapsed().as_secs_f64());
                let (status, objective) = match result {
                    Ok(rep) => ("ok".to_string(), Some(rep.objective)),
                    Err(e) => (e.to_string(), None),
                };
                let ratio = match (objective, opt) {
                    (Some(v), Some(o)) if o > 0.0 => Some(v / o),
                    (Some(v), Some(_)) if v <= 0.0 => Some(1.0),
                    _ => None,
                };
                let (c_hat, bound) = match algo {
                    Algorithm::ConstantMeans | Algorithm::ConstantMedians => {
                        constant_bound(&case.instance, kind, &cfg).ok().map_or((None, None), |(c, b)| (Some(c), Some(b)))
                    }
                    _ => (None, None),
                };
                rows.push(BenchRow {
                    instance: case.name.clone(),
                    algorithm: algo,
                    seed,
                    status,
                    objective,
                    oracle: opt,
                    ratio,
                    c_hat,
                    bound,
                    seconds,
                });
            }
        }
    }
    rows
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x}"))
}

/// Renders rows under [`BENCH_HEADER`]; tabs and newlines inside fields are
/// replaced by spaces.
pub fn bench_table(rows: &[BenchRow]) -> String {
    let mut out = String::from(BENCH_HEADER);
    out.push('\n');
    for r in rows {
        let status = r.status.replace(['\t', '\n'], " ");
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.instance,
            r.algorithm,
            r.seed,
            status,
            cell(r.objective),
            cell(r.oracle),
            cell(r.ratio),
            cell(r.c_hat),
            cell(r.bound),
            cell(r.seconds)
        );
    }
    out
}
