//! Constant-factor chromatic solutions from an unconstrained clustering.
//!
//! Every k-tuple of the baseline centers (with repetition, `k^k` of them) is
//! matched against the instance and the cheapest one wins.

use std::time::Instant;

use rayon::prelude::*;

use crate::assignment::{assign_all, TupleEvaluator};
use crate::baseline::BaselineResult;
use crate::error::{Error, Result};
use crate::geometry::{CenterTuple, Instance, ObjectiveKind};
use crate::report::SolveReport;

/// Largest k enumerated without an explicit override.
pub const MAX_K: usize = 8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConstantOptions {
    /// Enumerate even when `k > MAX_K`.
    pub allow_large_k: bool,
}

/// Digits of tuple `index` in base `k`, most significant first.
pub fn tuple_digits(mut index: u64, k: usize) -> Vec<usize> {
    let mut digits = vec![0; k];
    for slot in (0..k).rev() {
        digits[slot] = (index % k as u64) as usize;
        index /= k as u64;
    }
    digits
}

/// Guaranteed ratio of the means tuple search for a baseline that is a
/// `c_hat`-approximation: `2ĉk² + 2k − 1`.
pub fn means_bound(c_hat: f64, k: usize) -> f64 {
    let k = k as f64;
    2.0 * c_hat * k * k + 2.0 * k - 1.0
}

/// Medians analog `(2+ε)ĉk² + (2+ε)k + 1`, where `ε` is the relative error
/// of the 1-median computations.
pub fn medians_bound(c_hat: f64, k: usize, epsilon: f64) -> f64 {
    let k = k as f64;
    (2.0 + epsilon) * c_hat * k * k + (2.0 + epsilon) * k + 1.0
}

pub fn constant_kcmeans(inst: &Instance, baseline: &BaselineResult) -> Result<SolveReport> {
    constant_with(inst, baseline, ObjectiveKind::Means, &ConstantOptions::default())
}

pub fn constant_kcmedians(inst: &Instance, baseline: &BaselineResult) -> Result<SolveReport> {
    constant_with(inst, baseline, ObjectiveKind::Medians, &ConstantOptions::default())
}

pub fn constant_with(
    inst: &Instance,
    baseline: &BaselineResult,
    kind: ObjectiveKind,
    opts: &ConstantOptions,
) -> Result<SolveReport> {
    let start = Instant::now();
    let k = inst.k();
    baseline.centers.check(inst)?;
    if k > MAX_K && !opts.allow_large_k {
        return Err(Error::TooLarge { count: (k as f64).powi(k as i32), limit: (MAX_K as f64).powi(MAX_K as i32) });
    }
    let (index, _) = best_tuple(inst, &baseline.centers, kind)?;
    let digits = tuple_digits(index, k);
    let centers = CenterTuple::new(digits.iter().map(|&c| baseline.centers[c].clone()).collect())?;
    let (partition, objective) = assign_all(inst, &centers, kind.into())?;
    Ok(SolveReport {
        algorithm: format!("constant-{kind}"),
        kind,
        centers,
        partition,
        objective,
        elapsed: start.elapsed(),
        seed: 0,
        candidates: (k as u64).pow(k as u32),
        heuristic: false,
    })
}

/// Index (mixed-radix order) and total cost of the cheapest k-tuple drawn
/// from `pool`. Ties go to the smallest index.
pub fn best_tuple(inst: &Instance, pool: &CenterTuple, kind: ObjectiveKind) -> Result<(u64, f64)> {
    let k = inst.k();
    let count = (pool.len() as u64).checked_pow(k as u32).ok_or(Error::TooLarge {
        count: (pool.len() as f64).powi(k as i32),
        limit: u64::MAX as f64,
    })?;
    let base = TupleEvaluator::new(inst, kind);
    let columns: Vec<Vec<f64>> = pool.iter().map(|c| base.column(c)).collect();
    let radix = pool.len() as u64;
    let chunk = 4096u64;
    let chunks = count.div_ceil(chunk);
    let best = (0..chunks)
        .into_par_iter()
        .map_init(
            || base.clone(),
            |ev, ch| {
                let mut best = (f64::INFINITY, u64::MAX);
                let mut cols: Vec<&[f64]> = vec![&columns[0]; k];
                for idx in ch * chunk..((ch + 1) * chunk).min(count) {
                    let mut rest = idx;
                    for slot in (0..k).rev() {
                        cols[slot] = &columns[(rest % radix) as usize];
                        rest /= radix;
                    }
                    let cost = ev.total_from_columns(&cols);
                    if cost < best.0 {
                        best = (cost, idx);
                    }
                }
                best
            },
        )
        .reduce(|| (f64::INFINITY, u64::MAX), |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
    Ok((best.1, best.0))
}
