//! Unconstrained k-means / k-medians by seeded Lloyd iterations.
//!
//! Seeding is k-means++ (squared-distance sampling) for means and its
//! distance-proportional analog for medians. Center updates are exact means
//! or Weiszfeld medians.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{mean_of, sum_of_distances, weiszfeld, CenterTuple, MedianOptions, ObjectiveKind, Point};
use crate::rng;

/// Result of an unconstrained clustering run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub kind: ObjectiveKind,
    pub centers: CenterTuple,
    /// Point indices of each cluster, ascending.
    pub clusters: Vec<Vec<usize>>,
    /// Total (unnormalized) cost.
    pub objective: f64,
    pub restarts_used: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BaselineOptions {
    pub restarts: usize,
    pub max_iter: usize,
    pub median: MedianOptions,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        BaselineOptions { restarts: 10, max_iter: 300, median: MedianOptions::default() }
    }
}

/// Best of `restarts` k-means++ / Lloyd runs.
pub fn kmeans_baseline(points: &[Point], k: usize, seed: u64, restarts: usize) -> Result<BaselineResult> {
    let opts = BaselineOptions { restarts, ..Default::default() };
    baseline_with(points, k, ObjectiveKind::Means, seed, &opts)
}

/// Best of `restarts` seeded runs with Weiszfeld center updates.
pub fn kmedians_baseline(points: &[Point], k: usize, seed: u64, restarts: usize, tol: f64) -> Result<BaselineResult> {
    let opts = BaselineOptions { restarts, median: MedianOptions::with_tol(tol), ..Default::default() };
    baseline_with(points, k, ObjectiveKind::Medians, seed, &opts)
}

pub fn baseline_with(
    points: &[Point],
    k: usize,
    kind: ObjectiveKind,
    seed: u64,
    opts: &BaselineOptions,
) -> Result<BaselineResult> {
    check_input(points, k)?;
    if opts.restarts == 0 {
        return Err(Error::InvalidConfig("restarts must be at least 1".into()));
    }
    let runs: Vec<Result<(BaselineResult, Vec<f64>)>> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| single_run(points, k, kind, rng::fold(seed, [r as u64]), opts))
        .collect();
    let mut best: Option<BaselineResult> = None;
    for run in runs {
        let (res, _) = run?;
        if best.as_ref().is_none_or(|b| res.objective < b.objective) {
            best = Some(res);
        }
    }
    let mut best = best.expect("at least one restart");
    best.restarts_used = opts.restarts;
    Ok(best)
}

/// One seeded run, returning the cost after every iteration as well.
pub fn lloyd_trace(
    points: &[Point],
    k: usize,
    kind: ObjectiveKind,
    seed: u64,
    opts: &BaselineOptions,
) -> Result<(BaselineResult, Vec<f64>)> {
    check_input(points, k)?;
    single_run(points, k, kind, seed, opts)
}

fn check_input(points: &[Point], k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if points.len() < k {
        return Err(Error::TooFewPoints { k, points: points.len() });
    }
    let d = points[0].dim();
    match points.iter().find(|p| p.dim() != d) {
        Some(p) => Err(Error::DimensionMismatch { expected: d, found: p.dim() }),
        None => Ok(()),
    }
}

fn seed_centers(points: &[Point], k: usize, kind: ObjectiveKind, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centers = vec![points[rng.random_range(0..n)].to_vec()];
    let mut weight: Vec<f64> = points.iter().map(|p| kind.cost(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = weight.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, w) in weight.iter().enumerate() {
                if target < *w {
                    idx = i;
                    break;
                }
                target -= w;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick].to_vec();
        for (w, p) in weight.iter_mut().zip(points) {
            *w = w.min(kind.cost(p, &c));
        }
        centers.push(c);
    }
    centers
}

fn nearest(p: &[f64], centers: &[Vec<f64>], kind: ObjectiveKind) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let cost = kind.cost(p, center);
        if cost < best.1 {
            best = (c, cost);
        }
    }
    best
}

fn single_run(
    points: &[Point],
    k: usize,
    kind: ObjectiveKind,
    seed: u64,
    opts: &BaselineOptions,
) -> Result<(BaselineResult, Vec<f64>)> {
    let mut rng = rng::stream(seed);
    let d = points[0].dim();
    let mut centers = seed_centers(points, k, kind, &mut rng);
    let mut labels = vec![usize::MAX; points.len()];
    let mut trace = Vec::new();
    for _ in 0..opts.max_iter.max(1) {
        let mut changed = false;
        let mut cost = vec![0.0; points.len()];
        for (i, p) in points.iter().enumerate() {
            let (c, v) = nearest(p, &centers, kind);
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
            cost[i] = v;
        }
        changed |= repair_empty(points, &mut labels, &mut cost, &mut centers);
        if !changed && !trace.is_empty() {
            break;
        }
        update_centers(points, &labels, &mut centers, kind, d, opts)?;
        trace.push(total_cost(points, &labels, &centers, kind));
    }
    let clusters = clusters_of(&labels, k);
    let objective = total_cost(points, &labels, &centers, kind);
    let centers = CenterTuple::new(centers.into_iter().map(Point::from).collect())?;
    Ok((BaselineResult { kind, centers, clusters, objective, restarts_used: 1 }, trace))
}

/// Moves the worst-served point into each empty cluster. Returns whether
/// anything moved.
fn repair_empty(points: &[Point], labels: &mut [usize], cost: &mut [f64], centers: &mut [Vec<f64>]) -> bool {
    let k = centers.len();
    let mut moved = false;
    loop {
        let mut sizes = vec![0usize; k];
        labels.iter().for_each(|&l| sizes[l] += 1);
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return moved;
        };
        let donor = (0..points.len())
            .filter(|&i| sizes[labels[i]] > 1)
            .max_by(|&a, &b| cost[a].total_cmp(&cost[b]).then(b.cmp(&a)))
            .expect("more points than clusters");
        labels[donor] = empty;
        cost[donor] = 0.0;
        centers[empty] = points[donor].to_vec();
        moved = true;
    }
}

fn update_centers(
    points: &[Point],
    labels: &[usize],
    centers: &mut [Vec<f64>],
    kind: ObjectiveKind,
    d: usize,
    opts: &BaselineOptions,
) -> Result<()> {
    for (c, members) in clusters_of(labels, centers.len()).iter().enumerate() {
        let slices: Vec<&[f64]> = members.iter().map(|&i| points[i].coords()).collect();
        match kind {
            ObjectiveKind::Means => centers[c] = mean_of(slices.iter().copied(), d),
            ObjectiveKind::Medians => {
                let m = weiszfeld(&slices, d, &opts.median)?;
                // keep the old center unless the new one is strictly better
                if sum_of_distances(&slices, &m) < sum_of_distances(&slices, &centers[c]) {
                    centers[c] = m;
                }
            }
        }
    }
    Ok(())
}

fn clusters_of(labels: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut clusters = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        clusters[l].push(i);
    }
    clusters
}

fn total_cost(points: &[Point], labels: &[usize], centers: &[Vec<f64>], kind: ObjectiveKind) -> f64 {
    points.iter().zip(labels).map(|(p, &l)| kind.cost(p, &centers[l])).sum()
}
