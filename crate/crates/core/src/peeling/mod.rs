//! Sphere-peeling tree search for chromatic k-means and k-medians, and the
//! sampling solver for full instances.
//!
//! Each search tree has height `k`; a root-to-leaf path is a center tuple.
//! A node at depth `j` peels away every point within radius `r` of its `j`
//! path centers, samples the points that remain, and proposes children from
//! subsets of the sample: grid points in the simplex spanned by the path and
//! the subset mean (means), or subset medians plus copies of the path
//! centers (medians).

mod full;
mod search;

use std::collections::HashSet;

use itertools::Itertools;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist, mean_of, weiszfeld, Instance, MedianOptions, ObjectiveKind, Point};
use crate::rng;
use crate::simplex_grid::{capped_grid_into, SimplexGridParams};

pub use full::solve_full_kcmeans_sampling;
pub use search::{peeling_baseline, solve_kcmeans_peeling, solve_kcmedians_peeling, solve_peeling};

/// Default for [`PeelingConfig::grid_cap`].
pub const DEFAULT_GRID_CAP: usize = 16;

/// Tuning of the peeling and sampling solvers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeelingConfig {
    pub epsilon: f64,
    /// Upper limit on the per-node sample size.
    pub sample_size_cap: usize,
    /// Upper limit on the number of enumerated sample subsets per node.
    pub subset_cap: usize,
    /// Keep only this many partial paths per level (voids the guarantee).
    pub beam_width: Option<usize>,
    /// Number of δ values tried; `None` selects `⌈2k/ε⌉` (means) or
    /// `⌈4k/ε⌉` (medians).
    pub delta_steps: Option<usize>,
    /// Independent repetitions; the best one is returned.
    pub runs: usize,
    pub seed: u64,
    /// Node budget for unpruned searches.
    pub max_nodes: u64,
    /// Use the full sample-size formula instead of `sample_size_cap`.
    pub uncapped_sample: bool,
    /// Most grid points per simplex; denser grids are coarsened by
    /// growing the grid epsilon.
    pub grid_cap: usize,
    pub baseline_restarts: usize,
    /// Weiszfeld tolerance for candidate medians.
    pub median_tol: f64,
    /// Refine the winning tuple by alternating re-centering and matching.
    pub polish: bool,
}

impl Default for PeelingConfig {
    fn default() -> Self {
        PeelingConfig {
            epsilon: 0.3,
            sample_size_cap: 6,
            subset_cap: 1 << 18,
            beam_width: None,
            delta_steps: None,
            runs: 1,
            seed: 0,
            max_nodes: 20_000_000,
            uncapped_sample: false,
            grid_cap: DEFAULT_GRID_CAP,
            baseline_restarts: 10,
            median_tol: 1e-7,
            polish: true,
        }
    }
}

impl PeelingConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        PeelingConfig { epsilon, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if self.sample_size_cap == 0 || self.subset_cap == 0 || self.runs == 0 || self.max_nodes == 0 {
            return bad("caps, runs and max_nodes must be at least 1".into());
        }
        if self.beam_width == Some(0) {
            return bad("beam width must be at least 1".into());
        }
        if self.delta_steps == Some(0) {
            return bad("delta_steps must be at least 1".into());
        }
        if self.grid_cap == 0 {
            return bad("grid_cap must be at least 1".into());
        }
        if !(self.median_tol > 0.0) {
            return bad(format!("median tolerance must be > 0, got {}", self.median_tol));
        }
        Ok(())
    }

    pub fn delta_steps_for(&self, kind: ObjectiveKind, k: usize) -> usize {
        self.delta_steps.unwrap_or_else(|| {
            let per = match kind {
                ObjectiveKind::Means => 2.0,
                ObjectiveKind::Medians => 4.0,
            };
            (per * k as f64 / self.epsilon).ceil() as usize
        })
    }

    /// The sample size `m = (8k³/ε⁹)·ln(k²/ε⁶)`, capped unless
    /// `uncapped_sample` is set.
    pub fn sample_size(&self, k: usize) -> usize {
        let k = k as f64;
        let e = self.epsilon;
        let formula = (8.0 * k.powi(3) / e.powi(9) * (k * k / e.powi(6)).ln()).ceil();
        if self.uncapped_sample {
            formula.min(usize::MAX as f64) as usize
        } else {
            (formula as usize).clamp(1, self.sample_size_cap)
        }
    }
}

/// Number of radius candidates before deduplication:
/// `(⌈log₂(kn)⌉ + 1)·(⌈4 + 2/ε⌉ + 1)`.
pub fn radius_candidate_count(n: usize, k: usize, epsilon: f64) -> usize {
    (t_max(n, k) + 1) * (l_max(epsilon) + 1)
}

fn t_max(n: usize, k: usize) -> usize {
    ((k * n) as f64).log2().ceil().max(0.0) as usize
}

fn l_max(epsilon: f64) -> usize {
    // guard against 2/ε landing a hair above an integer
    (4.0 + 2.0 / epsilon - 1e-12).ceil() as usize
}

/// Peeling radii for a node at depth `j`:
/// `{ (1 + lε/2)/(2(1+ε)) · j · 2^{t/2} · √ε · δ }` over
/// `t = 0..=⌈log₂(kn)⌉`, `l = 0..=⌈4 + 2/ε⌉`, sorted ascending and
/// deduplicated at 1e-12 relative. The root (`j = 0`) has no balls and gets
/// the single radius 0.
pub fn radius_candidates(j: usize, n: usize, k: usize, epsilon: f64, delta: f64) -> Vec<f64> {
    if j == 0 {
        return vec![0.0];
    }
    let mut out = Vec::with_capacity(radius_candidate_count(n, k, epsilon));
    for t in 0..=t_max(n, k) {
        for l in 0..=l_max(epsilon) {
            let r = (1.0 + l as f64 * epsilon / 2.0) / (2.0 * (1.0 + epsilon))
                * j as f64
                * 2f64.powf(t as f64 / 2.0)
                * epsilon.sqrt()
                * delta;
            out.push(r);
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup_by(|b, a| (*b - *a).abs() <= 1e-12 * a.abs().max(b.abs()));
    out
}

/// Indices of points strictly outside every ball `B(center, radius)`.
pub(crate) fn outside(coords: &[f64], d: usize, centers: &[&[f64]], radius: f64) -> Vec<usize> {
    coords
        .chunks_exact(d)
        .enumerate()
        .filter(|(_, p)| centers.iter().all(|c| dist(p, c) > radius))
        .map(|(i, _)| i)
        .collect()
}

/// Uniform sample of `size` indices from `pool`: without replacement when
/// the pool is large enough, with replacement otherwise.
pub(crate) fn sample_indices(pool: &[usize], size: usize, rng: &mut impl Rng) -> Vec<usize> {
    if pool.is_empty() || size == 0 {
        return Vec::new();
    }
    if pool.len() >= size {
        index::sample(rng, pool.len(), size).into_iter().map(|i| pool[i]).collect()
    } else {
        (0..size).map(|_| pool[rng.random_range(0..pool.len())]).collect()
    }
}

/// Random sample of the instance points lying strictly outside every ball of
/// the given radius around `centers`.
pub fn peel_sample(inst: &Instance, centers: &[Point], radius: f64, sample_size: usize, seed: u64) -> Vec<Point> {
    let coords = inst.flat_coords();
    let d = inst.dim();
    let slices: Vec<&[f64]> = centers.iter().map(|c| c.coords()).collect();
    let pool = outside(&coords, d, &slices, radius);
    let mut rng = rng::stream(seed);
    sample_indices(&pool, sample_size, &mut rng)
        .into_iter()
        .map(|i| Point::from(&coords[i * d..(i + 1) * d]))
        .collect()
}

/// Nonempty subsets of the distinct sample points, by increasing size, at
/// most `cap` of them.
pub(crate) fn subsets(distinct: usize, cap: usize) -> impl Iterator<Item = Vec<usize>> {
    (1..=distinct).flat_map(move |s| (0..distinct).combinations(s)).take(cap)
}

/// Distinct points of `sample` (exact coordinate equality), first
/// occurrence order.
fn distinct_points(sample: &[Point]) -> Vec<&[f64]> {
    let mut out: Vec<&[f64]> = Vec::new();
    for p in sample {
        if !out.iter().any(|q| *q == p.coords()) {
            out.push(p.coords());
        }
    }
    out
}

/// Removes points equal up to 1e-12 relative to `scale`.
pub(crate) struct Dedup {
    seen: HashSet<Vec<i64>>,
    unit: f64,
}

impl Dedup {
    pub(crate) fn new(scale: f64) -> Self {
        Dedup { seen: HashSet::new(), unit: 1e-12 * scale.max(1.0) }
    }

    /// Returns `true` the first time a point is seen.
    pub(crate) fn insert(&mut self, p: &[f64]) -> bool {
        let key = p.iter().map(|c| (c / self.unit).round() as i64).collect();
        self.seen.insert(key)
    }
}

fn scale_of<'a>(pts: impl IntoIterator<Item = &'a [f64]>) -> f64 {
    pts.into_iter().flat_map(|p| p.iter()).fold(0.0f64, |m, c| m.max(c.abs()))
}

fn check_dims(path: &[Point], sample: &[Point]) -> Result<usize> {
    let d = path.first().or(sample.first()).map(|p| p.dim()).ok_or(Error::EmptySet)?;
    match path.iter().chain(sample).find(|p| p.dim() != d) {
        Some(p) => Err(Error::DimensionMismatch { expected: d, found: p.dim() }),
        None => Ok(d),
    }
}

/// Children of a k-CMeans peeling node: grid points of the simplex spanned
/// by `path` and each subset mean of `sample`, plus the grid of `path`
/// alone, all with grid epsilon `ε²/4` (coarsened when a grid would exceed
/// `grid.max_points`).
pub fn candidate_children_means(
    path: &[Point],
    sample: &[Point],
    epsilon: f64,
    subset_cap: usize,
    grid: &SimplexGridParams,
) -> Result<Vec<Point>> {
    if path.is_empty() && sample.is_empty() {
        return Ok(Vec::new());
    }
    let d = check_dims(path, sample)?;
    let eps0 = epsilon * epsilon / 4.0;
    let distinct = distinct_points(sample);
    let mut vertices: Vec<&[f64]> = path.iter().map(|p| p.coords()).collect();
    let mut flat = Vec::new();
    let mut subset_means = Vec::new();
    for s in subsets(distinct.len(), subset_cap) {
        subset_means.push(mean_of(s.iter().map(|&i| distinct[i]), d));
    }
    for m in &subset_means {
        vertices.push(m);
        capped_grid_into(&vertices, eps0, grid.simplex_only, grid.max_points, &mut flat)?;
        vertices.pop();
    }
    if !vertices.is_empty() {
        capped_grid_into(&vertices, eps0, grid.simplex_only, grid.max_points, &mut flat)?;
    }
    let mut dedup = Dedup::new(scale_of(flat.chunks_exact(d)));
    Ok(flat.chunks_exact(d).filter(|p| dedup.insert(p)).map(Point::from).collect())
}

/// Children of a k-CMedians peeling node: the Weiszfeld median of every
/// sample subset plus a copy of every path center.
pub fn candidate_children_medians(path: &[Point], sample: &[Point], subset_cap: usize, tol: f64) -> Result<Vec<Point>> {
    if path.is_empty() && sample.is_empty() {
        return Ok(Vec::new());
    }
    let d = check_dims(path, sample)?;
    let distinct = distinct_points(sample);
    let opts = MedianOptions::with_tol(tol);
    let mut flat: Vec<f64> = Vec::new();
    for s in subsets(distinct.len(), subset_cap) {
        let pts: Vec<&[f64]> = s.iter().map(|&i| distinct[i]).collect();
        flat.extend(weiszfeld(&pts, d, &opts)?);
    }
    for p in path {
        flat.extend_from_slice(p);
    }
    let mut dedup = Dedup::new(scale_of(flat.chunks_exact(d)));
    Ok(flat.chunks_exact(d).filter(|p| dedup.insert(p)).map(Point::from).collect())
}
