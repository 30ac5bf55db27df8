use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use log::{debug, info};

use super::{outside, radius_candidates, sample_indices, subsets, Dedup, PeelingConfig};
use crate::assignment::{assign_all, polish, TupleEvaluator};
use crate::baseline::{baseline_with, BaselineOptions, BaselineResult};
use crate::constant_approx::{constant_with, ConstantOptions};
use crate::error::{Error, Result};
use crate::geometry::{dist, mean_of, weiszfeld, CenterTuple, Instance, MedianOptions, ObjectiveKind, Point};
use crate::report::SolveReport;
use crate::rng;
use crate::simplex_grid::capped_grid_into;

/// Floats kept in the interior children cache, per run.
const CHILD_CACHE_FLOATS: usize = 50_000_000;

pub fn solve_kcmeans_peeling(inst: &Instance, cfg: &PeelingConfig) -> Result<SolveReport> {
    solve_peeling(inst, ObjectiveKind::Means, cfg)
}

pub fn solve_kcmedians_peeling(inst: &Instance, cfg: &PeelingConfig) -> Result<SolveReport> {
    solve_peeling(inst, ObjectiveKind::Medians, cfg)
}

/// The unconstrained clustering that seeds the δ range and the fallback
/// tuple; the constant-factor solvers use the same one for a given config.
pub fn peeling_baseline(inst: &Instance, kind: ObjectiveKind, cfg: &PeelingConfig) -> Result<BaselineResult> {
    let median = MedianOptions::with_tol(cfg.median_tol);
    let opts = BaselineOptions { restarts: cfg.baseline_restarts, median, ..Default::default() };
    baseline_with(&inst.all_points(), inst.k(), kind, rng::named(cfg.seed, "baseline"), &opts)
}

/// Runs the sphere-peeling search and returns the best tuple found over all
/// δ values and runs, never worse than the constant-factor tuple.
pub fn solve_peeling(inst: &Instance, kind: ObjectiveKind, cfg: &PeelingConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let start = Instant::now();
    let k = inst.k();
    let npts = inst.total_points() as f64;
    let median = MedianOptions::with_tol(cfg.median_tol);
    let baseline = peeling_baseline(inst, kind, cfg)?;
    let fallback = match constant_with(inst, &baseline, kind, &ConstantOptions::default()) {
        Ok(rep) => Some(rep),
        Err(Error::TooLarge { .. }) => None,
        Err(e) => return Err(e),
    };

    // per-point scale of the optimum, bracketed from above
    let upper = fallback.as_ref().map_or(0.0, |f| f.objective * inst.n() as f64);
    let scale = baseline.objective.max(upper) / npts;
    let steps = cfg.delta_steps_for(kind, k);
    let kf = k as f64;
    let deltas: Vec<f64> = (1..=steps)
        .map(|i| {
            let i = i as f64;
            match kind {
                ObjectiveKind::Means => {
                    let s = scale.sqrt();
                    s / (2.0 * kf) + i * cfg.epsilon / (2.0 * kf) * s
                }
                ObjectiveKind::Medians => scale / (4.0 * kf) + i * cfg.epsilon / (4.0 * kf) * scale,
            }
        })
        .collect();
    info!("peeling {kind}: k = {k}, {} delta values, scale {scale:.6}", deltas.len());

    let mut eval = TupleEvaluator::new(inst, kind);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut evaluated = 0u64;
    let peel_seed = rng::named(cfg.seed, "peeling");
    let baseline_centers: Vec<Vec<f64>> = baseline.centers.iter().map(|c| c.to_vec()).collect();
    for run in 0..cfg.runs {
        let mut engine = Engine::new(inst, kind, cfg, rng::fold(peel_seed, [run as u64]), &baseline_centers)?;
        for &delta in &deltas {
            engine.search(delta)?;
        }
        evaluated += engine.leaves;
        debug!("run {run}: {} nodes, {} leaves, best {:?}", engine.nodes, engine.leaves, engine.best.as_ref().map(|b| b.0));
        if let Some((cost, centers)) = engine.best {
            if best.as_ref().is_none_or(|b| cost < b.0) {
                best = Some((cost, centers));
            }
        }
    }
    if let Some(f) = &fallback {
        let flat: Vec<f64> = f.centers.iter().flat_map(|c| c.iter().copied()).collect();
        let refs: Vec<&[f64]> = flat.chunks_exact(inst.dim()).collect();
        let cost = eval.total_cost(&refs);
        evaluated += 1;
        if best.as_ref().is_none_or(|b| cost < b.0) {
            best = Some((cost, flat));
        }
    }
    let (_, flat) = best.ok_or_else(|| Error::InvalidInstance("search produced no candidate".into()))?;
    let centers = CenterTuple::new(flat.chunks_exact(inst.dim()).map(Point::from).collect())?;
    let (centers, partition, objective) = if cfg.polish {
        polish(inst, centers, kind, &median, 100)?
    } else {
        let (p, o) = assign_all(inst, &centers, kind.into())?;
        (centers, p, o)
    };
    Ok(SolveReport {
        algorithm: format!("peel-{kind}"),
        kind,
        centers,
        partition,
        objective,
        elapsed: start.elapsed(),
        seed: cfg.seed,
        candidates: evaluated,
        heuristic: cfg.beam_width.is_some(),
    })
}

type CacheKey = (u64, Vec<u64>);

/// One run of the tree search; caches are shared by all δ trees of the run.
struct Engine<'a> {
    kind: ObjectiveKind,
    k: usize,
    n: usize,
    d: usize,
    cfg: &'a PeelingConfig,
    coords: Vec<f64>,
    npts: usize,
    eval: TupleEvaluator,
    eps0: f64,
    sample_size: usize,
    run_seed: u64,
    median: MedianOptions,
    baseline: &'a [Vec<f64>],
    dedup_scale: f64,
    leaf_cache: HashMap<CacheKey, Option<(f64, Vec<f64>)>>,
    child_cache: HashMap<CacheKey, Arc<Vec<f64>>>,
    cached_floats: usize,
    nodes: u64,
    leaves: u64,
    best: Option<(f64, Vec<f64>)>,
    grid_buf: Vec<f64>,
    column: Vec<f64>,
}

fn path_hash(path: &[f64]) -> u64 {
    rng::fold(0x5eed, path.iter().map(|c| c.to_bits()))
}

fn set_bits(set: &[usize], npts: usize) -> Vec<u64> {
    let mut bits = vec![0u64; npts.div_ceil(64)];
    for &i in set {
        bits[i / 64] |= 1 << (i % 64);
    }
    bits
}

/// Key for the children that depend on the path only.
fn path_only_bits() -> Vec<u64> {
    vec![u64::MAX]
}

impl<'a> Engine<'a> {
    fn new(
        inst: &Instance,
        kind: ObjectiveKind,
        cfg: &'a PeelingConfig,
        run_seed: u64,
        baseline: &'a [Vec<f64>],
    ) -> Result<Self> {
        let coords = inst.flat_coords();
        let dedup_scale = coords.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        Ok(Engine {
            kind,
            k: inst.k(),
            n: inst.n(),
            d: inst.dim(),
            cfg,
            npts: inst.total_points(),
            coords,
            eval: TupleEvaluator::new(inst, kind),
            eps0: cfg.epsilon * cfg.epsilon / 4.0,
            sample_size: cfg.sample_size(inst.k()),
            run_seed,
            median: MedianOptions::with_tol(cfg.median_tol),
            baseline,
            dedup_scale,
            leaf_cache: HashMap::new(),
            child_cache: HashMap::new(),
            cached_floats: 0,
            nodes: 0,
            leaves: 0,
            best: None,
            grid_buf: Vec::new(),
            column: Vec::new(),
        })
    }

    fn charge(&mut self, count: u64) -> Result<()> {
        self.nodes += count;
        if self.cfg.beam_width.is_none() && self.nodes > self.cfg.max_nodes {
            return Err(Error::BudgetExceeded { nodes: self.nodes, limit: self.cfg.max_nodes });
        }
        Ok(())
    }

    fn search(&mut self, delta: f64) -> Result<()> {
        match self.cfg.beam_width {
            None => {
                let mut path = Vec::with_capacity(self.k * self.d);
                self.dfs(&mut path, delta)
            }
            Some(width) => self.beam(width, delta),
        }
    }

    fn depth(&self, path: &[f64]) -> usize {
        path.len() / self.d
    }

    /// Distinct point sets left outside the peeling balls, over all radii.
    fn outside_sets(&self, path: &[f64], delta: f64) -> Vec<Vec<usize>> {
        let j = self.depth(path);
        if j == 0 {
            return vec![(0..self.npts).collect()];
        }
        let centers: Vec<&[f64]> = path.chunks_exact(self.d).collect();
        let mut sets: Vec<Vec<usize>> = Vec::new();
        for r in radius_candidates(j, self.n, self.k, self.cfg.epsilon, delta) {
            let set = outside(&self.coords, self.d, &centers, r);
            // radii ascend, so the sets are nested and shrinking
            if sets.last().is_none_or(|last| last.len() != set.len()) {
                sets.push(set);
            }
        }
        sets
    }

    /// Distinct coordinates of a seeded sample from `set`.
    fn sample(&self, hash: u64, set: &[usize], bits: &[u64]) -> Vec<usize> {
        let seed = rng::fold(self.run_seed, [hash, rng::fold(0, bits.iter().copied())]);
        let mut rng = rng::stream(seed);
        let mut out: Vec<usize> = Vec::new();
        for i in sample_indices(set, self.sample_size, &mut rng) {
            let p = self.point(i);
            if !out.iter().any(|&q| self.point(q) == p) {
                out.push(i);
            }
        }
        out
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    /// Calls `f` on every child contributed by one outside set (or, when
    /// `set` is `None`, by the path alone).
    fn for_each_child(
        &mut self,
        path: &[f64],
        hash: u64,
        set: Option<(&[usize], &[u64])>,
        f: &mut dyn FnMut(&mut Self, &[f64]) -> Result<()>,
    ) -> Result<()> {
        let d = self.d;
        let vertices: Vec<Vec<f64>> = path.chunks_exact(d).map(|c| c.to_vec()).collect();
        let Some((set, bits)) = set else {
            match self.kind {
                ObjectiveKind::Means => {
                    if vertices.is_empty() {
                        return Ok(());
                    }
                    let refs: Vec<&[f64]> = vertices.iter().map(|v| v.as_slice()).collect();
                    let mut buf = std::mem::take(&mut self.grid_buf);
                    buf.clear();
                    let res = capped_grid_into(&refs, self.eps0, true, self.cfg.grid_cap, &mut buf);
                    let res = res.and_then(|_| buf.chunks_exact(d).try_for_each(|c| f(self, c)));
                    self.grid_buf = buf;
                    return res;
                }
                ObjectiveKind::Medians => {
                    return vertices.iter().try_for_each(|v| f(self, v));
                }
            }
        };
        let sample = self.sample(hash, set, bits);
        let pts: Vec<Vec<f64>> = sample.iter().map(|&i| self.point(i).to_vec()).collect();
        for s in subsets(pts.len(), self.cfg.subset_cap) {
            let members = s.iter().map(|&i| pts[i].as_slice());
            match self.kind {
                ObjectiveKind::Means => {
                    let pi = mean_of(members, d);
                    let mut refs: Vec<&[f64]> = vertices.iter().map(|v| v.as_slice()).collect();
                    refs.push(&pi);
                    let mut buf = std::mem::take(&mut self.grid_buf);
                    buf.clear();
                    let res = capped_grid_into(&refs, self.eps0, true, self.cfg.grid_cap, &mut buf);
                    let res = res.and_then(|_| buf.chunks_exact(d).try_for_each(|c| f(self, c)));
                    self.grid_buf = buf;
                    res?;
                }
                ObjectiveKind::Medians => {
                    let members: Vec<&[f64]> = members.collect();
                    let m = weiszfeld(&members, d, &self.median)?;
                    f(self, &m)?;
                }
            }
        }
        Ok(())
    }

    /// All children of an interior node, deduplicated.
    fn children(&mut self, path: &[f64], delta: f64) -> Result<Vec<f64>> {
        let hash = path_hash(path);
        let mut lists: Vec<Arc<Vec<f64>>> = Vec::new();
        let mut keys: Vec<(Option<Vec<usize>>, Vec<u64>)> =
            self.outside_sets(path, delta).into_iter().map(|s| {
                let bits = set_bits(&s, self.npts);
                (Some(s), bits)
            }).collect();
        keys.push((None, path_only_bits()));
        for (set, bits) in keys {
            let key = (hash, bits);
            if let Some(list) = self.child_cache.get(&key) {
                lists.push(list.clone());
                continue;
            }
            let mut list = Vec::new();
            let arg = set.as_deref().map(|s| (s, key.1.as_slice()));
            self.for_each_child(path, hash, arg, &mut |eng, c| {
                list.extend_from_slice(c);
                eng.charge(1)
            })?;
            let list = Arc::new(list);
            if self.cached_floats + list.len() <= CHILD_CACHE_FLOATS {
                self.cached_floats += list.len();
                self.child_cache.insert(key, list.clone());
            }
            lists.push(list);
        }
        let mut dedup = Dedup::new(self.dedup_scale);
        let mut out = Vec::new();
        for list in lists {
            for c in list.chunks_exact(self.d) {
                if dedup.insert(c) {
                    out.extend_from_slice(c);
                }
            }
        }
        Ok(out)
    }

    /// Evaluates every leaf below a depth `k − 1` node.
    fn leaves_below(&mut self, path: &[f64], delta: f64) -> Result<()> {
        let hash = path_hash(path);
        let columns: Vec<Vec<f64>> = path.chunks_exact(self.d).map(|c| self.eval.column(c)).collect();
        let mut keys: Vec<(Option<Vec<usize>>, Vec<u64>)> = self
            .outside_sets(path, delta)
            .into_iter()
            .map(|s| {
                let bits = set_bits(&s, self.npts);
                (Some(s), bits)
            })
            .collect();
        keys.push((None, path_only_bits()));
        for (set, bits) in keys {
            let key = (hash, bits);
            let found = match self.leaf_cache.get(&key) {
                Some(found) => found.clone(),
                None => {
                    let mut local: Option<(f64, Vec<f64>)> = None;
                    let arg = set.as_deref().map(|s| (s, key.1.as_slice()));
                    self.for_each_child(path, hash, arg, &mut |eng, c| {
                        eng.charge(1)?;
                        eng.leaves += 1;
                        let mut col = std::mem::take(&mut eng.column);
                        eng.eval.fill_column(c, &mut col);
                        let fixed: Vec<&[f64]> = columns.iter().map(|c| c.as_slice()).collect();
                        let cost = eng.eval.total_with_extra(&fixed, &col);
                        eng.column = col;
                        if local.as_ref().is_none_or(|b| cost < b.0) {
                            local = Some((cost, c.to_vec()));
                        }
                        Ok(())
                    })?;
                    self.leaf_cache.insert(key, local.clone());
                    local
                }
            };
            if let Some((cost, last)) = found {
                if self.best.as_ref().is_none_or(|b| cost < b.0) {
                    let mut centers = path.to_vec();
                    centers.extend_from_slice(&last);
                    self.best = Some((cost, centers));
                }
            }
        }
        Ok(())
    }

    fn dfs(&mut self, path: &mut Vec<f64>, delta: f64) -> Result<()> {
        if self.depth(path) == self.k - 1 {
            return self.leaves_below(path, delta);
        }
        let children = self.children(path, delta)?;
        for c in children.chunks_exact(self.d) {
            path.extend_from_slice(c);
            let res = self.dfs(path, delta);
            path.truncate(path.len() - self.d);
            res?;
        }
        Ok(())
    }

    /// Cost of a partial path completed with the baseline centers left after
    /// greedily removing the one nearest to each path center.
    fn padded_score(&mut self, path: &[f64]) -> f64 {
        let mut pool: Vec<&[f64]> = self.baseline.iter().map(|c| c.as_slice()).collect();
        let mut tuple: Vec<&[f64]> = Vec::with_capacity(self.k);
        for c in path.chunks_exact(self.d) {
            tuple.push(c);
            if let Some((idx, _)) =
                pool.iter().enumerate().min_by(|a, b| dist(a.1, c).total_cmp(&dist(b.1, c)))
            {
                pool.remove(idx);
            }
        }
        tuple.extend(pool.into_iter().take(self.k - tuple.len()));
        self.eval.total_cost(&tuple)
    }

    fn beam(&mut self, width: usize, delta: f64) -> Result<()> {
        let mut frontier: Vec<Vec<f64>> = vec![Vec::new()];
        for _ in 0..self.k - 1 {
            let mut scored: Vec<(f64, Vec<f64>)> = Vec::new();
            for path in &frontier {
                let children = self.children(path, delta)?;
                for c in children.chunks_exact(self.d) {
                    let mut next = path.clone();
                    next.extend_from_slice(c);
                    let score = self.padded_score(&next);
                    scored.push((score, next));
                }
            }
            // stable: equal scores keep generation order
            scored.sort_by(|a, b| a.0.total_cmp(&b.0));
            scored.truncate(width);
            frontier = scored.into_iter().map(|(_, p)| p).collect();
        }
        for path in frontier {
            self.leaves_below(&path, delta)?;
        }
        Ok(())
    }
}
