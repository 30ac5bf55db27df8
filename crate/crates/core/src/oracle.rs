//! Exhaustive exact solvers for tiny instances.

use std::collections::HashMap;
use std::time::Instant;

use itertools::Itertools;
use rayon::prelude::*;

use crate::baseline::BaselineResult;
use crate::error::{Error, Result};
use crate::geometry::{
    mean_of, objective_of, sum_of_distances, weiszfeld, CenterTuple, ChromaticPartition, Instance, MedianOptions,
    ObjectiveKind, Point,
};
use crate::report::SolveReport;

/// Largest number of assignments either oracle will enumerate.
pub const ENUMERATION_LIMIT: f64 = 1e6;

/// Number of chromatic assignments: `Π_i k!/(k−k_i)!`.
pub fn chromatic_count(inst: &Instance) -> f64 {
    inst.groups().iter().map(|g| falling(inst.k(), g.len())).product()
}

fn falling(k: usize, r: usize) -> f64 {
    (0..r).map(|i| (k - i) as f64).product()
}

/// Number of partitions of `n` labeled points into at most `k` nonempty
/// unlabeled blocks, `Σ_{i≤k} S(n, i)`.
pub fn partition_count(n: usize, k: usize) -> f64 {
    // row of Stirling numbers of the second kind
    let mut row = vec![0.0f64; k + 1];
    row[0] = 1.0;
    for _ in 0..n {
        for i in (1..=k).rev() {
            row[i] = i as f64 * row[i] + row[i - 1];
        }
        row[0] = 0.0;
    }
    row.iter().sum()
}

/// Cost of one cluster given its members, with memoized medians.
struct ClusterCost<'a> {
    points: &'a [&'a [f64]],
    d: usize,
    kind: ObjectiveKind,
    median: MedianOptions,
    cache: HashMap<Vec<u64>, f64>,
    key: Vec<u64>,
    scratch: Vec<&'a [f64]>,
}

impl<'a> ClusterCost<'a> {
    fn new(points: &'a [&'a [f64]], d: usize, kind: ObjectiveKind, tol: f64) -> Self {
        ClusterCost {
            points,
            d,
            kind,
            median: MedianOptions::with_tol(tol),
            cache: HashMap::new(),
            key: Vec::new(),
            scratch: Vec::new(),
        }
    }

    fn cost(&mut self, members: &[usize]) -> Result<f64> {
        if members.len() <= 1 {
            return Ok(0.0);
        }
        self.scratch.clear();
        self.scratch.extend(members.iter().map(|&i| self.points[i]));
        match self.kind {
            ObjectiveKind::Means => {
                let m = mean_of(self.scratch.iter().copied(), self.d);
                Ok(self.scratch.iter().map(|p| crate::geometry::dist2(p, &m)).sum())
            }
            ObjectiveKind::Medians => {
                self.key.clear();
                self.key.resize(self.points.len().div_ceil(64), 0);
                for &i in members {
                    self.key[i / 64] |= 1 << (i % 64);
                }
                if let Some(&c) = self.cache.get(self.key.as_slice()) {
                    return Ok(c);
                }
                let m = weiszfeld(&self.scratch, self.d, &self.median)?;
                let c = sum_of_distances(&self.scratch, &m);
                self.cache.insert(self.key.clone(), c);
                Ok(c)
            }
        }
    }

    fn center(&self, members: &[usize], fallback: &[f64]) -> Result<Point> {
        if members.is_empty() {
            return Ok(Point::from(fallback));
        }
        let pts: Vec<&[f64]> = members.iter().map(|&i| self.points[i]).collect();
        Ok(Point::from(match self.kind {
            ObjectiveKind::Means => mean_of(pts.iter().copied(), self.d),
            ObjectiveKind::Medians => weiszfeld(&pts, self.d, &self.median)?,
        }))
    }
}

/// Optimal chromatic clustering by enumerating every chromatic assignment.
///
/// Centers of empty clusters are placed on the first point of the instance.
pub fn exact_chromatic(inst: &Instance, kind: ObjectiveKind, tol: f64) -> Result<SolveReport> {
    let start = Instant::now();
    let count = chromatic_count(inst);
    if count > ENUMERATION_LIMIT {
        return Err(Error::TooLarge { count, limit: ENUMERATION_LIMIT });
    }
    let k = inst.k();
    let all = inst.all_points();
    let slices: Vec<&[f64]> = all.iter().map(|p| p.coords()).collect();
    let maps: Vec<Vec<Vec<usize>>> =
        inst.groups().iter().map(|g| (0..k).permutations(g.len()).collect()).collect();
    let offsets = inst.offsets();

    struct Search<'s, 'a> {
        maps: &'s [Vec<Vec<usize>>],
        offsets: &'s [usize],
        costs: ClusterCost<'a>,
        clusters: Vec<Vec<usize>>,
        choice: Vec<usize>,
        best: Option<(f64, Vec<usize>)>,
    }

    impl Search<'_, '_> {
        fn run(&mut self, g: usize) -> Result<()> {
            if g == self.maps.len() {
                let mut total = 0.0;
                for c in 0..self.clusters.len() {
                    let members = std::mem::take(&mut self.clusters[c]);
                    let cost = self.costs.cost(&members);
                    self.clusters[c] = members;
                    total += cost?;
                }
                if self.best.as_ref().is_none_or(|(b, _)| total < *b) {
                    self.best = Some((total, self.choice.clone()));
                }
                return Ok(());
            }
            for (mi, map) in self.maps[g].iter().enumerate() {
                for (i, &c) in map.iter().enumerate() {
                    self.clusters[c].push(self.offsets[g] + i);
                }
                self.choice.push(mi);
                let res = self.run(g + 1);
                self.choice.pop();
                for &c in map {
                    self.clusters[c].pop();
                }
                res?;
            }
            Ok(())
        }
    }

    let best = (0..maps[0].len())
        .into_par_iter()
        .map(|first| -> Result<Option<(f64, Vec<usize>)>> {
            let mut search = Search {
                maps: &maps,
                offsets,
                costs: ClusterCost::new(&slices, inst.dim(), kind, tol),
                clusters: vec![Vec::new(); k],
                choice: vec![first],
                best: None,
            };
            for (i, &c) in maps[0][first].iter().enumerate() {
                search.clusters[c].push(i);
            }
            search.run(1)?;
            Ok(search.best)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .fold(None, |acc: Option<(f64, Vec<usize>)>, cand| match acc {
            Some(a) if a.0 <= cand.0 => Some(a),
            _ => Some(cand),
        })
        .expect("at least one assignment");

    let rows: Vec<Vec<usize>> = best.1.iter().enumerate().map(|(g, &mi)| maps[g][mi].clone()).collect();
    let partition = ChromaticPartition::new(inst, rows)?;
    let costs = ClusterCost::new(&slices, inst.dim(), kind, tol);
    let centers = partition
        .clusters(inst)
        .iter()
        .map(|m| costs.center(m, slices[0]))
        .collect::<Result<Vec<_>>>()?;
    let centers = CenterTuple::new(centers)?;
    let objective = objective_of(kind, inst, &centers, &partition)?;
    Ok(SolveReport {
        algorithm: format!("oracle-{kind}"),
        kind,
        centers,
        partition,
        objective,
        elapsed: start.elapsed(),
        seed: 0,
        candidates: count as u64,
        heuristic: false,
    })
}

/// Optimal unconstrained clustering into at most `k` clusters, by
/// enumerating set partitions (restricted growth strings). Objective is the
/// total, unnormalized cost.
pub fn exact_unconstrained(points: &[Point], k: usize, kind: ObjectiveKind, tol: f64) -> Result<BaselineResult> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    let first = points.first().ok_or(Error::EmptySet)?;
    let d = first.dim();
    if let Some(p) = points.iter().find(|p| p.dim() != d) {
        return Err(Error::DimensionMismatch { expected: d, found: p.dim() });
    }
    let count = partition_count(points.len(), k);
    if count > ENUMERATION_LIMIT {
        return Err(Error::TooLarge { count, limit: ENUMERATION_LIMIT });
    }
    let slices: Vec<&[f64]> = points.iter().map(|p| p.coords()).collect();
    let mut costs = ClusterCost::new(&slices, d, kind, tol);
    let mut labels = vec![0usize; points.len()];
    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut best: Option<(f64, Vec<usize>)> = None;

    #[allow(clippy::too_many_arguments)]
    fn rec(
        i: usize,
        used: usize,
        k: usize,
        labels: &mut [usize],
        clusters: &mut [Vec<usize>],
        costs: &mut ClusterCost<'_>,
        best: &mut Option<(f64, Vec<usize>)>,
    ) -> Result<()> {
        if i == labels.len() {
            let mut total = 0.0;
            for c in 0..used {
                total += costs.cost(&clusters[c])?;
            }
            if best.as_ref().is_none_or(|(b, _)| total < *b) {
                *best = Some((total, labels.to_vec()));
            }
            return Ok(());
        }
        for c in 0..(used + 1).min(k) {
            labels[i] = c;
            clusters[c].push(i);
            let res = rec(i + 1, used.max(c + 1), k, labels, clusters, costs, best);
            clusters[c].pop();
            res?;
        }
        Ok(())
    }

    rec(0, 0, k, &mut labels, &mut clusters, &mut costs, &mut best)?;
    let (_, labels) = best.expect("at least one partition");
    let mut clusters = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        clusters[l].push(i);
    }
    let centers = clusters.iter().map(|m| costs.center(m, first)).collect::<Result<Vec<_>>>()?;
    let objective = clusters
        .iter()
        .zip(&centers)
        .flat_map(|(m, c)| m.iter().map(move |&i| kind.cost(&points[i], c)))
        .sum();
    Ok(BaselineResult { kind, centers: CenterTuple::new(centers)?, clusters, objective, restarts_used: 0 })
}
