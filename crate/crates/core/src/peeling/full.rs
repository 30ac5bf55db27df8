use std::time::Instant;

use itertools::Itertools;
use rayon::prelude::*;

use super::{sample_indices, Dedup, PeelingConfig};
use crate::assignment::{assign_all, polish, TupleEvaluator};
use crate::error::{Error, Result};
use crate::geometry::{mean_of, CenterTuple, Instance, MedianOptions, ObjectiveKind, Point};
use crate::report::SolveReport;
use crate::rng;

/// Sampling solver for full instances under the means objective.
///
/// Each of the `k` slots draws its own uniform sample of the points and
/// proposes the means of its small subsets; the cheapest tuple in the
/// product of the slot lists wins.
pub fn solve_full_kcmeans_sampling(inst: &Instance, cfg: &PeelingConfig) -> Result<SolveReport> {
    cfg.validate()?;
    inst.require_full()?;
    let start = Instant::now();
    let k = inst.k();
    let d = inst.dim();
    let coords = inst.flat_coords();
    let npts = inst.total_points();
    let eps = cfg.epsilon;
    let subset_max = (1.0 / eps).ceil() as usize;
    let formula = ((k as f64 / eps) * (1.0 / eps).ln()).ceil() as usize;
    let size = if cfg.uncapped_sample { formula } else { formula.min(cfg.sample_size_cap) }.max(subset_max).max(1);
    let scale = coords.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let pool: Vec<usize> = (0..npts).collect();
    let eval = TupleEvaluator::new(inst, ObjectiveKind::Means);
    let root = rng::named(cfg.seed, "full-sampling");

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut evaluated = 0u64;
    for run in 0..cfg.runs {
        let run_seed = rng::fold(root, [run as u64]);
        let slots: Vec<Vec<Vec<f64>>> = (0..k)
            .map(|slot| {
                let mut rng = rng::stream(rng::fold(run_seed, [slot as u64]));
                let sample = sample_indices(&pool, size, &mut rng);
                let mut dedup = Dedup::new(scale);
                let mut out = Vec::new();
                'sizes: for s in 1..=subset_max.min(sample.len()) {
                    for combo in sample.iter().combinations(s) {
                        if out.len() >= cfg.subset_cap {
                            break 'sizes;
                        }
                        let m = mean_of(combo.iter().map(|&&i| &coords[i * d..(i + 1) * d]), d);
                        if dedup.insert(&m) {
                            out.push(m);
                        }
                    }
                }
                out
            })
            .collect();
        let radices: Vec<u64> = slots.iter().map(|s| s.len() as u64).collect();
        let count = radices.iter().try_fold(1u64, |acc, &r| acc.checked_mul(r));
        let count = match count {
            Some(c) if c <= cfg.max_nodes => c,
            _ => {
                return Err(Error::BudgetExceeded {
                    nodes: count.unwrap_or(u64::MAX),
                    limit: cfg.max_nodes,
                })
            }
        };
        let columns: Vec<Vec<Vec<f64>>> =
            slots.iter().map(|s| s.iter().map(|c| eval.column(c)).collect()).collect();
        let chunk = 4096u64;
        let (cost, index) = (0..count.div_ceil(chunk))
            .into_par_iter()
            .map_init(
                || eval.clone(),
                |ev, ch| {
                    let mut best = (f64::INFINITY, u64::MAX);
                    let mut cols: Vec<&[f64]> = columns.iter().map(|c| c[0].as_slice()).collect();
                    for idx in ch * chunk..((ch + 1) * chunk).min(count) {
                        let mut rest = idx;
                        for slot in (0..k).rev() {
                            cols[slot] = &columns[slot][(rest % radices[slot]) as usize];
                            rest /= radices[slot];
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
        evaluated += count;
        if best.as_ref().is_none_or(|b| cost < b.0) {
            let mut rest = index;
            let mut digits = vec![0usize; k];
            for slot in (0..k).rev() {
                digits[slot] = (rest % radices[slot]) as usize;
                rest /= radices[slot];
            }
            let flat = digits.iter().enumerate().flat_map(|(s, &i)| slots[s][i].iter().copied()).collect();
            best = Some((cost, flat));
        }
    }
    let (_, flat) = best.ok_or_else(|| Error::InvalidConfig("no runs requested".into()))?;
    let centers = CenterTuple::new(flat.chunks_exact(d).map(Point::from).collect())?;
    let median = MedianOptions::with_tol(cfg.median_tol);
    let (centers, partition, objective) = if cfg.polish {
        polish(inst, centers, ObjectiveKind::Means, &median, 100)?
    } else {
        let (p, o) = assign_all(inst, &centers, ObjectiveKind::Means.into())?;
        (centers, p, o)
    };
    Ok(SolveReport {
        algorithm: "full-sampling".into(),
        kind: ObjectiveKind::Means,
        centers,
        partition,
        objective,
        elapsed: start.elapsed(),
        seed: cfg.seed,
        candidates: evaluated,
        heuristic: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ColorGroup;
    use crate::oracle::exact_chromatic;

    fn planted(offset: f64) -> Instance {
        let groups = (0..4)
            .map(|g| {
                let jitter = 0.01 * g as f64;
                ColorGroup::new(g, vec![[jitter, 0.0].into(), [offset + jitter, 0.0].into()])
            })
            .collect();
        Instance::new(groups, 2).unwrap()
    }

    #[test]
    fn rejects_partial_instances() {
        let inst = Instance::new(vec![ColorGroup::new(0, vec![[0.0].into()])], 2).unwrap();
        let cfg = PeelingConfig::with_epsilon(0.5);
        assert!(matches!(solve_full_kcmeans_sampling(&inst, &cfg), Err(Error::NotFullInstance { .. })));
    }

    #[test]
    fn planted_instance_near_optimal() {
        let inst = planted(20.0);
        let opt = exact_chromatic(&inst, ObjectiveKind::Means, 1e-9).unwrap().objective;
        let cfg = PeelingConfig { epsilon: 0.5, runs: 3, ..Default::default() };
        let rep = solve_full_kcmeans_sampling(&inst, &cfg).unwrap();
        rep.check(&inst).unwrap();
        assert!(rep.objective <= 1.5 * opt + 1e-12, "{} vs {}", rep.objective, opt);
        assert_eq!(rep.algorithm, "full-sampling");
    }

    #[test]
    fn budget_applies_to_the_product() {
        let inst = planted(5.0);
        let cfg = PeelingConfig { epsilon: 0.5, max_nodes: 1, ..Default::default() };
        assert!(matches!(solve_full_kcmeans_sampling(&inst, &cfg), Err(Error::BudgetExceeded { .. })));
    }
}
