//! Randomized verification of the supporting geometric and sampling facts.
//!
//! Every trial draws from its own seeded stream, so results do not depend on
//! the rayon thread count.

use std::fmt;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{dist, geometric_median, mean, variance0, Point};
use crate::rng::{self, StreamRng};
use crate::simplex_grid::{grid_covers_mean_check, grid_covers_perturbed_mean_check};

/// Absolute margin added to stated failure probabilities.
pub const MC_MARGIN: f64 = 0.03;
/// Residual / slack tolerance for the exact identities.
pub const IDENTITY_TOL: f64 = 1e-9;
/// Relative slack allowed for the median anchor (Weiszfeld accuracy).
pub const MEDIAN_SLACK: f64 = 1e-3;
/// Weiszfeld tolerance used by the median anchor check.
const MEDIAN_TOL: f64 = 1e-10;

fn trial_rng(seed: u64, name: &str, trial: usize) -> StreamRng {
    rng::stream(rng::fold(rng::named(seed, name), [trial as u64]))
}

fn gaussian(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// `n` points in `R^d`, from either a mixture of axis-aligned Gaussians or a
/// uniform cube.
pub fn random_cloud(rng: &mut impl Rng, n: usize, d: usize) -> Vec<Point> {
    if rng.random_bool(0.5) {
        let comps = rng.random_range(1..=3usize);
        let centers: Vec<Vec<f64>> =
            (0..comps).map(|_| (0..d).map(|_| rng.random_range(-20.0..20.0)).collect()).collect();
        let scales: Vec<Vec<f64>> =
            (0..comps).map(|_| (0..d).map(|_| rng.random_range(0.05..5.0)).collect()).collect();
        (0..n)
            .map(|_| {
                let c = rng.random_range(0..comps);
                Point::from((0..d).map(|a| centers[c][a] + scales[c][a] * gaussian(rng)).collect::<Vec<f64>>())
            })
            .collect()
    } else {
        let lo = rng.random_range(-20.0..0.0);
        let side = rng.random_range(0.1..20.0);
        (0..n).map(|_| Point::from((0..d).map(|_| lo + side * rng.random::<f64>()).collect::<Vec<f64>>())).collect()
    }
}

fn sq_norm_diff(a: &Point, b: &Point) -> f64 {
    a.dist2(b)
}

fn check_prob(name: &str, eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidConfig(format!("{name}: eta must be in (0, 1), got {eta}")));
    }
    Ok(())
}

fn rate(fails: usize, trials: usize) -> f64 {
    if trials == 0 {
        0.0
    } else {
        fails as f64 / trials as f64
    }
}

/// Fraction of trials in which the mean of a uniform `t`-subset `T` of a
/// random `n`-point set `S` violates `‖x̄(S) − x̄(T)‖² < Var⁰(S)/(ηt)`.
pub fn check_sampling_mean(trials: usize, n: usize, t: usize, eta: f64, seed: u64) -> Result<f64> {
    check_prob("sampling mean", eta)?;
    if t == 0 || t > n {
        return Err(Error::InvalidConfig(format!("sampling mean: need 1 <= t <= n, got t={t}, n={n}")));
    }
    let fails = (0..trials)
        .into_par_iter()
        .filter(|&i| {
            let mut rng = trial_rng(seed, "lemma-sampling-mean", i);
            let d = rng.random_range(1..=10usize);
            let s = random_cloud(&mut rng, n, d);
            let picked: Vec<Point> = index::sample(&mut rng, n, t).into_iter().map(|j| s[j].clone()).collect();
            sampling_violation(&s, &picked, eta)
        })
        .count();
    Ok(rate(fails, trials))
}

/// One sampling-mean trial; `sample` is drawn from `s`.
pub fn sampling_violation(s: &[Point], sample: &[Point], eta: f64) -> bool {
    let ms = mean(s).expect("non-empty set");
    let mt = mean(sample).expect("non-empty sample");
    let lhs = sq_norm_diff(&ms, &mt);
    let rhs = variance0(s).expect("non-empty set") / (eta * sample.len() as f64);
    let scale = s.iter().map(|p| p.iter().map(|c| c * c).sum::<f64>()).fold(1.0, f64::max);
    // rounding in the means is not a violation
    lhs > rhs + 1e-24 * scale
}

/// Draw count from the hitting statement: `⌈t·ln(t/η)/ln(1+α)⌉`.
pub fn hitting_sample_size(alpha: f64, t: usize, eta: f64) -> usize {
    let t = t as f64;
    ((t * (t / eta).ln() / alpha.ln_1p()).ceil() as usize).max(1)
}

/// Fraction of trials in which `z` draws with replacement from a set of size
/// `N` contain fewer than `t` of its `⌈αN⌉` marked elements. `N` cycles
/// through `sizes`.
pub fn check_subset_hitting(trials: usize, sizes: &[usize], alpha: f64, t: usize, eta: f64, seed: u64) -> Result<f64> {
    check_prob("subset hitting", eta)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidConfig(format!("subset hitting: alpha must be in (0, 1], got {alpha}")));
    }
    if t == 0 || sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::InvalidConfig("subset hitting: t and every set size must be positive".into()));
    }
    let z = hitting_sample_size(alpha, t, eta);
    let fails = (0..trials)
        .into_par_iter()
        .filter(|&i| {
            let mut rng = trial_rng(seed, "lemma-subset-hitting", i);
            let big_n = sizes[i % sizes.len()];
            let marked = ((alpha * big_n as f64).ceil() as usize).min(big_n);
            let hits = (0..z).filter(|_| rng.random_range(0..big_n) < marked).count();
            hits < t
        })
        .count();
    Ok(rate(fails, trials))
}

/// `|LHS − RHS| / max(LHS, 1)` for the mean-shift identity
/// `Σ‖p − m′‖² = Σ‖p − m‖² + |P|·‖m − m′‖²`.
pub fn mean_shift_residual(p: &[Point], m_prime: &Point) -> f64 {
    let m = mean(p).expect("non-empty set");
    let lhs: f64 = p.iter().map(|x| x.dist2(m_prime)).sum();
    let rhs: f64 = p.iter().map(|x| x.dist2(&m)).sum::<f64>() + p.len() as f64 * m.dist2(m_prime);
    (lhs - rhs).abs() / lhs.max(1.0)
}

/// Largest mean-shift residual over random `(P, m′)` with `d` up to 50.
pub fn check_mean_shift_identity(trials: usize, seed: u64) -> f64 {
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, "lemma-mean-shift", i);
            let d = rng.random_range(1..=50usize);
            let n = rng.random_range(1..=60usize);
            let p = random_cloud(&mut rng, n, d);
            let spread = rng.random_range(0.0..50.0);
            let m_prime = Point::from((0..d).map(|_| spread * gaussian(&mut rng)).collect::<Vec<f64>>());
            mean_shift_residual(&p, &m_prime)
        })
        .reduce(|| 0.0, f64::max)
}

/// `√((1−α)/α)·δ − ‖m₁ − m‖` for a subset `p1` of `p`, with `α = |P₁|/|P|`.
pub fn subset_mean_slack(p: &[Point], p1: &[Point]) -> f64 {
    let alpha = p1.len() as f64 / p.len() as f64;
    let delta = variance0(p).expect("non-empty set").sqrt();
    let actual = mean(p1).expect("non-empty subset").dist(&mean(p).expect("non-empty set"));
    ((1.0 - alpha) / alpha).sqrt() * delta - actual
}

/// Smallest subset-mean slack over random `(P, P₁)`.
pub fn check_subset_mean_bound(trials: usize, seed: u64) -> f64 {
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, "lemma-subset-mean", i);
            let d = rng.random_range(1..=50usize);
            let n = rng.random_range(1..=60usize);
            let p = random_cloud(&mut rng, n, d);
            let m = rng.random_range(1..=n);
            let p1: Vec<Point> = index::sample(&mut rng, n, m).into_iter().map(|j| p[j].clone()).collect();
            subset_mean_slack(&p, &p1)
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// `(4μ − min_l ‖o − o_l‖) / scale` for a partition of `P`, where `o` and
/// `o_l` are geometric medians, `μ` the mean distance to `o` and `scale` the
/// largest distance from `o` to a point (1 if that is zero).
pub fn median_anchor_slack(parts: &[Vec<Point>]) -> Result<f64> {
    let all: Vec<Point> = parts.iter().flatten().cloned().collect();
    let o = geometric_median(&all, MEDIAN_TOL)?;
    let mu = all.iter().map(|p| p.dist(&o)).sum::<f64>() / all.len() as f64;
    let mut nearest = f64::INFINITY;
    for part in parts {
        let ol = geometric_median(part, MEDIAN_TOL)?;
        nearest = nearest.min(dist(ol.coords(), o.coords()));
    }
    let scale = all.iter().map(|p| p.dist(&o)).fold(0.0, f64::max);
    let scale = if scale > 0.0 { scale } else { 1.0 };
    Ok((4.0 * mu - nearest) / scale)
}

fn random_partition(rng: &mut StreamRng, j: usize, d: usize, max_part: usize) -> Vec<Vec<Point>> {
    (0..j)
        .map(|_| {
            let size = rng.random_range(1..=max_part);
            random_cloud(rng, size, d)
        })
        .collect()
}

/// Smallest normalized median-anchor slack over random partitions with
/// `j ≤ 4` parts in `d ≤ 10`.
pub fn check_median_anchor(trials: usize, seed: u64) -> Result<f64> {
    let slacks: Result<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, "lemma-median-anchor", i);
            let j = rng.random_range(1..=4usize);
            let d = rng.random_range(1..=10usize);
            median_anchor_slack(&random_partition(&mut rng, j, d, 25))
        })
        .collect();
    Ok(slacks?.into_iter().fold(f64::INFINITY, f64::min))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct CoverStats {
    pub trials: usize,
    pub violations: usize,
    /// Largest `min distance / bound` seen.
    pub worst_ratio: f64,
}

fn cover_partition(rng: &mut StreamRng) -> (Vec<Vec<Point>>, f64) {
    let j = rng.random_range(1..=4usize);
    let d = rng.random_range(1..=8usize);
    let eps = rng.random_range(0.25..=1.0);
    let mut parts = random_partition(rng, j, d, 20);
    if j > 1 && rng.random_bool(0.2) {
        // one light part far away from the rest
        let far = rng.random_range(100.0..5000.0);
        let heavy = rng.random_range(50..400usize);
        let last = parts.len() - 1;
        parts[last] = vec![Point::from((0..d).map(|_| far).collect::<Vec<f64>>())];
        for part in &mut parts[..last] {
            let extra = random_cloud(rng, heavy, d);
            part.extend(extra);
        }
    }
    (parts, eps)
}

fn fold_cover<I: ParallelIterator<Item = Result<(f64, f64)>>>(it: I, trials: usize) -> Result<CoverStats> {
    let ratios: Result<Vec<(f64, f64)>> = it.collect();
    let mut stats = CoverStats { trials, ..Default::default() };
    for (dmin, bound) in ratios? {
        let ratio = if bound > 0.0 { dmin / bound } else if dmin > 1e-12 { f64::INFINITY } else { 0.0 };
        stats.worst_ratio = stats.worst_ratio.max(ratio);
        if dmin > bound + 1e-12 {
            stats.violations += 1;
        }
    }
    Ok(stats)
}

/// Simplex grid built on exact part means versus `√ε·δ`.
pub fn check_simplex_cover(trials: usize, seed: u64) -> Result<CoverStats> {
    let it = (0..trials).into_par_iter().map(|i| {
        let mut rng = trial_rng(seed, "lemma-simplex", i);
        let (parts, eps) = cover_partition(&mut rng);
        grid_covers_mean_check(&parts, eps)
    });
    fold_cover(it, trials)
}

/// Simplex grid built on means shifted by at most `L` versus
/// `√ε·δ + (1+ε)L`.
pub fn check_perturbed_simplex_cover(trials: usize, seed: u64) -> Result<CoverStats> {
    let it = (0..trials).into_par_iter().map(|i| {
        let mut rng = trial_rng(seed, "lemma-simplex-perturbed", i);
        let (parts, eps) = cover_partition(&mut rng);
        let d = parts[0][0].dim();
        let l = rng.random_range(0.0..3.0);
        let shifts: Vec<Point> = parts
            .iter()
            .map(|_| {
                let dir: Vec<f64> = (0..d).map(|_| gaussian(&mut rng)).collect();
                let norm = dir.iter().map(|c| c * c).sum::<f64>().sqrt().max(1e-300);
                let len = l * rng.random::<f64>();
                Point::from(dir.iter().map(|c| c / norm * len).collect::<Vec<f64>>())
            })
            .collect();
        grid_covers_perturbed_mean_check(&parts, &shifts, eps)
    });
    fold_cover(it, trials)
}

/// Outcome of one check in [`run_all`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemmaCheck {
    pub name: &'static str,
    pub trials: usize,
    pub statistic: f64,
    /// Pass iff `statistic <= limit` (or `>=` when `at_least`).
    pub limit: f64,
    pub at_least: bool,
    pub passed: bool,
}

impl LemmaCheck {
    fn new(name: &'static str, trials: usize, statistic: f64, limit: f64, at_least: bool) -> Self {
        let passed = if at_least { statistic >= limit } else { statistic <= limit };
        LemmaCheck { name, trials, statistic, limit, at_least, passed }
    }
}

impl fmt::Display for LemmaCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = if self.at_least { ">=" } else { "<=" };
        write!(
            f,
            "{} {:<24} trials={:<5} value={:.3e} {op} {:.3e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.trials,
            self.statistic,
            self.limit
        )
    }
}

/// Trial counts for [`run_all`].
#[derive(Clone, Copy, Debug)]
pub struct LabSizes {
    pub identity: usize,
    pub probabilistic: usize,
    pub median: usize,
    pub simplex: usize,
}

impl Default for LabSizes {
    fn default() -> Self {
        LabSizes { identity: 1000, probabilistic: 2000, median: 500, simplex: 1000 }
    }
}

/// Every check with its pass/fail verdict.
pub fn run_all(sizes: &LabSizes, seed: u64) -> Result<Vec<LemmaCheck>> {
    let mut out = Vec::new();
    let p = sizes.probabilistic;
    out.push(LemmaCheck::new("sampling-mean", p, check_sampling_mean(p, 200, 20, 0.2, seed)?, 0.2 + MC_MARGIN, false));
    out.push(LemmaCheck::new(
        "subset-hitting",
        p,
        check_subset_hitting(p, &[100, 1000, 5000], 0.25, 5, 0.2, seed)?,
        0.2 + MC_MARGIN,
        false,
    ));
    let i = sizes.identity;
    out.push(LemmaCheck::new("mean-shift", i, check_mean_shift_identity(i, seed), IDENTITY_TOL, false));
    out.push(LemmaCheck::new("subset-mean", i, check_subset_mean_bound(i, seed), -IDENTITY_TOL, true));
    let m = sizes.median;
    out.push(LemmaCheck::new("median-anchor", m, check_median_anchor(m, seed)?, -MEDIAN_SLACK, true));
    let s = sizes.simplex;
    let plain = check_simplex_cover(s, seed)?;
    out.push(LemmaCheck::new("simplex-cover", s, plain.violations as f64, 0.0, false));
    let shifted = check_perturbed_simplex_cover(s, seed)?;
    out.push(LemmaCheck::new("simplex-cover-perturbed", s, shifted.violations as f64, 0.0, false));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts<const D: usize>(v: &[[f64; D]]) -> Vec<Point> {
        v.iter().map(|c| Point::from(c.to_vec())).collect()
    }

    #[test]
    fn full_sample_never_fails() {
        assert_eq!(check_sampling_mean(200, 30, 30, 0.1, 1).unwrap(), 0.0);
    }

    #[test]
    fn identical_points_never_fail() {
        let s = pts(&[[0.1, 0.7]; 9]);
        assert!(!sampling_violation(&s, &s[..3], 0.5));
    }

    #[test]
    fn sampling_rejects_bad_arguments() {
        assert!(check_sampling_mean(1, 5, 6, 0.2, 0).is_err());
        assert!(check_sampling_mean(1, 5, 0, 0.2, 0).is_err());
        assert!(check_sampling_mean(1, 5, 2, 1.0, 0).is_err());
        assert!(check_subset_hitting(1, &[10], 0.0, 1, 0.2, 0).is_err());
        assert!(check_subset_hitting(1, &[], 0.5, 1, 0.2, 0).is_err());
    }

    #[test]
    fn everything_marked_always_hits() {
        assert_eq!(check_subset_hitting(500, &[7, 50], 1.0, 4, 0.3, 2).unwrap(), 0.0);
    }

    #[test]
    fn hitting_size_formula() {
        // 5·ln(25)/ln(1.25) = 72.13
        assert_eq!(hitting_sample_size(0.25, 5, 0.2), 73);
        assert_eq!(hitting_sample_size(0.5, 1, 0.5), 2);
    }

    #[test]
    fn single_hit_rate_matches_closed_form() {
        // z = 2 draws, miss probability (1/2)^2
        let r = check_subset_hitting(4000, &[1000], 0.5, 1, 0.5, 3).unwrap();
        assert!((r - 0.25).abs() < 0.03, "{r}");
    }

    #[test]
    fn mean_shift_hand_case() {
        let p = pts(&[[0.0, 0.0], [2.0, 0.0]]);
        assert_eq!(mean_shift_residual(&p, &Point::from(vec![0.0, 0.0])), 0.0);
        assert!(mean_shift_residual(&p, &Point::from(vec![1.0, 0.0])) == 0.0);
    }

    #[test]
    fn subset_mean_two_point_case_is_tight() {
        let p = pts(&[[0.0], [2.0]]);
        assert!(subset_mean_slack(&p, &p[..1]).abs() < 1e-15);
        assert!(subset_mean_slack(&p, &p).abs() < 1e-15);
    }

    #[test]
    fn median_anchor_single_part() {
        let mut rng = rng::stream(5);
        let part = random_cloud(&mut rng, 12, 3);
        assert!(median_anchor_slack(&[part]).unwrap() > 0.0);
        let same = vec![pts(&[[1.0, 1.0]; 4]), pts(&[[1.0, 1.0]; 2])];
        assert!(median_anchor_slack(&same).unwrap().abs() < 1e-9);
    }

    #[test]
    fn checks_are_deterministic() {
        assert_eq!(check_mean_shift_identity(50, 9), check_mean_shift_identity(50, 9));
        assert_eq!(check_simplex_cover(20, 9).unwrap(), check_simplex_cover(20, 9).unwrap());
    }

    #[test]
    fn small_lab_passes() {
        let sizes = LabSizes { identity: 100, probabilistic: 400, median: 50, simplex: 30 };
        for c in run_all(&sizes, 1).unwrap() {
            // small Monte-Carlo runs get a wider margin
            if matches!(c.name, "sampling-mean" | "subset-hitting") {
                assert!(c.statistic <= c.limit + 0.05, "{c}");
            } else {
                assert!(c.passed, "{c}");
            }
        }
    }
}
