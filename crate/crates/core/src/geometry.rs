//! Points, chromatic instances, partitions, and the two clustering objectives.

use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in R^d.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    /// Builds a point, rejecting empty or non-finite coordinates.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidInstance("point has no coordinates".into()));
        }
        if let Some(c) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidInstance(format!("non-finite coordinate {c}")));
        }
        Ok(Point(coords))
    }

    pub fn zeros(d: usize) -> Self {
        Point(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn dist(&self, other: &Point) -> f64 {
        dist(&self.0, &other.0)
    }

    pub fn dist2(&self, other: &Point) -> f64 {
        dist2(&self.0, &other.0)
    }
}

impl Deref for Point {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

impl<const N: usize> From<[f64; N]> for Point {
    fn from(v: [f64; N]) -> Self {
        Point(v.to_vec())
    }
}

impl From<&[f64]> for Point {
    fn from(v: &[f64]) -> Self {
        Point(v.to_vec())
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

#[inline]
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

/// One color: a set of points that must land in pairwise distinct clusters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColorGroup {
    pub id: usize,
    pub points: Vec<Point>,
}

impl ColorGroup {
    pub fn new(id: usize, points: Vec<Point>) -> Self {
        ColorGroup { id, points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// A chromatic clustering instance: `n` groups of at most `k` points in R^d.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    groups: Vec<ColorGroup>,
    k: usize,
    d: usize,
    offsets: Vec<usize>,
}

impl Instance {
    pub fn new(groups: Vec<ColorGroup>, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidInstance(format!("k must be at least 2, got {k}")));
        }
        if groups.is_empty() {
            return Err(Error::InvalidInstance("instance has no groups".into()));
        }
        let d = groups
            .iter()
            .flat_map(|g| g.points.first())
            .map(Point::dim)
            .next()
            .unwrap_or(0);
        if d == 0 {
            return Err(Error::InvalidInstance("points must have dimension >= 1".into()));
        }
        let mut ids = std::collections::HashSet::new();
        let mut offsets = Vec::with_capacity(groups.len() + 1);
        let mut total = 0;
        for g in &groups {
            if !ids.insert(g.id) {
                return Err(Error::InvalidInstance(format!("duplicate group id {}", g.id)));
            }
            if g.points.is_empty() || g.points.len() > k {
                return Err(Error::InvalidInstance(format!(
                    "group {} has {} points; each group needs 1..={k}",
                    g.id,
                    g.points.len()
                )));
            }
            for p in &g.points {
                if p.dim() != d {
                    return Err(Error::InvalidInstance(format!(
                        "group {}: point of dimension {} in a {d}-dimensional instance",
                        g.id,
                        p.dim()
                    )));
                }
                if !p.is_finite() {
                    return Err(Error::InvalidInstance(format!(
                        "group {}: non-finite coordinate",
                        g.id
                    )));
                }
            }
            offsets.push(total);
            total += g.points.len();
        }
        offsets.push(total);
        Ok(Instance { groups, k, d, offsets })
    }

    pub fn groups(&self) -> &[ColorGroup] {
        &self.groups
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Number of groups `n`.
    pub fn n(&self) -> usize {
        self.groups.len()
    }

    /// Total number of points `N`.
    pub fn total_points(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Every group has exactly `k` points.
    pub fn is_full(&self) -> bool {
        self.groups.iter().all(|g| g.points.len() == self.k)
    }

    /// Global index of point `i` of group number `g` (position, not id).
    pub fn global_index(&self, g: usize, i: usize) -> usize {
        self.offsets[g] + i
    }

    /// Start offsets of each group in global point order, plus the total.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// All points in group order.
    pub fn points(&self) -> impl Iterator<Item = &Point> + '_ {
        self.groups.iter().flat_map(|g| g.points.iter())
    }

    pub fn all_points(&self) -> Vec<Point> {
        self.points().cloned().collect()
    }

    /// Row-major coordinates of all points in group order.
    pub fn flat_coords(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total_points() * self.d);
        for p in self.points() {
            out.extend_from_slice(p);
        }
        out
    }

    pub fn require_full(&self) -> Result<()> {
        match self.groups.iter().find(|g| g.points.len() != self.k) {
            Some(g) => Err(Error::NotFullInstance { group: g.id, size: g.points.len(), k: self.k }),
            None => Ok(()),
        }
    }
}

/// Per-group cluster indices (0-based): `assignment[g][i]` is the cluster of
/// point `i` in group `g`. Injective within every group.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChromaticPartition {
    assignment: Vec<Vec<usize>>,
}

impl ChromaticPartition {
    pub fn new(inst: &Instance, assignment: Vec<Vec<usize>>) -> Result<Self> {
        let p = ChromaticPartition { assignment };
        p.validate(inst)?;
        Ok(p)
    }

    pub(crate) fn new_unchecked(assignment: Vec<Vec<usize>>) -> Self {
        ChromaticPartition { assignment }
    }

    pub fn validate(&self, inst: &Instance) -> Result<()> {
        if self.assignment.len() != inst.n() {
            return Err(Error::InvalidPartition(format!(
                "{} group assignments for {} groups",
                self.assignment.len(),
                inst.n()
            )));
        }
        let k = inst.k();
        for (g, (row, group)) in self.assignment.iter().zip(inst.groups()).enumerate() {
            if row.len() != group.points.len() {
                return Err(Error::InvalidPartition(format!(
                    "group {} has {} points but {} labels",
                    group.id,
                    group.points.len(),
                    row.len()
                )));
            }
            let mut seen = vec![false; k];
            for &c in row {
                if c >= k {
                    return Err(Error::InvalidPartition(format!(
                        "group {} (position {g}): cluster {c} out of range 0..{k}",
                        group.id
                    )));
                }
                if std::mem::replace(&mut seen[c], true) {
                    return Err(Error::InvalidPartition(format!(
                        "group {}: two points share cluster {c}",
                        group.id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn assignment(&self) -> &[Vec<usize>] {
        &self.assignment
    }

    pub fn cluster_of(&self, g: usize, i: usize) -> usize {
        self.assignment[g][i]
    }

    /// Global point indices per cluster.
    pub fn clusters(&self, inst: &Instance) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); inst.k()];
        for (g, row) in self.assignment.iter().enumerate() {
            for (i, &c) in row.iter().enumerate() {
                out[c].push(inst.global_index(g, i));
            }
        }
        out
    }
}

/// An ordered k-tuple of candidate centers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CenterTuple(Vec<Point>);

impl CenterTuple {
    pub fn new(centers: Vec<Point>) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::EmptySet);
        }
        let d = centers[0].dim();
        if let Some(p) = centers.iter().find(|p| p.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: p.dim() });
        }
        Ok(CenterTuple(centers))
    }

    /// Checks the tuple against an instance: exactly `k` centers of dimension `d`.
    pub fn check(&self, inst: &Instance) -> Result<()> {
        if self.0.len() != inst.k() {
            return Err(Error::InvalidConfig(format!(
                "{} centers for k = {}",
                self.0.len(),
                inst.k()
            )));
        }
        match self.0.iter().find(|p| p.dim() != inst.dim()) {
            Some(p) => Err(Error::DimensionMismatch { expected: inst.dim(), found: p.dim() }),
            None => Ok(()),
        }
    }

    pub fn centers(&self) -> &[Point] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<Point> {
        self.0
    }
}

impl Deref for CenterTuple {
    type Target = [Point];
    fn deref(&self) -> &[Point] {
        &self.0
    }
}

/// Which clustering cost is being minimized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    /// Squared Euclidean distance (k-CMeans).
    Means,
    /// Euclidean distance (k-CMedians).
    Medians,
}

impl ObjectiveKind {
    #[inline]
    pub fn cost(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            ObjectiveKind::Means => dist2(a, b),
            ObjectiveKind::Medians => dist(a, b),
        }
    }
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ObjectiveKind::Means => "means",
            ObjectiveKind::Medians => "medians",
        })
    }
}

fn check_uniform(points: &[Point]) -> Result<usize> {
    let d = points.first().ok_or(Error::EmptySet)?.dim();
    match points.iter().find(|p| p.dim() != d) {
        Some(p) => Err(Error::DimensionMismatch { expected: d, found: p.dim() }),
        None => Ok(d),
    }
}

/// Coordinate-wise average.
pub fn mean(points: &[Point]) -> Result<Point> {
    let d = check_uniform(points)?;
    let mut m = vec![0.0; d];
    for p in points {
        for (acc, c) in m.iter_mut().zip(p.iter()) {
            *acc += c;
        }
    }
    let n = points.len() as f64;
    m.iter_mut().for_each(|c| *c /= n);
    Ok(Point(m))
}

pub(crate) fn mean_of<'a, I>(points: I, d: usize) -> Vec<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut m = vec![0.0; d];
    let mut n = 0usize;
    for p in points {
        for (acc, c) in m.iter_mut().zip(p) {
            *acc += c;
        }
        n += 1;
    }
    if n > 0 {
        let inv = n as f64;
        m.iter_mut().for_each(|c| *c /= inv);
    }
    m
}

/// Mean squared distance to the mean.
pub fn variance0(points: &[Point]) -> Result<f64> {
    let m = mean(points)?;
    Ok(points.iter().map(|p| p.dist2(&m)).sum::<f64>() / points.len() as f64)
}

/// Tuning for the Weiszfeld iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MedianOptions {
    /// Target relative accuracy of the summed-distance objective.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MedianOptions {
    fn default() -> Self {
        MedianOptions { tol: 1e-9, max_iter: 10_000 }
    }
}

impl MedianOptions {
    pub fn with_tol(tol: f64) -> Self {
        MedianOptions { tol, ..Default::default() }
    }
}

/// Approximate geometric (Fermat–Weber) median by Weiszfeld iteration.
pub fn geometric_median(points: &[Point], tol: f64) -> Result<Point> {
    geometric_median_with(points, &MedianOptions::with_tol(tol))
}

pub fn geometric_median_with(points: &[Point], opts: &MedianOptions) -> Result<Point> {
    let d = check_uniform(points)?;
    let slices: Vec<&[f64]> = points.iter().map(|p| p.coords()).collect();
    weiszfeld(&slices, d, opts).map(Point)
}

/// Summed Euclidean distance from `x` to every point.
pub fn sum_of_distances(points: &[&[f64]], x: &[f64]) -> f64 {
    points.iter().map(|p| dist(p, x)).sum()
}

pub(crate) fn weiszfeld(points: &[&[f64]], d: usize, opts: &MedianOptions) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Err(Error::EmptySet);
    }
    if points.len() == 1 {
        return Ok(points[0].to_vec());
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidConfig(format!("median tolerance must be > 0, got {}", opts.tol)));
    }

    // bounding-box diagonal as the scale for coincidence and perturbation
    let mut lo = points[0].to_vec();
    let mut hi = points[0].to_vec();
    for p in points {
        for j in 0..d {
            lo[j] = lo[j].min(p[j]);
            hi[j] = hi[j].max(p[j]);
        }
    }
    let diameter = dist(&lo, &hi);
    if diameter == 0.0 {
        return Ok(points[0].to_vec());
    }
    let coincide = 1e-12 * diameter.max(1.0);
    let nudge = 1e-9 * diameter;

    let mut x = mean_of(points.iter().copied(), d);
    let mut fx = sum_of_distances(points, &x);
    let mut best = (x.clone(), fx);
    let mut num = vec![0.0; d];
    let mut converged = false;

    for _ in 0..opts.max_iter {
        num.iter_mut().for_each(|c| *c = 0.0);
        let mut den = 0.0;
        let mut hit: Option<usize> = None;
        for (idx, p) in points.iter().enumerate() {
            let dp = dist(p, &x);
            if dp <= coincide {
                hit = Some(idx);
                break;
            }
            let w = 1.0 / dp;
            den += w;
            for j in 0..d {
                num[j] += w * p[j];
            }
        }
        if let Some(idx) = hit {
            let p = points[idx];
            if data_point_is_optimal(points, p, coincide) {
                return Ok(p.to_vec());
            }
            x[0] += nudge;
            fx = sum_of_distances(points, &x);
            continue;
        }
        // Weiszfeld crawls toward an optimum sitting on a data point, so
        // test the closest one directly.
        let near = points.iter().min_by(|a, b| dist2(a, &x).total_cmp(&dist2(b, &x))).unwrap();
        if data_point_is_optimal(points, near, coincide) {
            return Ok(near.to_vec());
        }
        let mut next: Vec<f64> = num.iter().map(|c| c / den).collect();
        let mut fnext = sum_of_distances(points, &next);
        // extrapolate along the Weiszfeld step while that keeps improving;
        // plain steps crawl along flat valleys of nearly collinear data
        let step: Vec<f64> = next.iter().zip(&x).map(|(a, b)| a - b).collect();
        let mut lambda = 1.0;
        loop {
            lambda *= 2.0;
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a + lambda * s).collect();
            let ftrial = sum_of_distances(points, &trial);
            if !(ftrial < fnext) || lambda > 1e6 {
                break;
            }
            next = trial;
            fnext = ftrial;
        }
        if fnext < best.1 {
            best = (next.clone(), fnext);
        }
        let decrease = fx - fnext;
        x = next;
        fx = fnext;
        if decrease < opts.tol / 10.0 * fx.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence { iterations: opts.max_iter });
    }

    // The optimum often sits exactly on a data point; Weiszfeld only
    // approaches it, so compare against the nearest one.
    let nearest = points
        .iter()
        .min_by(|a, b| dist2(a, &best.0).total_cmp(&dist2(b, &best.0)))
        .unwrap();
    let f_nearest = sum_of_distances(points, nearest);
    if f_nearest <= best.1 {
        return Ok(nearest.to_vec());
    }
    Ok(best.0)
}

/// Subgradient test: `p` minimizes the summed distance iff the pull of the
/// other points does not exceed the multiplicity of `p`.
fn data_point_is_optimal(points: &[&[f64]], p: &[f64], coincide: f64) -> bool {
    let d = p.len();
    let mut pull = vec![0.0; d];
    let mut multiplicity = 0.0;
    for q in points {
        let dq = dist(p, q);
        if dq <= coincide {
            multiplicity += 1.0;
            continue;
        }
        for j in 0..d {
            pull[j] += (q[j] - p[j]) / dq;
        }
    }
    pull.iter().map(|c| c * c).sum::<f64>().sqrt() <= multiplicity
}

fn objective(
    inst: &Instance,
    centers: &CenterTuple,
    part: &ChromaticPartition,
    kind: ObjectiveKind,
) -> Result<f64> {
    centers.check(inst)?;
    part.validate(inst)?;
    let mut total = 0.0;
    for (group, row) in inst.groups().iter().zip(part.assignment()) {
        for (p, &c) in group.points.iter().zip(row) {
            total += kind.cost(p, &centers[c]);
        }
    }
    Ok(total / inst.n() as f64)
}

/// `(1/n) Σ_j Σ_{q ∈ U_j} ||q − m_j||²`.
pub fn means_objective(inst: &Instance, centers: &CenterTuple, part: &ChromaticPartition) -> Result<f64> {
    objective(inst, centers, part, ObjectiveKind::Means)
}

/// `(1/n) Σ_j Σ_{q ∈ U_j} ||q − m_j||`.
pub fn medians_objective(
    inst: &Instance,
    centers: &CenterTuple,
    part: &ChromaticPartition,
) -> Result<f64> {
    objective(inst, centers, part, ObjectiveKind::Medians)
}

pub fn objective_of(
    kind: ObjectiveKind,
    inst: &Instance,
    centers: &CenterTuple,
    part: &ChromaticPartition,
) -> Result<f64> {
    objective(inst, centers, part, kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn pts(v: &[&[f64]]) -> Vec<Point> {
        v.iter().map(|c| Point::from(*c)).collect()
    }

    pub(crate) fn rectangle() -> Instance {
        Instance::new(
            vec![
                ColorGroup::new(1, pts(&[&[0.0, 0.0], &[10.0, 0.0]])),
                ColorGroup::new(2, pts(&[&[0.0, 1.0], &[10.0, 1.0]])),
            ],
            2,
        )
        .unwrap()
    }

    #[test]
    fn mean_examples() {
        let m = mean(&pts(&[&[0.0, 0.0], &[2.0, 0.0], &[4.0, 0.0]])).unwrap();
        assert_eq!(m.coords(), &[2.0, 0.0]);
        assert_eq!(mean(&pts(&[&[1.0, 1.0]])).unwrap().coords(), &[1.0, 1.0]);
        assert_eq!(mean(&[]), Err(Error::EmptySet));
    }

    #[test]
    fn mean_matches_naive_summation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let p: Vec<Point> = (0..100)
            .map(|_| Point::from((0..5).map(|_| rng.random::<f64>()).collect::<Vec<_>>()))
            .collect();
        let m = mean(&p).unwrap();
        for j in 0..5 {
            let mut s = 0.0;
            for q in &p {
                s += q[j];
            }
            assert!((m[j] - s / 100.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn mean_rejects_mixed_dimensions() {
        let p = vec![Point::from([0.0, 1.0]), Point::from([1.0])];
        assert!(matches!(mean(&p), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn variance_examples() {
        assert_eq!(variance0(&pts(&[&[0.0, 0.0], &[2.0, 0.0]])).unwrap(), 1.0);
        assert_eq!(variance0(&pts(&[&[5.0, 5.0]])).unwrap(), 0.0);
        assert_eq!(variance0(&[]), Err(Error::EmptySet));
    }

    #[test]
    fn variance_matches_direct_formula() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let p: Vec<Point> = (0..37)
            .map(|_| Point::from((0..4).map(|_| rng.random_range(-5.0..5.0)).collect::<Vec<_>>()))
            .collect();
        let m = mean(&p).unwrap();
        let mut s = 0.0;
        for q in &p {
            for j in 0..4 {
                s += (q[j] - m[j]).powi(2);
            }
        }
        assert_relative_eq!(variance0(&p).unwrap(), s / 37.0, max_relative = 1e-12);
    }

    #[test]
    fn median_of_collinear_points_is_middle_point() {
        let p = pts(&[&[0.0, 0.0], &[1.0, 0.0], &[10.0, 0.0]]);
        let m = geometric_median(&p, 1e-9).unwrap();
        assert_eq!(m.coords(), &[1.0, 0.0]);
    }

    #[test]
    fn median_singleton_and_empty() {
        let m = geometric_median(&pts(&[&[3.0, 3.0]]), 1e-6).unwrap();
        assert_eq!(m.coords(), &[3.0, 3.0]);
        assert_eq!(geometric_median(&[], 1e-6), Err(Error::EmptySet));
    }

    #[test]
    fn median_of_triangle_beats_grid_search() {
        let p = pts(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]);
        let tol = 1e-6;
        let m = geometric_median(&p, tol).unwrap();
        let slices: Vec<&[f64]> = p.iter().map(|q| q.coords()).collect();
        let f = sum_of_distances(&slices, &m);
        // grid oracle over [0,1]^2 at resolution 1e-3
        let mut best = f64::INFINITY;
        for a in 0..=1000 {
            for b in 0..=1000 {
                let x = [a as f64 * 1e-3, b as f64 * 1e-3];
                best = best.min(sum_of_distances(&slices, &x));
            }
        }
        assert!(f <= (1.0 + tol) * best, "weiszfeld {f} vs grid {best}");
    }

    #[test]
    fn median_reports_nonconvergence() {
        let p = pts(&[&[0.0, 0.0], &[1.0, 0.3], &[0.2, 1.0], &[5.0, 4.0]]);
        let opts = MedianOptions { tol: 1e-15, max_iter: 2 };
        assert_eq!(geometric_median_with(&p, &opts), Err(Error::NonConvergence { iterations: 2 }));
    }

    #[test]
    fn median_handles_iterate_on_data_point() {
        // mean coincides with the non-optimal data point (0,0)
        let p = pts(&[&[0.0, 0.0], &[1.0, 0.0], &[-1.0, 0.0], &[0.0, 3.0], &[0.0, -3.0], &[0.0, 10.0]]);
        let slices: Vec<&[f64]> = p.iter().map(|q| q.coords()).collect();
        assert_eq!(mean(&p).unwrap().coords(), &[0.0, 10.0 / 6.0]);
        let m = geometric_median(&p, 1e-9).unwrap();
        let f = sum_of_distances(&slices, &m);
        assert!(f <= sum_of_distances(&slices, &[0.0, 10.0 / 6.0]));
        // identical points
        let same = pts(&[&[2.0, 2.0], &[2.0, 2.0], &[2.0, 2.0]]);
        assert_eq!(geometric_median(&same, 1e-9).unwrap().coords(), &[2.0, 2.0]);
    }

    #[test]
    fn objective_examples() {
        let inst = rectangle();
        let centers = CenterTuple::new(pts(&[&[0.0, 0.5], &[10.0, 0.5]])).unwrap();
        let part = ChromaticPartition::new(&inst, vec![vec![0, 1], vec![0, 1]]).unwrap();
        assert_relative_eq!(means_objective(&inst, &centers, &part).unwrap(), 0.5);
        assert_relative_eq!(medians_objective(&inst, &centers, &part).unwrap(), 1.0);
    }

    #[test]
    fn objective_zero_when_centers_on_points() {
        let inst = Instance::new(
            vec![
                ColorGroup::new(0, pts(&[&[1.0, 2.0], &[3.0, 4.0]])),
                ColorGroup::new(1, pts(&[&[1.0, 2.0]])),
            ],
            2,
        )
        .unwrap();
        let centers = CenterTuple::new(pts(&[&[1.0, 2.0], &[3.0, 4.0]])).unwrap();
        let part = ChromaticPartition::new(&inst, vec![vec![0, 1], vec![0]]).unwrap();
        assert_eq!(means_objective(&inst, &centers, &part).unwrap(), 0.0);
        assert_eq!(medians_objective(&inst, &centers, &part).unwrap(), 0.0);
    }

    #[test]
    fn objective_rejects_bad_inputs() {
        let inst = rectangle();
        let centers = CenterTuple::new(pts(&[&[0.0, 0.5, 1.0], &[10.0, 0.5, 1.0]])).unwrap();
        let part = ChromaticPartition::new_unchecked(vec![vec![0, 1], vec![0, 1]]);
        assert!(matches!(
            means_objective(&inst, &centers, &part),
            Err(Error::DimensionMismatch { .. })
        ));
        let bad = ChromaticPartition::new(&inst, vec![vec![0, 0], vec![0, 1]]);
        assert!(matches!(bad, Err(Error::InvalidPartition(_))));
    }

    #[test]
    fn instance_validation() {
        let too_big = Instance::new(
            vec![ColorGroup::new(4, pts(&[&[0.0], &[1.0], &[2.0]]))],
            2,
        );
        match too_big {
            Err(Error::InvalidInstance(msg)) => assert!(msg.contains("group 4")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(Instance::new(vec![ColorGroup::new(0, pts(&[&[f64::NAN]]))], 2).is_err());
        assert!(Instance::new(vec![], 2).is_err());
        assert!(rectangle().is_full());
    }

    fn random_instance(rng: &mut impl Rng) -> (Instance, CenterTuple, ChromaticPartition) {
        let k = rng.random_range(2..5);
        let d = rng.random_range(1..4);
        let n = rng.random_range(1..6);
        let mut groups = Vec::new();
        let mut assignment = Vec::new();
        for g in 0..n {
            let size = rng.random_range(1..=k);
            let pts: Vec<Point> = (0..size)
                .map(|_| Point::from((0..d).map(|_| rng.random_range(-3.0..3.0)).collect::<Vec<_>>()))
                .collect();
            let mut labels: Vec<usize> = (0..k).collect();
            use rand::seq::SliceRandom;
            labels.shuffle(rng);
            labels.truncate(size);
            groups.push(ColorGroup::new(g, pts));
            assignment.push(labels);
        }
        let inst = Instance::new(groups, k).unwrap();
        let centers = CenterTuple::new(
            (0..k)
                .map(|_| Point::from((0..d).map(|_| rng.random_range(-3.0..3.0)).collect::<Vec<_>>()))
                .collect(),
        )
        .unwrap();
        let part = ChromaticPartition::new(&inst, assignment).unwrap();
        (inst, centers, part)
    }

    #[test]
    fn objectives_match_resummation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let (inst, centers, part) = random_instance(&mut rng);
            let mut sq = 0.0;
            let mut ab = 0.0;
            for (g, group) in inst.groups().iter().enumerate() {
                for (i, p) in group.points.iter().enumerate() {
                    let c = &centers[part.cluster_of(g, i)];
                    let mut s = 0.0;
                    for j in 0..inst.dim() {
                        s += (p[j] - c[j]) * (p[j] - c[j]);
                    }
                    sq += s;
                    ab += s.sqrt();
                }
            }
            let n = inst.n() as f64;
            assert!((means_objective(&inst, &centers, &part).unwrap() - sq / n).abs() <= 1e-12 * (1.0 + sq));
            assert!((medians_objective(&inst, &centers, &part).unwrap() - ab / n).abs() <= 1e-12 * (1.0 + ab));
        }
    }

    fn arb_points() -> impl Strategy<Value = Vec<Point>> {
        (1usize..5).prop_flat_map(|d| {
            prop::collection::vec(prop::collection::vec(-50.0f64..50.0, d), 1..30)
                .prop_map(|v| v.into_iter().map(Point::from).collect())
        })
    }

    proptest! {
        #[test]
        fn mean_shift_identity(p in arb_points(), shift in prop::collection::vec(-50.0f64..50.0, 4)) {
            let m = mean(&p).unwrap();
            let m2 = Point::from(shift[..m.dim()].to_vec());
            let lhs: f64 = p.iter().map(|q| q.dist2(&m2)).sum();
            let rhs: f64 = p.iter().map(|q| q.dist2(&m)).sum::<f64>() + p.len() as f64 * m.dist2(&m2);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.max(1.0));
        }

        #[test]
        fn subset_mean_bound(p in arb_points(), cut in 0.0f64..1.0) {
            let size = ((p.len() as f64 * cut).ceil() as usize).clamp(1, p.len());
            let alpha = size as f64 / p.len() as f64;
            let m = mean(&p).unwrap();
            let m1 = mean(&p[..size]).unwrap();
            let delta = variance0(&p).unwrap().sqrt();
            prop_assert!(m1.dist(&m) <= ((1.0 - alpha) / alpha).sqrt() * delta + 1e-9 * (1.0 + delta));
        }

        #[test]
        fn median_never_worse_than_mean(p in arb_points()) {
            let slices: Vec<&[f64]> = p.iter().map(|q| q.coords()).collect();
            let med = geometric_median(&p, 1e-7).unwrap();
            let m = mean(&p).unwrap();
            prop_assert!(sum_of_distances(&slices, &med) <= sum_of_distances(&slices, &m) * (1.0 + 1e-12));
        }

        #[test]
        fn median_stability(p in arb_points(), cut in 0.0f64..1.0) {
            // distance between the median of P and the median of a subset
            let size = ((p.len() as f64 * cut).ceil() as usize).clamp(1, p.len());
            let alpha = size as f64 / p.len() as f64;
            let tol = 1e-7;
            let m = geometric_median(&p, tol).unwrap();
            let m1 = geometric_median(&p[..size], tol).unwrap();
            let slices: Vec<&[f64]> = p.iter().map(|q| q.coords()).collect();
            let mu = sum_of_distances(&slices, &m) / p.len() as f64;
            let bound = (2.0 + tol) / alpha * mu;
            prop_assert!(m1.dist(&m) <= bound * (1.0 + 1e-3) + 1e-9);
        }

        #[test]
        fn objectives_invariant_under_relabeling(seed in 0u64..1000) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let (inst, centers, part) = random_instance(&mut rng);
            let k = inst.k();
            let perm: Vec<usize> = (0..k).rev().collect();
            let mut relabeled = vec![Point::zeros(inst.dim()); k];
            for c in 0..k {
                relabeled[perm[c]] = centers[c].clone();
            }
            let relabeled = CenterTuple::new(relabeled).unwrap();
            let part2 = ChromaticPartition::new(
                &inst,
                part.assignment().iter().map(|row| row.iter().map(|&c| perm[c]).collect()).collect(),
            ).unwrap();
            for kind in [ObjectiveKind::Means, ObjectiveKind::Medians] {
                let a = objective_of(kind, &inst, &centers, &part).unwrap();
                let b = objective_of(kind, &inst, &relabeled, &part2).unwrap();
                prop_assert!(a >= 0.0);
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
            }
        }
    }
}
