//! Optimal chromatic assignment of points to a fixed set of centers.
//!
//! Each group is matched independently: its `k_i` points go to distinct
//! clusters by a minimum-weight bipartite matching (Hungarian method on the
//! `k_i x k` cost matrix), so the result is a valid chromatic partition by
//! construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    self, mean_of, weiszfeld, CenterTuple, ChromaticPartition, ColorGroup, Instance, MedianOptions,
    ObjectiveKind,
};

/// Edge weight of the bipartite matching.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchingWeightKind {
    SquaredDistance,
    Distance,
}

impl From<ObjectiveKind> for MatchingWeightKind {
    fn from(kind: ObjectiveKind) -> Self {
        match kind {
            ObjectiveKind::Means => MatchingWeightKind::SquaredDistance,
            ObjectiveKind::Medians => MatchingWeightKind::Distance,
        }
    }
}

impl From<MatchingWeightKind> for ObjectiveKind {
    fn from(kind: MatchingWeightKind) -> Self {
        match kind {
            MatchingWeightKind::SquaredDistance => ObjectiveKind::Means,
            MatchingWeightKind::Distance => ObjectiveKind::Medians,
        }
    }
}

/// Reusable buffers for the O(rows² · cols) Hungarian method.
///
/// Works directly on `rows <= cols` matrices, which is equivalent to padding
/// the matrix to square with zero-cost dummy rows.
#[derive(Debug, Default, Clone)]
pub struct Hungarian {
    u: Vec<f64>,
    v: Vec<f64>,
    p: Vec<usize>,
    way: Vec<usize>,
    minv: Vec<f64>,
    used: Vec<bool>,
}

impl Hungarian {
    pub fn new() -> Self {
        Self::default()
    }

    /// Minimum total cost of an injective map rows -> cols; `cost` is
    /// row-major `rows x cols`. Writes the chosen column of each row into
    /// `out` when given.
    pub fn solve(&mut self, cost: &[f64], rows: usize, cols: usize, out: Option<&mut [usize]>) -> f64 {
        debug_assert!(rows <= cols);
        debug_assert_eq!(cost.len(), rows * cols);
        if rows == 0 {
            return 0.0;
        }
        let (n, m) = (rows, cols);
        self.u.clear();
        self.u.resize(n + 1, 0.0);
        self.v.clear();
        self.v.resize(m + 1, 0.0);
        self.p.clear();
        self.p.resize(m + 1, 0);
        self.way.clear();
        self.way.resize(m + 1, 0);
        for i in 1..=n {
            self.p[0] = i;
            let mut j0 = 0;
            self.minv.clear();
            self.minv.resize(m + 1, f64::INFINITY);
            self.used.clear();
            self.used.resize(m + 1, false);
            loop {
                self.used[j0] = true;
                let i0 = self.p[j0];
                let mut delta = f64::INFINITY;
                let mut j1 = 0;
                for j in 1..=m {
                    if self.used[j] {
                        continue;
                    }
                    let cur = cost[(i0 - 1) * m + (j - 1)] - self.u[i0] - self.v[j];
                    if cur < self.minv[j] {
                        self.minv[j] = cur;
                        self.way[j] = j0;
                    }
                    if self.minv[j] < delta {
                        delta = self.minv[j];
                        j1 = j;
                    }
                }
                for j in 0..=m {
                    if self.used[j] {
                        self.u[self.p[j]] += delta;
                        self.v[j] -= delta;
                    } else {
                        self.minv[j] -= delta;
                    }
                }
                j0 = j1;
                if self.p[j0] == 0 {
                    break;
                }
            }
            loop {
                let j1 = self.way[j0];
                self.p[j0] = self.p[j1];
                j0 = j1;
                if j0 == 0 {
                    break;
                }
            }
        }
        let mut total = 0.0;
        let mut out = out;
        for j in 1..=m {
            let i = self.p[j];
            if i != 0 {
                total += cost[(i - 1) * m + (j - 1)];
                if let Some(o) = out.as_deref_mut() {
                    o[i - 1] = j - 1;
                }
            }
        }
        total
    }

    /// Optimal cost only, with closed forms for one and two rows.
    pub fn min_cost(&mut self, cost: &[f64], rows: usize, cols: usize) -> f64 {
        match rows {
            0 => 0.0,
            1 => cost[..cols].iter().copied().fold(f64::INFINITY, f64::min),
            2 => {
                let (a, b) = cost.split_at(cols);
                let mut best = f64::INFINITY;
                for i in 0..cols {
                    for j in 0..cols {
                        if i != j {
                            best = best.min(a[i] + b[j]);
                        }
                    }
                }
                best
            }
            _ => self.solve(cost, rows, cols, None),
        }
    }
}

/// Lexicographically smallest optimal assignment for a `rows x cols` matrix.
pub(crate) fn lexicographic_assignment(hung: &mut Hungarian, cost: &[f64], rows: usize, cols: usize) -> (Vec<usize>, f64) {
    let opt = hung.min_cost(cost, rows, cols);
    let tol = 1e-10 * (1.0 + opt.abs());
    let mut remaining = opt;
    let mut used = vec![false; cols];
    let mut chosen = Vec::with_capacity(rows);
    let mut sub = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        let mut pick: Option<(usize, f64)> = None;
        let mut fallback: Option<(usize, f64, f64)> = None;
        for c in 0..cols {
            if used[c] {
                continue;
            }
            // optimal completion of rows i+1.. on the columns left after c
            let free: Vec<usize> = (0..cols).filter(|&x| !used[x] && x != c).collect();
            sub.clear();
            for r in i + 1..rows {
                sub.extend(free.iter().map(|&x| cost[r * cols + x]));
            }
            let rest = hung.min_cost(&sub, rows - i - 1, free.len());
            let total = cost[i * cols + c] + rest;
            if total <= remaining + tol {
                pick = Some((c, rest));
                break;
            }
            if fallback.is_none_or(|(_, t, _)| total < t) {
                fallback = Some((c, total, rest));
            }
        }
        let (c, rest) = pick.unwrap_or_else(|| {
            let (c, _, rest) = fallback.expect("a free column exists while rows <= cols");
            (c, rest)
        });
        used[c] = true;
        chosen.push(c);
        remaining = rest;
    }
    let total = chosen.iter().enumerate().map(|(i, &c)| cost[i * cols + c]).sum();
    (chosen, total)
}

fn group_costs(group: &ColorGroup, centers: &CenterTuple, kind: ObjectiveKind) -> Result<Vec<f64>> {
    let d = centers[0].dim();
    let mut cost = Vec::with_capacity(group.len() * centers.len());
    for p in &group.points {
        if p.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: p.dim() });
        }
        for c in centers.iter() {
            cost.push(kind.cost(p, c));
        }
    }
    Ok(cost)
}

/// Optimal injective assignment of one group's points to the centers.
///
/// Returns the cluster index of each point and the matching cost. Among
/// optimal assignments the lexicographically smallest label vector wins.
pub fn assign_group(group: &ColorGroup, centers: &CenterTuple, kind: MatchingWeightKind) -> Result<(Vec<usize>, f64)> {
    if group.len() > centers.len() {
        return Err(Error::InvalidInstance(format!(
            "group {} has {} points but only {} centers",
            group.id,
            group.len(),
            centers.len()
        )));
    }
    let cost = group_costs(group, centers, kind.into())?;
    let mut hung = Hungarian::new();
    Ok(lexicographic_assignment(&mut hung, &cost, group.len(), centers.len()))
}

/// Assigns every group and returns the partition with its normalized objective.
pub fn assign_all(inst: &Instance, centers: &CenterTuple, kind: MatchingWeightKind) -> Result<(ChromaticPartition, f64)> {
    centers.check(inst)?;
    let mut hung = Hungarian::new();
    let mut rows = Vec::with_capacity(inst.n());
    let mut total = 0.0;
    for group in inst.groups() {
        let cost = group_costs(group, centers, kind.into())?;
        let (labels, c) = lexicographic_assignment(&mut hung, &cost, group.len(), centers.len());
        total += c;
        rows.push(labels);
    }
    Ok((ChromaticPartition::new_unchecked(rows), total / inst.n() as f64))
}

/// Fast repeated evaluation of candidate center tuples on one instance.
///
/// Only computes optimal matching costs, never the partition itself.
#[derive(Debug, Clone)]
pub struct TupleEvaluator {
    kind: ObjectiveKind,
    coords: Vec<f64>,
    offsets: Vec<usize>,
    d: usize,
    k: usize,
    n: usize,
    matrix: Vec<f64>,
    hung: Hungarian,
}

impl TupleEvaluator {
    pub fn new(inst: &Instance, kind: ObjectiveKind) -> Self {
        TupleEvaluator {
            kind,
            coords: inst.flat_coords(),
            offsets: inst.offsets().to_vec(),
            d: inst.dim(),
            k: inst.k(),
            n: inst.n(),
            matrix: Vec::with_capacity(inst.k() * inst.k()),
            hung: Hungarian::new(),
        }
    }

    pub fn kind(&self) -> ObjectiveKind {
        self.kind
    }

    pub fn total_points(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn point(&self, idx: usize) -> &[f64] {
        &self.coords[idx * self.d..(idx + 1) * self.d]
    }

    /// Per-point cost to `center`, in global point order.
    pub fn column(&self, center: &[f64]) -> Vec<f64> {
        let mut col = Vec::with_capacity(self.total_points());
        self.fill_column(center, &mut col);
        col
    }

    pub fn fill_column(&self, center: &[f64], col: &mut Vec<f64>) {
        col.clear();
        col.extend(self.coords.chunks_exact(self.d).map(|p| self.kind.cost(p, center)));
    }

    /// Total (unnormalized) matching cost given one cost column per center.
    pub fn total_from_columns(&mut self, columns: &[&[f64]]) -> f64 {
        debug_assert_eq!(columns.len(), self.k);
        let k = self.k;
        let mut total = 0.0;
        for w in self.offsets.windows(2) {
            let (start, end) = (w[0], w[1]);
            let rows = end - start;
            self.matrix.clear();
            for idx in start..end {
                self.matrix.extend(columns.iter().map(|col| col[idx]));
            }
            total += self.hung.min_cost(&self.matrix, rows, k);
        }
        total
    }

    /// As [`total_from_columns`](Self::total_from_columns) with the last
    /// column passed separately.
    pub fn total_with_extra(&mut self, fixed: &[&[f64]], extra: &[f64]) -> f64 {
        debug_assert_eq!(fixed.len() + 1, self.k);
        let k = self.k;
        let mut total = 0.0;
        for w in self.offsets.windows(2) {
            let (start, end) = (w[0], w[1]);
            self.matrix.clear();
            for idx in start..end {
                self.matrix.extend(fixed.iter().map(|col| col[idx]));
                self.matrix.push(extra[idx]);
            }
            total += self.hung.min_cost(&self.matrix, end - start, k);
        }
        total
    }

    /// Total (unnormalized) optimal chromatic cost of a center tuple.
    pub fn total_cost(&mut self, centers: &[&[f64]]) -> f64 {
        debug_assert_eq!(centers.len(), self.k);
        let k = self.k;
        let d = self.d;
        let mut total = 0.0;
        for w in self.offsets.windows(2) {
            let (start, end) = (w[0], w[1]);
            self.matrix.clear();
            for idx in start..end {
                let p = &self.coords[idx * d..(idx + 1) * d];
                for c in centers {
                    self.matrix.push(self.kind.cost(p, c));
                }
            }
            total += self.hung.min_cost(&self.matrix, end - start, k);
        }
        total
    }

    /// Normalized objective `total / n`.
    pub fn objective(&mut self, centers: &[&[f64]]) -> f64 {
        self.total_cost(centers) / self.n as f64
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// Alternates optimal re-centering and re-matching until the objective stops
/// improving. Never returns a worse solution than plain assignment.
pub fn polish(
    inst: &Instance,
    centers: CenterTuple,
    kind: ObjectiveKind,
    median: &MedianOptions,
    max_rounds: usize,
) -> Result<(CenterTuple, ChromaticPartition, f64)> {
    let (mut part, mut obj) = assign_all(inst, &centers, kind.into())?;
    let mut centers = centers;
    let d = inst.dim();
    let all = inst.all_points();
    for _ in 0..max_rounds {
        let clusters = part.clusters(inst);
        let mut next = Vec::with_capacity(inst.k());
        for (c, members) in clusters.iter().enumerate() {
            if members.is_empty() {
                next.push(centers[c].clone());
                continue;
            }
            let slices: Vec<&[f64]> = members.iter().map(|&i| all[i].coords()).collect();
            let center = match kind {
                ObjectiveKind::Means => mean_of(slices.iter().copied(), d),
                ObjectiveKind::Medians => weiszfeld(&slices, d, median)?,
            };
            next.push(center.into());
        }
        let next = CenterTuple::new(next)?;
        let (next_part, next_obj) = assign_all(inst, &next, kind.into())?;
        if next_obj < obj - 1e-12 * obj.abs() {
            centers = next;
            part = next_part;
            obj = next_obj;
        } else {
            // re-centering alone may still help even if the matching is unchanged
            let recentered = geometry::objective_of(kind, inst, &next, &part)?;
            if recentered < obj - 1e-12 * obj.abs() {
                centers = next;
                obj = recentered;
            }
            break;
        }
    }
    Ok((centers, part, obj))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{dist2, Point};
    use itertools::Itertools;
    use rand::{Rng, SeedableRng};

    fn pts(v: &[&[f64]]) -> Vec<Point> {
        v.iter().map(|c| Point::from(*c)).collect()
    }

    /// Exhaustive minimum over all injective maps, lexicographic order.
    fn brute_force(cost: &[f64], rows: usize, cols: usize) -> (Vec<usize>, f64) {
        let mut best: Option<(Vec<usize>, f64)> = None;
        for perm in (0..cols).permutations(rows) {
            let c: f64 = perm.iter().enumerate().map(|(i, &j)| cost[i * cols + j]).sum();
            if best.as_ref().is_none_or(|(_, b)| c < *b) {
                best = Some((perm, c));
            }
        }
        best.unwrap()
    }

    #[test]
    fn assign_group_examples() {
        let g = ColorGroup::new(0, pts(&[&[0.0, 0.0], &[10.0, 0.0]]));
        let centers = CenterTuple::new(pts(&[&[1.0, 0.0], &[9.0, 0.0]])).unwrap();
        let (labels, cost) = assign_group(&g, &centers, MatchingWeightKind::SquaredDistance).unwrap();
        assert_eq!(labels, vec![0, 1]);
        assert_eq!(cost, 2.0);

        let g = ColorGroup::new(0, pts(&[&[5.0, 5.0]]));
        let centers = CenterTuple::new(pts(&[&[0.0, 0.0], &[5.0, 5.0]])).unwrap();
        let (labels, cost) = assign_group(&g, &centers, MatchingWeightKind::SquaredDistance).unwrap();
        assert_eq!(labels, vec![1]);
        assert_eq!(cost, 0.0);
    }

    #[test]
    fn assign_group_dimension_mismatch() {
        let g = ColorGroup::new(0, pts(&[&[0.0, 0.0, 0.0]]));
        let centers = CenterTuple::new(pts(&[&[0.0, 0.0], &[1.0, 1.0]])).unwrap();
        assert!(matches!(
            assign_group(&g, &centers, MatchingWeightKind::Distance),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ties_break_lexicographically() {
        // two identical centers: both labelings cost the same
        let g = ColorGroup::new(0, pts(&[&[1.0], &[2.0]]));
        let centers = CenterTuple::new(pts(&[&[0.0], &[0.0]])).unwrap();
        let (labels, _) = assign_group(&g, &centers, MatchingWeightKind::SquaredDistance).unwrap();
        assert_eq!(labels, vec![0, 1]);
        let g = ColorGroup::new(0, pts(&[&[3.0], &[3.0], &[3.0]]));
        let centers = CenterTuple::new(pts(&[&[0.0], &[1.0], &[1.0], &[0.0]])).unwrap();
        let (labels, _) = assign_group(&g, &centers, MatchingWeightKind::Distance).unwrap();
        assert_eq!(labels, vec![0, 1, 2]);
    }

    #[test]
    fn hungarian_matches_permutation_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut hung = Hungarian::new();
        for _ in 0..300 {
            let cols = rng.random_range(1..=6);
            let rows = rng.random_range(1..=cols);
            let cost: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(0.0..10.0)).collect();
            let (bl, bc) = brute_force(&cost, rows, cols);
            let (ll, lc) = lexicographic_assignment(&mut hung, &cost, rows, cols);
            assert!((bc - lc).abs() <= 1e-9, "{bc} vs {lc}");
            assert_eq!(bl, ll);
            assert!((hung.solve(&cost, rows, cols, None) - bc).abs() <= 1e-9);
            assert!((hung.min_cost(&cost, rows, cols) - bc).abs() <= 1e-9);
        }
    }

    #[test]
    fn integer_ties_agree_with_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let mut hung = Hungarian::new();
        for _ in 0..300 {
            let cols = rng.random_range(1..=5);
            let rows = rng.random_range(1..=cols);
            let cost: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(0..3) as f64).collect();
            let (bl, bc) = brute_force(&cost, rows, cols);
            let (ll, lc) = lexicographic_assignment(&mut hung, &cost, rows, cols);
            assert_eq!(bc, lc);
            assert_eq!(bl, ll);
        }
    }

    #[test]
    fn assign_all_examples() {
        let inst = Instance::new(
            vec![
                ColorGroup::new(0, pts(&[&[0.0, 0.0], &[10.0, 0.0]])),
                ColorGroup::new(1, pts(&[&[10.0, 0.0], &[0.0, 0.0]])),
            ],
            2,
        )
        .unwrap();
        let centers = CenterTuple::new(pts(&[&[1.0, 0.0], &[9.0, 0.0]])).unwrap();
        let (part, obj) = assign_all(&inst, &centers, MatchingWeightKind::SquaredDistance).unwrap();
        part.validate(&inst).unwrap();
        assert_eq!(part.assignment(), &[vec![0, 1], vec![1, 0]]);
        assert_eq!(obj, (2.0 + 2.0) / 2.0);

        let centers = CenterTuple::new(pts(&[&[0.0, 0.0], &[10.0, 0.0]])).unwrap();
        let (_, obj) = assign_all(&inst, &centers, MatchingWeightKind::Distance).unwrap();
        assert_eq!(obj, 0.0);
    }

    #[test]
    fn evaluator_agrees_with_assign_all() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..40 {
            let k = rng.random_range(2..=5);
            let d = rng.random_range(1..=3);
            let n = rng.random_range(1..=6);
            let groups = (0..n)
                .map(|g| {
                    let size = rng.random_range(1..=k);
                    ColorGroup::new(
                        g,
                        (0..size)
                            .map(|_| Point::from((0..d).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<_>>()))
                            .collect(),
                    )
                })
                .collect();
            let inst = Instance::new(groups, k).unwrap();
            let centers = CenterTuple::new(
                (0..k)
                    .map(|_| Point::from((0..d).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<_>>()))
                    .collect(),
            )
            .unwrap();
            for kind in [ObjectiveKind::Means, ObjectiveKind::Medians] {
                let (part, obj) = assign_all(&inst, &centers, kind.into()).unwrap();
                part.validate(&inst).unwrap();
                let recomputed = geometry::objective_of(kind, &inst, &centers, &part).unwrap();
                let mut ev = TupleEvaluator::new(&inst, kind);
                let refs: Vec<&[f64]> = centers.iter().map(|c| c.coords()).collect();
                let fast = ev.objective(&refs);
                let cols: Vec<Vec<f64>> = refs.iter().map(|c| ev.column(c)).collect();
                let col_refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
                let from_cols = ev.total_from_columns(&col_refs) / inst.n() as f64;
                assert!((obj - recomputed).abs() <= 1e-9 * (1.0 + obj));
                assert!((obj - fast).abs() <= 1e-9 * (1.0 + obj));
                assert!((obj - from_cols).abs() <= 1e-9 * (1.0 + obj));
            }
        }
    }

    #[test]
    fn adding_a_center_never_hurts() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let mut hung = Hungarian::new();
        for _ in 0..200 {
            let rows = rng.random_range(1..=2);
            let pts: Vec<[f64; 2]> = (0..rows).map(|_| [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]).collect();
            let centers: Vec<[f64; 2]> = (0..3).map(|_| [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]).collect();
            let matrix = |cols: usize| -> Vec<f64> {
                pts.iter().flat_map(|p| centers[..cols].iter().map(move |c| dist2(p, c))).collect()
            };
            let two = hung.min_cost(&matrix(2), rows, 2);
            let three = hung.min_cost(&matrix(3), rows, 3);
            assert!(three <= two + 1e-12);
        }
    }

    #[test]
    fn polish_never_increases_objective() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..30 {
            let groups = (0..5)
                .map(|g| ColorGroup::new(g, (0..3).map(|_| Point::from([rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)])).collect()))
                .collect();
            let inst = Instance::new(groups, 3).unwrap();
            let start = CenterTuple::new((0..3).map(|_| Point::from([rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)])).collect()).unwrap();
            for kind in [ObjectiveKind::Means, ObjectiveKind::Medians] {
                let (_, before) = assign_all(&inst, &start, kind.into()).unwrap();
                let (c, p, after) = polish(&inst, start.clone(), kind, &MedianOptions::with_tol(1e-9), 50).unwrap();
                assert!(after <= before + 1e-12);
                let re = geometry::objective_of(kind, &inst, &c, &p).unwrap();
                assert!((re - after).abs() <= 1e-9 * (1.0 + after));
            }
        }
    }
}
