//! Grids of candidate means inside the affine span of a few anchor points.
//!
//! The lattice is anchored at the first vertex, with axes from Gram–Schmidt
//! on the vertex differences (in index order) and spacing `ε r / (4j)`, where
//! `r` is the largest distance from the first vertex to another one. Only
//! lattice points inside the ball of radius `r` around the first vertex are
//! kept; the vertices themselves are always included. In integer lattice
//! coordinates the ball is `||c|| ≤ 4j/ε`, so the grid size depends only on
//! `j`, `ε` and the rank of the span, never on the ambient dimension.
//!
//! Size bound: at most `(8j/ε)^j` points (implementation constant `C = 1`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist, mean, variance0, Point};

/// Default cap on the number of grid points.
pub const DEFAULT_MAX_POINTS: usize = 2_000_000;

const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimplexGridParams {
    pub epsilon: f64,
    pub max_points: usize,
    /// Drop lattice points outside the simplex itself. Ignored when the
    /// vertices are affinely dependent.
    pub simplex_only: bool,
    /// Also add, for every proper subset of the vertices, the grid of its
    /// face at epsilon `ε/16` (restricted to the face). This covers means
    /// of point sets with arbitrarily small parts.
    #[serde(default)]
    pub faces: bool,
}

impl SimplexGridParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        let p = SimplexGridParams { epsilon, max_points: DEFAULT_MAX_POINTS, simplex_only: false, faces: false };
        p.validate()?;
        Ok(p)
    }

    pub fn with_max_points(mut self, max_points: usize) -> Self {
        self.max_points = max_points;
        self
    }

    pub fn with_faces(mut self) -> Self {
        self.faces = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::InvalidConfig(format!("grid epsilon must lie in (0, 1], got {}", self.epsilon)));
        }
        if self.max_points == 0 {
            return Err(Error::InvalidConfig("grid max_points must be at least 1".into()));
        }
        Ok(())
    }
}

/// The documented size bound `(8j/ε)^j`.
pub fn grid_size_bound(j: usize, epsilon: f64) -> f64 {
    (8.0 * j as f64 / epsilon).powi(j as i32)
}

/// Lattice geometry for one vertex set.
#[derive(Debug)]
pub(crate) struct Lattice {
    origin: Vec<f64>,
    /// Orthonormal basis, scaled by the spacing.
    axes: Vec<Vec<f64>>,
    /// Squared radius in lattice units.
    radius2: f64,
    /// Vertex coordinates in the (unscaled) basis, row per vertex after the
    /// first; upper triangular by construction. `None` when dependent.
    vertex_coords: Option<Vec<Vec<f64>>>,
    /// Lattice-unit coordinates of every vertex after the first.
    vertex_units: Vec<Vec<f64>>,
    spacing: f64,
}

impl Lattice {
    pub(crate) fn new(vertices: &[&[f64]], epsilon: f64) -> Result<Lattice> {
        let v0 = *vertices.first().ok_or(Error::EmptySet)?;
        let d = v0.len();
        if let Some(v) = vertices.iter().find(|v| v.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: v.len() });
        }
        let j = vertices.len();
        let r = vertices.iter().map(|v| dist(v, v0)).fold(0.0, f64::max);
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let mut independent = true;
        let mut vertex_coords = Vec::new();
        if r > 0.0 {
            for v in &vertices[1..] {
                let mut w: Vec<f64> = v.iter().zip(v0).map(|(a, b)| a - b).collect();
                let mut coords = Vec::with_capacity(j);
                for e in &basis {
                    let proj: f64 = w.iter().zip(e).map(|(a, b)| a * b).sum();
                    coords.push(proj);
                    w.iter_mut().zip(e).for_each(|(a, b)| *a -= proj * b);
                }
                let norm = w.iter().map(|c| c * c).sum::<f64>().sqrt();
                if norm > RANK_TOL * r {
                    w.iter_mut().for_each(|c| *c /= norm);
                    basis.push(w);
                    coords.push(norm);
                } else {
                    independent = false;
                }
                vertex_coords.push(coords);
            }
        }
        let spacing = epsilon * r / (4.0 * j as f64);
        let axes = basis.iter().map(|e| e.iter().map(|c| c * spacing).collect()).collect();
        let units = 4.0 * j as f64 / epsilon;
        let vertex_units = vertex_coords
            .iter()
            .map(|c: &Vec<f64>| {
                let mut u: Vec<f64> = c.iter().map(|x| x / spacing).collect();
                u.resize(basis.len(), 0.0);
                u
            })
            .collect();
        Ok(Lattice {
            vertex_units,
            origin: v0.to_vec(),
            axes,
            radius2: units * units * (1.0 + 1e-12),
            vertex_coords: (independent && r > 0.0).then_some(vertex_coords),
            spacing,
        })
    }

    pub(crate) fn rank(&self) -> usize {
        self.axes.len()
    }

    /// Epsilon at which the grid is expected to hold about `cap / 2`
    /// points, from the volume of the simplex (or ball) in lattice units.
    /// Only meaningful on a lattice built with epsilon 1.
    fn epsilon_for(&self, cap: usize, simplex_only: bool) -> f64 {
        let m = self.rank();
        if m == 0 {
            return 0.0;
        }
        let target = (cap as f64 / 2.0).max(1.0);
        let mf = m as f64;
        // volume at epsilon 1 in lattice units, which scales as ε^-m
        let volume = match (&self.vertex_coords, simplex_only) {
            (Some(vc), true) => {
                let det: f64 = (0..m).map(|i| vc[i][i] / self.spacing).product();
                det / (1..=m).map(|i| i as f64).product::<f64>()
            }
            _ => {
                let unit_ball = std::f64::consts::PI.powf(mf / 2.0) / gamma_half(m + 2);
                unit_ball * self.radius2.powf(mf / 2.0)
            }
        };
        (volume / target).powf(1.0 / mf)
    }

    /// Number of lattice points in the ball.
    pub(crate) fn count(&self) -> u64 {
        count_ball(self.rank(), self.radius2)
    }

    fn inside_simplex(&self, c: &[i64]) -> bool {
        let Some(vc) = &self.vertex_coords else {
            return true;
        };
        // solve for barycentric weights by back substitution on the
        // triangular vertex-coordinate system
        let m = c.len();
        let mut stack = [0.0f64; 16];
        let mut heap = Vec::new();
        let lambda: &mut [f64] = if m <= stack.len() {
            &mut stack[..m]
        } else {
            heap.resize(m, 0.0);
            &mut heap
        };
        for row in (0..m).rev() {
            let mut rhs = c[row] as f64 * self.spacing;
            for col in row + 1..m {
                rhs -= vc[col][row] * lambda[col];
            }
            lambda[row] = rhs / vc[row][row];
        }
        let tol = 1e-9;
        lambda.iter().all(|&l| l >= -tol) && lambda.iter().sum::<f64>() <= 1.0 + tol
    }

    /// Whether vertex `l` (1-based after the origin) is itself a kept
    /// lattice point.
    fn vertex_on_lattice(&self, l: usize, simplex_only: bool) -> bool {
        let u = &self.vertex_units[l - 1];
        let c: Vec<i64> = u.iter().map(|x| x.round() as i64).collect();
        let on = u.iter().zip(&c).all(|(x, &ci)| (x - ci as f64).abs() <= 1e-9);
        let norm2: f64 = c.iter().map(|&ci| (ci * ci) as f64).sum();
        on && norm2 <= self.radius2 && (!simplex_only || self.inside_simplex(&c))
    }

    /// Appends every kept lattice point to `out` (row-major).
    pub(crate) fn emit(&self, simplex_only: bool, max_points: usize, out: &mut Vec<f64>) -> Result<usize> {
        let m = self.rank();
        let mut c = vec![0i64; m];
        let mut emitted = 0usize;
        // bounding box of the simplex in lattice units, or unbounded
        let mut bounds = vec![(i64::MIN, i64::MAX); m];
        if simplex_only && self.vertex_coords.is_some() {
            for (axis, b) in bounds.iter_mut().enumerate() {
                let (lo, hi) = self
                    .vertex_units
                    .iter()
                    .map(|u| u[axis])
                    .fold((0.0f64, 0.0f64), |(lo, hi), x| (lo.min(x), hi.max(x)));
                *b = ((lo - 1e-9).floor() as i64, (hi + 1e-9).ceil() as i64);
            }
        }
        let ctx = Emit { simplex_only, max_points, bounds: &bounds };
        self.emit_rec(0, self.radius2, &mut c, &ctx, &mut emitted, out)?;
        Ok(emitted)
    }

    fn emit_rec(
        &self,
        axis: usize,
        rem: f64,
        c: &mut [i64],
        ctx: &Emit<'_>,
        emitted: &mut usize,
        out: &mut Vec<f64>,
    ) -> Result<()> {
        if axis == c.len() {
            if ctx.simplex_only && !self.inside_simplex(c) {
                return Ok(());
            }
            *emitted += 1;
            if *emitted > ctx.max_points {
                return Err(Error::GridTooLarge { max_points: ctx.max_points });
            }
            let start = out.len();
            out.extend_from_slice(&self.origin);
            for (&ci, e) in c.iter().zip(&self.axes) {
                if ci != 0 {
                    let t = ci as f64;
                    out[start..].iter_mut().zip(e).for_each(|(p, a)| *p += t * a);
                }
            }
            return Ok(());
        }
        let span = rem.sqrt().floor() as i64;
        let (lo, hi) = ctx.bounds[axis];
        for ci in (-span).max(lo)..=span.min(hi) {
            let used = (ci * ci) as f64;
            if used > rem {
                continue;
            }
            c[axis] = ci;
            self.emit_rec(axis + 1, rem - used, c, ctx, emitted, out)?;
        }
        c[axis] = 0;
        Ok(())
    }
}

struct Emit<'a> {
    simplex_only: bool,
    max_points: usize,
    bounds: &'a [(i64, i64)],
}

/// `Γ(n/2)` for a positive integer `n`.
fn gamma_half(n: usize) -> f64 {
    match n {
        1 => std::f64::consts::PI.sqrt(),
        2 => 1.0,
        _ => (n as f64 / 2.0 - 1.0) * gamma_half(n - 2),
    }
}

/// Integer points `c ∈ Z^m` with `||c||² ≤ radius2`.
fn count_ball(m: usize, radius2: f64) -> u64 {
    if m == 0 {
        return 1;
    }
    let span = radius2.sqrt().floor() as i64;
    (-span..=span)
        .map(|c| {
            let rest = radius2 - (c * c) as f64;
            if rest < 0.0 {
                0
            } else {
                count_ball(m - 1, rest)
            }
        })
        .sum()
}

/// Appends the grid for `vertices` (lattice plus the vertices, deduplicated
/// at 1e-12) to `out`, row-major. Returns the number of points appended.
pub(crate) fn grid_into(
    vertices: &[&[f64]],
    epsilon: f64,
    simplex_only: bool,
    max_points: usize,
    out: &mut Vec<f64>,
) -> Result<usize> {
    let lattice = Lattice::new(vertices, epsilon)?;
    let d = vertices[0].len();
    if lattice.rank() == 0 {
        out.extend_from_slice(vertices[0]);
        return Ok(1);
    }
    if !simplex_only && lattice.count() > max_points as u64 {
        return Err(Error::GridTooLarge { max_points });
    }
    let mut count = lattice.emit(simplex_only, max_points, out)?;
    let mut extra: Vec<&[f64]> = Vec::new();
    for (l, v) in vertices.iter().enumerate().skip(1) {
        let duplicate = extra.iter().any(|e| e == v) || *v == vertices[0];
        if !duplicate && !lattice.vertex_on_lattice(l, simplex_only) {
            extra.push(v);
        }
    }
    for v in extra {
        if count >= max_points {
            return Err(Error::GridTooLarge { max_points });
        }
        out.extend_from_slice(v);
        count += 1;
    }
    let _ = d;
    Ok(count)
}

/// Like [`grid_into`] but keeps the grid within `cap` points: the grid
/// epsilon starts at `epsilon` (or a volume estimate of the epsilon that
/// fits, if larger) and grows by half until the grid fits, up to `4j`,
/// where the spacing equals the ball radius and the grid is returned
/// whatever its size. Returns the number of points appended and the epsilon
/// used.
pub(crate) fn capped_grid_into(
    vertices: &[&[f64]],
    epsilon: f64,
    simplex_only: bool,
    cap: usize,
    out: &mut Vec<f64>,
) -> Result<(usize, f64)> {
    let start = out.len();
    let coarsest = 4.0 * vertices.len() as f64;
    let mut eps = epsilon.max(Lattice::new(vertices, 1.0)?.epsilon_for(cap, simplex_only)).min(coarsest);
    loop {
        let last = eps >= coarsest;
        let limit = if last { usize::MAX } else { cap };
        match grid_into(vertices, eps, simplex_only, limit, out) {
            Ok(n) => return Ok((n, eps)),
            Err(Error::GridTooLarge { .. }) if !last => {
                out.truncate(start);
                eps = (1.5 * eps).min(coarsest);
            }
            Err(e) => {
                out.truncate(start);
                return Err(e);
            }
        }
    }
}

/// Row-major grid for `params`, face grids included when requested.
fn grid_flat(vertices: &[Point], params: &SimplexGridParams) -> Result<Vec<f64>> {
    params.validate()?;
    let slices: Vec<&[f64]> = vertices.iter().map(|v| v.coords()).collect();
    let mut flat = Vec::new();
    let mut count = grid_into(&slices, params.epsilon, params.simplex_only, params.max_points, &mut flat)?;
    let j = slices.len();
    if params.faces && j > 1 {
        let fine = params.epsilon / 16.0;
        for mask in 1..(1u64 << j) - 1 {
            let face: Vec<&[f64]> = (0..j).filter(|&l| mask >> l & 1 == 1).map(|l| slices[l]).collect();
            let room = params.max_points.saturating_sub(count);
            if room == 0 {
                return Err(Error::GridTooLarge { max_points: params.max_points });
            }
            count += grid_into(&face, fine, true, room, &mut flat)?;
        }
    }
    Ok(flat)
}

/// Grid of candidate means for the simplex spanned by `vertices`.
pub fn simplex_grid(vertices: &[Point], params: &SimplexGridParams) -> Result<Vec<Point>> {
    let flat = grid_flat(vertices, params)?;
    let d = vertices[0].dim();
    if !params.faces {
        return Ok(flat.chunks_exact(d).map(Point::from).collect());
    }
    // face grids repeat the points shared with coarser lattices
    let mut seen = std::collections::HashSet::new();
    Ok(flat
        .chunks_exact(d)
        .filter(|p| seen.insert(p.iter().map(|c| c.to_bits()).collect::<Vec<u64>>()))
        .map(Point::from)
        .collect())
}

fn min_distance(flat: &[f64], target: &Point) -> f64 {
    flat.chunks_exact(target.dim()).map(|g| dist(g, target)).fold(f64::INFINITY, f64::min)
}

fn checked_union(parts: &[Vec<Point>]) -> Result<Vec<Point>> {
    if parts.is_empty() || parts.iter().any(|p| p.is_empty()) {
        return Err(Error::EmptySet);
    }
    Ok(parts.concat())
}

/// Builds the grid (with face grids) on the exact part means and returns
/// `(min distance from the grid to mean(P), √ε·δ)` with `δ² = Var⁰(P)`.
pub fn grid_covers_mean_check(parts: &[Vec<Point>], epsilon: f64) -> Result<(f64, f64)> {
    let all = checked_union(parts)?;
    let vertices = parts.iter().map(|p| mean(p)).collect::<Result<Vec<_>>>()?;
    let grid = grid_flat(&vertices, &SimplexGridParams::new(epsilon)?.with_faces())?;
    let o = mean(&all)?;
    let delta = variance0(&all)?.sqrt();
    Ok((min_distance(&grid, &o), epsilon.sqrt() * delta))
}

/// As [`grid_covers_mean_check`], but the grid is built on the part means
/// shifted by `shifts`; the bound becomes `√ε·δ + (1+ε)·L` with `L` the
/// largest shift norm.
pub fn grid_covers_perturbed_mean_check(parts: &[Vec<Point>], shifts: &[Point], epsilon: f64) -> Result<(f64, f64)> {
    let all = checked_union(parts)?;
    if shifts.len() != parts.len() {
        return Err(Error::InvalidConfig(format!("{} shifts for {} parts", shifts.len(), parts.len())));
    }
    let mut vertices = Vec::with_capacity(parts.len());
    let mut l = 0.0f64;
    for (part, s) in parts.iter().zip(shifts) {
        let m = mean(part)?;
        if s.dim() != m.dim() {
            return Err(Error::DimensionMismatch { expected: m.dim(), found: s.dim() });
        }
        l = l.max(s.iter().map(|c| c * c).sum::<f64>().sqrt());
        vertices.push(Point::from(m.iter().zip(s.iter()).map(|(a, b)| a + b).collect::<Vec<_>>()));
    }
    let grid = grid_flat(&vertices, &SimplexGridParams::new(epsilon)?.with_faces())?;
    let o = mean(&all)?;
    let delta = variance0(&all)?.sqrt();
    Ok((min_distance(&grid, &o), epsilon.sqrt() * delta + (1.0 + epsilon) * l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, StandardNormal};

    fn params(eps: f64) -> SimplexGridParams {
        SimplexGridParams::new(eps).unwrap()
    }

    fn random_point(rng: &mut impl Rng, d: usize, scale: f64) -> Point {
        Point::from((0..d).map(|_| { let z: f64 = StandardNormal.sample(rng); scale * z }).collect::<Vec<f64>>())
    }

    /// Distance from `x` to the affine span of `vertices`, via least squares
    /// on the normal equations (independent of the Gram–Schmidt code).
    fn span_residual(vertices: &[Point], x: &Point) -> f64 {
        let v0 = &vertices[0];
        let dirs: Vec<Vec<f64>> =
            vertices[1..].iter().map(|v| v.iter().zip(v0.iter()).map(|(a, b)| a - b).collect()).collect();
        let mut resid: Vec<f64> = x.iter().zip(v0.iter()).map(|(a, b)| a - b).collect();
        // repeated projection onto each direction converges for small sets
        for _ in 0..200 {
            for dvec in &dirs {
                let nn: f64 = dvec.iter().map(|c| c * c).sum();
                if nn == 0.0 {
                    continue;
                }
                let t: f64 = resid.iter().zip(dvec).map(|(a, b)| a * b).sum::<f64>() / nn;
                resid.iter_mut().zip(dvec).for_each(|(a, b)| *a -= t * b);
            }
        }
        resid.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    #[test]
    fn single_vertex_is_the_grid() {
        for eps in [0.01, 0.5, 1.0] {
            let g = simplex_grid(&[Point::from([3.0, -1.0, 2.0])], &params(eps)).unwrap();
            assert_eq!(g, vec![Point::from([3.0, -1.0, 2.0])]);
        }
    }

    #[test]
    fn segment_lattice_has_seventeen_points() {
        let g = simplex_grid(&[[0.0, 0.0].into(), [1.0, 0.0].into()], &params(1.0)).unwrap();
        assert_eq!(g.len(), 17);
        let mut xs: Vec<f64> = g.iter().map(|p| p[0]).collect();
        xs.sort_by(f64::total_cmp);
        for (i, x) in xs.iter().enumerate() {
            assert!((x - (-1.0 + i as f64 / 8.0)).abs() < 1e-12);
        }
        assert!(g.iter().all(|p| p[1] == 0.0));
    }

    #[test]
    fn duplicate_vertices_collapse() {
        let g = simplex_grid(&[[0.0, 0.0].into(), [0.0, 0.0].into()], &params(0.5)).unwrap();
        assert_eq!(g, vec![Point::from([0.0, 0.0])]);
    }

    #[test]
    fn cap_is_enforced() {
        let v: Vec<Point> = vec![[0.0, 0.0, 0.0].into(), [1.0, 0.0, 0.0].into(), [0.0, 1.0, 0.0].into()];
        let p = params(0.1).with_max_points(100);
        assert_eq!(simplex_grid(&v, &p).unwrap_err(), Error::GridTooLarge { max_points: 100 });
    }

    #[test]
    fn rejects_bad_params_and_dimensions() {
        assert!(SimplexGridParams::new(0.0).is_err());
        assert!(SimplexGridParams::new(1.5).is_err());
        let v: Vec<Point> = vec![[0.0, 0.0].into(), [1.0, 0.0, 0.0].into()];
        assert!(matches!(simplex_grid(&v, &params(1.0)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn size_bound_and_span() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for j in 1..=4 {
            for eps in [1.0, 0.5, 0.25] {
                let v: Vec<Point> = (0..j).map(|_| random_point(&mut rng, 6, 2.0)).collect();
                let g = simplex_grid(&v, &params(eps)).unwrap();
                assert!((g.len() as f64) <= grid_size_bound(j, eps), "j={j} eps={eps} n={}", g.len());
                for x in g.iter().step_by(37) {
                    assert!(span_residual(&v, x) < 1e-9);
                }
                for vert in &v {
                    assert!(g.iter().any(|x| x.dist(vert) < 1e-12));
                }
            }
        }
    }

    /// Maps `x` (in R^m) into R^d through a random orthonormal frame.
    fn embed(frame: &[Vec<f64>], x: &Point) -> Point {
        let d = frame[0].len();
        let mut out = vec![0.0; d];
        for (xi, e) in x.iter().zip(frame) {
            out.iter_mut().zip(e).for_each(|(o, a)| *o += xi * a);
        }
        Point::from(out)
    }

    fn random_frame(rng: &mut impl Rng, m: usize, d: usize) -> Vec<Vec<f64>> {
        let mut frame: Vec<Vec<f64>> = Vec::new();
        while frame.len() < m {
            let mut v = random_point(rng, d, 1.0).into_inner();
            for e in &frame {
                let p: f64 = v.iter().zip(e).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(e).for_each(|(a, b)| *a -= p * b);
            }
            let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            v.iter_mut().for_each(|c| *c /= n);
            frame.push(v);
        }
        frame
    }

    #[test]
    fn count_is_independent_of_ambient_dimension() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for j in 2..=4 {
            for _ in 0..3 {
                let intrinsic: Vec<Point> = (0..j).map(|_| random_point(&mut rng, j - 1, 1.0)).collect();
                let low_frame = random_frame(&mut rng, j - 1, 3);
                let high_frame = random_frame(&mut rng, j - 1, 100);
                let low: Vec<Point> = intrinsic.iter().map(|x| embed(&low_frame, x)).collect();
                let high: Vec<Point> = intrinsic.iter().map(|x| embed(&high_frame, x)).collect();
                let a = simplex_grid(&low, &params(0.5)).unwrap().len();
                let b = simplex_grid(&high, &params(0.5)).unwrap().len();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn simplex_filter_keeps_only_the_simplex() {
        let v: Vec<Point> = vec![[0.0, 0.0].into(), [1.0, 0.0].into(), [0.0, 1.0].into()];
        let mut p = params(1.0);
        let all = simplex_grid(&v, &p).unwrap();
        p.simplex_only = true;
        let inside = simplex_grid(&v, &p).unwrap();
        assert!(inside.len() < all.len());
        assert!(inside.iter().all(|x| x[0] >= -1e-9 && x[1] >= -1e-9 && x[0] + x[1] <= 1.0 + 1e-9));
        // spacing 1/12 along both axes: triangular numbers of 13
        assert_eq!(inside.len(), 13 * 14 / 2);
    }

    #[test]
    fn covers_mean_examples() {
        let part: Vec<Point> = vec![[0.0, 1.0].into(), [2.0, 5.0].into()];
        let (dmin, _) = grid_covers_mean_check(&[part], 0.5).unwrap();
        assert!(dmin < 1e-12);

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for (j, eps, d) in [(3usize, 0.25, 10usize), (2, 1.0, 4)] {
            for _ in 0..20 {
                let parts: Vec<Vec<Point>> = (0..j)
                    .map(|_| {
                        let c = random_point(&mut rng, d, 3.0);
                        let size = rng.random_range(1..8);
                        (0..size)
                            .map(|_| {
                                let z = random_point(&mut rng, d, 1.0);
                                Point::from(c.iter().zip(z.iter()).map(|(a, b)| a + b).collect::<Vec<_>>())
                            })
                            .collect()
                    })
                    .collect();
                let (dmin, bound) = grid_covers_mean_check(&parts, eps).unwrap();
                assert!(dmin <= bound, "{dmin} > {bound}");
            }
        }
    }

    #[test]
    fn face_grids_cover_a_far_light_part() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let cluster = |c: [f64; 3], rng: &mut rand_chacha::ChaCha8Rng| -> Vec<Point> {
            (0..2000).map(|_| Point::from(c.iter().map(|x| { let z: f64 = StandardNormal.sample(rng); x + 0.1 * z }).collect::<Vec<f64>>())).collect()
        };
        let a = cluster([0.0, 0.0, 0.0], &mut rng);
        let b = cluster([20.0, 0.0, 0.0], &mut rng);
        let far = vec![Point::from(vec![6.0, 3000.0, 0.0])];
        for eps in [0.3, 0.6, 1.0] {
            let (dmin, bound) = grid_covers_mean_check(&[far.clone(), a.clone(), b.clone()], eps).unwrap();
            assert!(dmin <= bound, "eps {eps}: {dmin} > {bound}");
        }
        let verts: Vec<Point> = vec![[0.0, 0.0].into(), [4.0, 0.0].into(), [0.0, 4.0].into()];
        let plain = simplex_grid(&verts, &params(0.5)).unwrap();
        let with = simplex_grid(&verts, &params(0.5).with_faces()).unwrap();
        assert!(with.len() > plain.len());
        assert!(plain.iter().all(|p| with.contains(p)));
    }

    #[test]
    fn capped_grid_coarsens_until_it_fits() {
        let a = [0.0, 0.0];
        let b = [3.0, 0.0];
        let c = [0.0, 3.0];
        let verts: Vec<&[f64]> = vec![&a, &b, &c];
        let mut full = Vec::new();
        grid_into(&verts, 0.5, true, usize::MAX, &mut full).unwrap();
        let mut out = vec![7.0, 7.0];
        let (n, eps) = capped_grid_into(&verts, 0.5, true, usize::MAX, &mut out).unwrap();
        assert_eq!((n, eps), (full.len() / 2, 0.5));
        assert_eq!(&out[2..], &full[..]);

        let mut out = Vec::new();
        let (n, eps) = capped_grid_into(&verts, 0.01, true, 200, &mut out).unwrap();
        assert!(n <= 200 && eps > 0.01 && eps < 1.0, "{n} {eps}");
        assert_eq!(out.len(), 2 * n);
        // the coarser grid is exactly the plain grid at that epsilon
        let mut plain = Vec::new();
        grid_into(&verts, eps, true, usize::MAX, &mut plain).unwrap();
        assert_eq!(out, plain);

        // past ε = 1 the grid keeps coarsening; at the coarsest level only
        // the vertices remain inside the triangle
        let mut out = Vec::new();
        let (n, eps) = capped_grid_into(&verts, 0.01, true, 40, &mut out).unwrap();
        assert!(n <= 40 && eps > 1.0, "{n} {eps}");
        let mut out = Vec::new();
        let (n, eps) = capped_grid_into(&verts, 0.01, true, 1, &mut out).unwrap();
        assert_eq!((n, eps), (3, 12.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn perturbed_grid_covers_mean(seed in any::<u64>(), j in 1usize..4, l in 0.0f64..2.0) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let parts: Vec<Vec<Point>> = (0..j)
                .map(|_| (0..rng.random_range(1..6)).map(|_| random_point(&mut rng, 3, 2.0)).collect())
                .collect();
            let shifts: Vec<Point> = (0..j)
                .map(|_| {
                    let z = random_point(&mut rng, 3, 1.0);
                    let norm = z.iter().map(|c| c * c).sum::<f64>().sqrt().max(1e-12);
                    let s = l * rng.random::<f64>() / norm;
                    Point::from(z.iter().map(|c| c * s).collect::<Vec<_>>())
                })
                .collect();
            let (dmin, bound) = grid_covers_perturbed_mean_check(&parts, &shifts, 0.5).unwrap();
            prop_assert!(dmin <= bound + 1e-12);
        }
    }
}
