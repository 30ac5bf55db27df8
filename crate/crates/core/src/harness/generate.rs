//! Planted-cluster instance generator.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::io::{GroupRecord, InstanceFile, INSTANCE_FORMAT};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerateSpec {
    /// Number of planted clusters.
    pub k: usize,
    /// Number of groups.
    pub n: usize,
    pub d: usize,
    /// Standard deviation of the per-coordinate noise.
    pub sigma: f64,
    /// Minimum distance between planted centers.
    pub separation: f64,
    /// Every group gets one point per cluster; otherwise group sizes are
    /// uniform in `1..=k`.
    pub full: bool,
    pub seed: u64,
}

impl GenerateSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::BadSpec(m.into()));
        if self.k < 2 {
            return bad("k must be at least 2");
        }
        if self.n == 0 || self.d == 0 {
            return bad("n and d must be positive");
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be finite and non-negative");
        }
        if !(self.separation > 0.0 && self.separation.is_finite()) {
            return bad("separation must be finite and positive");
        }
        Ok(())
    }
}

/// Planted centers at pairwise distance at least `separation`.
fn plant_centers(spec: &GenerateSpec, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let side = spec.separation * (2.0 * spec.k as f64).powf(1.0 / spec.d as f64) * 2.0;
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(spec.k);
    for _ in 0..10_000 {
        if centers.len() == spec.k {
            break;
        }
        let c: Vec<f64> = (0..spec.d).map(|_| rng.random_range(0.0..side)).collect();
        if centers.iter().all(|o| crate::geometry::dist(o, &c) >= spec.separation) {
            centers.push(c);
        }
    }
    if centers.len() < spec.k {
        // crowded: fall back to a line
        centers = (0..spec.k)
            .map(|i| {
                let mut c = vec![0.0; spec.d];
                c[0] = i as f64 * spec.separation;
                c
            })
            .collect();
    }
    centers
}

pub fn generate(spec: &GenerateSpec) -> Result<InstanceFile> {
    spec.validate()?;
    let mut rng = rng::named_stream(spec.seed, "generate");
    let centers = plant_centers(spec, &mut rng);
    let noise = Normal::new(0.0, spec.sigma).map_err(|e| Error::BadSpec(e.to_string()))?;
    let groups = (0..spec.n)
        .map(|id| {
            let size = if spec.full { spec.k } else { rng.random_range(1..=spec.k) };
            let mut labels = index::sample(&mut rng, spec.k, size).into_vec();
            labels.sort_unstable();
            let points = labels
                .iter()
                .map(|&l| centers[l].iter().map(|c| c + noise.sample(&mut rng)).collect())
                .collect();
            GroupRecord { id, points, labels: Some(labels) }
        })
        .collect();
    Ok(InstanceFile { format: INSTANCE_FORMAT.into(), d: spec.d, k: spec.k, groups })
}
