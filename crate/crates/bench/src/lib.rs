//! Fixtures shared by the criterion benchmarks.

use chromaclust::harness::generate::{generate, GenerateSpec};
use chromaclust::Instance;

/// Planted instance in the plane with unit noise and separation 8.
pub fn planted(k: usize, n: usize, full: bool, seed: u64) -> Instance {
    let spec = GenerateSpec { k, n, d: 2, sigma: 1.0, separation: 8.0, full, seed };
    generate(&spec).and_then(|f| f.to_instance()).expect("valid fixture spec")
}
