use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use chromaclust::assignment::{assign_all, Hungarian, MatchingWeightKind};
use chromaclust::harness::{run_solver, Algorithm};
use chromaclust::peeling::PeelingConfig;
use chromaclust::simplex_grid::{simplex_grid, SimplexGridParams};
use chromaclust::{geometric_median, CenterTuple, Point};
use chromaclust_bench::planted;

fn hungarian(c: &mut Criterion) {
    let mut group = c.benchmark_group("hungarian");
    for k in [3usize, 6, 10] {
        let cost: Vec<f64> = (0..k * k).map(|i| ((i * 7919) % 101) as f64).collect();
        let mut h = Hungarian::new();
        group.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, &k| {
            b.iter(|| h.min_cost(black_box(&cost), k, k))
        });
    }
    group.finish();
}

fn assignment(c: &mut Criterion) {
    let inst = planted(4, 200, true, 1);
    let centers = CenterTuple::new(inst.groups()[0].points.clone()).unwrap();
    c.bench_function("assign_all k=4 n=200", |b| {
        b.iter(|| assign_all(black_box(&inst), &centers, MatchingWeightKind::SquaredDistance).unwrap())
    });
}

fn median(c: &mut Criterion) {
    let inst = planted(3, 300, false, 2);
    let points = inst.all_points();
    c.bench_function("weiszfeld 1e-9", |b| b.iter(|| geometric_median(black_box(&points), 1e-9).unwrap()));
}

fn grid(c: &mut Criterion) {
    let vertices: Vec<Point> = vec![[0.0, 0.0, 0.0].into(), [4.0, 0.0, 1.0].into(), [0.0, 5.0, 2.0].into()];
    let mut group = c.benchmark_group("simplex_grid");
    for eps in [1.0, 0.5, 0.25] {
        let params = SimplexGridParams::new(eps).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(eps), &params, |b, p| {
            b.iter(|| simplex_grid(black_box(&vertices), p).unwrap())
        });
    }
    group.finish();
}

fn solvers(c: &mut Criterion) {
    let mut group = c.benchmark_group("solvers");
    group.sample_size(10);
    let inst = planted(2, 5, true, 3);
    let cfg = PeelingConfig::default();
    for algo in Algorithm::ALL {
        group.bench_with_input(BenchmarkId::from_parameter(algo), &algo, |b, &a| {
            b.iter(|| run_solver(black_box(&inst), a, &cfg).unwrap())
        });
    }
    let big = planted(3, 5, true, 4);
    let beam = PeelingConfig { beam_width: Some(8), ..Default::default() };
    group.bench_function("peel-means k=3 beam=8", |b| b.iter(|| run_solver(&big, Algorithm::PeelMeans, &beam).unwrap()));
    group.finish();
}

criterion_group!(benches, hungarian, assignment, median, grid, solvers);
criterion_main!(benches);
