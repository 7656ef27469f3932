use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use broadkin::collision::{build_quadrature, CollisionOperator};
use broadkin::exec::Execution;
use broadkin::mc::{McConfig, McOracle, Quantity};
use broadkin::params::{derive_dispersion, PhysicalParams};
use broadkin::spectrum::{RadialGrid, RadialSpectrum};

fn setup(n: usize) -> (CollisionOperator, RadialSpectrum) {
    let params = PhysicalParams::default();
    let grid = Arc::new(RadialGrid::uniform(n, 0.0, 4.0).unwrap());
    let quad = Arc::new(build_quadrature(grid.clone(), 3).unwrap());
    let op = CollisionOperator::new(quad, Default::default(), derive_dispersion(&params), params);
    let f = RadialSpectrum::from_fn(grid, |k| (-(k - 1.5) * (k - 1.5) / 0.2).exp()).unwrap();
    (op, f)
}

fn collision(c: &mut Criterion) {
    let mut group = c.benchmark_group("collision");
    for n in [64, 128] {
        let (op, f) = setup(n);
        for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            let op = op.clone().with_execution(exec);
            group.bench_with_input(BenchmarkId::new(name, n), &f, |b, f| b.iter(|| op.collision(f).unwrap()));
        }
    }
    group.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let mut group = c.benchmark_group("mc_oracle");
    group.sample_size(10);
    let (op, f) = setup(64);
    let cfg = McConfig { samples: 1 << 16, ..McConfig::default() };
    for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        let oracle = McOracle::new(&f, cfg, *op.model(), *op.dispersion(), *op.params()).unwrap().with_execution(exec);
        group.bench_function(name, |b| b.iter(|| oracle.estimate(1.5, Quantity::Collision).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, collision, monte_carlo);
criterion_main!(benches);
