use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use nullctl::hum::{penalty_sweep, HumConfig, HumMode, HumSolver};
use nullctl::par;
use nullctl::pipeline::{standard_weights, PipelineMode};
use nullctl::weights::{gaussian_samples, observability_ratio, Observation};
use nullctl::{CoefficientField, CoefficientSet, Grid, GridFunction, Interval, ProblemSpec, Propagator};

fn spec() -> ProblemSpec {
    let c = CoefficientSet::identity_diffusion(2).with_a(1, 0, CoefficientField::constant(1.0));
    ProblemSpec::new(Interval::new(0.0, 1.0), 0.25, Interval::new(0.3, 0.7), c)
}

fn threads() -> Vec<(&'static str, usize)> {
    let n = std::thread::available_parallelism().map_or(4, |n| n.get()).max(2);
    vec![("sequential", 1), ("parallel", n)]
}

fn observability(c: &mut Criterion) {
    let s = spec();
    let grid = Grid::new(s.domain, s.horizon, 99, 100).unwrap();
    let profile = standard_weights(&s, &grid, 1.0, 7).unwrap();
    let prop = Propagator::new(&s, &grid).unwrap();
    let samples = gaussian_samples(2, grid.nx, 32, 0);
    let obs = Observation::Adjoint { g: 0.0, a: 1.0, window: s.omega0 };
    let mut group = c.benchmark_group("observability_ratio");
    for (name, n) in threads() {
        group.bench_function(BenchmarkId::new(name, n), |b| {
            b.iter(|| par::with_threads(n, || black_box(observability_ratio(&prop, &profile, obs, &samples).unwrap())))
        });
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let s = spec();
    let grid = Grid::new(s.domain, s.horizon, 79, 80).unwrap();
    let profile = standard_weights(&s, &grid, 1.0, 7).unwrap();
    let theta = PipelineMode::Theorem1.default_cutoff(&s, &grid).unwrap();
    let solver = HumSolver::new(&s, &grid, HumConfig::new(1.0, HumMode::Theorem1 { i0: 0 }), &profile, &theta).unwrap();
    let y0 = GridFunction::from_fn(2, &grid, |_, x| (std::f64::consts::PI * x).sin());
    let ks = [1e1, 1e2, 1e3, 1e4, 1e5, 1e6];
    let mut group = c.benchmark_group("penalty_sweep_cold");
    group.sample_size(10);
    for (name, n) in threads() {
        group.bench_function(BenchmarkId::new(name, n), |b| {
            b.iter(|| par::with_threads(n, || black_box(penalty_sweep(&solver, &y0, &ks, false).unwrap())))
        });
    }
    group.finish();
}

criterion_group!(benches, observability, sweep);
criterion_main!(benches);
