//! Benchmarks comparing the rayon data-parallel paths against the
//! sequential fallbacks, plus the end-to-end residual evaluation they
//! feed.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use toda_lab::grid::{Divisor, TorusGrid};
use toda_lab::par;
use toda_lab::rootsys::{build_root_system, LieType};
use toda_lab::toda::{assemble, newton_solve, CouplingSpec, Mode, ProblemSpec};

fn bench_field_ops(c: &mut Criterion) {
    let mut group = c.benchmark_group("field_ops");
    for &len in &[64usize * 64, 256 * 256] {
        let a: Vec<f64> = (0..len).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..len).map(|i| (i as f64 * 0.11).cos() + 1.5).collect();
        group.bench_with_input(BenchmarkId::new("map2_parallel", len), &len, |bench, _| {
            bench.iter(|| par::map2(&a, &b, |x, y| x * y.exp()));
        });
        group.bench_with_input(BenchmarkId::new("map2_sequential", len), &len, |bench, _| {
            bench.iter(|| par::map2_seq(&a, &b, |x, y| x * y.exp()));
        });
        group.bench_with_input(BenchmarkId::new("min_by_parallel", len), &len, |bench, _| {
            bench.iter(|| par::min_by(len, |i| b[i] - a[i]));
        });
        group.bench_with_input(BenchmarkId::new("min_by_sequential", len), &len, |bench, _| {
            bench.iter(|| par::min_by_seq(len, |i| b[i] - a[i]));
        });
    }
    group.finish();
}

fn bench_residual(c: &mut Criterion) {
    let rs = build_root_system(LieType::G, 2).unwrap();
    let grid = TorusGrid::new(64, 2.0 * std::f64::consts::PI).unwrap();
    let mut divisors = vec![Divisor::empty(); 3];
    divisors[0] = Divisor::single(32, 32, 1);
    let spec = ProblemSpec::new(Mode::Raw, 1.0, divisors);
    let problem = assemble(&CouplingSpec::raw(rs), &grid, &spec).unwrap();
    let sol = newton_solve(&problem, None, 1e-10, 30).unwrap();
    c.bench_function("residual_sup_g2_n64", |bench| {
        bench.iter(|| problem.residual_sup(&sol.u));
    });
}

fn bench_solve(c: &mut Criterion) {
    let rs = build_root_system(LieType::C, 2).unwrap();
    let grid = TorusGrid::new(32, 2.0 * std::f64::consts::PI).unwrap();
    let mut divisors = vec![Divisor::empty(); 3];
    divisors[0] = Divisor::single(16, 16, 1);
    let spec = ProblemSpec::new(Mode::Raw, 1.0, divisors);
    let problem = assemble(&CouplingSpec::raw(rs), &grid, &spec).unwrap();
    let mut group = c.benchmark_group("newton");
    group.sample_size(10);
    group.bench_function("c2_raw_n32_cold", |bench| {
        bench.iter(|| newton_solve(&problem, None, 1e-10, 30).unwrap());
    });
    group.finish();
}

criterion_group!(benches, bench_field_ops, bench_residual, bench_solve);
criterion_main!(benches);
