use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use leakynorm::data::six_point_dataset;
use leakynorm::{build_program, enumerate_patterns, solve, EnumerationConfig, FormulationKind, LeakyRelu, SolverConfig};
use leakynorm_bench::alternating;

fn bench_formulations(c: &mut Criterion) {
    let data = six_point_dataset();
    let pats = enumerate_patterns(&data, &EnumerationConfig::default()).unwrap();
    let mut group = c.benchmark_group("solve/six-point");
    for kind in [FormulationKind::WeightsInterp, FormulationKind::JointInterp] {
        let program = build_program(kind, &data, &pats, LeakyRelu::RELU).unwrap();
        group.bench_function(kind.as_str(), |b| b.iter(|| solve(black_box(&program), &SolverConfig::default())));
    }
    group.finish();
}

fn bench_scaling(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve/joint-interp");
    group.sample_size(10);
    for n in [6, 10, 16] {
        let data = alternating(n);
        let pats = enumerate_patterns(&data, &EnumerationConfig::default()).unwrap();
        let program = build_program(FormulationKind::JointInterp, &data, &pats, LeakyRelu::RELU).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &program, |b, p| {
            b.iter(|| solve(black_box(p), &SolverConfig::default()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_formulations, bench_scaling);
criterion_main!(benches);
