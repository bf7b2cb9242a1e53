use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;
use streamlift::errsrc::analyze_all;
use streamlift::streamsets::{collect_constraints, solve};
use streamlift::{analyze, Options};
use streamlift_bench::sized_programs;

const SEED: u64 = 0x5eed;

fn bench_solve(c: &mut Criterion) {
    let mut g = c.benchmark_group("streamsets_solve");
    for (n, src) in sized_programs(SEED) {
        let a = analyze(&src, &Options::default()).unwrap();
        let cs = collect_constraints(&a.ir, &a.st);
        g.throughput(Throughput::Elements(cs.len() as u64));
        g.bench_with_input(BenchmarkId::from_parameter(n), &cs, |b, cs| b.iter(|| solve(black_box(cs))));
    }
    g.finish();
}

fn bench_sources(c: &mut Criterion) {
    let mut g = c.benchmark_group("error_sources");
    for (n, src) in sized_programs(SEED) {
        let a = analyze(&src, &Options::default()).unwrap();
        g.bench_function(BenchmarkId::from_parameter(n), |b| b.iter(|| analyze_all(black_box(&a.ir), &a.st)));
    }
    g.finish();
}

fn bench_pipeline(c: &mut Criterion) {
    let mut g = c.benchmark_group("analyze_and_transform");
    g.sample_size(20);
    for (n, src) in sized_programs(SEED) {
        g.throughput(Throughput::Elements(n as u64));
        g.bench_with_input(BenchmarkId::from_parameter(n), &src, |b, src| {
            b.iter(|| {
                let a = analyze(black_box(src), &Options::default()).unwrap();
                a.transform().unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, bench_solve, bench_sources, bench_pipeline);
criterion_main!(benches);
