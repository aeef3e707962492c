use criterion::{criterion_group, criterion_main, Criterion};

use selfbh_bench::cell;
use selfbh_core::zf::wishart_trace_check;
use selfbh_core::{baseline, optimize, OptimizerOptions, Scheme};

fn solves(c: &mut Criterion) {
    let p = cell();
    let mut g = c.benchmark_group("optimize");
    g.sample_size(10);
    for s in Scheme::ALL {
        let opts = OptimizerOptions { n_starts: 8, ..OptimizerOptions::default() };
        g.bench_function(s.short_name(), |b| b.iter(|| optimize(s, &p, &opts).unwrap()));
    }
    g.finish();
    c.bench_function("baseline/fd", |b| b.iter(|| baseline(Scheme::FullDuplex, &p).unwrap()));
}

fn zf(c: &mut Criterion) {
    let mut g = c.benchmark_group("zf");
    g.sample_size(10);
    g.bench_function("wishart_40_20_x100", |b| b.iter(|| wishart_trace_check(40, 20, 100, 1).unwrap()));
    g.finish();
}

criterion_group!(benches, solves, zf);
criterion_main!(benches);
