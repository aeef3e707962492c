use criterion::{black_box, criterion_group, criterion_main, Criterion};

use selfbh_bench::{cell, interior};
use selfbh_core::constraints::constraints_unchecked;
use selfbh_core::rates::rates_unchecked;
use selfbh_core::Scheme;

fn rate_engine(c: &mut Criterion) {
    let p = cell();
    let a = interior(&p);
    for s in Scheme::ALL {
        c.bench_function(&format!("rates/{}", s.short_name()), |b| {
            b.iter(|| rates_unchecked(black_box(s), black_box(&p), black_box(&a)))
        });
    }
    c.bench_function("constraints/rl", |b| {
        b.iter(|| constraints_unchecked(Scheme::HybridRelay, black_box(&p), black_box(&a), 1e-6))
    });
}

criterion_group!(benches, rate_engine);
criterion_main!(benches);
