use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use oneshot_qcap::facts::{verify_fact, Fact};
use oneshot_qcap::Exec;

fn facts(c: &mut Criterion) {
    let mut g = c.benchmark_group("fact_trials");
    g.sample_size(10);
    for fact in [Fact::HayashiNagaoka, Fact::Monotonicity] {
        for (name, exec) in [("parallel", Exec::Parallel), ("sequential", Exec::Sequential)] {
            g.bench_with_input(BenchmarkId::new(fact.name(), name), &exec, |b, &exec| {
                b.iter(|| verify_fact(fact, &[4, 8], 32, 0, exec).unwrap())
            });
        }
    }
    g.finish();
}

fn identical_results(c: &mut Criterion) {
    // not timed for speed: guards the index-order contract while benching
    let p = verify_fact(Fact::Triangle, &[4], 16, 1, Exec::Parallel).unwrap();
    let s = verify_fact(Fact::Triangle, &[4], 16, 1, Exec::Sequential).unwrap();
    assert_eq!(p.dims[0].worst_margin.to_bits(), s.dims[0].worst_margin.to_bits());
    c.bench_function("triangle_16_trials_sequential", |b| {
        b.iter(|| verify_fact(Fact::Triangle, &[4], 16, 1, Exec::Sequential).unwrap())
    });
}

criterion_group!(benches, facts, identical_results);
criterion_main!(benches);
