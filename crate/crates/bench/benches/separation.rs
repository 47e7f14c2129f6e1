use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion, Throughput};
use hypersep_bench::integer_points;
use hypersep_core::{EngineConfig, SeparationState};

fn run(c: &mut Criterion) {
    let mut g = c.benchmark_group("separate");
    g.sample_size(10);
    for (n, count) in [(2, 1_000), (10, 10_000), (50, 10_000)] {
        let pts = integer_points(n, count, 7);
        g.throughput(Throughput::Elements(count as u64));
        g.bench_with_input(BenchmarkId::new(format!("n{n}"), count), &pts, |b, pts| {
            b.iter_batched(
                || pts.clone(),
                |pts| {
                    let mut s = SeparationState::new(n, EngineConfig::default(), 7).unwrap();
                    let mut rng = s.next_rng();
                    s.run(pts, &mut rng).unwrap();
                    s.q()
                },
                BatchSize::LargeInput,
            )
        });
    }
    g.finish();
}

fn append(c: &mut Criterion) {
    let base = hypersep_bench::solved(10, 5_000, 3);
    let extra = integer_points(10, 5_000, 4).into_iter().map(|mut p| {
        p.id += 1_000_000;
        p
    });
    let extra: Vec<_> = extra.collect();
    c.bench_function("append 5000 to 5000, n10", |b| {
        b.iter_batched(
            || (base.clone(), extra.clone()),
            |(mut s, pts)| {
                let mut rng = s.next_rng();
                s.append_points(pts, &mut rng).unwrap();
                s.q()
            },
            BatchSize::LargeInput,
        )
    });
}

criterion_group!(benches, run, append);
criterion_main!(benches);
