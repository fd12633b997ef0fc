use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scalevec::analogy::AnalogySolver;
use scalevec::neighbors::{detect_crossovers, top_n, SimilarityCurve};
use scalevec::{Embedding, Matrix, Vocabulary};

fn embedding(v: usize, dim: usize) -> Embedding {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let vocab = Vocabulary::from_sorted((0..v).map(|i| (format!("w{i}"), (v - i) as u64)).collect());
    let data = (0..v * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    Embedding::new(Arc::new(vocab), Matrix::from_vec(v, dim, data), None, None).unwrap()
}

fn bench_analogy(c: &mut Criterion) {
    let e = embedding(30_000, 200);
    let mut group = c.benchmark_group("analogy");
    group.sample_size(20);
    group.bench_function("solver_setup_30k", |b| {
        b.iter(|| AnalogySolver::new(black_box(&e), 30_000))
    });
    let solver = AnalogySolver::new(&e, 30_000);
    group.bench_function("answer_30k", |b| b.iter(|| solver.answer_ids(black_box(10), 20, 30)));
    group.finish();
}

fn bench_neighbors(c: &mut Criterion) {
    let e = embedding(30_000, 200);
    let mut group = c.benchmark_group("top_n");
    group.sample_size(20);
    for n in [5, 100] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| top_n("w42", &e, n).unwrap())
        });
    }
    group.finish();

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let betas: Vec<u32> = (1..=100).collect();
    let curves: Vec<SimilarityCurve> = (0..100)
        .map(|i| {
            let values = betas.iter().map(|_| rng.random_range(0.0..1.0)).collect();
            SimilarityCurve::from_values("c", &format!("n{i}"), betas.clone(), values)
        })
        .collect();
    c.bench_function("crossovers_100x100", |b| {
        b.iter(|| detect_crossovers(black_box(&curves)).unwrap().len())
    });
}

criterion_group!(benches, bench_analogy, bench_neighbors);
criterion_main!(benches);
