//! Sequential against parallel execution of the data-parallel kernels.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use smala::anchoring::{cosine_similarity_matrix, mutual_argmax};
use smala::bitext_align::{train_ibm2_fast_ids, AlignConfig, Direction};
use smala::csls::csls_matrix;
use smala::embeddings::EmbeddingMatrix;
use smala::Exec;

fn strategies() -> Vec<(&'static str, Exec)> {
    vec![
        ("sequential", Exec::Sequential),
        #[cfg(feature = "parallel")]
        ("parallel", Exec::Parallel),
    ]
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, dim: usize) -> EmbeddingMatrix {
    EmbeddingMatrix::from_vec(rows, dim, (0..rows * dim).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn similarity(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random_matrix(&mut rng, 2000, 64);
    let z = random_matrix(&mut rng, 2000, 64);
    let sim = cosine_similarity_matrix(&x, &z, Exec::default()).unwrap();
    let mut group = c.benchmark_group("kernels");
    group.sample_size(10);
    for (name, exec) in strategies() {
        group.bench_with_input(BenchmarkId::new("cosine_2000x2000", name), &exec, |b, &e| {
            b.iter(|| cosine_similarity_matrix(&x, &z, e).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("mutual_argmax_2000x2000", name), &exec, |b, &e| {
            b.iter(|| mutual_argmax(&sim, e))
        });
        group.bench_with_input(BenchmarkId::new("csls_2000x2000", name), &exec, |b, &e| {
            b.iter(|| csls_matrix(sim.scores(), 10, e).unwrap())
        });
    }
    group.finish();
}

fn alignment(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pairs: Vec<(Vec<u32>, Vec<u32>)> = (0..4000)
        .map(|_| {
            let n = rng.random_range(5..20);
            let s: Vec<u32> = (0..n).map(|_| rng.random_range(0..500)).collect();
            let t: Vec<u32> = s.iter().map(|&w| (w * 7 + 3) % 500).collect();
            (s, t)
        })
        .collect();
    let cfg = AlignConfig { iters: 1, ..Default::default() };
    let mut group = c.benchmark_group("kernels");
    group.sample_size(10);
    for (name, exec) in strategies() {
        group.bench_with_input(BenchmarkId::new("ibm2_one_iteration_4000_pairs", name), &exec, |b, &e| {
            b.iter(|| train_ibm2_fast_ids(&pairs, 500, 500, Direction::Fwd, &cfg, e).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, similarity, alignment);
criterion_main!(benches);
