use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use shareprefill::bench::{bench_head, BenchConfig};
use shareprefill::pattern::{js_distance, search_vertical_slash, select_cumulative};
use shareprefill::ProbVector;

fn skewed(n: usize, phase: f64) -> Vec<f64> {
    (0..n).map(|i| ((i as f64 * 0.37 + phase).sin() + 1.1) / (1.0 + i as f64)).collect()
}

fn normalized(v: Vec<f64>) -> ProbVector {
    let total: f64 = v.iter().sum();
    ProbVector::new(v.into_iter().map(|x| x / total).collect()).unwrap()
}

fn patterns(c: &mut Criterion) {
    let p = normalized(skewed(128, 0.0));
    let q = normalized(skewed(128, 1.3));
    c.bench_function("js_distance/128", |b| b.iter(|| js_distance(black_box(&p), black_box(&q)).unwrap()));

    let scores = skewed(4096, 0.5);
    c.bench_function("select_cumulative/4096", |b| {
        b.iter(|| select_cumulative(black_box(&scores), 0.9).unwrap())
    });

    let config = BenchConfig::default();
    let input = bench_head(&config, 2048).unwrap();
    c.bench_function("vertical_slash/2048", |b| {
        b.iter(|| search_vertical_slash(black_box(&input), 0.9, config.block_size).unwrap())
    });
}

criterion_group!(benches, patterns);
criterion_main!(benches);
