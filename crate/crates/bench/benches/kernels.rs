use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use riskforge::eval::{auc, fit_cox, SurvivalData};
use riskforge::features::chi2_select;
use riskforge::model::{train_mlp, MlpConfig};
use riskforge::{FeatureMatrix, ModelKind};

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("i{i}")).collect()
}

fn bench_auc(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let scores: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
    let labels: Vec<u8> = (0..10_000).map(|_| u8::from(rng.random_bool(0.3))).collect();
    c.bench_function("auc 10k", |b| b.iter(|| auc(black_box(&scores), black_box(&labels))));
}

fn bench_cox(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (n, p) = (2000, 6);
    let x: Vec<f64> = (0..n * p).map(|_| rng.random_range(-1.0..1.0)).collect();
    let times: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..3650.0_f64).round()).collect();
    let events: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
    let m = FeatureMatrix::new(ids(n), (0..p).map(|j| format!("x{j}")).collect(), x).unwrap();
    let data = SurvivalData::new(times, events, Some(m)).unwrap();
    c.bench_function("cox 2000x6", |b| b.iter(|| fit_cox(black_box(&data)).unwrap()));
}

fn bench_mlp(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (n, p) = (800, 27);
    let x: Vec<f64> = (0..n * p).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.2))).collect();
    let m = FeatureMatrix::new(ids(n), (0..p).map(|j| format!("x{j}")).collect(), x).unwrap();
    let cfg = MlpConfig {
        epochs: 1,
        ..MlpConfig::default()
    };
    c.bench_function("mlp epoch 800x27", |b| {
        b.iter_batched(|| cfg.clone(), |cfg| train_mlp(&m, &y, &cfg, None, None, ModelKind::Nn).unwrap(), BatchSize::SmallInput)
    });
}

fn bench_chi2(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (n, p) = (3000, 400);
    let x: Vec<f64> = (0..n * p).map(|_| f64::from(u8::from(rng.random_bool(0.05)))).collect();
    let y: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.2))).collect();
    let m = FeatureMatrix::new(ids(n), (0..p).map(|j| format!("c{j}")).collect(), x).unwrap();
    c.bench_function("chi2 3000x400 top20", |b| b.iter(|| chi2_select(black_box(&m), &y, 20).unwrap()));
}

criterion_group!(kernels, bench_auc, bench_cox, bench_mlp, bench_chi2);
criterion_main!(kernels);
