//! Sequential vs data-parallel execution of the heavy per-item stages.
//! Build with `--no-default-features` to measure the fallback alone (both
//! variants then run sequentially).

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::Array2;
use rand::Rng;

use terrasonic::audio::{spectrogram_batch, AudioClip, StftParams};
use terrasonic::cluster::{kmeans, KMeansParams};
use terrasonic::imagery::RgbImage;
use terrasonic::metric::Mlp;
use terrasonic::seed;
use terrasonic::seg::{predict_mask, SegModel};
use terrasonic::Exec;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn clips(n: usize) -> Vec<AudioClip> {
    let mut rng = seed::rng(1, 0);
    (0..n)
        .map(|_| AudioClip::new((0..22_050).map(|_| rng.random_range(-0.5..0.5)).collect(), 44_100).unwrap())
        .collect()
}

fn bench_spectrograms(c: &mut Criterion) {
    let clips = clips(64);
    let params = StftParams::default();
    let mut g = c.benchmark_group("spectrogram_batch");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| spectrogram_batch(&clips, &params, exec).unwrap()));
    }
    g.finish();
}

fn bench_kmeans(c: &mut Criterion) {
    let mut rng = seed::rng(2, 0);
    let points = Array2::from_shape_fn((2000, 16), |_| rng.random_range(-1.0..1.0));
    let params = KMeansParams::new(5, 3);
    let mut g = c.benchmark_group("kmeans");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| kmeans(&points, &params, exec).unwrap()));
    }
    g.finish();
}

fn bench_predict(c: &mut Criterion) {
    let mut rng = seed::rng(3, 0);
    let mut img = RgbImage::new(96, 96);
    for y in 0..96 {
        for x in 0..96 {
            img.set_pixel(x, y, [rng.random_range(1..=255), rng.random(), rng.random()]);
        }
    }
    let d = terrasonic::triplets::FEATURE_DIM;
    let mlp = Mlp::new(&[d, 32, 5], &[terrasonic::metric::Activation::Tanh, terrasonic::metric::Activation::Linear], &mut rng).unwrap();
    let model = SegModel {
        mean: vec![0.0; d],
        scale: vec![1.0; d],
        mlp,
    };
    let mut g = c.benchmark_group("predict_mask");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| predict_mask(&img, &model, exec).unwrap()));
    }
    g.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_spectrograms, bench_kmeans, bench_predict
}
criterion_main!(benches);
