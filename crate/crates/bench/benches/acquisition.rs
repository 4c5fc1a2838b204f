use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fact_bench::{partial_session, reference_bundle};
use fact_core::acquire::score_features;
use fact_core::baselines::{ExhaustivePolicy, HistogramModel};
use fact_core::codec::quantize;
use fact_core::MaskVector;
use std::hint::black_box;

fn scoring(c: &mut Criterion) {
    let mut group = c.benchmark_group("select_next");
    for d in [36, 64] {
        let bundle = reference_bundle(d);
        let session = partial_session(&bundle, 3);
        let oracle = ExhaustivePolicy::new(HistogramModel::uniform(d));
        group.bench_with_input(BenchmarkId::new("fact", d), &d, |b, _| {
            b.iter(|| score_features(black_box(&bundle), black_box(&session)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("exhaustive", d), &d, |b, _| {
            b.iter(|| oracle.utilities(black_box(&bundle), black_box(&session)).unwrap())
        });
    }
    group.finish();
}

fn passes(c: &mut Criterion) {
    let bundle = reference_bundle(64);
    let x: Vec<f64> = (0..64).map(|j| (j % 9) as f64 / 10.0).collect();
    let mask = MaskVector::from_flags((0..64).map(|j| j % 2 == 0).collect());
    let input = quantize(&x, &mask, 8).unwrap();
    c.bench_function("quantize/64", |b| b.iter(|| quantize(black_box(&x), black_box(&mask), 8).unwrap()));
    c.bench_function("predictor_forward/64", |b| {
        b.iter(|| bundle.predictor.predict(black_box(input.as_slice())).unwrap())
    });
    c.bench_function("autoencoder_forward/64", |b| {
        b.iter(|| bundle.autoencoder.predict(black_box(input.as_slice())).unwrap())
    });
    let (_, cache) = bundle.predictor.forward(input.as_slice()).unwrap();
    c.bench_function("input_jacobian/64", |b| {
        b.iter(|| bundle.predictor.input_jacobian(black_box(&cache), None))
    });
}

criterion_group!(benches, scoring, passes);
criterion_main!(benches);
