use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use csbm_gcn::experiments::selfloop_scan;
use csbm_gcn::theory::replica::theory_risks;
use csbm_gcn::theory::selfloop_theory;
use csbm_gcn::{build_design, fit_ridge, CsbmConfig, Dataset, Ensemble, GraphFilter, RidgeConvention, TheoryParams};

fn config(n: usize) -> CsbmConfig {
    let mut cfg = CsbmConfig::new(n, 5.0);
    cfg.seed = 1;
    cfg
}

fn generation(c: &mut Criterion) {
    let mut group = c.benchmark_group("generate");
    group.sample_size(10);
    for n in [500usize, 2000] {
        for ensemble in [Ensemble::BinarySymmetric, Ensemble::GaussianSymmetric] {
            let mut cfg = config(n);
            cfg.ensemble = ensemble;
            group.bench_with_input(BenchmarkId::new(ensemble.code(), n), &cfg, |b, cfg| {
                b.iter(|| Dataset::generate(black_box(cfg), 0).unwrap())
            });
        }
    }
    group.finish();
}

fn design_and_fit(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    for n in [500usize, 2000] {
        let cfg = config(n);
        let data = Dataset::generate(&cfg, 0).unwrap();
        for (name, filter) in [("one-hop", GraphFilter::one_hop()), ("two-hop", GraphFilter::two_hop())] {
            group.bench_with_input(BenchmarkId::new(format!("design/{name}"), n), &data, |b, data| {
                b.iter(|| build_design(&data.adjacency, &data.features.x, &filter).unwrap())
            });
        }
        let phi = build_design(&data.adjacency, &data.features.x, &GraphFilter::one_hop()).unwrap();
        group.bench_with_input(BenchmarkId::new("ridge", n), &phi, |b, phi| {
            b.iter(|| fit_ridge(phi, &data.labels, &data.split, cfg.r).unwrap())
        });
    }
    group.finish();
}

fn scan(c: &mut Criterion) {
    let mut group = c.benchmark_group("selfloop_scan");
    group.sample_size(10);
    let mut cfg = CsbmConfig::new(1000, 0.8);
    cfg.mu = 0.0;
    cfg.ensemble = Ensemble::BinaryNonsymmetric;
    let grid: Vec<f64> = (0..17).map(|k| -2.0 + 0.25 * k as f64).collect();
    group.bench_function("n1000_17c", |b| {
        b.iter(|| selfloop_scan(&cfg, &grid, 1, RidgeConvention::Objective, false).unwrap())
    });
    group.finish();
}

fn theory(c: &mut Criterion) {
    let mut group = c.benchmark_group("theory");
    for (name, p) in [
        ("ridgeless_region", TheoryParams::new(1.0, 1.0, 5.0, 0.8, 1e-5)),
        ("interpolating", TheoryParams::new(2.0, 1.0, 5.0, 0.1, 0.1)),
    ] {
        group.bench_function(name, |b| b.iter(|| theory_risks(black_box(&p)).unwrap()));
    }
    group.sample_size(10);
    group.bench_function("selfloop_pencil", |b| {
        b.iter(|| selfloop_theory(black_box(1.0), 5.0, 0.8, 0.5).unwrap())
    });
    group.finish();
}

criterion_group!(benches, generation, design_and_fit, scan, theory);
criterion_main!(benches);
