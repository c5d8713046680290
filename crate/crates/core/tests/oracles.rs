//! Reference values checked against independent oracles: brute-force
//! counting, direct Monte Carlo and hand-written linear algebra.

use csbm_gcn::experiments::{run_trial, ExperimentConfig};
use csbm_gcn::theory::replica::{mp_resolvent_t, ridgeless_risks};
use csbm_gcn::theory::rmt_full_observation;
use csbm_gcn::{
    build_design, fit_ridge, CsbmConfig, Dataset, Ensemble, GraphFilter, Labels, RidgeConvention,
    TheoryParams, TrainTestSplit,
};
use faer::Mat;

/// Gaussian elimination with partial pivoting.
fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

#[test]
fn ridge_weights_match_normal_equations() {
    // N = 8, F = 4, r = 0.5, every node labelled.
    let phi = Mat::from_fn(8, 4, |i, k| ((i * 7 + k * 3) % 5) as f64 - 1.7 + 0.1 * (i * k) as f64);
    let y = Labels::from_values(vec![1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -1.0]).unwrap();
    let split = TrainTestSplit::from_mask(vec![true; 8]);
    let r = 0.5;
    let w = fit_ridge(&phi, &y, &split, r).unwrap();
    let a: Vec<Vec<f64>> = (0..4)
        .map(|j| {
            (0..4)
                .map(|k| (0..8).map(|i| phi[(i, j)] * phi[(i, k)]).sum::<f64>() + if j == k { r } else { 0.0 })
                .collect()
        })
        .collect();
    let b: Vec<f64> = (0..4).map(|j| (0..8).map(|i| phi[(i, j)] * y.get(i)).sum()).collect();
    let expected = dense_solve(a, b);
    for k in 0..4 {
        assert!((w.w[k] - expected[k]).abs() < 1e-10, "w[{k}] = {} vs {}", w.w[k], expected[k]);
    }
}

#[test]
fn within_class_edge_rate_matches_c_in() {
    let mut cfg = CsbmConfig::new(5000, 5.0);
    cfg.seed = 21;
    let data = Dataset::generate(&cfg, 0).unwrap();
    let a = data.adjacency.entries();
    let half = cfg.n / 2;
    let mut edges = 0usize;
    for i in 0..half {
        for j in 0..half {
            if i != j && a[(i, j)] != 0.0 {
                edges += 1;
            }
        }
    }
    let pairs = (half * (half - 1)) as f64;
    let rate = edges as f64 / pairs;
    let expected = (30.0 + 30f64.sqrt()) / 5000.0;
    // Binomial standard error over the independent (upper-triangle) pairs.
    let se = (expected * (1.0 - expected) / (pairs / 2.0)).sqrt();
    assert!((rate - expected).abs() < 5.0 * se, "rate {rate} vs {expected}");
}

#[test]
fn binary_entry_variance_approaches_one_over_n() {
    for n in [500usize, 2000, 5000] {
        let mut cfg = CsbmConfig::new(n, 1.0);
        cfg.lambda = 0.0;
        let data = Dataset::generate(&cfg, 0).unwrap();
        let a = data.adjacency.entries();
        let count = (n * n) as f64;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for j in 0..n {
            for i in 0..n {
                sum += a[(i, j)];
                sq += a[(i, j)] * a[(i, j)];
            }
        }
        let var = sq / count - (sum / count).powi(2);
        assert!((var * n as f64 - 1.0).abs() < 0.1, "n = {n}: N var = {}", var * n as f64);
    }
}

#[test]
fn feature_spike_correlation() {
    // Mean of y_i <x_i, u> equals sqrt(mu / N) |u|^2, with E|u|^2 = 1.
    let mut cfg = CsbmConfig::new(5000, 5.0);
    cfg.seed = 8;
    let mut total = 0.0;
    let reps = 8;
    for trial in 0..reps {
        let data = Dataset::generate(&cfg, trial).unwrap();
        let (x, u) = (&data.features.x, &data.features.u);
        let proj: f64 = (0..cfg.n)
            .map(|i| data.labels.get(i) * (0..cfg.f).map(|k| x[(i, k)] * u[k]).sum::<f64>())
            .sum();
        total += proj / cfg.n as f64;
    }
    let mean = total / reps as f64;
    let expected = (1.0f64 / 5000.0).sqrt();
    assert!((mean - expected).abs() < 0.05 * expected, "{mean} vs {expected}");
}

#[test]
fn resolvent_trace_matches_sampled_features() {
    // T(r_hat = 1, gamma = 2) against (1/F) Tr[(X^T X + I)^{-1}] for mu = 0.
    let mut cfg = CsbmConfig::new(4000, 2.0);
    cfg.mu = 0.0;
    cfg.seed = 2;
    let data = Dataset::generate(&cfg, 0).unwrap();
    let x = &data.features.x;
    let f = cfg.f;
    let mut g = x.transpose() * x;
    for k in 0..f {
        g[(k, k)] += 1.0;
    }
    let eig = g.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
    let trace: f64 = eig.iter().map(|l| 1.0 / l).sum::<f64>() / f as f64;
    let t = mp_resolvent_t(1.0, 2.0);
    assert!((trace - t).abs() < 0.01 * t, "empirical {trace} vs {t}");
}

#[test]
fn reference_ridgeless_risks() {
    let (train, test) = ridgeless_risks(&TheoryParams::new(1.0, 1.0, 5.0, 0.8, 0.0)).unwrap();
    assert!((train - 0.5625).abs() < 1e-12);
    assert!((test - 1.0).abs() < 1e-12);
}

#[test]
fn full_observation_loss_without_features_matches_simulation() {
    // mu = 0: L = (1 - alpha) / (1 + alpha lambda^2).
    let (alpha, lambda) = (0.5, 1.0);
    let loss = rmt_full_observation(alpha, lambda, 0.0, 0.0).unwrap();
    assert!((loss - (1.0 - alpha) / (1.0 + alpha * lambda * lambda)).abs() < 1e-15);
    let mut cfg = CsbmConfig::new(4000, 1.0 / alpha);
    cfg.mu = 0.0;
    cfg.lambda = lambda;
    cfg.tau = 1.0;
    cfg.r = 1e-6;
    cfg.ensemble = Ensemble::GaussianSymmetric;
    let exp = ExperimentConfig::new(cfg);
    let mut total = 0.0;
    for t in 0..3 {
        total += run_trial(&cfg, &exp.filter, RidgeConvention::Objective, t).unwrap().r_train;
    }
    let sim = total / 3.0;
    assert!((sim - loss).abs() < 0.02 * loss, "simulation {sim} vs {loss}");
}

#[test]
fn one_hop_design_is_adjacency_times_features() {
    let mut cfg = CsbmConfig::new(40, 2.0);
    cfg.d = 6.0;
    let data = Dataset::generate(&cfg, 0).unwrap();
    let phi = build_design(&data.adjacency, &data.features.x, &GraphFilter::one_hop()).unwrap();
    let (a, x) = (data.adjacency.entries(), &data.features.x);
    for i in 0..cfg.n {
        for k in 0..cfg.f {
            let direct: f64 = (0..cfg.n).map(|j| a[(i, j)] * x[(j, k)]).sum();
            assert!((phi[(i, k)] - direct).abs() < 1e-12);
        }
    }
}
