//! Empirical risks of the self-loop filter `A + c I` over a grid of `c`.
//!
//! A scan refits the same datasets for every `c`. Since
//! `Phi(c) = A X + c X`, the Gram matrix of the training rows is a quadratic
//! polynomial in `c`,
//!
//! ```text
//! K(c) = K_AA + c (K_AX + K_XA) + c^2 K_XX,
//! ```
//!
//! so the three blocks are formed once per trial and each grid value only
//! costs one Cholesky factorisation of the smaller of the `M x M` and
//! `F x F` systems.

use faer::{Col, Mat};
use serde::{Deserialize, Serialize};

use super::map_trials;
use crate::csbm::{CsbmConfig, Dataset};
use crate::error::{Error, Result};
use crate::regression::{cholesky_solve, report_from_outputs, select_rows, solve_ridge, RiskReport};
use crate::stats::Stat;
use crate::theory::RidgeConvention;

/// Aggregated risks at one self-loop intensity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    /// Self-loop intensity.
    pub c: f64,
    /// Training risk over trials.
    pub r_train: Stat,
    /// Test risk over trials.
    pub r_test: Stat,
    /// Test accuracy over trials.
    pub acc: Stat,
}

/// Output of [`selfloop_scan`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfLoopScan {
    /// Configuration of the scan.
    pub config: CsbmConfig,
    /// One point per grid value, in grid order.
    pub curve: Vec<ScanPoint>,
    /// Grid value minimising the mean test risk (ties go to the smaller `|c|`).
    pub c_star: f64,
    /// Trials per point.
    pub n_trials: usize,
}

/// Risks of the filter `A + c I` on `cfg` for every `c` in `c_grid`.
pub fn selfloop_scan(
    cfg: &CsbmConfig,
    c_grid: &[f64],
    n_trials: usize,
    convention: RidgeConvention,
    parallel: bool,
) -> Result<SelfLoopScan> {
    cfg.validate()?;
    if n_trials == 0 {
        return Err(Error::invalid("trials must be positive"));
    }
    if c_grid.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("self-loop grid values must be finite"));
    }
    let (lo, hi) = c_grid
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &c| (a.min(c), b.max(c)));
    if !(lo < 0.0 && hi > 0.0) {
        return Err(Error::invalid("the self-loop grid must contain both negative and positive c"));
    }
    if cfg.tau >= 1.0 {
        return Err(Error::invalid("a self-loop scan needs test nodes: tau must be below 1"));
    }
    let r = convention.empirical_ridge(cfg.r, cfg.tau);
    let per_trial = map_trials(n_trials, parallel, |t| scan_trial(cfg, c_grid, r, t))?;
    let mut curve = Vec::with_capacity(c_grid.len());
    for (k, &c) in c_grid.iter().enumerate() {
        let reports: Vec<&RiskReport> = per_trial.iter().map(|v| &v[k]).collect();
        let collect = |f: &dyn Fn(&RiskReport) -> f64| {
            let values: Vec<f64> = reports.iter().map(|r| f(r)).collect();
            Stat::from_values(&values).expect("at least one trial")
        };
        curve.push(ScanPoint {
            c,
            r_train: collect(&|r| r.r_train),
            r_test: collect(&|r| r.test.expect("tau < 1").r_test),
            acc: collect(&|r| r.test.expect("tau < 1").acc),
        });
    }
    let mut best = curve[0];
    for p in &curve[1..] {
        let better = p.r_test.mean < best.r_test.mean
            || (p.r_test.mean == best.r_test.mean && p.c.abs() < best.c.abs());
        if better {
            best = *p;
        }
    }
    Ok(SelfLoopScan {
        config: *cfg,
        curve,
        c_star: best.c,
        n_trials,
    })
}

/// Risk reports of one trial for every grid value.
fn scan_trial(cfg: &CsbmConfig, c_grid: &[f64], r: f64, trial: u64) -> Result<Vec<RiskReport>> {
    let data = Dataset::generate(cfg, trial)?;
    let x = &data.features.x;
    let ax = data.adjacency.mul(x);
    let train = data.split.train();
    let (n, f, m) = (x.nrows(), x.ncols(), train.len());
    let y_tr = Col::from_fn(m, |i| data.labels.get(train[i]));
    let max_dim = n.max(f);

    // Blocks of the normal (M >= F) or Gram (M < F) matrix.
    let ax_tr = select_rows(&ax, train);
    let x_tr = select_rows(x, train);
    let dual = m < f;
    let (g_aa, g_sym, g_xx) = if dual {
        let cross = &ax_tr * x_tr.transpose();
        (&ax_tr * ax_tr.transpose(), &cross + cross.transpose(), &x_tr * x_tr.transpose())
    } else {
        let cross = ax_tr.transpose() * &x_tr;
        (ax_tr.transpose() * &ax_tr, &cross + cross.transpose(), x_tr.transpose() * &x_tr)
    };
    let (b_a, b_x) = (ax_tr.transpose() * &y_tr, x_tr.transpose() * &y_tr);

    c_grid
        .iter()
        .map(|&c| {
            let dim = g_aa.nrows();
            let mut g = Mat::from_fn(dim, dim, |i, j| g_aa[(i, j)] + c * g_sym[(i, j)] + c * c * g_xx[(i, j)]);
            for i in 0..dim {
                g[(i, i)] += r;
            }
            let solved = if dual {
                cholesky_solve(&g, &y_tr, r).map(|alpha| ax_tr.transpose() * &alpha + x_tr.transpose() * &alpha * c)
            } else {
                cholesky_solve(&g, &(&b_a + &b_x * c), r)
            };
            let w = match solved {
                Some(w) => w,
                None => {
                    let phi_tr = &ax_tr + &x_tr * c;
                    let fit = solve_ridge(&phi_tr, &y_tr, r, max_dim)?;
                    Col::from_fn(f, |k| fit.w[k])
                }
            };
            let h = &ax * &w + x * &w * c;
            let outputs: Vec<f64> = (0..n).map(|i| h[i]).collect();
            Ok(report_from_outputs(&outputs, &data.labels, &data.split))
        })
        .collect()
}
