//! Binary-versus-Gaussian comparison of the empirical risks.
//!
//! For every size `N` the binary ensembles (with `d = sqrt(N) / 2`) are
//! compared with their Gaussian counterparts. Both arms of a trial share the
//! features and the train/test split and differ only in the adjacency draw,
//! so the per-trial difference `Delta_t = R(binary) - R(Gaussian)` isolates
//! the effect of the adjacency ensemble.
//!
//! Two statistics are reported per size:
//!
//! * the difference of the mean risks with its standard error;
//! * the mean of the paired absolute differences `|Delta_t|`.
//!
//! The difference of means is typically far below its own standard error,
//! so its log-log slope is only fitted on points where it exceeds ten
//! standard errors. The mean absolute paired difference is resolved at every
//! size and its log-log slope is the reported decay exponent.

use serde::{Deserialize, Serialize};

use super::map_trials;
use crate::csbm::{CsbmConfig, Dataset, Ensemble};
use crate::error::{Error, Result};
use crate::regression::{build_design, evaluate, fit_ridge, GraphFilter, RiskReport};
use crate::stats::{log_log_slope, Stat};
use crate::theory::RidgeConvention;

/// Minimum signal-to-noise ratio of a difference of means entering the
/// literal slope fit.
pub const RESOLUTION_FACTOR: f64 = 10.0;

/// The two adjacency ensembles compared by the check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnsemblePair {
    /// `bs` against `gs`.
    Symmetric,
    /// `bn` against `gn`.
    Nonsymmetric,
    /// An ensemble against itself with independent adjacency draws (a null
    /// comparison whose differences are pure Monte Carlo noise).
    Same(Ensemble),
}

impl EnsemblePair {
    /// Both pairs.
    pub const ALL: [EnsemblePair; 2] = [EnsemblePair::Symmetric, EnsemblePair::Nonsymmetric];

    /// `(binary, gaussian)` ensembles (the first and second arm).
    pub fn ensembles(self) -> (Ensemble, Ensemble) {
        match self {
            EnsemblePair::Symmetric => (Ensemble::BinarySymmetric, Ensemble::GaussianSymmetric),
            EnsemblePair::Nonsymmetric => (Ensemble::BinaryNonsymmetric, Ensemble::GaussianNonsymmetric),
            EnsemblePair::Same(e) => (e, e),
        }
    }

    /// Short label, e.g. `bs-gs`.
    pub fn label(self) -> String {
        let (a, b) = self.ensembles();
        format!("{a}-{b}")
    }
}

/// Statistics of one risk (train or test) for one pair at one size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    /// Risk under the binary ensemble.
    pub binary: Stat,
    /// Risk under the Gaussian ensemble.
    pub gaussian: Stat,
    /// Difference of means `mean(binary) - mean(gaussian)`.
    pub delta: f64,
    /// Standard error of `delta` (from the paired differences).
    pub delta_se: f64,
    /// Mean of `|Delta_t|` over trials.
    pub abs_delta: f64,
    /// Standard error of `abs_delta`.
    pub abs_delta_se: f64,
}

impl PairStats {
    fn from_paired(binary: &[f64], gaussian: &[f64]) -> Self {
        let diffs: Vec<f64> = binary.iter().zip(gaussian).map(|(b, g)| b - g).collect();
        let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
        let d = Stat::from_values(&diffs).expect("at least one trial");
        let a = Stat::from_values(&abs).expect("at least one trial");
        PairStats {
            binary: Stat::from_values(binary).expect("at least one trial"),
            gaussian: Stat::from_values(gaussian).expect("at least one trial"),
            delta: d.mean,
            delta_se: d.std_error(),
            abs_delta: a.mean,
            abs_delta_se: a.std_error(),
        }
    }

    /// Whether the difference of means is resolved above the noise floor.
    pub fn delta_resolved(&self) -> bool {
        self.delta.abs() >= RESOLUTION_FACTOR * self.delta_se && self.delta != 0.0
    }
}

/// Results of one pair at one size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniversalityPoint {
    /// Number of nodes.
    pub n: usize,
    /// Average degree used for the binary arm.
    pub d: f64,
    /// Compared ensembles.
    pub pair: EnsemblePair,
    /// Training-risk statistics.
    pub train: PairStats,
    /// Test-risk statistics (`None` when `tau = 1`).
    pub test: Option<PairStats>,
}

/// Fitted log-log slopes of one pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniversalitySlopes {
    /// Compared ensembles.
    pub pair: EnsemblePair,
    /// Slope of `log |difference of mean training risks|` on resolved points.
    pub train_delta: Option<f64>,
    /// Same for the test risk.
    pub test_delta: Option<f64>,
    /// Slope of `log mean |Delta_t|` for the training risk.
    pub train_abs: Option<f64>,
    /// Slope of `log mean |Delta_t|` for the test risk.
    pub test_abs: Option<f64>,
    /// Sizes excluded from the difference-of-means fits (train, test).
    pub dropped: (Vec<usize>, Vec<usize>),
}

/// Output of [`universality_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniversalityReport {
    /// Sizes used.
    pub n_list: Vec<usize>,
    /// Trials per size and ensemble.
    pub n_trials: usize,
    /// One entry per `(size, pair)`, sizes outermost.
    pub points: Vec<UniversalityPoint>,
    /// One entry per pair.
    pub slopes: Vec<UniversalitySlopes>,
}

/// Average degree used at size `n`: `sqrt(n) / 2`.
pub fn degree_rule(n: usize) -> f64 {
    (n as f64).sqrt() / 2.0
}

fn arm_report(
    cfg: &CsbmConfig,
    ensemble: Ensemble,
    salt: u8,
    filter: &GraphFilter,
    convention: RidgeConvention,
    trial: u64,
) -> Result<RiskReport> {
    let mut c = *cfg;
    c.ensemble = ensemble;
    let data = Dataset::generate_salted(&c, trial, salt)?;
    let phi = build_design(&data.adjacency, &data.features.x, filter)?;
    let w = fit_ridge(&phi, &data.labels, &data.split, convention.empirical_ridge(c.r, c.tau))?;
    evaluate(&phi, &w, &data.labels, &data.split)
}

/// Universality check with the one-hop filter, both ensemble pairs and
/// parallel trials.
pub fn universality_check(base: &CsbmConfig, n_list: &[usize], n_trials: usize) -> Result<UniversalityReport> {
    universality_check_with(
        base,
        n_list,
        n_trials,
        &GraphFilter::one_hop(),
        &EnsemblePair::ALL,
        RidgeConvention::default(),
        true,
    )
}

/// Universality check with explicit filter, pairs, ridge convention and
/// parallelism. `gamma` of `base` is kept fixed across sizes.
pub fn universality_check_with(
    base: &CsbmConfig,
    n_list: &[usize],
    n_trials: usize,
    filter: &GraphFilter,
    pairs: &[EnsemblePair],
    convention: RidgeConvention,
    parallel: bool,
) -> Result<UniversalityReport> {
    if n_list.len() < 4 {
        return Err(Error::invalid("the size list needs at least 4 entries"));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("the size list must be strictly increasing"));
    }
    if n_trials < 2 {
        return Err(Error::invalid("at least 2 trials are needed for standard errors"));
    }
    if pairs.is_empty() {
        return Err(Error::invalid("no ensemble pair selected"));
    }
    let mut points = Vec::new();
    for &n in n_list {
        let mut cfg = base.with_n_keep_gamma(n);
        cfg.d = degree_rule(n);
        for &pair in pairs {
            let (bin, gauss) = pair.ensembles();
            let mut check = cfg;
            check.ensemble = bin;
            check.validate()?;
            let reports = map_trials(n_trials, parallel, |t| {
                Ok((
                    arm_report(&cfg, bin, 0, filter, convention, t)?,
                    arm_report(&cfg, gauss, 1, filter, convention, t)?,
                ))
            })?;
            let train_b: Vec<f64> = reports.iter().map(|(b, _)| b.r_train).collect();
            let train_g: Vec<f64> = reports.iter().map(|(_, g)| g.r_train).collect();
            let test = if cfg.tau < 1.0 {
                let tb: Vec<f64> = reports.iter().filter_map(|(b, _)| b.test.map(|t| t.r_test)).collect();
                let tg: Vec<f64> = reports.iter().filter_map(|(_, g)| g.test.map(|t| t.r_test)).collect();
                Some(PairStats::from_paired(&tb, &tg))
            } else {
                None
            };
            points.push(UniversalityPoint {
                n,
                d: cfg.d,
                pair,
                train: PairStats::from_paired(&train_b, &train_g),
                test,
            });
        }
    }
    let slopes = pairs.iter().map(|&pair| fit_slopes(pair, &points)).collect();
    Ok(UniversalityReport {
        n_list: n_list.to_vec(),
        n_trials,
        points,
        slopes,
    })
}

fn fit_slopes(pair: EnsemblePair, points: &[UniversalityPoint]) -> UniversalitySlopes {
    let mine: Vec<&UniversalityPoint> = points.iter().filter(|p| p.pair == pair).collect();
    let delta_fit = |get: &dyn Fn(&UniversalityPoint) -> Option<PairStats>| {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut dropped = Vec::new();
        for p in &mine {
            match get(p) {
                Some(s) if s.delta_resolved() => {
                    xs.push(p.n as f64);
                    ys.push(s.delta.abs());
                }
                Some(_) => dropped.push(p.n),
                None => {}
            }
        }
        let slope = if xs.len() >= 2 { log_log_slope(&xs, &ys) } else { None };
        (slope, dropped)
    };
    let abs_fit = |get: &dyn Fn(&UniversalityPoint) -> Option<PairStats>| {
        let (xs, ys): (Vec<f64>, Vec<f64>) = mine
            .iter()
            .filter_map(|p| get(p).map(|s| (p.n as f64, s.abs_delta)))
            .unzip();
        if xs.len() >= 2 {
            log_log_slope(&xs, &ys)
        } else {
            None
        }
    };
    let train = |p: &UniversalityPoint| Some(p.train);
    let test = |p: &UniversalityPoint| p.test;
    let (train_delta, dropped_train) = delta_fit(&train);
    let (test_delta, dropped_test) = delta_fit(&test);
    UniversalitySlopes {
        pair,
        train_delta,
        test_delta,
        train_abs: abs_fit(&train),
        test_abs: abs_fit(&test),
        dropped: (dropped_train, dropped_test),
    }
}
