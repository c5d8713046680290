//! Seeded Monte Carlo experiments: repeated trials, parameter sweeps, the
//! binary-versus-Gaussian universality check, self-loop scans and spectral
//! diagnostics.
//!
//! Every trial draws its dataset from substreams keyed by
//! `(seed, trial index)`, so a [`SummaryRow`] is a pure function of its
//! configuration and running trials in parallel never changes the output.

mod selfloop_scan;
mod spectral;
mod universality;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csbm::{CsbmConfig, Dataset};
use crate::error::{Error, Result};
use crate::regression::{build_design, evaluate, fit_ridge, GraphFilter, RiskReport};
use crate::stats::Stat;
use crate::theory::{
    replica, rmt_two_hop_ridgeless, selfloop_theory, RidgeConvention, TheoryParams,
};

pub use selfloop_scan::{selfloop_scan, ScanPoint, SelfLoopScan};
pub use spectral::{distortion_ratio, spectral_analysis, SpectrumReport};
pub use universality::{
    degree_rule, universality_check, universality_check_with, EnsemblePair, PairStats,
    UniversalityPoint, UniversalityReport, UniversalitySlopes,
};

/// Default number of trials per parameter point.
pub const DEFAULT_TRIALS: usize = 10;

/// Default upper bound on the number of rows of a sweep.
pub const DEFAULT_SWEEP_CAP: usize = 10_000;

/// Largest empirical ridge for which the ridgeless two-hop and self-loop
/// predictions are attached to a row.
pub const RIDGELESS_THEORY_MAX_RIDGE: f64 = 1e-4;

/// A sweepable scalar parameter of [`CsbmConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Param {
    /// Number of nodes (feature dimension follows to keep `gamma`).
    N,
    /// `N / F`.
    Gamma,
    /// Graph signal-to-noise ratio.
    Lambda,
    /// Feature signal-to-noise ratio.
    Mu,
    /// Average degree.
    D,
    /// Training ratio.
    Tau,
    /// Ridge strength.
    R,
}

impl Param {
    /// Every parameter, in the column order of the output tables.
    pub const ALL: [Param; 7] = [
        Param::Tau,
        Param::Lambda,
        Param::Mu,
        Param::Gamma,
        Param::R,
        Param::N,
        Param::D,
    ];

    /// Lower-case name used in configs and headers.
    pub fn name(self) -> &'static str {
        match self {
            Param::N => "n",
            Param::Gamma => "gamma",
            Param::Lambda => "lambda",
            Param::Mu => "mu",
            Param::D => "d",
            Param::Tau => "tau",
            Param::R => "r",
        }
    }

    /// Returns `cfg` with this parameter set to `value`.
    pub fn apply(self, mut cfg: CsbmConfig, value: f64) -> Result<CsbmConfig> {
        match self {
            Param::N => {
                if !(value >= 2.0 && value.fract() == 0.0) {
                    return Err(Error::invalid(format!("n must be a positive even integer, got {value}")));
                }
                cfg = cfg.with_n_keep_gamma(value as usize);
            }
            Param::Gamma => {
                if !(value > 0.0 && value.is_finite()) {
                    return Err(Error::invalid(format!("gamma must be finite and > 0, got {value}")));
                }
                cfg.set_gamma(value);
            }
            Param::Lambda => cfg.lambda = value,
            Param::Mu => cfg.mu = value,
            Param::D => cfg.d = value,
            Param::Tau => cfg.tau = value,
            Param::R => cfg.r = value,
        }
        Ok(cfg)
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Param::ALL
            .into_iter()
            .find(|p| p.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown parameter '{s}' (expected one of n, gamma, lambda, mu, d, tau, r)"
                ))
            })
    }
}

/// A base configuration, a filter and optional parameter grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Parameters not overridden by a grid.
    pub base: CsbmConfig,
    /// Graph filter applied to the features.
    pub filter: GraphFilter,
    /// Trials per parameter point.
    pub n_trials: usize,
    /// Grids; the sweep is their Cartesian product, first grid outermost.
    pub overrides: Vec<(Param, Vec<f64>)>,
    /// Interpretation of the ridge value.
    pub convention: RidgeConvention,
    /// Whether to attach theory predictions when available.
    pub theory: bool,
    /// Run trials on the rayon pool.
    pub parallel: bool,
    /// Maximum number of sweep rows.
    pub cap: usize,
}

impl ExperimentConfig {
    /// One-hop experiment on `base` with default settings.
    pub fn new(base: CsbmConfig) -> Self {
        ExperimentConfig {
            base,
            filter: GraphFilter::one_hop(),
            n_trials: DEFAULT_TRIALS,
            overrides: Vec::new(),
            convention: RidgeConvention::default(),
            theory: true,
            parallel: true,
            cap: DEFAULT_SWEEP_CAP,
        }
    }

    /// Structural checks (the base configuration is validated per point).
    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::invalid("trials must be positive"));
        }
        let mut seen = Vec::new();
        for (p, grid) in &self.overrides {
            if grid.is_empty() {
                return Err(Error::invalid(format!("grid for {p} is empty")));
            }
            if seen.contains(p) {
                return Err(Error::invalid(format!("parameter {p} is overridden twice")));
            }
            seen.push(*p);
        }
        Ok(())
    }

    /// Number of sweep rows.
    pub fn n_points(&self) -> usize {
        self.overrides.iter().map(|(_, g)| g.len()).product()
    }

    /// Configurations of the sweep in row-major grid order.
    pub fn points(&self) -> Result<Vec<CsbmConfig>> {
        let mut points = vec![self.base];
        for (param, grid) in &self.overrides {
            let mut next = Vec::with_capacity(points.len() * grid.len());
            for cfg in &points {
                for &v in grid {
                    next.push(param.apply(*cfg, v)?);
                }
            }
            points = next;
        }
        Ok(points)
    }
}

/// Theory columns of a [`SummaryRow`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TheoryColumns {
    /// Predicted training risk.
    pub r_train: Option<f64>,
    /// Predicted test risk.
    pub r_test: Option<f64>,
    /// Predicted test accuracy.
    pub acc: Option<f64>,
}

/// Aggregated trial results of one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    /// Resolved configuration.
    pub config: CsbmConfig,
    /// Filter used.
    pub filter: GraphFilter,
    /// Training risk over trials.
    pub r_train: Stat,
    /// Test risk over trials (`None` without test nodes).
    pub r_test: Option<Stat>,
    /// Test accuracy over trials.
    pub acc: Option<Stat>,
    /// Mean test output of the `+1` class.
    pub pos_mean: Option<Stat>,
    /// Test output variance of the `+1` class.
    pub pos_var: Option<Stat>,
    /// Mean test output of the `-1` class.
    pub neg_mean: Option<Stat>,
    /// Test output variance of the `-1` class.
    pub neg_var: Option<Stat>,
    /// Theory prediction (all `None` where no theory applies).
    pub theory: TheoryColumns,
    /// Number of trials.
    pub n_trials: usize,
}

/// Risk report of a single trial.
pub fn run_trial(cfg: &CsbmConfig, filter: &GraphFilter, convention: RidgeConvention, trial: u64) -> Result<RiskReport> {
    let data = Dataset::generate(cfg, trial)?;
    let phi = build_design(&data.adjacency, &data.features.x, filter)?;
    let w = fit_ridge(&phi, &data.labels, &data.split, convention.empirical_ridge(cfg.r, cfg.tau))?;
    evaluate(&phi, &w, &data.labels, &data.split)
}

/// Maps `f` over `0..n`, on the rayon pool if `parallel`; results keep index
/// order either way.
pub(crate) fn map_trials<T: Send>(n: usize, parallel: bool, f: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    if parallel {
        (0..n as u64).into_par_iter().map(&f).collect()
    } else {
        (0..n as u64).map(&f).collect()
    }
}

/// Theory prediction for a parameter point, where one is available.
pub fn theory_columns(cfg: &CsbmConfig, filter: &GraphFilter, convention: RidgeConvention) -> TheoryColumns {
    let coeffs = filter.coeffs();
    if coeffs == [0.0, 1.0] {
        let p = TheoryParams::from_config(cfg, convention);
        return match replica::theory_risks(&p) {
            Ok(pred) if cfg.tau < 1.0 => TheoryColumns {
                r_train: Some(pred.r_train),
                r_test: Some(pred.r_test),
                acc: Some(pred.acc),
            },
            Ok(pred) => TheoryColumns {
                r_train: Some(pred.r_train),
                ..Default::default()
            },
            Err(_) => TheoryColumns::default(),
        };
    }
    if coeffs == [0.0, 0.0, 1.0] && cfg.tau == 1.0 && cfg.mu == 0.0 && cfg.r <= RIDGELESS_THEORY_MAX_RIDGE {
        let alpha = 1.0 / cfg.gamma();
        if alpha <= 1.0 {
            return TheoryColumns {
                r_train: Some(rmt_two_hop_ridgeless(alpha, cfg.lambda)),
                ..Default::default()
            };
        }
    }
    if let Some(c) = filter.self_loop_intensity() {
        if cfg.mu == 0.0 && cfg.r <= RIDGELESS_THEORY_MAX_RIDGE && cfg.tau < 1.0 {
            if let Ok(pred) = selfloop_theory(cfg.lambda, cfg.gamma(), cfg.tau, c) {
                return TheoryColumns {
                    r_train: Some(pred.r_train),
                    r_test: Some(pred.r_test),
                    acc: Some(pred.acc),
                };
            }
        }
    }
    TheoryColumns::default()
}

fn summarize(cfg: &CsbmConfig, filter: &GraphFilter, reports: &[RiskReport], theory: TheoryColumns) -> SummaryRow {
    let stat = |f: &dyn Fn(&RiskReport) -> Option<f64>| -> Option<Stat> {
        let values: Option<Vec<f64>> = reports.iter().map(f).collect();
        values.and_then(|v| Stat::from_values(&v))
    };
    SummaryRow {
        config: *cfg,
        filter: filter.clone(),
        r_train: stat(&|r| Some(r.r_train)).expect("at least one trial"),
        r_test: stat(&|r| r.test.map(|t| t.r_test)),
        acc: stat(&|r| r.test.map(|t| t.acc)),
        pos_mean: stat(&|r| r.test.map(|t| t.positive.mean)),
        pos_var: stat(&|r| r.test.map(|t| t.positive.variance)),
        neg_mean: stat(&|r| r.test.map(|t| t.negative.mean)),
        neg_var: stat(&|r| r.test.map(|t| t.negative.variance)),
        theory,
        n_trials: reports.len(),
    }
}

/// Runs `exp.n_trials` trials at `cfg` and aggregates them.
pub fn run_trials(cfg: &CsbmConfig, exp: &ExperimentConfig) -> Result<SummaryRow> {
    exp.validate()?;
    cfg.validate()?;
    let reports = map_trials(exp.n_trials, exp.parallel, |t| {
        run_trial(cfg, &exp.filter, exp.convention, t)
    })?;
    let theory = if exp.theory {
        theory_columns(cfg, &exp.filter, exp.convention)
    } else {
        TheoryColumns::default()
    };
    Ok(summarize(cfg, &exp.filter, &reports, theory))
}

/// One [`SummaryRow`] per grid point, in row-major grid order.
pub fn sweep(exp: &ExperimentConfig) -> Result<Vec<SummaryRow>> {
    exp.validate()?;
    let n = exp.n_points();
    if n > exp.cap {
        return Err(Error::invalid(format!(
            "sweep has {n} points, above the cap of {}",
            exp.cap
        )));
    }
    let points = exp.points()?;
    for p in &points {
        p.validate()?;
    }
    points.iter().map(|p| run_trials(p, exp)).collect()
}
