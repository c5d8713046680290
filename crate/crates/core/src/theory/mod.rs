//! Asymptotic predictions for the risks of the linear graph convolution.
//!
//! * [`replica`]: one-hop filter `P(A) = A` for any ridge, through the
//!   stationary point of a six-parameter free energy, plus the ridgeless
//!   closed form.
//! * [`selfloop`]: filter `A + cI` for `mu = 0` in the ridgeless limit
//!   (twelve order parameters, Monte Carlo trace estimator).
//! * [`rmt`]: full-observation (`tau = 1`) training loss from a resolvent
//!   computation, including the two-hop filter `A^2`.
//!
//! All theory routines use the *Hamiltonian* ridge convention internally: the
//! penalty of the training objective is `tau * r * ||w||^2`. The empirical
//! solver penalises `r * ||w||^2`; [`RidgeConvention`] maps between the two.

pub mod replica;
pub mod rmt;
pub mod selfloop;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use replica::{
    free_energy, free_energy_gradient, mp_resolvent_t, ridgeless_risks, solve_saddle,
    theory_risks, OrderParams,
};
pub use rmt::{rmt_full_observation, rmt_two_hop_ridgeless, RmtQuantities};
pub use selfloop::{
    selfloop_theory, selfloop_theory_with, u_closed_form_tau08_gamma5, u_trace_monte_carlo,
    SelfLoopOptions, SelfLoopOrderParams, SelfLoopSolution,
};

/// How a user-facing ridge value `r` is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum RidgeConvention {
    /// The empirical solver uses `(r I + Phi^T Phi)`; the theory therefore
    /// receives `r / tau`.
    #[default]
    Objective,
    /// The empirical solver uses `(tau r I + Phi^T Phi)`; the theory receives `r`.
    Hamiltonian,
}

impl RidgeConvention {
    /// Ridge passed to the empirical solver.
    pub fn empirical_ridge(self, r: f64, tau: f64) -> f64 {
        match self {
            RidgeConvention::Objective => r,
            RidgeConvention::Hamiltonian => tau * r,
        }
    }

    /// Ridge passed to the theory (Hamiltonian convention).
    pub fn theory_ridge(self, r: f64, tau: f64) -> f64 {
        match self {
            RidgeConvention::Objective => r / tau,
            RidgeConvention::Hamiltonian => r,
        }
    }

    /// Name used on the command line.
    pub fn name(self) -> &'static str {
        match self {
            RidgeConvention::Objective => "objective",
            RidgeConvention::Hamiltonian => "hamiltonian",
        }
    }
}

impl fmt::Display for RidgeConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RidgeConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "objective" => Ok(RidgeConvention::Objective),
            "hamiltonian" => Ok(RidgeConvention::Hamiltonian),
            other => Err(Error::invalid(format!(
                "ridge-convention must be objective or hamiltonian, got '{other}'"
            ))),
        }
    }
}

/// Size-free model parameters; `r` follows the Hamiltonian convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    /// Graph signal-to-noise ratio.
    pub lambda: f64,
    /// Feature signal-to-noise ratio.
    pub mu: f64,
    /// `N / F`.
    pub gamma: f64,
    /// Training label ratio.
    pub tau: f64,
    /// Ridge strength (Hamiltonian convention).
    pub r: f64,
}

impl TheoryParams {
    /// Convenience constructor.
    pub fn new(lambda: f64, mu: f64, gamma: f64, tau: f64, r: f64) -> Self {
        TheoryParams { lambda, mu, gamma, tau, r }
    }

    /// Theory parameters for an empirical configuration under `convention`.
    pub fn from_config(cfg: &crate::csbm::CsbmConfig, convention: RidgeConvention) -> Self {
        TheoryParams {
            lambda: cfg.lambda,
            mu: cfg.mu,
            gamma: cfg.gamma(),
            tau: cfg.tau,
            r: convention.theory_ridge(cfg.r, cfg.tau),
        }
    }

    /// Range checks.
    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() {
            return Err(Error::invalid("lambda must be finite"));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::invalid(format!("mu must be finite and >= 0, got {}", self.mu)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid(format!("gamma must be finite and > 0, got {}", self.gamma)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::invalid(format!("tau must lie in (0, 1], got {}", self.tau)));
        }
        if !(self.r >= 0.0 && self.r.is_finite()) {
            return Err(Error::invalid(format!("r must be finite and >= 0, got {}", self.r)));
        }
        Ok(())
    }
}

/// Predicted risks and test-output law of a parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryPrediction {
    /// Training risk.
    pub r_train: f64,
    /// Test risk.
    pub r_test: f64,
    /// Test accuracy.
    pub acc: f64,
    /// Mean of the test outputs of the `+1` class.
    pub mean: f64,
    /// Variance of the test outputs of either class.
    pub variance: f64,
}

/// Accuracy of outputs distributed as `N(mean * y_i, variance)` with the
/// convention `sign(0) = +1`.
pub fn gaussian_accuracy(mean: f64, variance: f64) -> f64 {
    if variance > 0.0 {
        0.5 * (1.0 + libm::erf(mean / (2.0 * variance).sqrt()))
    } else if mean > 0.0 {
        1.0
    } else if mean == 0.0 {
        0.5
    } else {
        0.0
    }
}
