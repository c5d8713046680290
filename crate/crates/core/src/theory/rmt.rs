//! Random-matrix computation of the training loss at full observation.
//!
//! With every node labelled (`tau = 1`) the minimal ridge objective is
//! `L = (r/N) y^T (r I + Phi Phi^T)^{-1} y`. Splitting `Phi` into a bulk part
//! and four thin low-rank corrections, Woodbury's identity reduces `L` to five
//! self-averaging traces `(a, b, c, d, q)` of the bulk resolvent
//! `R = (r I + O O^T)^{-1}`:
//!
//! ```text
//! L = r q s / (lambda^2 q X + s)
//! s = a mu^2 (alpha - c) + 1
//! X = a mu^2 (alpha - c)(1 - d) + mu^2 (alpha - c)(b - 1)^2 + (1 - d)
//! ```
//!
//! The computation works in rescaled units: `alpha = 1 / gamma` and
//! `mu_rescaled^2 = mu * gamma`.
//!
//! `q = Tr(R) / N` is obtained exactly from its self-consistent equation. The
//! other four traces are only available through their small-`r` expansions,
//! so for `r > 0` the loss is accurate to leading order in `r`; at `r = 0` the
//! limit is evaluated in closed form.

use roots::find_roots_cubic;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The five concentrating traces of the bulk resolvent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmtQuantities {
    /// `y^T Xi_g^T R Xi_g y / N`.
    pub a: f64,
    /// Cross term between feature and graph noise.
    pub b: f64,
    /// `u^T O^T R O u / N`.
    pub c: f64,
    /// Second-order feature-noise trace.
    pub d: f64,
    /// `Tr(R) / N`.
    pub q: f64,
    /// `1 / gamma`.
    pub alpha: f64,
    /// Rescaled feature signal, `sqrt(mu * gamma)`.
    pub mu_rescaled: f64,
    /// Ridge strength.
    pub r: f64,
}

impl RmtQuantities {
    /// Evaluates the traces for `r > 0` and `alpha` in `(0, 1)`.
    pub fn new(alpha: f64, mu_rescaled: f64, r: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::invalid(format!("r must be positive here, got {r}")));
        }
        if alpha >= 1.0 {
            return Err(Error::invalid("the small-r trace expansions require alpha < 1"));
        }
        let q = resolvent_trace(alpha, r)?;
        let om = 1.0 - alpha;
        let shift = alpha * alpha / (om * om) * r;
        Ok(RmtQuantities {
            a: om * om / r,
            b: alpha - shift,
            c: alpha - shift,
            d: 1.0 - alpha / om * r,
            q,
            alpha,
            mu_rescaled,
            r,
        })
    }

    /// Training loss for graph signal `lambda`.
    pub fn loss(&self, lambda: f64) -> f64 {
        let mu2 = self.mu_rescaled * self.mu_rescaled;
        let ac = self.alpha - self.c;
        let s = self.a * mu2 * ac + 1.0;
        let x = self.a * mu2 * ac * (1.0 - self.d)
            + mu2 * ac * (self.b - 1.0).powi(2)
            + (1.0 - self.d);
        self.r * self.q * s / (lambda * lambda * self.q * x + s)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    Ok(())
}

/// `q = Tr[(r I + O O^T)^{-1}] / N`.
///
/// With `x = q r`, the self-consistent equation becomes the cubic
/// `x^3 + (alpha - 1) x^2 + r alpha x - r alpha = 0`; the physical branch is
/// its largest root in `(0, 1]`, which tends to `1 - alpha` as `r -> 0`.
fn resolvent_trace(alpha: f64, r: f64) -> Result<f64> {
    let cubic = |x: f64| ((x + alpha - 1.0) * x + r * alpha) * x - r * alpha;
    let dcubic = |x: f64| (3.0 * x + 2.0 * (alpha - 1.0)) * x + r * alpha;
    let roots = find_roots_cubic(1.0, alpha - 1.0, r * alpha, -r * alpha);
    let mut best = roots
        .as_ref()
        .iter()
        .copied()
        .filter(|x| *x > 0.0 && *x <= 1.0 + 1e-12)
        .fold(f64::NAN, f64::max);
    if best.is_nan() {
        return Err(Error::diverged(
            format!("no root of the resolvent equation in (0, 1] for alpha={alpha}, r={r}"),
            vec![],
        ));
    }
    // The analytic cubic formula loses digits for tiny r; polish.
    for _ in 0..4 {
        let d = dcubic(best);
        if d != 0.0 {
            best -= cubic(best) / d;
        }
    }
    Ok(best / r)
}

/// Full-observation training loss of the one-hop filter.
///
/// `alpha = 1/gamma` must lie in `(0, 1]`, `mu_rescaled = sqrt(mu * gamma)`.
/// For `r = 0` the exact ridgeless limit
/// `(1 - alpha)(alpha^2 mu^2 + 1) / (alpha^2 (lambda^2 + 1) mu^2 + alpha lambda^2 + 1)`
/// is returned; for `r > 0` the leading-order approximation described in the
/// module documentation.
pub fn rmt_full_observation(alpha: f64, lambda: f64, mu_rescaled: f64, r: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !lambda.is_finite() || !mu_rescaled.is_finite() {
        return Err(Error::invalid("lambda and mu must be finite"));
    }
    if r < 0.0 || !r.is_finite() {
        return Err(Error::invalid(format!("r must be finite and >= 0, got {r}")));
    }
    if r == 0.0 {
        let a2m2 = alpha * alpha * mu_rescaled * mu_rescaled;
        let l2 = lambda * lambda;
        return Ok((1.0 - alpha) * (a2m2 + 1.0) / (a2m2 * (l2 + 1.0) + alpha * l2 + 1.0));
    }
    Ok(RmtQuantities::new(alpha, mu_rescaled, r)?.loss(lambda))
}

/// Ridgeless full-observation training loss of the two-hop filter `A^2` at
/// `mu = 0`.
pub fn rmt_two_hop_ridgeless(alpha: f64, lambda: f64) -> f64 {
    let l2 = lambda * lambda;
    (1.0 - alpha) * (alpha * l2 + 1.0) / (alpha * (l2 + 2.0) * l2 + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn resolvent_trace_leading_order() {
        for alpha in [0.2, 0.5, 0.9] {
            let r = 1e-9;
            let q = resolvent_trace(alpha, r).unwrap();
            assert_relative_eq!(q * r, 1.0 - alpha, max_relative = 1e-6);
            // Next order of the expansion.
            let next = alpha * alpha / (1.0 - alpha).powi(2);
            assert_relative_eq!(q - (1.0 - alpha) / r, next, max_relative = 1e-3);
        }
    }

    #[test]
    fn resolvent_trace_large_ridge() {
        // R ~ I / r for r much larger than the spectrum.
        let q = resolvent_trace(0.5, 1e6).unwrap();
        assert_relative_eq!(q * 1e6, 1.0, max_relative = 1e-5);
    }

    #[test]
    fn ridgeless_examples() {
        let l = rmt_full_observation(0.5, 1.0, 2f64.sqrt(), 0.0).unwrap();
        assert_relative_eq!(l, 0.3, epsilon = 1e-14);
        let l = rmt_full_observation(0.25, 2.0, 0.0, 0.0).unwrap();
        assert_relative_eq!(l, 0.75 / 2.0, epsilon = 1e-14);
        assert_eq!(rmt_full_observation(1.0, 1.0, 1.0, 0.0).unwrap(), 0.0);
        assert!(rmt_full_observation(1.5, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn small_ridge_approaches_ridgeless_limit() {
        for (alpha, lambda, mu) in [(0.5, 1.0, 1.5), (0.2, 2.0, 0.5), (0.8, 0.3, 1.0)] {
            let l0 = rmt_full_observation(alpha, lambda, mu, 0.0).unwrap();
            let l = rmt_full_observation(alpha, lambda, mu, 1e-8).unwrap();
            assert_relative_eq!(l, l0, max_relative = 1e-5);
        }
    }

    #[test]
    fn two_hop_examples() {
        assert_relative_eq!(rmt_two_hop_ridgeless(0.5, 1.0), 0.3, epsilon = 1e-15);
        assert_relative_eq!(rmt_two_hop_ridgeless(0.3, 0.0), 0.7, epsilon = 1e-15);
        assert!(rmt_two_hop_ridgeless(0.5, 1e4) < 1e-4);
    }
}
