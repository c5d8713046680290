//! Replica prediction for the one-hop filter `P(A) = A`.
//!
//! In the zero-temperature limit the quenched free energy of the ridge
//! problem reduces to a function of six order parameters
//! `(m, p, q, m_hat, p_hat, q_hat)`:
//!
//! ```text
//! f = tau E / D - q_hat p / 2 + q p_hat / 2 - m m_hat
//!     - (m_hat^2 kappa(r_hat) + p_hat t1(r_hat)) / (2 q_hat)
//! E = (lambda m - 1)^2 + p,   D = 1 + 2 q,   r_hat = 2 tau r / q_hat
//! ```
//!
//! where `t1` and `kappa` are spectral functionals of the feature Gram matrix,
//! both expressed through the Marchenko-Pastur Stieltjes transform
//! [`mp_resolvent_t`]. `m` is the overlap of the test outputs with the labels
//! (in units of `lambda`), `p` their variance, and `q` the susceptibility that
//! separates training from test risk.
//!
//! The stationary point is found in two stages. Eliminating five variables
//! analytically leaves one monotone scalar equation for `q_hat`, solved by
//! Brent's method in log space; a damped Newton iteration on the full
//! six-dimensional gradient then polishes the point to machine precision.

use faer::linalg::solvers::Solve;
use faer::{Col, Mat};
use roots::{find_root_brent, SimpleConvergency};
use serde::{Deserialize, Serialize};

use super::{gaussian_accuracy, TheoryParams, TheoryPrediction};
use crate::error::{Error, Result};

/// Guard on `tau * gamma - 1` below which the ridgeless problem is treated as
/// interpolating.
pub const INTERPOLATION_GUARD: f64 = 1e-9;

/// Stationarity tolerance on every partial derivative of the free energy.
pub const GRADIENT_TOLERANCE: f64 = 1e-10;

const NEWTON_MAX_ITER: usize = 60;

/// Zero-temperature order parameters of the one-hop problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderParams {
    /// Label overlap of the outputs (test mean is `lambda * m`).
    pub m: f64,
    /// Variance of the outputs.
    pub p: f64,
    /// Rescaled susceptibility.
    pub q: f64,
    /// Conjugate of `m`.
    pub m_hat: f64,
    /// Conjugate of `p`.
    pub p_hat: f64,
    /// Conjugate of `q`.
    pub q_hat: f64,
}

impl OrderParams {
    /// Order `(m, p, q, m_hat, p_hat, q_hat)`.
    pub fn to_array(&self) -> [f64; 6] {
        [self.m, self.p, self.q, self.m_hat, self.p_hat, self.q_hat]
    }

    /// Inverse of [`OrderParams::to_array`].
    pub fn from_array(v: [f64; 6]) -> Self {
        OrderParams {
            m: v[0],
            p: v[1],
            q: v[2],
            m_hat: v[3],
            p_hat: v[4],
            q_hat: v[5],
        }
    }
}

/// Stieltjes-type transform `T(r_hat)` of the Marchenko-Pastur law: the
/// positive root of `r_hat T^2 + (gamma - 1 + r_hat) T - 1 = 0`.
///
/// It is the large-size limit of `(1/F) Tr[(X^T X + r_hat I)^{-1}]` for an
/// `N x F` matrix with `N(0, 1/F)` entries and `gamma = N / F`. At
/// `r_hat = 0` the value is `1 / (gamma - 1)` for `gamma > 1` and infinite
/// otherwise.
pub fn mp_resolvent_t(r_hat: f64, gamma: f64) -> f64 {
    resolvent(r_hat, gamma).0
}

/// `T(r_hat)` and its derivative in `r_hat`.
fn resolvent(r_hat: f64, gamma: f64) -> (f64, f64) {
    let b = gamma - 1.0 + r_hat;
    if r_hat == 0.0 {
        if b > 0.0 {
            let t = 1.0 / b;
            return (t, -(t * t + t) / b);
        }
        return (f64::INFINITY, f64::NEG_INFINITY);
    }
    let s = (b * b + 4.0 * r_hat).sqrt();
    // Pick the cancellation-free form of the positive root.
    let t = if b > 0.0 { 2.0 / (s + b) } else { (s - b) / (2.0 * r_hat) };
    (t, -(t * t + t) / s)
}

/// Spectral functionals entering the free energy, with the combinations
/// `kappa2 = d(r kappa)/dr` and `t2 = d(r t1)/dr` needed by the gradient.
#[derive(Debug, Clone, Copy)]
struct Kernel {
    kappa: f64,
    kappa2: f64,
    t1: f64,
    t2: f64,
}

fn kernel(r_hat: f64, gamma: f64, mu: f64) -> Kernel {
    let (t, dt) = resolvent(r_hat, gamma);
    let (u, du) = if r_hat == 0.0 { (1.0, -t) } else { (1.0 - r_hat * t, -t - r_hat * dt) };
    let t1 = u / gamma;
    let t2 = t1 + r_hat * du / gamma;
    let v = t * (gamma + mu * u);
    let dv = dt * (gamma + mu * u) + t * mu * du;
    let k = u / v;
    let dk = (du * v - u * dv) / (v * v);
    let kappa = 1.0 - k;
    Kernel {
        kappa,
        kappa2: kappa - r_hat * dk,
        t1,
        t2,
    }
}

fn r_hat(p: &TheoryParams, q_hat: f64) -> f64 {
    2.0 * p.tau * p.r / q_hat
}

/// Zero-temperature free energy at `o`.
pub fn free_energy(p: &TheoryParams, o: &OrderParams) -> f64 {
    let k = kernel(r_hat(p, o.q_hat), p.gamma, p.mu);
    let e = (p.lambda * o.m - 1.0).powi(2) + o.p;
    let d = 1.0 + 2.0 * o.q;
    p.tau * e / d - 0.5 * o.q_hat * o.p + 0.5 * o.q * o.p_hat - o.m * o.m_hat
        - (o.m_hat * o.m_hat * k.kappa + o.p_hat * k.t1) / (2.0 * o.q_hat)
}

/// Partial derivatives of [`free_energy`] in the order of
/// [`OrderParams::to_array`].
pub fn free_energy_gradient(p: &TheoryParams, o: &OrderParams) -> [f64; 6] {
    let k = kernel(r_hat(p, o.q_hat), p.gamma, p.mu);
    let lm1 = p.lambda * o.m - 1.0;
    let e = lm1 * lm1 + o.p;
    let d = 1.0 + 2.0 * o.q;
    let qh2 = o.q_hat * o.q_hat;
    [
        2.0 * p.tau * p.lambda * lm1 / d - o.m_hat,
        p.tau / d - 0.5 * o.q_hat,
        -2.0 * p.tau * e / (d * d) + 0.5 * o.p_hat,
        -o.m - o.m_hat * k.kappa / o.q_hat,
        0.5 * o.q - k.t1 / (2.0 * o.q_hat),
        -0.5 * o.p + (o.m_hat * o.m_hat * k.kappa2 + o.p_hat * k.t2) / (2.0 * qh2),
    ]
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| if x.is_nan() { f64::NAN } else { acc.max(x.abs()) })
}

fn check_region(p: &TheoryParams) -> Result<()> {
    p.validate()?;
    if p.r == 0.0 && p.tau * p.gamma - 1.0 <= INTERPOLATION_GUARD {
        return Err(Error::InterpolationRegion { product: p.tau * p.gamma });
    }
    Ok(())
}

/// Closed-form ridgeless risks `(r_train, r_test)`; requires `tau * gamma > 1`.
pub fn ridgeless_risks(p: &TheoryParams) -> Result<(f64, f64)> {
    p.validate()?;
    let tg = p.tau * p.gamma;
    if tg - 1.0 <= INTERPOLATION_GUARD {
        return Err(Error::InterpolationRegion { product: tg });
    }
    let den = p.gamma + p.lambda * p.lambda * (p.mu + 1.0) + p.mu;
    let r_train = (p.gamma + p.mu) * (tg - 1.0) / (tg * den);
    let r_test = tg * (p.gamma + p.mu) / ((tg - 1.0) * den);
    Ok((r_train, r_test))
}

/// Stationary point obtained by eliminating all variables but `q_hat`.
fn reduced_solution(p: &TheoryParams) -> Result<OrderParams> {
    let two_tau = 2.0 * p.tau;
    let q_hat = if p.r == 0.0 {
        two_tau - 2.0 / p.gamma
    } else {
        // q_hat + 2 t1(2 tau r / q_hat) = 2 tau; the left side increases with
        // q_hat, is 2 t1 > 0 above 2 tau at q_hat = 2 tau and tends to 0 as
        // q_hat -> 0, so the root is unique.
        let residual = |x: f64| {
            let qh = x.exp();
            ((qh + 2.0 * kernel(r_hat(p, qh), p.gamma, p.mu).t1) / two_tau).ln()
        };
        let hi = two_tau.ln();
        let mut lo = hi;
        loop {
            lo -= 3.0 * std::f64::consts::LN_10;
            if residual(lo) < 0.0 {
                break;
            }
            if lo < -690.0 {
                return Err(Error::diverged("could not bracket the q_hat equation", vec![]));
            }
        }
        let mut conv = SimpleConvergency { eps: 1e-15, max_iter: 200 };
        let x = find_root_brent(lo, hi, residual, &mut conv)
            .map_err(|e| Error::diverged(format!("q_hat root search failed: {e:?}"), vec![]))?;
        x.exp()
    };
    let k = kernel(r_hat(p, q_hat), p.gamma, p.mu);
    let lambda = p.lambda;
    let q = k.t1 / q_hat;
    let m = lambda * k.kappa / (1.0 + lambda * lambda * k.kappa);
    let e1 = 1.0 - lambda * m;
    let denom = 1.0 - k.t2 / p.tau;
    if !(denom > 0.0) {
        return Err(Error::diverged(
            format!("variance equation is singular (1 - t2/tau = {denom:e})"),
            vec![],
        ));
    }
    let pv = (lambda * lambda * e1 * e1 * k.kappa2 + e1 * e1 * k.t2 / p.tau) / denom;
    let d = 1.0 + 2.0 * q;
    Ok(OrderParams {
        m,
        p: pv,
        q,
        m_hat: -q_hat * lambda * e1,
        p_hat: 4.0 * p.tau * (e1 * e1 + pv) / (d * d),
        q_hat,
    })
}

fn admissible(o: &OrderParams) -> bool {
    o.q_hat > 0.0 && 1.0 + 2.0 * o.q > 0.0 && o.to_array().iter().all(|v| v.is_finite())
}

/// Damped Newton iteration on the gradient with a central-difference Jacobian.
fn newton_polish(p: &TheoryParams, start: OrderParams) -> std::result::Result<OrderParams, Vec<f64>> {
    let mut x = start.to_array();
    let mut g = free_energy_gradient(p, &start);
    let mut norm = max_abs(&g);
    let mut trace = vec![norm];
    for _ in 0..NEWTON_MAX_ITER {
        if norm < GRADIENT_TOLERANCE * 1e-2 {
            break;
        }
        let mut jac = Mat::<f64>::zeros(6, 6);
        for j in 0..6 {
            let h = 1e-6 * x[j].abs().max(1e-6);
            let (mut xp, mut xm) = (x, x);
            xp[j] += h;
            xm[j] -= h;
            let gp = free_energy_gradient(p, &OrderParams::from_array(xp));
            let gm = free_energy_gradient(p, &OrderParams::from_array(xm));
            for i in 0..6 {
                jac[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        let rhs = Col::<f64>::from_fn(6, |i| -g[i]);
        let step = jac.partial_piv_lu().solve(&rhs);
        if (0..6).any(|i| !step[i].is_finite()) {
            break;
        }
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let mut cand = x;
            for i in 0..6 {
                cand[i] += alpha * step[i];
            }
            let o = OrderParams::from_array(cand);
            if admissible(&o) {
                let gc = free_energy_gradient(p, &o);
                let nc = max_abs(&gc);
                if nc < norm {
                    x = cand;
                    g = gc;
                    norm = nc;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        trace.push(norm);
        if !accepted {
            break;
        }
    }
    if norm < GRADIENT_TOLERANCE {
        Ok(OrderParams::from_array(x))
    } else {
        Err(trace)
    }
}

/// Stationary point of the free energy for `p`.
///
/// `init` seeds the Newton iteration; without it (or if it fails) the point
/// obtained by analytic elimination is used as the starting guess. Every
/// partial derivative of the returned point is below
/// [`GRADIENT_TOLERANCE`] in absolute value. The result is a deterministic
/// function of the inputs.
pub fn solve_saddle(p: &TheoryParams, init: Option<OrderParams>) -> Result<OrderParams> {
    check_region(p)?;
    let mut residuals = Vec::new();
    if let Some(start) = init.filter(admissible) {
        match newton_polish(p, start) {
            Ok(o) => return Ok(o),
            Err(trace) => residuals.extend(trace),
        }
    }
    let start = reduced_solution(p)?;
    match newton_polish(p, start) {
        Ok(o) => Ok(o),
        Err(trace) => {
            residuals.extend(trace);
            Err(Error::diverged(
                format!(
                    "no stationary point below {GRADIENT_TOLERANCE:e} for lambda={}, mu={}, gamma={}, tau={}, r={}",
                    p.lambda, p.mu, p.gamma, p.tau, p.r
                ),
                residuals,
            ))
        }
    }
}

/// Risks and test-output law implied by an order-parameter point.
pub fn prediction_from(p: &TheoryParams, o: &OrderParams) -> TheoryPrediction {
    let mean = p.lambda * o.m;
    let r_test = (mean - 1.0).powi(2) + o.p;
    let d = 1.0 + 2.0 * o.q;
    TheoryPrediction {
        r_train: r_test / (d * d),
        r_test,
        acc: gaussian_accuracy(mean, o.p),
        mean,
        variance: o.p,
    }
}

/// Predicted training risk, test risk and accuracy for `p`.
pub fn theory_risks(p: &TheoryParams) -> Result<TheoryPrediction> {
    let o = solve_saddle(p, None)?;
    Ok(prediction_from(p, &o))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn resolvent_limits() {
        assert_relative_eq!(mp_resolvent_t(0.0, 5.0), 0.25, epsilon = 1e-15);
        assert_relative_eq!(mp_resolvent_t(1e-12, 5.0), 0.25, epsilon = 1e-10);
        assert!(mp_resolvent_t(0.0, 0.5).is_infinite());
        let mut prev = f64::INFINITY;
        for r in [1e2, 1e4, 1e6] {
            let t = mp_resolvent_t(r, 2.0);
            assert!(t > 0.0 && t < prev);
            assert_relative_eq!(t * r, 1.0, epsilon = 2.0 / r);
            prev = t;
        }
    }

    #[test]
    fn resolvent_solves_its_quadratic() {
        for &g in &[0.2, 1.0, 2.0, 5.0] {
            for &r in &[1e-9, 1e-3, 0.5, 3.0, 1e3] {
                let t = mp_resolvent_t(r, g);
                let res = r * t * t + (g - 1.0 + r) * t - 1.0;
                assert!(res.abs() < 1e-10 * (1.0 + t), "g={g} r={r} res={res}");
                if r < 1e-3 {
                    continue;
                }
                // Derivative against a central difference.
                let h = r * 1e-5;
                let fd = (mp_resolvent_t(r + h, g) - mp_resolvent_t(r - h, g)) / (2.0 * h);
                assert_relative_eq!(resolvent(r, g).1, fd, max_relative = 1e-5);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = TheoryParams::new(1.3, 0.7, 2.5, 0.6, 0.05);
        let o = OrderParams { m: 0.3, p: 0.4, q: 0.8, m_hat: -0.2, p_hat: 0.5, q_hat: 0.9 };
        let g = free_energy_gradient(&p, &o);
        let x = o.to_array();
        for j in 0..6 {
            let h = 1e-6;
            let (mut xp, mut xm) = (x, x);
            xp[j] += h;
            xm[j] -= h;
            let fd = (free_energy(&p, &OrderParams::from_array(xp))
                - free_energy(&p, &OrderParams::from_array(xm)))
                / (2.0 * h);
            assert_relative_eq!(g[j], fd, max_relative = 1e-6, epsilon = 1e-9);
        }
    }

    #[test]
    fn ridgeless_examples() {
        let (tr, te) = ridgeless_risks(&TheoryParams::new(1.0, 1.0, 5.0, 0.8, 0.0)).unwrap();
        assert_relative_eq!(tr, 0.5625, epsilon = 1e-14);
        assert_relative_eq!(te, 1.0, epsilon = 1e-14);
        let (_, te) = ridgeless_risks(&TheoryParams::new(0.0, 0.0, 5.0, 0.8, 0.0)).unwrap();
        assert_relative_eq!(te, 4.0 / 3.0, epsilon = 1e-14);
        assert!(matches!(
            ridgeless_risks(&TheoryParams::new(1.0, 1.0, 1.0, 0.8, 0.0)),
            Err(Error::InterpolationRegion { .. })
        ));
        let mut prev = 0.0;
        for tau in [0.5, 0.3, 0.25, 0.21, 0.2001] {
            let (_, te) = ridgeless_risks(&TheoryParams::new(1.0, 1.0, 5.0, tau, 0.0)).unwrap();
            assert!(te > prev);
            prev = te;
        }
    }

    #[test]
    fn saddle_reproduces_closed_form() {
        let p = TheoryParams::new(1.0, 1.0, 5.0, 0.8, 1e-8);
        let pred = theory_risks(&p).unwrap();
        assert_relative_eq!(pred.r_train, 0.5625, epsilon = 1e-4);
        assert_relative_eq!(pred.r_test, 1.0, epsilon = 1e-4);
        let exact = theory_risks(&TheoryParams { r: 0.0, ..p }).unwrap();
        assert_relative_eq!(exact.r_test, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn saddle_is_stationary_and_reusable_as_init() {
        for p in [
            TheoryParams::new(2.0, 1.0, 5.0, 0.8, 0.1),
            TheoryParams::new(1.0, 2.0, 0.5, 0.3, 1e-4),
            TheoryParams::new(-1.5, 0.0, 1.2, 1.0, 2.0),
        ] {
            let o = solve_saddle(&p, None).unwrap();
            assert!(max_abs(&free_energy_gradient(&p, &o)) < GRADIENT_TOLERANCE);
            assert!(o.q > 0.0 && o.p >= 0.0 && o.q_hat > 0.0);
            let again = solve_saddle(&p, Some(o)).unwrap();
            assert!(max_abs(&free_energy_gradient(&p, &again)) < GRADIENT_TOLERANCE);
        }
    }

    #[test]
    fn interpolating_ridgeless_point_is_rejected() {
        let p = TheoryParams::new(1.0, 1.0, 1.0, 0.5, 0.0);
        assert!(matches!(solve_saddle(&p, None), Err(Error::InterpolationRegion { .. })));
    }

    #[test]
    fn no_graph_signal_gives_chance_accuracy() {
        let pred = theory_risks(&TheoryParams::new(0.0, 1.0, 2.0, 0.5, 0.1)).unwrap();
        assert_eq!(pred.acc, 0.5);
    }
}
