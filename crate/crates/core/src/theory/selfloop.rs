//! Replica prediction for the self-loop filter `P(A) = A + c I` at `mu = 0`
//! in the ridgeless limit.
//!
//! The self-loop couples each node's output to its own features, so the
//! order parameters split into training and test parts:
//! `(m0, m1, p0, p1, q0, q1)` and their conjugates. With `D = 1 + 2(q0 + q1)`
//! and `e = 1 - lambda (m0 + m1)` the stationarity conditions read
//!
//! ```text
//! q_hat0 = 2 (c^2 + tau) / D - 4 c^2 q0 / D^2
//! q_hat1 = 2 tau / D         - 4 c^2 q0 / D^2
//! D m_hat0 = -2 (tau lambda + c) e + 2 c lambda m0
//! D m_hat1 = -2 tau lambda e       + 2 c lambda m0
//! D^2 p_hat0 = 4 (B0 + tau p) + 4 c^2 p - 16 c^2 p q0 / D
//! D^2 p_hat1 = 4 (B0 + tau p)           - 16 c^2 p q0 / D
//! B0 = tau e^2 - 2 c e m0 + c^2 p0
//! ```
//!
//! closed by the feature-side traces
//!
//! ```text
//! q_k = Tr(Y_k G) / N,   m_k = -m_hat_k q_k,
//! p_k = sum_j (m_hat_j^2 + p_hat_j) Tr(Y_j G Y_k G) / N,
//! G = (q_hat0 Y0 + q_hat1 Y1)^{-1},  Y0 = X^T I_train X,  Y1 = X^T I_test X.
//! ```
//!
//! The traces are evaluated by Monte Carlo on sampled calibration matrices.
//! When `tau gamma > 1`, `G` exists and the traces follow from the generalised
//! eigenvalues of the pencil `(Y0, Y0 + Y1)`. When `tau gamma < 1`, the
//! ridgeless limit must be taken explicitly: with `rho = tau r -> 0`,
//! `q_hat_k = 2 rho s_k` and `G = H / (2 rho)` for `H = (s0 Y0 + s1 Y1 + I)^{-1}`.
//! The equations are then rewritten for the finite rescaled quantities and the
//! training risk vanishes.

use faer::linalg::solvers::Solve;
use faer::linalg::triangular_solve::solve_lower_triangular_in_place;
use faer::{Mat, Par, Side};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{gaussian_accuracy, TheoryPrediction};
use crate::error::{Error, Result};
use crate::rng::{substream, Purpose};

/// Guard on `|tau gamma - 1|`.
const INTERPOLATION_GUARD: f64 = 1e-9;
const NEWTON_TOLERANCE: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 100;
/// Relative agreement required between the Monte Carlo and closed-form `U`.
const CLOSED_FORM_TOLERANCE: f64 = 1e-2;

/// Monte Carlo settings of the trace estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfLoopOptions {
    /// Calibration size `N_cal`; `None` picks 4000 when `tau gamma > 1` and
    /// 1000 otherwise (where every evaluation needs a dense inverse).
    pub n_cal: Option<usize>,
    /// Number of independent calibration matrices; `None` picks 16 when
    /// `tau gamma > 1` and 8 otherwise.
    pub replicates: Option<usize>,
    /// Seed of the calibration streams.
    pub seed: u64,
    /// Largest accepted relative standard error of the traces.
    pub noise_tolerance: f64,
}

impl Default for SelfLoopOptions {
    fn default() -> Self {
        SelfLoopOptions {
            n_cal: None,
            replicates: None,
            seed: 0,
            noise_tolerance: 1e-2,
        }
    }
}

/// The twelve order parameters.
///
/// When `tau gamma < 1` (`rescaled = true`) the raw values diverge or vanish
/// as `r -> 0`; the fields then hold the finite combinations
/// `2 rho q_k`, `q_hat_k / (2 rho)`, `m_hat_k / rho` and `p_hat_k / rho^2`
/// with `rho = tau r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfLoopOrderParams {
    /// Training part of the label overlap.
    pub m0: f64,
    /// Test part of the label overlap.
    pub m1: f64,
    /// Training part of the output variance.
    pub p0: f64,
    /// Test part of the output variance.
    pub p1: f64,
    /// Training part of the susceptibility.
    pub q0: f64,
    /// Test part of the susceptibility.
    pub q1: f64,
    /// Conjugate of `m0`.
    pub m_hat0: f64,
    /// Conjugate of `m1`.
    pub m_hat1: f64,
    /// Conjugate of `p0`.
    pub p_hat0: f64,
    /// Conjugate of `p1`.
    pub p_hat1: f64,
    /// Conjugate of `q0`.
    pub q_hat0: f64,
    /// Conjugate of `q1`.
    pub q_hat1: f64,
    /// Whether the fields hold the rescaled interpolating-regime values.
    pub rescaled: bool,
}

/// Order parameters, prediction and, at `(tau, gamma) = (0.8, 5)`, the
/// Monte Carlo and closed-form values of `U / F` at the solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfLoopSolution {
    /// Stationary point.
    pub params: SelfLoopOrderParams,
    /// Risks and test-output law.
    pub prediction: TheoryPrediction,
    /// `(Monte Carlo, closed form)` values of `U / F`.
    pub u_check: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Regime {
    /// `tau gamma > 1`: the training Gram matrix is invertible.
    Pencil,
    /// `tau gamma < 1`: the ridgeless fit interpolates the training labels.
    Interpolating,
}

enum Replicate {
    /// Generalised eigenvalues of `(Y0, Y0 + Y1)`.
    Pencil(Vec<f64>),
    /// Node Gram matrix `X X^T` (used when `N <= F`), training rows first.
    Dual(Mat<f64>),
    /// Feature-side matrices `Y0` and `Y1`.
    Primal(Mat<f64>, Mat<f64>),
}

struct Calibration {
    n: usize,
    n_train: usize,
    f: usize,
    reps: Vec<Replicate>,
}

/// Trace averages `w_k` and `v_jk`, plus per-replicate `w` for the noise check.
struct Traces {
    w: [f64; 2],
    v: [[f64; 2]; 2],
    w_reps: Vec<[f64; 2]>,
}

fn sample_x(n: usize, f: usize, seed: u64, rep: usize) -> Mat<f64> {
    let mut rng = substream(seed, rep as u64, Purpose::Calibration, 0);
    let scale = 1.0 / (f as f64).sqrt();
    Mat::from_fn(n, f, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        z * scale
    })
}

fn pencil_eigenvalues(x: &Mat<f64>, m: usize) -> Result<Vec<f64>> {
    let s = x.transpose() * x;
    let llt = s
        .llt(Side::Lower)
        .map_err(|e| Error::LinearAlgebra(format!("calibration Gram matrix not positive definite: {e:?}")))?;
    let mut z = x.subrows(0, m).transpose().to_owned();
    solve_lower_triangular_in_place(llt.L(), z.as_mut(), Par::Seq);
    let c = &z * z.transpose();
    let nus = c
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::LinearAlgebra(format!("eigenvalue solver failed: {e:?}")))?;
    Ok(nus.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
}

impl Calibration {
    fn sample(n: usize, gamma: f64, tau: f64, reps: usize, seed: u64, regime: Regime) -> Result<Self> {
        let f = ((n as f64) / gamma).round() as usize;
        let m = ((n as f64) * tau).round() as usize;
        if f == 0 || m == 0 || m >= n {
            return Err(Error::invalid(format!(
                "calibration size N_cal={n} too small for gamma={gamma}, tau={tau}"
            )));
        }
        if regime == Regime::Pencil && n <= f {
            return Err(Error::invalid("pencil traces need N_cal > F_cal"));
        }
        let reps = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let x = sample_x(n, f, seed, rep);
                match regime {
                    Regime::Pencil => pencil_eigenvalues(&x, m).map(Replicate::Pencil),
                    Regime::Interpolating if n <= f => Ok(Replicate::Dual(&x * x.transpose())),
                    Regime::Interpolating => {
                        let x0 = x.subrows(0, m);
                        let x1 = x.subrows(m, n - m);
                        Ok(Replicate::Primal(x0.transpose() * x0, x1.transpose() * x1))
                    }
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Calibration { n, n_train: m, f, reps })
    }

    /// Traces at conjugates `h`: of `G = (h0 Y0 + h1 Y1)^{-1}` for pencil
    /// replicates, of `H = (h0 Y0 + h1 Y1 + I)^{-1}` otherwise.
    fn traces(&self, h: [f64; 2]) -> Result<Traces> {
        let per_rep = self
            .reps
            .par_iter()
            .map(|rep| self.replicate_traces(rep, h))
            .collect::<Result<Vec<_>>>()?;
        let k = per_rep.len() as f64;
        let mut w = [0.0; 2];
        let mut v = [[0.0; 2]; 2];
        for (wr, vr) in &per_rep {
            for i in 0..2 {
                w[i] += wr[i] / k;
                for j in 0..2 {
                    v[i][j] += vr[i][j] / k;
                }
            }
        }
        Ok(Traces {
            w,
            v,
            w_reps: per_rep.iter().map(|(wr, _)| *wr).collect(),
        })
    }

    fn replicate_traces(&self, rep: &Replicate, h: [f64; 2]) -> Result<([f64; 2], [[f64; 2]; 2])> {
        let n = self.n as f64;
        let mut w = [0.0; 2];
        let mut v = [[0.0; 2]; 2];
        match rep {
            Replicate::Pencil(nus) => {
                for &nu in nus {
                    let parts = [nu, 1.0 - nu];
                    let den = h[0] * nu + h[1] * (1.0 - nu);
                    for i in 0..2 {
                        w[i] += parts[i] / den;
                        for j in 0..2 {
                            v[i][j] += parts[i] * parts[j] / (den * den);
                        }
                    }
                }
            }
            Replicate::Dual(k) => {
                // X H X^T = (K S + I)^{-1} K with S the diagonal of conjugates.
                let size = self.n;
                let a = Mat::from_fn(size, size, |i, j| {
                    let s = if j < self.n_train { h[0] } else { h[1] };
                    k[(i, j)] * s + if i == j { 1.0 } else { 0.0 }
                });
                let q = a.partial_piv_lu().solve(k);
                let block = |i: usize| usize::from(i >= self.n_train);
                for i in 0..size {
                    w[block(i)] += q[(i, i)];
                    for l in 0..size {
                        v[block(i)][block(l)] += q[(i, l)] * q[(l, i)];
                    }
                }
            }
            Replicate::Primal(y0, y1) => {
                let f = self.f;
                let a = Mat::from_fn(f, f, |i, j| {
                    h[0] * y0[(i, j)] + h[1] * y1[(i, j)] + if i == j { 1.0 } else { 0.0 }
                });
                let llt = a
                    .llt(Side::Lower)
                    .map_err(|e| Error::LinearAlgebra(format!("trace estimator: {e:?}")))?;
                let hinv = llt.solve(Mat::<f64>::identity(f, f));
                let c = [y0 * &hinv, y1 * &hinv];
                for i in 0..2 {
                    w[i] = (0..f).map(|t| c[i][(t, t)]).sum();
                    for j in 0..2 {
                        let mut acc = 0.0;
                        for col in 0..f {
                            for row in 0..f {
                                acc += c[i][(row, col)] * c[j][(col, row)];
                            }
                        }
                        v[i][j] = acc;
                    }
                }
            }
        }
        for i in 0..2 {
            w[i] /= n;
            for j in 0..2 {
                v[i][j] /= n;
            }
        }
        Ok((w, v))
    }
}

fn solve2(a: [[f64; 2]; 2], b: [f64; 2]) -> Option<[f64; 2]> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([
        (b[0] * a[1][1] - a[0][1] * b[1]) / det,
        (a[0][0] * b[1] - b[0] * a[1][0]) / det,
    ])
}

/// Right-hand sides of the conjugate equations as functions of the traces
/// `w`, with their Jacobian in `w`.
fn conjugate_targets(regime: Regime, c: f64, tau: f64, w: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
    let c2 = c * c;
    let total = w[0] + w[1];
    match regime {
        Regime::Pencil => {
            let d = 1.0 + 2.0 * total;
            let common = 4.0 * c2 * w[0] / (d * d);
            let t = [2.0 * (c2 + tau) / d - common, 2.0 * tau / d - common];
            let lead = [-4.0 * (c2 + tau) / (d * d), -4.0 * tau / (d * d)];
            let cross = 16.0 * c2 * w[0] / (d * d * d);
            let own = -4.0 * c2 / (d * d);
            let jac = [
                [lead[0] + own + cross, lead[0] + cross],
                [lead[1] + own + cross, lead[1] + cross],
            ];
            (t, jac)
        }
        Regime::Interpolating => {
            let w2 = total * total;
            let common = c2 * w[0] / w2;
            let t = [(c2 + tau) / total - common, tau / total - common];
            let lead = [-(c2 + tau) / w2, -tau / w2];
            let cross = 2.0 * c2 * w[0] / (w2 * total);
            let own = -c2 / w2;
            let jac = [
                [lead[0] + own + cross, lead[0] + cross],
                [lead[1] + own + cross, lead[1] + cross],
            ];
            (t, jac)
        }
    }
}

fn max_abs2(v: [f64; 2]) -> f64 {
    v[0].abs().max(v[1].abs())
}

/// Newton iteration in `log h` for the conjugates `h = (q_hat0, q_hat1)`
/// (or their rescaled versions).
fn solve_conjugates(cal: &Calibration, regime: Regime, c: f64, tau: f64) -> Result<([f64; 2], Traces)> {
    let residual = |x: [f64; 2]| -> Result<Option<([f64; 2], [f64; 2], Traces, [[f64; 2]; 2])>> {
        let h = [x[0].exp(), x[1].exp()];
        let tr = cal.traces(h)?;
        let (t, jac_w) = conjugate_targets(regime, c, tau, tr.w);
        if !(t[0] > 0.0 && t[1] > 0.0) {
            return Ok(None);
        }
        let res = [t[0].ln() - x[0], t[1].ln() - x[1]];
        Ok(Some((res, t, tr, jac_w)))
    };
    let start = match regime {
        Regime::Pencil => 2.0 * tau,
        Regime::Interpolating => 1.0,
    };
    let mut x = [start.ln(); 2];
    let mut state = residual(x)?
        .ok_or_else(|| Error::diverged("self-loop conjugates: infeasible starting point", vec![]))?;
    let mut trace = vec![max_abs2(state.0)];
    for _ in 0..NEWTON_MAX_ITER {
        if max_abs2(state.0) < NEWTON_TOLERANCE {
            return Ok(([x[0].exp(), x[1].exp()], state.2));
        }
        let (res, t, tr, jac_w) = &state;
        let h = [x[0].exp(), x[1].exp()];
        // d res_i / d x_j = (1/t_i) sum_k (dt_i/dw_k)(-v_kj) h_j - delta_ij.
        let mut jac = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let dw: f64 = (0..2).map(|k| jac_w[i][k] * (-tr.v[k][j])).sum();
                jac[i][j] = dw * h[j] / t[i] - if i == j { 1.0 } else { 0.0 };
            }
        }
        let step = solve2(jac, [-res[0], -res[1]])
            .ok_or_else(|| Error::diverged("self-loop conjugates: singular Jacobian", trace.clone()))?;
        let norm = max_abs2(*res);
        let mut alpha = 1.0;
        let mut next = None;
        for _ in 0..40 {
            let cand = [x[0] + alpha * step[0], x[1] + alpha * step[1]];
            if let Some(s) = residual(cand)? {
                if max_abs2(s.0) < norm {
                    next = Some((cand, s));
                    break;
                }
            }
            alpha *= 0.5;
        }
        match next {
            Some((cand, s)) => {
                x = cand;
                state = s;
                trace.push(max_abs2(state.0));
            }
            None => break,
        }
    }
    if max_abs2(state.0) < NEWTON_TOLERANCE * 1e3 {
        return Ok(([x[0].exp(), x[1].exp()], state.2));
    }
    Err(Error::diverged("self-loop conjugate equations did not converge", trace))
}

fn check_noise(tr: &Traces, tolerance: f64) -> Result<()> {
    let k = tr.w_reps.len();
    if k < 2 {
        return Ok(());
    }
    let values: Vec<f64> = tr.w_reps.iter().map(|w| w[0]).collect();
    let stat = crate::stats::Stat::from_values(&values).expect("non-empty replicate set");
    let rel = stat.std_error() / stat.mean.abs();
    if !(rel <= tolerance) {
        return Err(Error::EstimatorNoisy {
            relative_error: rel,
            tolerance,
        });
    }
    Ok(())
}

/// Self-loop prediction with default estimator settings.
pub fn selfloop_theory(lambda: f64, gamma: f64, tau: f64, c: f64) -> Result<TheoryPrediction> {
    Ok(selfloop_theory_with(lambda, gamma, tau, c, &SelfLoopOptions::default())?.prediction)
}

/// Self-loop prediction at `mu = 0`, `r -> 0`, for intensity `c`.
pub fn selfloop_theory_with(
    lambda: f64,
    gamma: f64,
    tau: f64,
    c: f64,
    opts: &SelfLoopOptions,
) -> Result<SelfLoopSolution> {
    if !lambda.is_finite() || !c.is_finite() {
        return Err(Error::invalid("lambda and c must be finite"));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid(format!("gamma must be finite and > 0, got {gamma}")));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::invalid(format!(
            "the self-loop prediction needs a test set: tau must lie in (0, 1), got {tau}"
        )));
    }
    let tg = tau * gamma;
    if (tg - 1.0).abs() <= INTERPOLATION_GUARD {
        return Err(Error::InterpolationRegion { product: tg });
    }
    let regime = if tg > 1.0 { Regime::Pencil } else { Regime::Interpolating };
    let (default_n, default_reps) = match regime {
        Regime::Pencil => (4000, 16),
        Regime::Interpolating => (1000, 8),
    };
    let n_cal = opts.n_cal.unwrap_or(default_n);
    let reps = opts.replicates.unwrap_or(default_reps);
    if reps == 0 {
        return Err(Error::invalid("replicates must be positive"));
    }
    let cal = Calibration::sample(n_cal, gamma, tau, reps, opts.seed, regime)?;
    let (hats, tr) = solve_conjugates(&cal, regime, c, tau)?;
    check_noise(&tr, opts.noise_tolerance)?;

    // Normalised traces shared by both regimes.
    let (ratio, vn, z0, d) = match regime {
        Regime::Pencil => {
            let d = 1.0 + 2.0 * (tr.w[0] + tr.w[1]);
            let vn = tr.v.map(|row| row.map(|x| x / (d * d)));
            ([tr.w[0] / d, tr.w[1] / d], vn, tr.w[0] / d, d)
        }
        Regime::Interpolating => {
            let w = tr.w[0] + tr.w[1];
            let vn = tr.v.map(|row| row.map(|x| x / (4.0 * w * w)));
            ([tr.w[0] / (2.0 * w), tr.w[1] / (2.0 * w)], vn, tr.w[0] / (2.0 * w), w)
        }
    };

    // Overlaps: m_k = -Dm_k(m) ratio_k, linear in (m0, m1).
    let dm = |m: [f64; 2]| {
        let e = 1.0 - lambda * (m[0] + m[1]);
        [
            -2.0 * (tau * lambda + c) * e + 2.0 * c * lambda * m[0],
            -2.0 * tau * lambda * e + 2.0 * c * lambda * m[0],
        ]
    };
    let m_res = |m: [f64; 2]| {
        let g = dm(m);
        [m[0] + g[0] * ratio[0], m[1] + g[1] * ratio[1]]
    };
    let m = solve_linear(m_res).ok_or_else(|| Error::diverged("overlap equations are singular", vec![]))?;
    let dmv = dm(m);
    let e = 1.0 - lambda * (m[0] + m[1]);
    let c2 = c * c;

    // Variances: p_k = sum_j (Dm_j^2 + DP_j(p)) vn_jk, linear in (p0, p1).
    let dp = |p: [f64; 2]| {
        let total = p[0] + p[1];
        let b0 = tau * e * e - 2.0 * c * e * m[0] + c2 * p[0];
        let base = 4.0 * (b0 + tau * total) - 16.0 * c2 * total * z0;
        [base + 4.0 * c2 * total, base]
    };
    let p_res = |p: [f64; 2]| {
        let g = dp(p);
        let s = [dmv[0] * dmv[0] + g[0], dmv[1] * dmv[1] + g[1]];
        [
            p[0] - (s[0] * vn[0][0] + s[1] * vn[1][0]),
            p[1] - (s[0] * vn[0][1] + s[1] * vn[1][1]),
        ]
    };
    let p = solve_linear(p_res).ok_or_else(|| Error::diverged("variance equations are singular", vec![]))?;
    let dpv = dp(p);
    let total_p = p[0] + p[1];

    let b0 = tau * e * e - 2.0 * c * e * m[0] + c2 * p[0];
    let b1 = (1.0 - tau) * e * e - 2.0 * c * e * m[1] + c2 * p[1];
    let r_train = match regime {
        Regime::Pencil => ((b0 + tau * total_p) - 4.0 * c2 * total_p * z0) / (d * d) / tau,
        Regime::Interpolating => 0.0,
    };
    let r_test = b1 / (1.0 - tau) + total_p;
    let m1t = m[1] / (1.0 - tau);
    let mean = lambda * (m[0] + m[1]) + c * m1t;
    let variance = total_p + c2 * (p[1] / (1.0 - tau) - m1t * m1t);
    let prediction = TheoryPrediction {
        r_train,
        r_test,
        acc: gaussian_accuracy(mean, variance),
        mean,
        variance,
    };
    let (hat_scale, p_scale) = (d, d * d);
    let params = SelfLoopOrderParams {
        m0: m[0],
        m1: m[1],
        p0: p[0],
        p1: p[1],
        q0: tr.w[0],
        q1: tr.w[1],
        m_hat0: dmv[0] / hat_scale,
        m_hat1: dmv[1] / hat_scale,
        p_hat0: dpv[0] / p_scale,
        p_hat1: dpv[1] / p_scale,
        q_hat0: hats[0],
        q_hat1: hats[1],
        rescaled: regime == Regime::Interpolating,
    };

    let u_check = if regime == Regime::Pencil && (tau - 0.8).abs() < 1e-12 && (gamma - 5.0).abs() < 1e-12 {
        let (a, b, cc, dd) = (params.p_hat0, params.p_hat1, params.q_hat0, params.q_hat1);
        let mc = cal
            .reps
            .iter()
            .map(|rep| match rep {
                Replicate::Pencil(nus) => pencil_u(nus, a, b, cc, dd),
                _ => unreachable!("pencil regime stores eigenvalues"),
            })
            .sum::<f64>()
            / (cal.reps.len() as f64 * cal.f as f64);
        let cf = u_closed_form_tau08_gamma5(a, b, cc, dd, 1.0);
        let rel = ((mc - cf) / cf).abs();
        if !(rel <= CLOSED_FORM_TOLERANCE) {
            return Err(Error::EstimatorNoisy {
                relative_error: rel,
                tolerance: CLOSED_FORM_TOLERANCE,
            });
        }
        Some((mc, cf))
    } else {
        None
    };
    Ok(SelfLoopSolution { params, prediction, u_check })
}

/// Solves the 2x2 affine system `f(x) = 0` from evaluations of `f`.
fn solve_linear(f: impl Fn([f64; 2]) -> [f64; 2]) -> Option<[f64; 2]> {
    let r0 = f([0.0, 0.0]);
    let c0 = f([1.0, 0.0]);
    let c1 = f([0.0, 1.0]);
    let a = [[c0[0] - r0[0], c1[0] - r0[0]], [c0[1] - r0[1], c1[1] - r0[1]]];
    solve2(a, [-r0[0], -r0[1]])
}

fn pencil_u(nus: &[f64], a: f64, b: f64, c: f64, d: f64) -> f64 {
    nus.iter()
        .map(|&nu| (a * nu + b * (1.0 - nu)) / (c * nu + d * (1.0 - nu)))
        .sum()
}

/// Monte Carlo estimate of `U(a, b, c, d) = E Tr[(a Y0 + b Y1)(c Y0 + d Y1)^{-1}]`.
///
/// Returns the mean over `replicates` calibration matrices of size `n_cal`
/// and its standard error. Requires `gamma > 1` so that `Y0 + Y1` is
/// invertible.
pub fn u_trace_monte_carlo(
    (a, b, c, d): (f64, f64, f64, f64),
    tau: f64,
    gamma: f64,
    n_cal: usize,
    replicates: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if !(tau > 0.0 && tau < 1.0) || !(gamma > 1.0) {
        return Err(Error::invalid("U estimator needs tau in (0, 1) and gamma > 1"));
    }
    if replicates == 0 {
        return Err(Error::invalid("replicates must be positive"));
    }
    let cal = Calibration::sample(n_cal, gamma, tau, replicates, seed, Regime::Pencil)?;
    let values: Vec<f64> = cal
        .reps
        .iter()
        .map(|rep| match rep {
            Replicate::Pencil(nus) => pencil_u(nus, a, b, c, d),
            _ => unreachable!("pencil calibration stores eigenvalues"),
        })
        .collect();
    let stat = crate::stats::Stat::from_values(&values).expect("non-empty replicate set");
    let se = if values.len() > 1 { stat.std_error() } else { 0.0 };
    Ok((stat.mean, se))
}

/// Large-size value of `U(a, b, c, d)` for `tau = 0.8`, `gamma = 5` and
/// feature dimension `f`, built from the Marchenko-Pastur laws of `Y0` and
/// `Y1`.
pub fn u_closed_form_tau08_gamma5(a: f64, b: f64, c: f64, d: f64, f: f64) -> f64 {
    let eval = |t: f64| {
        // t = d / c; s = c / d.
        let s = 1.0 / t;
        let test_part = (-2.0 * t + (9.0 + 16.0 * t).sqrt() - 3.0) / (2.0 * t * (t - 1.0));
        let train_part = (5.0 - ((9.0 * s + 16.0) / s).sqrt()) / (2.0 - 2.0 * s);
        // With G = (c Y0 + d Y1)^{-1}: Tr(Y1 G) = -F test_part / c and
        // Tr(Y0 G) = -F train_part / d.
        -a * f / d * train_part - b * f / c * test_part
    };
    let t = d / c;
    if (t - 1.0).abs() < 1e-6 {
        // Removable singularity at c = d.
        0.5 * (eval(t * (1.0 + 1e-4)) + eval(t * (1.0 - 1e-4)))
    } else {
        eval(t)
    }
}
