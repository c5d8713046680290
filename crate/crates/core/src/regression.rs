//! Linear graph convolution `h = P(A) X w` fitted by closed-form ridge
//! regression on the labelled nodes, and the resulting risks and accuracy.

use std::fmt;
use std::str::FromStr;

use faer::prelude::*;
use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::csbm::{AdjacencyMatrix, Labels, TrainTestSplit};
use crate::error::{Error, Result};

/// Relative cutoff of the pseudoinverse: singular values below
/// `PINV_EPS * sigma_max * max(N, F)` are discarded.
pub const PINV_EPS: f64 = 1e-12;

/// Smallest ratio between the extreme Cholesky pivots that is accepted in
/// the ridgeless solve before falling back to the SVD pseudoinverse (the
/// normal matrix then has condition number above `1 / ratio^2 = 1e14`).
const CHOLESKY_PIVOT_RATIO: f64 = 1e-7;

/// Polynomial graph filter `P(A) = sum_k c_k A^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFilter {
    coeffs: Vec<f64>,
}

impl GraphFilter {
    /// Filter with coefficients `(c_0, ..., c_K)`; trailing zeros are kept.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::invalid("filter needs at least one coefficient"));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("filter coefficients must be finite"));
        }
        Ok(GraphFilter { coeffs })
    }

    /// `P(A) = I`: plain linear regression on the features.
    pub fn identity() -> Self {
        GraphFilter { coeffs: vec![1.0] }
    }

    /// `P(A) = A`.
    pub fn one_hop() -> Self {
        GraphFilter { coeffs: vec![0.0, 1.0] }
    }

    /// `P(A) = A + c I`.
    pub fn self_loop(c: f64) -> Self {
        GraphFilter { coeffs: vec![c, 1.0] }
    }

    /// `P(A) = A^2`.
    pub fn two_hop() -> Self {
        GraphFilter {
            coeffs: vec![0.0, 0.0, 1.0],
        }
    }

    /// Coefficients `(c_0, ..., c_K)`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Support size `K` in hops.
    pub fn hops(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `Some(c)` if the filter is `A + c I`.
    pub fn self_loop_intensity(&self) -> Option<f64> {
        (self.coeffs.len() == 2 && self.coeffs[1] == 1.0).then_some(self.coeffs[0])
    }
}

impl fmt::Display for GraphFilter {
    /// Coefficients joined by `;` (so the value survives inside CSV cells).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coeffs.iter().map(|c| c.to_string()).collect();
        f.write_str(&parts.join(";"))
    }
}

impl FromStr for GraphFilter {
    type Err = Error;

    /// Accepts `;`- or `,`-separated coefficients, or one of the names
    /// `identity`, `one-hop`, `two-hop`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "identity" => return Ok(GraphFilter::identity()),
            "one-hop" | "a" | "A" => return Ok(GraphFilter::one_hop()),
            "two-hop" | "a2" | "A2" => return Ok(GraphFilter::two_hop()),
            _ => {}
        }
        let coeffs = s
            .split([';', ','])
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::invalid(format!("filter coefficient '{t}' is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        GraphFilter::new(coeffs)
    }
}

/// Design matrix `Phi = P(A) X`, evaluated by Horner's scheme so that no
/// power `A^k` is ever formed.
pub fn build_design(a: &AdjacencyMatrix, x: &Mat<f64>, filter: &GraphFilter) -> Result<Mat<f64>> {
    if x.nrows() != a.n() {
        return Err(Error::invalid(format!(
            "feature matrix has {} rows but the graph has {} nodes",
            x.nrows(),
            a.n()
        )));
    }
    let coeffs = filter.coeffs();
    let top = coeffs[coeffs.len() - 1];
    let mut phi = scaled(x, top);
    for &c in coeffs[..coeffs.len() - 1].iter().rev() {
        phi = a.mul(&phi);
        if c != 0.0 {
            add_scaled(&mut phi, x, c);
        }
    }
    Ok(phi)
}

fn scaled(x: &Mat<f64>, c: f64) -> Mat<f64> {
    if c == 1.0 {
        x.clone()
    } else {
        Mat::from_fn(x.nrows(), x.ncols(), |i, j| c * x[(i, j)])
    }
}

pub(crate) fn add_scaled(dst: &mut Mat<f64>, x: &Mat<f64>, c: f64) {
    for j in 0..x.ncols() {
        let src = x.col_as_slice(j);
        for (d, s) in dst.col_as_slice_mut(j).iter_mut().zip(src) {
            *d += c * s;
        }
    }
}

/// Trained weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    /// Weight vector of length `F`.
    pub w: Vec<f64>,
}

/// Rows of `phi` listed in `rows`.
pub(crate) fn select_rows(phi: &Mat<f64>, rows: &[usize]) -> Mat<f64> {
    Mat::from_fn(rows.len(), phi.ncols(), |i, k| phi[(rows[i], k)])
}

/// Closed-form ridge solution `w = (r I + Phi_tr^T Phi_tr)^{-1} Phi_tr^T y_tr`.
///
/// For `r = 0` the minimum-norm least-squares solution is returned (the
/// pseudoinverse solution). The smaller of the `F x F` normal matrix and the
/// `M x M` Gram matrix of the training rows is factorised; both give the same
/// weights. Badly conditioned ridgeless problems fall back to a truncated SVD.
pub fn fit_ridge(phi: &Mat<f64>, y: &Labels, split: &TrainTestSplit, r: f64) -> Result<Weights> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::invalid(format!("ridge r must be finite and >= 0, got {r}")));
    }
    if y.len() != phi.nrows() {
        return Err(Error::invalid("label vector length must equal design rows"));
    }
    let train = split.train();
    if train.is_empty() {
        return Err(Error::invalid("the training set is empty"));
    }
    let phi_tr = select_rows(phi, train);
    let y_tr = Col::from_fn(train.len(), |i| y.get(train[i]));
    let max_dim = phi.nrows().max(phi.ncols());
    solve_ridge(&phi_tr, &y_tr, r, max_dim)
}

/// Ridge solve on an explicit training design.
pub(crate) fn solve_ridge(phi_tr: &Mat<f64>, y_tr: &Col<f64>, r: f64, max_dim: usize) -> Result<Weights> {
    let (m, f) = (phi_tr.nrows(), phi_tr.ncols());
    let w = if m >= f {
        let mut g = phi_tr.transpose() * phi_tr;
        for k in 0..f {
            g[(k, k)] += r;
        }
        let b = phi_tr.transpose() * y_tr;
        cholesky_solve(&g, &b, r)
    } else {
        let mut k = phi_tr * phi_tr.transpose();
        for i in 0..m {
            k[(i, i)] += r;
        }
        cholesky_solve(&k, y_tr, r).map(|alpha| phi_tr.transpose() * alpha)
    };
    let w = match w {
        Some(w) => w,
        None => svd_solve(phi_tr, y_tr, r, max_dim)?,
    };
    Ok(Weights {
        w: (0..w.nrows()).map(|i| w[i]).collect(),
    })
}

/// Solves `g x = b` by Cholesky; `None` if `g` is not numerically positive
/// definite or, for `r = 0`, too badly conditioned to trust.
pub(crate) fn cholesky_solve(g: &Mat<f64>, b: &Col<f64>, r: f64) -> Option<Col<f64>> {
    let llt = g.llt(Side::Lower).ok()?;
    if r == 0.0 {
        let l = llt.L();
        let diag: Vec<f64> = (0..l.nrows()).map(|i| l[(i, i)].abs()).collect();
        let max = diag.iter().cloned().fold(0.0, f64::max);
        let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(min > CHOLESKY_PIVOT_RATIO * max) {
            return None;
        }
    }
    Some(llt.solve(b.as_ref()))
}

fn svd_solve(phi_tr: &Mat<f64>, y_tr: &Col<f64>, r: f64, max_dim: usize) -> Result<Col<f64>> {
    let svd = phi_tr
        .thin_svd()
        .map_err(|e| Error::LinearAlgebra(format!("thin SVD failed: {e:?}")))?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let sigma_max = (0..s.nrows()).map(|i| s[i]).fold(0.0, f64::max);
    let cutoff = PINV_EPS * sigma_max * max_dim as f64;
    let uty = u.transpose() * y_tr;
    let mut coef = Col::<f64>::zeros(s.nrows());
    for i in 0..s.nrows() {
        let si = s[i];
        coef[i] = if r > 0.0 {
            si / (si * si + r) * uty[i]
        } else if si > cutoff {
            uty[i] / si
        } else {
            0.0
        };
    }
    Ok(v * coef)
}

/// Network outputs `h = Phi w`.
pub fn predict(phi: &Mat<f64>, w: &Weights) -> Vec<f64> {
    let wc = Col::from_fn(w.w.len(), |i| w.w[i]);
    let h = phi * wc;
    (0..h.nrows()).map(|i| h[i]).collect()
}

/// Ridge objective `||y_tr - Phi_tr w||^2 + r ||w||^2`.
pub fn ridge_objective(phi: &Mat<f64>, w: &Weights, y: &Labels, split: &TrainTestSplit, r: f64) -> f64 {
    let h = predict(phi, w);
    let fit: f64 = split.train().iter().map(|&i| (y.get(i) - h[i]).powi(2)).sum();
    fit + r * w.w.iter().map(|v| v * v).sum::<f64>()
}

/// Mean and variance of the test outputs of one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    /// Number of test nodes in the class.
    pub count: usize,
    /// Mean output (NaN for an empty class).
    pub mean: f64,
    /// Population variance of the outputs (NaN for an empty class).
    pub variance: f64,
}

impl ClassStats {
    fn of(values: &[f64]) -> Self {
        let count = values.len();
        let mean = values.iter().sum::<f64>() / count as f64;
        let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count as f64;
        ClassStats { count, mean, variance }
    }
}

/// Test-set part of a [`RiskReport`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    /// Mean squared error on test nodes.
    pub r_test: f64,
    /// Fraction of test nodes with `y_i = sign(h_i)`, where `sign(0) = +1`.
    pub acc: f64,
    /// Output statistics of the `+1` class.
    pub positive: ClassStats,
    /// Output statistics of the `-1` class.
    pub negative: ClassStats,
}

/// Empirical risks of a fitted model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    /// Mean squared error on training nodes.
    pub r_train: f64,
    /// Test metrics; `None` when every node is labelled.
    pub test: Option<TestReport>,
}

/// Evaluates train/test risks, accuracy and per-class output statistics.
pub fn evaluate(phi: &Mat<f64>, w: &Weights, y: &Labels, split: &TrainTestSplit) -> Result<RiskReport> {
    if w.w.len() != phi.ncols() || y.len() != phi.nrows() {
        return Err(Error::invalid("dimension mismatch in evaluate"));
    }
    Ok(report_from_outputs(&predict(phi, w), y, split))
}

/// Risk report for precomputed outputs `h`.
pub fn report_from_outputs(h: &[f64], y: &Labels, split: &TrainTestSplit) -> RiskReport {
    let sq = |i: usize| (y.get(i) - h[i]).powi(2);
    let train = split.train();
    let r_train = train.iter().map(|&i| sq(i)).sum::<f64>() / train.len() as f64;
    let test_nodes = split.test();
    let test = (!test_nodes.is_empty()).then(|| {
        let r_test = test_nodes.iter().map(|&i| sq(i)).sum::<f64>() / test_nodes.len() as f64;
        let correct = test_nodes
            .iter()
            .filter(|&&i| {
                let pred = if h[i] >= 0.0 { 1.0 } else { -1.0 };
                pred == y.get(i)
            })
            .count();
        let class = |s: f64| {
            let vals: Vec<f64> = test_nodes.iter().filter(|&&i| y.get(i) == s).map(|&i| h[i]).collect();
            ClassStats::of(&vals)
        };
        TestReport {
            r_test,
            acc: correct as f64 / test_nodes.len() as f64,
            positive: class(1.0),
            negative: class(-1.0),
        }
    });
    RiskReport { r_train, test }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csbm::{generate_labels, CsbmConfig, Dataset, Ensemble};

    fn small() -> (Mat<f64>, Labels, TrainTestSplit) {
        let mut cfg = CsbmConfig::new(8, 2.0);
        cfg.d = 3.0;
        cfg.lambda = 0.5;
        cfg.tau = 0.75;
        let ds = Dataset::generate(&cfg, 0).unwrap();
        let phi = build_design(&ds.adjacency, &ds.features.x, &GraphFilter::one_hop()).unwrap();
        (phi, ds.labels, ds.split)
    }

    /// Gaussian elimination with partial pivoting, independent of faer.
    fn oracle_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for row in (col + 1)..n {
                let f = a[row][col] / a[col][col];
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = ((i + 1)..n).map(|k| a[i][k] * x[k]).sum();
            x[i] = (b[i] - s) / a[i][i];
        }
        x
    }

    #[test]
    fn design_examples() {
        let mut cfg = CsbmConfig::new(20, 2.0);
        cfg.d = 5.0;
        cfg.ensemble = Ensemble::GaussianSymmetric;
        let ds = Dataset::generate(&cfg, 1).unwrap();
        let x = &ds.features.x;
        let a = &ds.adjacency;
        assert_eq!(&build_design(a, x, &GraphFilter::identity()).unwrap(), x);
        let ax = a.entries() * x;
        let one = build_design(a, x, &GraphFilter::one_hop()).unwrap();
        let loop_ = build_design(a, x, &GraphFilter::self_loop(-0.7)).unwrap();
        let two = build_design(a, x, &GraphFilter::two_hop()).unwrap();
        let aax = a.entries() * &ax;
        for i in 0..20 {
            for k in 0..x.ncols() {
                assert!((one[(i, k)] - ax[(i, k)]).abs() < 1e-14);
                assert!((loop_[(i, k)] - (ax[(i, k)] - 0.7 * x[(i, k)])).abs() < 1e-14);
                assert!((two[(i, k)] - aax[(i, k)]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn filter_parsing_roundtrip() {
        let f: GraphFilter = "-0.5;1".parse().unwrap();
        assert_eq!(f, GraphFilter::self_loop(-0.5));
        assert_eq!(f.to_string().parse::<GraphFilter>().unwrap(), f);
        assert_eq!("two-hop".parse::<GraphFilter>().unwrap(), GraphFilter::two_hop());
        assert!("x".parse::<GraphFilter>().is_err());
        assert_eq!(GraphFilter::self_loop(2.0).self_loop_intensity(), Some(2.0));
        assert_eq!(GraphFilter::two_hop().self_loop_intensity(), None);
    }

    #[test]
    fn ridge_matches_independent_oracle() {
        let (phi, y, split) = small();
        let r = 0.5;
        let w = fit_ridge(&phi, &y, &split, r).unwrap();
        let f = phi.ncols();
        let tr = split.train();
        let mut a = vec![vec![0.0; f]; f];
        let mut b = vec![0.0; f];
        for p in 0..f {
            for q in 0..f {
                a[p][q] = tr.iter().map(|&i| phi[(i, p)] * phi[(i, q)]).sum::<f64>();
            }
            a[p][p] += r;
            b[p] = tr.iter().map(|&i| phi[(i, p)] * y.get(i)).sum();
        }
        let oracle = oracle_solve(a, b);
        for (wi, oi) in w.w.iter().zip(&oracle) {
            assert!((wi - oi).abs() < 1e-10, "{wi} vs {oi}");
        }
    }

    #[test]
    fn huge_ridge_shrinks_weights() {
        let (phi, y, split) = small();
        let r = 1e6;
        let w = fit_ridge(&phi, &y, &split, r).unwrap();
        let tr = split.train();
        let b: f64 = (0..phi.ncols())
            .map(|p| tr.iter().map(|&i| phi[(i, p)] * y.get(i)).sum::<f64>().powi(2))
            .sum::<f64>()
            .sqrt();
        let norm: f64 = w.w.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 1e-3 * b, "{norm} vs {b}");
        assert!(norm <= b / r * (1.0 + 1e-9));
    }

    #[test]
    fn ridgeless_interpolates_when_underdetermined() {
        let mut cfg = CsbmConfig::new(40, 0.5); // F = 80 > M
        cfg.d = 5.0;
        cfg.tau = 0.5;
        let ds = Dataset::generate(&cfg, 2).unwrap();
        let phi = build_design(&ds.adjacency, &ds.features.x, &GraphFilter::one_hop()).unwrap();
        let w = fit_ridge(&phi, &ds.labels, &ds.split, 0.0).unwrap();
        let rep = evaluate(&phi, &w, &ds.labels, &ds.split).unwrap();
        assert!(rep.r_train < 1e-10, "{}", rep.r_train);
    }

    #[test]
    fn rank_deficient_ridgeless_uses_pseudoinverse() {
        // Duplicate a column: the normal matrix is singular and the
        // minimum-norm solution splits the weight evenly.
        let y = generate_labels(6).unwrap();
        let split = TrainTestSplit::from_mask(vec![true; 6]);
        let col = [1.0, 2.0, 0.5, -1.0, -0.3, -2.0];
        let phi = Mat::from_fn(6, 2, |i, _| col[i]);
        let w = fit_ridge(&phi, &y, &split, 0.0).unwrap();
        assert!((w.w[0] - w.w[1]).abs() < 1e-12);
        let dot: f64 = col.iter().zip(y.as_slice()).map(|(a, b)| a * b).sum();
        let nrm: f64 = col.iter().map(|a| a * a).sum();
        assert!((w.w[0] + w.w[1] - dot / nrm).abs() < 1e-12);
    }

    #[test]
    fn zero_and_perfect_predictors() {
        let y = generate_labels(8).unwrap();
        let split = TrainTestSplit::from_mask(vec![true, false, true, false, true, false, true, false]);
        let zero = report_from_outputs(&[0.0; 8], &y, &split);
        assert_eq!(zero.r_train, 1.0);
        let t = zero.test.unwrap();
        assert_eq!((t.r_test, t.acc), (1.0, 0.5));
        let perfect = report_from_outputs(y.as_slice(), &y, &split);
        let t = perfect.test.unwrap();
        assert_eq!((perfect.r_train, t.r_test, t.acc), (0.0, 0.0, 1.0));
        assert_eq!((t.positive.mean, t.negative.mean), (1.0, -1.0));
        assert_eq!((t.positive.variance, t.negative.variance), (0.0, 0.0));
    }

    #[test]
    fn empty_test_set_has_train_only_report() {
        let y = generate_labels(4).unwrap();
        let split = TrainTestSplit::from_mask(vec![true; 4]);
        let rep = report_from_outputs(&[0.5, 0.5, -0.5, -0.5], &y, &split);
        assert!(rep.test.is_none());
        assert!((rep.r_train - 0.25).abs() < 1e-15);
    }

    #[test]
    fn negative_ridge_is_rejected() {
        let (phi, y, split) = small();
        assert!(matches!(fit_ridge(&phi, &y, &split, -1.0), Err(Error::InvalidConfig(_))));
    }
}
