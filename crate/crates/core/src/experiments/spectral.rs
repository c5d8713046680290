//! Spectral view of the self-loop filter `A + c I`.
//!
//! For a symmetric adjacency matrix the filter shares the eigenvectors of
//! `A` and shifts every eigenvalue by `c`. How much the filter reshapes a
//! band of the spectrum is summarised by the distortion ratio
//! `(lambda_a + c) / (lambda_b + c)`, which tends to 1 as `|c|` grows.

use faer::Side;
use serde::{Deserialize, Serialize};

use crate::csbm::AdjacencyMatrix;
use crate::error::{Error, Result};

/// Eigen-decomposition of `A` seen through the filter `A + c I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Eigenvalues of `A`, ascending.
    pub eigenvalues: Vec<f64>,
    /// Projections `<signal, u_i>` onto the matching unit eigenvectors.
    pub projections: Vec<f64>,
    /// Filter response `lambda_i + c`.
    pub response: Vec<f64>,
    /// Self-loop intensity.
    pub c: f64,
    /// `|<u_top, signal>| / |signal|` for the eigenvector of the largest eigenvalue.
    pub top_alignment: f64,
}

impl SpectrumReport {
    /// Distortion ratio of the band between eigenvalue indices `a` and `b`.
    pub fn band_distortion(&self, a: usize, b: usize) -> Result<f64> {
        let n = self.eigenvalues.len();
        if a >= n || b >= n {
            return Err(Error::invalid(format!("band [{a}, {b}] is outside 0..{n}")));
        }
        Ok(distortion_ratio(self.eigenvalues[a], self.eigenvalues[b], self.c))
    }
}

/// `(lambda_a + c) / (lambda_b + c)`.
pub fn distortion_ratio(lambda_a: f64, lambda_b: f64, c: f64) -> f64 {
    (lambda_a + c) / (lambda_b + c)
}

/// Eigen-decomposes a symmetric adjacency matrix and projects `signal` on
/// its eigenvectors.
///
/// Fails with [`Error::InvalidConfig`] for directed ensembles, asymmetric
/// entries or a signal of the wrong length.
pub fn spectral_analysis(a: &AdjacencyMatrix, signal: &[f64], c: f64) -> Result<SpectrumReport> {
    if !a.kind().is_symmetric() {
        return Err(Error::invalid(format!(
            "spectral analysis needs a symmetric ensemble, got '{}'",
            a.kind().code()
        )));
    }
    let m = a.entries();
    let n = m.nrows();
    if signal.len() != n {
        return Err(Error::invalid(format!("signal has length {}, expected {n}", signal.len())));
    }
    if !c.is_finite() {
        return Err(Error::invalid("self-loop intensity must be finite"));
    }
    for i in 0..n {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * (1.0 + m[(i, j)].abs()) {
                return Err(Error::invalid(format!("adjacency entries ({i}, {j}) are not symmetric")));
            }
        }
    }
    let eig = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::LinearAlgebra(format!("eigen decomposition failed: {e:?}")))?;
    let s = eig.S().column_vector();
    let u = eig.U();
    let eigenvalues: Vec<f64> = (0..n).map(|i| s[i]).collect();
    let projections: Vec<f64> = (0..n)
        .map(|k| (0..n).map(|i| u[(i, k)] * signal[i]).sum())
        .collect();
    let response = eigenvalues.iter().map(|l| l + c).collect();
    let norm = signal.iter().map(|v| v * v).sum::<f64>().sqrt();
    let top = (0..n)
        .max_by(|&i, &j| eigenvalues[i].total_cmp(&eigenvalues[j]))
        .ok_or_else(|| Error::invalid("empty adjacency matrix"))?;
    let top_alignment = if norm > 0.0 { projections[top].abs() / norm } else { 0.0 };
    Ok(SpectrumReport {
        eigenvalues,
        projections,
        response,
        c,
        top_alignment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csbm::{CsbmConfig, Dataset, Ensemble};
    use faer::Mat;

    fn small_graph(ensemble: Ensemble, n: usize, lambda: f64) -> Dataset {
        let mut cfg = CsbmConfig::new(n, 1.0);
        cfg.ensemble = ensemble;
        cfg.lambda = lambda;
        cfg.d = 10.0;
        Dataset::generate(&cfg, 0).unwrap()
    }

    #[test]
    fn shift_moves_eigenvalues_only() {
        let data = small_graph(Ensemble::BinarySymmetric, 60, 1.0);
        let y = data.labels.as_slice();
        let base = spectral_analysis(&data.adjacency, y, 0.0).unwrap();
        let shifted_entries = Mat::from_fn(60, 60, |i, j| {
            data.adjacency.entries()[(i, j)] + if i == j { 0.7 } else { 0.0 }
        });
        let shifted = AdjacencyMatrix::from_dense(shifted_entries, Ensemble::GaussianSymmetric).unwrap();
        let other = spectral_analysis(&shifted, y, 0.0).unwrap();
        for (a, b) in base.eigenvalues.iter().zip(&other.eigenvalues) {
            assert!((a + 0.7 - b).abs() < 1e-10);
        }
        // Eigenvectors agree up to sign, so projections agree in magnitude.
        for (a, b) in base.projections.iter().zip(&other.projections) {
            assert!((a.abs() - b.abs()).abs() < 1e-8);
        }
        let with_c = spectral_analysis(&data.adjacency, y, 0.7).unwrap();
        for (r, l) in with_c.response.iter().zip(&base.eigenvalues) {
            assert_eq!(*r, l + 0.7);
        }
    }

    #[test]
    fn spike_alignment_above_threshold() {
        let data = small_graph(Ensemble::GaussianSymmetric, 2000, 2.0);
        let report = spectral_analysis(&data.adjacency, data.labels.as_slice(), 0.0).unwrap();
        assert!(report.top_alignment >= 0.5, "alignment {}", report.top_alignment);
    }

    #[test]
    fn large_self_loop_removes_distortion() {
        let data = small_graph(Ensemble::BinarySymmetric, 80, 1.0);
        let y = data.labels.as_slice();
        let n = y.len();
        for c in [1e2, -1e2, 1e4, -1e4] {
            let report = spectral_analysis(&data.adjacency, y, c).unwrap();
            let ratio = report.band_distortion(n - 1, 0).unwrap();
            let tol = if c.abs() >= 1e4 { 1e-3 } else { 0.1 };
            assert!((ratio - 1.0).abs() < tol, "c={c}, ratio={ratio}");
        }
    }

    #[test]
    fn directed_graphs_are_rejected() {
        let data = small_graph(Ensemble::BinaryNonsymmetric, 40, 1.0);
        let err = spectral_analysis(&data.adjacency, data.labels.as_slice(), 0.0).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }
}
