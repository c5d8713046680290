//! Contextual stochastic block model: labels, adjacency ensembles, spiked
//! features and balanced train/test splits.
//!
//! The graph has two equally sized communities with canonical labels
//! `y_i = +1` for `i < N/2` and `y_i = -1` otherwise. Edges appear with
//! probability `c_in / N` inside a community and `c_out / N` across, where
//! `c_in = d + sqrt(d) * lambda` and `c_out = d - sqrt(d) * lambda`. Binary
//! matrices are stored divided by `sqrt(d)` so that their entry variance is
//! close to `1 / N`, matching the Gaussian ensembles
//! `(lambda / N) y y^T + Xi`.

use std::fmt;
use std::str::FromStr;

use faer::Mat;
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Geometric, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{substream, Purpose, StreamRng};

/// Balanced class labels in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct Labels {
    values: Vec<f64>,
}

impl Labels {
    /// Label vector as `+1.0` / `-1.0` entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false for a valid label vector; provided for API completeness.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Label of node `i`.
    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Builds labels from arbitrary ±1 values (used for permuted datasets).
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|&v| v != 1.0 && v != -1.0) {
            return Err(Error::invalid("labels must be +1 or -1"));
        }
        Ok(Labels { values })
    }
}

/// Canonical balanced labels: `+1` for the first half of the nodes, `-1` after.
pub fn generate_labels(n: usize) -> Result<Labels> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::invalid(format!(
            "n must be a positive even integer, got {n}"
        )));
    }
    let half = n / 2;
    let values = (0..n).map(|i| if i < half { 1.0 } else { -1.0 }).collect();
    Ok(Labels { values })
}

/// Random-matrix ensemble used for the adjacency matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ensemble {
    /// Undirected Bernoulli graph, zero diagonal, scaled by `1/sqrt(d)`.
    BinarySymmetric,
    /// Directed Bernoulli graph (diagonal sampled), scaled by `1/sqrt(d)`.
    BinaryNonsymmetric,
    /// Rank-one spike plus a GOE matrix.
    GaussianSymmetric,
    /// Rank-one spike plus an i.i.d. Gaussian matrix.
    GaussianNonsymmetric,
}

impl Ensemble {
    /// All four ensembles in a fixed order.
    pub const ALL: [Ensemble; 4] = [
        Ensemble::BinarySymmetric,
        Ensemble::BinaryNonsymmetric,
        Ensemble::GaussianSymmetric,
        Ensemble::GaussianNonsymmetric,
    ];

    /// Two-letter code (`bs`, `bn`, `gs`, `gn`).
    pub fn code(self) -> &'static str {
        match self {
            Ensemble::BinarySymmetric => "bs",
            Ensemble::BinaryNonsymmetric => "bn",
            Ensemble::GaussianSymmetric => "gs",
            Ensemble::GaussianNonsymmetric => "gn",
        }
    }

    /// Whether entries are Bernoulli draws.
    pub fn is_binary(self) -> bool {
        matches!(self, Ensemble::BinarySymmetric | Ensemble::BinaryNonsymmetric)
    }

    /// Whether samples are symmetric matrices.
    pub fn is_symmetric(self) -> bool {
        matches!(self, Ensemble::BinarySymmetric | Ensemble::GaussianSymmetric)
    }

    /// The Gaussian ensemble with the same symmetry.
    pub fn gaussian_counterpart(self) -> Ensemble {
        if self.is_symmetric() {
            Ensemble::GaussianSymmetric
        } else {
            Ensemble::GaussianNonsymmetric
        }
    }
}

impl fmt::Display for Ensemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Ensemble {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bs" | "binary-symmetric" | "binarysymmetric" => Ok(Ensemble::BinarySymmetric),
            "bn" | "binary-nonsymmetric" | "binarynonsymmetric" => Ok(Ensemble::BinaryNonsymmetric),
            "gs" | "gaussian-symmetric" | "gaussiansymmetric" => Ok(Ensemble::GaussianSymmetric),
            "gn" | "gaussian-nonsymmetric" | "gaussiannonsymmetric" => {
                Ok(Ensemble::GaussianNonsymmetric)
            }
            other => Err(Error::invalid(format!(
                "ensemble must be one of bs, bn, gs, gn; got '{other}'"
            ))),
        }
    }
}

/// Scalar parameters of one CSBM instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsbmConfig {
    /// Number of nodes (even).
    pub n: usize,
    /// Feature dimension.
    pub f: usize,
    /// Graph signal-to-noise ratio; positive means homophilic.
    pub lambda: f64,
    /// Feature signal-to-noise ratio.
    pub mu: f64,
    /// Average degree of the binary ensembles.
    pub d: f64,
    /// Fraction of labelled (training) nodes.
    pub tau: f64,
    /// Ridge strength as used by the empirical solver.
    pub r: f64,
    /// Adjacency ensemble.
    pub ensemble: Ensemble,
    /// Master seed.
    pub seed: u64,
}

impl CsbmConfig {
    /// Configuration with `n` nodes and `F = round(n / gamma)` features; the
    /// remaining parameters take the defaults `lambda = mu = 1`, `d = 30`,
    /// `tau = 0.8`, `r = 1e-5`, binary symmetric ensemble, seed 0.
    pub fn new(n: usize, gamma: f64) -> Self {
        CsbmConfig {
            n,
            f: features_for(n, gamma),
            lambda: 1.0,
            mu: 1.0,
            d: 30.0,
            tau: 0.8,
            r: 1e-5,
            ensemble: Ensemble::BinarySymmetric,
            seed: 0,
        }
    }

    /// Ratio `N / F`.
    pub fn gamma(&self) -> f64 {
        self.n as f64 / self.f as f64
    }

    /// Changes `n` and recomputes `f` so that `gamma` is preserved.
    pub fn with_n_keep_gamma(mut self, n: usize) -> Self {
        let gamma = self.gamma();
        self.n = n;
        self.f = features_for(n, gamma);
        self
    }

    /// Sets `f = round(n / gamma)`.
    pub fn set_gamma(&mut self, gamma: f64) {
        self.f = features_for(self.n, gamma);
    }

    /// Within-community expected degree `d + sqrt(d) * lambda`.
    pub fn c_in(&self) -> f64 {
        self.d + self.d.sqrt() * self.lambda
    }

    /// Cross-community expected degree `d - sqrt(d) * lambda`.
    pub fn c_out(&self) -> f64 {
        self.d - self.d.sqrt() * self.lambda
    }

    /// Number of training nodes `round(tau * N)`.
    pub fn n_train(&self) -> usize {
        (self.tau * self.n as f64).round() as usize
    }

    /// Checks every range constraint; the error message names the field.
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.n % 2 != 0 {
            return Err(Error::invalid(format!("n must be a positive even integer, got {}", self.n)));
        }
        if self.f == 0 {
            return Err(Error::invalid("f (feature dimension) must be positive"));
        }
        check_finite("lambda", self.lambda)?;
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::invalid(format!("mu must be finite and >= 0, got {}", self.mu)));
        }
        if !(self.d > 0.0 && self.d <= self.n as f64) {
            return Err(Error::invalid(format!("d must lie in (0, n], got {}", self.d)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::invalid(format!("tau must lie in (0, 1], got {}", self.tau)));
        }
        if !(self.r >= 0.0 && self.r.is_finite()) {
            return Err(Error::invalid(format!("r must be finite and >= 0, got {}", self.r)));
        }
        if self.ensemble.is_binary() {
            check_degrees(self)?;
        }
        Ok(())
    }
}

fn features_for(n: usize, gamma: f64) -> usize {
    ((n as f64 / gamma).round() as usize).max(1)
}

fn check_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be finite, got {value}")))
    }
}

fn check_degrees(cfg: &CsbmConfig) -> Result<()> {
    let n = cfg.n as f64;
    let (c_in, c_out) = (cfg.c_in(), cfg.c_out());
    if !(0.0..=n).contains(&c_in) || !(0.0..=n).contains(&c_out) {
        return Err(Error::invalid(format!(
            "lambda = {} with d = {} gives c_in = {c_in:.4}, c_out = {c_out:.4}; both must lie in [0, n]",
            cfg.lambda, cfg.d
        )));
    }
    Ok(())
}

/// Scaled adjacency matrix together with its ensemble tag.
///
/// Binary matrices additionally keep their sparsity pattern so that products
/// with dense matrices cost `O(nnz * cols)` instead of `O(N^2 * cols)`.
#[derive(Debug, Clone)]
pub struct AdjacencyMatrix {
    entries: Mat<f64>,
    kind: Ensemble,
    support: Option<Support>,
}

#[derive(Debug, Clone)]
struct Support {
    /// Column indices of the nonzero entries of every row.
    rows: Vec<Vec<u32>>,
    /// Common value of the nonzero entries (`1 / sqrt(d)`).
    weight: f64,
}

impl AdjacencyMatrix {
    /// Wraps a dense matrix; binary kinds must have a single nonzero value.
    pub fn from_dense(entries: Mat<f64>, kind: Ensemble) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::invalid("adjacency matrix must be square"));
        }
        let support = if kind.is_binary() {
            Some(Support::from_dense(&entries)?)
        } else {
            None
        };
        Ok(AdjacencyMatrix { entries, kind, support })
    }

    /// Dense entries.
    pub fn entries(&self) -> &Mat<f64> {
        &self.entries
    }

    /// Ensemble the matrix was drawn from.
    pub fn kind(&self) -> Ensemble {
        self.kind
    }

    /// Number of nodes.
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    /// Number of stored nonzero entries for binary kinds.
    pub fn nnz(&self) -> Option<usize> {
        self.support.as_ref().map(|s| s.rows.iter().map(Vec::len).sum())
    }

    /// Product `A * rhs`, exploiting sparsity for binary kinds.
    pub fn mul(&self, rhs: &Mat<f64>) -> Mat<f64> {
        assert_eq!(rhs.nrows(), self.n(), "dimension mismatch in A * X");
        match &self.support {
            Some(support) => support.mul(rhs),
            None => &self.entries * rhs,
        }
    }

    /// Matrix `P A P^T` for the node relabelling `new[i] = old[perm[i]]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        if perm.len() != n {
            return Err(Error::invalid("permutation length must equal n"));
        }
        let entries = Mat::from_fn(n, n, |i, j| self.entries[(perm[i], perm[j])]);
        AdjacencyMatrix::from_dense(entries, self.kind)
    }
}

impl Support {
    fn from_dense(entries: &Mat<f64>) -> Result<Self> {
        let n = entries.nrows();
        let mut rows = vec![Vec::new(); n];
        let mut weight = None;
        for j in 0..n {
            for (i, row) in rows.iter_mut().enumerate() {
                let v = entries[(i, j)];
                if v != 0.0 {
                    match weight {
                        None => weight = Some(v),
                        Some(w) if w != v => {
                            return Err(Error::invalid(
                                "binary adjacency matrix must have a single nonzero value",
                            ))
                        }
                        _ => {}
                    }
                    row.push(j as u32);
                }
            }
        }
        Ok(Support {
            rows,
            weight: weight.unwrap_or(1.0),
        })
    }

    fn mul(&self, rhs: &Mat<f64>) -> Mat<f64> {
        let n = self.rows.len();
        let mut out = Mat::<f64>::zeros(n, rhs.ncols());
        for k in 0..rhs.ncols() {
            let src = rhs.col_as_slice(k);
            let dst = out.col_as_slice_mut(k);
            for (i, cols) in self.rows.iter().enumerate() {
                let s: f64 = cols.iter().map(|&j| src[j as usize]).sum();
                dst[i] = self.weight * s;
            }
        }
        out
    }
}

/// Draws an adjacency matrix from `cfg.ensemble`.
pub fn sample_adjacency(cfg: &CsbmConfig, y: &Labels, rng: &mut StreamRng) -> Result<AdjacencyMatrix> {
    if y.len() != cfg.n {
        return Err(Error::invalid(format!(
            "label vector has length {}, expected n = {}",
            y.len(),
            cfg.n
        )));
    }
    match cfg.ensemble {
        Ensemble::BinarySymmetric | Ensemble::BinaryNonsymmetric => sample_binary(cfg, y, rng),
        Ensemble::GaussianSymmetric | Ensemble::GaussianNonsymmetric => {
            check_finite("lambda", cfg.lambda)?;
            Ok(sample_gaussian(cfg, y, rng))
        }
    }
}

fn sample_binary(cfg: &CsbmConfig, y: &Labels, rng: &mut StreamRng) -> Result<AdjacencyMatrix> {
    if !(cfg.d > 0.0 && cfg.d <= cfg.n as f64) {
        return Err(Error::invalid(format!("d must lie in (0, n], got {}", cfg.d)));
    }
    check_degrees(cfg)?;
    let n = cfg.n;
    let p_in = cfg.c_in() / n as f64;
    let p_out = cfg.c_out() / n as f64;
    let symmetric = cfg.ensemble.is_symmetric();
    let mut rows: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut push = |i: usize, j: usize| rows[i].push(j as u32);

    // Columns are grouped into maximal runs with the same relation to node i
    // (two runs for canonical labels), each sampled at a constant rate.
    for i in 0..n {
        let limit = if symmetric { i } else { n };
        let yi = y.get(i);
        let mut j = 0;
        while j < limit {
            // Maximal run of columns with the same relation to node i.
            let same = y.get(j) == yi;
            let mut end = j + 1;
            while end < limit && (y.get(end) == yi) == same {
                end += 1;
            }
            let p = if same { p_in } else { p_out };
            for col in bernoulli_positions(j, end, p, rng) {
                push(i, col);
            }
            j = end;
        }
    }
    if symmetric {
        // Mirror the strict lower triangle.
        let lower: Vec<(usize, u32)> = rows
            .iter()
            .enumerate()
            .flat_map(|(i, cols)| cols.iter().map(move |&j| (i, j)))
            .collect();
        for (i, j) in lower {
            rows[j as usize].push(i as u32);
        }
        for cols in rows.iter_mut() {
            cols.sort_unstable();
        }
    }
    let weight = 1.0 / cfg.d.sqrt();
    let mut entries = Mat::<f64>::zeros(n, n);
    for (i, cols) in rows.iter().enumerate() {
        for &j in cols {
            entries[(i, j as usize)] = weight;
        }
    }
    Ok(AdjacencyMatrix {
        entries,
        kind: cfg.ensemble,
        support: Some(Support { rows, weight }),
    })
}

/// Indices in `[start, end)` selected by independent Bernoulli(p) trials,
/// drawn by geometric skipping so the cost is proportional to the number of
/// successes.
fn bernoulli_positions(start: usize, end: usize, p: f64, rng: &mut StreamRng) -> Vec<usize> {
    let mut out = Vec::new();
    if p <= 0.0 || start >= end {
        return out;
    }
    if p >= 1.0 {
        out.extend(start..end);
        return out;
    }
    let skip = Geometric::new(p).expect("0 < p < 1");
    let mut pos = start as u64;
    loop {
        pos += skip.sample(rng);
        if pos >= end as u64 {
            break;
        }
        out.push(pos as usize);
        pos += 1;
    }
    out
}

fn sample_gaussian(cfg: &CsbmConfig, y: &Labels, rng: &mut StreamRng) -> AdjacencyMatrix {
    let n = cfg.n;
    let nf = n as f64;
    let sd = 1.0 / nf.sqrt();
    let spike = cfg.lambda / nf;
    let mut entries = Mat::<f64>::zeros(n, n);
    if cfg.ensemble.is_symmetric() {
        let diag_sd = (2.0 / nf).sqrt();
        for j in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            entries[(j, j)] = diag_sd * z;
            for i in (j + 1)..n {
                let z: f64 = rng.sample(StandardNormal);
                entries[(i, j)] = sd * z;
                entries[(j, i)] = sd * z;
            }
        }
    } else {
        for j in 0..n {
            for v in entries.col_as_slice_mut(j) {
                let z: f64 = rng.sample(StandardNormal);
                *v = sd * z;
            }
        }
    }
    for j in 0..n {
        let yj = y.get(j);
        for (i, v) in entries.col_as_slice_mut(j).iter_mut().enumerate() {
            *v += spike * y.get(i) * yj;
        }
    }
    AdjacencyMatrix {
        entries,
        kind: cfg.ensemble,
        support: None,
    }
}

/// Feature matrix `X = sqrt(mu / N) y u^T + Xi` and its hidden spike `u`.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    /// `N x F` features.
    pub x: Mat<f64>,
    /// Hidden spike direction (entries `N(0, 1/F)`).
    pub u: Vec<f64>,
}

/// Samples spiked-covariance features: `u` and all noise entries are
/// independent `N(0, 1/F)`.
pub fn sample_features(cfg: &CsbmConfig, y: &Labels, rng: &mut StreamRng) -> Result<FeatureMatrix> {
    if !(cfg.mu >= 0.0 && cfg.mu.is_finite()) {
        return Err(Error::invalid(format!("mu must be finite and >= 0, got {}", cfg.mu)));
    }
    if cfg.f == 0 {
        return Err(Error::invalid("f (feature dimension) must be positive"));
    }
    if y.len() != cfg.n {
        return Err(Error::invalid("label vector length must equal n"));
    }
    let (n, f) = (cfg.n, cfg.f);
    let sd = 1.0 / (f as f64).sqrt();
    let u: Vec<f64> = (0..f)
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let amp = (cfg.mu / n as f64).sqrt();
    let mut x = Mat::<f64>::zeros(n, f);
    for (k, &uk) in u.iter().enumerate() {
        for (i, v) in x.col_as_slice_mut(k).iter_mut().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            *v = amp * y.get(i) * uk + sd * z;
        }
    }
    Ok(FeatureMatrix { x, u })
}

/// Partition of the nodes into labelled (training) and unlabelled (test) sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainTestSplit {
    train_mask: Vec<bool>,
    train: Vec<usize>,
    test: Vec<usize>,
}

impl TrainTestSplit {
    /// Builds a split from a mask.
    pub fn from_mask(train_mask: Vec<bool>) -> Self {
        let train = (0..train_mask.len()).filter(|&i| train_mask[i]).collect();
        let test = (0..train_mask.len()).filter(|&i| !train_mask[i]).collect();
        TrainTestSplit { train_mask, train, test }
    }

    /// `true` for training nodes.
    pub fn train_mask(&self) -> &[bool] {
        &self.train_mask
    }

    /// Sorted training node indices.
    pub fn train(&self) -> &[usize] {
        &self.train
    }

    /// Sorted test node indices.
    pub fn test(&self) -> &[usize] {
        &self.test
    }

    /// `(M_train, M_test)`.
    pub fn counts(&self) -> (usize, usize) {
        (self.train.len(), self.test.len())
    }

    /// Split after relabelling nodes with `new[i] = old[perm[i]]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        TrainTestSplit::from_mask(perm.iter().map(|&p| self.train_mask[p]).collect())
    }
}

/// Uniformly samples `round(tau * N)` training nodes, balanced per class
/// (the positive class receives the extra node when the count is odd).
pub fn sample_split(n: usize, tau: f64, y: &Labels, rng: &mut StreamRng) -> Result<TrainTestSplit> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::invalid(format!("tau must lie in (0, 1], got {tau}")));
    }
    if y.len() != n {
        return Err(Error::invalid("label vector length must equal n"));
    }
    let pos: Vec<usize> = (0..n).filter(|&i| y.get(i) > 0.0).collect();
    let neg: Vec<usize> = (0..n).filter(|&i| y.get(i) < 0.0).collect();
    let m = (tau * n as f64).round() as usize;
    let m_pos = m.div_ceil(2);
    let m_neg = m / 2;
    if m_pos > pos.len() || m_neg > neg.len() {
        return Err(Error::invalid("classes too small for a balanced split"));
    }
    let mut mask = vec![false; n];
    for k in index::sample(rng, pos.len(), m_pos) {
        mask[pos[k]] = true;
    }
    for k in index::sample(rng, neg.len(), m_neg) {
        mask[neg[k]] = true;
    }
    Ok(TrainTestSplit::from_mask(mask))
}

/// One complete CSBM draw.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// Node labels.
    pub labels: Labels,
    /// Scaled adjacency matrix.
    pub adjacency: AdjacencyMatrix,
    /// Node features.
    pub features: FeatureMatrix,
    /// Train/test partition.
    pub split: TrainTestSplit,
}

impl Dataset {
    /// Draws the dataset of trial `trial` for `cfg`.
    pub fn generate(cfg: &CsbmConfig, trial: u64) -> Result<Self> {
        Dataset::generate_salted(cfg, trial, 0)
    }

    /// Like [`Dataset::generate`], with an extra salt on the adjacency
    /// stream only. Features and split depend on `(seed, trial)` alone, so
    /// datasets with different ensembles or salts share them.
    pub fn generate_salted(cfg: &CsbmConfig, trial: u64, adjacency_salt: u8) -> Result<Self> {
        cfg.validate()?;
        let labels = generate_labels(cfg.n)?;
        let mut rng_a = substream(cfg.seed, trial, Purpose::Adjacency, adjacency_salt);
        let mut rng_x = substream(cfg.seed, trial, Purpose::Features, 0);
        let mut rng_s = substream(cfg.seed, trial, Purpose::Split, 0);
        let adjacency = sample_adjacency(cfg, &labels, &mut rng_a)?;
        let features = sample_features(cfg, &labels, &mut rng_x)?;
        let split = sample_split(cfg.n, cfg.tau, &labels, &mut rng_s)?;
        Ok(Dataset {
            labels,
            adjacency,
            features,
            split,
        })
    }

    /// Dataset relabelled by `new[i] = old[perm[i]]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.labels.len();
        if perm.len() != n {
            return Err(Error::invalid("permutation length must equal n"));
        }
        let labels = Labels::from_values(perm.iter().map(|&p| self.labels.get(p)).collect())?;
        let x = &self.features.x;
        let features = FeatureMatrix {
            x: Mat::from_fn(n, x.ncols(), |i, k| x[(perm[i], k)]),
            u: self.features.u.clone(),
        };
        Ok(Dataset {
            labels,
            adjacency: self.adjacency.permuted(perm)?,
            features,
            split: self.split.permuted(perm),
        })
    }
}
