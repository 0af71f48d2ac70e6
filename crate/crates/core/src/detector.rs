//! PCA reconstruction-error scoring and an epsilon-greedy threshold agent.
//!
//! The PCA basis comes from a cyclic Jacobi eigendecomposition of the sample
//! covariance of benign feature vectors. A frame's anomaly score is the
//! squared norm of its residual after projection onto the retained subspace.
//!
//! The threshold agent is a multi-armed bandit over a fixed grid of candidate
//! thresholds. After each batch it receives `alpha * TP - beta * FP`, updates
//! the value of the threshold it used, and picks the next one epsilon-greedily.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::percentile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k` rows of length `n`, row-major.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub k: usize,
    /// Sum of all covariance eigenvalues, retained or not.
    pub total_variance: f64,
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Share of total variance captured by the retained components.
    pub fn explained_ratio(&self) -> f64 {
        if self.total_variance > 0.0 {
            self.explained_variance.iter().sum::<f64>() / self.total_variance
        } else {
            1.0
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors as rows, sorted by
/// descending eigenvalue.
pub(crate) fn symmetric_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let scale: f64 = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    if scale > 0.0 {
        for _sweep in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i][j] * a[i][j])
                .sum::<f64>()
                .sqrt();
            if off <= 1e-15 * scale {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[p][q];
                    if apq.abs() <= f64::MIN_POSITIVE {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p][k];
                        let aqk = a[q][k];
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                    for row in v.iter_mut() {
                        let vp = row[p];
                        let vq = row[q];
                        row[p] = c * vp - s * vq;
                        row[q] = s * vp + c * vq;
                    }
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order
        .iter()
        .map(|&i| (0..n).map(|r| v[r][i]).collect())
        .collect();
    (values, vectors)
}

fn check_rows(rows: &[Vec<f64>]) -> Result<usize> {
    if rows.len() < 2 {
        return Err(Error::param("features", "PCA needs at least 2 rows"));
    }
    let n = rows[0].len();
    if n == 0 {
        return Err(Error::param("features", "empty feature vectors"));
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::LengthMismatch {
            expected: n,
            got: bad.len(),
        });
    }
    Ok(n)
}

/// Fits principal components on `rows` (m x n) keeping the top `k`.
///
/// Components are ordered by descending variance, and each is signed so its
/// largest-magnitude element is positive.
pub fn fit_pca(rows: &[Vec<f64>], k: usize) -> Result<PcaModel> {
    let n = check_rows(rows)?;
    let m = rows.len();
    if k == 0 || k > m.min(n) {
        return Err(Error::param(
            "k",
            format!("must lie in 1..={} for {m} x {n} data, got {k}", m.min(n)),
        ));
    }
    let mut mean = vec![0.0; n];
    for r in rows {
        for (a, x) in mean.iter_mut().zip(r) {
            *a += x;
        }
    }
    mean.iter_mut().for_each(|a| *a /= m as f64);
    let mut cov = vec![vec![0.0; n]; n];
    for r in rows {
        let c: Vec<f64> = r.iter().zip(&mean).map(|(x, mu)| x - mu).collect();
        for i in 0..n {
            for j in i..n {
                cov[i][j] += c[i] * c[j];
            }
        }
    }
    for i in 0..n {
        for j in i..n {
            cov[i][j] /= (m - 1) as f64;
            cov[j][i] = cov[i][j];
        }
    }
    let (values, vectors) = symmetric_eigen(cov);
    let total_variance = values.iter().map(|v| v.max(0.0)).sum();
    let components = vectors
        .into_iter()
        .take(k)
        .map(|mut row| {
            let lead = row
                .iter()
                .cloned()
                .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
            if lead < 0.0 {
                row.iter_mut().for_each(|x| *x = -*x);
            }
            row
        })
        .collect();
    Ok(PcaModel {
        mean,
        components,
        explained_variance: values.into_iter().take(k).map(|v| v.max(0.0)).collect(),
        k,
        total_variance,
    })
}

/// Smallest `k <= max_k` whose components explain at least `target` of the variance.
pub fn fit_pca_auto(rows: &[Vec<f64>], max_k: usize, target: f64) -> Result<PcaModel> {
    let n = check_rows(rows)?;
    let cap = max_k.min(n).min(rows.len());
    let full = fit_pca(rows, cap)?;
    let mut acc = 0.0;
    let mut k = cap;
    for (i, v) in full.explained_variance.iter().enumerate() {
        acc += v;
        if full.total_variance > 0.0 && acc / full.total_variance >= target {
            k = i + 1;
            break;
        }
    }
    Ok(PcaModel {
        components: full.components[..k].to_vec(),
        explained_variance: full.explained_variance[..k].to_vec(),
        k,
        ..full
    })
}

/// Squared norm of the residual `(f - mean) - P^T P (f - mean)`.
pub fn anomaly_score(model: &PcaModel, f: &[f64]) -> Result<f64> {
    if f.len() != model.dim() {
        return Err(Error::LengthMismatch {
            expected: model.dim(),
            got: f.len(),
        });
    }
    let mut resid: Vec<f64> = f.iter().zip(&model.mean).map(|(x, m)| x - m).collect();
    let proj: Vec<f64> = model
        .components
        .iter()
        .map(|c| c.iter().zip(&resid).map(|(a, b)| a * b).sum())
        .collect();
    for (c, p) in model.components.iter().zip(&proj) {
        for (r, ci) in resid.iter_mut().zip(c) {
            *r -= p * ci;
        }
    }
    Ok(resid.iter().map(|r| r * r).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameLabel {
    Normal,
    Anomalous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return Err(Error::param("reward", "alpha and beta must be positive"));
        }
        Ok(())
    }

    pub fn reward(&self, outcome: &ConfusionCounts) -> f64 {
        self.alpha * outcome.tp as f64 - self.beta * outcome.fp as f64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn record(&mut self, actual_attack: bool, flagged: bool) {
        match (actual_attack, flagged) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn merge(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub grid: Vec<f64>,
    pub q_values: Vec<f64>,
    pub epsilon: f64,
    pub learning_rate: f64,
    pub current_index: usize,
}

impl ThresholdPolicy {
    pub fn new(grid: Vec<f64>, epsilon: f64, learning_rate: f64, current_index: usize) -> Result<Self> {
        if grid.is_empty() || grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::param("grid", "must be nonempty and strictly increasing"));
        }
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::param("epsilon", "must lie in [0, 1]"));
        }
        if !(learning_rate > 0.0 && learning_rate <= 1.0) {
            return Err(Error::param("learning_rate", "must lie in (0, 1]"));
        }
        if current_index >= grid.len() {
            return Err(Error::param("current_index", "outside the grid"));
        }
        Ok(Self {
            q_values: vec![0.0; grid.len()],
            grid,
            epsilon,
            learning_rate,
            current_index,
        })
    }

    /// `size` evenly spaced thresholds over `[p_lo, p_hi]` percentiles of
    /// benign training scores, starting at the candidate nearest `p_start`.
    pub fn from_benign_scores(
        scores: &[f64],
        size: usize,
        (p_lo, p_hi): (f64, f64),
        p_start: f64,
        epsilon: f64,
        learning_rate: f64,
    ) -> Result<Self> {
        if scores.is_empty() || size < 2 {
            return Err(Error::param("grid", "need scores and at least 2 candidates"));
        }
        let lo = percentile(scores, p_lo);
        let hi = percentile(scores, p_hi);
        if !(hi > lo) {
            return Err(Error::Degenerate(
                "benign scores have no spread; cannot build a threshold grid".into(),
            ));
        }
        let grid: Vec<f64> = (0..size)
            .map(|i| lo + (hi - lo) * i as f64 / (size - 1) as f64)
            .collect();
        let start = percentile(scores, p_start);
        let current = grid
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - start).abs().total_cmp(&(b.1 - start).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        Self::new(grid, epsilon, learning_rate, current)
    }

    pub fn threshold(&self) -> f64 {
        self.grid[self.current_index]
    }

    /// Index of the largest q-value, ties toward the lower index.
    pub fn greedy_index(&self) -> usize {
        let mut best = 0;
        for (i, &q) in self.q_values.iter().enumerate() {
            if q > self.q_values[best] {
                best = i;
            }
        }
        best
    }

    /// Applies one batch of feedback and selects the next threshold.
    /// Returns the batch reward.
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        outcome: &ConfusionCounts,
        cfg: &RewardConfig,
        rng: &mut R,
    ) -> f64 {
        let r = cfg.reward(outcome);
        let i = self.current_index;
        self.q_values[i] += self.learning_rate * (r - self.q_values[i]);
        // Draw unconditionally so the random stream is independent of epsilon.
        let explore = rng.random::<f64>() < self.epsilon;
        let pick = rng.random_range(0..self.grid.len());
        self.current_index = if explore { pick } else { self.greedy_index() };
        r
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Anomalous iff `score` is strictly above the current threshold.
pub fn classify(score: f64, policy: &ThresholdPolicy) -> FrameLabel {
    if score > policy.threshold() {
        FrameLabel::Anomalous
    } else {
        FrameLabel::Normal
    }
}

pub fn rl_update<R: Rng + ?Sized>(
    policy: &ThresholdPolicy,
    outcome: &ConfusionCounts,
    cfg: &RewardConfig,
    rng: &mut R,
) -> ThresholdPolicy {
    let mut next = policy.clone();
    next.update(outcome, cfg, rng);
    next
}

/// Static comparator: flags frames whose raw band energy exceeds a fixed
/// percentile of benign training energies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticThreshold {
    pub threshold: f64,
}

impl StaticThreshold {
    pub fn fit(benign: &[f64], pct: f64) -> Result<Self> {
        if benign.is_empty() {
            return Err(Error::param("benign", "need training values"));
        }
        Ok(Self {
            threshold: percentile(benign, pct),
        })
    }

    pub fn flags(&self, value: f64) -> bool {
        value > self.threshold
    }
}
