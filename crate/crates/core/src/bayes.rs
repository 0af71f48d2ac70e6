//! Recursive Bayesian smoothing of anomaly scores with exponential forgetting.
//!
//! Each frame first relaxes the belief toward the reset prior,
//! `prior = lambda * p + (1 - lambda) * p_reset`, then applies Bayes' rule
//! with floored log-normal likelihoods of the score under each hypothesis.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormal {
    /// Mean of `ln(score)`.
    pub mu: f64,
    /// Standard deviation of `ln(score)`.
    pub sigma: f64,
}

impl LogNormal {
    pub fn pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let z = (x.ln() - self.mu) / self.sigma;
        (-0.5 * z * z).exp() / (x * self.sigma * (2.0 * std::f64::consts::PI).sqrt())
    }

    /// Moment fit in log space (sample standard deviation, divisor `N - 1`).
    pub fn fit(scores: &[f64]) -> Result<Self> {
        if let Some(bad) = scores.iter().find(|&&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::Degenerate(format!(
                "log-normal fit needs positive finite scores, found {bad}; add a small positive jitter"
            )));
        }
        let logs: Vec<f64> = scores.iter().map(|s| s.ln()).collect();
        let n = logs.len() as f64;
        let mu = logs.iter().sum::<f64>() / n;
        let var = logs.iter().map(|l| (l - mu).powi(2)).sum::<f64>() / (n - 1.0);
        if !(var > 0.0) {
            return Err(Error::Degenerate(
                "scores have zero variance; add a small random jitter before fitting".into(),
            ));
        }
        Ok(Self {
            mu,
            sigma: var.sqrt(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodModel {
    pub benign: LogNormal,
    /// Equal-weight mixture; a single component is the plain log-normal model.
    pub anomalous: Vec<LogNormal>,
    pub floor: f64,
}

impl LikelihoodModel {
    /// `(L1, L0)`: floored anomalous and benign likelihoods of `score`.
    pub fn likelihoods(&self, score: f64) -> (f64, f64) {
        let l1 = self.anomalous.iter().map(|c| c.pdf(score)).sum::<f64>()
            / self.anomalous.len() as f64;
        (l1.max(self.floor), self.benign.pdf(score).max(self.floor))
    }
}

pub const MIN_FIT_SCORES: usize = 20;

fn check_count(name: &str, s: &[f64]) -> Result<()> {
    if s.len() < MIN_FIT_SCORES {
        return Err(Error::param(
            "scores",
            format!("need at least {MIN_FIT_SCORES} {name} scores, got {}", s.len()),
        ));
    }
    Ok(())
}

pub fn fit_likelihoods(benign_scores: &[f64], attack_scores: &[f64]) -> Result<LikelihoodModel> {
    fit_likelihoods_grouped(benign_scores, &[attack_scores])
}

/// One anomalous component per group of attack scores (e.g. per attack kind).
pub fn fit_likelihoods_grouped(
    benign_scores: &[f64],
    attack_groups: &[&[f64]],
) -> Result<LikelihoodModel> {
    check_count("benign", benign_scores)?;
    if attack_groups.is_empty() {
        return Err(Error::param("scores", "need at least one attack group"));
    }
    let anomalous = attack_groups
        .iter()
        .map(|g| {
            check_count("attack", g)?;
            LogNormal::fit(g)
        })
        .collect::<Result<_>>()?;
    Ok(LikelihoodModel {
        benign: LogNormal::fit(benign_scores)?,
        anomalous,
        floor: DEFAULT_FLOOR,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BayesConfig {
    pub decision_threshold: f64,
    pub forgetting: f64,
    pub initial_prior: f64,
}

impl Default for BayesConfig {
    fn default() -> Self {
        Self {
            decision_threshold: 0.9,
            forgetting: 0.95,
            initial_prior: 0.01,
        }
    }
}

impl BayesConfig {
    pub fn validate(&self) -> Result<()> {
        let open = |v: f64| v > 0.0 && v < 1.0;
        if !open(self.decision_threshold) || !open(self.initial_prior) {
            return Err(Error::param("bayes", "probabilities must lie in (0, 1)"));
        }
        if !(self.forgetting > 0.0 && self.forgetting <= 1.0) {
            return Err(Error::param("forgetting", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorState {
    pub p_anomalous: f64,
    pub prior_at_reset: f64,
    pub forgetting: f64,
    pub frames_seen: u64,
}

impl PosteriorState {
    pub fn new(cfg: &BayesConfig) -> Self {
        Self {
            p_anomalous: cfg.initial_prior,
            prior_at_reset: cfg.initial_prior,
            forgetting: cfg.forgetting,
            frames_seen: 0,
        }
    }

    /// Belief after forgetting, before evidence.
    pub fn predicted_prior(&self) -> f64 {
        self.forgetting * self.p_anomalous + (1.0 - self.forgetting) * self.prior_at_reset
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Alert,
    NoAlert,
}

pub fn update(state: &PosteriorState, score: f64, lm: &LikelihoodModel) -> Result<PosteriorState> {
    if !score.is_finite() {
        return Err(Error::param("score", format!("non-finite score {score}")));
    }
    let (l1, l0) = lm.likelihoods(score);
    Ok(update_with_likelihoods(state, l1, l0))
}

pub(crate) fn update_with_likelihoods(state: &PosteriorState, l1: f64, l0: f64) -> PosteriorState {
    let prior = state.predicted_prior();
    let num = prior * l1;
    let p = num / (num + (1.0 - prior) * l0);
    PosteriorState {
        p_anomalous: p.clamp(0.0, 1.0),
        frames_seen: state.frames_seen + 1,
        ..*state
    }
}

/// Alert iff the posterior reaches the threshold (inclusive).
pub fn decide(state: &PosteriorState, cfg: &BayesConfig) -> Decision {
    if state.p_anomalous >= cfg.decision_threshold {
        Decision::Alert
    } else {
        Decision::NoAlert
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorRow {
    pub frame_index: u64,
    pub score: f64,
    pub posterior: f64,
    pub decision: Decision,
}

pub fn write_posterior_csv(rows: &[PosteriorRow], path: &Path) -> Result<()> {
    let mut out = String::from("frame_index,score,posterior,decision\n");
    for r in rows {
        let d = match r.decision {
            Decision::Alert => "alert",
            Decision::NoAlert => "no_alert",
        };
        let _ = writeln!(out, "{},{:e},{:e},{}", r.frame_index, r.score, r.posterior, d);
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
