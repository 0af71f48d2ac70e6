//! End-to-end scenarios: enroll a fleet, evaluate PUF quality and
//! authentication, stream labelled frames through the detector, and collect
//! every metric into a [`ScenarioResult`].

mod latency;
pub mod metrics;
mod report;
mod scenario;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use latency::{latency_bench, LatencyBench, LatencyStats, WARMUP_FRAMES};
pub use metrics::{prf_metrics, roc_curve, Prf, Roc, RocPoint};
pub use report::{emit_report, latency_histogram, load_report, HistogramBin, REPORT_SCHEMA};
pub use scenario::{challenge_list, enrollment_base_seed, fleet_profiles, run_scenario};

use crate::bayes::BayesConfig;
use crate::detector::{ConfusionCounts, RewardConfig};
use crate::error::{Error, Result};
use crate::puf::{PipelineSettings, RandomnessReport};
use crate::synth::{OperatingCondition, TraceLabel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmiSpoofParams {
    pub fraction: f64,
    pub amplitude: f64,
    pub freq_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TamperParams {
    pub fraction: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImpersonationParams {
    pub fraction: f64,
}

impl Default for EmiSpoofParams {
    fn default() -> Self {
        Self {
            fraction: 0.15,
            amplitude: 0.25,
            freq_offset: 0.0,
        }
    }
}

impl Default for TamperParams {
    fn default() -> Self {
        Self {
            fraction: 0.15,
            sigma: 0.03,
        }
    }
}

impl Default for ImpersonationParams {
    fn default() -> Self {
        Self { fraction: 0.15 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackMix {
    pub emi_spoof: EmiSpoofParams,
    pub tamper: TamperParams,
    pub impersonation: ImpersonationParams,
}

impl AttackMix {
    pub fn fractions(&self) -> [(TraceLabel, f64); 3] {
        [
            (TraceLabel::EmiSpoof, self.emi_spoof.fraction),
            (TraceLabel::Tamper, self.tamper.fraction),
            (TraceLabel::Impersonation, self.impersonation.fraction),
        ]
    }

    pub fn none() -> Self {
        Self {
            emi_spoof: EmiSpoofParams {
                fraction: 0.0,
                ..Default::default()
            },
            tamper: TamperParams {
                fraction: 0.0,
                ..Default::default()
            },
            impersonation: ImpersonationParams { fraction: 0.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PcaSettings {
    pub max_k: usize,
    pub variance_target: f64,
}

impl Default for PcaSettings {
    fn default() -> Self {
        Self {
            max_k: 8,
            variance_target: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RlSettings {
    pub grid_size: usize,
    /// Percentiles of benign training scores bounding the grid.
    pub grid_percentiles: (f64, f64),
    pub start_percentile: f64,
    pub epsilon: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub reward: RewardConfig,
}

impl Default for RlSettings {
    fn default() -> Self {
        Self {
            grid_size: 32,
            grid_percentiles: (50.0, 99.9),
            start_percentile: 99.0,
            epsilon: 0.1,
            learning_rate: 0.2,
            batch_size: 50,
            reward: RewardConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionConfig {
    pub enabled: bool,
    /// Benign frames per device used to fit PCA, the threshold grid, and the baseline.
    pub training_frames: usize,
    /// Held-out frames per device and class used to fit the likelihoods.
    pub validation_frames: usize,
    pub frames_per_device: usize,
    pub min_episode: usize,
    pub max_episode: usize,
    /// Index into the scenario's challenge list giving the stream's operating point.
    pub condition_index: usize,
    pub attacks: AttackMix,
    pub pca: PcaSettings,
    pub rl: RlSettings,
    pub bayes: BayesConfig,
    pub use_bayes: bool,
    pub baseline_percentile: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            training_frames: 200,
            validation_frames: 30,
            frames_per_device: 400,
            min_episode: 10,
            max_episode: 30,
            condition_index: 0,
            attacks: AttackMix::default(),
            pca: PcaSettings::default(),
            rl: RlSettings::default(),
            bayes: BayesConfig::default(),
            use_bayes: true,
            baseline_percentile: 95.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuthConfig {
    pub genuine_attempts: usize,
    pub impersonation_attempts: usize,
}

impl Default for AuthConfig {
    fn default() -> Self {
        Self {
            genuine_attempts: 200,
            impersonation_attempts: 200,
        }
    }
}

/// Pass/fail gates evaluated on a finished scenario. `None` disables a gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChecksConfig {
    pub uniqueness_range: Option<(f64, f64)>,
    pub min_reliability: Option<f64>,
    pub randomness: bool,
    pub min_auc: Option<f64>,
    pub min_f1: Option<f64>,
    pub min_accuracy_gain_pp: Option<f64>,
    pub min_impersonation_reject: Option<f64>,
    pub min_genuine_accept: Option<f64>,
}

impl Default for ChecksConfig {
    fn default() -> Self {
        Self {
            uniqueness_range: Some((45.0, 55.0)),
            min_reliability: Some(95.0),
            randomness: true,
            min_auc: Some(0.93),
            min_f1: Some(0.90),
            min_accuracy_gain_pp: Some(5.0),
            min_impersonation_reject: Some(0.99),
            min_genuine_accept: Some(0.99),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub fleet_size: usize,
    pub variability: f64,
    pub pipeline: PipelineSettings,
    /// Challenge `i` gets `challenge_id = i`.
    pub challenges: Vec<OperatingCondition>,
    pub n_calib_traces: usize,
    pub reliability_repeats: usize,
    pub auth: AuthConfig,
    pub detection: DetectionConfig,
    pub checks: ChecksConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let c = |load, temp| OperatingCondition {
            switching_freq: 100_000.0,
            load_level: load,
            temperature: temp,
        };
        Self {
            seed: 2024,
            fleet_size: 10,
            variability: 0.1,
            pipeline: PipelineSettings::default(),
            challenges: vec![
                c(1.0, 25.0),
                c(0.75, 25.0),
                c(0.5, 25.0),
                c(1.0, 60.0),
                c(0.5, 60.0),
            ],
            n_calib_traces: 16,
            reliability_repeats: 20,
            auth: AuthConfig::default(),
            detection: DetectionConfig::default(),
            checks: ChecksConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fleet_size < 2 {
            return Err(Error::param("fleet_size", "need at least 2 devices"));
        }
        if self.challenges.is_empty() {
            return Err(Error::param("challenges", "need at least one challenge"));
        }
        for c in &self.challenges {
            c.validate()?;
        }
        if self.reliability_repeats == 0 {
            return Err(Error::param("reliability_repeats", "must be positive"));
        }
        let d = &self.detection;
        let total: f64 = d.attacks.fractions().iter().map(|(_, f)| f).sum();
        if d.attacks.fractions().iter().any(|(_, f)| !(*f >= 0.0)) || total > 1.0 + 1e-12 {
            return Err(Error::param(
                "attacks",
                format!("fractions must be nonnegative and sum to at most 1, got {total}"),
            ));
        }
        if d.condition_index >= self.challenges.len() {
            return Err(Error::param("condition_index", "outside the challenge list"));
        }
        if d.min_episode == 0 || d.min_episode > d.max_episode {
            return Err(Error::param("episode", "need 0 < min_episode <= max_episode"));
        }
        if d.rl.batch_size == 0 {
            return Err(Error::param("batch_size", "must be positive"));
        }
        if d.enabled && d.training_frames < 2 {
            return Err(Error::param("training_frames", "need at least 2"));
        }
        d.bayes.validate()?;
        d.rl.reward.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DevicePufRow {
    pub device_id: u32,
    /// Mean distance to the other devices, nominal challenge, percent.
    pub uniqueness: f64,
    /// Mean over challenges of the per-challenge reliability, percent.
    pub reliability: f64,
    pub min_reliability: f64,
    pub uniformity: f64,
    pub entropy: f64,
    /// Tests on this device's references concatenated across challenges.
    pub randomness: Option<RandomnessReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PufMetrics {
    pub per_device: Vec<DevicePufRow>,
    /// Fleet uniqueness per challenge id, percent.
    pub uniqueness_per_challenge: BTreeMap<u32, f64>,
    pub uniqueness_pooled: f64,
    pub mean_reliability: f64,
    pub mean_uniformity: f64,
    pub mean_entropy: f64,
    /// Nominal-challenge references of the whole fleet, concatenated.
    pub fleet_randomness: RandomnessReport,
    /// All references, all challenges.
    pub pooled_randomness: RandomnessReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthMetrics {
    pub genuine_attempts: usize,
    pub genuine_accepted: usize,
    pub impersonation_attempts: usize,
    pub impersonation_rejected: usize,
    pub genuine_accept_rate: Option<f64>,
    pub impersonation_reject_rate: Option<f64>,
    pub mean_genuine_distance: Option<f64>,
    pub mean_impersonation_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub counts: ConfusionCounts,
    pub metrics: Prf,
    pub roc: Option<Roc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub overall: ClassMetrics,
    /// Benign frames plus the frames of one attack kind.
    pub per_attack: BTreeMap<TraceLabel, ClassMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub device_id: u32,
    pub frame_index: u64,
    pub label: TraceLabel,
    pub score: f64,
    pub threshold: f64,
    pub classifier_flag: bool,
    pub posterior: Option<f64>,
    pub alert: bool,
    pub band_energy: f64,
    pub baseline_flag: bool,
    /// Fractional Hamming distance of the frame's PUF response to the nominal reference.
    pub puf_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorSummary {
    pub device_id: u32,
    pub pca_k: usize,
    pub explained_ratio: f64,
    pub baseline_threshold: f64,
    pub final_policy: crate::detector::ThresholdPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    /// Final decision: Bayesian alert, or the classifier when Bayes is disabled.
    pub proposed: MethodMetrics,
    pub classifier_only: MethodMetrics,
    pub baseline: MethodMetrics,
    /// Proposed minus baseline accuracy, percentage points.
    pub accuracy_gain_pp: Option<f64>,
    pub devices: Vec<DetectorSummary>,
    pub frames: Vec<FrameRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub value: Option<f64>,
    pub target: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub schema: String,
    pub config: ScenarioConfig,
    pub seeds: BTreeMap<String, u64>,
    pub puf: PufMetrics,
    pub auth: AuthMetrics,
    pub detection: Option<DetectionMetrics>,
    pub checks: Vec<CheckResult>,
    pub latency: Option<LatencyStats>,
}

impl ScenarioResult {
    /// The result with wall-clock fields removed; reruns with identical
    /// config and seeds produce byte-identical JSON for this view.
    pub fn without_timing(&self) -> ScenarioResult {
        ScenarioResult {
            latency: None,
            ..self.clone()
        }
    }

    pub fn deterministic_json(&self) -> String {
        serde_json::to_string_pretty(&self.without_timing()).expect("result serializes")
    }

    pub fn all_checks_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}
