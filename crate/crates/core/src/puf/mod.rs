//! Noise-derived PUF: calibration, adaptive-threshold quantization,
//! CRP enrollment, and authentication.
//!
//! Bit `i` of a response is `1` exactly when `f_i > mu_i + theta * sigma_i`,
//! where `mu` and `sigma` are calibration statistics for the challenge.
//! Enrollment computes those statistics over the calibration measurements of
//! the whole enrolled population, so each bit records on which side of the
//! population mean a device sits. Statistics over a single device's own
//! measurements would put its mean response exactly on the threshold.

mod db;
pub mod metrics;
pub mod randomness;

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use db::{CrpDatabase, CRP_DB_VERSION};
pub use metrics::{
    fractional_hamming, hamming, reliability, shannon_entropy, uniformity, uniqueness,
    uniqueness_per_device,
};
pub use randomness::{randomness_tests, RandomnessReport, TestOutcome};

use crate::error::{Error, Result};
use crate::seed;
use crate::spectral::{FeatureConfig, FeatureExtractor, FeatureVector, StftConfig};
use crate::synth::{DeviceProfile, NoiseTrace, OperatingCondition, SynthConfig, Synthesizer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub n_samples: usize,
}

impl CalibrationStats {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PufConfig {
    pub theta: f64,
    /// Largest fractional Hamming distance still accepted.
    pub auth_threshold: f64,
}

impl Default for PufConfig {
    fn default() -> Self {
        Self {
            theta: 0.0,
            auth_threshold: 0.10,
        }
    }
}

impl PufConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.auth_threshold) {
            return Err(Error::param("auth_threshold", "must lie in [0, 0.5)"));
        }
        if !self.theta.is_finite() {
            return Err(Error::param("theta", "must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Challenge {
    pub challenge_id: u32,
    pub condition: OperatingCondition,
}

/// Response bit vector. Serialized as `{ "n_bits": n, "hex": "..." }`,
/// bits packed MSB-first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PufResponse {
    bits: Vec<bool>,
}

impl PufResponse {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn complement(&self) -> Self {
        Self::new(self.bits.iter().map(|b| !b).collect())
    }

    pub fn flip(&mut self, i: usize) {
        self.bits[i] = !self.bits[i];
    }

    pub fn to_hex(&self) -> String {
        let bytes: Vec<u8> = self
            .bits
            .chunks(8)
            .map(|c| {
                c.iter()
                    .enumerate()
                    .fold(0u8, |acc, (i, &b)| acc | ((b as u8) << (7 - i)))
            })
            .collect();
        hex::encode(bytes)
    }

    pub fn from_hex(n_bits: usize, text: &str) -> Result<Self> {
        let bytes = hex::decode(text).map_err(|e| Error::param("hex", e.to_string()))?;
        if bytes.len() != n_bits.div_ceil(8) {
            return Err(Error::LengthMismatch {
                expected: n_bits.div_ceil(8),
                got: bytes.len(),
            });
        }
        let bits = (0..n_bits)
            .map(|i| bytes[i / 8] >> (7 - i % 8) & 1 == 1)
            .collect();
        Ok(Self { bits })
    }
}

impl fmt::Display for PufResponse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HexBits {
    n_bits: usize,
    hex: String,
}

impl Serialize for PufResponse {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        HexBits {
            n_bits: self.len(),
            hex: self.to_hex(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PufResponse {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let h = HexBits::deserialize(d)?;
        PufResponse::from_hex(h.n_bits, &h.hex).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrpRecord {
    pub device_id: u32,
    pub challenge: Challenge,
    pub calibration: CalibrationStats,
    pub reference: PufResponse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum AuthDecision {
    Accept { distance: f64 },
    Reject { distance: f64 },
    UnknownIdentity,
}

/// Element-wise sample mean and standard deviation (divisor `N - 1`).
pub fn calibrate(features: &[FeatureVector]) -> Result<CalibrationStats> {
    let rows: Vec<&[f64]> = features.iter().map(|f| f.values.as_slice()).collect();
    calibrate_rows(&rows)
}

pub(crate) fn calibrate_rows(rows: &[&[f64]]) -> Result<CalibrationStats> {
    if rows.len() < 2 {
        return Err(Error::param(
            "features",
            format!("calibration needs at least 2 vectors, got {}", rows.len()),
        ));
    }
    let n = rows[0].len();
    if let Some(bad) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::LengthMismatch {
            expected: n,
            got: bad.len(),
        });
    }
    let m = rows.len() as f64;
    let mut mean = vec![0.0; n];
    for r in rows {
        for (acc, v) in mean.iter_mut().zip(r.iter()) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= m);
    let mut var = vec![0.0; n];
    for r in rows {
        for ((acc, v), mu) in var.iter_mut().zip(r.iter()).zip(&mean) {
            *acc += (v - mu) * (v - mu);
        }
    }
    let std = var.into_iter().map(|v| (v / (m - 1.0)).sqrt()).collect();
    Ok(CalibrationStats {
        mean,
        std,
        n_samples: rows.len(),
    })
}

/// `r_i = 1` iff `f_i > mu_i + theta * sigma_i` (ties quantize to 0).
pub fn quantize(f: &FeatureVector, cal: &CalibrationStats, cfg: &PufConfig) -> Result<PufResponse> {
    quantize_values(&f.values, cal, cfg)
}

pub(crate) fn quantize_values(
    f: &[f64],
    cal: &CalibrationStats,
    cfg: &PufConfig,
) -> Result<PufResponse> {
    if f.len() != cal.mean.len() || cal.std.len() != cal.mean.len() {
        return Err(Error::LengthMismatch {
            expected: cal.mean.len(),
            got: f.len(),
        });
    }
    let bits = f
        .iter()
        .zip(cal.mean.iter().zip(&cal.std))
        .map(|(&v, (&mu, &sd))| v > mu + cfg.theta * sd)
        .collect();
    Ok(PufResponse::new(bits))
}

/// Accepts when the fractional Hamming distance to the enrolled reference is
/// at most `cfg.auth_threshold`.
pub fn authenticate(
    claimed_device_id: u32,
    challenge: &Challenge,
    response: &PufResponse,
    db: &CrpDatabase,
    cfg: &PufConfig,
) -> Result<AuthDecision> {
    let Some(record) = db.get(claimed_device_id, challenge.challenge_id) else {
        return Ok(AuthDecision::UnknownIdentity);
    };
    let distance = fractional_hamming(response, &record.reference)?;
    Ok(if distance <= cfg.auth_threshold {
        AuthDecision::Accept { distance }
    } else {
        AuthDecision::Reject { distance }
    })
}

/// Everything a verifier needs to reproduce a measurement's feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineSettings {
    pub synth: SynthConfig,
    pub stft: StftConfig,
    pub features: FeatureConfig,
    /// Length of one PUF measurement trace in seconds.
    pub measurement_duration: f64,
    pub puf: PufConfig,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        Self {
            synth: SynthConfig::default(),
            stft: StftConfig::default(),
            features: FeatureConfig::default(),
            measurement_duration: 0.032_768,
            puf: PufConfig::default(),
        }
    }
}

/// Synthesizer + feature extractor bound to one [`PipelineSettings`].
#[derive(Debug, Clone)]
pub struct PufPipeline {
    settings: PipelineSettings,
    synth: Synthesizer,
    extractor: FeatureExtractor,
}

impl PufPipeline {
    pub fn new(settings: PipelineSettings) -> Result<Self> {
        settings.puf.validate()?;
        let synth = Synthesizer::new(settings.synth.clone())?;
        synth.samples_for(settings.measurement_duration)?;
        let extractor = FeatureExtractor::new(settings.stft, settings.features)?;
        Ok(Self {
            settings,
            synth,
            extractor,
        })
    }

    pub fn settings(&self) -> &PipelineSettings {
        &self.settings
    }

    pub fn synthesizer(&self) -> &Synthesizer {
        &self.synth
    }

    pub fn extractor(&self) -> &FeatureExtractor {
        &self.extractor
    }

    /// One benign measurement trace of `device` under `challenge`.
    pub fn measure_trace(
        &self,
        device: &DeviceProfile,
        challenge: &Challenge,
        rng_seed: u64,
    ) -> Result<NoiseTrace> {
        self.synth.synthesize_trace(
            device,
            &challenge.condition,
            self.settings.measurement_duration,
            rng_seed,
        )
    }

    pub fn features(&self, trace: &NoiseTrace) -> Result<FeatureVector> {
        self.extractor.extract(trace)
    }

    /// `count` independent measurements sharing one deterministic waveform.
    pub fn measure_features(
        &self,
        device: &DeviceProfile,
        challenge: &Challenge,
        seeds: impl IntoIterator<Item = u64>,
    ) -> Result<Vec<FeatureVector>> {
        let n = self.synth.samples_for(self.settings.measurement_duration)?;
        let clean = self.synth.deterministic(device, &challenge.condition, n)?;
        seeds
            .into_iter()
            .map(|s| {
                let trace = self
                    .synth
                    .add_noise(device, &challenge.condition, clean.clone(), s);
                self.extractor.extract(&trace)
            })
            .collect()
    }

    pub fn respond(&self, trace: &NoiseTrace, record: &CrpRecord) -> Result<PufResponse> {
        let f = self.features(trace)?;
        quantize(&f, &record.calibration, &self.settings.puf)
    }
}

/// Seed of the `index`-th enrollment measurement of a device under a challenge.
pub fn enrollment_seed(base: u64, device_id: u32, challenge_id: u32, index: usize) -> u64 {
    seed::derive(
        base,
        "enroll",
        &[device_id as u64, challenge_id as u64, index as u64],
    )
}

/// Enrolls every device under every challenge.
///
/// Per challenge, each device contributes `n_calib_traces` benign
/// measurements; calibration statistics are computed over all of them, and a
/// device's reference is the quantized mean of its own calibration features.
/// With a single device the reference degenerates to all zeros at `theta = 0`.
pub fn enroll(
    devices: &[DeviceProfile],
    challenges: &[Challenge],
    n_calib_traces: usize,
    pipeline: &PufPipeline,
    base_seed: u64,
) -> Result<Vec<CrpRecord>> {
    if n_calib_traces < 8 {
        return Err(Error::param(
            "n_calib_traces",
            format!("need at least 8 calibration traces, got {n_calib_traces}"),
        ));
    }
    let mut ids: Vec<u32> = challenges.iter().map(|c| c.challenge_id).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != challenges.len() {
        return Err(Error::param("challenges", "challenge ids must be unique"));
    }

    let mut records = Vec::with_capacity(devices.len() * challenges.len());
    for challenge in challenges {
        let per_device: Vec<Vec<FeatureVector>> = devices
            .par_iter()
            .map(|d| {
                pipeline.measure_features(
                    d,
                    challenge,
                    (0..n_calib_traces).map(|i| {
                        enrollment_seed(base_seed, d.device_id, challenge.challenge_id, i)
                    }),
                )
            })
            .collect::<Result<_>>()?;
        let pooled: Vec<&[f64]> = per_device
            .iter()
            .flatten()
            .map(|f| f.values.as_slice())
            .collect();
        let calibration = calibrate_rows(&pooled)?;
        for (device, feats) in devices.iter().zip(&per_device) {
            let rows: Vec<&[f64]> = feats.iter().map(|f| f.values.as_slice()).collect();
            let own = calibrate_rows(&rows)?;
            let reference = quantize_values(&own.mean, &calibration, &pipeline.settings.puf)?;
            records.push(CrpRecord {
                device_id: device.device_id,
                challenge: *challenge,
                calibration: calibration.clone(),
                reference,
            });
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fv(values: Vec<f64>) -> FeatureVector {
        FeatureVector {
            band_centers: vec![0.0; values.len()],
            band_energy: 1.0,
            values,
        }
    }

    #[test]
    fn calibrate_identical_vectors() {
        let v = vec![0.1, 0.2, 0.7];
        let cal = calibrate(&[fv(v.clone()), fv(v.clone())]).unwrap();
        assert_eq!(cal.mean, v);
        assert_eq!(cal.std, vec![0.0; 3]);
        assert_eq!(cal.n_samples, 2);
    }

    #[test]
    fn calibrate_two_point() {
        let cal = calibrate(&[fv(vec![0.0, 1.0]), fv(vec![1.0, 0.0])]).unwrap();
        assert_eq!(cal.mean, vec![0.5, 0.5]);
        for s in cal.std {
            assert!((s - 0.5f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn calibrate_matches_two_pass_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let data: Vec<Vec<f64>> = (0..100)
            .map(|_| (0..16).map(|_| rng.random::<f64>()).collect())
            .collect();
        let cal = calibrate(&data.iter().cloned().map(fv).collect::<Vec<_>>()).unwrap();
        for i in 0..16 {
            let col: Vec<f64> = data.iter().map(|r| r[i]).collect();
            let mean = col.iter().sum::<f64>() / 100.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 99.0;
            assert!((cal.mean[i] - mean).abs() < 1e-12);
            assert!((cal.std[i] - var.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn calibrate_errors() {
        assert!(calibrate(&[fv(vec![1.0])]).is_err());
        assert!(matches!(
            calibrate(&[fv(vec![1.0]), fv(vec![1.0, 2.0])]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn quantize_ties_to_zero_and_theta() {
        let cal = CalibrationStats {
            mean: vec![0.2, 0.3, 0.5],
            std: vec![0.01, 0.02, 0.03],
            n_samples: 10,
        };
        let r = quantize(&fv(cal.mean.clone()), &cal, &PufConfig::default()).unwrap();
        assert_eq!(r.popcount(), 0);
        let above: Vec<f64> = cal.mean.iter().zip(&cal.std).map(|(m, s)| m + 2.0 * s).collect();
        let cfg = PufConfig {
            theta: 1.0,
            ..PufConfig::default()
        };
        assert_eq!(quantize(&fv(above), &cal, &cfg).unwrap().popcount(), 3);
        assert!(quantize(&fv(vec![0.0]), &cal, &cfg).is_err());
    }

    #[test]
    fn hex_roundtrip_with_partial_byte() {
        let r = PufResponse::new(vec![true, false, true, true, false, false, false, false, true, true]);
        assert_eq!(r.to_hex(), "b0c0");
        assert_eq!(PufResponse::from_hex(10, "b0c0").unwrap(), r);
        assert!(PufResponse::from_hex(17, "b0c0").is_err());
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(json, r#"{"n_bits":10,"hex":"b0c0"}"#);
        assert_eq!(serde_json::from_str::<PufResponse>(&json).unwrap(), r);
    }

    #[test]
    fn config_rejects_bad_threshold() {
        for t in [-0.1, 0.5, 0.7] {
            let cfg = PufConfig {
                auth_threshold: t,
                ..PufConfig::default()
            };
            assert!(cfg.validate().is_err());
        }
    }
}
