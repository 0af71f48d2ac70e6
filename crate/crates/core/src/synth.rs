//! Parametric switching-noise generator for a fleet of virtual devices.
//!
//! A trace is the sum of `K` switching harmonics at `k * f_sw * (1 + jitter)`
//! with amplitudes `A_k = A_1 / k`, a comb of parasitic ringing sidebands
//! around the lower harmonics, and additive Gaussian plus uniform noise.
//! Every per-device quantity (harmonic gains and phases, jitter, sideband
//! amplitudes and phases, noise-floor gain) is drawn from a ChaCha stream
//! keyed by the device seed, so a profile is a pure function of its inputs.
//!
//! Operating conditions act on the deterministic part only:
//!
//! * `load_level` scales the fundamental tone linearly;
//! * `temperature` scales every harmonic and sideband by
//!   `1 + temp_coeff * (T - reference_temp)`.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Generator-wide constants shared by every device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub sample_rate: f64,
    /// Number of modeled switching harmonics `K`.
    pub harmonics: usize,
    /// Amplitude of the fundamental at unit gain, full load, reference temperature.
    pub fundamental_amplitude: f64,
    /// Harmonics `1..=sideband_harmonics` carry the parasitic sideband comb.
    pub sideband_harmonics: usize,
    pub sidebands_per_side: usize,
    pub sideband_spacing_hz: f64,
    /// Sideband amplitude ceiling relative to the harmonic's base amplitude.
    pub sideband_level: f64,
    /// Sideband amplitudes are drawn uniformly in `[sideband_min_ratio, 1] * sideband_level`.
    pub sideband_min_ratio: f64,
    /// Noise floor relative to the nominal harmonic RMS at unit noise gain.
    pub snr_db: f64,
    /// Share of the noise variance carried by the uniform component.
    pub uniform_fraction: f64,
    pub temp_coeff: f64,
    pub reference_temp: f64,
    /// Shortest trace the generator will emit (one analysis window).
    pub min_samples: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            sample_rate: 4.0e6,
            harmonics: 8,
            fundamental_amplitude: 1.0,
            sideband_harmonics: 4,
            sidebands_per_side: 8,
            sideband_spacing_hz: 625.0,
            sideband_level: 0.1,
            sideband_min_ratio: 0.25,
            snr_db: 30.0,
            uniform_fraction: 0.2,
            temp_coeff: 0.001,
            reference_temp: 25.0,
            min_samples: 16_384,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::param("sample_rate", "must be positive"));
        }
        if self.harmonics == 0 {
            return Err(Error::param("harmonics", "need at least one harmonic"));
        }
        if self.sideband_harmonics > self.harmonics {
            return Err(Error::param(
                "sideband_harmonics",
                "cannot exceed the number of harmonics",
            ));
        }
        if !(0.0..=1.0).contains(&self.sideband_min_ratio) {
            return Err(Error::param("sideband_min_ratio", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.uniform_fraction) {
            return Err(Error::param("uniform_fraction", "must lie in [0, 1]"));
        }
        if self.sideband_level < 0.0 || self.sideband_spacing_hz < 0.0 {
            return Err(Error::param("sideband_level", "must be nonnegative"));
        }
        if self.min_samples == 0 {
            return Err(Error::param("min_samples", "must be positive"));
        }
        Ok(())
    }

    /// RMS of the harmonic series at unit gains, full load, reference temperature.
    pub fn nominal_rms(&self) -> f64 {
        let power: f64 = (1..=self.harmonics)
            .map(|k| {
                let a = self.fundamental_amplitude / k as f64;
                a * a / 2.0
            })
            .sum();
        power.sqrt()
    }

    /// Noise standard deviation at `noise_floor_gain = 1`.
    pub fn noise_rms(&self) -> f64 {
        self.nominal_rms() * 10f64.powf(-self.snr_db / 20.0)
    }
}

/// One tone of the parasitic ringing comb around harmonic `harmonic`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sideband {
    pub harmonic: usize,
    pub offset_hz: f64,
    /// Relative to the harmonic's base amplitude `A_k`.
    pub amplitude: f64,
    pub phase: f64,
}

/// Hidden per-device parameters that make each noise fingerprint unique.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub device_id: u32,
    pub seed: u64,
    pub harmonic_gains: Vec<f64>,
    pub harmonic_phase_offsets: Vec<f64>,
    /// Fractional frequency offset applied to every harmonic.
    pub parasitic_jitter: f64,
    pub noise_floor_gain: f64,
    pub sidebands: Vec<Sideband>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatingCondition {
    pub switching_freq: f64,
    pub load_level: f64,
    pub temperature: f64,
}

impl Default for OperatingCondition {
    fn default() -> Self {
        Self {
            switching_freq: 100_000.0,
            load_level: 1.0,
            temperature: 25.0,
        }
    }
}

impl OperatingCondition {
    pub fn new(switching_freq: f64, load_level: f64, temperature: f64) -> Result<Self> {
        let c = Self {
            switching_freq,
            load_level,
            temperature,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.switching_freq > 0.0 && self.switching_freq.is_finite()) {
            return Err(Error::param("switching_freq", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.load_level) {
            return Err(Error::param("load_level", "must lie in [0, 1]"));
        }
        if !self.temperature.is_finite() {
            return Err(Error::param("temperature", "must be finite"));
        }
        Ok(())
    }

    /// Harmonic frequencies `k * f_sw` for `k = 1..=count`.
    pub fn harmonic_freqs(&self, count: usize) -> Vec<f64> {
        (1..=count).map(|k| k as f64 * self.switching_freq).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceLabel {
    Benign,
    EmiSpoof,
    Tamper,
    Impersonation,
}

impl TraceLabel {
    pub fn is_attack(self) -> bool {
        self != TraceLabel::Benign
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TraceLabel::Benign => "benign",
            TraceLabel::EmiSpoof => "emi_spoof",
            TraceLabel::Tamper => "tamper",
            TraceLabel::Impersonation => "impersonation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseTrace {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub device_id: u32,
    pub condition: OperatingCondition,
    pub label: TraceLabel,
    pub seed: u64,
}

impl NoiseTrace {
    pub fn rms(&self) -> f64 {
        rms(&self.samples)
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }
}

pub(crate) fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    EmiSpoof,
    Tamper,
    Impersonation,
}

impl AttackKind {
    pub const ALL: [AttackKind; 3] = [
        AttackKind::EmiSpoof,
        AttackKind::Tamper,
        AttackKind::Impersonation,
    ];

    pub fn label(self) -> TraceLabel {
        match self {
            AttackKind::EmiSpoof => TraceLabel::EmiSpoof,
            AttackKind::Tamper => TraceLabel::Tamper,
            AttackKind::Impersonation => TraceLabel::Impersonation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub kind: AttackKind,
    /// Injected tone amplitude relative to the benign trace RMS.
    pub amplitude: f64,
    pub freq_offset: f64,
    /// Tamper noise standard deviation in volts.
    pub sigma: f64,
    pub rogue_profile: Option<DeviceProfile>,
}

impl AttackSpec {
    pub fn emi_spoof(amplitude: f64, freq_offset: f64) -> Self {
        Self {
            kind: AttackKind::EmiSpoof,
            amplitude,
            freq_offset,
            sigma: 0.0,
            rogue_profile: None,
        }
    }

    pub fn tamper(sigma: f64) -> Self {
        Self {
            kind: AttackKind::Tamper,
            amplitude: 0.0,
            freq_offset: 0.0,
            sigma,
            rogue_profile: None,
        }
    }

    pub fn impersonation(rogue: DeviceProfile) -> Self {
        Self {
            kind: AttackKind::Impersonation,
            amplitude: 0.0,
            freq_offset: 0.0,
            sigma: 0.0,
            rogue_profile: Some(rogue),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0) {
            return Err(Error::param("amplitude", "must be nonnegative"));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::param("sigma", "must be nonnegative"));
        }
        Ok(())
    }
}

/// Generator bound to one [`SynthConfig`].
#[derive(Debug, Clone, Default)]
pub struct Synthesizer {
    cfg: SynthConfig,
}

impl Synthesizer {
    pub fn new(cfg: SynthConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &SynthConfig {
        &self.cfg
    }

    pub fn make_device_profile(
        &self,
        device_id: u32,
        seed: u64,
        variability: f64,
    ) -> Result<DeviceProfile> {
        if !(variability > 0.0 && variability <= 0.5) {
            return Err(Error::param("variability", "must lie in (0, 0.5]"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = self.cfg.harmonics;
        let harmonic_gains = (0..k)
            .map(|_| rng.random_range(1.0 - variability..=1.0 + variability))
            .collect();
        let harmonic_phase_offsets = (0..k).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        let parasitic_jitter = rng.random_range(-variability..=variability) * 1e-3;
        let noise_floor_gain = rng.random_range(1.0 - variability..=1.0 + variability);

        let m = self.cfg.sidebands_per_side as i64;
        let mut sidebands = Vec::with_capacity(self.cfg.sideband_harmonics * 2 * m as usize);
        for harmonic in 1..=self.cfg.sideband_harmonics {
            for j in (-m..=m).filter(|&j| j != 0) {
                let ratio = rng.random_range(self.cfg.sideband_min_ratio..=1.0);
                sidebands.push(Sideband {
                    harmonic,
                    offset_hz: j as f64 * self.cfg.sideband_spacing_hz,
                    amplitude: ratio * self.cfg.sideband_level,
                    phase: rng.random_range(0.0..2.0 * PI),
                });
            }
        }

        Ok(DeviceProfile {
            device_id,
            seed,
            harmonic_gains,
            harmonic_phase_offsets,
            parasitic_jitter,
            noise_floor_gain,
            sidebands,
        })
    }

    fn check_profile(&self, profile: &DeviceProfile) -> Result<()> {
        let k = profile.harmonic_gains.len();
        if k == 0 || profile.harmonic_phase_offsets.len() != k {
            return Err(Error::LengthMismatch {
                expected: k,
                got: profile.harmonic_phase_offsets.len(),
            });
        }
        if profile.harmonic_gains.iter().any(|&g| !(g > 0.0)) {
            return Err(Error::param("harmonic_gains", "must be strictly positive"));
        }
        if !(profile.noise_floor_gain >= 0.0) {
            return Err(Error::param("noise_floor_gain", "must be nonnegative"));
        }
        Ok(())
    }

    /// Highest tone frequency the generator would emit for this profile and condition.
    pub fn highest_frequency(&self, profile: &DeviceProfile, cond: &OperatingCondition) -> f64 {
        let scale = cond.switching_freq * (1.0 + profile.parasitic_jitter);
        let top_harmonic = profile.harmonic_gains.len() as f64 * scale;
        profile
            .sidebands
            .iter()
            .map(|sb| sb.harmonic as f64 * scale + sb.offset_hz)
            .fold(top_harmonic, f64::max)
    }

    fn check_nyquist(&self, profile: &DeviceProfile, cond: &OperatingCondition) -> Result<()> {
        let fs = self.cfg.sample_rate;
        let top_harmonic = profile.harmonic_gains.len() as f64
            * cond.switching_freq
            * (1.0 + profile.parasitic_jitter.abs());
        let highest = self.highest_frequency(profile, cond).max(top_harmonic);
        // Harmonics need a 4x margin; sidebands only need to stay below Nyquist.
        if 4.0 * top_harmonic > fs || highest >= fs / 2.0 {
            return Err(Error::AboveNyquist {
                highest_hz: highest,
                nyquist_hz: fs / 2.0,
            });
        }
        Ok(())
    }

    /// Deterministic harmonic + sideband waveform, `n` samples starting at t = 0.
    pub fn deterministic(
        &self,
        profile: &DeviceProfile,
        cond: &OperatingCondition,
        n: usize,
    ) -> Result<Vec<f64>> {
        cond.validate()?;
        self.check_profile(profile)?;
        self.check_nyquist(profile, cond)?;

        let fs = self.cfg.sample_rate;
        let temp = 1.0 + self.cfg.temp_coeff * (cond.temperature - self.cfg.reference_temp);
        let base = |k: usize| self.cfg.fundamental_amplitude / k as f64 * temp;
        let f0 = cond.switching_freq * (1.0 + profile.parasitic_jitter);

        let mut tones: Vec<(f64, f64, f64)> = Vec::new();
        for (i, (&gain, &phase)) in profile
            .harmonic_gains
            .iter()
            .zip(&profile.harmonic_phase_offsets)
            .enumerate()
        {
            let k = i + 1;
            let load = if k == 1 { cond.load_level } else { 1.0 };
            tones.push((k as f64 * f0, gain * base(k) * load, phase));
        }
        for sb in &profile.sidebands {
            tones.push((
                sb.harmonic as f64 * f0 + sb.offset_hz,
                sb.amplitude * base(sb.harmonic),
                sb.phase,
            ));
        }

        let tones: Vec<(f64, f64, f64)> = tones
            .into_iter()
            .filter(|t| t.1 != 0.0)
            .map(|(freq, amp, phase)| (amp, 2.0 * PI * freq / fs, phase))
            .collect();
        let mut out = vec![0.0; n];
        add_tones(&mut out, &tones);
        Ok(out)
    }

    /// Benign trace: deterministic waveform plus Gaussian and uniform noise.
    pub fn synthesize_trace(
        &self,
        profile: &DeviceProfile,
        cond: &OperatingCondition,
        duration: f64,
        rng_seed: u64,
    ) -> Result<NoiseTrace> {
        let n = self.samples_for(duration)?;
        let clean = self.deterministic(profile, cond, n)?;
        Ok(self.add_noise(profile, cond, clean, rng_seed))
    }

    /// Number of samples covering `duration`, rejecting anything shorter than `min_samples`.
    pub fn samples_for(&self, duration: f64) -> Result<usize> {
        let n = (duration * self.cfg.sample_rate).round();
        let min = self.cfg.min_samples;
        if !(n >= min as f64) {
            return Err(Error::param(
                "duration",
                format!(
                    "{duration} s gives {n} samples; minimum is {min} samples ({} s)",
                    min as f64 / self.cfg.sample_rate
                ),
            ));
        }
        Ok(n as usize)
    }

    /// Completes a precomputed deterministic waveform into a benign trace.
    pub fn add_noise(
        &self,
        profile: &DeviceProfile,
        cond: &OperatingCondition,
        mut samples: Vec<f64>,
        rng_seed: u64,
    ) -> NoiseTrace {
        let sigma = self.cfg.noise_rms() * profile.noise_floor_gain;
        if sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            let g_sigma = sigma * (1.0 - self.cfg.uniform_fraction).sqrt();
            // Uniform(-a, a) has variance a^2 / 3.
            let u_half = sigma * (3.0 * self.cfg.uniform_fraction).sqrt();
            let normal = Normal::new(0.0, g_sigma).expect("finite sigma");
            for s in samples.iter_mut() {
                *s += normal.sample(&mut rng);
                if u_half > 0.0 {
                    *s += rng.random_range(-u_half..u_half);
                }
            }
        }
        NoiseTrace {
            samples,
            sample_rate: self.cfg.sample_rate,
            device_id: profile.device_id,
            condition: *cond,
            label: TraceLabel::Benign,
            seed: rng_seed,
        }
    }
}

const RESYNC: usize = 1024;
const LANES: usize = 4;

/// Adds `amp * sin(step * n + phase)` using a rotating phasor, resynchronized
/// to the exact angle every 1024 samples to bound drift.
fn add_tone(out: &mut [f64], amp: f64, step: f64, phase: f64) {
    add_tones(out, &[(amp, step, phase)]);
}

/// Sum of `(amp, step, phase)` tones; phasors advance four at a time so the
/// recurrences overlap.
fn add_tones(out: &mut [f64], tones: &[(f64, f64, f64)]) {
    for group in tones.chunks(LANES) {
        let mut amp = [0.0; LANES];
        let mut rot = [(0.0, 1.0); LANES];
        let mut step = [0.0; LANES];
        let mut phase = [0.0; LANES];
        for (l, &(a, st, ph)) in group.iter().enumerate() {
            amp[l] = a;
            rot[l] = st.sin_cos();
            step[l] = st;
            phase[l] = ph;
        }
        for (block, chunk) in out.chunks_mut(RESYNC).enumerate() {
            let start = (block * RESYNC) as f64;
            let mut s = [0.0; LANES];
            let mut c = [0.0; LANES];
            for l in 0..group.len() {
                (s[l], c[l]) = (step[l] * start + phase[l]).sin_cos();
            }
            for v in chunk {
                let mut acc = 0.0;
                for l in 0..LANES {
                    acc += amp[l] * s[l];
                    let (rs, rc) = rot[l];
                    let ns = s[l] * rc + c[l] * rs;
                    c[l] = c[l] * rc - s[l] * rs;
                    s[l] = ns;
                }
                *v += acc;
            }
        }
    }
}

pub fn make_device_profile(device_id: u32, seed: u64, variability: f64) -> Result<DeviceProfile> {
    Synthesizer::default().make_device_profile(device_id, seed, variability)
}

pub fn synthesize_trace(
    profile: &DeviceProfile,
    cond: &OperatingCondition,
    duration: f64,
    rng_seed: u64,
) -> Result<NoiseTrace> {
    Synthesizer::default().synthesize_trace(profile, cond, duration, rng_seed)
}

/// Adds `amplitude * RMS(trace) * sin(2 pi (f_sw + freq_offset) t)`.
pub fn inject_emi_spoof(trace: &NoiseTrace, spec: &AttackSpec) -> Result<NoiseTrace> {
    if spec.kind != AttackKind::EmiSpoof {
        return Err(Error::WrongAttackKind {
            expected: "emi_spoof",
            got: format!("{:?}", spec.kind),
        });
    }
    spec.validate()?;
    let mut out = trace.clone();
    out.label = TraceLabel::EmiSpoof;
    let amp = spec.amplitude * trace.rms();
    let freq = trace.condition.switching_freq + spec.freq_offset;
    if freq >= trace.sample_rate / 2.0 {
        return Err(Error::AboveNyquist {
            highest_hz: freq,
            nyquist_hz: trace.sample_rate / 2.0,
        });
    }
    if amp > 0.0 {
        add_tone(&mut out.samples, amp, 2.0 * PI * freq / trace.sample_rate, 0.0);
    }
    Ok(out)
}

/// Adds zero-mean Gaussian noise with standard deviation `spec.sigma`.
pub fn inject_tamper(trace: &NoiseTrace, spec: &AttackSpec, rng_seed: u64) -> Result<NoiseTrace> {
    if spec.kind != AttackKind::Tamper {
        return Err(Error::WrongAttackKind {
            expected: "tamper",
            got: format!("{:?}", spec.kind),
        });
    }
    spec.validate()?;
    let mut out = trace.clone();
    out.label = TraceLabel::Tamper;
    if spec.sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let normal = Normal::new(0.0, spec.sigma).expect("finite sigma");
        for s in out.samples.iter_mut() {
            *s += normal.sample(&mut rng);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSidecar {
    pub sample_rate: f64,
    pub device_id: u32,
    pub condition: OperatingCondition,
    pub label: TraceLabel,
    pub seed: u64,
    pub n_samples: usize,
    pub format: String,
}

const TRACE_FORMAT: &str = "f32le";

/// Writes `<stem>.f32` (little-endian f32 samples) and `<stem>.json` (sidecar).
pub fn write_trace(trace: &NoiseTrace, stem: &Path) -> Result<(PathBuf, PathBuf)> {
    let bin = stem.with_extension("f32");
    let json = stem.with_extension("json");
    let mut bytes = Vec::with_capacity(trace.samples.len() * 4);
    for &s in &trace.samples {
        bytes.extend_from_slice(&(s as f32).to_le_bytes());
    }
    fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))?;
    let sidecar = TraceSidecar {
        sample_rate: trace.sample_rate,
        device_id: trace.device_id,
        condition: trace.condition,
        label: trace.label,
        seed: trace.seed,
        n_samples: trace.samples.len(),
        format: TRACE_FORMAT.into(),
    };
    let text = serde_json::to_string_pretty(&sidecar).map_err(|e| Error::json(&json, e))?;
    fs::write(&json, text + "\n").map_err(|e| Error::io(&json, e))?;
    Ok((bin, json))
}

/// Reads a trace written by [`write_trace`]; `path` may name either file or the stem.
pub fn read_trace(path: &Path) -> Result<NoiseTrace> {
    let bin = path.with_extension("f32");
    let json = path.with_extension("json");
    let text = fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
    let sidecar: TraceSidecar = serde_json::from_str(&text).map_err(|e| Error::json(&json, e))?;
    if sidecar.format != TRACE_FORMAT {
        return Err(Error::param("format", format!("unsupported {}", sidecar.format)));
    }
    let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    if bytes.len() != sidecar.n_samples * 4 {
        return Err(Error::LengthMismatch {
            expected: sidecar.n_samples * 4,
            got: bytes.len(),
        });
    }
    let samples = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok(NoiseTrace {
        samples,
        sample_rate: sidecar.sample_rate,
        device_id: sidecar.device_id,
        condition: sidecar.condition,
        label: sidecar.label,
        seed: sidecar.seed,
    })
}

/// Optional plain-text export, one `time,sample` row per sample.
pub fn write_trace_csv(trace: &NoiseTrace, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut buf = String::from("time_s,sample\n");
    for (i, s) in trace.samples.iter().enumerate() {
        buf.push_str(&format!("{:e},{:e}\n", i as f64 / trace.sample_rate, s));
    }
    f.write_all(buf.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet() -> Synthesizer {
        Synthesizer::new(SynthConfig {
            harmonics: 1,
            sideband_harmonics: 0,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn profile_is_deterministic() {
        let a = make_device_profile(0, 7, 0.1).unwrap();
        let b = make_device_profile(0, 7, 0.1).unwrap();
        assert_eq!(a, b);
        let c = make_device_profile(0, 8, 0.1).unwrap();
        assert_ne!(a.harmonic_gains, c.harmonic_gains);
    }

    #[test]
    fn fleet_profiles_pairwise_distinct() {
        let fleet: Vec<_> = (0..10)
            .map(|i| make_device_profile(i, 1000 + i as u64, 0.1).unwrap())
            .collect();
        let mut pairs = 0;
        for i in 0..fleet.len() {
            for j in i + 1..fleet.len() {
                assert_ne!(fleet[i].harmonic_gains, fleet[j].harmonic_gains);
                pairs += 1;
            }
        }
        assert_eq!(pairs, 45);
    }

    #[test]
    fn gains_within_variability() {
        let p = make_device_profile(0, 3, 0.2).unwrap();
        assert!(p.harmonic_gains.iter().all(|&g| (0.8..=1.2).contains(&g)));
        assert!(p.parasitic_jitter.abs() <= 2e-4);
    }

    #[test]
    fn rejects_bad_variability() {
        for v in [0.0, -0.1, 0.51, f64::NAN] {
            assert!(make_device_profile(0, 1, v).is_err(), "v = {v}");
        }
        assert!(make_device_profile(0, 1, 0.5).is_ok());
    }

    #[test]
    fn trace_is_deterministic() {
        let p = make_device_profile(1, 11, 0.1).unwrap();
        let cond = OperatingCondition::default();
        let a = synthesize_trace(&p, &cond, 0.005, 99).unwrap();
        let b = synthesize_trace(&p, &cond, 0.005, 99).unwrap();
        assert_eq!(a.samples, b.samples);
        let c = synthesize_trace(&p, &cond, 0.005, 100).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn short_duration_names_minimum() {
        let p = make_device_profile(1, 11, 0.1).unwrap();
        let err = synthesize_trace(&p, &OperatingCondition::default(), 1e-4, 0).unwrap_err();
        assert!(err.to_string().contains("16384"), "{err}");
    }

    #[test]
    fn phasor_matches_direct_sine() {
        let mut out = vec![0.0; 5000];
        let step = 2.0 * PI * 123_456.7 / 4.0e6;
        add_tone(&mut out, 0.7, step, 1.1);
        for (n, v) in out.iter().enumerate() {
            let want = 0.7 * (step * n as f64 + 1.1).sin();
            assert!((v - want).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn pure_tone_without_noise() {
        let s = quiet();
        let mut p = s.make_device_profile(0, 5, 0.1).unwrap();
        p.noise_floor_gain = 0.0;
        p.parasitic_jitter = 0.0;
        let t = s
            .synthesize_trace(&p, &OperatingCondition::default(), 0.005, 0)
            .unwrap();
        let amp = p.harmonic_gains[0];
        let rms = t.rms();
        assert!((rms - amp / 2f64.sqrt()).abs() < 1e-3, "rms {rms}");
    }

    #[test]
    fn nyquist_violation_is_an_error() {
        let s = Synthesizer::new(SynthConfig {
            sample_rate: 1.0e6,
            ..SynthConfig::default()
        })
        .unwrap();
        let p = s.make_device_profile(0, 1, 0.1).unwrap();
        let err = s
            .synthesize_trace(&p, &OperatingCondition::default(), 0.02, 0)
            .unwrap_err();
        assert!(matches!(err, Error::AboveNyquist { .. }));
    }

    #[test]
    fn highest_frequency_below_nyquist_by_default() {
        let s = Synthesizer::default();
        let p = s.make_device_profile(0, 1, 0.5).unwrap();
        let cond = OperatingCondition::default();
        assert!(s.highest_frequency(&p, &cond) < s.config().sample_rate / 2.0);
        assert!(4.0 * 8.0 * 100_000.0 * (1.0 + p.parasitic_jitter) <= s.config().sample_rate);
    }

    #[test]
    fn condition_validation() {
        assert!(OperatingCondition::new(0.0, 0.5, 25.0).is_err());
        assert!(OperatingCondition::new(1e5, 1.5, 25.0).is_err());
        assert!(OperatingCondition::new(1e5, 0.5, 25.0).is_ok());
    }

    #[test]
    fn emi_zero_amplitude_is_identity() {
        let p = make_device_profile(1, 2, 0.1).unwrap();
        let t = synthesize_trace(&p, &OperatingCondition::default(), 0.005, 1).unwrap();
        let out = inject_emi_spoof(&t, &AttackSpec::emi_spoof(0.0, 0.0)).unwrap();
        assert_eq!(out.samples, t.samples);
        assert_eq!(out.label, TraceLabel::EmiSpoof);
    }

    #[test]
    fn injectors_reject_wrong_kind() {
        let p = make_device_profile(1, 2, 0.1).unwrap();
        let t = synthesize_trace(&p, &OperatingCondition::default(), 0.005, 1).unwrap();
        assert!(inject_emi_spoof(&t, &AttackSpec::tamper(0.1)).is_err());
        assert!(inject_tamper(&t, &AttackSpec::emi_spoof(0.1, 0.0), 0).is_err());
        assert!(inject_tamper(&t, &AttackSpec::tamper(-1.0), 0).is_err());
    }

    #[test]
    fn tamper_zero_sigma_is_identity() {
        let p = make_device_profile(1, 2, 0.1).unwrap();
        let t = synthesize_trace(&p, &OperatingCondition::default(), 0.005, 1).unwrap();
        let out = inject_tamper(&t, &AttackSpec::tamper(0.0), 5).unwrap();
        assert_eq!(out.samples, t.samples);
        assert_eq!(out.label, TraceLabel::Tamper);
    }

    #[test]
    fn tamper_adds_sigma_squared_variance() {
        let p = make_device_profile(1, 2, 0.1).unwrap();
        let t = synthesize_trace(&p, &OperatingCondition::default(), 0.05, 1).unwrap();
        let sigma = 0.2;
        let out = inject_tamper(&t, &AttackSpec::tamper(sigma), 9).unwrap();
        let n = t.samples.len() as f64;
        assert!(n >= 1e5);
        let diff: Vec<f64> = out.samples.iter().zip(&t.samples).map(|(a, b)| a - b).collect();
        let mean_shift = diff.iter().sum::<f64>() / n;
        assert!(mean_shift.abs() < 3.0 * sigma / n.sqrt());
        let var = |x: &[f64]| {
            let m = x.iter().sum::<f64>() / n;
            x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)
        };
        let gained = var(&out.samples) - var(&t.samples);
        assert!((gained / (sigma * sigma) - 1.0).abs() < 0.1, "gained {gained}");
    }

    #[test]
    fn trace_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = make_device_profile(4, 2, 0.1).unwrap();
        let t = synthesize_trace(&p, &OperatingCondition::default(), 0.005, 1).unwrap();
        write_trace(&t, &dir.path().join("dev4")).unwrap();
        let back = read_trace(&dir.path().join("dev4")).unwrap();
        assert_eq!(back.device_id, 4);
        assert_eq!(back.samples.len(), t.samples.len());
        for (a, b) in back.samples.iter().zip(&t.samples) {
            assert_eq!(*a, *b as f32 as f64);
        }
        write_trace_csv(&t, &dir.path().join("dev4.csv")).unwrap();
    }
}
