//! STFT spectrograms and harmonic-band feature vectors.
//!
//! Magnitudes are the unnormalized windowed DFT, `|sum_n w[n] x[n] e^{-2 pi i k n / N}|`,
//! for the non-negative bins `0..=N/2`. The window sum and power are carried
//! in the output so amplitude or power scaling can be recovered downstream:
//! a bin-centred tone of amplitude `a` reads `a * window_sum / 2`, and
//! Parseval gives `sum_n (w x)^2 = (1/N) sum_k |X_k|^2` over the full spectrum.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::NoiseTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Hann,
    Rect,
}

impl WindowKind {
    /// Periodic window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            WindowKind::Rect => vec![1.0; n],
            WindowKind::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StftConfig {
    pub window_kind: WindowKind,
    pub window_len: usize,
    pub hop: usize,
    pub fft_len: usize,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            window_kind: WindowKind::Hann,
            window_len: 16_384,
            hop: 8_192,
            fft_len: 16_384,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hop == 0 || self.hop > self.window_len || self.window_len > self.fft_len {
            return Err(Error::param(
                "stft",
                format!(
                    "need 0 < hop <= window_len <= fft_len, got {} / {} / {}",
                    self.hop, self.window_len, self.fft_len
                ),
            ));
        }
        if !self.fft_len.is_power_of_two() {
            return Err(Error::param("fft_len", "must be a power of two"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrogram {
    /// `[frame][bin]`, bins `0..=fft_len / 2`.
    pub magnitudes: Vec<Vec<f64>>,
    pub bin_hz: f64,
    pub frame_times: Vec<f64>,
    pub sample_rate: f64,
    pub fft_len: usize,
    pub window_sum: f64,
    pub window_power: f64,
}

impl Spectrogram {
    pub fn n_bins(&self) -> usize {
        self.fft_len / 2 + 1
    }

    pub fn max_hz(&self) -> f64 {
        (self.n_bins() - 1) as f64 * self.bin_hz
    }

    /// Mean magnitude per bin across frames.
    pub fn time_average(&self) -> Vec<f64> {
        let mut avg = vec![0.0; self.n_bins()];
        for frame in &self.magnitudes {
            for (a, m) in avg.iter_mut().zip(frame) {
                *a += m;
            }
        }
        let n = self.magnitudes.len().max(1) as f64;
        avg.iter_mut().for_each(|a| *a /= n);
        avg
    }

    /// Writes `<stem>.csv` (one row per frame) and `<stem>.json` (bin_hz, frame_times).
    pub fn write_csv(&self, stem: &Path) -> Result<()> {
        let csv = stem.with_extension("csv");
        let json = stem.with_extension("json");
        let mut out = String::new();
        for frame in &self.magnitudes {
            let row: Vec<String> = frame.iter().map(|m| format!("{m:e}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        fs::write(&csv, out).map_err(|e| Error::io(&csv, e))?;
        let header = serde_json::json!({
            "bin_hz": self.bin_hz,
            "frame_times": self.frame_times,
            "sample_rate": self.sample_rate,
            "fft_len": self.fft_len,
            "window_sum": self.window_sum,
            "window_power": self.window_power,
        });
        let text = serde_json::to_string_pretty(&header).map_err(|e| Error::json(&json, e))?;
        fs::write(&json, text + "\n").map_err(|e| Error::io(&json, e))
    }
}

/// STFT with a cached FFT plan. Immutable after construction, so one
/// instance may be shared across threads.
#[derive(Clone)]
pub struct Stft {
    cfg: StftConfig,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Stft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stft").field("cfg", &self.cfg).finish()
    }
}

impl Stft {
    pub fn new(cfg: StftConfig) -> Result<Self> {
        cfg.validate()?;
        let fft = FftPlanner::new().plan_fft_forward(cfg.fft_len);
        Ok(Self {
            cfg,
            window: cfg.window_kind.coefficients(cfg.window_len),
            fft,
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.cfg
    }

    pub fn process(&self, samples: &[f64], sample_rate: f64) -> Result<Spectrogram> {
        let cfg = &self.cfg;
        if samples.len() < cfg.window_len {
            return Err(Error::TooShort {
                got: samples.len(),
                min: cfg.window_len,
            });
        }
        let n_frames = 1 + (samples.len() - cfg.window_len) / cfg.hop;
        let n_bins = cfg.fft_len / 2 + 1;
        let mut buf = vec![Complex::new(0.0, 0.0); cfg.fft_len];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let mut magnitudes = Vec::with_capacity(n_frames);
        let mut frame_times = Vec::with_capacity(n_frames);
        for f in 0..n_frames {
            let start = f * cfg.hop;
            for (i, slot) in buf.iter_mut().enumerate() {
                *slot = if i < cfg.window_len {
                    Complex::new(samples[start + i] * self.window[i], 0.0)
                } else {
                    Complex::new(0.0, 0.0)
                };
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            magnitudes.push(buf[..n_bins].iter().map(|c| c.norm()).collect());
            frame_times.push((start as f64 + cfg.window_len as f64 / 2.0) / sample_rate);
        }
        Ok(Spectrogram {
            magnitudes,
            bin_hz: sample_rate / cfg.fft_len as f64,
            frame_times,
            sample_rate,
            fft_len: cfg.fft_len,
            window_sum: self.window.iter().sum(),
            window_power: self.window.iter().map(|w| w * w).sum(),
        })
    }
}

pub fn stft(trace: &NoiseTrace, cfg: &StftConfig) -> Result<Spectrogram> {
    Stft::new(*cfg)?.process(&trace.samples, trace.sample_rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    /// Bands sit at `k * f_sw` for `k = 1..=harmonics`.
    pub harmonics: usize,
    pub half_width: f64,
    pub n_per_band: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            harmonics: 4,
            half_width: 5_000.0,
            n_per_band: 16,
        }
    }
}

impl FeatureConfig {
    pub fn dim(&self) -> usize {
        self.harmonics * self.n_per_band
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// Sums to 1 unless the bands hold no energy, in which case all zeros.
    pub values: Vec<f64>,
    pub band_centers: Vec<f64>,
    /// Sum of the sub-band magnitudes before normalization.
    pub band_energy: f64,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Time-averages the spectrogram, reduces each harmonic band
/// `[h - half_width, h + half_width]` to `n_per_band` equal-width sub-bands
/// (mean magnitude per sub-band), concatenates, and normalizes to sum 1.
pub fn extract_features(
    spec: &Spectrogram,
    harmonics: &[f64],
    half_width: f64,
    n_per_band: usize,
) -> Result<FeatureVector> {
    let avg = spec.time_average();
    features_from_average(&avg, spec.bin_hz, harmonics, half_width, n_per_band)
}

pub(crate) fn features_from_average(
    avg: &[f64],
    bin_hz: f64,
    harmonics: &[f64],
    half_width: f64,
    n_per_band: usize,
) -> Result<FeatureVector> {
    if n_per_band == 0 {
        return Err(Error::param("n_per_band", "must be positive"));
    }
    let max_hz = (avg.len() - 1) as f64 * bin_hz;
    let mut values = Vec::with_capacity(harmonics.len() * n_per_band);
    let mut band_centers = Vec::with_capacity(values.capacity());
    for &h in harmonics {
        if h - half_width < 0.0 || h + half_width > max_hz {
            return Err(Error::BandOutOfRange {
                harmonic_hz: h,
                max_hz,
            });
        }
        let lo = ((h - half_width) / bin_hz).ceil() as usize;
        let hi = ((h + half_width) / bin_hz).floor() as usize;
        let width = hi + 1 - lo;
        if width < n_per_band {
            return Err(Error::param(
                "n_per_band",
                format!("band around {h} Hz holds only {width} bins, fewer than {n_per_band}"),
            ));
        }
        for j in 0..n_per_band {
            let a = lo + j * width / n_per_band;
            let b = lo + (j + 1) * width / n_per_band;
            let mean = avg[a..b].iter().sum::<f64>() / (b - a) as f64;
            values.push(mean);
            band_centers.push((a + b - 1) as f64 / 2.0 * bin_hz);
        }
    }
    let total: f64 = values.iter().sum();
    if total > 0.0 {
        values.iter_mut().for_each(|v| *v /= total);
    } else {
        values.iter_mut().for_each(|v| *v = 0.0);
    }
    Ok(FeatureVector {
        values,
        band_centers,
        band_energy: total,
    })
}

/// STFT plus feature extraction for one operating point.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    stft: Stft,
    features: FeatureConfig,
}

impl FeatureExtractor {
    pub fn new(stft: StftConfig, features: FeatureConfig) -> Result<Self> {
        Ok(Self {
            stft: Stft::new(stft)?,
            features,
        })
    }

    pub fn stft(&self) -> &Stft {
        &self.stft
    }

    pub fn feature_config(&self) -> &FeatureConfig {
        &self.features
    }

    pub fn extract(&self, trace: &NoiseTrace) -> Result<FeatureVector> {
        let spec = self.stft.process(&trace.samples, trace.sample_rate)?;
        extract_features(
            &spec,
            &trace.condition.harmonic_freqs(self.features.harmonics),
            self.features.half_width,
            self.features.n_per_band,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freqs: &[(f64, f64)], fs: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let t = i as f64 / fs;
                freqs.iter().map(|&(f, a)| a * (2.0 * PI * f * t).sin()).sum()
            })
            .collect()
    }

    fn naive_dft_mag(x: &[f64], w: &[f64], n_fft: usize) -> Vec<f64> {
        (0..=n_fft / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (n, (&xv, &wv)) in x.iter().zip(w).enumerate() {
                    let ang = -2.0 * PI * (k * n) as f64 / n_fft as f64;
                    re += xv * wv * ang.cos();
                    im += xv * wv * ang.sin();
                }
                (re * re + im * im).sqrt()
            })
            .collect()
    }

    fn argmax(v: &[f64]) -> usize {
        v.iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc })
            .0
    }

    #[test]
    fn tone_localization() {
        let cfg = StftConfig {
            window_kind: WindowKind::Hann,
            window_len: 4096,
            hop: 2048,
            fft_len: 4096,
        };
        let fs = 1.0e6;
        let x = tone(&[(100_000.0, 1.0)], fs, 8192);
        let spec = Stft::new(cfg).unwrap().process(&x, fs).unwrap();
        assert_eq!(spec.magnitudes.len(), 3);
        let expect = (100_000.0 / spec.bin_hz).round() as usize;
        for frame in &spec.magnitudes {
            assert_eq!(argmax(frame), expect);
        }
    }

    #[test]
    fn zero_trace_gives_zero_spectrogram() {
        let spec = Stft::new(StftConfig::default())
            .unwrap()
            .process(&vec![0.0; 20_000], 4.0e6)
            .unwrap();
        assert!(spec.magnitudes.iter().flatten().all(|&m| m == 0.0));
    }

    #[test]
    fn too_short_is_an_error() {
        let err = Stft::new(StftConfig::default())
            .unwrap()
            .process(&[0.0; 100], 4.0e6)
            .unwrap_err();
        assert!(matches!(err, Error::TooShort { min: 16384, .. }));
    }

    #[test]
    fn config_validation() {
        let bad = [
            (0, 16, 16),
            (32, 16, 16),
            (8, 32, 16),
            (8, 16, 24),
        ];
        for (hop, window_len, fft_len) in bad {
            let cfg = StftConfig {
                window_kind: WindowKind::Hann,
                window_len,
                hop,
                fft_len,
            };
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn two_equal_tones_have_equal_peaks() {
        // 250 Hz bins put both tones on bin centres.
        let fs = 1.024e6;
        let n = 4096;
        let x = tone(&[(100_000.0, 1.0), (200_000.0, 1.0)], fs, n);
        let w = WindowKind::Hann.coefficients(n);
        let oracle = naive_dft_mag(&x, &w, n);
        let cfg = StftConfig {
            window_kind: WindowKind::Hann,
            window_len: n,
            hop: n,
            fft_len: n,
        };
        let spec = Stft::new(cfg).unwrap().process(&x, fs).unwrap();
        let k1 = (100_000.0 / spec.bin_hz).round() as usize;
        let k2 = (200_000.0 / spec.bin_hz).round() as usize;
        let frame = &spec.magnitudes[0];
        assert!(((frame[k1] - frame[k2]) / frame[k1]).abs() < 0.01);
        assert!(((oracle[k1] - oracle[k2]) / oracle[k1]).abs() < 0.01);
        assert!((frame[k1] - oracle[k1]).abs() / oracle[k1] < 1e-9);
    }

    #[test]
    fn matches_naive_dft_with_zero_padding() {
        let fs = 1.0e6;
        let x: Vec<f64> = (0..200).map(|i| ((i * 37 % 101) as f64 / 50.0) - 1.0).collect();
        let cfg = StftConfig {
            window_kind: WindowKind::Hann,
            window_len: 200,
            hop: 200,
            fft_len: 256,
        };
        let spec = Stft::new(cfg).unwrap().process(&x, fs).unwrap();
        let oracle = naive_dft_mag(&x, &WindowKind::Hann.coefficients(200), 256);
        let scale = oracle.iter().cloned().fold(0.0, f64::max);
        for (a, b) in spec.magnitudes[0].iter().zip(&oracle) {
            assert!((a - b).abs() / scale < 1e-9);
        }
    }

    fn synthetic_spec(avg: Vec<f64>, bin_hz: f64) -> Spectrogram {
        let n_bins = avg.len();
        Spectrogram {
            magnitudes: vec![avg],
            bin_hz,
            frame_times: vec![0.0],
            sample_rate: bin_hz * (2 * (n_bins - 1)) as f64,
            fft_len: 2 * (n_bins - 1),
            window_sum: 1.0,
            window_power: 1.0,
        }
    }

    #[test]
    fn single_band_energy_normalizes_to_one() {
        let bin_hz = 244.140625;
        let n_bins = 8193;
        let mut avg = vec![0.0; n_bins];
        let h2 = (200_000.0 / bin_hz) as usize;
        for b in h2 - 10..h2 + 10 {
            avg[b] = 1.0 + b as f64 * 0.01;
        }
        let spec = synthetic_spec(avg, bin_hz);
        let h: Vec<f64> = (1..=4).map(|k| k as f64 * 100_000.0).collect();
        let f = extract_features(&spec, &h, 5_000.0, 16).unwrap();
        assert_eq!(f.len(), 64);
        let band_sum: f64 = f.values[16..32].iter().sum();
        assert!((band_sum - 1.0).abs() < 1e-12);
        let others: f64 = f.values[..16].iter().chain(&f.values[32..]).sum();
        assert_eq!(others, 0.0);
    }

    #[test]
    fn zero_energy_gives_zero_features() {
        let spec = synthetic_spec(vec![0.0; 8193], 244.140625);
        let f = extract_features(&spec, &[100_000.0, 200_000.0, 300_000.0, 400_000.0], 5_000.0, 16)
            .unwrap();
        assert_eq!(f.len(), 64);
        assert!(f.values.iter().all(|&v| v == 0.0));
        assert_eq!(f.band_energy, 0.0);
    }

    #[test]
    fn band_out_of_range_names_harmonic() {
        let spec = synthetic_spec(vec![1.0; 8193], 244.140625);
        let err = extract_features(&spec, &[100_000.0, 1_999_000.0], 5_000.0, 16).unwrap_err();
        match err {
            Error::BandOutOfRange { harmonic_hz, .. } => assert_eq!(harmonic_hz, 1_999_000.0),
            other => panic!("unexpected {other}"),
        }
        assert!(extract_features(&spec, &[2_000.0], 5_000.0, 16).is_err());
    }

    #[test]
    fn scaling_leaves_features_unchanged() {
        let fs = 4.0e6;
        let x = tone(&[(100_000.0, 1.0), (201_000.0, 0.3), (398_000.0, 0.1)], fs, 32_768);
        let y: Vec<f64> = x.iter().map(|v| v * 3.7).collect();
        let st = Stft::new(StftConfig::default()).unwrap();
        let h: Vec<f64> = (1..=4).map(|k| k as f64 * 100_000.0).collect();
        let fx = extract_features(&st.process(&x, fs).unwrap(), &h, 5_000.0, 16).unwrap();
        let fy = extract_features(&st.process(&y, fs).unwrap(), &h, 5_000.0, 16).unwrap();
        for (a, b) in fx.values.iter().zip(&fy.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
