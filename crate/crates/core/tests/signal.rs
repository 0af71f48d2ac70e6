use noisepuf::spectral::{FeatureConfig, FeatureExtractor, Spectrogram, StftConfig};
use noisepuf::synth::{
    inject_emi_spoof, AttackSpec, DeviceProfile, NoiseTrace, OperatingCondition, Synthesizer,
};

const N: usize = 131_072;

fn quiet_profile(synth: &Synthesizer, seed: u64) -> DeviceProfile {
    let mut p = synth.make_device_profile(0, seed, 0.1).unwrap();
    p.noise_floor_gain = 0.0;
    p
}

fn trace(synth: &Synthesizer, p: &DeviceProfile, cond: OperatingCondition, seed: u64) -> NoiseTrace {
    let clean = synth.deterministic(p, &cond, N).unwrap();
    synth.add_noise(p, &cond, clean, seed)
}

fn spectrum(t: &NoiseTrace) -> Spectrogram {
    noisepuf::spectral::stft(t, &StftConfig::default()).unwrap()
}

/// Power in the peak bin nearest `hz` and its two neighbours.
fn tone_power(avg: &[f64], bin_hz: f64, hz: f64) -> f64 {
    let c = (hz / bin_hz).round() as usize;
    let peak = (c - 2..=c + 2).max_by(|&a, &b| avg[a].total_cmp(&avg[b])).unwrap();
    (peak - 1..=peak + 1).map(|i| avg[i] * avg[i]).sum()
}

#[test]
fn halving_load_quarters_fundamental_power() {
    let synth = Synthesizer::default();
    let p = quiet_profile(&synth, 3);
    let full = spectrum(&trace(&synth, &p, OperatingCondition::new(100e3, 1.0, 25.0).unwrap(), 0));
    let half = spectrum(&trace(&synth, &p, OperatingCondition::new(100e3, 0.5, 25.0).unwrap(), 0));
    let ratio = tone_power(&full.time_average(), full.bin_hz, 100e3)
        / tone_power(&half.time_average(), half.bin_hz, 100e3);
    assert!((ratio - 4.0).abs() < 0.2, "power ratio {ratio}");
    // Higher harmonics do not follow the load.
    let r2 = tone_power(&full.time_average(), full.bin_hz, 200e3)
        / tone_power(&half.time_average(), half.bin_hz, 200e3);
    assert!((r2 - 1.0).abs() < 0.01, "second harmonic ratio {r2}");
}

#[test]
fn offset_emi_tone_appears_at_offset() {
    let synth = Synthesizer::default();
    let p = synth.make_device_profile(0, 4, 0.1).unwrap();
    let benign = trace(&synth, &p, OperatingCondition::default(), 1);
    let attacked = inject_emi_spoof(&benign, &AttackSpec::emi_spoof(0.5, 2_000.0)).unwrap();
    let (b, a) = (spectrum(&benign), spectrum(&attacked));
    let diff: Vec<f64> = a.time_average().iter().zip(b.time_average()).map(|(x, y)| x - y).collect();
    let peak = (0..diff.len()).max_by(|&i, &j| diff[i].total_cmp(&diff[j])).unwrap();
    let hz = peak as f64 * a.bin_hz;
    assert!((hz - 102_000.0).abs() <= a.bin_hz, "difference peaks at {hz} Hz");
    let avg = a.time_average();
    assert!(avg[peak] > avg[peak - 1] && avg[peak] > avg[peak + 1], "no local peak");
}

fn fundamental_power(t: &NoiseTrace) -> f64 {
    let s = spectrum(t);
    tone_power(&s.time_average(), s.bin_hz, 100e3)
}

#[test]
fn in_band_emi_raises_fundamental_power() {
    let synth = Synthesizer::default();
    let spec = AttackSpec::emi_spoof(0.5, 0.0);
    // Phase-aligned with the switching fundamental: strictly more power.
    let mut p = synth.make_device_profile(0, 5, 0.1).unwrap();
    p.parasitic_jitter = 0.0;
    p.harmonic_phase_offsets[0] = 0.0;
    let benign = trace(&synth, &p, OperatingCondition::default(), 2);
    let attacked = inject_emi_spoof(&benign, &spec).unwrap();
    assert!(fundamental_power(&attacked) > 1.5 * fundamental_power(&benign));

    // Over random relative phase the gain is the injected power, on average.
    let (mut before, mut after) = (0.0, 0.0);
    for s in 0..16 {
        let p = synth.make_device_profile(0, 200 + s, 0.1).unwrap();
        let benign = trace(&synth, &p, OperatingCondition::default(), s);
        before += fundamental_power(&benign);
        after += fundamental_power(&inject_emi_spoof(&benign, &spec).unwrap());
    }
    assert!(after > before, "{after} <= {before}");
}

#[test]
fn one_hop_shift_barely_moves_features() {
    // 128000 samples hold a whole number of periods of every tone (jitter
    // removed), so the circular shift is a pure time shift.
    let synth = Synthesizer::default();
    let mut p = quiet_profile(&synth, 6);
    p.parasitic_jitter = 0.0;
    let cond = OperatingCondition::default();
    let t = synth.add_noise(&p, &cond, synth.deterministic(&p, &cond, 128_000).unwrap(), 0);
    let mut shifted = t.clone();
    shifted.samples.rotate_right(StftConfig::default().hop);
    let fx = FeatureExtractor::new(StftConfig::default(), FeatureConfig::default()).unwrap();
    let (a, b) = (fx.extract(&t).unwrap(), fx.extract(&shifted).unwrap());
    for (i, (x, y)) in a.values.iter().zip(&b.values).enumerate() {
        assert!((x - y).abs() / x < 0.01, "feature {i}: {x} vs {y}");
    }
}

#[test]
fn distinct_seeds_give_distinct_fingerprints() {
    let synth = Synthesizer::default();
    let fx = FeatureExtractor::new(StftConfig::default(), FeatureConfig::default()).unwrap();
    let feats: Vec<Vec<f64>> = (0..6)
        .map(|s| {
            let t = trace(&synth, &quiet_profile(&synth, 100 + s), OperatingCondition::default(), 0);
            fx.extract(&t).unwrap().values[..16].to_vec()
        })
        .collect();
    for i in 0..feats.len() {
        for j in i + 1..feats.len() {
            let mad: f64 = feats[i].iter().zip(&feats[j]).map(|(a, b)| (a - b).abs()).sum::<f64>() / 16.0;
            assert!(mad > 1e-4, "devices {i} and {j}: {mad}");
        }
    }
}

#[test]
fn emitted_energy_stays_below_nyquist() {
    let synth = Synthesizer::default();
    let p = synth.make_device_profile(0, 7, 0.5).unwrap();
    let cond = OperatingCondition::default();
    assert!(synth.highest_frequency(&p, &cond) < synth.config().sample_rate / 2.0);
    let fast = OperatingCondition::new(400e3, 1.0, 25.0).unwrap();
    assert!(synth.deterministic(&p, &fast, N).is_err());
}
