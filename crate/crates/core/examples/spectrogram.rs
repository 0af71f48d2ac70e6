//! STFT of one trace, the strongest bins, and the 64-value feature vector.
//! Pass a path stem to also write the spectrogram as CSV.
//!
//! cargo run --release --example spectrogram -- /tmp/spec

use noisepuf::spectral::{FeatureConfig, FeatureExtractor, StftConfig};
use noisepuf::synth::{make_device_profile, synthesize_trace, OperatingCondition};

fn main() -> noisepuf::Result<()> {
    let profile = make_device_profile(0, 1_000, 0.1)?;
    let trace = synthesize_trace(&profile, &OperatingCondition::default(), 0.032_768, 5)?;

    let fx = FeatureExtractor::new(StftConfig::default(), FeatureConfig::default())?;
    let spec = fx.stft().process(&trace.samples, trace.sample_rate)?;
    println!(
        "{} frames x {} bins, {:.2} Hz per bin",
        spec.magnitudes.len(),
        spec.n_bins(),
        spec.bin_hz
    );

    let avg = spec.time_average();
    let mut peaks: Vec<(usize, f64)> = avg.iter().copied().enumerate().collect();
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    println!("strongest bins:");
    for (bin, mag) in peaks.iter().take(8) {
        println!("  {:>9.1} Hz  {:.1}", *bin as f64 * spec.bin_hz, mag);
    }

    let f = fx.extract(&trace)?;
    println!("features (band energy {:.1}):", f.band_energy);
    for (band, chunk) in f.values.chunks(16).enumerate() {
        let row: Vec<String> = chunk.iter().map(|v| format!("{:.4}", v)).collect();
        println!("  h{}: {}", band + 1, row.join(" "));
    }

    if let Some(stem) = std::env::args().nth(1) {
        spec.write_csv(stem.as_ref())?;
        println!("wrote {stem}.csv");
    }
    Ok(())
}
