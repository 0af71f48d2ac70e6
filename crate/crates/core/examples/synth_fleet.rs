//! Synthesizes one trace per device, prints its harmonic make-up, and writes
//! the traces (binary + JSON sidecar) to a directory.
//!
//! cargo run --release --example synth_fleet -- /tmp/fleet

use std::path::PathBuf;

use noisepuf::synth::{write_trace, OperatingCondition, Synthesizer};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fleet-traces".into()));
    std::fs::create_dir_all(&out)?;

    let synth = Synthesizer::default();
    let cond = OperatingCondition::new(100_000.0, 1.0, 25.0)?;
    println!("noise rms (unit gain) {:.4} V", synth.config().noise_rms());
    for id in 0..10u32 {
        let profile = synth.make_device_profile(id, 1_000 + id as u64, 0.1)?;
        let trace = synth.synthesize_trace(&profile, &cond, 0.01, 42 + id as u64)?;
        let gains: Vec<String> = profile.harmonic_gains.iter().map(|g| format!("{g:.3}")).collect();
        println!(
            "device {id:02}: rms {:.4} V, {} samples, gains [{}]",
            trace.rms(),
            trace.samples.len(),
            gains.join(" ")
        );
        write_trace(&trace, &out.join(format!("device_{id:02}")))?;
    }
    println!("traces in {}", out.display());
    Ok(())
}
