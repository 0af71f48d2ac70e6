//! Monobit, runs, and block-frequency tests on the fleet's concatenated
//! responses, next to a ChaCha reference stream and a biased stream.
//!
//! cargo run --release --example randomness

use noisepuf::harness::{challenge_list, fleet_profiles, ScenarioConfig};
use noisepuf::puf::{enroll, randomness_tests, PufPipeline, RandomnessReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn show(name: &str, r: &RandomnessReport) {
    println!(
        "{name:<14} n={:<5} monobit {:.4}  runs {:.4}  block {:.4}  {}",
        r.n_bits,
        r.monobit.p_value,
        r.runs.p_value,
        r.block_frequency.p_value,
        if r.passed { "pass" } else { "fail" }
    );
}

fn main() -> noisepuf::Result<()> {
    let cfg = ScenarioConfig::default();
    let pipeline = PufPipeline::new(cfg.pipeline.clone())?;
    let fleet = fleet_profiles(&cfg, pipeline.synthesizer())?;
    let challenges = challenge_list(&cfg);
    let records = enroll(&fleet, &challenges[..1], 16, &pipeline, 3)?;

    let bits: Vec<bool> = records
        .iter()
        .flat_map(|r| r.reference.bits().iter().copied())
        .collect();
    show("fleet", &randomness_tests(&bits, 128)?);

    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let reference: Vec<bool> = (0..bits.len()).map(|_| rng.random()).collect();
    show("chacha20", &randomness_tests(&reference, 128)?);

    let biased: Vec<bool> = (0..bits.len()).map(|_| rng.random::<f64>() < 0.6).collect();
    show("biased 60/40", &randomness_tests(&biased, 128)?);
    Ok(())
}
