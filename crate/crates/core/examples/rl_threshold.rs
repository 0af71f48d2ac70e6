//! Epsilon-greedy threshold selection on a synthetic score stream: benign
//! scores ~ N(1, 0.2), attacks ~ N(2, 0.3), 20% attack frames, batches of 50.
//!
//! cargo run --release --example rl_threshold

use noisepuf::detector::{classify, ConfusionCounts, FrameLabel, RewardConfig, ThresholdPolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> noisepuf::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let benign = Normal::new(1.0, 0.2).unwrap();
    let attack = Normal::new(2.0, 0.3).unwrap();
    let training: Vec<f64> = (0..500).map(|_| benign.sample(&mut rng)).collect();

    let mut policy = ThresholdPolicy::from_benign_scores(&training, 32, (50.0, 99.9), 99.0, 0.1, 0.2)?;
    let reward = RewardConfig::default();
    println!("grid {:.3} .. {:.3}", policy.grid[0], policy.grid[31]);

    for batch in 0..200 {
        let mut counts = ConfusionCounts::default();
        for _ in 0..50 {
            let is_attack = rng.random::<f64>() < 0.2;
            let s = if is_attack { attack.sample(&mut rng) } else { benign.sample(&mut rng) };
            counts.record(is_attack, classify(s, &policy) == FrameLabel::Anomalous);
        }
        let r = policy.update(&counts, &reward, &mut rng);
        if batch % 40 == 0 || batch == 199 {
            println!(
                "batch {batch:>3}: reward {r:>5.1}  tp {:>2} fp {:>2}  next threshold {:.3}",
                counts.tp,
                counts.fp,
                policy.threshold()
            );
        }
    }
    let g = policy.greedy_index();
    println!("greedy threshold {:.3} (index {g}, q = {:.2})", policy.grid[g], policy.q_values[g]);
    Ok(())
}
