//! Posterior trace of the Bayesian filter over a benign / attack / benign
//! score sequence; writes the trace as CSV when given a path.
//!
//! cargo run --release --example bayes_filter -- /tmp/posterior.csv

use noisepuf::bayes::{decide, fit_likelihoods, update, BayesConfig, Decision, PosteriorRow, PosteriorState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

fn main() -> noisepuf::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let benign = LogNormal::new(-14.4, 0.2).unwrap();
    let attack = LogNormal::new(-13.6, 0.25).unwrap();
    let fit_b: Vec<f64> = (0..200).map(|_| benign.sample(&mut rng)).collect();
    let fit_a: Vec<f64> = (0..200).map(|_| attack.sample(&mut rng)).collect();
    let lm = fit_likelihoods(&fit_b, &fit_a)?;

    let cfg = BayesConfig::default();
    let mut state = PosteriorState::new(&cfg);
    let mut rows = Vec::new();
    for i in 0..90u64 {
        let hot = (30..60).contains(&i);
        let s = if hot { attack.sample(&mut rng) } else { benign.sample(&mut rng) };
        state = update(&state, s, &lm)?;
        let d = decide(&state, &cfg);
        rows.push(PosteriorRow {
            frame_index: i,
            score: s,
            posterior: state.p_anomalous,
            decision: d,
        });
        let bar = "#".repeat((state.p_anomalous * 40.0).round() as usize);
        println!(
            "{i:>3} {} {:.3} {bar}",
            if d == Decision::Alert { '!' } else { ' ' },
            state.p_anomalous
        );
    }
    if let Some(path) = std::env::args().nth(1) {
        noisepuf::bayes::write_posterior_csv(&rows, path.as_ref())?;
        println!("wrote {path}");
    }
    Ok(())
}
