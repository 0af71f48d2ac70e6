//! Fits PCA on benign frames of one device and scores held-out benign frames
//! against each attack kind.
//!
//! cargo run --release --example pca_detector

use noisepuf::detector::{anomaly_score, fit_pca_auto};
use noisepuf::spectral::{FeatureConfig, FeatureExtractor, StftConfig};
use noisepuf::stats::percentile;
use noisepuf::synth::{
    inject_emi_spoof, inject_tamper, AttackSpec, NoiseTrace, OperatingCondition, Synthesizer,
};

fn main() -> noisepuf::Result<()> {
    let synth = Synthesizer::default();
    let cond = OperatingCondition::default();
    let device = synth.make_device_profile(0, 11, 0.1)?;
    let rogue = synth.make_device_profile(0, 12, 0.1)?;
    let fx = FeatureExtractor::new(StftConfig::default(), FeatureConfig::default())?;
    let n = fx.stft().config().window_len;
    let clean = synth.deterministic(&device, &cond, n)?;
    let rogue_clean = synth.deterministic(&rogue, &cond, n)?;
    let frame = |seed| synth.add_noise(&device, &cond, clean.clone(), seed);
    let feats = |t: &NoiseTrace| fx.extract(t).map(|f| f.values);

    let train: Vec<Vec<f64>> = (0..200).map(|s| feats(&frame(s))).collect::<Result<_, _>>()?;
    let model = fit_pca_auto(&train, 8, 0.95)?;
    println!("k = {}, explained {:.3}", model.k, model.explained_ratio());

    let emi = AttackSpec::emi_spoof(0.25, 0.0);
    let tamper = AttackSpec::tamper(0.03);
    let mut rows: Vec<(&str, Vec<f64>)> = vec![
        ("benign", vec![]),
        ("emi_spoof", vec![]),
        ("tamper", vec![]),
        ("impersonation", vec![]),
    ];
    for s in 1_000..1_100 {
        let b = frame(s);
        let traces = [
            b.clone(),
            inject_emi_spoof(&b, &emi)?,
            inject_tamper(&b, &tamper, s)?,
            synth.add_noise(&rogue, &cond, rogue_clean.clone(), s),
        ];
        for (row, t) in rows.iter_mut().zip(&traces) {
            row.1.push(anomaly_score(&model, &feats(t)?)?);
        }
    }
    println!("{:<14} {:>10} {:>10} {:>10}", "frames", "p10", "p50", "p90");
    for (name, s) in &rows {
        println!(
            "{name:<14} {:>10.3e} {:>10.3e} {:>10.3e}",
            percentile(s, 10.0),
            percentile(s, 50.0),
            percentile(s, 90.0)
        );
    }
    Ok(())
}
