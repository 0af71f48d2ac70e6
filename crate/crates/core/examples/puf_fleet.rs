//! Enrolls a ten-device fleet and prints per-device PUF metrics.
//!
//! cargo run --release --example puf_fleet

use std::collections::BTreeMap;

use noisepuf::puf::{
    self, enroll, reliability, shannon_entropy, uniformity, uniqueness, uniqueness_per_device,
    Challenge, PipelineSettings, PufPipeline,
};
use noisepuf::synth::OperatingCondition;

fn main() -> noisepuf::Result<()> {
    let pipeline = PufPipeline::new(PipelineSettings::default())?;
    let devices: Vec<_> = (0..10)
        .map(|i| pipeline.synthesizer().make_device_profile(i, 1_000 + i as u64, 0.1))
        .collect::<Result<_, _>>()?;
    let challenge = Challenge {
        challenge_id: 0,
        condition: OperatingCondition::default(),
    };
    let records = enroll(&devices, &[challenge], 16, &pipeline, 7)?;

    let refs: BTreeMap<u32, _> = records
        .iter()
        .map(|r| (r.device_id, r.reference.clone()))
        .collect();
    let per_device = uniqueness_per_device(&refs)?;

    println!("device  uniq%   rel%    unif%   H");
    for (device, record) in devices.iter().zip(&records) {
        let feats = pipeline.measure_features(device, &challenge, (0..20).map(|i| 50_000 + i))?;
        let repeats: Vec<_> = feats
            .iter()
            .map(|f| puf::quantize(f, &record.calibration, &pipeline.settings().puf))
            .collect::<Result<_, _>>()?;
        println!(
            "{:>6}  {:>5.1}  {:>6.2}  {:>5.1}  {:.3}",
            device.device_id,
            per_device[&device.device_id],
            reliability(&repeats, &record.reference)?,
            uniformity(&record.reference)?,
            shannon_entropy(&record.reference)?,
        );
    }
    println!("fleet uniqueness: {:.2}%", uniqueness(&refs)?);
    Ok(())
}
