//! Enrolls a fleet under five challenges, saves the CRP database, then
//! authenticates a genuine measurement, a rogue device, and an unknown id.
//!
//! cargo run --release --example enroll_and_authenticate

use noisepuf::harness::{challenge_list, fleet_profiles, ScenarioConfig};
use noisepuf::puf::{authenticate, enroll, CrpDatabase, PufPipeline};

fn main() -> noisepuf::Result<()> {
    let cfg = ScenarioConfig::default();
    let pipeline = PufPipeline::new(cfg.pipeline.clone())?;
    let fleet = fleet_profiles(&cfg, pipeline.synthesizer())?;
    let challenges = challenge_list(&cfg);

    let mut db = CrpDatabase::new(cfg.pipeline.clone(), 0);
    db.extend(enroll(&fleet, &challenges, 16, &pipeline, 99)?)?;
    let path = std::env::temp_dir().join("noisepuf_example_db.json");
    db.save(&path)?;
    let db = CrpDatabase::load(&path)?;
    println!("{} records saved to {}", db.len(), path.display());

    let puf = &pipeline.settings().puf;
    let ch = &challenges[2];
    let record = db.get(3, ch.challenge_id).expect("enrolled");
    println!("device 3 / challenge 2 reference {}", record.reference);

    let genuine = pipeline.measure_trace(&fleet[3], ch, 123)?;
    let r = pipeline.respond(&genuine, record)?;
    println!("genuine:  {:?}", authenticate(3, ch, &r, &db, puf)?);

    let rogue = pipeline.synthesizer().make_device_profile(3, 0xBAD, cfg.variability)?;
    let forged = pipeline.measure_trace(&rogue, ch, 124)?;
    let r = pipeline.respond(&forged, record)?;
    println!("rogue:    {:?}", authenticate(3, ch, &r, &db, puf)?);

    println!("unknown:  {:?}", authenticate(77, ch, &r, &db, puf)?);
    Ok(())
}
