//! Full scenario: enroll a fleet, authenticate, stream mixed attacks through
//! the detector, and print the headline numbers. Pass a directory to also
//! write the report files there.
//!
//! cargo run --release --example attack_scenario -- /tmp/report

use noisepuf::harness::{emit_report, run_scenario, ScenarioConfig};

fn fmt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

fn main() -> noisepuf::Result<()> {
    let cfg = ScenarioConfig::default();
    let r = run_scenario(&cfg)?;

    println!(
        "uniqueness {:.2}%  reliability {:.2}%  uniformity {:.2}%  entropy {:.4}",
        r.puf.uniqueness_pooled, r.puf.mean_reliability, r.puf.mean_uniformity, r.puf.mean_entropy
    );
    let fr = &r.puf.fleet_randomness;
    println!(
        "fleet bits {}: monobit p={:.4} runs p={:.4} block p={:.4}",
        fr.n_bits, fr.monobit.p_value, fr.runs.p_value, fr.block_frequency.p_value
    );
    println!(
        "auth: genuine accept {}  impostor reject {}  (mean distance {} / {})",
        fmt(r.auth.genuine_accept_rate),
        fmt(r.auth.impersonation_reject_rate),
        fmt(r.auth.mean_genuine_distance),
        fmt(r.auth.mean_impersonation_distance)
    );

    if let Some(det) = &r.detection {
        for (name, m) in [
            ("proposed", &det.proposed),
            ("classifier", &det.classifier_only),
            ("baseline", &det.baseline),
        ] {
            print!(
                "{name:>10}: acc {} f1 {} auc {}",
                fmt(m.overall.metrics.accuracy),
                fmt(m.overall.metrics.f1),
                fmt(m.overall.roc.as_ref().map(|x| x.auc))
            );
            for (label, c) in &m.per_attack {
                print!("  {}:f1={}", label.as_str(), fmt(c.metrics.f1));
            }
            println!();
        }
        println!("accuracy gain {} pp", fmt(det.accuracy_gain_pp));
    }
    if let Some(l) = &r.latency {
        println!(
            "latency p50 {:.1} us  p90 {:.1} us  p99 {:.1} us",
            l.p50_us, l.p90_us, l.p99_us
        );
    }
    for c in &r.checks {
        println!("[{}] {} = {} ({})", if c.passed { "pass" } else { "FAIL" }, c.name, fmt(c.value), c.target);
    }

    if let Some(dir) = std::env::args().nth(1) {
        for p in emit_report(&r, dir.as_ref())? {
            println!("wrote {}", p.display());
        }
    }
    Ok(())
}
