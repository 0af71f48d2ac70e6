use std::fs;

use noisepuf::harness::{
    emit_report, latency_bench, load_report, run_scenario, AttackMix, ScenarioConfig, ScenarioResult,
    REPORT_SCHEMA, WARMUP_FRAMES,
};
use noisepuf::synth::TraceLabel;

fn small() -> ScenarioConfig {
    let mut cfg = ScenarioConfig {
        fleet_size: 3,
        n_calib_traces: 8,
        reliability_repeats: 4,
        ..ScenarioConfig::default()
    };
    cfg.challenges.truncate(2);
    cfg.auth.genuine_attempts = 12;
    cfg.auth.impersonation_attempts = 12;
    cfg.detection.training_frames = 60;
    cfg.detection.validation_frames = 20;
    cfg.detection.frames_per_device = 120;
    cfg
}

#[test]
fn rerun_from_echoed_config_is_identical() {
    let a = run_scenario(&small()).unwrap();
    let b = run_scenario(&a.config).unwrap();
    assert_eq!(a.deterministic_json(), b.deterministic_json());
    assert_eq!(a.seeds, b.seeds);
    for key in ["fleet", "enroll", "reliability", "auth", "detection"] {
        assert!(a.seeds.contains_key(key), "{key}");
    }

    let mut other = small();
    other.seed += 1;
    assert_ne!(run_scenario(&other).unwrap().deterministic_json(), a.deterministic_json());
}

#[test]
fn absent_attack_kind_has_no_recall() {
    let mut cfg = small();
    cfg.detection.attacks.tamper.fraction = 0.0;
    let r = run_scenario(&cfg).unwrap();
    let det = r.detection.unwrap();
    assert!(det.frames.iter().all(|f| f.label != TraceLabel::Tamper));
    let t = &det.proposed.per_attack[&TraceLabel::Tamper];
    assert_eq!(t.counts.tp + t.counts.fn_, 0);
    assert_eq!(t.metrics.recall, None);
    assert!(r.checks.iter().all(|c| c.name != "f1_tamper"));
    assert!(r.checks.iter().any(|c| c.name == "f1_emi_spoof"));
}

#[test]
fn benign_only_stream_has_no_roc() {
    let mut cfg = small();
    cfg.detection.attacks = AttackMix::none();
    let det = run_scenario(&cfg).unwrap().detection.unwrap();
    assert!(det.frames.iter().all(|f| f.label == TraceLabel::Benign));
    assert!(det.proposed.overall.roc.is_none());
    assert_eq!(det.proposed.overall.metrics.recall, None);
}

#[test]
fn puf_auth_runs_without_detector() {
    let mut cfg = small();
    cfg.detection.enabled = false;
    let r = run_scenario(&cfg).unwrap();
    assert!(r.detection.is_none() && r.latency.is_none());
    assert_eq!(r.auth.impersonation_attempts, 12);
    assert!(r.auth.impersonation_reject_rate.unwrap() > 0.9);
}

fn check_accuracy(r: &ScenarioResult) {
    let det = r.detection.as_ref().unwrap();
    for m in [&det.proposed, &det.classifier_only, &det.baseline] {
        for cm in std::iter::once(&m.overall).chain(m.per_attack.values()) {
            let c = &cm.counts;
            let total = c.tp + c.fp + c.fn_ + c.tn;
            assert_eq!(cm.metrics.accuracy, Some((c.tp + c.tn) as f64 / total as f64));
        }
    }
}

#[test]
fn report_files_roundtrip() {
    let r = run_scenario(&small()).unwrap();
    check_accuracy(&r);
    let dir = tempfile::tempdir().unwrap();
    let written = emit_report(&r, dir.path()).unwrap();
    for name in ["report.json", "checks.csv", "detection.csv", "frames.csv", "latency_histogram.csv"] {
        assert!(written.contains(&dir.path().join(name)), "{name}");
    }

    let back = load_report(&dir.path().join("report.json")).unwrap();
    assert_eq!(back.schema, REPORT_SCHEMA);
    assert_eq!(back, r);

    let det = r.detection.as_ref().unwrap();
    let roc = fs::read_to_string(dir.path().join("roc_proposed.csv")).unwrap();
    let mut unique: Vec<f64> = det.frames.iter().map(|f| f.posterior.unwrap()).collect();
    unique.sort_by(f64::total_cmp);
    unique.dedup();
    assert_eq!(roc.lines().count() - 1, unique.len() + 2);

    let frames = fs::read_to_string(dir.path().join("frames.csv")).unwrap();
    assert_eq!(frames.lines().count() - 1, det.frames.len());

    let hist = fs::read_to_string(dir.path().join("latency_histogram.csv")).unwrap();
    let counted: usize = hist
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
        .sum();
    let lat = r.latency.as_ref().unwrap();
    assert_eq!(counted, lat.n_frames);
    assert_eq!(lat.n_frames, 3 * 120 - WARMUP_FRAMES);

    let mut bad = serde_json::to_value(&r).unwrap();
    bad["schema"] = "noisepuf.report/0".into();
    let path = dir.path().join("old.json");
    fs::write(&path, bad.to_string()).unwrap();
    assert!(load_report(&path).is_err());
}

#[test]
fn latency_bench_shape() {
    let cfg = small();
    assert!(latency_bench(&cfg, 50).is_err());
    let b = latency_bench(&cfg, 150).unwrap();
    assert_eq!(b.per_frame.n_frames, 150);
    assert_eq!(b.per_frame.samples_us.len(), 150);
    assert!(b.per_frame.p50_us <= b.per_frame.p90_us && b.per_frame.p90_us <= b.per_frame.max_us);
    // Timer overhead is negligible next to the work being timed.
    assert!(b.overhead.p50_us < 0.05 * b.per_frame.p50_us);

    let mut wide = cfg.clone();
    wide.pipeline.stft.fft_len *= 2;
    let w = latency_bench(&wide, 150).unwrap();
    assert!(
        w.per_frame.p50_us > 0.9 * b.per_frame.p50_us,
        "fft x2: {} us vs {} us",
        w.per_frame.p50_us,
        b.per_frame.p50_us
    );
}
