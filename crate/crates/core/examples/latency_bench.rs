//! Per-frame latency of feature extraction through the final decision,
//! single thread, warm-up excluded.
//!
//! cargo run --release --example latency_bench -- 2000

use noisepuf::harness::{latency_bench, latency_histogram, ScenarioConfig};

fn main() -> noisepuf::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let b = latency_bench(&ScenarioConfig::default(), n)?;
    let s = &b.per_frame;
    println!(
        "{} frames of {} samples ({:.0} us of signal)",
        s.n_frames, b.frame_len, b.frame_duration_us
    );
    println!(
        "p50 {:.1} us  p90 {:.1} us  p99 {:.1} us  max {:.1} us",
        s.p50_us, s.p90_us, s.p99_us, s.max_us
    );
    println!("timer overhead p50 {:.3} us", b.overhead.p50_us);
    let hist = latency_histogram(&s.samples_us, 20);
    let top = hist.iter().map(|h| h.count).max().unwrap_or(1).max(1);
    for h in hist {
        println!("{:>8.1} us {}", h.lo_us, "#".repeat(h.count * 50 / top));
    }
    Ok(())
}
