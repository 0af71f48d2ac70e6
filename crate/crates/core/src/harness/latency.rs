use std::hint::black_box;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::scenario::{FrameFactory, StreamDetector};
use super::ScenarioConfig;
use crate::error::{Error, Result};
use crate::puf::{enroll, Challenge, PufPipeline};
use crate::seed::derive;
use crate::stats::{mean, percentile_sorted};

/// Frames discarded before timing statistics are collected.
pub const WARMUP_FRAMES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub n_frames: usize,
    pub warmup_discarded: usize,
    pub mean_us: f64,
    pub p50_us: f64,
    pub p90_us: f64,
    pub p99_us: f64,
    pub max_us: f64,
    /// Post-warm-up samples in processing order.
    pub samples_us: Vec<f64>,
}

pub(crate) fn summarize(samples: &[f64], warmup: usize) -> Option<LatencyStats> {
    let kept = samples.get(warmup..).filter(|s| !s.is_empty())?;
    let mut sorted = kept.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(LatencyStats {
        n_frames: kept.len(),
        warmup_discarded: warmup,
        mean_us: mean(kept),
        p50_us: percentile_sorted(&sorted, 50.0),
        p90_us: percentile_sorted(&sorted, 90.0),
        p99_us: percentile_sorted(&sorted, 99.0),
        max_us: *sorted.last().expect("nonempty"),
        samples_us: kept.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyBench {
    /// Feature extraction through the final decision, per frame.
    pub per_frame: LatencyStats,
    /// Timer cost around an empty body, same frame count.
    pub overhead: LatencyStats,
    pub frame_len: usize,
    /// Wall-clock span of one frame of signal, microseconds.
    pub frame_duration_us: f64,
    pub threads: usize,
}

/// Times `n_frames` benign frames of the first device on one thread.
pub fn latency_bench(cfg: &ScenarioConfig, n_frames: usize) -> Result<LatencyBench> {
    cfg.validate()?;
    if n_frames < 100 {
        return Err(Error::param("n_frames", "need at least 100 frames"));
    }
    let pipeline = PufPipeline::new(cfg.pipeline.clone())?;
    let synth = pipeline.synthesizer();
    let seed = derive(cfg.seed, "bench", &[]);
    let fleet = (0..cfg.fleet_size as u32)
        .map(|i| synth.make_device_profile(i, derive(seed, "device", &[i as u64]), cfg.variability))
        .collect::<Result<Vec<_>>>()?;
    let challenge = Challenge {
        challenge_id: cfg.detection.condition_index as u32,
        condition: cfg.challenges[cfg.detection.condition_index],
    };
    let record = enroll(&fleet, &[challenge], cfg.n_calib_traces, &pipeline, seed)?
        .into_iter()
        .next()
        .expect("one record per device");

    let frame_len = cfg.pipeline.stft.window_len;
    let factory = FrameFactory::new(
        synth,
        &fleet[0],
        challenge.condition,
        frame_len,
        cfg.variability,
        cfg.detection.attacks.clone(),
    )?;
    let mut det = StreamDetector::train(
        &factory,
        pipeline.extractor(),
        record,
        cfg.pipeline.puf,
        &cfg.detection,
        seed,
    )?;

    let total = n_frames + WARMUP_FRAMES;
    let mut timed = Vec::with_capacity(total);
    let mut empty = Vec::with_capacity(total);
    for i in 0..total as u64 {
        let trace = factory.benign(derive(seed, "frame", &[i]));
        let t0 = Instant::now();
        black_box(det.process(black_box(&trace))?);
        timed.push(t0.elapsed().as_secs_f64() * 1e6);

        let t0 = Instant::now();
        black_box(&trace);
        empty.push(t0.elapsed().as_secs_f64() * 1e6);
    }
    Ok(LatencyBench {
        per_frame: summarize(&timed, WARMUP_FRAMES).expect("frames timed"),
        overhead: summarize(&empty, WARMUP_FRAMES).expect("frames timed"),
        frame_len,
        frame_duration_us: frame_len as f64 / cfg.pipeline.synth.sample_rate * 1e6,
        threads: 1,
    })
}
