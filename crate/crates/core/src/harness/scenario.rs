use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::latency::{summarize, WARMUP_FRAMES};
use super::metrics::{prf_metrics, roc_curve};
use super::{
    AttackMix, AuthMetrics, CheckResult, ClassMetrics, DetectionConfig, DetectionMetrics,
    DetectorSummary, DevicePufRow, FrameRecord, MethodMetrics, PufMetrics, ScenarioConfig,
    ScenarioResult, REPORT_SCHEMA,
};
use crate::bayes::{self, fit_likelihoods_grouped, BayesConfig, Decision, LikelihoodModel, PosteriorState};
use crate::detector::{
    anomaly_score, classify, fit_pca_auto, ConfusionCounts, FrameLabel, PcaModel, StaticThreshold,
    ThresholdPolicy,
};
use crate::error::{Error, Result, ResultExt};
use crate::puf::{
    authenticate, enroll, fractional_hamming, quantize, randomness_tests, reliability,
    shannon_entropy, uniformity, uniqueness, uniqueness_per_device, AuthDecision, Challenge,
    CrpDatabase, CrpRecord, PufConfig, PufPipeline, PufResponse, RandomnessReport,
};
use crate::puf::randomness::DEFAULT_MIN_LEN;
use crate::seed::derive;
use crate::spectral::FeatureExtractor;
use crate::stats::mean;
use crate::synth::{
    inject_emi_spoof, inject_tamper, AttackKind, AttackSpec, DeviceProfile, NoiseTrace,
    OperatingCondition, Synthesizer, TraceLabel,
};

/// Produces single-window frames for one device at one operating point.
pub(crate) struct FrameFactory<'a> {
    synth: &'a Synthesizer,
    device: &'a DeviceProfile,
    cond: OperatingCondition,
    clean: Vec<f64>,
    variability: f64,
    attacks: AttackMix,
}

/// A rogue device and its precomputed waveform.
pub(crate) struct Rogue {
    profile: DeviceProfile,
    clean: Vec<f64>,
}

impl<'a> FrameFactory<'a> {
    pub(crate) fn new(
        synth: &'a Synthesizer,
        device: &'a DeviceProfile,
        cond: OperatingCondition,
        frame_len: usize,
        variability: f64,
        attacks: AttackMix,
    ) -> Result<Self> {
        let clean = synth.deterministic(device, &cond, frame_len)?;
        Ok(Self {
            synth,
            device,
            cond,
            clean,
            variability,
            attacks,
        })
    }

    pub(crate) fn benign(&self, seed: u64) -> NoiseTrace {
        self.synth
            .add_noise(self.device, &self.cond, self.clean.clone(), seed)
    }

    pub(crate) fn rogue(&self, seed: u64) -> Result<Rogue> {
        let profile =
            self.synth
                .make_device_profile(self.device.device_id, seed, self.variability)?;
        let clean = self
            .synth
            .deterministic(&profile, &self.cond, self.clean.len())?;
        Ok(Rogue { profile, clean })
    }

    pub(crate) fn attack(&self, kind: AttackKind, seed: u64, rogue: Option<&Rogue>) -> Result<NoiseTrace> {
        match kind {
            AttackKind::EmiSpoof => {
                let p = &self.attacks.emi_spoof;
                inject_emi_spoof(
                    &self.benign(seed),
                    &AttackSpec::emi_spoof(p.amplitude, p.freq_offset),
                )
            }
            AttackKind::Tamper => inject_tamper(
                &self.benign(seed),
                &AttackSpec::tamper(self.attacks.tamper.sigma),
                derive(seed, "tamper", &[]),
            ),
            AttackKind::Impersonation => {
                let owned;
                let rogue = match rogue {
                    Some(r) => r,
                    None => {
                        owned = self.rogue(derive(seed, "rogue", &[]))?;
                        &owned
                    }
                };
                let mut t = self
                    .synth
                    .add_noise(&rogue.profile, &self.cond, rogue.clean.clone(), seed);
                t.label = TraceLabel::Impersonation;
                Ok(t)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct FrameOutcome {
    pub score: f64,
    pub threshold: f64,
    pub flag: bool,
    pub posterior: Option<f64>,
    pub alert: bool,
    pub band_energy: f64,
    pub baseline_flag: bool,
    pub puf_distance: f64,
}

/// Per-device online detector: PCA scoring, adaptive threshold, Bayesian filter.
#[derive(Debug, Clone)]
pub(crate) struct StreamDetector {
    extractor: FeatureExtractor,
    record: CrpRecord,
    puf: PufConfig,
    pub(crate) pca: PcaModel,
    pub(crate) policy: ThresholdPolicy,
    pub(crate) baseline: StaticThreshold,
    pub(crate) likelihoods: LikelihoodModel,
    bayes: BayesConfig,
    state: PosteriorState,
    use_bayes: bool,
}

fn attack_index(kind: AttackKind) -> u64 {
    match kind {
        AttackKind::EmiSpoof => 0,
        AttackKind::Tamper => 1,
        AttackKind::Impersonation => 2,
    }
}

fn label_kind(label: TraceLabel) -> Option<AttackKind> {
    match label {
        TraceLabel::Benign => None,
        TraceLabel::EmiSpoof => Some(AttackKind::EmiSpoof),
        TraceLabel::Tamper => Some(AttackKind::Tamper),
        TraceLabel::Impersonation => Some(AttackKind::Impersonation),
    }
}

impl StreamDetector {
    /// Fits PCA, the threshold grid, and the baseline on benign training
    /// frames, then the likelihoods on held-out benign and attack frames.
    pub(crate) fn train(
        factory: &FrameFactory<'_>,
        extractor: &FeatureExtractor,
        record: CrpRecord,
        puf: PufConfig,
        cfg: &DetectionConfig,
        seed: u64,
    ) -> Result<Self> {
        let train: Vec<_> = (0..cfg.training_frames as u64)
            .map(|i| extractor.extract(&factory.benign(derive(seed, "train", &[i]))))
            .collect::<Result<_>>()?;
        let rows: Vec<Vec<f64>> = train.iter().map(|f| f.values.clone()).collect();
        let pca = fit_pca_auto(&rows, cfg.pca.max_k, cfg.pca.variance_target)?;
        let scores: Vec<f64> = rows
            .iter()
            .map(|r| anomaly_score(&pca, r))
            .collect::<Result<_>>()?;
        let rl = &cfg.rl;
        let policy = ThresholdPolicy::from_benign_scores(
            &scores,
            rl.grid_size,
            rl.grid_percentiles,
            rl.start_percentile,
            rl.epsilon,
            rl.learning_rate,
        )?;
        let energies: Vec<f64> = train.iter().map(|f| f.band_energy).collect();
        let baseline = StaticThreshold::fit(&energies, cfg.baseline_percentile)?;

        let score_of = |t: NoiseTrace| -> Result<f64> {
            anomaly_score(&pca, &extractor.extract(&t)?.values)
        };
        let n_val = cfg.validation_frames as u64;
        let benign_val: Vec<f64> = (0..n_val)
            .map(|i| score_of(factory.benign(derive(seed, "val_benign", &[i]))))
            .collect::<Result<_>>()?;
        let attack_val: Vec<Vec<f64>> = AttackKind::ALL
            .iter()
            .map(|&kind| {
                (0..n_val)
                    .map(|i| {
                        let s = derive(seed, "val_attack", &[attack_index(kind), i]);
                        score_of(factory.attack(kind, s, None)?)
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let groups: Vec<&[f64]> = attack_val.iter().map(Vec::as_slice).collect();
        let likelihoods = fit_likelihoods_grouped(&benign_val, &groups)?;

        Ok(Self {
            extractor: extractor.clone(),
            record,
            puf,
            pca,
            policy,
            baseline,
            likelihoods,
            bayes: cfg.bayes,
            state: PosteriorState::new(&cfg.bayes),
            use_bayes: cfg.use_bayes,
        })
    }

    /// Feature extraction through the final decision for one frame.
    pub(crate) fn process(&mut self, trace: &NoiseTrace) -> Result<FrameOutcome> {
        let f = self.extractor.extract(trace)?;
        let response = quantize(&f, &self.record.calibration, &self.puf)?;
        let puf_distance = fractional_hamming(&response, &self.record.reference)?;
        let score = anomaly_score(&self.pca, &f.values)?;
        let threshold = self.policy.threshold();
        let flag = classify(score, &self.policy) == FrameLabel::Anomalous;
        let (posterior, alert) = if self.use_bayes {
            self.state = bayes::update(&self.state, score, &self.likelihoods)?;
            (
                Some(self.state.p_anomalous),
                bayes::decide(&self.state, &self.bayes) == Decision::Alert,
            )
        } else {
            (None, flag)
        };
        Ok(FrameOutcome {
            score,
            threshold,
            flag,
            posterior,
            alert,
            band_energy: f.band_energy,
            baseline_flag: self.baseline.flags(f.band_energy),
            puf_distance,
        })
    }
}

/// The scenario's device fleet; ids run `0..fleet_size`.
pub fn fleet_profiles(cfg: &ScenarioConfig, synth: &Synthesizer) -> Result<Vec<DeviceProfile>> {
    let base = derive(cfg.seed, "fleet", &[]);
    (0..cfg.fleet_size as u32)
        .map(|i| synth.make_device_profile(i, derive(base, "device", &[i as u64]), cfg.variability))
        .collect()
}

/// Challenge `i` is the `i`-th configured operating condition.
pub fn challenge_list(cfg: &ScenarioConfig) -> Vec<Challenge> {
    cfg.challenges
        .iter()
        .enumerate()
        .map(|(i, &condition)| Challenge {
            challenge_id: i as u32,
            condition,
        })
        .collect()
}

/// Seed used by [`run_scenario`] for enrollment measurements.
pub fn enrollment_base_seed(cfg: &ScenarioConfig) -> u64 {
    derive(cfg.seed, "enroll", &[])
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    cfg.validate()?;
    let pipeline = PufPipeline::new(cfg.pipeline.clone())?;
    let synth = pipeline.synthesizer();

    let mut seeds = BTreeMap::new();
    for tag in ["fleet", "enroll", "reliability", "auth", "detection"] {
        seeds.insert(tag.to_string(), derive(cfg.seed, tag, &[]));
    }

    let fleet = fleet_profiles(cfg, synth)?;
    let challenges = challenge_list(cfg);

    let records = enroll(&fleet, &challenges, cfg.n_calib_traces, &pipeline, seeds["enroll"])
        .context(|| "enrollment".into())?;
    let mut db = CrpDatabase::new(cfg.pipeline.clone(), 0);
    db.extend(records)?;

    let puf = puf_metrics(cfg, &pipeline, &fleet, &challenges, &db, seeds["reliability"])
        .context(|| "PUF metrics".into())?;
    let auth = auth_metrics(cfg, &pipeline, &fleet, &challenges, &db, seeds["auth"])
        .context(|| "authentication".into())?;
    let (detection, latency) = if cfg.detection.enabled {
        let (d, lat) = detection_run(cfg, &pipeline, &fleet, &challenges, &db, seeds["detection"])
            .context(|| "detection".into())?;
        (Some(d), summarize(&lat, WARMUP_FRAMES))
    } else {
        (None, None)
    };

    let checks = evaluate_checks(cfg, &puf, &auth, detection.as_ref());
    Ok(ScenarioResult {
        schema: REPORT_SCHEMA.to_string(),
        config: cfg.clone(),
        seeds,
        puf,
        auth,
        detection,
        checks,
        latency,
    })
}

fn concat<'a>(rs: impl IntoIterator<Item = &'a PufResponse>) -> PufResponse {
    PufResponse::new(rs.into_iter().flat_map(|r| r.bits().iter().copied()).collect())
}

fn record(db: &CrpDatabase, device: u32, challenge: u32) -> Result<&CrpRecord> {
    db.get(device, challenge).ok_or(Error::UnknownRecord {
        device_id: device,
        challenge_id: challenge,
    })
}

fn puf_metrics(
    cfg: &ScenarioConfig,
    pipeline: &PufPipeline,
    fleet: &[DeviceProfile],
    challenges: &[Challenge],
    db: &CrpDatabase,
    seed: u64,
) -> Result<PufMetrics> {
    let mut uniqueness_per_challenge = BTreeMap::new();
    let mut per_device_u: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for ch in challenges {
        let refs: BTreeMap<u32, PufResponse> = fleet
            .iter()
            .map(|d| Ok((d.device_id, record(db, d.device_id, ch.challenge_id)?.reference.clone())))
            .collect::<Result<_>>()?;
        uniqueness_per_challenge.insert(ch.challenge_id, uniqueness(&refs)?);
        for (id, u) in uniqueness_per_device(&refs)? {
            per_device_u.entry(id).or_default().push(u);
        }
    }

    let pairs: Vec<(usize, usize)> = (0..fleet.len())
        .flat_map(|d| (0..challenges.len()).map(move |c| (d, c)))
        .collect();
    let rel: Vec<f64> = pairs
        .par_iter()
        .map(|&(d, c)| {
            let dev = &fleet[d];
            let ch = &challenges[c];
            let rec = record(db, dev.device_id, ch.challenge_id)?;
            let feats = pipeline.measure_features(
                dev,
                ch,
                (0..cfg.reliability_repeats as u64)
                    .map(|r| derive(seed, "repeat", &[dev.device_id as u64, ch.challenge_id as u64, r])),
            )?;
            let repeats: Vec<PufResponse> = feats
                .iter()
                .map(|f| quantize(f, &rec.calibration, &pipeline.settings().puf))
                .collect::<Result<_>>()?;
            reliability(&repeats, &rec.reference)
        })
        .collect::<Result<_>>()?;

    let mut per_device = Vec::with_capacity(fleet.len());
    for (d, dev) in fleet.iter().enumerate() {
        let own: Vec<&PufResponse> = challenges
            .iter()
            .map(|ch| Ok(&record(db, dev.device_id, ch.challenge_id)?.reference))
            .collect::<Result<_>>()?;
        let all = concat(own);
        let r = &rel[d * challenges.len()..(d + 1) * challenges.len()];
        per_device.push(DevicePufRow {
            device_id: dev.device_id,
            uniqueness: mean(&per_device_u[&dev.device_id]),
            reliability: mean(r),
            min_reliability: r.iter().copied().fold(f64::INFINITY, f64::min),
            uniformity: uniformity(&all)?,
            entropy: shannon_entropy(&all)?,
            randomness: randomness_tests(all.bits(), DEFAULT_MIN_LEN).ok(),
        });
    }

    let nominal = concat(
        fleet
            .iter()
            .map(|d| record(db, d.device_id, challenges[0].challenge_id).map(|r| &r.reference))
            .collect::<Result<Vec<_>>>()?,
    );
    let pooled = concat(db.records().map(|r| &r.reference));
    let fleet_randomness: RandomnessReport = randomness_tests(nominal.bits(), DEFAULT_MIN_LEN)
        .context(|| "fleet bitstream".into())?;
    let pooled_randomness = randomness_tests(pooled.bits(), DEFAULT_MIN_LEN)?;

    let col = |f: fn(&DevicePufRow) -> f64| mean(&per_device.iter().map(f).collect::<Vec<_>>());
    Ok(PufMetrics {
        uniqueness_pooled: mean(&uniqueness_per_challenge.values().copied().collect::<Vec<_>>()),
        uniqueness_per_challenge,
        mean_reliability: col(|r| r.reliability),
        mean_uniformity: col(|r| r.uniformity),
        mean_entropy: col(|r| r.entropy),
        fleet_randomness,
        pooled_randomness,
        per_device,
    })
}

fn auth_metrics(
    cfg: &ScenarioConfig,
    pipeline: &PufPipeline,
    fleet: &[DeviceProfile],
    challenges: &[Challenge],
    db: &CrpDatabase,
    seed: u64,
) -> Result<AuthMetrics> {
    let n = fleet.len();
    let target = |i: usize| (&fleet[i % n], &challenges[(i / n) % challenges.len()]);
    let attempt = |claimed: &DeviceProfile, ch: &Challenge, actual: &DeviceProfile, s: u64| {
        let trace = pipeline.measure_trace(actual, ch, s)?;
        let rec = record(db, claimed.device_id, ch.challenge_id)?;
        let response = pipeline.respond(&trace, rec)?;
        authenticate(claimed.device_id, ch, &response, db, &pipeline.settings().puf)
    };

    let genuine: Vec<AuthDecision> = (0..cfg.auth.genuine_attempts)
        .into_par_iter()
        .map(|i| {
            let (dev, ch) = target(i);
            attempt(dev, ch, dev, derive(seed, "genuine", &[i as u64]))
        })
        .collect::<Result<_>>()?;
    let rogue: Vec<AuthDecision> = (0..cfg.auth.impersonation_attempts)
        .into_par_iter()
        .map(|i| {
            let (dev, ch) = target(i);
            let rogue = pipeline.synthesizer().make_device_profile(
                dev.device_id,
                derive(seed, "rogue", &[i as u64]),
                cfg.variability,
            )?;
            attempt(dev, ch, &rogue, derive(seed, "impostor", &[i as u64]))
        })
        .collect::<Result<_>>()?;

    let distance = |d: &AuthDecision| match *d {
        AuthDecision::Accept { distance } | AuthDecision::Reject { distance } => Some(distance),
        AuthDecision::UnknownIdentity => None,
    };
    let mean_distance = |ds: &[AuthDecision]| {
        let v: Vec<f64> = ds.iter().filter_map(distance).collect();
        (!v.is_empty()).then(|| mean(&v))
    };
    let rate = |k: usize, n: usize| (n > 0).then(|| k as f64 / n as f64);
    let accepted = genuine
        .iter()
        .filter(|d| matches!(d, AuthDecision::Accept { .. }))
        .count();
    let rejected = rogue
        .iter()
        .filter(|d| !matches!(d, AuthDecision::Accept { .. }))
        .count();
    Ok(AuthMetrics {
        genuine_attempts: genuine.len(),
        genuine_accepted: accepted,
        impersonation_attempts: rogue.len(),
        impersonation_rejected: rejected,
        genuine_accept_rate: rate(accepted, genuine.len()),
        impersonation_reject_rate: rate(rejected, rogue.len()),
        mean_genuine_distance: mean_distance(&genuine),
        mean_impersonation_distance: mean_distance(&rogue),
    })
}

/// Picks the next stream segment: an attack kind with its configured
/// probability, otherwise benign.
fn next_segment(rng: &mut ChaCha8Rng, mix: &AttackMix) -> TraceLabel {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (label, fraction) in mix.fractions() {
        acc += fraction;
        if u < acc {
            return label;
        }
    }
    TraceLabel::Benign
}

struct DeviceStream {
    summary: DetectorSummary,
    frames: Vec<FrameRecord>,
    latency_us: Vec<f64>,
    score_scale: f64,
    energy_scale: f64,
}

fn device_stream(
    cfg: &ScenarioConfig,
    pipeline: &PufPipeline,
    device: &DeviceProfile,
    rec: &CrpRecord,
    seed: u64,
) -> Result<DeviceStream> {
    let d = &cfg.detection;
    let cond = rec.challenge.condition;
    let factory = FrameFactory::new(
        pipeline.synthesizer(),
        device,
        cond,
        cfg.pipeline.stft.window_len,
        cfg.variability,
        d.attacks.clone(),
    )?;
    let dev_seed = derive(seed, "device", &[device.device_id as u64]);
    let mut det = StreamDetector::train(
        &factory,
        pipeline.extractor(),
        rec.clone(),
        cfg.pipeline.puf,
        d,
        dev_seed,
    )?;
    let score_scale = *det.policy.grid.last().expect("nonempty grid");
    let energy_scale = det.baseline.threshold;

    let mut schedule = ChaCha8Rng::seed_from_u64(derive(dev_seed, "schedule", &[]));
    let mut rl_rng = ChaCha8Rng::seed_from_u64(derive(dev_seed, "rl", &[]));
    let mut frames = Vec::with_capacity(d.frames_per_device);
    let mut latency_us = Vec::with_capacity(d.frames_per_device);
    let mut batch = ConfusionCounts::default();
    let mut episode = 0u64;
    while frames.len() < d.frames_per_device {
        let label = next_segment(&mut schedule, &d.attacks);
        let len = schedule
            .random_range(d.min_episode..=d.max_episode)
            .min(d.frames_per_device - frames.len());
        let kind = label_kind(label);
        let rogue = match kind {
            Some(AttackKind::Impersonation) => Some(factory.rogue(derive(dev_seed, "rogue", &[episode]))?),
            _ => None,
        };
        for _ in 0..len {
            let i = frames.len() as u64;
            let s = derive(dev_seed, "frame", &[i]);
            let trace = match kind {
                None => factory.benign(s),
                Some(k) => factory.attack(k, s, rogue.as_ref())?,
            };
            let t0 = Instant::now();
            let out = det.process(&trace)?;
            latency_us.push(t0.elapsed().as_secs_f64() * 1e6);

            batch.record(label.is_attack(), out.flag);
            if batch.total() as usize == d.rl.batch_size {
                det.policy.update(&batch, &d.rl.reward, &mut rl_rng);
                batch = ConfusionCounts::default();
            }
            frames.push(FrameRecord {
                device_id: device.device_id,
                frame_index: i,
                label,
                score: out.score,
                threshold: out.threshold,
                classifier_flag: out.flag,
                posterior: out.posterior,
                alert: out.alert,
                band_energy: out.band_energy,
                baseline_flag: out.baseline_flag,
                puf_distance: out.puf_distance,
            });
        }
        episode += 1;
    }

    Ok(DeviceStream {
        summary: DetectorSummary {
            device_id: device.device_id,
            pca_k: det.pca.k,
            explained_ratio: det.pca.explained_ratio(),
            baseline_threshold: det.baseline.threshold,
            final_policy: det.policy.clone(),
        },
        frames,
        latency_us,
        score_scale,
        energy_scale,
    })
}

fn detection_run(
    cfg: &ScenarioConfig,
    pipeline: &PufPipeline,
    fleet: &[DeviceProfile],
    challenges: &[Challenge],
    db: &CrpDatabase,
    seed: u64,
) -> Result<(DetectionMetrics, Vec<f64>)> {
    let ch = &challenges[cfg.detection.condition_index];
    // Sequential on purpose: per-frame timings must not share cores.
    let streams: Vec<DeviceStream> = fleet
        .iter()
        .map(|dev| {
            let rec = record(db, dev.device_id, ch.challenge_id)?;
            device_stream(cfg, pipeline, dev, rec, seed)
                .context(|| format!("device {}", dev.device_id))
        })
        .collect::<Result<_>>()?;

    let scale: BTreeMap<u32, (f64, f64)> = streams
        .iter()
        .map(|s| (s.summary.device_id, (s.score_scale, s.energy_scale)))
        .collect();
    let frames: Vec<FrameRecord> = streams.iter().flat_map(|s| s.frames.clone()).collect();
    let latency: Vec<f64> = streams.iter().flat_map(|s| s.latency_us.clone()).collect();

    let classifier_stat = |f: &FrameRecord| f.score / scale[&f.device_id].0;
    let proposed = method_metrics(&frames, |f| f.alert, |f| {
        f.posterior.unwrap_or_else(|| classifier_stat(f))
    })?;
    let classifier_only = method_metrics(&frames, |f| f.classifier_flag, classifier_stat)?;
    let baseline = method_metrics(&frames, |f| f.baseline_flag, |f| {
        f.band_energy / scale[&f.device_id].1
    })?;
    let accuracy_gain_pp = match (proposed.overall.metrics.accuracy, baseline.overall.metrics.accuracy) {
        (Some(a), Some(b)) => Some(100.0 * (a - b)),
        _ => None,
    };
    Ok((
        DetectionMetrics {
            proposed,
            classifier_only,
            baseline,
            accuracy_gain_pp,
            devices: streams.into_iter().map(|s| s.summary).collect(),
            frames,
        },
        latency,
    ))
}

fn class_metrics<'a>(
    frames: impl Iterator<Item = &'a FrameRecord>,
    flag: &impl Fn(&FrameRecord) -> bool,
    stat: &impl Fn(&FrameRecord) -> f64,
) -> Result<ClassMetrics> {
    let mut counts = ConfusionCounts::default();
    let mut stats = Vec::new();
    let mut labels = Vec::new();
    for f in frames {
        counts.record(f.label.is_attack(), flag(f));
        stats.push(stat(f));
        labels.push(f.label.is_attack());
    }
    let both = labels.iter().any(|&l| l) && labels.iter().any(|&l| !l);
    Ok(ClassMetrics {
        metrics: prf_metrics(&counts),
        counts,
        roc: if both { Some(roc_curve(&stats, &labels)?) } else { None },
    })
}

fn method_metrics(
    frames: &[FrameRecord],
    flag: impl Fn(&FrameRecord) -> bool,
    stat: impl Fn(&FrameRecord) -> f64,
) -> Result<MethodMetrics> {
    let overall = class_metrics(frames.iter(), &flag, &stat)?;
    let mut per_attack = BTreeMap::new();
    for kind in AttackKind::ALL {
        let label = kind.label();
        let subset = frames
            .iter()
            .filter(|f| f.label == label || f.label == TraceLabel::Benign);
        per_attack.insert(label, class_metrics(subset, &flag, &stat)?);
    }
    Ok(MethodMetrics {
        overall,
        per_attack,
    })
}

fn check(name: &str, value: Option<f64>, target: String, ok: impl Fn(f64) -> bool) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        passed: value.is_some_and(&ok),
        value,
        target,
    }
}

fn evaluate_checks(
    cfg: &ScenarioConfig,
    puf: &PufMetrics,
    auth: &AuthMetrics,
    det: Option<&DetectionMetrics>,
) -> Vec<CheckResult> {
    let c = &cfg.checks;
    let mut out = Vec::new();
    if let Some((lo, hi)) = c.uniqueness_range {
        out.push(check(
            "uniqueness_pct",
            Some(puf.uniqueness_pooled),
            format!("in [{lo}, {hi}]"),
            |v| (lo..=hi).contains(&v),
        ));
    }
    if let Some(min) = c.min_reliability {
        let worst = puf
            .per_device
            .iter()
            .map(|r| r.reliability)
            .fold(f64::INFINITY, f64::min);
        out.push(check("min_device_reliability_pct", Some(worst), format!(">= {min}"), |v| v >= min));
    }
    if c.randomness {
        let r = &puf.fleet_randomness;
        out.push(check("monobit_p", Some(r.monobit.p_value), ">= 0.01".into(), |v| v >= 0.01));
        out.push(check(
            "block_frequency_p",
            Some(r.block_frequency.p_value),
            ">= 0.01".into(),
            |v| v >= 0.01,
        ));
    }
    if let Some(min) = c.min_genuine_accept {
        out.push(check("genuine_accept_rate", auth.genuine_accept_rate, format!(">= {min}"), |v| v >= min));
    }
    if let Some(min) = c.min_impersonation_reject {
        out.push(check(
            "impersonation_reject_rate",
            auth.impersonation_reject_rate,
            format!(">= {min}"),
            |v| v >= min,
        ));
    }
    if let Some(det) = det {
        if let Some(min) = c.min_auc {
            let auc = det.proposed.overall.roc.as_ref().map(|r| r.auc);
            out.push(check("auc", auc, format!(">= {min}"), |v| v >= min));
        }
        if let Some(min) = c.min_f1 {
            for (label, m) in &det.proposed.per_attack {
                // Kinds absent from the stream have no recall to judge.
                if m.counts.tp + m.counts.fn_ == 0 {
                    continue;
                }
                out.push(check(
                    &format!("f1_{}", label.as_str()),
                    m.metrics.f1,
                    format!(">= {min}"),
                    |v| v >= min,
                ));
            }
        }
        if let Some(min) = c.min_accuracy_gain_pp {
            out.push(check("accuracy_gain_pp", det.accuracy_gain_pp, format!(">= {min}"), |v| v >= min));
        }
    }
    out
}
