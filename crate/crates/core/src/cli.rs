//! Command-line surface. The binary only forwards its arguments to [`main`].
//!
//! Exit codes: 0 accept or pass, 1 reject or failed check, 2 unknown identity,
//! 3 operational error (bad config, I/O, invalid input).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{RunConfig, OUT_ENV};
use crate::error::{Error, Result};
use crate::harness::{
    challenge_list, emit_report, enrollment_base_seed, fleet_profiles, latency_bench,
    latency_histogram, load_report, run_scenario, ScenarioResult,
};
use crate::puf::{authenticate, enroll, AuthDecision, CrpDatabase, PufPipeline};
use crate::seed::derive;
use crate::synth::{read_trace, write_trace, write_trace_csv, DeviceProfile};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAIL: u8 = 1;
pub const EXIT_UNKNOWN: u8 = 2;
pub const EXIT_ERROR: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "noisepuf",
    version,
    about = "Switching-noise PUF authentication and anomaly detection simulator",
    after_long_help = concat!(
        "Exit codes: 0 accept/pass, 1 reject/fail, 2 unknown identity, 3 error.\n\n",
        "Configuration file (all keys optional, defaults shown):\n\n",
        include_str!("../config/default.toml")
    )
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// TOML run configuration; see `--help` for every key.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// Output root (overrides `output.dir`).
    #[arg(long, global = true, env = OUT_ENV)]
    pub out: Option<PathBuf>,
    /// Only print errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the fleet's device profiles and benign traces.
    Synth,
    /// Enroll every device under every challenge into a CRP database.
    Enroll {
        /// Directory written by `synth` (default: <out>/traces).
        #[arg(long)]
        traces: Option<PathBuf>,
        /// Database path (default: <out>/crp_db.json).
        #[arg(long)]
        db: Option<PathBuf>,
    },
    /// Authenticate one trace against an enrolled reference.
    Auth {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        device: u32,
        #[arg(long)]
        challenge: u32,
        /// Trace file (`.f32`, `.json`, or their common stem).
        trace: PathBuf,
    },
    /// Run the full scenario and write the report (default: <out>/detect).
    Detect {
        /// Classifier-only decisions.
        #[arg(long)]
        disable_bayes: bool,
    },
    /// Per-frame latency benchmark (default output: <out>/bench).
    Bench {
        /// Timed frames after warm-up (overrides `bench.n_frames`).
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Re-emit CSV artifacts and a summary from a saved report.json.
    Report {
        report: PathBuf,
        /// Destination directory (default: next to the report).
        #[arg(long)]
        dir: Option<PathBuf>,
    },
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    verbosity: u8,
}

impl Ctx {
    fn say(&self, level: u8, msg: impl AsRef<str>) {
        if self.verbosity >= level {
            println!("{}", msg.as_ref());
        }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main(args: impl IntoIterator<Item = OsString>) -> u8 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

pub fn run(cli: Cli) -> Result<u8> {
    let cfg = match &cli.global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let ctx = Ctx {
        out: cfg.out_root(cli.global.out.as_deref()),
        verbosity: if cli.global.quiet { 0 } else { cfg.output.verbosity },
        cfg,
    };
    match cli.command {
        Command::Synth => cmd_synth(&ctx),
        Command::Enroll { traces, db } => cmd_enroll(&ctx, traces, db),
        Command::Auth {
            db,
            device,
            challenge,
            trace,
        } => cmd_auth(&ctx, &db, device, challenge, &trace),
        Command::Detect { disable_bayes } => cmd_detect(&ctx, disable_bayes),
        Command::Bench { frames } => cmd_bench(&ctx, frames),
        Command::Report { report, dir } => cmd_report(&ctx, &report, dir),
    }
}

fn mkdir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

fn device_dir(root: &Path, id: u32) -> PathBuf {
    root.join(format!("device_{id:02}"))
}

fn write_json<T: serde::Serialize>(path: &Path, v: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Error::json(path, e))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn cmd_synth(ctx: &Ctx) -> Result<u8> {
    let sc = &ctx.cfg.scenario;
    let pipeline = PufPipeline::new(sc.pipeline.clone())?;
    let fleet = fleet_profiles(sc, pipeline.synthesizer())?;
    let challenges = challenge_list(sc);
    let root = ctx.out.join("traces");
    let base = derive(sc.seed, "synth", &[]);
    for dev in &fleet {
        let dir = device_dir(&root, dev.device_id);
        mkdir(&dir)?;
        write_json(&dir.join("profile.json"), dev)?;
        let mut rms = Vec::new();
        for ch in &challenges {
            for t in 0..ctx.cfg.synth.traces_per_challenge {
                let seed = derive(base, "trace", &[dev.device_id as u64, ch.challenge_id as u64, t as u64]);
                let trace = pipeline.measure_trace(dev, ch, seed)?;
                let stem = dir.join(format!("c{:02}_t{:02}", ch.challenge_id, t));
                write_trace(&trace, &stem)?;
                if ctx.cfg.synth.csv {
                    write_trace_csv(&trace, &stem.with_extension("csv"))?;
                }
                rms.push(trace.rms());
            }
        }
        ctx.say(
            1,
            format!(
                "device {:02}: {} traces, mean rms {:.4} V, jitter {:+.3e}, noise gain {:.3}",
                dev.device_id,
                rms.len(),
                rms.iter().sum::<f64>() / rms.len().max(1) as f64,
                dev.parasitic_jitter,
                dev.noise_floor_gain
            ),
        );
    }
    ctx.say(1, format!("wrote {} devices to {}", fleet.len(), root.display()));
    Ok(EXIT_OK)
}

/// Device profiles from `synth` output, sorted by id.
pub fn load_profiles(traces: &Path) -> Result<Vec<DeviceProfile>> {
    if !traces.is_dir() {
        return Err(Error::Config(format!(
            "trace directory {} does not exist; run `noisepuf synth` first",
            traces.display()
        )));
    }
    let mut profiles = Vec::new();
    for entry in fs::read_dir(traces).map_err(|e| Error::io(traces, e))? {
        let entry = entry.map_err(|e| Error::io(traces, e))?;
        let path = entry.path().join("profile.json");
        if path.is_file() {
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let p: DeviceProfile = serde_json::from_str(&text).map_err(|e| Error::json(&path, e))?;
            profiles.push(p);
        }
    }
    if profiles.is_empty() {
        return Err(Error::Config(format!(
            "no device_*/profile.json under {}",
            traces.display()
        )));
    }
    profiles.sort_by_key(|p| p.device_id);
    Ok(profiles)
}

fn cmd_enroll(ctx: &Ctx, traces: Option<PathBuf>, db_path: Option<PathBuf>) -> Result<u8> {
    let sc = &ctx.cfg.scenario;
    let traces = traces.unwrap_or_else(|| ctx.out.join("traces"));
    let db_path = db_path.unwrap_or_else(|| ctx.out.join("crp_db.json"));
    let fleet = load_profiles(&traces)?;
    let pipeline = PufPipeline::new(sc.pipeline.clone())?;
    let challenges = challenge_list(sc);
    let records = enroll(
        &fleet,
        &challenges,
        sc.n_calib_traces,
        &pipeline,
        enrollment_base_seed(sc),
    )?;
    let mut db = CrpDatabase::new(sc.pipeline.clone(), ctx.cfg.enroll.created_at);
    db.extend(records)?;
    if let Some(parent) = db_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        mkdir(parent)?;
    }
    db.save(&db_path)?;
    ctx.say(
        1,
        format!(
            "enrolled {} devices x {} challenges = {} records -> {}",
            fleet.len(),
            challenges.len(),
            db.len(),
            db_path.display()
        ),
    );
    Ok(EXIT_OK)
}

fn cmd_auth(ctx: &Ctx, db_path: &Path, device: u32, challenge: u32, trace: &Path) -> Result<u8> {
    let db = CrpDatabase::load(db_path)?;
    let Some(record) = db.get(device, challenge) else {
        println!("unknown device {device} challenge {challenge}");
        return Ok(EXIT_UNKNOWN);
    };
    let trace = read_trace(trace)?;
    if trace.condition != record.challenge.condition {
        return Err(Error::param(
            "trace",
            format!(
                "recorded under {:?}, challenge {challenge} is {:?}",
                trace.condition, record.challenge.condition
            ),
        ));
    }
    let pipeline = PufPipeline::new(db.pipeline.clone())?;
    let response = pipeline.respond(&trace, record)?;
    let decision = authenticate(device, &record.challenge, &response, &db, &db.pipeline.puf)?;
    let code = match decision {
        AuthDecision::Accept { distance } => {
            println!("accept distance={distance:.4}");
            EXIT_OK
        }
        AuthDecision::Reject { distance } => {
            println!("reject distance={distance:.4}");
            EXIT_FAIL
        }
        AuthDecision::UnknownIdentity => {
            println!("unknown device {device} challenge {challenge}");
            EXIT_UNKNOWN
        }
    };
    ctx.say(2, format!("response {}", response.to_hex()));
    Ok(code)
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "n/a".into())
}

fn print_summary(ctx: &Ctx, r: &ScenarioResult) {
    let p = &r.puf;
    ctx.say(
        1,
        format!(
            "puf: uniqueness {:.2}%  reliability {:.2}%  uniformity {:.2}%  entropy {:.4}",
            p.uniqueness_pooled, p.mean_reliability, p.mean_uniformity, p.mean_entropy
        ),
    );
    for row in &p.per_device {
        ctx.say(
            2,
            format!(
                "  device {:02}: uniqueness {:.2}%  reliability {:.2}% (min {:.2}%)  uniformity {:.2}%",
                row.device_id, row.uniqueness, row.reliability, row.min_reliability, row.uniformity
            ),
        );
    }
    ctx.say(
        1,
        format!(
            "auth: genuine accept {}  impersonation reject {}",
            fmt(r.auth.genuine_accept_rate),
            fmt(r.auth.impersonation_reject_rate)
        ),
    );
    if let Some(d) = &r.detection {
        for (name, m) in [
            ("proposed", &d.proposed),
            ("classifier", &d.classifier_only),
            ("baseline", &d.baseline),
        ] {
            ctx.say(
                1,
                format!(
                    "{name}: accuracy {}  f1 {}  auc {}",
                    fmt(m.overall.metrics.accuracy),
                    fmt(m.overall.metrics.f1),
                    fmt(m.overall.roc.as_ref().map(|x| x.auc))
                ),
            );
        }
    }
    if let Some(l) = &r.latency {
        ctx.say(
            1,
            format!("latency: p50 {:.1} us  p90 {:.1} us  p99 {:.1} us", l.p50_us, l.p90_us, l.p99_us),
        );
    }
    for c in &r.checks {
        ctx.say(
            1,
            format!(
                "{} {}: {} (target {})",
                if c.passed { "pass" } else { "FAIL" },
                c.name,
                fmt(c.value),
                c.target
            ),
        );
    }
}

fn cmd_detect(ctx: &Ctx, disable_bayes: bool) -> Result<u8> {
    let mut sc = ctx.cfg.scenario.clone();
    if disable_bayes {
        sc.detection.use_bayes = false;
    }
    let result = run_scenario(&sc)?;
    let dir = ctx.out.join("detect");
    let files = emit_report(&result, &dir)?;
    print_summary(ctx, &result);
    ctx.say(1, format!("wrote {} files to {}", files.len(), dir.display()));
    Ok(if result.all_checks_passed() { EXIT_OK } else { EXIT_FAIL })
}

fn cmd_bench(ctx: &Ctx, frames: Option<usize>) -> Result<u8> {
    let n = frames.unwrap_or(ctx.cfg.bench.n_frames);
    if n < 100 {
        return Err(Error::param("frames", "need at least 100 frames"));
    }
    let bench = latency_bench(&ctx.cfg.scenario, n)?;
    let dir = ctx.out.join("bench");
    mkdir(&dir)?;
    write_json(&dir.join("bench.json"), &bench)?;
    let mut h = String::from("lo_us,hi_us,count\n");
    for b in latency_histogram(&bench.per_frame.samples_us, 40) {
        h.push_str(&format!("{},{},{}\n", b.lo_us, b.hi_us, b.count));
    }
    let hist = dir.join("latency_histogram.csv");
    fs::write(&hist, h).map_err(|e| Error::io(&hist, e))?;

    let s = &bench.per_frame;
    let limit = ctx.cfg.bench.max_p90_us;
    ctx.say(
        1,
        format!(
            "{} frames ({:.0} us of signal each): p50 {:.1} us  p90 {:.1} us  p99 {:.1} us  timer overhead p50 {:.3} us",
            s.n_frames, bench.frame_duration_us, s.p50_us, s.p90_us, s.p99_us, bench.overhead.p50_us
        ),
    );
    let ok = s.p90_us < limit;
    ctx.say(1, format!("{} p90 < {limit} us", if ok { "pass" } else { "FAIL" }));
    Ok(if ok { EXIT_OK } else { EXIT_FAIL })
}

fn cmd_report(ctx: &Ctx, report: &Path, dir: Option<PathBuf>) -> Result<u8> {
    let result = load_report(report)?;
    let dir = dir.unwrap_or_else(|| {
        report
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    });
    let files = emit_report(&result, &dir)?;
    print_summary(ctx, &result);
    ctx.say(1, format!("wrote {} files to {}", files.len(), dir.display()));
    Ok(if result.all_checks_passed() { EXIT_OK } else { EXIT_FAIL })
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn long_help_lists_config_keys() {
        let help = Cli::command().render_long_help().to_string();
        for key in ["fleet_size", "auth_threshold", "forgetting", "max_p90_us", "[scenario.detection.rl]"] {
            assert!(help.contains(key), "{key} missing from --help");
        }
    }

    #[test]
    fn disable_bayes_flag_parses() {
        let cli = Cli::try_parse_from(["noisepuf", "detect", "--disable-bayes"]).unwrap();
        assert!(matches!(cli.command, Command::Detect { disable_bayes: true }));
    }
}
