//! Run configuration: one TOML document, strictly parsed.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::ScenarioConfig;

/// Commented defaults, byte-for-byte the file shipped in `config/`.
pub const DEFAULT_CONFIG_TOML: &str = include_str!("../config/default.toml");

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "NOISEPUF_OUT";
pub const DEFAULT_OUT_DIR: &str = "noisepuf-out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Output root; empty means `$NOISEPUF_OUT`, then `noisepuf-out`.
    pub dir: String,
    /// 0 quiet, 1 summaries, 2 per-device detail.
    pub verbosity: u8,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: String::new(),
            verbosity: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthRunConfig {
    /// Traces written per device and challenge.
    pub traces_per_challenge: usize,
    /// Also write a CSV copy of each trace.
    pub csv: bool,
}

impl Default for SynthRunConfig {
    fn default() -> Self {
        Self {
            traces_per_challenge: 1,
            csv: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnrollRunConfig {
    /// Stored in the database header; fixed so files are reproducible.
    pub created_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchRunConfig {
    pub n_frames: usize,
    /// `bench` exits 1 when the p90 exceeds this.
    pub max_p90_us: f64,
}

impl Default for BenchRunConfig {
    fn default() -> Self {
        Self {
            n_frames: 1000,
            max_p90_us: 800.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub output: OutputConfig,
    pub synth: SynthRunConfig,
    pub enroll: EnrollRunConfig,
    pub bench: BenchRunConfig,
    pub scenario: ScenarioConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.bench.n_frames < 100 {
            return Err(Error::param("bench.n_frames", "need at least 100 frames"));
        }
        Ok(())
    }

    /// `--out` flag, then `output.dir`, then `$NOISEPUF_OUT`, then the built-in default.
    pub fn out_root(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        if !self.output.dir.is_empty() {
            return PathBuf::from(&self.output.dir);
        }
        match std::env::var_os(OUT_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => PathBuf::from(DEFAULT_OUT_DIR),
        }
    }
}
