use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::Roc;
use super::{ClassMetrics, ScenarioResult};
use crate::bayes::{write_posterior_csv, Decision, PosteriorRow};
use crate::error::{Error, Result};

pub const REPORT_SCHEMA: &str = "noisepuf.report/1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo_us: f64,
    pub hi_us: f64,
    pub count: usize,
}

/// Equal-width bins spanning `[min, max]` of the samples.
pub fn latency_histogram(samples_us: &[f64], n_bins: usize) -> Vec<HistogramBin> {
    if samples_us.is_empty() || n_bins == 0 {
        return Vec::new();
    }
    let lo = samples_us.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples_us.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / n_bins as f64 } else { 1.0 };
    let mut bins: Vec<HistogramBin> = (0..n_bins)
        .map(|i| HistogramBin {
            lo_us: lo + i as f64 * width,
            hi_us: lo + (i + 1) as f64 * width,
            count: 0,
        })
        .collect();
    for &s in samples_us {
        let i = (((s - lo) / width) as usize).min(n_bins - 1);
        bins[i].count += 1;
    }
    bins
}

fn write(path: PathBuf, text: String, written: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

fn roc_csv(roc: &Roc) -> String {
    let mut s = String::from("fpr,tpr,threshold\n");
    for p in &roc.points {
        let _ = writeln!(s, "{},{},{}", p.fpr, p.tpr, opt(p.threshold));
    }
    s
}

fn metrics_row(s: &mut String, method: &str, subset: &str, m: &ClassMetrics) {
    let c = &m.counts;
    let r = &m.metrics;
    let _ = writeln!(
        s,
        "{method},{subset},{},{},{},{},{},{},{},{},{},{},{}",
        c.tp,
        c.fp,
        c.fn_,
        c.tn,
        opt(r.precision),
        opt(r.recall),
        opt(r.f1),
        opt(r.accuracy),
        opt(r.fpr),
        opt(r.fnr),
        opt(m.roc.as_ref().map(|r| r.auc)),
    );
}

/// Writes `report.json` plus CSV tables into `out_dir`; returns the files written.
pub fn emit_report(result: &ScenarioResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();

    let json = serde_json::to_string_pretty(result).map_err(|e| Error::json(out_dir, e))?;
    write(out_dir.join("report.json"), json + "\n", &mut written)?;

    let mut t = String::from(
        "device_id,uniqueness_pct,reliability_pct,min_reliability_pct,uniformity_pct,entropy,randomness_passed\n",
    );
    for r in &result.puf.per_device {
        let _ = writeln!(
            t,
            "{},{},{},{},{},{},{}",
            r.device_id,
            r.uniqueness,
            r.reliability,
            r.min_reliability,
            r.uniformity,
            r.entropy,
            r.randomness.map(|x| x.passed.to_string()).unwrap_or_default()
        );
    }
    write(out_dir.join("puf_devices.csv"), t, &mut written)?;

    let mut c = String::from("name,value,target,passed\n");
    for ch in &result.checks {
        let _ = writeln!(c, "{},{},{},{}", ch.name, opt(ch.value), ch.target, ch.passed);
    }
    write(out_dir.join("checks.csv"), c, &mut written)?;

    if let Some(det) = &result.detection {
        let mut s = String::from(
            "method,subset,tp,fp,fn,tn,precision,recall,f1,accuracy,fpr,fnr,auc\n",
        );
        for (name, m) in [
            ("proposed", &det.proposed),
            ("classifier_only", &det.classifier_only),
            ("baseline", &det.baseline),
        ] {
            metrics_row(&mut s, name, "all", &m.overall);
            for (label, cm) in &m.per_attack {
                metrics_row(&mut s, name, label.as_str(), cm);
            }
            if let Some(roc) = &m.overall.roc {
                write(out_dir.join(format!("roc_{name}.csv")), roc_csv(roc), &mut written)?;
            }
        }
        write(out_dir.join("detection.csv"), s, &mut written)?;

        let mut f = String::from(
            "device_id,frame_index,label,score,threshold,classifier_flag,posterior,alert,band_energy,baseline_flag,puf_distance\n",
        );
        for r in &det.frames {
            let _ = writeln!(
                f,
                "{},{},{},{:e},{:e},{},{},{},{:e},{},{}",
                r.device_id,
                r.frame_index,
                r.label.as_str(),
                r.score,
                r.threshold,
                r.classifier_flag,
                opt(r.posterior),
                r.alert,
                r.band_energy,
                r.baseline_flag,
                r.puf_distance
            );
        }
        write(out_dir.join("frames.csv"), f, &mut written)?;

        for dev in &det.devices {
            let rows: Vec<PosteriorRow> = det
                .frames
                .iter()
                .filter(|r| r.device_id == dev.device_id)
                .filter_map(|r| {
                    Some(PosteriorRow {
                        frame_index: r.frame_index,
                        score: r.score,
                        posterior: r.posterior?,
                        decision: if r.alert { Decision::Alert } else { Decision::NoAlert },
                    })
                })
                .collect();
            if !rows.is_empty() {
                let path = out_dir.join(format!("posterior_device_{:02}.csv", dev.device_id));
                write_posterior_csv(&rows, &path)?;
                written.push(path);
            }
        }
    }

    if let Some(lat) = &result.latency {
        let mut h = String::from("lo_us,hi_us,count\n");
        for b in latency_histogram(&lat.samples_us, 40) {
            let _ = writeln!(h, "{},{},{}", b.lo_us, b.hi_us, b.count);
        }
        write(out_dir.join("latency_histogram.csv"), h, &mut written)?;
    }
    Ok(written)
}

pub fn load_report(path: &Path) -> Result<ScenarioResult> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let r: ScenarioResult = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    if r.schema != REPORT_SCHEMA {
        return Err(Error::Config(format!(
            "{}: schema {:?}, expected {REPORT_SCHEMA:?}",
            path.display(),
            r.schema
        )));
    }
    Ok(r)
}
