//! ROC/AUC and confusion-matrix metrics.

use serde::{Deserialize, Serialize};

use crate::detector::ConfusionCounts;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// `score >= threshold` is flagged; `None` on the two endpoints.
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roc {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// Sweeps every unique score as a threshold (ties grouped) between the
/// `(0, 0)` and `(1, 1)` endpoints and integrates by the trapezoidal rule.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Roc> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::param("scores", "must be finite"));
    }
    let pos = labels.iter().filter(|&&l| l).count() as f64;
    let neg = labels.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return Err(Error::param("labels", "ROC needs both classes present"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: None,
    }];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp / neg,
            tpr: tp / pos,
            threshold: Some(t),
        });
    }
    points.push(RocPoint {
        fpr: 1.0,
        tpr: 1.0,
        threshold: None,
    });
    let auc = points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum();
    Ok(Roc { points, auc })
}

/// Standard rates; any `0 / 0` is reported as `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub accuracy: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn prf_metrics(c: &ConfusionCounts) -> Prf {
    Prf {
        precision: ratio(c.tp, c.tp + c.fp),
        recall: ratio(c.tp, c.tp + c.fn_),
        f1: ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
        accuracy: ratio(c.tp + c.tn, c.total()),
        fpr: ratio(c.fp, c.fp + c.tn),
        fnr: ratio(c.fn_, c.fn_ + c.tp),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pair_auc(scores: &[f64], labels: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            if !li {
                continue;
            }
            for (j, &lj) in labels.iter().enumerate() {
                if lj {
                    continue;
                }
                den += 1.0;
                num += match scores[i].partial_cmp(&scores[j]).unwrap() {
                    std::cmp::Ordering::Greater => 1.0,
                    std::cmp::Ordering::Equal => 0.5,
                    std::cmp::Ordering::Less => 0.0,
                };
            }
        }
        num / den
    }

    #[test]
    fn perfect_separation() {
        let r = roc_curve(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap();
        assert_eq!(r.auc, 1.0);
        assert_eq!(r.points.len(), 4 + 2);
    }

    #[test]
    fn hand_built_set_with_ties() {
        let scores = [0.9, 0.7, 0.7, 0.4, 0.4, 0.1];
        let labels = [true, true, false, true, false, false];
        let r = roc_curve(&scores, &labels).unwrap();
        // 9 positive/negative pairs: 3 + 2.5 + 1.5 wins.
        assert_eq!(pair_auc(&scores, &labels), 7.0 / 9.0);
        assert!((r.auc - 7.0 / 9.0).abs() < 1e-15);
        assert_eq!(r.points.len(), 4 + 2);
    }

    #[test]
    fn random_labels_near_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let scores: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
        let labels: Vec<bool> = (0..10_000).map(|_| rng.random()).collect();
        let r = roc_curve(&scores, &labels).unwrap();
        assert!((r.auc - 0.5).abs() < 0.05);
    }

    #[test]
    fn endpoints_and_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let scores: Vec<f64> = (0..300).map(|_| (rng.random::<f64>() * 20.0).floor()).collect();
        let labels: Vec<bool> = scores.iter().map(|s| rng.random::<f64>() < s / 20.0).collect();
        let r = roc_curve(&scores, &labels).unwrap();
        assert_eq!((r.points[0].fpr, r.points[0].tpr), (0.0, 0.0));
        let last = r.points.last().unwrap();
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        for w in r.points.windows(2) {
            assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
        }
        assert!((r.auc - pair_auc(&scores, &labels)).abs() < 1e-12);
    }

    #[test]
    fn single_class_rejected() {
        assert!(roc_curve(&[0.1, 0.2], &[true, true]).is_err());
        assert!(roc_curve(&[0.1], &[true, false]).is_err());
    }

    #[test]
    fn table_shaped_counts() {
        let c = ConfusionCounts {
            tp: 94,
            fn_: 6,
            fp: 4,
            tn: 96,
        };
        let m = prf_metrics(&c);
        assert_eq!(m.recall, Some(0.94));
        assert!((m.precision.unwrap() - 94.0 / 98.0).abs() < 1e-15);
        assert!((m.precision.unwrap() - 0.959).abs() < 1e-3);
        assert_eq!(m.accuracy, Some(0.95));
        assert_eq!(m.fpr, Some(0.04));
        assert_eq!(m.fnr, Some(0.06));
    }

    #[test]
    fn zero_counts_all_absent() {
        let m = prf_metrics(&ConfusionCounts::default());
        assert!(m.precision.is_none() && m.recall.is_none() && m.f1.is_none());
        assert!(m.accuracy.is_none() && m.fpr.is_none() && m.fnr.is_none());
    }

    #[test]
    fn random_counts_match_definitions() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let c = ConfusionCounts {
                tp: rng.random_range(1..500),
                fp: rng.random_range(1..500),
                fn_: rng.random_range(1..500),
                tn: rng.random_range(1..500),
            };
            let (tp, fp, fn_, tn) = (c.tp as f64, c.fp as f64, c.fn_ as f64, c.tn as f64);
            let m = prf_metrics(&c);
            let p = tp / (tp + fp);
            let r = tp / (tp + fn_);
            assert!((m.precision.unwrap() - p).abs() < 1e-12);
            assert!((m.recall.unwrap() - r).abs() < 1e-12);
            assert!((m.f1.unwrap() - 2.0 * p * r / (p + r)).abs() < 1e-12);
            assert_eq!(m.accuracy.unwrap(), (tp + tn) / (tp + fp + fn_ + tn));
            assert!((m.fpr.unwrap() - fp / (fp + tn)).abs() < 1e-12);
            assert!((m.fnr.unwrap() - fn_ / (fn_ + tp)).abs() < 1e-12);
        }
    }
}
