//! Independent reference implementations shared by the oracle tests and the
//! acceptance runner. Each check returns the worst error it saw.

#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use noisepuf::bayes::{fit_likelihoods, update, BayesConfig, PosteriorState};
use noisepuf::detector::fit_pca;
use noisepuf::harness::metrics::roc_curve;
use noisepuf::puf::{quantize, CalibrationStats, PufConfig};
use noisepuf::spectral::{FeatureVector, Stft, StftConfig, WindowKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, LogNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `|X_k|` for `k = 0..=fft_len/2` of the zero-padded frame, by direct summation.
pub fn naive_dft_magnitudes(frame: &[f64], fft_len: usize) -> Vec<f64> {
    (0..=fft_len / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (n, x) in frame.iter().enumerate() {
                let a = -2.0 * PI * (k * n % fft_len) as f64 / fft_len as f64;
                re += x * a.cos();
                im += x * a.sin();
            }
            re.hypot(im)
        })
        .collect()
}

/// Largest error of any STFT bin, relative to the frame's peak magnitude.
pub fn stft_vs_dft(seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for (kind, win, hop, fft) in [
        (WindowKind::Hann, 256, 64, 256),
        (WindowKind::Rect, 200, 50, 256),
        (WindowKind::Hann, 128, 128, 128),
        (WindowKind::Rect, 16, 4, 32),
    ] {
        let cfg = StftConfig {
            window_kind: kind,
            window_len: win,
            hop,
            fft_len: fft,
        };
        let x: Vec<f64> = (0..win + 3 * hop + r.random_range(0..hop))
            .map(|i| (0.05 * i as f64).sin() + r.random_range(-1.0..1.0))
            .collect();
        let spec = Stft::new(cfg).unwrap().process(&x, 1.0e6).unwrap();
        let w = kind.coefficients(win);
        for (f, mags) in spec.magnitudes.iter().enumerate() {
            let frame: Vec<f64> = (0..win).map(|i| x[f * hop + i] * w[i]).collect();
            let want = naive_dft_magnitudes(&frame, fft);
            let peak = want.iter().cloned().fold(0.0, f64::max);
            for (a, b) in mags.iter().zip(&want) {
                worst = worst.max((a - b).abs() / peak);
            }
        }
    }
    worst
}

fn random_rows(r: &mut ChaCha8Rng, m: usize, n: usize) -> Vec<Vec<f64>> {
    let scales: Vec<f64> = (0..n).map(|j| 1.0 / (1.0 + j as f64)).collect();
    (0..m)
        .map(|_| scales.iter().map(|s| s * r.random_range(-1.0..1.0)).collect())
        .collect()
}

/// Compares `fit_pca` against a covariance eigendecomposition done by
/// nalgebra: eigenvalues, total variance, mean, and the projector onto the
/// retained subspace (sign-free).
pub fn pca_vs_eigen(seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for (m, n, k) in [(40, 6, 3), (120, 16, 5), (30, 10, 10), (300, 64, 8)] {
        let rows = random_rows(&mut r, m, n);
        let model = fit_pca(&rows, k).unwrap();

        let x = DMatrix::from_fn(m, n, |i, j| rows[i][j]);
        let mu = x.row_mean();
        let mut c = x.clone();
        for mut row in c.row_iter_mut() {
            row -= &mu;
        }
        let cov = c.transpose() * &c / (m as f64 - 1.0);
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

        for j in 0..n {
            worst = worst.max((model.mean[j] - mu[j]).abs());
        }
        let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
        worst = worst.max((model.total_variance - total).abs());
        for (i, &o) in order.iter().take(k).enumerate() {
            worst = worst.max((model.explained_variance[i] - eig.eigenvalues[o]).abs());
        }
        for a in 0..n {
            for b in 0..n {
                let got: f64 = model.components.iter().map(|v| v[a] * v[b]).sum();
                let want: f64 = order
                    .iter()
                    .take(k)
                    .map(|&o| eig.eigenvectors[(a, o)] * eig.eigenvectors[(b, o)])
                    .sum();
                worst = worst.max((got - want).abs());
            }
        }
    }
    worst
}

/// Mann-Whitney AUC: pairs ranked correctly, ties counting one half.
/// Returns twice the pair count so it stays an integer.
pub fn auc_pair_count_x2(scores: &[f64], labels: &[bool]) -> u64 {
    let mut twice = 0;
    for (s, l) in scores.iter().zip(labels) {
        if !l {
            continue;
        }
        for (t, m) in scores.iter().zip(labels) {
            if *m {
                continue;
            }
            twice += if s > t { 2 } else if s == t { 1 } else { 0 };
        }
    }
    twice
}

/// Number of random cases where the ROC area disagrees with pair counting.
pub fn auc_vs_pairs(seed: u64, cases: usize) -> usize {
    let mut r = rng(seed);
    let mut bad = 0;
    for _ in 0..cases {
        let n = r.random_range(2..120);
        // Few distinct values so ties are common.
        let levels = r.random_range(2..20);
        let mut labels: Vec<bool> = (0..n).map(|_| r.random()).collect();
        labels[0] = true;
        labels[1] = false;
        let scores: Vec<f64> = labels
            .iter()
            .map(|&l| r.random_range(0..levels) as f64 + if l { 1.5 } else { 0.0 })
            .collect();
        let pos = labels.iter().filter(|&&l| l).count() as u64;
        let neg = n as u64 - pos;
        let auc = roc_curve(&scores, &labels).unwrap().auc;
        let pairs = auc_pair_count_x2(&scores, &labels);
        let scaled = auc * (2 * pos * neg) as f64;
        if scaled.round() as u64 != pairs || (scaled - pairs as f64).abs() > 1e-7 {
            bad += 1;
        }
    }
    bad
}

/// Number of bits where `quantize` disagrees with `f_i > mu_i + theta * sigma_i`.
pub fn quantize_vs_elementwise(seed: u64, cases: usize) -> usize {
    let mut r = rng(seed);
    let mut bad = 0;
    for _ in 0..cases {
        let n = r.random_range(1..128);
        let theta = [0.0, 0.5, -0.3, 1.0][r.random_range(0..4)];
        let mean: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0)).collect();
        let std: Vec<f64> = (0..n).map(|_| r.random_range(0.0..0.2)).collect();
        let mut values: Vec<f64> = (0..n).map(|_| r.random_range(-0.2..1.2)).collect();
        // Exact ties must quantize to 0.
        for i in (0..n).step_by(7) {
            values[i] = mean[i] + theta * std[i];
        }
        let cal = CalibrationStats {
            mean: mean.clone(),
            std: std.clone(),
            n_samples: 16,
        };
        let cfg = PufConfig {
            theta,
            ..PufConfig::default()
        };
        let f = FeatureVector {
            values: values.clone(),
            band_centers: vec![],
            band_energy: 1.0,
        };
        let got = quantize(&f, &cal, &cfg).unwrap();
        for i in 0..n {
            if got.bits()[i] != (values[i] > mean[i] + theta * std[i]) {
                bad += 1;
            }
        }
    }
    bad
}

/// One filter step against the closed form, with likelihoods from statrs.
pub fn bayes_vs_closed_form(seed: u64, cases: usize) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let benign: Vec<f64> = (0..40).map(|_| (-14.0 + r.random_range(-0.5..0.5f64)).exp()).collect();
        let attack: Vec<f64> = (0..40).map(|_| (-12.5 + r.random_range(-0.8..0.8f64)).exp()).collect();
        let lm = fit_likelihoods(&benign, &attack).unwrap();
        let cfg = BayesConfig {
            decision_threshold: 0.9,
            forgetting: r.random_range(0.5..=1.0),
            initial_prior: r.random_range(0.001..0.5),
        };
        let mut state = PosteriorState::new(&cfg);
        state.p_anomalous = r.random_range(0.0..1.0);
        let score = (r.random_range(-15.0..-11.5f64)).exp();

        let ln_pdf = |mu: f64, sigma: f64| LogNormal::new(mu, sigma).unwrap().pdf(score);
        let l1 = lm
            .anomalous
            .iter()
            .map(|c| ln_pdf(c.mu, c.sigma))
            .sum::<f64>()
            / lm.anomalous.len() as f64;
        let l1 = l1.max(lm.floor);
        let l0 = ln_pdf(lm.benign.mu, lm.benign.sigma).max(lm.floor);
        let prior = cfg.forgetting * state.p_anomalous + (1.0 - cfg.forgetting) * cfg.initial_prior;
        let want = prior * l1 / (prior * l1 + (1.0 - prior) * l0);

        let got = update(&state, score, &lm).unwrap().p_anomalous;
        worst = worst.max((got - want).abs());
    }
    worst
}
