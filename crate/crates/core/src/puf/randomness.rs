//! Three short-stream randomness tests from NIST SP 800-22: frequency
//! (monobit), runs, and frequency within a block.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};

pub const ALPHA: f64 = 0.01;
pub const DEFAULT_MIN_LEN: usize = 128;
pub const BLOCK_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub p_value: f64,
    pub passed: bool,
}

impl TestOutcome {
    fn new(p_value: f64) -> Self {
        Self {
            p_value,
            passed: p_value >= ALPHA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomnessReport {
    pub n_bits: usize,
    pub monobit: TestOutcome,
    pub runs: TestOutcome,
    pub block_frequency: TestOutcome,
    pub passed: bool,
}

pub fn monobit_p(bits: &[bool]) -> f64 {
    let n = bits.len() as f64;
    let s: f64 = bits.iter().map(|&b| if b { 1.0 } else { -1.0 }).sum();
    erfc(s.abs() / n.sqrt() / std::f64::consts::SQRT_2)
}

/// Returns 0 when the frequency prerequisite `|pi - 1/2| < 2 / sqrt(n)` fails.
pub fn runs_p(bits: &[bool]) -> f64 {
    let n = bits.len() as f64;
    let pi = bits.iter().filter(|&&b| b).count() as f64 / n;
    if (pi - 0.5).abs() >= 2.0 / n.sqrt() {
        return 0.0;
    }
    let v = 1 + bits.windows(2).filter(|w| w[0] != w[1]).count();
    let num = (v as f64 - 2.0 * n * pi * (1.0 - pi)).abs();
    let den = 2.0 * (2.0 * n).sqrt() * pi * (1.0 - pi);
    erfc(num / den)
}

/// Trailing bits that do not fill a block are discarded.
pub fn block_frequency_p(bits: &[bool], block_len: usize) -> f64 {
    let blocks = bits.len() / block_len;
    let chi2: f64 = bits
        .chunks_exact(block_len)
        .map(|c| {
            let pi = c.iter().filter(|&&b| b).count() as f64 / block_len as f64;
            (pi - 0.5).powi(2)
        })
        .sum::<f64>()
        * 4.0
        * block_len as f64;
    if chi2 == 0.0 {
        return 1.0;
    }
    gamma_ur(blocks as f64 / 2.0, chi2 / 2.0)
}

/// Runs all three tests; overall pass iff every p-value is at least 0.01.
pub fn randomness_tests(bits: &[bool], min_len: usize) -> Result<RandomnessReport> {
    if bits.len() < min_len.max(BLOCK_LEN) {
        return Err(Error::param(
            "bitstream",
            format!("{} bits given, minimum is {min_len}", bits.len()),
        ));
    }
    let monobit = TestOutcome::new(monobit_p(bits));
    let runs = TestOutcome::new(runs_p(bits));
    let block_frequency = TestOutcome::new(block_frequency_p(bits, BLOCK_LEN));
    Ok(RandomnessReport {
        n_bits: bits.len(),
        passed: monobit.passed && runs.passed && block_frequency.passed,
        monobit,
        runs,
        block_frequency,
    })
}
