//! Response metrology: Hamming distances, entropy, uniqueness, reliability, uniformity.

use std::collections::BTreeMap;

use super::PufResponse;
use crate::error::{Error, Result};

pub fn hamming(a: &PufResponse, b: &PufResponse) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.bits().iter().zip(b.bits()).filter(|(x, y)| x != y).count())
}

pub fn fractional_hamming(a: &PufResponse, b: &PufResponse) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::param("response", "empty response"));
    }
    Ok(hamming(a, b)? as f64 / a.len() as f64)
}

/// Binary entropy of the empirical bit frequency, in bits per bit.
pub fn shannon_entropy(r: &PufResponse) -> Result<f64> {
    if r.is_empty() {
        return Err(Error::param("response", "empty response"));
    }
    let p1 = r.popcount() as f64 / r.len() as f64;
    Ok([p1, 1.0 - p1]
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum())
}

/// Mean fractional Hamming distance over all unordered device pairs, in percent.
pub fn uniqueness(responses: &BTreeMap<u32, PufResponse>) -> Result<f64> {
    if responses.len() < 2 {
        return Err(Error::param("responses", "uniqueness needs at least 2 devices"));
    }
    let rs: Vec<&PufResponse> = responses.values().collect();
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..rs.len() {
        for j in i + 1..rs.len() {
            total += fractional_hamming(rs[i], rs[j])?;
            pairs += 1;
        }
    }
    Ok(100.0 * total / pairs as f64)
}

/// Per device: mean fractional Hamming distance to every other device, in percent.
pub fn uniqueness_per_device(responses: &BTreeMap<u32, PufResponse>) -> Result<BTreeMap<u32, f64>> {
    if responses.len() < 2 {
        return Err(Error::param("responses", "uniqueness needs at least 2 devices"));
    }
    let others = (responses.len() - 1) as f64;
    responses
        .iter()
        .map(|(&id, r)| {
            let sum = responses
                .iter()
                .filter(|(&o, _)| o != id)
                .map(|(_, q)| fractional_hamming(r, q))
                .sum::<Result<f64>>()?;
            Ok((id, 100.0 * sum / others))
        })
        .collect()
}

/// `100 * (1 - mean fractional Hamming distance of repeats to reference)`.
pub fn reliability(repeats: &[PufResponse], reference: &PufResponse) -> Result<f64> {
    if repeats.is_empty() {
        return Err(Error::param("repeats", "need at least one repeat"));
    }
    let mean = repeats
        .iter()
        .map(|r| fractional_hamming(reference, r))
        .sum::<Result<f64>>()?
        / repeats.len() as f64;
    Ok(100.0 * (1.0 - mean))
}

/// Percentage of one-bits.
pub fn uniformity(r: &PufResponse) -> Result<f64> {
    if r.is_empty() {
        return Err(Error::param("response", "empty response"));
    }
    Ok(100.0 * r.popcount() as f64 / r.len() as f64)
}
