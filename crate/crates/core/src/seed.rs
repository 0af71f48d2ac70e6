//! Deterministic seed derivation for independent random streams.

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a base seed, a stream tag, and an index path.
pub fn derive(base: u64, tag: &str, path: &[u64]) -> u64 {
    let mut h = mix(base);
    for b in tag.bytes() {
        h = mix(h ^ b as u64);
    }
    for &p in path {
        h = mix(h ^ p);
    }
    h
}
