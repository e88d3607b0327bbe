//! Deterministic seed derivation.
//!
//! Bootstrap worlds and Monte Carlo replications each get their own RNG seed,
//! derived from the user-supplied base seed and the unit of work's indices.
//! The mix is a fixed SplitMix64 chain, so derived seeds are stable across
//! runs, platforms, and thread schedules.

/// One SplitMix64 scramble step.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix an ordered list of 64-bit parts into one seed.
///
/// Order-sensitive by design: `mix(&[a, b]) != mix(&[b, a])` in general.
pub fn mix(parts: &[u64]) -> u64 {
    let mut h = 0x51_7C_C1_B7_27_22_0A_95u64;
    for &p in parts {
        h = splitmix64(h ^ p);
    }
    h
}

/// Seed for bootstrap world `world` (0-based), attempt `attempt` (0-based).
///
/// Attempts beyond 0 are redraws after a single-class resample.
pub fn world_seed(base: u64, world: usize, attempt: usize) -> u64 {
    mix(&[base, 0xB007, world as u64, attempt as u64])
}

/// Seed for one Monte Carlo replication inside a grid cell.
pub fn replication_seed(base: u64, n: usize, t_index: usize, rep: usize) -> u64 {
    mix(&[base, 0x5EED, n as u64, t_index as u64, rep as u64])
}

/// Seed for the bootstrap ensemble built inside one replication.
pub fn ensemble_seed(replication: u64) -> u64 {
    mix(&[replication, 0xE25B])
}
