//! Deterministic seed derivation.
//!
//! Every engine run gets a seed derived from `(master, trial, repeat)` so that
//! repeats differ, runs reproduce, and no two trials share a seed stream.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `base` with each key in turn.
pub fn derive(base: u64, keys: &[u64]) -> u64 {
    keys.iter().fold(splitmix(base.wrapping_add(GOLDEN)), |acc, &k| {
        splitmix(acc ^ splitmix(k.wrapping_add(GOLDEN).wrapping_mul(0xD6E8_FEB8_6659_FD93)))
    })
}

pub fn trial_seed(master: u64, trial: usize) -> u64 {
    derive(master, &[trial as u64])
}

pub fn repeat_seed(trial_seed: u64, repeat: usize) -> u64 {
    derive(trial_seed, &[repeat as u64, 1])
}
