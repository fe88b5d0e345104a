//! Owen-scrambled Sobol points in the unit cube.

use crate::error::{Error, Result};

/// Largest number of points one scrambled sequence can supply.
pub const MAX_POINTS: usize = 1 << 16;

/// `count` points of a `dim`-dimensional scrambled Sobol sequence. Different
/// seeds give statistically independent sequences.
pub fn sobol_points(count: usize, dim: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if count > MAX_POINTS {
        return Err(Error::domain(format!("at most {MAX_POINTS} Sobol points supported")));
    }
    if dim > sobol_burley::NUM_DIMENSIONS as usize {
        return Err(Error::domain(format!(
            "at most {} Sobol dimensions supported",
            sobol_burley::NUM_DIMENSIONS
        )));
    }
    let seed = (seed ^ (seed >> 32)) as u32;
    Ok((0..count as u32)
        .map(|i| {
            (0..dim as u32)
                .map(|d| f64::from(sobol_burley::sample(i, d, seed)))
                .collect()
        })
        .collect())
}
