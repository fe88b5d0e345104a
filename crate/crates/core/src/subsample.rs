//! Row subsampling before tuning.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    None,
    Uniform,
    Leverage,
}

impl SamplerKind {
    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::None => "none",
            SamplerKind::Uniform => "uniform",
            SamplerKind::Leverage => "leverage",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsampleResult {
    /// Sorted, unique row indices into the parent matrix.
    pub rows: Vec<usize>,
    pub sampler: SamplerKind,
    pub seed: u64,
    /// Set when leverage sampling had no signal and fell back to uniform.
    pub fallback_uniform: bool,
}

fn check(x: &DataMatrix, n_prime: usize) -> Result<()> {
    if n_prime < 1 || n_prime > x.rows() {
        return Err(Error::domain(format!(
            "subsample size {n_prime} outside 1..={}",
            x.rows()
        )));
    }
    Ok(())
}

pub fn uniform_sample(x: &DataMatrix, n_prime: usize, seed: u64) -> Result<SubsampleResult> {
    check(x, n_prime)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = rand::seq::index::sample(&mut rng, x.rows(), n_prime).into_vec();
    rows.sort_unstable();
    Ok(SubsampleResult {
        rows,
        sampler: SamplerKind::Uniform,
        seed,
        fallback_uniform: false,
    })
}

/// Squared row norms of the left singular vectors of the column-centered
/// matrix, restricted to its numerical rank.
pub fn leverage_scores(x: &DataMatrix) -> Vec<f64> {
    let (n, d) = (x.rows(), x.cols());
    let mut means = vec![0.0; d];
    for row in x.iter_rows() {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v / n as f64;
        }
    }
    let centered = DMatrix::from_fn(n, d, |i, j| x.get(i, j) - means[j]);
    let svd = centered.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let tol = smax * n.max(d) as f64 * f64::EPSILON;
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| smax > 0.0 && svd.singular_values[k] > tol)
        .collect();
    (0..n)
        .map(|i| keep.iter().map(|&k| u[(i, k)] * u[(i, k)]).sum())
        .collect()
}

/// Draws `count` distinct indices with probability proportional to `weights`,
/// renormalizing after each draw. Zero-weight rows are only drawn (uniformly)
/// once every positive-weight row has been taken.
fn weighted_without_replacement(weights: &[f64], count: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut w = weights.to_vec();
    let mut taken = vec![false; w.len()];
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let total: f64 = w.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, wi) in w.iter().enumerate() {
                if *wi > 0.0 {
                    if u < *wi {
                        pick = Some(i);
                        break;
                    }
                    u -= wi;
                }
            }
            // Rounding can leave u just past the last positive weight.
            pick.unwrap_or_else(|| w.iter().rposition(|&v| v > 0.0).expect("positive total"))
        } else {
            let free: Vec<usize> = (0..w.len()).filter(|&i| !taken[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        taken[pick] = true;
        w[pick] = 0.0;
        out.push(pick);
    }
    out
}

pub fn leverage_sample(x: &DataMatrix, n_prime: usize, seed: u64) -> Result<SubsampleResult> {
    check(x, n_prime)?;
    if n_prime == x.rows() {
        return Ok(SubsampleResult {
            rows: (0..n_prime).collect(),
            sampler: SamplerKind::Leverage,
            seed,
            fallback_uniform: false,
        });
    }
    let scores = leverage_scores(x);
    if scores.iter().all(|&s| s <= 0.0) {
        log::warn!("leverage scores are all zero; falling back to uniform sampling");
        let mut out = uniform_sample(x, n_prime, seed)?;
        out.sampler = SamplerKind::Leverage;
        out.fallback_uniform = true;
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = weighted_without_replacement(&scores, n_prime, &mut rng);
    rows.sort_unstable();
    Ok(SubsampleResult {
        rows,
        sampler: SamplerKind::Leverage,
        seed,
        fallback_uniform: false,
    })
}

pub fn subsample(kind: SamplerKind, x: &DataMatrix, n_prime: usize, seed: u64) -> Result<SubsampleResult> {
    match kind {
        SamplerKind::None => {
            check(x, n_prime)?;
            if n_prime != x.rows() {
                return Err(Error::domain("sampler `none` requires n_prime = n"));
            }
            Ok(SubsampleResult {
                rows: (0..x.rows()).collect(),
                sampler: kind,
                seed,
                fallback_uniform: false,
            })
        }
        SamplerKind::Uniform => uniform_sample(x, n_prime, seed),
        SamplerKind::Leverage => leverage_sample(x, n_prime, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hand_matrix() -> DataMatrix {
        // Four rows near the origin and one far outlier.
        DataMatrix::from_rows(&[
            vec![0.0, 0.1],
            vec![0.2, -0.1],
            vec![-0.1, 0.0],
            vec![0.1, 0.2],
            vec![6.0, 5.0],
        ])
        .unwrap()
    }

    #[test]
    fn uniform_identity_and_determinism() {
        let x = hand_matrix();
        assert_eq!(uniform_sample(&x, 5, 1).unwrap().rows, vec![0, 1, 2, 3, 4]);
        assert_eq!(uniform_sample(&x, 3, 9).unwrap(), uniform_sample(&x, 3, 9).unwrap());
        assert!(uniform_sample(&x, 6, 0).is_err());
        assert!(uniform_sample(&x, 0, 0).is_err());
    }

    #[test]
    fn uniform_inclusion_frequency() {
        let x = DataMatrix::new((0..20).map(f64::from).collect(), 20, 1).unwrap();
        let (trials, n_prime) = (4000, 5);
        let mut hits = [0usize; 20];
        for s in 0..trials {
            for r in uniform_sample(&x, n_prime, s).unwrap().rows {
                hits[r] += 1;
            }
        }
        let p = n_prime as f64 / 20.0;
        let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
        for h in hits {
            assert!((h as f64 - trials as f64 * p).abs() < 3.0 * sigma + 1.0, "{h}");
        }
    }

    /// Leverage via the hat matrix `Xc (Xc^T Xc)^-1 Xc^T` for a full-rank 5x2 case.
    fn hat_diagonal(x: &DataMatrix) -> Vec<f64> {
        let n = x.rows() as f64;
        let m0 = x.iter_rows().map(|r| r[0]).sum::<f64>() / n;
        let m1 = x.iter_rows().map(|r| r[1]).sum::<f64>() / n;
        let rows: Vec<[f64; 2]> = x.iter_rows().map(|r| [r[0] - m0, r[1] - m1]).collect();
        let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
        for r in &rows {
            a += r[0] * r[0];
            b += r[0] * r[1];
            c += r[1] * r[1];
        }
        let det = a * c - b * b;
        rows.iter()
            .map(|r| (c * r[0] * r[0] - 2.0 * b * r[0] * r[1] + a * r[1] * r[1]) / det)
            .collect()
    }

    #[test]
    fn scores_match_hat_matrix_and_sum_to_rank() {
        let x = hand_matrix();
        let scores = leverage_scores(&x);
        let oracle = hat_diagonal(&x);
        for (s, o) in scores.iter().zip(&oracle) {
            assert!((s - o).abs() < 1e-10);
            assert!(*s >= 0.0);
        }
        assert!((scores.iter().sum::<f64>() - 2.0).abs() < 1e-8);
    }

    #[test]
    fn outlier_is_the_most_likely_single_draw() {
        let x = hand_matrix();
        let scores = hat_diagonal(&x);
        let total: f64 = scores.iter().sum();
        let p_out = scores[4] / total;
        assert!(scores[..4].iter().all(|s| s / total < p_out));
        let trials = 4000;
        let hits = (0..trials)
            .filter(|&s| leverage_sample(&x, 1, s).unwrap().rows == vec![4])
            .count();
        let sigma = (trials as f64 * p_out * (1.0 - p_out)).sqrt();
        assert!((hits as f64 - trials as f64 * p_out).abs() < 3.0 * sigma);
    }

    #[test]
    fn leverage_full_and_degenerate() {
        let x = hand_matrix();
        assert_eq!(leverage_sample(&x, 5, 3).unwrap().rows, vec![0, 1, 2, 3, 4]);
        let flat = DataMatrix::new(vec![1.0; 10], 5, 2).unwrap();
        let r = leverage_sample(&flat, 2, 3).unwrap();
        assert!(r.fallback_uniform);
        assert_eq!(r.rows.len(), 2);
        let a = leverage_sample(&x, 3, 11).unwrap();
        assert_eq!(a, leverage_sample(&x, 3, 11).unwrap());
        assert!(a.rows.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn rank_deficient_draws_zero_weight_rows_last() {
        // Collinear rows: rank 1, all rows on the line have positive leverage
        // except the one at the mean.
        let x = DataMatrix::from_rows(&[vec![-1.0, -1.0], vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let scores = leverage_scores(&x);
        assert!((scores.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        assert!(scores[1].abs() < 1e-12);
        assert_eq!(leverage_sample(&x, 2, 0).unwrap().rows, vec![0, 2]);
    }
}
