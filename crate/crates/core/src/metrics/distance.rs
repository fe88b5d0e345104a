//! Distance-based quality measures.

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;

/// Symmetric Euclidean distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Distances {
    n: usize,
    values: Vec<f64>,
}

impl Distances {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Upper-triangle entries in row-major order.
    pub fn upper(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * (self.n - 1) / 2);
        for i in 0..self.n {
            for j in i + 1..self.n {
                out.push(self.get(i, j));
            }
        }
        out
    }
}

pub fn pairwise_distances(x: &DataMatrix) -> Distances {
    let n = x.rows();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = x.squared_distance(i, j).sqrt();
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
    }
    Distances { n, values }
}

fn check_same_n(x: &DataMatrix, x_star: &DataMatrix) -> Result<()> {
    if x.rows() != x_star.rows() {
        return Err(Error::domain(format!(
            "sample counts differ: {} vs {}",
            x.rows(),
            x_star.rows()
        )));
    }
    Ok(())
}

/// Mean of `|r_ij - 1|` where `r_ij` is the ratio of mean-normalized embedded
/// to mean-normalized original distances; pairs with zero original distance
/// are skipped. Clamped to `[0, 1]`.
pub fn avg_distance_ratio(x: &DataMatrix, x_star: &DataMatrix) -> Result<f64> {
    check_same_n(x, x_star)?;
    let high = pairwise_distances(x).upper();
    let low = pairwise_distances(x_star).upper();
    let kept: Vec<(f64, f64)> = high
        .into_iter()
        .zip(low)
        .filter(|(h, _)| *h > 0.0)
        .collect();
    if kept.is_empty() {
        return Err(Error::domain("all original pairwise distances are zero"));
    }
    let m = kept.len() as f64;
    let mean_high = kept.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_low = kept.iter().map(|p| p.1).sum::<f64>() / m;
    if mean_low <= 0.0 {
        return Ok(1.0);
    }
    let dev = kept
        .iter()
        .map(|(h, l)| ((l / mean_low) / (h / mean_high) - 1.0).abs())
        .sum::<f64>()
        / m;
    Ok(dev.min(1.0))
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// `(1 - rho) / 2` for the Pearson correlation of the two distance vectors.
pub fn pearson_dist_corr(x: &DataMatrix, x_star: &DataMatrix) -> Result<f64> {
    check_same_n(x, x_star)?;
    let high = pairwise_distances(x).upper();
    let low = pairwise_distances(x_star).upper();
    let rho = pearson(&high, &low)
        .ok_or_else(|| Error::domain("pairwise distances have zero variance"))?;
    Ok(((1.0 - rho) / 2.0).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_matrix(seed: u64, n: usize, d: usize) -> DataMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DataMatrix::new((0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect(), n, d).unwrap()
    }

    #[test]
    fn three_four_five() {
        let x = DataMatrix::from_rows(&[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        let d = pairwise_distances(&x);
        assert_eq!(d.get(0, 1), 5.0);
        assert_eq!(d.get(1, 0), 5.0);
        assert_eq!(d.get(0, 0), 0.0);
    }

    #[test]
    fn matches_brute_force() {
        let x = rand_matrix(1, 10, 3);
        let d = pairwise_distances(&x);
        for i in 0..10 {
            assert_eq!(d.get(i, i), 0.0);
            for j in 0..10 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += (x.get(i, k) - x.get(j, k)).powi(2);
                }
                assert!((d.get(i, j) - s.sqrt()).abs() < 1e-12);
                assert_eq!(d.get(i, j), d.get(j, i));
            }
        }
    }

    #[test]
    fn ratio_is_scale_invariant() {
        let x = rand_matrix(2, 8, 2);
        let doubled = DataMatrix::new(x.values().iter().map(|v| 2.0 * v).collect(), 8, 2).unwrap();
        assert!(avg_distance_ratio(&x, &doubled).unwrap() < 1e-12);
        assert!(avg_distance_ratio(&x, &x).unwrap() < 1e-12);
    }

    #[test]
    fn ratio_three_point_hand_case() {
        // Original: a right triangle with legs 3, 4 (distances 3, 4, 5).
        let x = DataMatrix::from_rows(&[vec![0.0, 0.0], vec![3.0, 0.0], vec![0.0, 4.0]]).unwrap();
        // Embedding stretches the first leg to 6: distances 6, 4, sqrt(52).
        let y = DataMatrix::from_rows(&[vec![0.0, 0.0], vec![6.0, 0.0], vec![0.0, 4.0]]).unwrap();
        let high = [3.0, 4.0, 5.0];
        let low = [6.0, 4.0, 52f64.sqrt()];
        let mh = high.iter().sum::<f64>() / 3.0;
        let ml = low.iter().sum::<f64>() / 3.0;
        let expected = high
            .iter()
            .zip(low.iter())
            .map(|(h, l)| ((l / ml) / (h / mh) - 1.0f64).abs())
            .sum::<f64>()
            / 3.0;
        assert!((avg_distance_ratio(&x, &y).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn ratio_rejects_all_duplicate_rows() {
        let x = DataMatrix::from_rows(&[vec![1.0], vec![1.0], vec![1.0]]).unwrap();
        let y = DataMatrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        assert!(avg_distance_ratio(&x, &y).is_err());
        // Partial duplicates are only excluded.
        let x = DataMatrix::from_rows(&[vec![1.0], vec![1.0], vec![2.0]]).unwrap();
        assert!(avg_distance_ratio(&x, &y).is_ok());
    }

    #[test]
    fn pearson_bounds() {
        let x = rand_matrix(3, 8, 3);
        assert!(pearson_dist_corr(&x, &x).unwrap() < 1e-12);
        // Distances (1, 3, 2) against (3, 1, 2): one is 4 minus the other.
        let a = DataMatrix::from_rows(&[vec![0.0], vec![1.0], vec![3.0]]).unwrap();
        let b = DataMatrix::from_rows(&[vec![0.0], vec![3.0], vec![1.0]]).unwrap();
        assert!((pearson_dist_corr(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        let zero = DataMatrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(pearson_dist_corr(&zero, &zero).is_err());
    }

    #[test]
    fn pearson_matches_textbook_formula() {
        let x = rand_matrix(4, 8, 4);
        let y = rand_matrix(5, 8, 2);
        let a = pairwise_distances(&x).upper();
        let b = pairwise_distances(&y).upper();
        let n = a.len() as f64;
        let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
        let sab: f64 = a.iter().zip(&b).map(|(p, q)| p * q).sum();
        let saa: f64 = a.iter().map(|p| p * p).sum();
        let sbb: f64 = b.iter().map(|q| q * q).sum();
        let rho = (n * sab - sa * sb) / ((n * saa - sa * sa).sqrt() * (n * sbb - sb * sb).sqrt());
        assert!((pearson_dist_corr(&x, &y).unwrap() - (1.0 - rho) / 2.0).abs() < 1e-12);
    }
}
