//! Rank-based quality measures built on the coranking matrix.

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;
use crate::metrics::distance::{pairwise_distances, Distances};

/// `(n-1) x (n-1)` count matrix: entry `(k, l)` (zero-based here, ranks
/// `k+1`, `l+1`) is the number of ordered pairs `(i, j)` where `j` is the
/// `(k+1)`-th neighbor of `i` in the original space and the `(l+1)`-th in the
/// embedding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorankingMatrix {
    n: usize,
    counts: Vec<u64>,
}

impl CorankingMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn size(&self) -> usize {
        self.n - 1
    }

    /// Count at zero-based ranks `(k, l)`.
    pub fn get(&self, k: usize, l: usize) -> u64 {
        self.counts[k * (self.n - 1) + l]
    }

    pub fn row_sums(&self) -> Vec<u64> {
        let m = self.size();
        (0..m).map(|k| (0..m).map(|l| self.get(k, l)).sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        let m = self.size();
        (0..m).map(|l| (0..m).map(|k| self.get(k, l)).sum()).collect()
    }
}

/// Neighbor ranks of every point: `ranks[i * n + j]` is the 1-based rank of
/// `j` among the neighbors of `i`, ties broken by the smaller index.
pub(crate) fn rank_matrix(dist: &Distances) -> Vec<usize> {
    let n = dist.n();
    let mut ranks = vec![0usize; n * n];
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        order.sort_by(|&a, &b| dist.get(i, a).total_cmp(&dist.get(i, b)).then(a.cmp(&b)));
        for (r, &j) in order.iter().enumerate() {
            ranks[i * n + j] = r + 1;
        }
    }
    ranks
}

pub fn coranking(x: &DataMatrix, x_star: &DataMatrix) -> Result<CorankingMatrix> {
    if x.rows() != x_star.rows() {
        return Err(Error::domain(format!(
            "coranking needs matching sample counts, got {} and {}",
            x.rows(),
            x_star.rows()
        )));
    }
    let n = x.rows();
    let high = rank_matrix(&pairwise_distances(x));
    let low = rank_matrix(&pairwise_distances(x_star));
    let m = n - 1;
    let mut counts = vec![0u64; m * m];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                counts[(high[i * n + j] - 1) * m + (low[i * n + j] - 1)] += 1;
            }
        }
    }
    Ok(CorankingMatrix { n, counts })
}

/// `Q_NX(K)` for `K = 1..=n-2`; entry `K-1` of the returned vector.
pub fn qnx_curve(c: &CorankingMatrix) -> Vec<f64> {
    let n = c.n;
    if n < 3 {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(n - 2);
    let mut inside: u64 = 0;
    for k in 1..=n - 2 {
        let e = k - 1;
        // Grow the leading K x K block by its new row and column.
        for l in 0..k {
            inside += c.get(e, l);
        }
        for r in 0..e {
            inside += c.get(r, e);
        }
        out.push(inside as f64 / (k * n) as f64);
    }
    out
}

pub fn q_nx(c: &CorankingMatrix, k: usize) -> Result<f64> {
    let n = c.n;
    if k < 1 || k + 2 > n {
        return Err(Error::domain(format!("K = {k} outside 1..={}", n.saturating_sub(2))));
    }
    let inside: u64 = (0..k).flat_map(|a| (0..k).map(move |b| (a, b))).map(|(a, b)| c.get(a, b)).sum();
    Ok(inside as f64 / (k * n) as f64)
}

/// `R_NX(K)` for `K = 1..=n-2`.
pub fn rnx_curve(c: &CorankingMatrix) -> Vec<f64> {
    let m = (c.n - 1) as f64;
    qnx_curve(c)
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let k = (i + 1) as f64;
            (m * q - k) / (m - k)
        })
        .collect()
}

/// `1 - AUC` of the `R_NX` curve on a log-K axis.
pub fn auc_rnx(c: &CorankingMatrix) -> Result<f64> {
    if c.n < 3 {
        return Err(Error::domain("AUC needs at least 3 samples"));
    }
    let (num, den) = rnx_curve(c)
        .iter()
        .enumerate()
        .fold((0.0, 0.0), |(num, den), (i, r)| {
            let w = 1.0 / (i + 1) as f64;
            (num + r * w, den + w)
        });
    Ok((1.0 - num / den).clamp(0.0, 1.0))
}

/// Returns `(1 - Q_local, 1 - Q_global)` split at the LCMC maximizer.
pub fn q_local_global(c: &CorankingMatrix) -> Result<(f64, f64)> {
    let n = c.n;
    if n < 4 {
        return Err(Error::domain("Q-local/Q-global need at least 4 samples"));
    }
    let q = qnx_curve(c);
    let m = (n - 1) as f64;
    let mut k_max = 1;
    let mut best = f64::NEG_INFINITY;
    for (i, qk) in q.iter().enumerate() {
        let lcmc = qk - (i + 1) as f64 / m;
        if lcmc > best {
            best = lcmc;
            k_max = i + 1;
        }
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let local = mean(&q[..k_max]);
    // With the maximizer at the last K there is no global range left; use Q_NX there.
    let global = if k_max < q.len() { mean(&q[k_max..]) } else { q[q.len() - 1] };
    Ok(((1.0 - local).clamp(0.0, 1.0), (1.0 - global).clamp(0.0, 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DataMatrix {
        DataMatrix::new((0..n * d).map(|_| rng.random::<f64>()).collect(), n, d).unwrap()
    }

    /// Brute-force neighbor sets with the same tie rule.
    fn knn(x: &DataMatrix, i: usize, k: usize) -> Vec<usize> {
        let mut others: Vec<usize> = (0..x.rows()).filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| {
            x.squared_distance(i, a)
                .sqrt()
                .total_cmp(&x.squared_distance(i, b).sqrt())
                .then(a.cmp(&b))
        });
        others.truncate(k);
        others
    }

    fn overlap_oracle(x: &DataMatrix, y: &DataMatrix, k: usize) -> f64 {
        let n = x.rows();
        let total: usize = (0..n)
            .map(|i| {
                let a = knn(x, i, k);
                let b = knn(y, i, k);
                a.iter().filter(|j| b.contains(j)).count()
            })
            .sum();
        total as f64 / (k * n) as f64
    }

    #[test]
    fn isometric_copy_is_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_matrix(&mut rng, 12, 3);
        let c = coranking(&x, &x).unwrap();
        for k in 0..c.size() {
            for l in 0..c.size() {
                assert_eq!(c.get(k, l), if k == l { 12 } else { 0 });
            }
        }
        assert_eq!(auc_rnx(&c).unwrap(), 0.0);
        assert_eq!(q_local_global(&c).unwrap(), (0.0, 0.0));
        assert!(qnx_curve(&c).iter().all(|&q| q == 1.0));
    }

    #[test]
    fn three_collinear_points_hand_table() {
        // Points at 0, 1, 3 embedded at 0, 2, 3: only point 1 changes its nearest neighbor.
        let x = DataMatrix::from_rows(&[vec![0.0], vec![1.0], vec![3.0]]).unwrap();
        let y = DataMatrix::from_rows(&[vec![0.0], vec![2.0], vec![3.0]]).unwrap();
        // High ranks: 0:{1->1, 2->2}; 1:{0->1, 2->2}; 2:{1->1, 0->2}.
        // Low ranks:  0:{1->1, 2->2}; 1:{2->1, 0->2}; 2:{1->1, 0->2}.
        // Ordered pairs (high, low):
        // (0,1):(1,1) (0,2):(2,2) (1,0):(1,2) (1,2):(2,1) (2,1):(1,1) (2,0):(2,2)
        let c = coranking(&x, &y).unwrap();
        assert_eq!(c.get(0, 0), 2);
        assert_eq!(c.get(0, 1), 1);
        assert_eq!(c.get(1, 0), 1);
        assert_eq!(c.get(1, 1), 2);
    }

    #[test]
    fn sums_equal_n_exhaustively() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 2..=30 {
            let x = random_matrix(&mut rng, n, 3);
            let y = random_matrix(&mut rng, n, 2);
            let c = coranking(&x, &y).unwrap();
            assert!(c.row_sums().iter().all(|&s| s == n as u64));
            assert!(c.col_sums().iter().all(|&s| s == n as u64));
        }
    }

    #[test]
    fn qnx_matches_overlap_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let n = rng.random_range(4..20);
            let x = random_matrix(&mut rng, n, 4);
            let y = random_matrix(&mut rng, n, 2);
            let c = coranking(&x, &y).unwrap();
            let curve = qnx_curve(&c);
            for k in 1..=n - 2 {
                let oracle = overlap_oracle(&x, &y, k);
                assert_eq!(q_nx(&c, k).unwrap(), oracle);
                assert_eq!(curve[k - 1], oracle);
            }
        }
    }

    #[test]
    fn qnx_of_random_embedding_near_chance() {
        // Q_NX(K) of an unrelated embedding averages K / (n - 1).
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (n, k, reps) = (60, 5, 40);
        let mut vals = Vec::new();
        for _ in 0..reps {
            let x = random_matrix(&mut rng, n, 3);
            let y = random_matrix(&mut rng, n, 2);
            vals.push(q_nx(&coranking(&x, &y).unwrap(), k).unwrap());
        }
        let mean = vals.iter().sum::<f64>() / reps as f64;
        let p = k as f64 / (n - 1) as f64;
        // Binomial-style sigma of the mean over n*K neighbor slots per instance.
        let sigma = (p * (1.0 - p) / (n * k * reps) as f64).sqrt();
        assert!((mean - p).abs() < 3.0 * sigma + 0.01, "mean {mean} vs {p}");
    }

    #[test]
    fn auc_matches_definition_on_small_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_matrix(&mut rng, 6, 3);
        let y = random_matrix(&mut rng, 6, 2);
        let c = coranking(&x, &y).unwrap();
        let n = 6.0;
        let (mut num, mut den) = (0.0, 0.0);
        for k in 1..=4 {
            let q = overlap_oracle(&x, &y, k);
            let kf = k as f64;
            let r = ((n - 1.0) * q - kf) / (n - 1.0 - kf);
            num += r / kf;
            den += 1.0 / kf;
        }
        let expected = (1.0 - num / den).clamp(0.0, 1.0);
        assert!((auc_rnx(&c).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn local_global_match_literal_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 20;
        let x = random_matrix(&mut rng, n, 5);
        let y = random_matrix(&mut rng, n, 2);
        let c = coranking(&x, &y).unwrap();
        let q: Vec<f64> = (1..=n - 2).map(|k| overlap_oracle(&x, &y, k)).collect();
        let lcmc: Vec<f64> = q
            .iter()
            .enumerate()
            .map(|(i, v)| v - (i + 1) as f64 / (n - 1) as f64)
            .collect();
        let mut k_max = 0;
        for i in 1..lcmc.len() {
            if lcmc[i] > lcmc[k_max] {
                k_max = i;
            }
        }
        let local: f64 = q[..=k_max].iter().sum::<f64>() / (k_max + 1) as f64;
        let global: f64 = q[k_max + 1..].iter().sum::<f64>() / (q.len() - k_max - 1) as f64;
        let (ll, lg) = q_local_global(&c).unwrap();
        assert!((ll - (1.0 - local)).abs() < 1e-12);
        assert!((lg - (1.0 - global)).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&ll) && (0.0..=1.0).contains(&lg));
    }

    #[test]
    fn k_range_checked() {
        let x = DataMatrix::from_rows(&[vec![0.0], vec![1.0], vec![3.0], vec![4.0]]).unwrap();
        let c = coranking(&x, &x).unwrap();
        assert!(q_nx(&c, 0).is_err());
        assert!(q_nx(&c, 3).is_err());
        assert!(q_nx(&c, 2).is_ok());
        let y = DataMatrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(coranking(&x, &y).is_err());
    }
}
