//! k-means clustering and normalized mutual information.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;

const RESTARTS: usize = 10;
const MAX_ITER: usize = 300;

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub assignment: Vec<usize>,
    pub inertia: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus_init(x: &DataMatrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = x.rows();
    let mut centers = vec![x.row(rng.random_range(0..n)).to_vec()];
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, w) in nearest.iter().enumerate() {
                if u < *w {
                    idx = i;
                    break;
                }
                u -= w;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        let c = x.row(pick).to_vec();
        for (i, w) in nearest.iter_mut().enumerate() {
            *w = w.min(sq_dist(x.row(i), &c));
        }
        centers.push(c);
    }
    centers
}

fn lloyd(x: &DataMatrix, mut centers: Vec<Vec<f64>>) -> KMeansFit {
    let (n, d, k) = (x.rows(), x.cols(), centers.len());
    let mut assignment = vec![usize::MAX; n];
    for _ in 0..MAX_ITER {
        let mut changed = false;
        for (i, slot) in assignment.iter_mut().enumerate() {
            let row = x.row(i);
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let dist = sq_dist(row, center);
                if dist < best_d {
                    best_d = dist;
                    best = c;
                }
            }
            if *slot != best {
                *slot = best;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (i, &a) in assignment.iter().enumerate() {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Re-seed an empty cluster at the point farthest from its center.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(x.row(a), &centers[assignment[a]])
                            .total_cmp(&sq_dist(x.row(b), &centers[assignment[b]]))
                    })
                    .unwrap_or(0);
                centers[c] = x.row(far).to_vec();
                assignment[far] = c;
                changed = true;
            } else {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        if !changed {
            break;
        }
    }
    let inertia = (0..n).map(|i| sq_dist(x.row(i), &centers[assignment[i]])).sum();
    KMeansFit { assignment, inertia }
}

/// k-means++ seeded Lloyd iterations, best inertia over 10 restarts.
pub fn kmeans(x: &DataMatrix, k: usize, seed: u64) -> Result<KMeansFit> {
    if k < 1 || k > x.rows() {
        return Err(Error::domain(format!("k = {k} invalid for {} samples", x.rows())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansFit> = None;
    for _ in 0..RESTARTS {
        let fit = lloyd(x, plus_plus_init(x, k, &mut rng));
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// `I(a; b) / sqrt(H(a) H(b))`; zero when either partition is trivial.
pub fn normalized_mutual_information(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let mut joint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut ca: BTreeMap<usize, usize> = BTreeMap::new();
    let mut cb: BTreeMap<usize, usize> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
        *ca.entry(x).or_default() += 1;
        *cb.entry(y).or_default() += 1;
    }
    let ha = entropy(ca.values().copied(), n);
    let hb = entropy(cb.values().copied(), n);
    if ha <= 0.0 || hb <= 0.0 {
        return 0.0;
    }
    let mi: f64 = joint
        .iter()
        .map(|(&(x, y), &c)| {
            let pxy = c as f64 / n;
            let px = ca[&x] as f64 / n;
            let py = cb[&y] as f64 / n;
            pxy * (pxy / (px * py)).ln()
        })
        .sum();
    (mi / (ha * hb).sqrt()).clamp(0.0, 1.0)
}

pub fn distinct_labels(labels: &[usize]) -> usize {
    let mut l = labels.to_vec();
    l.sort_unstable();
    l.dedup();
    l.len()
}

/// `1 - NMI` between k-means clusters of the embedding and the class labels.
pub fn nmi_loss(x_star: &DataMatrix, labels: &[usize], k: Option<usize>, seed: u64) -> Result<f64> {
    if labels.len() != x_star.rows() {
        return Err(Error::domain("label count does not match the embedding"));
    }
    let classes = distinct_labels(labels);
    if classes < 2 {
        return Err(Error::domain("NMI needs at least two distinct labels"));
    }
    let k = k.unwrap_or(classes);
    if k < 2 || k > x_star.rows() {
        return Err(Error::domain(format!("k = {k} invalid for {} samples", x_star.rows())));
    }
    let fit = kmeans(x_star, k, seed)?;
    Ok(1.0 - normalized_mutual_information(&fit.assignment, labels))
}
