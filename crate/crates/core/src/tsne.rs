//! Exact t-SNE.
//!
//! O(n^2) per iteration with a fixed reduction order, so a given seed always
//! produces the same embedding bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;

const ENTROPY_TOL_BITS: f64 = 1e-5;
const MAX_BISECTIONS: usize = 50;
const P_FLOOR: f64 = 1e-12;
const KL_TRACE_EVERY: usize = 50;
/// The exact KL gradient carries a factor 4 that `learning_rate` excludes.
const GRADIENT_FACTOR: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub early_exaggeration: f64,
    /// Step size for the gradient without its leading factor 4, as in the
    /// usual reference implementations; 200 there is 50 against the exact
    /// gradient.
    pub learning_rate: f64,
    pub n_iter: usize,
    pub exaggeration_iters: usize,
    pub momentum_initial: f64,
    pub momentum_final: f64,
    pub momentum_switch_iter: usize,
    pub output_dim: usize,
    pub init_std: f64,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            early_exaggeration: 12.0,
            learning_rate: 200.0,
            n_iter: 1000,
            exaggeration_iters: 250,
            momentum_initial: 0.5,
            momentum_final: 0.8,
            momentum_switch_iter: 250,
            output_dim: 2,
            init_std: 1e-4,
            seed: 0,
        }
    }
}

impl TsneConfig {
    pub fn with_perplexity(mut self, perplexity: f64) -> Self {
        self.perplexity = perplexity;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if n < 5 {
            return Err(Error::domain(format!("t-SNE needs at least 5 samples, got {n}")));
        }
        if !(self.perplexity >= 1.0 && self.perplexity < n as f64) {
            return Err(Error::domain(format!(
                "perplexity {} must lie in [1, {n})",
                self.perplexity
            )));
        }
        if !(self.early_exaggeration >= 1.0) {
            return Err(Error::domain("early exaggeration must be >= 1"));
        }
        if self.n_iter < self.exaggeration_iters {
            return Err(Error::domain("n_iter must be at least exaggeration_iters"));
        }
        if self.output_dim < 1 || !(self.learning_rate > 0.0) {
            return Err(Error::domain("output_dim >= 1 and learning_rate > 0 required"));
        }
        Ok(())
    }
}

/// Result of the per-point bandwidth search.
#[derive(Debug, Clone)]
pub struct Calibration {
    pub betas: Vec<f64>,
    pub sigmas: Vec<f64>,
    /// Row-major conditional probabilities `p_{j|i}`.
    pub conditional: Vec<f64>,
    /// Achieved entropies in bits.
    pub entropies: Vec<f64>,
    /// Rows whose search hit the step limit before reaching tolerance.
    pub unconverged: Vec<usize>,
}

pub fn squared_distances(x: &DataMatrix) -> Vec<f64> {
    let n = x.rows();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = x.squared_distance(i, j);
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Fills `out` with `p_{j|i}` at precision `beta` and returns the entropy in nats.
fn row_distribution(row: &[f64], i: usize, shift: f64, beta: f64, out: &mut [f64]) -> f64 {
    let mut z = 0.0;
    let mut weighted = 0.0;
    for (j, (&d, o)) in row.iter().zip(out.iter_mut()).enumerate() {
        if j == i {
            *o = 0.0;
            continue;
        }
        let e = (-beta * (d - shift)).exp();
        *o = e;
        z += e;
        weighted += e * (d - shift);
    }
    for o in out.iter_mut() {
        *o /= z;
    }
    z.ln() + beta * weighted / z
}

/// Bisection on `beta_i = 1 / (2 sigma_i^2)` until `2^H = perplexity`.
pub fn calibrate_sigmas(sq_dist: &[f64], n: usize, perplexity: f64) -> Result<Calibration> {
    if sq_dist.len() != n * n || n < 2 {
        return Err(Error::domain("distance matrix must be n x n with n >= 2"));
    }
    if !(perplexity >= 1.0 && perplexity < n as f64) {
        return Err(Error::domain(format!("perplexity {perplexity} must lie in [1, {n})")));
    }
    let target = perplexity.ln();
    let mut cal = Calibration {
        betas: vec![0.0; n],
        sigmas: vec![0.0; n],
        conditional: vec![0.0; n * n],
        entropies: vec![0.0; n],
        unconverged: Vec::new(),
    };
    for i in 0..n {
        let row = &sq_dist[i * n..(i + 1) * n];
        let others = row.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &d)| d);
        let shift = others.clone().fold(f64::INFINITY, f64::min);
        let spread = others.map(|d| d - shift).sum::<f64>() / (n - 1) as f64;
        let mut beta = if spread > 0.0 { 1.0 / spread } else { 1.0 };
        let (mut lo, mut hi) = (0.0, f64::INFINITY);
        let out = &mut cal.conditional[i * n..(i + 1) * n];
        let mut converged = false;
        let mut entropy = 0.0;
        for _ in 0..MAX_BISECTIONS {
            entropy = row_distribution(row, i, shift, beta, out);
            let gap = entropy - target;
            if gap.abs() / std::f64::consts::LN_2 <= ENTROPY_TOL_BITS {
                converged = true;
                break;
            }
            if gap > 0.0 {
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
        }
        if !converged {
            // Keep the distribution that matches the last evaluated beta.
            entropy = row_distribution(row, i, shift, beta, out);
            if (entropy - target).abs() / std::f64::consts::LN_2 > ENTROPY_TOL_BITS {
                cal.unconverged.push(i);
            }
        }
        cal.betas[i] = beta;
        cal.sigmas[i] = (1.0 / (2.0 * beta)).sqrt();
        cal.entropies[i] = entropy / std::f64::consts::LN_2;
    }
    Ok(cal)
}

/// Symmetrized affinities `P = (P_cond + P_cond^T) / 2n`, zero on the diagonal.
#[derive(Debug, Clone)]
pub struct JointProbabilities {
    pub n: usize,
    pub values: Vec<f64>,
    pub unconverged: Vec<usize>,
}

impl JointProbabilities {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

pub fn joint_probabilities(x: &DataMatrix, perplexity: f64) -> Result<JointProbabilities> {
    let n = x.rows();
    let cal = calibrate_sigmas(&squared_distances(x), n, perplexity)?;
    let c = &cal.conditional;
    let mut values = vec![0.0; n * n];
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let v = ((c[i * n + j] + c[j * n + i]) / (2.0 * n as f64)).max(P_FLOOR);
                values[i * n + j] = v;
                total += v;
            }
        }
    }
    for v in &mut values {
        *v /= total;
    }
    Ok(JointProbabilities {
        n,
        values,
        unconverged: cal.unconverged,
    })
}

/// KL divergence of the Student-t affinities from `exaggeration * P` and its
/// gradient with respect to the row-major `n x dim` embedding `y`.
pub fn kl_and_gradient(p: &JointProbabilities, y: &[f64], dim: usize, exaggeration: f64) -> (f64, Vec<f64>) {
    let n = p.n;
    let mut num = vec![0.0; n * n];
    let mut z = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let mut d2 = 0.0;
            for k in 0..dim {
                let diff = y[i * dim + k] - y[j * dim + k];
                d2 += diff * diff;
            }
            let w = 1.0 / (1.0 + d2);
            num[i * n + j] = w;
            num[j * n + i] = w;
            z += 2.0 * w;
        }
    }
    let mut grad = vec![0.0; n * dim];
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let w = num[i * n + j];
            let q = (w / z).max(P_FLOOR);
            let pij = exaggeration * p.values[i * n + j];
            if pij > 0.0 {
                kl += pij * (pij / q).ln();
            }
            let m = 4.0 * (pij - w / z) * w;
            for k in 0..dim {
                grad[i * dim + k] += m * (y[i * dim + k] - y[j * dim + k]);
            }
        }
    }
    (kl, grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub coords: DataMatrix,
    pub final_kl: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<TsneConfig>,
    /// KL divergence sampled every 50 iterations.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub kl_trace: Vec<f64>,
}

fn recenter(y: &mut [f64], n: usize, dim: usize) {
    for k in 0..dim {
        let mean = (0..n).map(|i| y[i * dim + k]).sum::<f64>() / n as f64;
        for i in 0..n {
            y[i * dim + k] -= mean;
        }
    }
}

pub fn run_tsne(x: &DataMatrix, config: &TsneConfig) -> Result<Embedding> {
    let n = x.rows();
    config.validate(n)?;
    let dim = config.output_dim;
    let p = joint_probabilities(x, config.perplexity.min(n as f64 - 1.0))?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, config.init_std).map_err(|e| Error::domain(e.to_string()))?;
    let mut y: Vec<f64> = (0..n * dim).map(|_| normal.sample(&mut rng)).collect();
    let mut update = vec![0.0; n * dim];
    let mut gains = vec![1.0; n * dim];
    let mut kl_trace = Vec::new();

    for iter in 0..config.n_iter {
        let exaggeration = if iter < config.exaggeration_iters {
            config.early_exaggeration
        } else {
            1.0
        };
        let momentum = if iter < config.momentum_switch_iter {
            config.momentum_initial
        } else {
            config.momentum_final
        };
        let (kl, grad) = kl_and_gradient(&p, &y, dim, exaggeration);
        if iter % KL_TRACE_EVERY == 0 {
            kl_trace.push(kl);
        }
        for idx in 0..n * dim {
            let g = grad[idx];
            let gain: f64 = if (g > 0.0) != (update[idx] > 0.0) {
                gains[idx] + 0.2
            } else {
                gains[idx] * 0.8
            };
            gains[idx] = gain.max(0.01);
            update[idx] = momentum * update[idx] - config.learning_rate / GRADIENT_FACTOR * gains[idx] * g;
            y[idx] += update[idx];
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence(iter));
        }
        recenter(&mut y, n, dim);
    }
    recenter(&mut y, n, dim);
    let (final_kl, _) = kl_and_gradient(&p, &y, dim, 1.0);
    let mut coords = DataMatrix::new(y, n, dim)?;
    if let Some(labels) = x.labels() {
        coords = coords.with_labels(labels.to_vec())?;
    }
    Ok(Embedding {
        coords,
        final_kl,
        config: Some(config.clone()),
        kl_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_two_cluster;
    use rand::Rng;

    fn random_data(seed: u64, n: usize, d: usize) -> DataMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DataMatrix::new((0..n * d).map(|_| rng.random::<f64>() * 4.0).collect(), n, d).unwrap()
    }

    fn random_p(seed: u64, n: usize) -> JointProbabilities {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = rng.random::<f64>();
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        let s: f64 = values.iter().sum();
        values.iter_mut().for_each(|v| *v /= s);
        JointProbabilities {
            n,
            values,
            unconverged: vec![],
        }
    }

    #[test]
    fn equidistant_points_converge_immediately() {
        let d = vec![0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0];
        let cal = calibrate_sigmas(&d, 3, 2.0).unwrap();
        assert!(cal.unconverged.is_empty());
        for i in 0..3 {
            assert!((cal.entropies[i] - 1.0).abs() < 1e-12);
            for j in 0..3 {
                let expected = if i == j { 0.0 } else { 0.5 };
                assert!((cal.conditional[i * 3 + j] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn achieved_perplexity_matches_target() {
        let x = random_data(1, 50, 5);
        let cal = calibrate_sigmas(&squared_distances(&x), 50, 12.0).unwrap();
        assert!(cal.unconverged.is_empty());
        for i in 0..50 {
            let row = &cal.conditional[i * 50..(i + 1) * 50];
            let h: f64 = row.iter().filter(|&&p| p > 0.0).map(|p| -p * p.log2()).sum();
            assert!((2f64.powf(h) - 12.0).abs() < 1e-3);
            assert!((h - 12f64.log2()).abs() < 1e-4);
        }
    }

    #[test]
    fn doubling_distances_keeps_probabilities() {
        let x = random_data(2, 30, 3);
        let d = squared_distances(&x);
        let d2: Vec<f64> = d.iter().map(|v| v * 2.0).collect();
        let a = calibrate_sigmas(&d, 30, 7.0).unwrap();
        let b = calibrate_sigmas(&d2, 30, 7.0).unwrap();
        for (p, q) in a.conditional.iter().zip(&b.conditional) {
            assert!((p - q).abs() < 1e-12);
        }
        for (ba, bb) in a.betas.iter().zip(&b.betas) {
            assert!((ba / bb - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn joint_is_symmetric_and_normalized() {
        let x = random_data(3, 25, 4);
        let p = joint_probabilities(&x, 5.0).unwrap();
        let total: f64 = p.values.iter().sum();
        assert!((total - 1.0).abs() < 1e-10);
        for i in 0..25 {
            assert_eq!(p.get(i, i), 0.0);
            for j in 0..25 {
                assert_eq!(p.get(i, j), p.get(j, i));
            }
        }
    }

    #[test]
    fn joint_matches_literal_formula_on_four_points() {
        let x = DataMatrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 3.0]]).unwrap();
        let perp = 2.0;
        let p = joint_probabilities(&x, perp).unwrap();
        let cal = calibrate_sigmas(&squared_distances(&x), 4, perp).unwrap();
        // Rebuild p_{j|i} from the returned betas with the textbook expression.
        let cond = |i: usize, j: usize| {
            let z: f64 = (0..4)
                .filter(|&k| k != i)
                .map(|k| (-cal.betas[i] * x.squared_distance(i, k)).exp())
                .sum();
            (-cal.betas[i] * x.squared_distance(i, j)).exp() / z
        };
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    let expected = (cond(i, j) + cond(j, i)) / 8.0;
                    assert!((p.get(i, j) - expected).abs() < 1e-10, "{i},{j}");
                }
            }
        }
    }

    #[test]
    fn permuting_rows_permutes_p() {
        let x = random_data(4, 12, 3);
        let perm: Vec<usize> = vec![3, 0, 7, 1, 11, 2, 9, 4, 10, 5, 8, 6];
        let xp = x.select_rows(&perm).unwrap();
        let p = joint_probabilities(&x, 4.0).unwrap();
        let pp = joint_probabilities(&xp, 4.0).unwrap();
        for a in 0..12 {
            for b in 0..12 {
                assert!((pp.get(a, b) - p.get(perm[a], perm[b])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (n, dim) = (20, 2);
        let p = random_p(5, n);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let y: Vec<f64> = (0..n * dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (_, grad) = kl_and_gradient(&p, &y, dim, 1.0);
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for idx in 0..n * dim {
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[idx] += h;
            ym[idx] -= h;
            let fd = (kl_and_gradient(&p, &yp, dim, 1.0).0 - kl_and_gradient(&p, &ym, dim, 1.0).0) / (2.0 * h);
            let rel = (fd - grad[idx]).abs() / fd.abs().max(grad[idx].abs()).max(1e-8);
            worst = worst.max(rel);
        }
        assert!(worst < 1e-4, "max relative error {worst}");
    }

    #[test]
    fn gradient_sums_to_zero() {
        let p = random_p(7, 15);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let y: Vec<f64> = (0..30).map(|_| rng.random::<f64>()).collect();
        let (kl, grad) = kl_and_gradient(&p, &y, 2, 4.0);
        assert!(kl.is_finite());
        for k in 0..2 {
            let s: f64 = (0..15).map(|i| grad[i * 2 + k]).sum();
            assert!(s.abs() < 1e-8);
        }
        let (kl1, _) = kl_and_gradient(&p, &y, 2, 1.0);
        assert!(kl1 >= 0.0);
    }

    #[test]
    fn run_is_reproducible_and_centered() {
        let x = generate_two_cluster(10, 50, 10, 8.0, 1).unwrap();
        let cfg = TsneConfig::default().with_perplexity(9.0).with_seed(3);
        let a = run_tsne(&x, &cfg).unwrap();
        let b = run_tsne(&x, &cfg).unwrap();
        assert_eq!(a.coords, b.coords);
        for k in 0..2 {
            let mean: f64 = a.coords.iter_rows().map(|r| r[k]).sum::<f64>() / 60.0;
            assert!(mean.abs() < 1e-10);
        }
        assert!(a.final_kl >= 0.0);
        let c = run_tsne(&x, &cfg.clone().with_seed(4)).unwrap();
        assert_ne!(a.coords, c.coords);
    }

    #[test]
    fn kl_trends_down_after_exaggeration() {
        let x = random_data(9, 60, 5);
        let e = run_tsne(&x, &TsneConfig::default().with_perplexity(10.0)).unwrap();
        // Trace entries after the exaggeration phase (iterations 300..).
        let tail = &e.kl_trace[6..];
        let first = tail[..3].iter().sum::<f64>() / 3.0;
        let last = tail[tail.len() - 3..].iter().sum::<f64>() / 3.0;
        assert!(last <= first, "{first} -> {last}");
    }

    #[test]
    fn rejects_invalid_configs() {
        let x = random_data(10, 10, 2);
        assert!(run_tsne(&x, &TsneConfig::default().with_perplexity(10.0)).is_err());
        assert!(run_tsne(&x, &TsneConfig::default().with_perplexity(0.5)).is_err());
        let small = random_data(10, 4, 2);
        assert!(run_tsne(&small, &TsneConfig::default().with_perplexity(2.0)).is_err());
        let mut cfg = TsneConfig::default().with_perplexity(3.0);
        cfg.n_iter = 10;
        assert!(run_tsne(&x, &cfg).is_err());
    }
}
