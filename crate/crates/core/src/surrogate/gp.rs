//! Gaussian-process regression with an ARD Matérn-5/2 kernel.
//!
//! Targets are standardized before fitting; reported variances are in the
//! original target units. Kernel hyperparameters maximize the log marginal
//! likelihood with a projected BFGS ascent from several random starts.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT5: f64 = 2.236_067_977_499_79;
const LENGTH_BOUNDS: (f64, f64) = (1e-2, 10.0);
const NOISE_VAR_BOUNDS: (f64, f64) = (1e-8, 1.0);
const SIGNAL_VAR_BOUNDS: (f64, f64) = (1e-2, 1e2);
const RESTARTS: usize = 5;
const JITTERS: [f64; 8] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

/// Kernel hyperparameters on the standardized target scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpParams {
    pub signal_variance: f64,
    pub length_scales: Vec<f64>,
    pub noise_variance: f64,
}

impl GpParams {
    fn to_log(&self) -> Vec<f64> {
        let mut v = vec![0.5 * self.signal_variance.ln()];
        v.extend(self.length_scales.iter().map(|l| l.ln()));
        v.push(0.5 * self.noise_variance.ln());
        v
    }

    fn from_log(theta: &[f64]) -> Self {
        let d = theta.len() - 2;
        GpParams {
            signal_variance: (2.0 * theta[0]).exp(),
            length_scales: theta[1..=d].iter().map(|t| t.exp()).collect(),
            noise_variance: (2.0 * theta[d + 1]).exp(),
        }
    }
}

fn log_bounds(dim: usize) -> Vec<(f64, f64)> {
    let mut b = vec![(0.5 * SIGNAL_VAR_BOUNDS.0.ln(), 0.5 * SIGNAL_VAR_BOUNDS.1.ln())];
    b.extend(std::iter::repeat_n((LENGTH_BOUNDS.0.ln(), LENGTH_BOUNDS.1.ln()), dim));
    b.push((0.5 * NOISE_VAR_BOUNDS.0.ln(), 0.5 * NOISE_VAR_BOUNDS.1.ln()));
    b
}

fn scaled_sq(a: &[f64], b: &[f64], ls: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(ls)
        .map(|((x, y), l)| ((x - y) / l).powi(2))
        .sum()
}

fn matern(signal: f64, r: f64) -> f64 {
    signal * (1.0 + SQRT5 * r + 5.0 * r * r / 3.0) * (-SQRT5 * r).exp()
}

fn kernel_matrix(x: &[Vec<f64>], p: &GpParams) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| {
        let r = scaled_sq(&x[i], &x[j], &p.length_scales).sqrt();
        matern(p.signal_variance, r) + if i == j { p.noise_variance } else { 0.0 }
    })
}

fn factor(mut k: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let n = k.nrows();
    let mut added = 0.0;
    for jitter in JITTERS {
        for i in 0..n {
            k[(i, i)] += jitter - added;
        }
        added = jitter;
        if let Some(c) = Cholesky::new(k.clone()) {
            return Some(c);
        }
    }
    None
}

/// Log marginal likelihood and its gradient in log-parameter space.
fn lml_and_grad(x: &[Vec<f64>], y: &DVector<f64>, theta: &[f64]) -> Option<(f64, Vec<f64>)> {
    let p = GpParams::from_log(theta);
    let n = x.len();
    let d = p.length_scales.len();
    let chol = factor(kernel_matrix(x, &p))?;
    let alpha = chol.solve(y);
    let log_det: f64 = chol.l_dirty().diagonal().iter().take(n).map(|v| v.ln()).sum::<f64>() * 2.0;
    let lml = -0.5 * y.dot(&alpha) - 0.5 * log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    let w = &alpha * alpha.transpose() - chol.inverse();

    let mut grad = vec![0.0; d + 2];
    for i in 0..n {
        for j in 0..n {
            let wij = w[(i, j)];
            let r = scaled_sq(&x[i], &x[j], &p.length_scales).sqrt();
            let k = matern(p.signal_variance, r);
            grad[0] += wij * 2.0 * k;
            let common = p.signal_variance * (5.0 / 3.0) * (1.0 + SQRT5 * r) * (-SQRT5 * r).exp();
            for m in 0..d {
                let diff = (x[i][m] - x[j][m]) / p.length_scales[m];
                grad[1 + m] += wij * common * diff * diff;
            }
            if i == j {
                grad[d + 1] += wij * 2.0 * p.noise_variance;
            }
        }
    }
    grad.iter_mut().for_each(|g| *g *= 0.5);
    Some((lml, grad))
}

fn project(theta: &mut [f64], bounds: &[(f64, f64)]) {
    for (t, (lo, hi)) in theta.iter_mut().zip(bounds) {
        *t = t.clamp(*lo, *hi);
    }
}

/// Projected BFGS on `-lml` inside the log-parameter box.
fn ascend(x: &[Vec<f64>], y: &DVector<f64>, start: Vec<f64>, bounds: &[(f64, f64)]) -> Option<(f64, Vec<f64>)> {
    let m = start.len();
    let mut theta = start;
    project(&mut theta, bounds);
    let (mut f, mut g) = lml_and_grad(x, y, &theta).map(|(l, g)| (-l, g.iter().map(|v| -v).collect::<Vec<_>>()))?;
    let identity = |m: usize| DMatrix::<f64>::identity(m, m);
    let mut h = identity(m);
    for _ in 0..200 {
        let gv = DVector::from_vec(g.clone());
        let mut dir: Vec<f64> = (-(&h * &gv)).iter().copied().collect();
        for (k, dk) in dir.iter_mut().enumerate() {
            let (lo, hi) = bounds[k];
            if (theta[k] <= lo && *dk < 0.0) || (theta[k] >= hi && *dk > 0.0) {
                *dk = 0.0;
            }
        }
        if dir.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-10 {
            break;
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut cand: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + step * d).collect();
            project(&mut cand, bounds);
            let decrease: f64 = g.iter().zip(cand.iter().zip(&theta)).map(|(gi, (c, t))| gi * (c - t)).sum();
            if let Some((l, gn)) = lml_and_grad(x, y, &cand) {
                let fc = -l;
                if fc <= f + 1e-4 * decrease.min(0.0) && fc.is_finite() {
                    accepted = Some((cand, fc, gn.iter().map(|v| -v).collect::<Vec<_>>()));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((cand, fc, gc)) = accepted else {
            if h != identity(m) {
                h = identity(m);
                continue;
            }
            break;
        };
        let s = DVector::from_iterator(m, cand.iter().zip(&theta).map(|(a, b)| a - b));
        let yv = DVector::from_iterator(m, gc.iter().zip(&g).map(|(a, b)| a - b));
        let sy = s.dot(&yv);
        if sy > 1e-12 {
            let rho = 1.0 / sy;
            let i = identity(m);
            let left = &i - rho * &s * yv.transpose();
            let right = &i - rho * &yv * s.transpose();
            h = &left * &h * &right + rho * &s * s.transpose();
        }
        let done = (f - fc).abs() < 1e-10 * (1.0 + f.abs());
        theta = cand;
        f = fc;
        g = gc;
        if done {
            break;
        }
    }
    Some((-f, theta))
}

#[derive(Debug, Clone)]
pub struct GpModel {
    pub params: GpParams,
    pub log_marginal_likelihood: f64,
    /// Best-so-far LML after each restart.
    pub restart_trace: Vec<f64>,
    inputs: Vec<Vec<f64>>,
    y_mean: f64,
    y_scale: f64,
    alpha: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl GpModel {
    pub fn fit(points: &[Vec<f64>], targets: &[f64], seed: u64) -> Result<Self> {
        let n = points.len();
        if n < 2 || targets.len() != n {
            return Err(Error::Fit(format!(
                "need at least 2 points with one target each, got {n} points and {} targets",
                targets.len()
            )));
        }
        let dim = points[0].len();
        if dim == 0 || points.iter().any(|p| p.len() != dim) {
            return Err(Error::Fit("inconsistent point dimensions".into()));
        }
        let y_mean = targets.iter().sum::<f64>() / n as f64;
        let var = targets.iter().map(|t| (t - y_mean).powi(2)).sum::<f64>() / n as f64;
        let y_scale = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        let y = DVector::from_iterator(n, targets.iter().map(|t| (t - y_mean) / y_scale));

        let bounds = log_bounds(dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut restart_trace = Vec::with_capacity(RESTARTS);
        for _ in 0..RESTARTS {
            let start: Vec<f64> = bounds.iter().map(|(lo, hi)| rng.random_range(*lo..=*hi)).collect();
            if let Some((lml, theta)) = ascend(points, &y, start, &bounds) {
                if best.as_ref().is_none_or(|b| lml > b.0) {
                    best = Some((lml, theta));
                }
            }
            restart_trace.push(best.as_ref().map_or(f64::NEG_INFINITY, |b| b.0));
        }
        let (lml, theta) = best.ok_or_else(|| Error::Fit("Cholesky failed for every restart".into()))?;
        let params = GpParams::from_log(&theta);
        Self::with_params(points, targets, params, y_mean, y_scale, lml, restart_trace)
    }

    /// Conditions a GP with fixed hyperparameters on the data.
    pub fn fixed(points: &[Vec<f64>], targets: &[f64], params: GpParams) -> Result<Self> {
        let n = points.len() as f64;
        let y_mean = targets.iter().sum::<f64>() / n;
        let sd = (targets.iter().map(|t| (t - y_mean).powi(2)).sum::<f64>() / n).sqrt();
        let y_scale = if sd > 1e-12 { sd } else { 1.0 };
        let y = DVector::from_iterator(targets.len(), targets.iter().map(|t| (t - y_mean) / y_scale));
        let lml = lml_and_grad(points, &y, &params.to_log()).map_or(f64::NEG_INFINITY, |r| r.0);
        Self::with_params(points, targets, params, y_mean, y_scale, lml, vec![lml])
    }

    fn with_params(
        points: &[Vec<f64>],
        targets: &[f64],
        params: GpParams,
        y_mean: f64,
        y_scale: f64,
        lml: f64,
        restart_trace: Vec<f64>,
    ) -> Result<Self> {
        let chol = factor(kernel_matrix(points, &params))
            .ok_or_else(|| Error::Fit("Cholesky failed after jitter escalation to 1e-4".into()))?;
        let y = DVector::from_iterator(targets.len(), targets.iter().map(|t| (t - y_mean) / y_scale));
        let alpha = chol.solve(&y);
        Ok(GpModel {
            params,
            log_marginal_likelihood: lml,
            restart_trace,
            inputs: points.to_vec(),
            y_mean,
            y_scale,
            alpha,
            chol,
        })
    }

    /// Posterior mean and standard deviation of the latent function.
    pub fn predict(&self, point: &[f64]) -> (f64, f64) {
        let p = &self.params;
        let k = DVector::from_iterator(
            self.inputs.len(),
            self.inputs
                .iter()
                .map(|xi| matern(p.signal_variance, scaled_sq(xi, point, &p.length_scales).sqrt())),
        );
        let mean = self.y_mean + self.y_scale * k.dot(&self.alpha);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&k)
            .unwrap_or_else(|| DVector::zeros(k.len()));
        let var = (p.signal_variance - v.dot(&v)).max(0.0);
        (mean, self.y_scale * var.sqrt())
    }

    /// Prior standard deviation in target units.
    pub fn signal_std(&self) -> f64 {
        self.y_scale * self.params.signal_variance.sqrt()
    }

    pub fn target_scale(&self) -> (f64, f64) {
        (self.y_mean, self.y_scale)
    }
}
