//! Held-out misclassification rate of a multinomial logistic regression.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;

const L2: f64 = 1e-4;
const MAX_ITER: usize = 500;
const STEP: f64 = 0.5;

/// Per-class shuffled split; every class keeps at least one point on each side.
pub fn stratified_split(labels: &[usize], train_frac: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::domain(format!("train fraction {train_frac} outside (0, 1)")));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    if by_class.len() < 2 {
        return Err(Error::domain("classification needs at least two classes"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (class, mut idx) in by_class {
        if idx.len() < 2 {
            return Err(Error::domain(format!(
                "class {class} has {} sample(s); cannot place one in both train and test",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        let n_test = (((1.0 - train_frac) * idx.len() as f64).round() as usize).clamp(1, idx.len() - 1);
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

struct Logistic {
    classes: Vec<usize>,
    mean: Vec<f64>,
    scale: Vec<f64>,
    // classes x (d + 1), bias last
    weights: Vec<Vec<f64>>,
}

impl Logistic {
    fn features(&self, row: &[f64]) -> Vec<f64> {
        let mut f: Vec<f64> = row
            .iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect();
        f.push(1.0);
        f
    }

    fn probabilities(&self, f: &[f64]) -> Vec<f64> {
        let logits: Vec<f64> = self
            .weights
            .iter()
            .map(|w| w.iter().zip(f).map(|(a, b)| a * b).sum())
            .collect();
        let mx = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - mx).exp()).collect();
        let z: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / z).collect()
    }

    fn fit(x: &DataMatrix, labels: &[usize], rows: &[usize]) -> Self {
        let d = x.cols();
        let m = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for &i in rows {
            for (mu, v) in mean.iter_mut().zip(x.row(i)) {
                *mu += v / m;
            }
        }
        let mut scale = vec![0.0; d];
        for &i in rows {
            for ((s, v), mu) in scale.iter_mut().zip(x.row(i)).zip(&mean) {
                *s += (v - mu).powi(2) / m;
            }
        }
        for s in &mut scale {
            *s = if *s > 1e-24 { s.sqrt() } else { 1.0 };
        }
        let mut classes: Vec<usize> = rows.iter().map(|&i| labels[i]).collect();
        classes.sort_unstable();
        classes.dedup();
        let mut model = Logistic {
            weights: vec![vec![0.0; d + 1]; classes.len()],
            classes,
            mean,
            scale,
        };
        let feats: Vec<Vec<f64>> = rows.iter().map(|&i| model.features(x.row(i))).collect();
        let targets: Vec<usize> = rows
            .iter()
            .map(|&i| model.classes.binary_search(&labels[i]).expect("class present"))
            .collect();
        for _ in 0..MAX_ITER {
            let mut grad = vec![vec![0.0; d + 1]; model.classes.len()];
            for (f, &t) in feats.iter().zip(&targets) {
                let p = model.probabilities(f);
                for (c, g) in grad.iter_mut().enumerate() {
                    let r = p[c] - if c == t { 1.0 } else { 0.0 };
                    for (gj, fj) in g.iter_mut().zip(f) {
                        *gj += r * fj / m;
                    }
                }
            }
            let mut largest: f64 = 0.0;
            for (g, w) in grad.iter_mut().zip(&model.weights) {
                for (gj, wj) in g.iter_mut().zip(w) {
                    *gj += L2 * wj;
                    largest = largest.max(gj.abs());
                }
            }
            for (w, g) in model.weights.iter_mut().zip(&grad) {
                for (wj, gj) in w.iter_mut().zip(g) {
                    *wj -= STEP * gj;
                }
            }
            if largest < 1e-8 {
                break;
            }
        }
        model
    }

    fn predict(&self, row: &[f64]) -> usize {
        let p = self.probabilities(&self.features(row));
        let best = (0..p.len()).fold(0, |b, c| if p[c] > p[b] { c } else { b });
        self.classes[best]
    }
}

/// Test-set error rate after a stratified `train_frac` split.
pub fn misclass_loss(x_star: &DataMatrix, labels: &[usize], train_frac: f64, seed: u64) -> Result<f64> {
    if labels.len() != x_star.rows() {
        return Err(Error::domain("label count does not match the embedding"));
    }
    let (train, test) = stratified_split(labels, train_frac, seed)?;
    let model = Logistic::fit(x_star, labels, &train);
    let wrong = test
        .iter()
        .filter(|&&i| model.predict(x_star.row(i)) != labels[i])
        .count();
    Ok(wrong as f64 / test.len() as f64)
}
