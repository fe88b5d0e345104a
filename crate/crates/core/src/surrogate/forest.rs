//! Random-forest regression with across-tree spread as uncertainty.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const DEFAULT_TREES: usize = 100;
const MIN_LEAF: usize = 2;

#[derive(Debug, Clone)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                Node::Leaf(v) => return *v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] <= *threshold { left } else { right },
            }
        }
    }
}

fn mean(idx: &[usize], y: &[f64]) -> f64 {
    if idx.iter().all(|&i| y[i] == y[idx[0]]) {
        return y[idx[0]];
    }
    idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64
}

fn grow(x: &[Vec<f64>], y: &[f64], idx: Vec<usize>, mtry: usize, rng: &mut ChaCha8Rng) -> Node {
    if idx.len() < 2 * MIN_LEAF {
        return Node::Leaf(mean(&idx, y));
    }
    let dim = x[0].len();
    let mut features: Vec<usize> = (0..dim).collect();
    features.shuffle(rng);
    features.truncate(mtry);
    features.sort_unstable();

    let mut best: Option<(f64, usize, f64)> = None;
    for &f in &features {
        let mut order = idx.clone();
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]));
        let total: f64 = order.iter().map(|&i| y[i]).sum();
        let total_sq: f64 = order.iter().map(|&i| y[i] * y[i]).sum();
        let (mut s, mut sq) = (0.0, 0.0);
        for k in 0..order.len() - 1 {
            s += y[order[k]];
            sq += y[order[k]] * y[order[k]];
            let nl = (k + 1) as f64;
            let nr = (order.len() - k - 1) as f64;
            if k + 1 < MIN_LEAF || order.len() - k - 1 < MIN_LEAF {
                continue;
            }
            let (a, b) = (x[order[k]][f], x[order[k + 1]][f]);
            if a == b {
                continue;
            }
            let sse = (sq - s * s / nl) + ((total_sq - sq) - (total - s).powi(2) / nr);
            if best.is_none_or(|(bs, _, _)| sse < bs - 1e-15) {
                best = Some((sse, f, 0.5 * (a + b)));
            }
        }
    }
    let Some((_, feature, threshold)) = best else {
        return Node::Leaf(mean(&idx, y));
    };
    let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| x[i][feature] <= threshold);
    Node::Split {
        feature,
        threshold,
        left: Box::new(grow(x, y, l, mtry, rng)),
        right: Box::new(grow(x, y, r, mtry, rng)),
    }
}

#[derive(Debug, Clone)]
pub struct ForestModel {
    trees: Vec<Node>,
}

impl ForestModel {
    pub fn fit(points: &[Vec<f64>], targets: &[f64], n_trees: usize, seed: u64) -> Result<Self> {
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
        if n_trees == 0 {
            return Err(Error::Fit("forest needs at least one tree".into()));
        }
        let mtry = dim.div_ceil(3).max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trees = (0..n_trees)
            .map(|_| {
                let boot: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                grow(points, targets, boot, mtry, &mut rng)
            })
            .collect();
        Ok(ForestModel { trees })
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Mean and population standard deviation of the per-tree predictions.
    pub fn predict(&self, point: &[f64]) -> (f64, f64) {
        let preds: Vec<f64> = self.trees.iter().map(|t| t.predict(point)).collect();
        if preds.iter().all(|&p| p == preds[0]) {
            return (preds[0], 0.0);
        }
        let m = preds.iter().sum::<f64>() / preds.len() as f64;
        let var = preds.iter().map(|p| (p - m).powi(2)).sum::<f64>() / preds.len() as f64;
        (m, var.sqrt())
    }
}
