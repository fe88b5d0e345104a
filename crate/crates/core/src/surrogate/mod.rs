//! Surrogate models over the normalized cube and the next-point proposer.

pub mod acquisition;
pub mod forest;
pub mod gp;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use acquisition::{acquisition, AcquisitionKind, AcquisitionSpec};
pub use forest::ForestModel;
pub use gp::{GpModel, GpParams};

use crate::error::Result;
use crate::lowdisc::sobol_points;

pub const N_CANDIDATES: usize = 1024;
pub const N_LOCAL: usize = 10;
const LOCAL_SIGMA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateKind {
    Gp,
    Forest,
}

impl SurrogateKind {
    pub fn name(self) -> &'static str {
        match self {
            SurrogateKind::Gp => "gp",
            SurrogateKind::Forest => "forest",
        }
    }
}

impl std::str::FromStr for SurrogateKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "gp" => Ok(SurrogateKind::Gp),
            "forest" | "rf" => Ok(SurrogateKind::Forest),
            _ => Err(format!("unknown surrogate `{s}` (expected gp or forest)")),
        }
    }
}

#[derive(Debug, Clone)]
enum Inner {
    Gp(GpModel),
    Forest(ForestModel),
}

/// A fitted surrogate together with the data it was conditioned on.
#[derive(Debug, Clone)]
pub struct Surrogate {
    inner: Inner,
    points: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

/// Fitted hyperparameters recorded in the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum SurrogateSnapshot {
    Gp {
        n_train: usize,
        signal_std: f64,
        length_scales: Vec<f64>,
        noise_std: f64,
        log_marginal_likelihood: f64,
    },
    Forest {
        n_train: usize,
        n_trees: usize,
    },
}

pub fn fit(kind: SurrogateKind, points: &[Vec<f64>], targets: &[f64], seed: u64) -> Result<Surrogate> {
    let inner = match kind {
        SurrogateKind::Gp => Inner::Gp(GpModel::fit(points, targets, seed)?),
        SurrogateKind::Forest => Inner::Forest(ForestModel::fit(points, targets, forest::DEFAULT_TREES, seed)?),
    };
    Ok(Surrogate {
        inner,
        points: points.to_vec(),
        targets: targets.to_vec(),
    })
}

impl Surrogate {
    pub fn kind(&self) -> SurrogateKind {
        match self.inner {
            Inner::Gp(_) => SurrogateKind::Gp,
            Inner::Forest(_) => SurrogateKind::Forest,
        }
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn predict(&self, point: &[f64]) -> (f64, f64) {
        match &self.inner {
            Inner::Gp(m) => m.predict(point),
            Inner::Forest(m) => m.predict(point),
        }
    }

    pub fn gp(&self) -> Option<&GpModel> {
        match &self.inner {
            Inner::Gp(m) => Some(m),
            Inner::Forest(_) => None,
        }
    }

    pub fn snapshot(&self) -> SurrogateSnapshot {
        let n_train = self.points.len();
        match &self.inner {
            Inner::Gp(m) => {
                let (_, scale) = m.target_scale();
                SurrogateSnapshot::Gp {
                    n_train,
                    signal_std: m.signal_std(),
                    length_scales: m.params.length_scales.clone(),
                    noise_std: scale * m.params.noise_variance.sqrt(),
                    log_marginal_likelihood: m.log_marginal_likelihood,
                }
            }
            Inner::Forest(m) => SurrogateSnapshot::Forest {
                n_train,
                n_trees: m.n_trees(),
            },
        }
    }

    pub fn best_target(&self) -> f64 {
        self.targets.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Mean and population standard deviation of the training targets; a
    /// zero spread is reported as 1.
    pub fn target_scale(&self) -> (f64, f64) {
        let n = self.targets.len() as f64;
        let mean = self.targets.iter().sum::<f64>() / n;
        let sd = (self.targets.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n).sqrt();
        (mean, if sd > 1e-12 { sd } else { 1.0 })
    }

    /// Candidate set scored by `propose_next`: scrambled Sobol points followed
    /// by jittered copies of the best training points.
    pub fn candidates(&self, seed: u64) -> Result<Vec<Vec<f64>>> {
        let dim = self.dim();
        let mut cands = sobol_points(N_CANDIDATES, dim, seed)?;
        let mut order: Vec<usize> = (0..self.targets.len()).collect();
        order.sort_by(|&a, &b| self.targets[a].total_cmp(&self.targets[b]).then(a.cmp(&b)));
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed);
        let noise = Normal::new(0.0, LOCAL_SIGMA).expect("valid sigma");
        for &i in order.iter().take(N_LOCAL) {
            cands.push(
                self.points[i]
                    .iter()
                    .map(|v| (v + noise.sample(&mut rng)).clamp(0.0, 1.0))
                    .collect(),
            );
        }
        Ok(cands)
    }
}

/// Argmax of the acquisition over the candidate set; ties go to the lowest
/// candidate index.
///
/// Scores are computed on standardized targets, so `xi` and `kappa` are in
/// units of the training-target standard deviation.
pub fn propose_next(model: &Surrogate, spec: &AcquisitionSpec, seed: u64) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut cands = model.candidates(seed)?;
    let (mu, sd) = model.target_scale();
    let scaled = AcquisitionSpec {
        best_so_far: (spec.best_so_far - mu) / sd,
        ..*spec
    };
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, c) in cands.iter().enumerate() {
        let (m, s) = model.predict(c);
        let a = acquisition(&scaled, (m - mu) / sd, s / sd);
        if a > best.0 {
            best = (a, i);
        }
    }
    Ok(cands.swap_remove(best.1))
}
