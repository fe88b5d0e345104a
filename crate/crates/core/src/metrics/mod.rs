//! Quality metrics for a reduced dataset, all reported as losses in `[0, 1]`
//! where smaller is better.

pub mod classify;
pub mod cluster;
pub mod coranking;
pub mod distance;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;

pub use classify::misclass_loss;
pub use cluster::nmi_loss;
pub use coranking::{auc_rnx, coranking, q_local_global, q_nx, qnx_curve, CorankingMatrix};
pub use distance::{avg_distance_ratio, pairwise_distances, pearson_dist_corr, Distances};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Auc,
    QLocal,
    QGlobal,
    AvgRatio,
    PearsonDist,
    Nmi,
    Misclass,
}

impl MetricKind {
    pub const ALL: [MetricKind; 7] = [
        MetricKind::Auc,
        MetricKind::QLocal,
        MetricKind::QGlobal,
        MetricKind::AvgRatio,
        MetricKind::PearsonDist,
        MetricKind::Nmi,
        MetricKind::Misclass,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Auc => "auc",
            MetricKind::QLocal => "q_local",
            MetricKind::QGlobal => "q_global",
            MetricKind::AvgRatio => "avg_ratio",
            MetricKind::PearsonDist => "pearson_dist",
            MetricKind::Nmi => "nmi",
            MetricKind::Misclass => "misclass",
        }
    }

    pub fn needs_labels(self) -> bool {
        matches!(self, MetricKind::Nmi | MetricKind::Misclass)
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        MetricKind::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = MetricKind::ALL.iter().map(|m| m.name()).collect();
                format!("unknown metric `{s}` (expected one of {})", names.join(", "))
            })
    }
}

/// How per-repeat losses collapse into the single objective value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Aggregation {
    Mean,
    /// Linear-interpolation quantile.
    Quantile { q: f64 },
    /// `mean + k * variance`: penalizes unstable hyperparameters.
    MeanMinusKVar { k: f64 },
}

impl Aggregation {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Aggregation::Quantile { q } if !(q > 0.0 && q < 1.0) => {
                Err(Error::domain(format!("quantile {q} outside (0, 1)")))
            }
            Aggregation::MeanMinusKVar { k } if !(k >= 0.0) => {
                Err(Error::domain(format!("variance multiple {k} must be >= 0")))
            }
            _ => Ok(()),
        }
    }

    pub fn apply(&self, values: &[f64]) -> Result<f64> {
        if values.is_empty() {
            return Err(Error::domain("cannot aggregate an empty loss list"));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        Ok(match *self {
            Aggregation::Mean => mean,
            Aggregation::Quantile { q } => {
                let mut sorted = values.to_vec();
                sorted.sort_by(f64::total_cmp);
                let h = (sorted.len() - 1) as f64 * q;
                let lo = h.floor() as usize;
                let hi = (lo + 1).min(sorted.len() - 1);
                sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
            }
            Aggregation::MeanMinusKVar { k } => {
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                mean + k * var
            }
        })
    }
}

fn default_repeat() -> usize {
    10
}

fn default_train_frac() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub name: MetricKind,
    /// Cluster count for NMI; defaults to the number of distinct labels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default = "default_train_frac")]
    pub train_frac: f64,
    #[serde(default = "default_repeat")]
    pub n_repeat: usize,
    #[serde(default = "default_aggregation")]
    pub aggregation: Aggregation,
}

fn default_aggregation() -> Aggregation {
    Aggregation::Mean
}

impl MetricSpec {
    pub fn new(name: MetricKind) -> Self {
        MetricSpec {
            name,
            k: None,
            train_frac: default_train_frac(),
            n_repeat: default_repeat(),
            aggregation: Aggregation::Mean,
        }
    }

    pub fn with_repeats(mut self, n_repeat: usize) -> Self {
        self.n_repeat = n_repeat;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_repeat < 1 {
            return Err(Error::domain("n_repeat must be at least 1"));
        }
        self.aggregation.validate()
    }

    /// Loss of one embedding `x_star` of `x`. `seed` drives k-means and the
    /// classification split.
    pub fn loss(&self, x: &DataMatrix, x_star: &DataMatrix, seed: u64) -> Result<f64> {
        let labels = || {
            x.labels()
                .ok_or_else(|| Error::domain(format!("metric `{}` needs class labels", self.name)))
        };
        let loss = match self.name {
            MetricKind::Auc => auc_rnx(&coranking(x, x_star)?)?,
            MetricKind::QLocal => q_local_global(&coranking(x, x_star)?)?.0,
            MetricKind::QGlobal => q_local_global(&coranking(x, x_star)?)?.1,
            MetricKind::AvgRatio => avg_distance_ratio(x, x_star)?,
            MetricKind::PearsonDist => pearson_dist_corr(x, x_star)?,
            MetricKind::Nmi => nmi_loss(x_star, labels()?, self.k, seed)?,
            MetricKind::Misclass => misclass_loss(x_star, labels()?, self.train_frac, seed)?,
        };
        Ok(loss)
    }
}

/// Per-repeat losses for a list of embeddings plus their aggregate.
pub fn evaluate_metric(
    spec: &MetricSpec,
    x: &DataMatrix,
    embeddings: &[DataMatrix],
    seeds: &[u64],
) -> Result<(Vec<f64>, f64)> {
    spec.validate()?;
    if embeddings.len() != spec.n_repeat {
        return Err(Error::domain(format!(
            "expected {} embeddings, got {}",
            spec.n_repeat,
            embeddings.len()
        )));
    }
    if seeds.len() != embeddings.len() {
        return Err(Error::domain("one seed per embedding is required"));
    }
    let losses = embeddings
        .iter()
        .zip(seeds)
        .map(|(e, &s)| spec.loss(x, e, s))
        .collect::<Result<Vec<_>>>()?;
    let agg = spec.aggregation.apply(&losses)?;
    Ok((losses, agg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn aggregation_rules() {
        assert_eq!(Aggregation::Mean.apply(&[0.7]).unwrap(), 0.7);
        assert!((Aggregation::Mean.apply(&[0.2, 0.4]).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(Aggregation::Quantile { q: 0.5 }.apply(&[0.5, 0.1, 0.3]).unwrap(), 0.3);
        assert!((Aggregation::Quantile { q: 0.25 }.apply(&[0.0, 1.0]).unwrap() - 0.25).abs() < 1e-15);
        let v = Aggregation::MeanMinusKVar { k: 2.0 }.apply(&[0.2, 0.4]).unwrap();
        assert!((v - (0.3 + 2.0 * 0.01)).abs() < 1e-15);
        assert!(Aggregation::Quantile { q: 1.0 }.validate().is_err());
        assert!(Aggregation::MeanMinusKVar { k: -1.0 }.validate().is_err());
    }

    #[test]
    fn metric_names_round_trip() {
        for m in MetricKind::ALL {
            assert_eq!(m.name().parse::<MetricKind>().unwrap(), m);
        }
        assert!("bogus".parse::<MetricKind>().is_err());
    }

    fn rotated(x: &DataMatrix, angle: f64, scale: f64, shift: (f64, f64)) -> DataMatrix {
        let (s, c) = angle.sin_cos();
        let values = x
            .iter_rows()
            .flat_map(|r| {
                [
                    scale * (c * r[0] - s * r[1]) + shift.0,
                    scale * (s * r[0] + c * r[1]) + shift.1,
                ]
            })
            .collect();
        DataMatrix::new(values, x.rows(), 2).unwrap()
    }

    #[test]
    fn isometries_give_zero_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = DataMatrix::new((0..60).map(|_| rng.random::<f64>()).collect(), 30, 2).unwrap();
        let y = rotated(&x, 0.7, 3.0, (5.0, -2.0));
        for m in [
            MetricKind::Auc,
            MetricKind::QLocal,
            MetricKind::QGlobal,
            MetricKind::AvgRatio,
            MetricKind::PearsonDist,
        ] {
            assert!(MetricSpec::new(m).loss(&x, &y, 0).unwrap() < 1e-10, "{m}");
        }
    }

    #[test]
    fn task_metrics_need_labels() {
        let x = DataMatrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        assert!(MetricSpec::new(MetricKind::Nmi).loss(&x, &x, 0).is_err());
    }

    #[test]
    fn evaluate_checks_repeat_count() {
        let x = DataMatrix::from_rows(&[vec![0.0], vec![1.0], vec![3.0], vec![4.0]]).unwrap();
        let spec = MetricSpec::new(MetricKind::Auc).with_repeats(2);
        assert!(evaluate_metric(&spec, &x, std::slice::from_ref(&x), &[0]).is_err());
        let (losses, agg) = evaluate_metric(&spec, &x, &[x.clone(), x.clone()], &[0, 1]).unwrap();
        assert_eq!(losses.len(), 2);
        assert_eq!(agg, 0.0);
    }

    proptest! {
        #[test]
        fn scale_and_rotation_invariance(seed in 0u64..1000, angle in 0.0f64..std::f64::consts::TAU, scale in 0.1f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = DataMatrix::new((0..30).map(|_| rng.random::<f64>()).collect(), 10, 3).unwrap();
            let y = DataMatrix::new((0..20).map(|_| rng.random::<f64>()).collect(), 10, 2).unwrap();
            let y2 = rotated(&y, angle, scale, (1.0, 2.0));
            for m in [MetricKind::AvgRatio, MetricKind::PearsonDist] {
                let spec = MetricSpec::new(m);
                let a = spec.loss(&x, &y, 0).unwrap();
                let b = spec.loss(&x, &y2, 0).unwrap();
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn losses_in_unit_interval(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = DataMatrix::new((0..36).map(|_| rng.random::<f64>()).collect(), 12, 3)
                .unwrap()
                .with_labels((0..12).map(|i| i % 2).collect())
                .unwrap();
            let y = DataMatrix::new((0..24).map(|_| rng.random::<f64>()).collect(), 12, 2).unwrap();
            for m in MetricKind::ALL {
                let v = MetricSpec::new(m).loss(&x, &y, seed).unwrap();
                prop_assert!((0.0..=1.0).contains(&v), "{} gave {}", m, v);
            }
        }

        #[test]
        fn mean_is_order_invariant(mut v in proptest::collection::vec(0.0f64..1.0, 1..12)) {
            let a = Aggregation::Mean.apply(&v).unwrap();
            v.reverse();
            let b = Aggregation::Mean.apply(&v).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let q = Aggregation::Quantile { q: 0.3 }.apply(&v).unwrap();
            prop_assert!(a >= lo - 1e-12 && a <= hi + 1e-12);
            prop_assert!(q >= lo && q <= hi);
        }
    }
}
