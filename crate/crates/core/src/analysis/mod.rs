//! Pareto analysis across two tuning runs and surrogate sensitivity.

pub mod pareto;
pub mod sobol;

use serde::{Deserialize, Serialize};

pub use pareto::{dominates, pareto_front, ParetoResult};
pub use sobol::{sobol_indices, SobolResult};

use crate::error::{Error, Result};
use crate::history::TuningHistory;
use crate::space::HyperparamPoint;

/// Points closer than this (max-abs, normalized) are treated as the same.
pub const DEDUP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedSample {
    pub point: HyperparamPoint,
    pub loss1: f64,
    pub loss2: f64,
    /// Number of trial records, across both runs, at this point.
    pub weight: usize,
    /// Which losses were computed afresh rather than read from a history.
    pub cross_evaluated: [bool; 2],
}

fn same_point(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= DEDUP_TOL)
}

/// Unions the points of two runs tuned on different metrics and fills each
/// point's missing loss with `cross_eval(slot, point, sample_index)`, where
/// slot 0 is the first run's metric and slot 1 the second's.
pub fn merged_objective_samples<F>(h1: &TuningHistory, h2: &TuningHistory, mut cross_eval: F) -> Result<Vec<MergedSample>>
where
    F: FnMut(usize, &HyperparamPoint, usize) -> Result<f64>,
{
    if h1.space != h2.space {
        return Err(Error::domain("the two runs were tuned over different hyperparameter spaces"));
    }
    let mut samples: Vec<(HyperparamPoint, [Option<f64>; 2], usize)> = Vec::new();
    for (slot, h) in [h1, h2].into_iter().enumerate() {
        for r in &h.records {
            match samples.iter_mut().find(|s| same_point(&s.0.normalized, &r.point.normalized)) {
                Some(s) => {
                    s.1[slot].get_or_insert(r.aggregate);
                    s.2 += 1;
                }
                None => {
                    let mut losses = [None, None];
                    losses[slot] = Some(r.aggregate);
                    samples.push((r.point.clone(), losses, 1));
                }
            }
        }
    }
    samples
        .into_iter()
        .enumerate()
        .map(|(i, (point, losses, weight))| {
            let mut fresh = [false; 2];
            let mut out = [0.0; 2];
            for slot in 0..2 {
                out[slot] = match losses[slot] {
                    Some(v) => v,
                    None => {
                        fresh[slot] = true;
                        cross_eval(slot, &point, i)?
                    }
                };
            }
            Ok(MergedSample {
                point,
                loss1: out[0],
                loss2: out[1],
                weight,
                cross_evaluated: fresh,
            })
        })
        .collect()
}
