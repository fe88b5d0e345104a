use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{HyperparamPoint, HyperparamSpace};
use crate::surrogate::SurrogateSnapshot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Pilot,
    Sequential,
    Grid,
}

/// One evaluated hyperparameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub point: HyperparamPoint,
    /// Per-repeat losses in `[0, 1]`, smaller is better.
    pub metric_values: Vec<f64>,
    pub aggregate: f64,
    pub phase: Phase,
    pub seed_base: u64,
    /// Repeats dropped because the engine or metric failed.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub dropped_repeats: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_seconds: Option<f64>,
}

fn is_zero(v: &usize) -> bool {
    *v == 0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsampleInfo {
    pub sampler: String,
    pub n_full: usize,
    pub n_prime: usize,
    pub seed: u64,
    pub rows: Vec<usize>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fallback_uniform: bool,
}

/// Append-only log of a tuning or grid run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningHistory {
    pub space: HyperparamSpace,
    pub metric_name: String,
    pub dr_name: String,
    pub subsample: Option<SubsampleInfo>,
    pub records: Vec<TrialRecord>,
    /// Surrogate hyperparameters fitted before each sequential proposal.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub surrogate_fits: Vec<SurrogateSnapshot>,
}

impl TuningHistory {
    pub fn new(space: HyperparamSpace, metric_name: &str, dr_name: &str) -> Self {
        TuningHistory {
            space,
            metric_name: metric_name.to_string(),
            dr_name: dr_name.to_string(),
            subsample: None,
            records: Vec::new(),
            surrogate_fits: Vec::new(),
        }
    }

    pub fn push(&mut self, record: TrialRecord) -> Result<()> {
        if record.metric_values.is_empty() {
            return Err(Error::domain("trial record needs at least one metric value"));
        }
        if record.phase == Phase::Pilot
            && self.records.iter().any(|r| r.phase == Phase::Sequential)
        {
            return Err(Error::domain("pilot records must precede sequential records"));
        }
        self.records.push(record);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Record with the smallest aggregate; ties go to the earliest trial.
    pub fn best(&self) -> Option<&TrialRecord> {
        self.records.iter().fold(None, |best: Option<&TrialRecord>, r| match best {
            Some(b) if b.aggregate <= r.aggregate => Some(b),
            _ => Some(r),
        })
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        self.records.iter().map(|r| r.point.normalized.clone()).collect()
    }

    pub fn aggregates(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.aggregate).collect()
    }

    pub fn clear_wall_clock(&mut self) {
        for r in &mut self.records {
            r.wall_seconds = None;
        }
    }
}

/// Running minimum of the aggregates, one entry per record.
pub fn best_so_far_trace(history: &TuningHistory) -> Result<Vec<f64>> {
    if history.is_empty() {
        return Err(Error::domain("history is empty"));
    }
    Ok(history
        .records
        .iter()
        .scan(f64::INFINITY, |best, r| {
            *best = best.min(r.aggregate);
            Some(*best)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(trial: usize, aggregate: f64, phase: Phase) -> TrialRecord {
        TrialRecord {
            trial,
            point: HyperparamPoint {
                normalized: vec![0.5],
                raw: vec![5.0],
            },
            metric_values: vec![aggregate],
            aggregate,
            phase,
            seed_base: 0,
            dropped_repeats: 0,
            wall_seconds: None,
        }
    }

    fn history(aggs: &[f64]) -> TuningHistory {
        let mut h = TuningHistory::new(HyperparamSpace::perplexity(), "nmi", "tsne");
        for (i, &a) in aggs.iter().enumerate() {
            h.push(record(i, a, Phase::Pilot)).unwrap();
        }
        h
    }

    #[test]
    fn trace_is_running_minimum() {
        let h = history(&[0.5, 0.6, 0.4]);
        assert_eq!(best_so_far_trace(&h).unwrap(), vec![0.5, 0.5, 0.4]);
        let c = history(&[0.3, 0.3, 0.3]);
        assert_eq!(best_so_far_trace(&c).unwrap(), vec![0.3; 3]);
        let trace = best_so_far_trace(&h).unwrap();
        assert_eq!(*trace.last().unwrap(), h.best().unwrap().aggregate);
    }

    #[test]
    fn empty_trace_is_an_error() {
        assert!(best_so_far_trace(&history(&[])).is_err());
    }

    #[test]
    fn best_prefers_earliest_on_ties() {
        let h = history(&[0.4, 0.2, 0.2]);
        assert_eq!(h.best().unwrap().trial, 1);
    }

    #[test]
    fn pilot_after_sequential_is_rejected() {
        let mut h = history(&[0.1]);
        h.push(record(1, 0.2, Phase::Sequential)).unwrap();
        assert!(h.push(record(2, 0.2, Phase::Pilot)).is_err());
    }
}
