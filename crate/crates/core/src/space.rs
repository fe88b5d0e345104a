//! Hyperparameter spaces and the raw <-> unit-cube mapping.
//!
//! Count hyperparameters (perplexity, n_neighbor) are divided by the sample
//! size before being mapped to `[0, 1]`, so a normalized optimum found on a
//! subsample of size `n'` can be re-materialized for the full `n`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BOUND_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DimKind {
    Continuous {
        lo: f64,
        hi: f64,
    },
    /// Explicit, strictly increasing value list; normalized by index.
    Discrete { values: Vec<f64> },
    /// Integer count divided by the sample size. `lo..hi` is the range of
    /// `count / n` that maps onto the unit interval.
    Count {
        #[serde(default)]
        lo: f64,
        #[serde(default = "unit")]
        hi: f64,
        #[serde(default = "one")]
        min_count: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_count: Option<u64>,
    },
}

fn unit() -> f64 {
    1.0
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalizer {
    None,
    DivideByN,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperparamDim {
    pub name: String,
    #[serde(flatten)]
    pub kind: DimKind,
}

impl HyperparamDim {
    pub fn continuous(name: &str, lo: f64, hi: f64) -> Self {
        HyperparamDim {
            name: name.to_string(),
            kind: DimKind::Continuous { lo, hi },
        }
    }

    pub fn discrete(name: &str, values: Vec<f64>) -> Self {
        HyperparamDim {
            name: name.to_string(),
            kind: DimKind::Discrete { values },
        }
    }

    pub fn count(name: &str, min_count: u64, max_count: Option<u64>) -> Self {
        HyperparamDim {
            name: name.to_string(),
            kind: DimKind::Count {
                lo: 0.0,
                hi: 1.0,
                min_count,
                max_count,
            },
        }
    }

    /// t-SNE perplexity as a fraction of the sample size.
    pub fn perplexity() -> Self {
        Self::count("perplexity", 1, None)
    }

    /// UMAP neighbor count as a fraction of the sample size, raw range `2..=100`.
    pub fn n_neighbor() -> Self {
        Self::count("n_neighbor", 2, Some(100))
    }

    pub fn min_dist() -> Self {
        Self::discrete("min_dist", vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0])
    }

    pub fn early_exaggeration() -> Self {
        Self::continuous("early_exaggeration", 1.0, 40.0)
    }

    pub fn normalizer(&self) -> Normalizer {
        match self.kind {
            DimKind::Count { .. } => Normalizer::DivideByN,
            _ => Normalizer::None,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::domain(format!("dimension `{}`: {msg}", self.name)));
        if self.name.is_empty() {
            return Err(Error::domain("dimension name must be non-empty"));
        }
        match &self.kind {
            DimKind::Continuous { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return bad(format!("needs lo < hi, got [{lo}, {hi}]"));
                }
            }
            DimKind::Discrete { values } => {
                if values.is_empty() {
                    return bad("discrete value list is empty".into());
                }
                if values.iter().any(|v| !v.is_finite()) || values.windows(2).any(|w| w[0] >= w[1]) {
                    return bad("discrete values must be finite and strictly increasing".into());
                }
            }
            DimKind::Count {
                lo,
                hi,
                min_count,
                max_count,
            } => {
                if !(*lo >= 0.0 && lo < hi && hi.is_finite()) {
                    return bad(format!("needs 0 <= lo < hi, got [{lo}, {hi}]"));
                }
                if *min_count < 1 {
                    return bad("min_count must be at least 1".into());
                }
                if let Some(mx) = max_count {
                    if mx < min_count {
                        return bad(format!("max_count {mx} below min_count {min_count}"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Largest admissible count for sample size `n`.
    fn count_ceiling(&self, n: usize) -> u64 {
        match self.kind {
            DimKind::Count {
                min_count,
                max_count,
                ..
            } => {
                let cap = (n as u64).saturating_sub(1);
                let cap = max_count.map_or(cap, |m| m.min(cap));
                cap.max(min_count)
            }
            _ => u64::MAX,
        }
    }

    pub fn normalize(&self, raw: f64, n: usize) -> Result<f64> {
        let out_of_bounds = || {
            Error::domain(format!(
                "value {raw} is outside the bounds of dimension `{}`",
                self.name
            ))
        };
        match &self.kind {
            DimKind::Continuous { lo, hi } => {
                if raw < lo - BOUND_TOL * (hi - lo) || raw > hi + BOUND_TOL * (hi - lo) {
                    return Err(out_of_bounds());
                }
                Ok(((raw - lo) / (hi - lo)).clamp(0.0, 1.0))
            }
            DimKind::Discrete { values } => {
                let (first, last) = (values[0], values[values.len() - 1]);
                let span = (last - first).max(1.0);
                if raw < first - BOUND_TOL * span || raw > last + BOUND_TOL * span {
                    return Err(out_of_bounds());
                }
                if values.len() == 1 {
                    return Ok(0.0);
                }
                Ok(nearest_index(values, raw) as f64 / (values.len() - 1) as f64)
            }
            DimKind::Count { lo, hi, .. } => {
                let frac = raw / n as f64;
                if !raw.is_finite() || frac < lo - BOUND_TOL || frac > hi + BOUND_TOL {
                    return Err(out_of_bounds());
                }
                Ok(((frac - lo) / (hi - lo)).clamp(0.0, 1.0))
            }
        }
    }

    /// Inverse of [`normalize`](Self::normalize). Counts round half up and are
    /// clamped to `[min_count, n - 1]`; discrete values snap to the nearest entry.
    pub fn denormalize(&self, unit: f64, n: usize) -> f64 {
        let unit = unit.clamp(0.0, 1.0);
        match &self.kind {
            DimKind::Continuous { lo, hi } => lo + unit * (hi - lo),
            DimKind::Discrete { values } => {
                let idx = (unit * (values.len() - 1) as f64 + 0.5).floor() as usize;
                values[idx.min(values.len() - 1)]
            }
            DimKind::Count { lo, hi, min_count, .. } => {
                let target = n as f64 * (lo + unit * (hi - lo));
                let rounded = (target + 0.5).floor().max(0.0) as u64;
                rounded.clamp(*min_count, self.count_ceiling(n)) as f64
            }
        }
    }
}

fn nearest_index(values: &[f64], x: f64) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if (v - x).abs() < (values[best] - x).abs() {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperparamSpace {
    pub dims: Vec<HyperparamDim>,
}

impl HyperparamSpace {
    pub fn new(dims: Vec<HyperparamDim>) -> Result<Self> {
        let space = HyperparamSpace { dims };
        space.validate()?;
        Ok(space)
    }

    /// The single-dimension perplexity space used for t-SNE.
    pub fn perplexity() -> Self {
        HyperparamSpace {
            dims: vec![HyperparamDim::perplexity()],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(Error::domain("hyperparameter space needs at least one dimension"));
        }
        for (i, dim) in self.dims.iter().enumerate() {
            dim.validate()?;
            if self.dims[..i].iter().any(|d| d.name == dim.name) {
                return Err(Error::domain(format!("duplicate dimension name `{}`", dim.name)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.dims.iter().map(|d| d.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.dims.iter().position(|d| d.name == name)
    }

    pub fn normalize_point(&self, raw: &[f64], n: usize) -> Result<Vec<f64>> {
        self.check_len(raw.len())?;
        if n < 2 {
            return Err(Error::domain(format!("sample size must be at least 2, got {n}")));
        }
        self.dims
            .iter()
            .zip(raw)
            .map(|(dim, &r)| dim.normalize(r, n))
            .collect()
    }

    pub fn denormalize_point(&self, unit: &[f64], n: usize) -> Result<Vec<f64>> {
        self.check_len(unit.len())?;
        Ok(self
            .dims
            .iter()
            .zip(unit)
            .map(|(dim, &u)| dim.denormalize(u, n))
            .collect())
    }

    /// Builds a point whose raw values are valid for sample size `n`.
    pub fn materialize(&self, unit: &[f64], n: usize) -> Result<HyperparamPoint> {
        if let Some(u) = unit.iter().find(|u| !(0.0..=1.0).contains(*u)) {
            return Err(Error::domain(format!("normalized coordinate {u} outside [0, 1]")));
        }
        Ok(HyperparamPoint {
            normalized: unit.to_vec(),
            raw: self.denormalize_point(unit, n)?,
        })
    }

    pub fn raw_map(&self, raw: &[f64]) -> BTreeMap<String, f64> {
        self.dims
            .iter()
            .zip(raw)
            .map(|(d, &v)| (d.name.clone(), v))
            .collect()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dims.len() {
            return Err(Error::domain(format!(
                "point has {len} coordinates, space has {} dimensions",
                self.dims.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperparamPoint {
    pub normalized: Vec<f64>,
    pub raw: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perplexity_normalizes_by_sample_size() {
        let dim = HyperparamDim::perplexity();
        assert!((dim.normalize(9.0, 60).unwrap() - 0.15).abs() < 1e-12);
        assert_eq!(dim.denormalize(0.15, 60), 9.0);
    }

    #[test]
    fn full_data_transfer_rounds_half_up() {
        let dim = HyperparamDim::perplexity();
        assert_eq!(dim.denormalize(0.45, 14_260), 6417.0);
    }

    #[test]
    fn lower_bound_maps_to_zero() {
        let dim = HyperparamDim::continuous("x", -2.0, 3.0);
        assert_eq!(dim.normalize(-2.0, 10).unwrap(), 0.0);
        assert_eq!(dim.normalize(3.0, 10).unwrap(), 1.0);
    }

    #[test]
    fn discrete_maps_by_index() {
        let dim = HyperparamDim::min_dist();
        assert!((dim.normalize(0.4, 10).unwrap() - 0.4).abs() < 1e-12);
        let uneven = HyperparamDim::discrete("u", vec![1.0, 2.0, 10.0]);
        assert_eq!(uneven.normalize(10.0, 5).unwrap(), 1.0);
        assert_eq!(uneven.normalize(2.0, 5).unwrap(), 0.5);
        assert_eq!(uneven.denormalize(0.7, 5), 2.0);
    }

    #[test]
    fn n_neighbor_floor_and_ceiling() {
        let dim = HyperparamDim::n_neighbor();
        assert_eq!(dim.denormalize(0.0, 500), 2.0);
        assert_eq!(dim.denormalize(1.0, 500), 100.0);
        assert_eq!(dim.denormalize(1.0, 40), 39.0);
    }

    #[test]
    fn out_of_bounds_error_names_dimension() {
        let space = HyperparamSpace::new(vec![HyperparamDim::continuous("lr", 1.0, 2.0)]).unwrap();
        let err = space.normalize_point(&[3.0], 10).unwrap_err().to_string();
        assert!(err.contains("lr"), "{err}");
        assert!(HyperparamDim::perplexity().normalize(61.0, 60).is_err());
    }

    #[test]
    fn space_validation() {
        assert!(HyperparamSpace::new(vec![]).is_err());
        assert!(HyperparamSpace::new(vec![HyperparamDim::perplexity(), HyperparamDim::perplexity()]).is_err());
        assert!(HyperparamSpace::new(vec![HyperparamDim::continuous("a", 1.0, 1.0)]).is_err());
        assert!(HyperparamSpace::new(vec![HyperparamDim::discrete("a", vec![1.0, 1.0])]).is_err());
        assert!(HyperparamSpace::new(vec![HyperparamDim::discrete("a", vec![])]).is_err());
    }

    proptest! {
        #[test]
        fn continuous_round_trip(lo in -50.0f64..50.0, width in 1e-3f64..100.0, u in 0.0f64..=1.0) {
            let dim = HyperparamDim::continuous("c", lo, lo + width);
            let raw = dim.denormalize(u, 10);
            prop_assert!((dim.normalize(raw, 10).unwrap() - u).abs() < 1e-12);
        }

        #[test]
        fn count_round_trip_within_one_over_n(n in 2usize..5000, u in 0.0f64..=1.0) {
            let dim = HyperparamDim::perplexity();
            let raw = dim.denormalize(u, n);
            let back = dim.normalize(raw, n).unwrap();
            prop_assert!((back - u).abs() <= 1.0 / n as f64 + 1e-12);
        }

        #[test]
        fn normalization_is_strictly_increasing(a in 0.0f64..1.0, b in 0.0f64..1.0) {
            prop_assume!((a - b).abs() > 1e-9);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let dim = HyperparamDim::continuous("c", 0.0, 1.0);
            prop_assert!(dim.normalize(lo, 3).unwrap() < dim.normalize(hi, 3).unwrap());
            let n = 1000;
            let count = HyperparamDim::perplexity();
            let (cl, ch) = ((lo * n as f64).floor().max(1.0), (hi * n as f64).floor().max(1.0));
            if cl < ch {
                prop_assert!(count.normalize(cl, n).unwrap() < count.normalize(ch, n).unwrap());
            }
        }
    }
}
