//! Run configuration files (TOML).
//!
//! ```toml
//! [dataset]
//! kind = "two_cluster"
//!
//! [output]
//! dir = "runs/two_cluster"
//!
//! [tune]
//! n_pilot = 5
//! n_sequential = 15
//! n_repeat = 10
//! surrogate = "gp"
//! acquisition = "EI"
//! seed = 1
//!
//! [tune.metric]
//! name = "nmi"
//!
//! [tune.engine]
//! kind = "builtin_tsne"
//!
//! [[tune.space]]
//! name = "perplexity"
//! kind = "count"
//! min_count = 2
//! ```
//!
//! Unknown keys are rejected. Every error names the offending field.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adapter::DrEngineSpec;
use crate::data::DatasetSpec;
use crate::error::{Error, Result};
use crate::metrics::{Aggregation, MetricKind, MetricSpec};
use crate::space::{HyperparamDim, HyperparamSpace};
use crate::subsample::SamplerKind;
use crate::surrogate::{AcquisitionKind, SurrogateKind};
use crate::tuner::{PilotSampling, TuneConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSection {
    /// Points per continuous or count dimension.
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoSection {
    pub manifests: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolSection {
    pub manifest: Option<PathBuf>,
    pub n_base: usize,
    pub n_bootstrap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: DatasetSpec,
    pub tune: TuneConfig,
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pareto: Option<ParetoSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sobol: Option<SobolSection>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: PathBuf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMetric {
    name: String,
    k: Option<usize>,
    train_frac: Option<f64>,
    aggregation: Option<Aggregation>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTune {
    sampler: Option<String>,
    n_prime: Option<usize>,
    n_pilot: Option<usize>,
    n_sequential: Option<usize>,
    n_repeat: Option<usize>,
    surrogate: Option<String>,
    acquisition: Option<String>,
    xi: Option<f64>,
    kappa: Option<f64>,
    pilot_sampling: Option<String>,
    seed: Option<u64>,
    jobs: Option<usize>,
    metric: toml::Value,
    engine: Option<toml::Value>,
    space: Option<Vec<toml::Value>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    points: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSobol {
    manifest: Option<PathBuf>,
    n_base: Option<usize>,
    n_bootstrap: Option<usize>,
}

fn section<T: serde::de::DeserializeOwned>(value: &toml::Value, field: &str) -> Result<T> {
    value.clone().try_into().map_err(|e: toml::de::Error| Error::config(field, e.message().to_string()))
}

fn parse_name<T: std::str::FromStr<Err = String>>(value: Option<&str>, default: T, field: &str) -> Result<T> {
    match value {
        None => Ok(default),
        Some(s) => s.parse().map_err(|e: String| Error::config(field, e)),
    }
}

fn parse_sampler(s: &str) -> std::result::Result<SamplerKind, String> {
    match s {
        "none" => Ok(SamplerKind::None),
        "uniform" => Ok(SamplerKind::Uniform),
        "leverage" => Ok(SamplerKind::Leverage),
        _ => Err(format!("unknown sampler `{s}` (expected none, uniform or leverage)")),
    }
}

fn parse_pilot(s: &str) -> std::result::Result<PilotSampling, String> {
    match s {
        "sobol" => Ok(PilotSampling::Sobol),
        "iid" => Ok(PilotSampling::Iid),
        _ => Err(format!("unknown pilot sampling `{s}` (expected sobol or iid)")),
    }
}

struct Named<T>(T);

impl std::str::FromStr for Named<SamplerKind> {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        parse_sampler(s).map(Named)
    }
}

impl std::str::FromStr for Named<PilotSampling> {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        parse_pilot(s).map(Named)
    }
}

fn parse_tune(value: &toml::Value) -> Result<TuneConfig> {
    let raw: RawTune = section(value, "tune")?;
    let m: RawMetric = section(&raw.metric, "tune.metric")?;
    let kind: MetricKind = m.name.parse().map_err(|e: String| Error::config("tune.metric.name", e))?;
    let mut metric = MetricSpec::new(kind);
    metric.k = m.k;
    if let Some(f) = m.train_frac {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::config("tune.metric.train_frac", format!("{f} outside (0, 1)")));
        }
        metric.train_frac = f;
    }
    if let Some(a) = m.aggregation {
        a.validate().map_err(|e| Error::config("tune.metric.aggregation", e.to_string()))?;
        metric.aggregation = a;
    }
    if let Some(r) = raw.n_repeat {
        if r < 1 {
            return Err(Error::config("tune.n_repeat", "must be at least 1"));
        }
        metric.n_repeat = r;
    }

    let engine: DrEngineSpec = match &raw.engine {
        Some(v) => section(v, "tune.engine")?,
        None => DrEngineSpec::builtin_tsne(),
    };
    let space = match &raw.space {
        None => HyperparamSpace::perplexity(),
        Some(dims) => {
            if dims.is_empty() {
                return Err(Error::config("tune.space", "search space has no dimensions"));
            }
            let dims = dims
                .iter()
                .enumerate()
                .map(|(i, v)| section::<HyperparamDim>(v, &format!("tune.space[{i}]")))
                .collect::<Result<Vec<_>>>()?;
            HyperparamSpace::new(dims).map_err(|e| Error::config("tune.space", e.to_string()))?
        }
    };

    let mut cfg = TuneConfig::new(space, engine, metric);
    cfg.sampler = parse_name(raw.sampler.as_deref(), Named(SamplerKind::None), "tune.sampler")?.0;
    cfg.n_prime = raw.n_prime;
    if cfg.n_prime.is_some() && raw.sampler.is_none() {
        cfg.sampler = SamplerKind::Uniform;
    }
    cfg.n_pilot = raw.n_pilot.unwrap_or(cfg.n_pilot);
    cfg.n_sequential = raw.n_sequential.unwrap_or(cfg.n_sequential);
    cfg.surrogate = parse_name::<SurrogateKind>(raw.surrogate.as_deref(), SurrogateKind::Gp, "tune.surrogate")?;
    cfg.acquisition = parse_name::<AcquisitionKind>(raw.acquisition.as_deref(), AcquisitionKind::Ei, "tune.acquisition")?;
    cfg.xi = raw.xi.unwrap_or(cfg.xi);
    cfg.kappa = raw.kappa.unwrap_or(cfg.kappa);
    cfg.pilot_sampling = parse_name(raw.pilot_sampling.as_deref(), Named(PilotSampling::Sobol), "tune.pilot_sampling")?.0;
    cfg.master_seed = raw.seed.unwrap_or(0);
    cfg.jobs = raw.jobs.unwrap_or(1);
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::config("<file>", e.to_string()))?;
        for key in table.keys() {
            if !["dataset", "output", "tune", "grid", "pareto", "sobol"].contains(&key.as_str()) {
                return Err(Error::config(key.as_str(), "unknown section"));
            }
        }
        let need = |k: &str| table.get(k).ok_or_else(|| Error::config(k, "missing section"));

        let mut dataset: DatasetSpec = section(need("dataset")?, "dataset")?;
        dataset.validate()?;
        if let DatasetSpec::Csv { path, .. } = &mut dataset {
            if path.is_relative() {
                *path = base_dir.join(&*path);
            }
        }
        let output: RawOutput = section(need("output")?, "output")?;
        let tune = parse_tune(need("tune")?)?;

        let grid = match table.get("grid") {
            None => None,
            Some(v) => {
                let g: RawGrid = section(v, "grid")?;
                let points = g.points.unwrap_or(10);
                if points < 1 {
                    return Err(Error::config("grid.points", "grid needs at least one point per dimension"));
                }
                Some(GridSection { points })
            }
        };
        let pareto = match table.get("pareto") {
            None => None,
            Some(v) => {
                let p: ParetoSection = section(v, "pareto")?;
                Some(ParetoSection {
                    manifests: p.manifests.into_iter().map(|m| base_dir.join(m)).collect(),
                })
            }
        };
        let sobol = match table.get("sobol") {
            None => None,
            Some(v) => {
                let s: RawSobol = section(v, "sobol")?;
                let n_base = s.n_base.unwrap_or(1024);
                if n_base < 64 || !n_base.is_power_of_two() {
                    return Err(Error::config("sobol.n_base", "must be a power of two >= 64"));
                }
                Some(SobolSection {
                    manifest: s.manifest.map(|m| base_dir.join(m)),
                    n_base,
                    n_bootstrap: s.n_bootstrap.unwrap_or(100),
                })
            }
        };
        Ok(RunConfig {
            dataset,
            tune,
            output_dir: base_dir.join(output.dir),
            grid,
            pareto,
            sobol,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("--config", format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }
}
