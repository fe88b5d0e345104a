//! DR engines: the built-in t-SNE, an in-process column-copy stub, and
//! external programs speaking the request-directory protocol.
//!
//! An external engine receives one argument, a directory holding
//! `input.csv` (header-less matrix) and `params.json` (raw hyperparameters
//! plus `d_prime` and `seed`). It must write `output.csv` with one row per
//! input row and `d_prime` columns, then exit 0.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Read};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::{mpsc, Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;
use crate::tsne::{run_tsne, TsneConfig};

/// Environment variable overriding the root of request directories.
pub const TMP_ENV: &str = "DRTUNE_TMP";

const STDERR_GRACE: Duration = Duration::from_millis(500);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    BuiltinTsne,
    External,
    /// Returns the first `d_prime` input columns; used to exercise the
    /// pipeline without a real engine.
    Copy,
}

fn default_timeout() -> f64 {
    600.0
}

fn default_output_dim() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrEngineSpec {
    pub kind: EngineKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub command: Vec<String>,
    /// Space dimensions forwarded to the engine; empty means all of them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hyper_dims: Vec<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_output_dim")]
    pub output_dim: usize,
    /// Base settings for the built-in engine; tuned dimensions override them.
    #[serde(default)]
    pub tsne: TsneConfig,
}

impl DrEngineSpec {
    pub fn builtin_tsne() -> Self {
        DrEngineSpec {
            kind: EngineKind::BuiltinTsne,
            command: Vec::new(),
            hyper_dims: Vec::new(),
            timeout_secs: default_timeout(),
            output_dim: default_output_dim(),
            tsne: TsneConfig::default(),
        }
    }

    pub fn external(command: Vec<String>) -> Self {
        DrEngineSpec {
            kind: EngineKind::External,
            command,
            ..Self::builtin_tsne()
        }
    }

    pub fn copy() -> Self {
        DrEngineSpec {
            kind: EngineKind::Copy,
            ..Self::builtin_tsne()
        }
    }

    pub fn name(&self) -> String {
        match self.kind {
            EngineKind::BuiltinTsne => "tsne".into(),
            EngineKind::Copy => "copy".into(),
            EngineKind::External => format!("external:{}", self.command.first().map_or("", |s| s.as_str())),
        }
    }

    /// Checks the spec against the names of the tuned dimensions.
    pub fn validate(&self, space_dims: &[&str]) -> Result<()> {
        if self.kind == EngineKind::External && self.command.is_empty() {
            return Err(Error::config("engine.command", "external engine needs a command"));
        }
        if !(self.timeout_secs > 0.0) {
            return Err(Error::config("engine.timeout_secs", "timeout must be positive"));
        }
        if self.output_dim < 1 {
            return Err(Error::config("engine.output_dim", "output dimension must be at least 1"));
        }
        if let Some(d) = self.hyper_dims.iter().find(|d| !space_dims.contains(&d.as_str())) {
            return Err(Error::config(
                "engine.hyper_dims",
                format!("`{d}` is not a dimension of the search space"),
            ));
        }
        if self.kind == EngineKind::BuiltinTsne {
            for d in self.forwarded(space_dims) {
                if !BUILTIN_PARAMS.contains(&d) {
                    return Err(Error::config(
                        "engine.hyper_dims",
                        format!("built-in t-SNE has no hyperparameter `{d}`"),
                    ));
                }
            }
        }
        Ok(())
    }

    fn forwarded<'a>(&'a self, space_dims: &[&'a str]) -> Vec<&'a str> {
        if self.hyper_dims.is_empty() {
            space_dims.to_vec()
        } else {
            self.hyper_dims.iter().map(|s| s.as_str()).collect()
        }
    }
}

const BUILTIN_PARAMS: [&str; 3] = ["perplexity", "early_exaggeration", "learning_rate"];

/// Runs the engine on `x` and returns an `n x d_prime` embedding carrying
/// `x`'s labels. `raw` maps dimension names to raw hyperparameter values.
pub fn run_engine(spec: &DrEngineSpec, x: &DataMatrix, raw: &BTreeMap<String, f64>, seed: u64) -> Result<DataMatrix> {
    let names: Vec<&str> = raw.keys().map(|k| k.as_str()).collect();
    let params: BTreeMap<String, f64> = spec
        .forwarded(&names)
        .into_iter()
        .map(|k| {
            raw.get(k)
                .map(|v| (k.to_string(), *v))
                .ok_or_else(|| Error::domain(format!("missing hyperparameter `{k}`")))
        })
        .collect::<Result<_>>()?;
    let d_prime = spec.output_dim;
    let out = match spec.kind {
        EngineKind::BuiltinTsne => {
            let mut cfg = spec.tsne.clone();
            cfg.output_dim = d_prime;
            cfg.seed = seed;
            for (k, v) in &params {
                match k.as_str() {
                    "perplexity" => cfg.perplexity = *v,
                    "early_exaggeration" => cfg.early_exaggeration = *v,
                    "learning_rate" => cfg.learning_rate = *v,
                    other => return Err(Error::domain(format!("built-in t-SNE has no hyperparameter `{other}`"))),
                }
            }
            run_tsne(x, &cfg)?.coords
        }
        EngineKind::Copy => x.leading_columns(d_prime)?,
        EngineKind::External => run_external(spec, x, &params, d_prime, seed)?,
    };
    match x.labels() {
        Some(l) => out.with_labels(l.to_vec()),
        None => Ok(out.without_labels()),
    }
}

fn request_root() -> PathBuf {
    std::env::var_os(TMP_ENV).map_or_else(std::env::temp_dir, PathBuf::from)
}

/// `params.json` contents: integral values are written as JSON integers.
pub fn params_json(params: &BTreeMap<String, f64>, d_prime: usize, seed: u64) -> serde_json::Value {
    let mut obj = serde_json::Map::new();
    for (k, &v) in params {
        let value = if v.fract() == 0.0 && v.abs() < 9.0e15 {
            serde_json::Value::from(v as i64)
        } else {
            serde_json::Value::from(v)
        };
        obj.insert(k.clone(), value);
    }
    obj.insert("d_prime".into(), d_prime.into());
    obj.insert("seed".into(), seed.into());
    serde_json::Value::Object(obj)
}

/// Writes `input.csv` and `params.json` into `dir`.
pub fn write_request(dir: &Path, x: &DataMatrix, params: &BTreeMap<String, f64>, d_prime: usize, seed: u64) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(dir.join("input.csv"))?);
    x.write_csv(&mut w)?;
    drop(w);
    let json = serde_json::to_string_pretty(&params_json(params, d_prime, seed))?;
    fs::write(dir.join("params.json"), json + "\n")?;
    Ok(())
}

/// Parses a header-less numeric CSV and checks its shape.
pub fn read_output(path: &Path, n: usize, d_prime: usize) -> Result<DataMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::engine(format!("cannot read {}: {e}", path.display())))?;
    let mut values = Vec::with_capacity(n * d_prime);
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != d_prime {
            return Err(Error::engine(format!(
                "output.csv row {} has {} columns, expected {d_prime}",
                i + 1,
                cells.len()
            )));
        }
        for (j, c) in cells.iter().enumerate() {
            let v: f64 = c
                .trim()
                .parse()
                .map_err(|_| Error::engine(format!("output.csv row {}, column {}: `{c}` is not a number", i + 1, j + 1)))?;
            if !v.is_finite() {
                return Err(Error::engine(format!("output.csv row {}, column {}: non-finite value", i + 1, j + 1)));
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::engine(format!("output.csv has wrong shape: expected {n} rows, got {rows}")));
    }
    DataMatrix::new(values, n, d_prime)
}

fn run_external(
    spec: &DrEngineSpec,
    x: &DataMatrix,
    params: &BTreeMap<String, f64>,
    d_prime: usize,
    seed: u64,
) -> Result<DataMatrix> {
    let root = request_root();
    fs::create_dir_all(&root)?;
    let dir = tempfile::Builder::new().prefix("drtune-req-").tempdir_in(&root)?;
    write_request(dir.path(), x, params, d_prime, seed)?;

    let mut child = Command::new(&spec.command[0])
        .args(&spec.command[1..])
        .arg(dir.path())
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::engine(format!("cannot start `{}`: {e}", spec.command[0])))?;
    // Drain stderr on a thread so a chatty engine cannot block on a full pipe.
    // Descendants of a killed engine may hold the pipe open, so the reader is
    // only awaited briefly and whatever it has collected is used.
    let mut pipe = child.stderr.take().expect("stderr piped");
    let captured = Arc::new(Mutex::new(Vec::new()));
    let (done_tx, done_rx) = mpsc::channel();
    {
        let captured = Arc::clone(&captured);
        std::thread::spawn(move || {
            let mut chunk = [0u8; 4096];
            while let Ok(k) = pipe.read(&mut chunk) {
                if k == 0 {
                    break;
                }
                captured.lock().expect("stderr buffer").extend_from_slice(&chunk[..k]);
            }
            let _ = done_tx.send(());
        });
    }
    let collect = || {
        let _ = done_rx.recv_timeout(STDERR_GRACE);
        String::from_utf8_lossy(&captured.lock().expect("stderr buffer")).into_owned()
    };
    let status = match child.wait_timeout(Duration::from_secs_f64(spec.timeout_secs))? {
        Some(s) => s,
        None => {
            let _ = child.kill();
            let _ = child.wait();
            let kept = dir.keep();
            return Err(Error::Engine {
                message: format!("timed out after {} s; request kept at {}", spec.timeout_secs, kept.display()),
                stderr: collect(),
            });
        }
    };
    let stderr = collect();
    let with_stderr = |e: Error| match e {
        Error::Engine { message, .. } => Error::Engine {
            message,
            stderr: stderr.clone(),
        },
        other => other,
    };
    if !status.success() {
        let kept = dir.keep();
        return Err(with_stderr(Error::engine(format!(
            "engine exited with {status}; request kept at {}",
            kept.display()
        ))));
    }
    read_output(&dir.path().join("output.csv"), x.rows(), d_prime).map_err(with_stderr)
}

/// Minimal protocol-conformant engine: copies the first `d_prime` columns of
/// `input.csv` to `output.csv`.
pub fn stub_engine(dir: &Path) -> Result<()> {
    let params: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("params.json"))?)?;
    let d_prime = params
        .get("d_prime")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Format("params.json lacks an integer d_prime".into()))? as usize;
    let input = crate::data::load_csv(dir.join("input.csv"), None)?;
    let out = input.leading_columns(d_prime)?;
    let mut w = BufWriter::new(fs::File::create(dir.join("output.csv"))?);
    out.write_csv(&mut w)?;
    Ok(())
}
