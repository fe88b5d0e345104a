//! Files written by the command-line tool.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::history::TuningHistory;

pub const MANIFEST: &str = "manifest.json";

/// Options shared by every writer.
#[derive(Debug, Clone, Copy)]
pub struct WriteOpts {
    pub force: bool,
    pub timestamp: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestReport {
    pub trial: usize,
    pub normalized: Vec<f64>,
    /// Raw values at the tuning sample size.
    pub raw: Vec<f64>,
    /// Raw values after transfer to the full sample size.
    pub raw_full: Vec<f64>,
    pub aggregate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_unix: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_seconds: Option<f64>,
    pub config: RunConfig,
    pub history: TuningHistory,
    pub best: BestReport,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config("manifest", format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::config("manifest", format!("{} is not a drtune manifest: {e}", path.display())))
    }
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Creates `path` for writing, refusing to replace an existing file unless
/// `force` is set.
pub fn create(path: &Path, force: bool) -> Result<fs::File> {
    if path.exists() && !force {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::AlreadyExists,
            format!("{} exists; pass --force to overwrite", path.display()),
        )));
    }
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    Ok(fs::File::create(path)?)
}

/// A CSV file with an optional leading `#` timestamp line and any number of
/// further `#` comment lines.
pub struct CsvOut {
    path: PathBuf,
    writer: csv::Writer<fs::File>,
}

impl CsvOut {
    pub fn create(path: &Path, opts: WriteOpts, comments: &[String]) -> Result<Self> {
        let mut file = create(path, opts.force)?;
        if opts.timestamp {
            writeln!(file, "# drtune {} generated at unix time {}", env!("CARGO_PKG_VERSION"), unix_now())?;
        }
        for c in comments {
            writeln!(file, "# {c}")?;
        }
        Ok(CsvOut {
            path: path.to_path_buf(),
            writer: csv::Writer::from_writer(file),
        })
    }

    pub fn row<I, S>(&mut self, cells: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer
            .write_record(cells)
            .map_err(|e| Error::Format(format!("{}: {e}", self.path.display())))
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.writer.flush()?;
        Ok(self.path)
    }
}

pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T, force: bool) -> Result<()> {
    let mut file = create(path, force)?;
    serde_json::to_writer_pretty(&mut file, value)?;
    writeln!(file)?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str, force: bool) -> Result<()> {
    let mut file = create(path, force)?;
    file.write_all(text.as_bytes())?;
    Ok(())
}
