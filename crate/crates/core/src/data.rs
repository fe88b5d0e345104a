//! Synthetic datasets and CSV ingestion.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    TwoCluster {
        #[serde(default = "default_small")]
        n_small: usize,
        #[serde(default = "default_large")]
        n_large: usize,
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default = "default_separation")]
        separation: f64,
        #[serde(default)]
        seed: u64,
    },
    Sine {
        #[serde(default = "default_sine_n")]
        n: usize,
        /// Attach quartile-of-z class labels for task-dependent metrics.
        #[serde(default)]
        labels: bool,
    },
    Blobs {
        n_per_class: usize,
        n_classes: usize,
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default = "default_separation")]
        separation: f64,
        #[serde(default)]
        seed: u64,
    },
    Csv {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label_column: Option<String>,
    },
}

fn default_small() -> usize {
    10
}
fn default_large() -> usize {
    50
}
fn default_dim() -> usize {
    10
}
fn default_separation() -> f64 {
    8.0
}
fn default_sine_n() -> usize {
    200
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DatasetSpec::TwoCluster {
                n_small,
                n_large,
                dim,
                separation,
                ..
            } => {
                if *n_small < 1 || *n_large < 1 {
                    return Err(Error::config("dataset", "cluster sizes must be positive"));
                }
                if *dim < 2 {
                    return Err(Error::config("dataset.dim", "needs at least 2 dimensions"));
                }
                if !(*separation > 0.0) {
                    return Err(Error::config("dataset.separation", "must be positive"));
                }
            }
            DatasetSpec::Sine { n, .. } => {
                if *n < 2 {
                    return Err(Error::config("dataset.n", "sine dataset needs n >= 2"));
                }
            }
            DatasetSpec::Blobs {
                n_per_class,
                n_classes,
                dim,
                ..
            } => {
                if *n_per_class < 1 || *n_classes < 2 || *dim < 1 {
                    return Err(Error::config(
                        "dataset",
                        "blobs need n_per_class >= 1, n_classes >= 2, dim >= 1",
                    ));
                }
            }
            DatasetSpec::Csv { path, .. } => {
                if path.as_os_str().is_empty() {
                    return Err(Error::config("dataset.path", "csv path is empty"));
                }
            }
        }
        Ok(())
    }

    pub fn load(&self) -> Result<DataMatrix> {
        self.validate()?;
        match self {
            DatasetSpec::TwoCluster {
                n_small,
                n_large,
                dim,
                separation,
                seed,
            } => generate_two_cluster(*n_small, *n_large, *dim, *separation, *seed),
            DatasetSpec::Sine { n, labels } => {
                let x = generate_sine(*n)?;
                if *labels {
                    x.with_labels(sine_quartile_labels(*n))
                } else {
                    Ok(x)
                }
            }
            DatasetSpec::Blobs {
                n_per_class,
                n_classes,
                dim,
                separation,
                seed,
            } => generate_blobs(*n_per_class, *n_classes, *dim, *separation, *seed),
            DatasetSpec::Csv { path, label_column } => load_csv(path, label_column.as_deref()),
        }
    }
}

/// Two unit-variance Gaussian blobs: `n_small` points around the origin
/// (label 0) and `n_large` around `separation * e1` (label 1), rows shuffled.
pub fn generate_two_cluster(
    n_small: usize,
    n_large: usize,
    d: usize,
    separation: f64,
    seed: u64,
) -> Result<DataMatrix> {
    if n_small < 1 || n_large < 1 || d < 2 || !(separation > 0.0) {
        return Err(Error::domain(
            "two_cluster needs positive sizes, d >= 2 and separation > 0",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<(Vec<f64>, usize)> = Vec::with_capacity(n_small + n_large);
    for (label, count) in [(0usize, n_small), (1, n_large)] {
        for _ in 0..count {
            let mut row: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            if label == 1 {
                row[0] += separation;
            }
            rows.push((row, label));
        }
    }
    rows.shuffle(&mut rng);
    let labels = rows.iter().map(|r| r.1).collect();
    let values = rows.into_iter().flat_map(|r| r.0).collect();
    DataMatrix::new(values, n_small + n_large, d)?.with_labels(labels)
}

/// `n_classes` unit-variance blobs with centers `separation * e_(c mod d)`
/// scaled by `1 + c / d`, so any number of classes stays distinct.
pub fn generate_blobs(
    n_per_class: usize,
    n_classes: usize,
    d: usize,
    separation: f64,
    seed: u64,
) -> Result<DataMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<(Vec<f64>, usize)> = Vec::new();
    for c in 0..n_classes {
        let mut center = vec![0.0; d];
        center[c % d] = separation * (1.0 + (c / d) as f64);
        for _ in 0..n_per_class {
            let row = center
                .iter()
                .map(|m| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    m + e
                })
                .collect();
            rows.push((row, c));
        }
    }
    rows.shuffle(&mut rng);
    let n = rows.len();
    let labels = rows.iter().map(|r| r.1).collect();
    let values = rows.into_iter().flat_map(|r| r.0).collect();
    DataMatrix::new(values, n, d)?.with_labels(labels)
}

fn sine_z(i: usize, n: usize) -> f64 {
    2.0 * PI * i as f64 / (n - 1) as f64 - PI
}

/// Rows `[z, sin z, sin 2z, sin 3z]` on `n` equally spaced `z` in `[-pi, pi]`.
pub fn generate_sine(n: usize) -> Result<DataMatrix> {
    if n < 2 {
        return Err(Error::domain("sine dataset needs n >= 2"));
    }
    let values = (0..n)
        .flat_map(|i| {
            let z = sine_z(i, n);
            [z, z.sin(), (2.0 * z).sin(), (3.0 * z).sin()]
        })
        .collect();
    DataMatrix::new(values, n, 4)
}

/// Quartile bucket of `z` for each sine row, used as class labels.
pub fn sine_quartile_labels(n: usize) -> Vec<usize> {
    (0..n)
        .map(|i| {
            let frac = (sine_z(i, n) + PI) / (2.0 * PI);
            ((frac * 4.0).floor() as usize).min(3)
        })
        .collect()
}

/// Reads a comma-separated numeric file, skipping `#` comment lines. The first
/// line is taken as a header when none of its cells parse as numbers. `label_column` names a column
/// that is removed from the features and ordinal-encoded in first-seen order.
pub fn load_csv(path: impl AsRef<Path>, label_column: Option<&str>) -> Result<DataMatrix> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let mut lines: Vec<(usize, csv::StringRecord)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(line.as_bytes());
        let rec = reader
            .records()
            .next()
            .transpose()
            .map_err(|e| Error::Format(format!("{}: line {}: {e}", path.display(), i + 1)))?
            .unwrap_or_default();
        lines.push((i + 1, rec));
    }
    if lines.is_empty() {
        return Err(Error::Format(format!("{}: file has no rows", path.display())));
    }

    let header = {
        let first = &lines[0].1;
        if first.iter().all(|c| c.parse::<f64>().is_err()) {
            Some(first.iter().map(str::to_string).collect::<Vec<_>>())
        } else {
            None
        }
    };
    let data = if header.is_some() { &lines[1..] } else { &lines[..] };
    let width = header.as_ref().map_or(lines[0].1.len(), Vec::len);

    let label_idx = match label_column {
        None => None,
        Some(name) => {
            let idx = header
                .as_ref()
                .and_then(|h| h.iter().position(|c| c == name))
                .ok_or_else(|| Error::Ingestion {
                    row: lines[0].0,
                    column: 0,
                    message: format!("label column `{name}` not found in header"),
                })?;
            Some(idx)
        }
    };

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut codes: HashMap<String, usize> = HashMap::new();
    for (line, rec) in data {
        if rec.len() != width {
            return Err(Error::Ingestion {
                row: *line,
                column: rec.len().min(width) + 1,
                message: format!("expected {width} columns, found {}", rec.len()),
            });
        }
        for (j, cell) in rec.iter().enumerate() {
            if Some(j) == label_idx {
                let next = codes.len();
                labels.push(*codes.entry(cell.to_string()).or_insert(next));
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Ingestion {
                row: *line,
                column: j + 1,
                message: format!("non-numeric value `{cell}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::Ingestion {
                    row: *line,
                    column: j + 1,
                    message: format!("non-finite value `{cell}`"),
                });
            }
            values.push(v);
        }
    }
    let n = data.len();
    let d = width - usize::from(label_idx.is_some());
    let matrix = DataMatrix::new(values, n, d)?;
    if label_idx.is_some() {
        matrix.with_labels(labels)
    } else {
        Ok(matrix)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn two_cluster_shape_and_labels() {
        let x = generate_two_cluster(10, 50, 10, 8.0, 3).unwrap();
        assert_eq!((x.rows(), x.cols()), (60, 10));
        let labels = x.labels().unwrap();
        assert_eq!(labels.iter().filter(|&&l| l == 0).count(), 10);
        assert_eq!(labels.iter().filter(|&&l| l == 1).count(), 50);
    }

    #[test]
    fn two_cluster_minimal_and_deterministic() {
        let x = generate_two_cluster(1, 1, 2, 5.0, 0).unwrap();
        let mut l = x.labels().unwrap().to_vec();
        l.sort();
        assert_eq!(l, vec![0, 1]);
        let a = generate_two_cluster(10, 50, 10, 8.0, 11).unwrap();
        let b = generate_two_cluster(10, 50, 10, 8.0, 11).unwrap();
        assert_eq!(a, b);
        assert!(generate_two_cluster(0, 5, 2, 1.0, 0).is_err());
    }

    #[test]
    fn sine_rows() {
        let x = generate_sine(200).unwrap();
        assert_eq!((x.rows(), x.cols()), (200, 4));
        assert!((x.get(0, 0) + PI).abs() < 1e-15);
        for j in 1..4 {
            assert!(x.get(0, j).abs() < 1e-14);
        }
        let two = generate_sine(2).unwrap();
        assert!((two.get(0, 0) + PI).abs() < 1e-15 && (two.get(1, 0) - PI).abs() < 1e-15);
        for row in x.iter_rows() {
            let z = row[0];
            assert!((row[1] - z.sin()).abs() < 1e-12);
            assert!((row[2] - (2.0 * z).sin()).abs() < 1e-12);
            assert!((row[3] - (3.0 * z).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn sine_labels_are_quartiles() {
        let l = sine_quartile_labels(200);
        for c in 0..4 {
            assert_eq!(l.iter().filter(|&&v| v == c).count(), 50);
        }
    }

    #[test]
    fn csv_plain_numeric() {
        let f = write_tmp("1,2\n3,4\n5,6\n");
        let x = load_csv(f.path(), None).unwrap();
        assert_eq!((x.rows(), x.cols()), (3, 2));
        assert_eq!(x.values(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert!(x.labels().is_none());
    }

    #[test]
    fn csv_label_column_is_ordinal_encoded() {
        let f = write_tmp("a,b,cls\n1,2,x\n3,4,y\n5,6,x\n");
        let x = load_csv(f.path(), Some("cls")).unwrap();
        assert_eq!(x.cols(), 2);
        assert_eq!(x.labels(), Some(&[0, 1, 0][..]));
    }

    #[test]
    fn csv_errors_carry_position() {
        let f = write_tmp("1,foo\n");
        match load_csv(f.path(), None) {
            Err(Error::Ingestion { row, column, .. }) => assert_eq!((row, column), (1, 2)),
            other => panic!("unexpected {other:?}"),
        }
        let ragged = write_tmp("1,2\n3\n");
        assert!(matches!(
            load_csv(ragged.path(), None),
            Err(Error::Ingestion { row: 2, .. })
        ));
        let f = write_tmp("a,b\n1,2\n3,4\n");
        assert!(matches!(load_csv(f.path(), Some("cls")), Err(Error::Ingestion { .. })));
    }

    #[test]
    fn comment_lines_are_skipped_and_rows_count_physical_lines() {
        let f = write_tmp("# drtune 0.1.0\nx0,x1\n1,2\n# mid\n3,oops\n");
        match load_csv(f.path(), None) {
            Err(Error::Ingestion { row, column, .. }) => assert_eq!((row, column), (5, 2)),
            other => panic!("unexpected {other:?}"),
        }
        let f = write_tmp("# header comment\n1,2\n3,4\n");
        assert_eq!(load_csv(f.path(), None).unwrap().rows(), 2);
    }
}
