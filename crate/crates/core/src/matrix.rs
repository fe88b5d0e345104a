use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major `n x d` sample matrix with optional integer class labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMatrix {
    values: Vec<f64>,
    n: usize,
    d: usize,
    labels: Option<Vec<usize>>,
}

impl DataMatrix {
    pub fn new(values: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain(format!("matrix needs at least 2 rows, got {n}")));
        }
        if d < 1 {
            return Err(Error::domain("matrix needs at least 1 column"));
        }
        if values.len() != n * d {
            return Err(Error::domain(format!(
                "matrix of {n}x{d} needs {} values, got {}",
                n * d,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "non-finite entry at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        Ok(DataMatrix {
            values,
            n,
            d,
            labels: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::domain(format!("row {i} has {} columns, expected {d}", rows[i].len())));
        }
        Self::new(rows.concat(), rows.len(), d)
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::domain(format!(
                "label vector has length {}, expected {}",
                labels.len(),
                self.n
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn without_labels(mut self) -> Self {
        self.labels = None;
        self
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.d + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.d)
    }

    /// Copies the given rows (and their labels) into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            if i >= self.n {
                return Err(Error::domain(format!("row index {i} out of range for {} rows", self.n)));
            }
            values.extend_from_slice(self.row(i));
        }
        let mut out = Self::new(values, indices.len(), self.d)?;
        out.labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i]).collect());
        Ok(out)
    }

    /// First `k` columns, labels kept.
    pub fn leading_columns(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.d {
            return Err(Error::domain(format!("cannot take {k} of {} columns", self.d)));
        }
        let values = self.iter_rows().flat_map(|r| r[..k].iter().copied()).collect();
        let mut out = Self::new(values, self.n, k)?;
        out.labels = self.labels.clone();
        Ok(out)
    }

    pub fn squared_distance(&self, i: usize, j: usize) -> f64 {
        self.row(i)
            .iter()
            .zip(self.row(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// Writes the matrix as header-less CSV, one row per line.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        for row in self.iter_rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}
