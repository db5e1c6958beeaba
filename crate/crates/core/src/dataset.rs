use std::collections::HashSet;

use crate::error::{DetError, Result};

/// A weighted set of points in `D` named dimensions, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<String>,
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset from rows. `weights = None` gives every row weight 1.
    pub fn new(columns: Vec<String>, rows: Vec<Vec<f64>>, weights: Option<Vec<f64>>) -> Result<Self> {
        let dims = columns.len();
        let mut values = Vec::with_capacity(rows.len() * dims);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dims {
                return Err(DetError::InvalidDataset(format!(
                    "row {i} has {} coordinates, expected {dims}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::from_flat(columns, values, weights)
    }

    /// Builds a dataset from a row-major buffer of `N * D` values.
    pub fn from_flat(columns: Vec<String>, values: Vec<f64>, weights: Option<Vec<f64>>) -> Result<Self> {
        let dims = columns.len();
        if dims == 0 {
            return Err(DetError::InvalidDataset("no columns".into()));
        }
        let mut seen = HashSet::new();
        for c in &columns {
            if c.is_empty() {
                return Err(DetError::InvalidDataset("empty column name".into()));
            }
            if !seen.insert(c.as_str()) {
                return Err(DetError::InvalidDataset(format!("duplicate column name '{c}'")));
            }
        }
        if !values.len().is_multiple_of(dims) {
            return Err(DetError::InvalidDataset(format!(
                "{} values do not form rows of {dims}",
                values.len()
            )));
        }
        let n = values.len() / dims;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(DetError::InvalidDataset(format!(
                "non-finite coordinate in row {}, column '{}'",
                i / dims,
                columns[i % dims]
            )));
        }
        let weights = match weights {
            Some(w) => {
                if w.len() != n {
                    return Err(DetError::InvalidDataset(format!(
                        "{} weights for {n} rows",
                        w.len()
                    )));
                }
                if let Some((i, &v)) = w.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
                    return Err(DetError::InvalidWeight(format!("row {i} has weight {v}")));
                }
                w
            }
            None => vec![1.0; n],
        };
        if n == 0 || weights.iter().sum::<f64>() <= 0.0 {
            return Err(DetError::EmptyDataset);
        }
        Ok(Dataset {
            columns,
            values,
            weights,
        })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn dims(&self) -> usize {
        self.columns.len()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dims();
        &self.values[i * d..(i + 1) * d]
    }

    #[inline]
    pub fn coord(&self, i: usize, d: usize) -> f64 {
        self.values[i * self.columns.len() + d]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dims())
    }

    /// Keeps only the rows for which `keep` is true.
    pub fn filter(&self, mut keep: impl FnMut(usize, &[f64]) -> bool) -> Result<Dataset> {
        let mut values = Vec::new();
        let mut weights = Vec::new();
        for (i, p) in self.points().enumerate() {
            if keep(i, p) {
                values.extend_from_slice(p);
                weights.push(self.weights[i]);
            }
        }
        Dataset::from_flat(self.columns.clone(), values, Some(weights))
    }

    /// Index of a column by name.
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}
