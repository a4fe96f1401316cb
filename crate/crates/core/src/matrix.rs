use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{Kind, Role, Table};

/// Dense row-major matrix of `f64`. Missing cells, when allowed, are `NaN`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Matrix {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn from_row_major(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::DimensionMismatch {
                expected: n_rows * n_cols,
                got: data.len(),
            });
        }
        Ok(Matrix {
            n_rows,
            n_cols,
            data,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for r in rows {
            if r.len() != n_cols {
                return Err(Error::DimensionMismatch {
                    expected: n_cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            n_rows: rows.len(),
            n_cols,
            data,
        })
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let n_cols = columns.len();
        let n_rows = columns.first().map_or(0, Vec::len);
        let mut m = Matrix::zeros(n_rows, n_cols);
        for (j, c) in columns.iter().enumerate() {
            if c.len() != n_rows {
                return Err(Error::DimensionMismatch {
                    expected: n_rows,
                    got: c.len(),
                });
            }
            for (i, v) in c.iter().enumerate() {
                m.data[i * n_cols + j] = *v;
            }
        }
        Ok(m)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n_cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, j)).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.n_cols).map(|j| self.column(j)).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        for (i, v) in values.iter().enumerate() {
            self.set(i, j, *v);
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * self.n_cols);
        for &i in rows {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            n_rows: rows.len(),
            n_cols: self.n_cols,
            data,
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.n_rows * cols.len());
        for i in 0..self.n_rows {
            let row = self.row(i);
            data.extend(cols.iter().map(|&j| row[j]));
        }
        Matrix {
            n_rows: self.n_rows,
            n_cols: cols.len(),
            data,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Modeling view of a table: feature matrix plus target vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub names: Vec<String>,
    pub kinds: Vec<Kind>,
    pub x: Matrix,
    pub y: Vec<f64>,
    pub target: String,
}

impl Design {
    /// Features are every `Role::Feature` column; unobserved cells become `NaN`.
    /// Rows whose target is unobserved are dropped.
    pub fn from_table(table: &Table) -> Result<Self> {
        let target_idx = table.target_index()?;
        let target_col = &table.columns()[target_idx];
        let rows: Vec<usize> = (0..table.n_rows())
            .filter(|&i| target_col.observed[i])
            .collect();
        let feats: Vec<usize> = table
            .columns()
            .iter()
            .enumerate()
            .filter(|(_, c)| c.meta.role == Role::Feature)
            .map(|(j, _)| j)
            .collect();
        let columns: Vec<Vec<f64>> = feats
            .iter()
            .map(|&j| {
                let c = &table.columns()[j];
                rows.iter()
                    .map(|&i| if c.observed[i] { c.values[i] } else { f64::NAN })
                    .collect()
            })
            .collect();
        let x = if columns.is_empty() {
            Matrix::zeros(rows.len(), 0)
        } else {
            Matrix::from_columns(&columns)?
        };
        Ok(Design {
            names: feats
                .iter()
                .map(|&j| table.columns()[j].meta.name.clone())
                .collect(),
            kinds: feats.iter().map(|&j| table.columns()[j].meta.kind).collect(),
            x,
            y: rows.iter().map(|&i| target_col.values[i]).collect(),
            target: target_col.meta.name.clone(),
        })
    }

    pub fn from_parts(names: Vec<String>, x: Matrix, y: Vec<f64>) -> Result<Self> {
        if names.len() != x.n_cols() {
            return Err(Error::DimensionMismatch {
                expected: x.n_cols(),
                got: names.len(),
            });
        }
        if y.len() != x.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: x.n_rows(),
                got: y.len(),
            });
        }
        Ok(Design {
            kinds: vec![Kind::Continuous; names.len()],
            names,
            x,
            y,
            target: "y".to_string(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.x.n_rows()
    }

    pub fn n_features(&self) -> usize {
        self.x.n_cols()
    }

    pub fn feature_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn require_complete(&self) -> Result<()> {
        for j in 0..self.n_features() {
            if (0..self.n_rows()).any(|i| !self.x.get(i, j).is_finite()) {
                return Err(Error::MissingValues(self.names[j].clone()));
            }
        }
        if self.y.iter().any(|v| !v.is_finite()) {
            return Err(Error::MissingValues(self.target.clone()));
        }
        Ok(())
    }

    pub fn select_rows(&self, rows: &[usize]) -> Design {
        Design {
            names: self.names.clone(),
            kinds: self.kinds.clone(),
            x: self.x.select_rows(rows),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            target: self.target.clone(),
        }
    }

    pub fn select_features(&self, features: &[usize]) -> Design {
        Design {
            names: features.iter().map(|&j| self.names[j].clone()).collect(),
            kinds: features.iter().map(|&j| self.kinds[j]).collect(),
            x: self.x.select_columns(features),
            y: self.y.clone(),
            target: self.target.clone(),
        }
    }

    pub fn select_named(&self, names: &[String]) -> Result<Design> {
        let idx = names
            .iter()
            .map(|n| self.feature_index(n))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select_features(&idx))
    }
}
