use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Target `y` (length ℓ), candidate causes `x` (ℓ×d) and background
/// features `w` (ℓ×q), with optional column labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: DVector<f64>,
    x: DMatrix<f64>,
    w: DMatrix<f64>,
    names_x: Vec<String>,
    names_w: Vec<String>,
}

impl Dataset {
    pub fn new(y: DVector<f64>, x: DMatrix<f64>, w: DMatrix<f64>) -> Result<Self> {
        let names_x = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
        let names_w = (1..=w.ncols()).map(|j| format!("w{j}")).collect();
        Self::with_names(y, x, w, names_x, names_w)
    }

    pub fn with_names(
        y: DVector<f64>,
        x: DMatrix<f64>,
        w: DMatrix<f64>,
        names_x: Vec<String>,
        names_w: Vec<String>,
    ) -> Result<Self> {
        let rows = y.len();
        if rows == 0 {
            return Err(Error::InsufficientSamples { rows, required: 1 });
        }
        if x.nrows() != rows || w.nrows() != rows {
            return Err(Error::DimensionMismatch(format!(
                "y has {rows} rows, x has {}, w has {}",
                x.nrows(),
                w.nrows()
            )));
        }
        if x.ncols() == 0 {
            return Err(Error::DimensionMismatch("x needs at least one column".into()));
        }
        if names_x.len() != x.ncols() || names_w.len() != w.ncols() {
            return Err(Error::DimensionMismatch("column name count does not match".into()));
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("y".into()));
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("x".into()));
        }
        if !w.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("w".into()));
        }
        Ok(Self { y, x, w, names_x, names_w })
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }
    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }
    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }
    pub fn names_x(&self) -> &[String] {
        &self.names_x
    }
    pub fn names_w(&self) -> &[String] {
        &self.names_w
    }

    /// ℓ
    pub fn rows(&self) -> usize {
        self.y.len()
    }
    /// d
    pub fn n_causes(&self) -> usize {
        self.x.ncols()
    }
    /// q
    pub fn n_background(&self) -> usize {
        self.w.ncols()
    }

    /// Same data with `y` replaced.
    pub fn with_target(&self, y: DVector<f64>) -> Result<Self> {
        Self::with_names(y, self.x.clone(), self.w.clone(), self.names_x.clone(), self.names_w.clone())
    }

    /// Keeps only the listed background columns, in the given order.
    pub fn select_background(&self, columns: &[usize]) -> Result<Self> {
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.w.ncols()) {
            return Err(Error::InvalidSubset(format!(
                "background column {bad} out of range (q = {})",
                self.w.ncols()
            )));
        }
        let w = self.w.select_columns(columns);
        let names = columns.iter().map(|&c| self.names_w[c].clone()).collect();
        Self::with_names(self.y.clone(), self.x.clone(), w, self.names_x.clone(), names)
    }

    /// Keeps only the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.rows()) {
            return Err(Error::InvalidSubset(format!("row {bad} out of range")));
        }
        Self::with_names(
            self.y.select_rows(rows),
            self.x.select_rows(rows),
            self.w.select_rows(rows),
            self.names_x.clone(),
            self.names_w.clone(),
        )
    }
}

/// The background index sets S_1..S_m over ambient dimension q.
///
/// Each subset is nonempty, strictly increasing, and a proper subset of
/// `0..q`. Repeats across subsets are allowed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubsetFamily {
    q: usize,
    subsets: Vec<Vec<usize>>,
}

impl SubsetFamily {
    pub fn new(q: usize, subsets: Vec<Vec<usize>>) -> Result<Self> {
        if subsets.is_empty() {
            return Err(Error::InvalidSubset("family needs at least one subset".into()));
        }
        for (j, s) in subsets.iter().enumerate() {
            if s.is_empty() {
                return Err(Error::InvalidSubset(format!("subset {j} is empty")));
            }
            if s.len() >= q {
                return Err(Error::InvalidSubset(format!(
                    "subset {j} has {} of {q} features; subsets must be proper",
                    s.len()
                )));
            }
            if s.windows(2).any(|p| p[0] >= p[1]) {
                return Err(Error::InvalidSubset(format!("subset {j} is not strictly increasing")));
            }
            if s[s.len() - 1] >= q {
                return Err(Error::InvalidSubset(format!("subset {j} has an index >= q = {q}")));
            }
        }
        Ok(Self { q, subsets })
    }

    pub fn q(&self) -> usize {
        self.q
    }
    /// m
    pub fn len(&self) -> usize {
        self.subsets.len()
    }
    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }
    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }
    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.subsets.iter().map(|s| s.as_slice())
    }

    /// Complement of subset `j` within `0..q`.
    pub fn complement(&self, j: usize) -> Vec<usize> {
        complement(&self.subsets[j], self.q)
    }

    /// Re-expresses subsets over a visible pool as indices into the full
    /// space: subset entry `i` becomes `pool[i]`.
    pub fn lift(&self, pool: &[usize], q_full: usize) -> Result<Self> {
        if pool.len() != self.q {
            return Err(Error::DimensionMismatch(format!(
                "pool has {} columns, family is over {}",
                pool.len(),
                self.q
            )));
        }
        let subsets = self
            .subsets
            .iter()
            .map(|s| {
                let mut lifted: Vec<usize> = s.iter().map(|&i| pool[i]).collect();
                lifted.sort_unstable();
                lifted
            })
            .collect();
        Self::new(q_full, subsets)
    }
}

pub(crate) fn complement(subset: &[usize], q: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(q.saturating_sub(subset.len()));
    let mut it = subset.iter().peekable();
    for i in 0..q {
        if it.peek() == Some(&&i) {
            it.next();
        } else {
            out.push(i);
        }
    }
    out
}
