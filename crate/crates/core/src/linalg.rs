//! Householder-QR least squares with a column-relative rank check.
//!
//! A design column is declared dependent when its component orthogonal to
//! all earlier columns, `|R_jj|`, falls below `RANK_TOL * ‖column_j‖`.
//! The first such column is reported by name.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

pub const RANK_TOL: f64 = 1e-10;

/// Thin QR factorisation of a full-column-rank design.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl LeastSquares {
    /// Factorises `design` (n×p, n >= p). `label(j)` names column `j` for
    /// the singular-design error.
    pub fn new(design: &DMatrix<f64>, label: impl Fn(usize) -> String) -> Result<Self> {
        let (n, p) = design.shape();
        if n < p {
            return Err(Error::InsufficientSamples { rows: n, required: p });
        }
        let qr = design.clone().qr();
        let r = qr.r();
        for j in 0..p {
            let scale = design.column(j).norm();
            if scale == 0.0 || r[(j, j)].abs() <= RANK_TOL * scale {
                return Err(Error::SingularDesign { column: label(j) });
            }
        }
        Ok(Self { q: qr.q(), r })
    }

    pub fn n_rows(&self) -> usize {
        self.q.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.r.ncols()
    }

    /// Least-squares coefficients `argmin ‖y - D c‖`.
    pub fn solve(&self, y: &DVector<f64>) -> DVector<f64> {
        let qty = self.q.tr_mul(y);
        self.r
            .solve_upper_triangular(&qty)
            .expect("R has a nonzero diagonal after the rank check")
    }

    pub fn fitted(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.q * self.q.tr_mul(y)
    }

    /// `(D'D)^{-1} = R^{-1} R^{-T}`.
    pub fn gram_inverse(&self) -> DMatrix<f64> {
        let p = self.n_cols();
        let r_inv = self
            .r
            .solve_upper_triangular(&DMatrix::identity(p, p))
            .expect("R has a nonzero diagonal after the rank check");
        &r_inv * r_inv.transpose()
    }

    /// The linear map `y -> c[p-t..p]` giving the last `t` coefficients,
    /// as a t×n matrix: `R22^{-1} Q2'`.
    pub fn trailing_coefficient_map(&self, t: usize) -> DMatrix<f64> {
        let p = self.n_cols();
        assert!(t <= p);
        let r22 = self.r.view((p - t, p - t), (t, t)).into_owned();
        let q2t = self.q.columns(p - t, t).transpose();
        r22.solve_upper_triangular(&q2t)
            .expect("R has a nonzero diagonal after the rank check")
    }
}

/// `[1, blocks...]` column-concatenated, with an optional leading column of ones.
pub fn stack_design(rows: usize, intercept: bool, blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let cols = usize::from(intercept) + blocks.iter().map(|b| b.ncols()).sum::<usize>();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    if intercept {
        out.column_mut(0).fill(1.0);
        at = 1;
    }
    for b in blocks {
        out.columns_mut(at, b.ncols()).copy_from(*b);
        at += b.ncols();
    }
    out
}

/// Columns centred to zero mean; returns the means too.
pub fn center_columns(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let means = DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.mean()));
    let mut c = m.clone();
    for (j, mut col) in c.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    (c, means)
}

pub fn center(v: &DVector<f64>) -> (DVector<f64>, f64) {
    let mean = v.mean();
    (v.add_scalar(-mean), mean)
}

/// Gathers `v[perm[i]]` into a new vector.
pub fn permuted(v: &DVector<f64>, perm: &[usize]) -> DVector<f64> {
    DVector::from_iterator(v.len(), perm.iter().map(|&i| v[i]))
}

pub(crate) fn select(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

pub(crate) fn identity_perm(n: usize) -> Vec<usize> {
    (0..n).collect()
}
