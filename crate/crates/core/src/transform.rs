//! Norm-induced feature transformation `g(x, W)_j = -1/2 ||x - w_j||^2`.
//!
//! Each output coordinate is the negated half squared distance from the input
//! to one learnable anchor row `w_j`, so every coordinate is non-positive and
//! coordinate `j` depends only on `x` and `w_j`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::features::{FeatureBank, Record};
use crate::linalg;
use crate::scalar::Scalar;

/// Square `d x d` matrix whose row `j` is the anchor of output coordinate `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformMatrix<T> {
    rows: Array2<T>,
}

impl<T: Scalar> TransformMatrix<T> {
    pub fn from_array(rows: Array2<T>) -> Result<Self> {
        if rows.nrows() != rows.ncols() {
            return Err(Error::DimensionMismatch {
                expected: rows.nrows(),
                got: rows.ncols(),
            });
        }
        if !linalg::all_finite(rows.iter().copied()) {
            return Err(Error::NonFinite("transform matrix"));
        }
        Ok(Self { rows })
    }

    pub fn dim(&self) -> usize {
        self.rows.nrows()
    }

    pub fn row(&self, j: usize) -> ArrayView1<'_, T> {
        self.rows.row(j)
    }

    pub fn as_array(&self) -> &Array2<T> {
        &self.rows
    }

    pub(crate) fn as_array_mut(&mut self) -> &mut Array2<T> {
        &mut self.rows
    }

    /// Rows as a feature table with the row index as class id (checkpoint dumps).
    pub fn to_feature_bank(&self) -> FeatureBank<T> {
        let records = self
            .rows
            .outer_iter()
            .enumerate()
            .map(|(j, r)| Record {
                class_id: j as u64,
                vector: r.to_vec(),
            })
            .collect();
        FeatureBank::new(self.dim(), records).expect("square finite matrix")
    }
}

/// Output of `g`, before and after L2 normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedFeature<T> {
    pub raw: Vec<T>,
    pub normalized: Vec<T>,
}

pub fn apply_transform<T: Scalar>(
    x: &[T],
    w: &TransformMatrix<T>,
) -> Result<TransformedFeature<T>> {
    if x.len() != w.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.dim(),
            got: x.len(),
        });
    }
    if !linalg::all_finite(x.iter().copied()) {
        return Err(Error::NonFinite("transform input"));
    }
    let half = T::lit(0.5);
    let raw: Vec<T> = w
        .rows
        .outer_iter()
        .map(|wj| -half * linalg::sq_dist(x, wj.as_slice().expect("standard layout")))
        .collect();
    let n = linalg::norm(&raw);
    if n == T::zero() {
        return Err(Error::DegenerateTransform { sample: 0 });
    }
    let normalized = raw.iter().map(|&r| r / n).collect();
    Ok(TransformedFeature { raw, normalized })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitMode {
    /// `W = X_s^T X_s` over the normalized support rows.
    Gram,
    /// Every row is the mean support vector plus `epsilon` on its own coordinate.
    /// Diagnostic only.
    IdentityLike { epsilon: f64 },
}

pub fn init_transform<T: Scalar>(
    support: ArrayView2<'_, T>,
    mode: InitMode,
) -> Result<TransformMatrix<T>> {
    for (i, n) in linalg::row_norms(support).iter().enumerate() {
        if (n.as_f64() - 1.0).abs() > 1e-6 {
            return Err(Error::NotNormalized {
                index: i,
                norm: n.as_f64(),
            });
        }
    }
    let d = support.ncols();
    let rows = match mode {
        InitMode::Gram => support.t().dot(&support),
        InitMode::IdentityLike { epsilon } => {
            let mean = support
                .mean_axis(Axis(0))
                .ok_or_else(|| Error::InsufficientData("no support rows".into()))?;
            let mut rows = Array2::from_shape_fn((d, d), |(_, k)| mean[k]);
            for j in 0..d {
                rows[[j, j]] = rows[[j, j]] + T::lit(epsilon);
            }
            rows
        }
    };
    TransformMatrix::from_array(rows)
}

/// Exact partials of `raw = g(x, W)`.
///
/// `d_raw_d_w` row `j` is `d raw[j] / d w_j = x - w_j`; derivatives with
/// respect to any other row vanish. `d_raw_d_x` row `j` is `-(x - w_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformJacobians<T> {
    pub d_raw_d_w: Array2<T>,
    pub d_raw_d_x: Array2<T>,
}

pub fn transform_jacobians<T: Scalar>(
    x: &[T],
    w: &TransformMatrix<T>,
) -> Result<TransformJacobians<T>> {
    if x.len() != w.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.dim(),
            got: x.len(),
        });
    }
    let xv = ArrayView1::from(x);
    let mut d_raw_d_w = Array2::zeros((w.dim(), w.dim()));
    for (j, wj) in w.rows.outer_iter().enumerate() {
        d_raw_d_w.row_mut(j).assign(&(&xv - &wj));
    }
    let d_raw_d_x = d_raw_d_w.mapv(|v| -v);
    Ok(TransformJacobians {
        d_raw_d_w,
        d_raw_d_x,
    })
}

/// Raw transform of every row of `x` via the expanded form
/// `-1/2 (||x||^2 - 2 x.w_j + ||w_j||^2)`.
pub fn transform_rows<T: Scalar>(x: ArrayView2<'_, T>, w: &TransformMatrix<T>) -> Array2<T> {
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let xw = x.dot(&w.rows.t());
    let x_sq: Array1<T> = x.map_axis(Axis(1), |r| r.dot(&r));
    let w_sq: Array1<T> = w.rows.map_axis(Axis(1), |r| r.dot(&r));
    let mut out = xw;
    for ((i, j), v) in out.indexed_iter_mut() {
        *v = -half * (x_sq[i] - two * *v + w_sq[j]);
    }
    out
}

/// Pulls `grad_raw` (n x d, gradient w.r.t. each raw output) back to `W`:
/// `grad w_j = sum_i grad_raw[i, j] (x_i - w_j)`.
pub fn backprop_to_rows<T: Scalar>(
    x: ArrayView2<'_, T>,
    w: &TransformMatrix<T>,
    grad_raw: ArrayView2<'_, T>,
) -> Array2<T> {
    let mut g = grad_raw.t().dot(&x);
    let col_sums = grad_raw.sum_axis(Axis(0));
    for (j, mut row) in g.outer_iter_mut().enumerate() {
        row.scaled_add(-col_sums[j], &w.rows.row(j));
    }
    g
}
