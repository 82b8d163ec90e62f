//! Numerical companions to the K-means reading of the transformation: the
//! mixed K-means objective, its alternating minimization, the split of the
//! conditional entropy into a clustering and a dispersion term, the soft
//! K-means bound with an entropy barrier, and a majorize-minimize harness.
//!
//! Unless [`FeatureMode::Normalized`] is requested, everything here works on
//! the raw transform outputs `g(x, W)` of the query rows.

mod bound;
mod kmeans;

#[doc(hidden)]
pub use bound::entropy_decomposition_scaled;
pub use bound::{
    bound_check, bound_check_with_sweep, bound_stationarity, entropy_decomposition,
    exact_bound_minimizer, gap_trace_csv, kkt_soft_assignments, mm_iteration, BoundCheck, GapRow,
    MmAssignments, MmConfig, MmRound, ObjectiveBreakdown, TAU_SWEEP,
};
pub use kmeans::{alternate_kmeans, kmeans_objective, KMeansConfig, KMeansRound, KMeansRun};

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::features::Task;
use crate::scalar::Scalar;
use crate::tim::{feature_forward, FeatureSpace};
use crate::transform::{backprop_to_rows, transform_rows, TransformMatrix};

/// Which version of the transformed features the analysis uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureMode {
    /// `g(x, W)` as is.
    #[default]
    Raw,
    /// `g(x, W) / ||g(x, W)||`, as seen by the inference loop.
    Normalized,
}

/// Rows of simplex vectors assigning each query to the classes.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentMatrix<T> {
    rows: Array2<T>,
    hard: bool,
}

impl<T: Scalar> AssignmentMatrix<T> {
    pub fn soft(rows: Array2<T>) -> Result<Self> {
        for (i, row) in rows.outer_iter().enumerate() {
            let sum = row.sum().as_f64();
            if row.iter().any(|&v| v < T::zero() || !v.is_finite())
                || (sum - 1.0).abs() > T::ASSIGNMENT_TOL
            {
                return Err(Error::InvalidConfig(format!(
                    "assignment row {i} is not on the simplex"
                )));
            }
        }
        let hard = rows.iter().all(|&v| v == T::zero() || v == T::one());
        Ok(Self { rows, hard })
    }

    pub fn hard(labels: &[usize], classes: usize) -> Result<Self> {
        let mut rows = Array2::zeros((labels.len(), classes));
        for (i, &l) in labels.iter().enumerate() {
            if l >= classes {
                return Err(Error::InvalidConfig(format!("label {l} out of range")));
            }
            rows[[i, l]] = T::one();
        }
        Ok(Self { rows, hard: true })
    }

    pub fn rows(&self) -> &Array2<T> {
        &self.rows
    }

    pub fn is_hard(&self) -> bool {
        self.hard
    }

    pub fn labels(&self) -> Vec<usize> {
        self.rows.outer_iter().map(crate::linalg::argmax).collect()
    }
}

pub(crate) fn transformed<T: Scalar>(
    x: ArrayView2<'_, T>,
    w: &TransformMatrix<T>,
    mode: FeatureMode,
) -> Result<Array2<T>> {
    match mode {
        FeatureMode::Raw => Ok(transform_rows(x, w)),
        FeatureMode::Normalized => Ok(feature_forward(x, w, FeatureSpace::NormInduced)?.features),
    }
}

/// Gradient of `J` with respect to `W` for fixed prototypes and assignments.
pub fn kmeans_gradient_w<T: Scalar>(
    task: &Task<T>,
    w: &TransformMatrix<T>,
    prototypes: &Array2<T>,
    assignments: &AssignmentMatrix<T>,
    mode: FeatureMode,
) -> Result<Array2<T>> {
    kmeans_grad_w(task.query().view(), w, prototypes, assignments.rows(), mode)
}

pub(crate) fn kmeans_grad_w<T: Scalar>(
    x: ArrayView2<'_, T>,
    w: &TransformMatrix<T>,
    prototypes: &Array2<T>,
    q: &Array2<T>,
    mode: FeatureMode,
) -> Result<Array2<T>> {
    let fwd = match mode {
        FeatureMode::Raw => None,
        FeatureMode::Normalized => Some(feature_forward(x, w, FeatureSpace::NormInduced)?),
    };
    let g = match &fwd {
        Some(f) => f.features.clone(),
        None => transform_rows(x, w),
    };
    // dJ/dg_i = 2 sum_c q_ic (g_i - theta_c)
    let two = T::lit(2.0);
    let q_sum = q.sum_axis(ndarray::Axis(1));
    let mut grad = q.dot(prototypes);
    for (mut r, (gi, &s)) in grad.outer_iter_mut().zip(g.outer_iter().zip(&q_sum)) {
        r.zip_mut_with(&gi, |a, &b| *a = two * (s * b - *a));
    }
    Ok(match fwd {
        None => backprop_to_rows(x, w, grad.view()),
        Some(f) => crate::tim::objective_backward(&f, x, w, FeatureSpace::NormInduced, &grad),
    })
}
