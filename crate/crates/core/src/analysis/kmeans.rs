use ndarray::Array2;

use super::{kmeans_grad_w, transformed, AssignmentMatrix, FeatureMode};
use crate::error::{Error, Result};
use crate::features::Task;
use crate::linalg;
use crate::scalar::Scalar;
use crate::transform::{init_transform, InitMode, TransformMatrix};

/// `J(W, theta, Q) = sum_i sum_c q_ic ||theta_c - g(x_i, W)||^2` over the queries.
pub fn kmeans_objective<T: Scalar>(
    task: &Task<T>,
    w: &TransformMatrix<T>,
    prototypes: &Array2<T>,
    assignments: &AssignmentMatrix<T>,
    mode: FeatureMode,
) -> Result<T> {
    let g = transformed(task.query().view(), w, mode)?;
    objective_on(&g, prototypes, assignments.rows())
}

pub(crate) fn objective_on<T: Scalar>(
    g: &Array2<T>,
    prototypes: &Array2<T>,
    q: &Array2<T>,
) -> Result<T> {
    if q.nrows() != g.nrows() || q.ncols() != prototypes.nrows() {
        return Err(Error::DimensionMismatch {
            expected: g.nrows(),
            got: q.nrows(),
        });
    }
    if prototypes.ncols() != g.ncols() {
        return Err(Error::DimensionMismatch {
            expected: g.ncols(),
            got: prototypes.ncols(),
        });
    }
    let d = linalg::pairwise_sq_dists(g.view(), prototypes.view());
    Ok(d.iter().zip(q.iter()).map(|(&d, &q)| q * d).sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub max_rounds: usize,
    pub w_steps_per_round: usize,
    pub lr_w: f64,
    /// Stop once a full round lowers `J` by no more than this.
    pub tol: f64,
    pub mode: FeatureMode,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            max_rounds: 100,
            w_steps_per_round: 1,
            lr_w: 1e-3,
            tol: 1e-12,
            mode: FeatureMode::Raw,
        }
    }
}

/// `J` after each half-step of one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansRound<T> {
    pub after_assignment: T,
    pub after_prototypes: T,
    pub after_w: T,
    pub reassigned: usize,
}

#[derive(Debug, Clone)]
pub struct KMeansRun<T> {
    pub w: TransformMatrix<T>,
    pub prototypes: Array2<T>,
    pub assignments: AssignmentMatrix<T>,
    pub trace: Vec<KMeansRound<T>>,
}

/// Alternating minimization of `J` over hard assignments, prototypes and `W`.
///
/// `W` starts from the support Gram matrix and each prototype from its
/// transformed support feature. A class left without members keeps its
/// previous prototype.
pub fn alternate_kmeans<T: Scalar>(task: &Task<T>, cfg: &KMeansConfig) -> Result<KMeansRun<T>> {
    let classes = task.num_classes();
    let x = task.query().view();
    let mut w = init_transform(task.support().view(), InitMode::Gram)?;
    let support_g = transformed(task.support().view(), &w, cfg.mode)?;
    let mut prototypes = linalg::class_means(support_g.view(), task.support_labels(), classes);
    let mut labels: Vec<usize> = vec![usize::MAX; x.nrows()];
    let mut trace = Vec::new();
    let lr = T::lit(cfg.lr_w);

    for _ in 0..cfg.max_rounds {
        let g = transformed(x, &w, cfg.mode)?;
        let d = linalg::pairwise_sq_dists(g.view(), prototypes.view());
        let mut reassigned = 0;
        for (i, row) in d.outer_iter().enumerate() {
            // keep the current label on ties so J cannot increase
            let mut best = if labels[i] < classes { labels[i] } else { 0 };
            for (c, &v) in row.iter().enumerate() {
                if v < row[best] {
                    best = c;
                }
            }
            if best != labels[i] {
                reassigned += 1;
                labels[i] = best;
            }
        }
        let q = AssignmentMatrix::hard(&labels, classes)?;
        let after_assignment = objective_on(&g, &prototypes, q.rows())?;

        let means = linalg::class_means(g.view(), &labels, classes);
        let mut counts = vec![0usize; classes];
        labels.iter().for_each(|&l| counts[l] += 1);
        for c in 0..classes {
            if counts[c] > 0 {
                prototypes.row_mut(c).assign(&means.row(c));
            }
        }
        let after_prototypes = objective_on(&g, &prototypes, q.rows())?;

        for _ in 0..cfg.w_steps_per_round {
            if cfg.lr_w == 0.0 {
                break;
            }
            let grad = kmeans_grad_w(x, &w, &prototypes, q.rows(), cfg.mode)?;
            let mut next = w.as_array().clone();
            next.scaled_add(-lr, &grad);
            w = TransformMatrix::from_array(next)?;
        }
        let after_w = if cfg.w_steps_per_round > 0 && cfg.lr_w != 0.0 {
            objective_on(&transformed(x, &w, cfg.mode)?, &prototypes, q.rows())?
        } else {
            after_prototypes
        };

        let previous = trace.last().map(|r: &KMeansRound<T>| r.after_w);
        trace.push(KMeansRound {
            after_assignment,
            after_prototypes,
            after_w,
            reassigned,
        });
        let converged = match previous {
            Some(p) => (p - after_w).as_f64() <= cfg.tol && reassigned == 0,
            None => false,
        };
        if converged {
            break;
        }
    }
    let assignments = AssignmentMatrix::hard(&labels, classes)?;
    Ok(KMeansRun {
        w,
        prototypes,
        assignments,
        trace,
    })
}
