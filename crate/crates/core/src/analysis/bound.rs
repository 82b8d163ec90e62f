use std::fmt::Write as _;

use ndarray::{Array2, Axis};

use super::kmeans::objective_on;
use super::{kmeans_grad_w, transformed, AssignmentMatrix, FeatureMode};
use crate::error::{Error, Result};
use crate::features::Task;
use crate::linalg;
use crate::scalar::Scalar;
use crate::transform::TransformMatrix;

/// Temperatures swept when checking how the bound tightens.
pub const TAU_SWEEP: [f64; 4] = [1.0, 0.1, 0.01, 0.001];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveBreakdown<T> {
    /// `-sum_i sum_c p_ic log p_ic`.
    pub conditional_entropy: T,
    /// `J` at the soft assignments `q = p`.
    pub kmeans_value: T,
    /// `H = sum_i sum_c p_ic ||theta_c - g_i||^2`.
    pub clustering_term: T,
    /// `sum_i log sum_c exp(-(tau/2) ||theta_c - g_i||^2)`.
    pub dispersion_term: T,
    /// `(tau/2) sum_i q_i . log q_i` at `q = p`; never positive.
    pub entropy_barrier: T,
    pub bound_value: T,
}

fn distances<T: Scalar>(
    task: &Task<T>,
    w: &TransformMatrix<T>,
    prototypes: &Array2<T>,
    mode: FeatureMode,
) -> Result<Array2<T>> {
    let g = transformed(task.query().view(), w, mode)?;
    if prototypes.ncols() != g.ncols() {
        return Err(Error::DimensionMismatch {
            expected: g.ncols(),
            got: prototypes.ncols(),
        });
    }
    Ok(linalg::pairwise_sq_dists(g.view(), prototypes.view()))
}

fn softmax_scaled<T: Scalar>(d: &Array2<T>, scale: T) -> Array2<T> {
    linalg::softmax_rows(d.mapv(|v| -scale * v).view())
}

fn barrier<T: Scalar>(q: &Array2<T>, tau: T) -> T {
    let s: T = q
        .iter()
        .filter(|&&v| v > T::zero())
        .map(|&v| v * v.ln())
        .sum();
    tau * T::lit(0.5) * s
}

/// Splits the conditional entropy of the distance-softmax posteriors into
/// `(tau/2) * clustering + dispersion` and checks that the split is exact.
pub fn entropy_decomposition<T: Scalar>(
    task: &Task<T>,
    w: &TransformMatrix<T>,
    prototypes: &Array2<T>,
    tau: f64,
    mode: FeatureMode,
) -> Result<ObjectiveBreakdown<T>> {
    entropy_decomposition_scaled(task, w, prototypes, tau, mode, 1.0)
}

/// Same as [`entropy_decomposition`] with the clustering coefficient
/// multiplied by `clustering_scale`; anything but 1 breaks the identity.
#[doc(hidden)]
pub fn entropy_decomposition_scaled<T: Scalar>(
    task: &Task<T>,
    w: &TransformMatrix<T>,
    prototypes: &Array2<T>,
    tau: f64,
    mode: FeatureMode,
    clustering_scale: f64,
) -> Result<ObjectiveBreakdown<T>> {
    let tau_t = T::lit(tau);
    let half_tau = tau_t * T::lit(0.5);
    let d = distances(task, w, prototypes, mode)?;
    let logits = d.mapv(|v| -half_tau * v);
    let p = linalg::softmax_rows(logits.view());

    let mut conditional_entropy = T::zero();
    let mut dispersion_term = T::zero();
    for (lrow, prow) in logits.outer_iter().zip(p.outer_iter()) {
        let lse = linalg::log_sum_exp(lrow);
        dispersion_term = dispersion_term + lse;
        // log p = logit - lse, exact even where p underflows
        conditional_entropy = conditional_entropy
            - prow
                .iter()
                .zip(lrow.iter())
                .map(|(&pc, &lc)| pc * (lc - lse))
                .sum::<T>();
    }
    let clustering_term: T = p.iter().zip(d.iter()).map(|(&pc, &dc)| pc * dc).sum();
    let rhs = T::lit(clustering_scale) * half_tau * clustering_term + dispersion_term;
    let residual = (conditional_entropy - rhs).abs().as_f64();
    let scale = conditional_entropy.abs().as_f64().max(1.0);
    if !(residual <= 1e-8 * scale) {
        return Err(Error::IdentityViolation { residual });
    }
    let entropy_barrier = barrier(&p, tau_t);
    Ok(ObjectiveBreakdown {
        conditional_entropy,
        kmeans_value: clustering_term,
        clustering_term,
        dispersion_term,
        entropy_barrier,
        bound_value: clustering_term + entropy_barrier,
    })
}

/// Closed-form assignments stated for the soft K-means bound: the
/// distance-softmax posteriors `softmax(-(tau/2) d)`.
///
/// The exact minimizer of `J + (tau/2) sum q log q` is
/// `softmax(-(2/tau) d)` ([`exact_bound_minimizer`]); the two agree only
/// when all distances in a row coincide.
pub fn kkt_soft_assignments<T: Scalar>(
    task: &Task<T>,
    w: &TransformMatrix<T>,
    prototypes: &Array2<T>,
    tau: f64,
    mode: FeatureMode,
) -> Result<AssignmentMatrix<T>> {
    let d = distances(task, w, prototypes, mode)?;
    AssignmentMatrix::soft(softmax_scaled(&d, T::lit(tau * 0.5)))
}

/// Minimizer of `J + (tau/2) sum q log q` over each row's simplex.
pub fn exact_bound_minimizer<T: Scalar>(
    task: &Task<T>,
    w: &TransformMatrix<T>,
    prototypes: &Array2<T>,
    tau: f64,
    mode: FeatureMode,
) -> Result<AssignmentMatrix<T>> {
    let d = distances(task, w, prototypes, mode)?;
    AssignmentMatrix::soft(softmax_scaled(&d, T::lit(2.0 / tau)))
}

/// Largest first-order optimality violation of `assignments` for
/// `J + (tau/2) sum q log q`: per row, the spread of
/// `d_c + (tau/2)(log q_c + 1)` over entries with `q_c > 1e-12`.
/// Zero (up to rounding) exactly at the row-wise minimizer.
pub fn bound_stationarity<T: Scalar>(
    task: &Task<T>,
    w: &TransformMatrix<T>,
    prototypes: &Array2<T>,
    tau: f64,
    assignments: &AssignmentMatrix<T>,
    mode: FeatureMode,
) -> Result<f64> {
    let d = distances(task, w, prototypes, mode)?;
    if assignments.rows().dim() != d.dim() {
        return Err(Error::DimensionMismatch {
            expected: d.nrows(),
            got: assignments.rows().nrows(),
        });
    }
    let half_tau = tau * 0.5;
    let mut worst = 0.0f64;
    for (qrow, drow) in assignments.rows().outer_iter().zip(d.outer_iter()) {
        let (lo, hi) = qrow
            .iter()
            .zip(drow.iter())
            .filter(|(q, _)| q.as_f64() > 1e-12)
            .map(|(q, dc)| dc.as_f64() + half_tau * (q.as_f64().ln() + 1.0))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), g| {
                (lo.min(g), hi.max(g))
            });
        worst = worst.max(hi - lo);
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    /// Clustering term `H` at `tau`.
    pub h_value: f64,
    /// `J(Q) + (tau/2) sum q log q` at the supplied assignments.
    pub bound_value: f64,
    /// `bound_value - h_value`; negative values are bound violations.
    pub gap: f64,
    /// Whether `|gap|` at the closed-form assignments shrinks strictly along the sweep.
    pub tight_at_kkt: bool,
    /// `(tau, gap at closed-form assignments)` for each swept temperature.
    pub sweep: Vec<(f64, f64)>,
}

/// Measures the bound at `assignments` and its tightening at the closed-form
/// assignments over [`TAU_SWEEP`]. Violations are reported, not raised.
pub fn bound_check<T: Scalar>(
    task: &Task<T>,
    w: &TransformMatrix<T>,
    prototypes: &Array2<T>,
    tau: f64,
    assignments: &AssignmentMatrix<T>,
    mode: FeatureMode,
) -> Result<BoundCheck> {
    bound_check_with_sweep(task, w, prototypes, tau, assignments, mode, &TAU_SWEEP)
}

pub fn bound_check_with_sweep<T: Scalar>(
    task: &Task<T>,
    w: &TransformMatrix<T>,
    prototypes: &Array2<T>,
    tau: f64,
    assignments: &AssignmentMatrix<T>,
    mode: FeatureMode,
    sweep_taus: &[f64],
) -> Result<BoundCheck> {
    let d = distances(task, w, prototypes, mode)?;
    let h_at = |t: f64| -> T {
        let p = softmax_scaled(&d, T::lit(t * 0.5));
        p.iter().zip(d.iter()).map(|(&a, &b)| a * b).sum()
    };
    let bound_at = |q: &Array2<T>, t: f64| -> T {
        q.iter().zip(d.iter()).map(|(&a, &b)| a * b).sum::<T>() + barrier(q, T::lit(t))
    };
    if assignments.rows().dim() != d.dim() {
        return Err(Error::DimensionMismatch {
            expected: d.nrows(),
            got: assignments.rows().nrows(),
        });
    }
    let h_value = h_at(tau).as_f64();
    let bound_value = bound_at(assignments.rows(), tau).as_f64();
    let sweep: Vec<(f64, f64)> = sweep_taus
        .iter()
        .map(|&t| {
            let q = softmax_scaled(&d, T::lit(t * 0.5));
            (t, (bound_at(&q, t) - h_at(t)).as_f64())
        })
        .collect();
    let tight_at_kkt = sweep.windows(2).all(|w| w[1].1.abs() < w[0].1.abs());
    Ok(BoundCheck {
        h_value,
        bound_value,
        gap: bound_value - h_value,
        tight_at_kkt,
        sweep,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MmAssignments {
    /// Closed-form soft assignments at the current parameters.
    #[default]
    Kkt,
    /// One-hot nearest-prototype assignments (reduces to Lloyd when `W` is frozen).
    Hard,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmConfig {
    pub w_steps: usize,
    pub lr_w: f64,
    pub mode: FeatureMode,
    pub assignments: MmAssignments,
}

impl Default for MmConfig {
    fn default() -> Self {
        Self {
            w_steps: 1,
            lr_w: 1e-3,
            mode: FeatureMode::Raw,
            assignments: MmAssignments::Kkt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmRound {
    pub h_before: f64,
    pub bound_before: f64,
    pub h_after: f64,
    pub bound_after: f64,
    /// `J` at this round's assignments after the prototype and `W` updates.
    pub kmeans_after: f64,
}

/// Majorize-minimize rounds on `H`: fix the assignments, move the prototypes
/// to the (weighted) class means, then take gradient steps on `W`.
pub fn mm_iteration<T: Scalar>(
    task: &Task<T>,
    init_w: &TransformMatrix<T>,
    init_prototypes: &Array2<T>,
    tau: f64,
    rounds: usize,
    cfg: &MmConfig,
) -> Result<Vec<MmRound>> {
    let x = task.query().view();
    let mut w = init_w.clone();
    let mut prototypes = init_prototypes.clone();
    let tau_t = T::lit(tau);
    let half_tau = T::lit(tau * 0.5);
    let h_of = |g: &Array2<T>, protos: &Array2<T>| -> T {
        let d = linalg::pairwise_sq_dists(g.view(), protos.view());
        let p = softmax_scaled(&d, half_tau);
        p.iter().zip(d.iter()).map(|(&a, &b)| a * b).sum()
    };
    let mut trace = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let g = transformed(x, &w, cfg.mode)?;
        let d = linalg::pairwise_sq_dists(g.view(), prototypes.view());
        let q = match cfg.assignments {
            MmAssignments::Kkt => softmax_scaled(&d, half_tau),
            MmAssignments::Hard => {
                let labels: Vec<usize> = d
                    .outer_iter()
                    .map(|r| linalg::argmax(r.mapv(|v| -v).view()))
                    .collect();
                AssignmentMatrix::hard(&labels, prototypes.nrows())?
                    .rows()
                    .clone()
            }
        };
        let h_before = h_of(&g, &prototypes).as_f64();
        let bound_before = (objective_on(&g, &prototypes, &q)? + barrier(&q, tau_t)).as_f64();

        let weights = q.sum_axis(Axis(0));
        let weighted = q.t().dot(&g);
        for (c, &wsum) in weights.iter().enumerate() {
            if wsum > T::zero() {
                prototypes
                    .row_mut(c)
                    .assign(&weighted.row(c).mapv(|v| v / wsum));
            }
        }
        for _ in 0..cfg.w_steps {
            if cfg.lr_w == 0.0 {
                break;
            }
            let grad = kmeans_grad_w(x, &w, &prototypes, &q, cfg.mode)?;
            let mut next = w.as_array().clone();
            next.scaled_add(-T::lit(cfg.lr_w), &grad);
            w = TransformMatrix::from_array(next)?;
        }
        let g_after = transformed(x, &w, cfg.mode)?;
        let kmeans_after = objective_on(&g_after, &prototypes, &q)?;
        trace.push(MmRound {
            h_before,
            bound_before,
            h_after: h_of(&g_after, &prototypes).as_f64(),
            bound_after: (kmeans_after + barrier(&q, tau_t)).as_f64(),
            kmeans_after: kmeans_after.as_f64(),
        });
    }
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapRow {
    pub instance_id: usize,
    pub tau: f64,
    pub h: f64,
    pub bound: f64,
    pub gap: f64,
}

/// Gap-trace CSV: header `instance_id,tau,H,bound,gap`, LF line endings.
pub fn gap_trace_csv(rows: &[GapRow]) -> String {
    let mut out = String::from("instance_id,tau,H,bound,gap\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.instance_id, r.tau, r.h, r.bound, r.gap
        );
    }
    out
}
