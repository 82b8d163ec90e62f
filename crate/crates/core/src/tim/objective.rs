use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::config::{TimConfig, Variant};
use super::solver::SolverState;
use crate::error::{Error, Result};
use crate::features::Task;
use crate::linalg;
use crate::scalar::Scalar;
use crate::transform::{backprop_to_rows, transform_rows, TransformMatrix};

/// Representation the classifier sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSpace {
    /// The normalized input features.
    Input,
    /// Normalized `g(x, W)`.
    NormInduced,
    /// Normalized `W x`.
    Linear,
}

impl FeatureSpace {
    pub fn at_iteration(cfg: &TimConfig, iter: usize) -> Self {
        if !cfg.transform_active_at(iter) {
            return FeatureSpace::Input;
        }
        match cfg.variant {
            Variant::FtTim => FeatureSpace::NormInduced,
            Variant::LinearTransform => FeatureSpace::Linear,
            Variant::TimBaseline => FeatureSpace::Input,
        }
    }
}

/// Features mapped into the classifier space, with what backprop needs.
#[derive(Debug, Clone)]
pub struct FeatureForward<T> {
    pub features: Array2<T>,
    raw: Option<Array2<T>>,
    norms: Option<Array1<T>>,
}

impl<T: Scalar> FeatureForward<T> {
    /// Pre-normalization transform output, when a transform is in use.
    pub fn raw(&self) -> Option<&Array2<T>> {
        self.raw.as_ref()
    }
}

pub fn feature_forward<T: Scalar>(
    x: ArrayView2<'_, T>,
    w: &TransformMatrix<T>,
    space: FeatureSpace,
) -> Result<FeatureForward<T>> {
    let raw = match space {
        FeatureSpace::Input => {
            return Ok(FeatureForward {
                features: x.to_owned(),
                raw: None,
                norms: None,
            })
        }
        FeatureSpace::NormInduced => transform_rows(x, w),
        FeatureSpace::Linear => x.dot(&w.as_array().t()),
    };
    let norms = linalg::row_norms(raw.view());
    if let Some(sample) = norms.iter().position(|&n| n == T::zero()) {
        return Err(Error::DegenerateTransform { sample });
    }
    let mut features = raw.clone();
    for (mut row, &n) in features.outer_iter_mut().zip(&norms) {
        row.mapv_inplace(|v| v / n);
    }
    Ok(FeatureForward {
        features,
        raw: Some(raw),
        norms: Some(norms),
    })
}

/// Chains `grad_z` (gradient w.r.t. normalized features) back to `W`.
pub(crate) fn feature_backward<T: Scalar>(
    fwd: &FeatureForward<T>,
    x: ArrayView2<'_, T>,
    w: &TransformMatrix<T>,
    space: FeatureSpace,
    grad_z: &Array2<T>,
) -> Array2<T> {
    let (Some(norms), FeatureSpace::NormInduced | FeatureSpace::Linear) = (&fwd.norms, space)
    else {
        return Array2::zeros((w.dim(), w.dim()));
    };
    // d(r/|r|)/dr = (I - z z^T) / |r|
    let mut grad_raw = grad_z.clone();
    for ((mut g, z), &n) in grad_raw
        .outer_iter_mut()
        .zip(fwd.features.outer_iter())
        .zip(norms)
    {
        let proj = g.dot(&z);
        g.scaled_add(-proj, &z);
        g.mapv_inplace(|v| v / n);
    }
    match space {
        FeatureSpace::NormInduced => backprop_to_rows(x, w, grad_raw.view()),
        _ => grad_raw.t().dot(&x),
    }
}

/// Distance-softmax posteriors `softmax_c(-(tau/2) ||theta_c - z_i||^2)`.
pub fn posteriors<T: Scalar>(
    features: ArrayView2<'_, T>,
    prototypes: ArrayView2<'_, T>,
    tau: T,
) -> Array2<T> {
    let half_tau = tau * T::lit(0.5);
    let logits = linalg::pairwise_sq_dists(features, prototypes).mapv(|d| -half_tau * d);
    linalg::softmax_rows(logits.view())
}

/// Weighted terms of the loss; `total` is their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossComponents<T> {
    pub total: T,
    /// `-(lambda/|S|) sum y log p` over the support.
    pub cross_entropy: T,
    /// `-(alpha/|Q|) sum p log p` over the queries.
    pub conditional_entropy: T,
    /// `sum_c p_c log p_c` of the query marginal.
    pub marginal_term: T,
}

#[derive(Debug, Clone)]
pub struct TimGradients<T> {
    pub theta: Array2<T>,
    pub w: Array2<T>,
}

#[derive(Debug, Clone)]
pub struct ObjectiveEval<T> {
    pub loss: LossComponents<T>,
    pub support_posteriors: Array2<T>,
    pub query_posteriors: Array2<T>,
    pub marginal: Array1<T>,
    pub gradients: Option<TimGradients<T>>,
}

/// Support rows followed by query rows, as fed to the objective.
pub(crate) struct StackedInputs<'a, T> {
    pub x: Array2<T>,
    pub n_support: usize,
    pub support_labels: &'a [usize],
}

impl<'a, T: Scalar> StackedInputs<'a, T> {
    pub fn from_task(task: &'a Task<T>) -> Self {
        let x = concatenate(Axis(0), &[task.support().view(), task.query().view()])
            .expect("equal widths");
        Self {
            x,
            n_support: task.support().nrows(),
            support_labels: task.support_labels(),
        }
    }
}

pub(crate) fn evaluate_stacked<T: Scalar>(
    inputs: &StackedInputs<'_, T>,
    prototypes: &Array2<T>,
    w: &TransformMatrix<T>,
    space: FeatureSpace,
    cfg: &TimConfig,
    with_gradients: bool,
) -> Result<ObjectiveEval<T>> {
    let tau = T::lit(cfg.tau);
    let lambda = T::lit(cfg.lambda_ce);
    let alpha = T::lit(cfg.alpha_cond);
    let clamp = T::log_clamp();
    let ln = |p: T| p.max(clamp).ln();

    let fwd = feature_forward(inputs.x.view(), w, space)?;
    let p = posteriors(fwd.features.view(), prototypes.view(), tau);
    let ns = inputs.n_support;
    let nq = p.nrows() - ns;
    let ps = p.slice(s![..ns, ..]);
    let pq = p.slice(s![ns.., ..]);
    let ns_t = T::lit(ns as f64);
    let nq_t = T::lit(nq as f64);

    let ce_sum: T = inputs
        .support_labels
        .iter()
        .enumerate()
        .map(|(i, &y)| ln(ps[[i, y]]))
        .sum();
    let cross_entropy = if ns > 0 {
        -lambda * ce_sum / ns_t
    } else {
        T::zero()
    };
    let plogp: T = pq.iter().map(|&v| v * ln(v)).sum();
    let conditional_entropy = -alpha * plogp / nq_t;
    let marginal = pq.sum_axis(Axis(0)).mapv(|v| v / nq_t);
    let marginal_term: T = marginal.iter().map(|&v| v * ln(v)).sum();
    let loss = LossComponents {
        total: cross_entropy + conditional_entropy + marginal_term,
        cross_entropy,
        conditional_entropy,
        marginal_term,
    };

    let gradients = if with_gradients {
        // e[i, c] = dL / d logit[i, c]
        let mut e = Array2::<T>::zeros(p.raw_dim());
        for (i, &y) in inputs.support_labels.iter().enumerate() {
            for c in 0..p.ncols() {
                let target = if c == y { T::one() } else { T::zero() };
                e[[i, c]] = lambda / ns_t * (p[[i, c]] - target);
            }
        }
        let log_marg = marginal.mapv(ln);
        for i in ns..p.nrows() {
            let row = p.row(i);
            let mean_logp: T = row.iter().map(|&v| v * ln(v)).sum();
            let mean_logm: T = row.iter().zip(&log_marg).map(|(&v, &m)| v * m).sum();
            for c in 0..p.ncols() {
                let pc = row[c];
                e[[i, c]] =
                    (-alpha * pc * (ln(pc) - mean_logp) + pc * (log_marg[c] - mean_logm)) / nq_t;
            }
        }
        // logit = -(tau/2)|theta_c - z_i|^2
        let e_sum = e.sum_axis(Axis(0));
        let mut grad_theta = e.t().dot(&fwd.features);
        for (mut g, (theta, &s)) in grad_theta
            .outer_iter_mut()
            .zip(prototypes.outer_iter().zip(&e_sum))
        {
            g.scaled_add(-s, &theta);
            g.mapv_inplace(|v| v * tau);
        }
        let grad_w = if space == FeatureSpace::Input {
            Array2::zeros((w.dim(), w.dim()))
        } else {
            let e_rows = e.sum_axis(Axis(1));
            let mut grad_z = e.dot(prototypes);
            for (mut g, (z, &s)) in grad_z
                .outer_iter_mut()
                .zip(fwd.features.outer_iter().zip(&e_rows))
            {
                g.scaled_add(-s, &z);
                g.mapv_inplace(|v| v * tau);
            }
            feature_backward(&fwd, inputs.x.view(), w, space, &grad_z)
        };
        if !linalg::all_finite(grad_theta.iter().chain(grad_w.iter()).copied()) {
            return Err(Error::NonFinite("objective gradient"));
        }
        Some(TimGradients {
            theta: grad_theta,
            w: grad_w,
        })
    } else {
        None
    };

    Ok(ObjectiveEval {
        loss,
        support_posteriors: ps.to_owned(),
        query_posteriors: pq.to_owned(),
        marginal,
        gradients,
    })
}

/// Loss, posteriors and (optionally) gradients for arbitrary parameters.
pub fn evaluate_objective<T: Scalar>(
    task: &Task<T>,
    prototypes: &Array2<T>,
    w: &TransformMatrix<T>,
    space: FeatureSpace,
    cfg: &TimConfig,
    with_gradients: bool,
) -> Result<ObjectiveEval<T>> {
    evaluate_stacked(
        &StackedInputs::from_task(task),
        prototypes,
        w,
        space,
        cfg,
        with_gradients,
    )
}

pub fn tim_loss<T: Scalar>(
    task: &Task<T>,
    state: &SolverState<T>,
    cfg: &TimConfig,
) -> Result<LossComponents<T>> {
    evaluate_objective(task, &state.prototypes, &state.w, state.space, cfg, false).map(|e| e.loss)
}

/// Gradients w.r.t. prototypes and `W`; the `W` block is zero whenever the
/// state's feature space is the untransformed input.
pub fn tim_gradients<T: Scalar>(
    task: &Task<T>,
    state: &SolverState<T>,
    cfg: &TimConfig,
) -> Result<TimGradients<T>> {
    evaluate_objective(task, &state.prototypes, &state.w, state.space, cfg, true)
        .map(|e| e.gradients.expect("requested"))
}
