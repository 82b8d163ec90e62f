use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::config::{PrototypeHandoff, TimConfig, UpdateRule};
use super::objective::{
    evaluate_stacked, feature_forward, posteriors, FeatureSpace, LossComponents, StackedInputs,
};
use super::optim::Optimizer;
use crate::error::{Error, Result};
use crate::features::Task;
use crate::linalg;
use crate::scalar::Scalar;
use crate::transform::{init_transform, TransformMatrix};

/// Parameters and diagnostics of one fine-tuning run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState<T> {
    pub prototypes: Array2<T>,
    pub w: TransformMatrix<T>,
    /// Query posteriors at the current parameters.
    pub posteriors: Array2<T>,
    pub marginal: Array1<T>,
    /// Number of completed update iterations.
    pub iter: usize,
    pub space: FeatureSpace,
    pub loss_trace: Vec<LossComponents<T>>,
}

impl<T: Scalar> SolverState<T> {
    /// Largest deviation of a posterior row sum from one, and the smallest entry.
    pub fn simplex_residual(&self) -> (f64, f64) {
        let mut worst = 0.0f64;
        let mut min = f64::INFINITY;
        for row in self.posteriors.outer_iter() {
            worst = worst.max((row.sum().as_f64() - 1.0).abs());
            for &v in row {
                min = min.min(v.as_f64());
            }
        }
        (worst, min)
    }
}

#[derive(Debug, Clone)]
pub struct FtTimRun<T> {
    pub predictions: Vec<usize>,
    pub state: SolverState<T>,
}

#[derive(Debug, Clone)]
pub struct SemiSupervisedRun<T> {
    pub heldout_predictions: Vec<usize>,
    pub heldout_posteriors: Array2<T>,
    /// The transductive run on support + unlabeled queries.
    pub run: FtTimRun<T>,
}

fn optimizer<T: Scalar>(rule: UpdateRule, lr: f64, shape: (usize, usize)) -> Optimizer<T> {
    match rule {
        UpdateRule::PlainGradient => Optimizer::plain(lr),
        UpdateRule::AdaptiveMoment => Optimizer::adam(lr, shape),
    }
}

fn argmax_rows<T: Scalar>(p: &Array2<T>) -> Vec<usize> {
    p.outer_iter().map(linalg::argmax).collect()
}

/// Transductive fine-tuning of prototypes and (from `transform_start` on) the
/// transformation matrix.
///
/// Each iteration evaluates the loss and its gradients once, then updates `W`
/// (when the transform is active) and the prototypes. Predictions are the
/// per-query argmax of the posteriors at the final parameters.
pub fn run_ft_tim<T: Scalar>(task: &Task<T>, cfg: &TimConfig) -> Result<FtTimRun<T>> {
    cfg.validate()?;
    let inputs = StackedInputs::from_task(task);
    let classes = task.num_classes();
    let dim = task.dim();

    let mut w = init_transform(task.support().view(), cfg.init_mode)?;
    let mut prototypes = task.support_class_means();
    let mut opt_theta = optimizer::<T>(cfg.update_rule, cfg.lr_theta, (classes, dim));
    let mut opt_w = optimizer::<T>(cfg.update_rule, cfg.lr_w, (dim, dim));
    let mut loss_trace = Vec::with_capacity(cfg.iterations);
    let mut space = FeatureSpace::Input;

    for iter in 0..cfg.iterations {
        let next_space = FeatureSpace::at_iteration(cfg, iter);
        if next_space != space {
            if cfg.prototype_handoff == PrototypeHandoff::Reinit {
                let fwd = feature_forward(task.support().view(), &w, next_space)?;
                prototypes =
                    linalg::class_means(fwd.features.view(), task.support_labels(), classes);
                opt_theta = optimizer(cfg.update_rule, cfg.lr_theta, (classes, dim));
            }
            space = next_space;
        }
        let eval = evaluate_stacked(&inputs, &prototypes, &w, space, cfg, true)?;
        debug_assert!(
            eval.query_posteriors
                .outer_iter()
                .all(|r| (r.sum().as_f64() - 1.0).abs() <= T::SIMPLEX_TOL),
            "posterior row left the simplex at iteration {iter}"
        );
        loss_trace.push(eval.loss);
        let grads = eval.gradients.expect("requested");
        if space != FeatureSpace::Input {
            opt_w.step(w.as_array_mut(), &grads.w);
            if !linalg::all_finite(w.as_array().iter().copied()) {
                return Err(Error::NonFinite("transform matrix after update"));
            }
        }
        opt_theta.step(&mut prototypes, &grads.theta);
    }

    let final_space = if cfg.iterations == 0 {
        FeatureSpace::Input
    } else {
        space
    };
    let query = feature_forward(task.query().view(), &w, final_space)?;
    let post = posteriors(query.features.view(), prototypes.view(), T::lit(cfg.tau));
    let marginal = post.mean_axis(Axis(0)).expect("non-empty query");
    let predictions = argmax_rows(&post);
    Ok(FtTimRun {
        predictions,
        state: SolverState {
            prototypes,
            w,
            posteriors: post,
            marginal,
            iter: cfg.iterations,
            space: final_space,
            loss_trace,
        },
    })
}

/// Posteriors and argmax labels for new features under a fitted state.
pub fn predict<T: Scalar>(
    features: ArrayView2<'_, T>,
    state: &SolverState<T>,
    tau: f64,
) -> Result<(Array2<T>, Vec<usize>)> {
    let fwd = feature_forward(features, &state.w, state.space)?;
    let post = posteriors(fwd.features.view(), state.prototypes.view(), T::lit(tau));
    let labels = argmax_rows(&post);
    Ok((post, labels))
}

/// Fine-tunes on support + unlabeled queries, then classifies the held-out rows.
pub fn run_semi_supervised<T: Scalar>(
    task: &Task<T>,
    cfg: &TimConfig,
) -> Result<SemiSupervisedRun<T>> {
    let heldout = task.heldout().ok_or(Error::MissingHeldout)?;
    if heldout.nrows() == 0 {
        return Err(Error::MissingHeldout);
    }
    let run = run_ft_tim(task, cfg)?;
    let (heldout_posteriors, heldout_predictions) = predict(heldout.view(), &run.state, cfg.tau)?;
    Ok(SemiSupervisedRun {
        heldout_predictions,
        heldout_posteriors,
        run,
    })
}

/// Label of the nearest support class mean, per query row.
pub fn nearest_prototype<T: Scalar>(task: &Task<T>) -> Vec<usize> {
    let means = task.support_class_means();
    let d = linalg::pairwise_sq_dists(task.query().view(), means.view());
    d.outer_iter()
        .map(|row| linalg::argmax(row.mapv(|v| -v).view()))
        .collect()
}
