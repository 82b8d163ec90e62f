//! Transductive information-maximization fine-tuning over fixed features,
//! with the optional norm-induced transformation in front of the classifier.

mod config;
mod objective;
mod optim;
mod solver;

pub use config::{PrototypeHandoff, TimConfig, UpdateRule, Variant};
pub use objective::{
    evaluate_objective, feature_forward, posteriors, tim_gradients, tim_loss, FeatureForward,
    FeatureSpace, LossComponents, ObjectiveEval, TimGradients,
};
pub use optim::Optimizer;
pub use solver::{
    nearest_prototype, predict, run_ft_tim, run_semi_supervised, FtTimRun, SemiSupervisedRun,
    SolverState,
};

pub(crate) use objective::feature_backward as objective_backward;
