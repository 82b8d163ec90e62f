//! Behaviour of the fine-tuning loop and of the TIM loss at known states.

use fttim_core::features::{generate_synthetic_episode, Episode, SyntheticTaskSpec, Task};
use fttim_core::tim::{
    evaluate_objective, nearest_prototype, predict, run_ft_tim, run_semi_supervised, tim_loss,
    FeatureSpace, SolverState, TimConfig, UpdateRule, Variant,
};
use fttim_core::transform::{init_transform, InitMode};
use fttim_core::Error;
use fttim_testkit as oracle;
use ndarray::{Array1, Array2, Axis};

fn short_cfg(variant: Variant) -> TimConfig {
    TimConfig {
        iterations: 60,
        transform_start: 20,
        variant,
        ..TimConfig::default()
    }
}

fn episode(seed: u64, stddev: f64, separation: f64, heldout: usize) -> Episode<f64> {
    let spec = SyntheticTaskSpec {
        intra_class_stddev: stddev,
        inter_class_separation: separation,
        heldout_per_class: heldout,
        seed,
        ..Default::default()
    };
    generate_synthetic_episode(&spec).unwrap()
}

fn state_at(task: &Task<f64>, prototypes: Array2<f64>, space: FeatureSpace) -> SolverState<f64> {
    let w = init_transform(task.support().view(), InitMode::Gram).unwrap();
    let c = task.num_classes();
    SolverState {
        prototypes,
        w,
        posteriors: Array2::zeros((task.query().nrows(), c)),
        marginal: Array1::zeros(c),
        iter: 0,
        space,
        loss_trace: Vec::new(),
    }
}

fn rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.outer_iter().map(|r| r.to_vec()).collect()
}

#[test]
fn well_separated_episode_is_solved_by_every_variant() {
    let ep = episode(3, 0.05, 5.0, 0);
    for v in Variant::ALL {
        let run = run_ft_tim(ep.task(), &short_cfg(v)).unwrap();
        assert_eq!(ep.hidden().query_accuracy(&run.predictions), 1.0, "{v}");
    }
}

#[test]
fn zero_iterations_is_nearest_prototype() {
    for seed in 0..10 {
        let ep = episode(seed, 0.3, 1.0, 0);
        for v in Variant::ALL {
            let cfg = TimConfig {
                iterations: 0,
                variant: v,
                ..TimConfig::default()
            };
            let run = run_ft_tim(ep.task(), &cfg).unwrap();
            assert_eq!(run.predictions, nearest_prototype(ep.task()));
            assert_eq!(run.state.space, FeatureSpace::Input);
        }
    }
}

#[test]
fn late_transform_start_reduces_to_baseline_exactly() {
    let ep = episode(7, 0.25, 1.0, 0);
    let ft = TimConfig {
        iterations: 40,
        transform_start: 41,
        ..TimConfig::default()
    };
    let a = run_ft_tim(ep.task(), &ft).unwrap();
    let b = run_ft_tim(ep.task(), &ft.with_variant(Variant::TimBaseline)).unwrap();
    assert_eq!(a.predictions, b.predictions);
    assert_eq!(a.state, b.state);
}

#[test]
fn runs_are_deterministic() {
    let ep = episode(11, 0.25, 1.0, 0);
    let cfg = short_cfg(Variant::FtTim);
    let a = run_ft_tim(ep.task(), &cfg).unwrap();
    let b = run_ft_tim(ep.task(), &cfg).unwrap();
    assert_eq!(a.state, b.state);
}

#[test]
fn posteriors_stay_on_the_simplex() {
    let ep = episode(5, 0.4, 1.0, 0);
    for iterations in [1, 10, 25, 80] {
        for v in Variant::ALL {
            let cfg = TimConfig {
                iterations,
                transform_start: 5,
                variant: v,
                ..TimConfig::default()
            };
            let run = run_ft_tim(ep.task(), &cfg).unwrap();
            let (sum_err, min) = run.state.simplex_residual();
            assert!(
                sum_err <= 1e-9 && min >= 0.0,
                "{v} after {iterations}: {sum_err} {min}"
            );
            let m = run.state.posteriors.mean_axis(Axis(0)).unwrap();
            assert!(m
                .iter()
                .zip(&run.state.marginal)
                .all(|(a, b)| (a - b).abs() < 1e-15));
        }
    }
}

#[test]
fn marginal_term_is_bounded_by_uniform_entropy() {
    let ep = episode(2, 0.3, 1.0, 0);
    let cfg = TimConfig {
        lambda_ce: 0.0,
        alpha_cond: 0.0,
        ..short_cfg(Variant::FtTim)
    };
    let run = run_ft_tim(ep.task(), &cfg).unwrap();
    let floor = -(5.0f64).ln();
    for l in &run.state.loss_trace {
        assert!(l.marginal_term >= floor - 1e-12);
        assert_eq!(l.total, l.marginal_term);
    }
}

#[test]
fn loss_is_non_increasing_at_a_tenth_of_the_default_rates() {
    let defaults = TimConfig::default();
    for (rule, lr_theta, lr_w) in [
        (
            UpdateRule::AdaptiveMoment,
            defaults.lr_theta / 10.0,
            defaults.lr_w / 10.0,
        ),
        (UpdateRule::PlainGradient, 1e-3, 1e-3),
    ] {
        for seed in 0..5 {
            let ep = episode(seed, 0.3, 1.0, 0);
            let cfg = TimConfig {
                iterations: 200,
                transform_start: 0,
                update_rule: rule,
                lr_theta,
                lr_w,
                ..defaults.clone()
            };
            let run = run_ft_tim(ep.task(), &cfg).unwrap();
            for pair in run.state.loss_trace.windows(2) {
                assert!(
                    pair[1].total <= pair[0].total + 1e-6,
                    "{rule:?} seed {seed}: {} -> {}",
                    pair[0].total,
                    pair[1].total
                );
            }
        }
    }
}

#[test]
fn semi_supervised_classifies_heldout_rows() {
    let ep = episode(9, 0.05, 5.0, 6);
    let cfg = short_cfg(Variant::FtTim);
    let semi = run_semi_supervised(ep.task(), &cfg).unwrap();
    assert_eq!(
        ep.hidden().heldout_accuracy(&semi.heldout_predictions),
        Some(1.0)
    );

    let (post, labels) = predict(
        ep.task().heldout().unwrap().view(),
        &semi.run.state,
        cfg.tau,
    )
    .unwrap();
    assert_eq!(labels, semi.heldout_predictions);
    assert_eq!(post, semi.heldout_posteriors);
}

#[test]
fn semi_supervised_requires_heldout_rows() {
    let ep = episode(9, 0.2, 1.0, 0);
    let err = run_semi_supervised(ep.task(), &short_cfg(Variant::FtTim)).unwrap_err();
    assert!(matches!(err, Error::MissingHeldout));
}

#[test]
fn loss_at_confident_and_uniform_states() {
    let c = 4;
    let eye = Array2::<f64>::eye(c);
    let task = Task::new(c, eye.clone(), (0..c).collect(), eye.clone(), None).unwrap();
    let cfg = TimConfig {
        tau: 1e5,
        ..TimConfig::default()
    };
    let confident = tim_loss(
        &task,
        &state_at(&task, eye.clone(), FeatureSpace::Input),
        &cfg,
    )
    .unwrap();
    assert!(confident.cross_entropy.abs() < 1e-12);
    assert!(confident.conditional_entropy.abs() < 1e-12);
    assert!((confident.marginal_term + (c as f64).ln()).abs() < 1e-12);

    let cfg = TimConfig {
        lambda_ce: 0.3,
        alpha_cond: 0.7,
        ..TimConfig::default()
    };
    let flat = Array2::from_elem((c, c), 0.5);
    let uniform = tim_loss(&task, &state_at(&task, flat, FeatureSpace::Input), &cfg).unwrap();
    let log_c = (c as f64).ln();
    assert!((uniform.cross_entropy - 0.3 * log_c).abs() < 1e-12);
    assert!((uniform.conditional_entropy - 0.7 * log_c).abs() < 1e-12);
    assert!((uniform.marginal_term + log_c).abs() < 1e-12);
}

#[test]
fn loss_matches_term_by_term_oracle() {
    for seed in 0..20 {
        let ep = episode(seed, 0.4, 1.0, 0);
        let task = ep.task();
        let cfg = TimConfig {
            lambda_ce: 0.3,
            alpha_cond: 0.8,
            tau: 7.0,
            ..TimConfig::default()
        };
        let protos = task.support_class_means().mapv(|v| v * 0.9 + 0.01);
        for space in [FeatureSpace::Input, FeatureSpace::NormInduced] {
            let state = state_at(task, protos.clone(), space);
            let got = tim_loss(task, &state, &cfg).unwrap();
            let feats = |m: &Array2<f64>| -> Vec<Vec<f64>> {
                let w = rows(state.w.as_array());
                rows(m)
                    .iter()
                    .map(|x| match space {
                        FeatureSpace::Input => x.clone(),
                        _ => oracle::normalized(&oracle::norm_induced(x, &w)),
                    })
                    .collect()
            };
            let (ce, cond, marg) = oracle::naive_tim_loss(
                &feats(task.support()),
                task.support_labels(),
                &feats(task.query()),
                &rows(&protos),
                cfg.tau,
                cfg.lambda_ce,
                cfg.alpha_cond,
            );
            assert!((got.cross_entropy - ce).abs() <= 1e-10);
            assert!((got.conditional_entropy - cond).abs() <= 1e-10);
            assert!((got.marginal_term - marg).abs() <= 1e-10);
            assert!((got.total - (ce + cond + marg)).abs() <= 1e-10);
        }
    }
}

#[test]
fn gradients_are_invariant_to_query_order_and_equivariant_to_class_labels() {
    let ep = episode(4, 0.3, 1.0, 0);
    let task = ep.task();
    let cfg = TimConfig::default();
    let protos = task.support_class_means().mapv(|v| v * 0.8);
    let w = init_transform(task.support().view(), InitMode::Gram).unwrap();
    let base =
        evaluate_objective(task, &protos, &w, FeatureSpace::NormInduced, &cfg, true).unwrap();
    let g = base.gradients.unwrap();

    let n = task.query().nrows();
    let order: Vec<usize> = (0..n).rev().collect();
    let shuffled = task.query().select(Axis(0), &order);
    let t2 = Task::new(
        5,
        task.support().clone(),
        task.support_labels().to_vec(),
        shuffled,
        None,
    )
    .unwrap();
    let g2 = evaluate_objective(&t2, &protos, &w, FeatureSpace::NormInduced, &cfg, true)
        .unwrap()
        .gradients
        .unwrap();
    assert!((&g.theta - &g2.theta).iter().all(|v| v.abs() < 1e-12));
    assert!((&g.w - &g2.w).iter().all(|v| v.abs() < 1e-12));

    let perm = [2usize, 0, 4, 1, 3];
    let labels: Vec<usize> = task.support_labels().iter().map(|&l| perm[l]).collect();
    let mut permuted = protos.clone();
    for (c, &pc) in perm.iter().enumerate() {
        permuted.row_mut(pc).assign(&protos.row(c));
    }
    let t3 = Task::new(
        5,
        task.support().clone(),
        labels,
        task.query().clone(),
        None,
    )
    .unwrap();
    let g3 = evaluate_objective(&t3, &permuted, &w, FeatureSpace::NormInduced, &cfg, true)
        .unwrap()
        .gradients
        .unwrap();
    for (c, &pc) in perm.iter().enumerate() {
        assert!((&g.theta.row(c) - &g3.theta.row(pc))
            .iter()
            .all(|v| v.abs() < 1e-12));
    }
    assert!((&g.w - &g3.w).iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn marginal_gradient_vanishes_when_every_class_is_equally_likely() {
    let c = 3;
    let eye = Array2::<f64>::eye(c);
    let task = Task::new(c, eye.clone(), (0..c).collect(), eye.clone(), None).unwrap();
    let cfg = TimConfig {
        lambda_ce: 0.0,
        alpha_cond: 0.0,
        tau: 2.0,
        ..TimConfig::default()
    };
    let w = init_transform(task.support().view(), InitMode::Gram).unwrap();
    let eval = evaluate_objective(&task, &eye, &w, FeatureSpace::Input, &cfg, true).unwrap();
    assert!(eval
        .marginal
        .iter()
        .all(|&m| (m - 1.0 / c as f64).abs() < 1e-15));
    assert!(eval
        .gradients
        .unwrap()
        .theta
        .iter()
        .all(|v| v.abs() < 1e-14));
}
