use fttim_core::analysis::{kmeans_gradient_w, kmeans_objective, AssignmentMatrix, FeatureMode};
use fttim_core::features::{
    l2_normalize, read_feature_bank, write_feature_bank, FeatureBank, Record, Task,
};
use fttim_core::tim::posteriors;
use fttim_core::transform::{apply_transform, TransformMatrix};
use ndarray::Array2;
use proptest::prelude::*;

fn vector(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, d)
}

fn matrix(r: usize, c: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(-2.0..2.0f64, r * c)
        .prop_map(move |v| Array2::from_shape_vec((r, c), v).unwrap())
}

proptest! {
    #[test]
    fn transform_output_is_non_positive((x, w) in (1usize..8).prop_flat_map(|d| (vector(d), matrix(d, d)))) {
        let w = TransformMatrix::from_array(w).unwrap();
        if let Ok(t) = apply_transform(&x, &w) {
            prop_assert!(t.raw.iter().all(|&v| v <= 0.0));
            if x.iter().any(|&v| v > 0.0) {
                prop_assert_ne!(&t.raw, &x);
            }
        }
    }

    #[test]
    fn output_coordinate_depends_only_on_its_row(
        (x, w, k, delta) in (2usize..8).prop_flat_map(|d| (vector(d), matrix(d, d), 0..d, vector(d)))
    ) {
        let before = apply_transform(&x, &TransformMatrix::from_array(w.clone()).unwrap()).unwrap();
        let mut moved = w;
        for (m, dv) in moved.row_mut(k).iter_mut().zip(&delta) {
            *m += dv;
        }
        let after = apply_transform(&x, &TransformMatrix::from_array(moved).unwrap()).unwrap();
        for j in 0..x.len() {
            if j != k {
                prop_assert_eq!(before.raw[j], after.raw[j]);
            }
        }
    }

    #[test]
    fn normalization_yields_unit_vectors(v in prop::collection::vec(-1e3..1e3f64, 1..64)) {
        prop_assume!(v.iter().any(|&x| x != 0.0));
        let n = l2_normalize(&v).unwrap();
        let norm: f64 = n.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((norm - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn bank_text_round_trips(
        rows in prop::collection::vec((0u64..6, prop::collection::vec(-1e6..1e6f64, 3)), 1..20)
    ) {
        let records = rows.into_iter().map(|(class_id, vector)| Record { class_id, vector }).collect();
        let bank = FeatureBank::new(3, records).unwrap();
        let text = write_feature_bank(&bank);
        let back: FeatureBank<f64> = read_feature_bank(text.as_bytes()).unwrap();
        prop_assert_eq!(back, bank);
    }

    #[test]
    fn posteriors_lie_on_the_simplex(
        z in matrix(6, 4),
        theta in matrix(3, 4),
        tau in 1e-3..1e3f64,
    ) {
        let p = posteriors(z.view(), theta.view(), tau);
        for row in p.outer_iter() {
            prop_assert!((row.sum() - 1.0).abs() <= 1e-12);
            prop_assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn small_transform_step_pulls_features_towards_their_prototype(
        x in vector(4),
        w in matrix(4, 4),
        theta in matrix(2, 4),
        class in 0usize..2,
    ) {
        let q = l2_normalize(&x);
        prop_assume!(q.is_ok());
        let q = Array2::from_shape_vec((1, 4), q.unwrap()).unwrap();
        let support = Array2::from_shape_vec((2, 4), vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let task = Task::new(2, support, vec![0, 1], q, None).unwrap();
        let w = TransformMatrix::from_array(w).unwrap();
        let a = AssignmentMatrix::hard(&[class], 2).unwrap();
        let before = kmeans_objective(&task, &w, &theta, &a, FeatureMode::Normalized);
        prop_assume!(before.is_ok());
        let before = before.unwrap();
        let grad = kmeans_gradient_w(&task, &w, &theta, &a, FeatureMode::Normalized).unwrap();
        let gnorm: f64 = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assume!(gnorm > 1e-8);
        let step = 1e-4 / gnorm;
        let stepped = TransformMatrix::from_array(w.as_array() - &(grad * step)).unwrap();
        let after = kmeans_objective(&task, &stepped, &theta, &a, FeatureMode::Normalized).unwrap();
        prop_assert!(after <= before + 1e-12, "{} -> {}", before, after);
    }
}
