use ndarray::Array2;
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{l2_normalize, FeatureBank};
use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

/// Label-free view of a few-shot task: everything a solver is allowed to see.
#[derive(Debug, Clone, PartialEq)]
pub struct Task<T> {
    num_classes: usize,
    support: Array2<T>,
    support_labels: Vec<usize>,
    query: Array2<T>,
    heldout: Option<Array2<T>>,
}

impl<T: Scalar> Task<T> {
    /// Builds a task from already-prepared matrices. Support labels must be a
    /// permutation of `0..num_classes` when there is one support row per class.
    pub fn new(
        num_classes: usize,
        support: Array2<T>,
        support_labels: Vec<usize>,
        query: Array2<T>,
        heldout: Option<Array2<T>>,
    ) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::InvalidConfig("num_classes must be positive".into()));
        }
        let dim = support.ncols();
        if support.nrows() != support_labels.len() {
            return Err(Error::DimensionMismatch {
                expected: support.nrows(),
                got: support_labels.len(),
            });
        }
        let mut seen = vec![false; num_classes];
        for &l in &support_labels {
            if l >= num_classes {
                return Err(Error::InvalidConfig(format!(
                    "support label {l} out of range"
                )));
            }
            seen[l] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidConfig(
                "every class needs a support sample".into(),
            ));
        }
        for m in std::iter::once(&query).chain(heldout.as_ref()) {
            if m.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: m.ncols(),
                });
            }
        }
        if query.nrows() == 0 {
            return Err(Error::InsufficientData("query set is empty".into()));
        }
        Ok(Self {
            num_classes,
            support,
            support_labels,
            query,
            heldout,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dim(&self) -> usize {
        self.support.ncols()
    }

    pub fn support(&self) -> &Array2<T> {
        &self.support
    }

    pub fn support_labels(&self) -> &[usize] {
        &self.support_labels
    }

    pub fn query(&self) -> &Array2<T> {
        &self.query
    }

    pub fn heldout(&self) -> Option<&Array2<T>> {
        self.heldout.as_ref()
    }

    /// Per-class mean of the support rows, in class order.
    pub fn support_class_means(&self) -> Array2<T> {
        linalg::class_means(self.support.view(), &self.support_labels, self.num_classes)
    }
}

/// Ground-truth labels kept apart from the [`Task`]; only scoring reads them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HiddenLabels {
    query: Vec<usize>,
    heldout: Option<Vec<usize>>,
}

impl HiddenLabels {
    pub fn new(query: Vec<usize>, heldout: Option<Vec<usize>>) -> Self {
        Self { query, heldout }
    }

    pub fn query_accuracy(&self, predictions: &[usize]) -> f64 {
        accuracy(&self.query, predictions)
    }

    pub fn heldout_accuracy(&self, predictions: &[usize]) -> Option<f64> {
        self.heldout.as_ref().map(|h| accuracy(h, predictions))
    }

    /// Query labels, for exports that annotate points for plotting.
    pub fn query_labels(&self) -> &[usize] {
        &self.query
    }

    pub fn heldout_labels(&self) -> Option<&[usize]> {
        self.heldout.as_deref()
    }
}

fn accuracy(truth: &[usize], predictions: &[usize]) -> f64 {
    assert_eq!(
        truth.len(),
        predictions.len(),
        "prediction count must match label count"
    );
    if truth.is_empty() {
        return 0.0;
    }
    let hits = truth
        .iter()
        .zip(predictions)
        .filter(|(a, b)| a == b)
        .count();
    hits as f64 / truth.len() as f64
}

/// Bank record indices used for each role, for provenance and disjointness checks.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RecordRoles {
    pub support: Vec<usize>,
    pub query: Vec<usize>,
    pub heldout: Vec<usize>,
}

/// A task together with its hidden labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode<T> {
    task: Task<T>,
    hidden: HiddenLabels,
    roles: Option<RecordRoles>,
}

impl<T: Scalar> Episode<T> {
    pub fn new(task: Task<T>, hidden: HiddenLabels) -> Result<Self> {
        if hidden.query.len() != task.query.nrows() {
            return Err(Error::DimensionMismatch {
                expected: task.query.nrows(),
                got: hidden.query.len(),
            });
        }
        match (&task.heldout, &hidden.heldout) {
            (Some(m), Some(h)) if m.nrows() != h.len() => {
                return Err(Error::DimensionMismatch {
                    expected: m.nrows(),
                    got: h.len(),
                })
            }
            (Some(_), None) | (None, Some(_)) => {
                return Err(Error::InvalidConfig(
                    "held-out features and labels must come together".into(),
                ))
            }
            _ => {}
        }
        Ok(Self {
            task,
            hidden,
            roles: None,
        })
    }

    /// Builds an episode from raw vectors, L2-normalizing each one.
    pub fn from_vectors(
        num_classes: usize,
        support: &[(usize, Vec<T>)],
        query: &[(Vec<T>, usize)],
        heldout: Option<&[(Vec<T>, usize)]>,
    ) -> Result<Self> {
        let dim = support
            .first()
            .map(|(_, v)| v.len())
            .ok_or_else(|| Error::InsufficientData("support set is empty".into()))?;
        let stack = |rows: &mut dyn Iterator<Item = &Vec<T>>, n: usize| -> Result<Array2<T>> {
            let mut flat = Vec::with_capacity(n * dim);
            for v in rows {
                if v.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: v.len(),
                    });
                }
                flat.extend(l2_normalize(v)?);
            }
            Ok(Array2::from_shape_vec((n, dim), flat).expect("shape checked"))
        };
        let s = stack(&mut support.iter().map(|(_, v)| v), support.len())?;
        let q = stack(&mut query.iter().map(|(v, _)| v), query.len())?;
        let h = heldout
            .map(|h| stack(&mut h.iter().map(|(v, _)| v), h.len()))
            .transpose()?;
        let task = Task::new(
            num_classes,
            s,
            support.iter().map(|(l, _)| *l).collect(),
            q,
            h,
        )?;
        let hidden = HiddenLabels::new(
            query.iter().map(|(_, l)| *l).collect(),
            heldout.map(|h| h.iter().map(|(_, l)| *l).collect()),
        );
        Self::new(task, hidden)
    }

    pub fn task(&self) -> &Task<T> {
        &self.task
    }

    pub fn hidden(&self) -> &HiddenLabels {
        &self.hidden
    }

    pub fn roles(&self) -> Option<&RecordRoles> {
        self.roles.as_ref()
    }

    pub fn num_classes(&self) -> usize {
        self.task.num_classes
    }

    pub fn dim(&self) -> usize {
        self.task.dim()
    }

    /// Largest deviation from unit norm over all stored vectors.
    pub fn max_norm_deviation(&self) -> f64 {
        let t = &self.task;
        let mut worst = 0.0f64;
        for m in [Some(&t.support), Some(&t.query), t.heldout.as_ref()]
            .into_iter()
            .flatten()
        {
            for n in linalg::row_norms(m.view()) {
                worst = worst.max((n.as_f64() - 1.0).abs());
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeSizes {
    pub ways: usize,
    pub queries_per_class: usize,
    pub heldout_per_class: usize,
}

impl Default for EpisodeSizes {
    fn default() -> Self {
        Self {
            ways: 5,
            queries_per_class: 15,
            heldout_per_class: 0,
        }
    }
}

/// Draws a one-shot episode from a bank without replacement.
///
/// Chosen classes are relabelled `0..C` by ascending original id. Query and
/// held-out rows are shuffled so their order carries no class information.
pub fn sample_episode<T: Scalar>(
    bank: &FeatureBank<T>,
    sizes: EpisodeSizes,
    seed: u64,
) -> Result<Episode<T>> {
    let EpisodeSizes {
        ways,
        queries_per_class: q,
        heldout_per_class: h,
    } = sizes;
    if ways == 0 || q == 0 {
        return Err(Error::InvalidConfig(
            "ways and queries per class must be positive".into(),
        ));
    }
    let need = 1 + q + h;
    let eligible: Vec<u64> = bank
        .class_ids()
        .filter(|&c| bank.indices_of(c).len() >= need)
        .collect();
    if eligible.len() < ways {
        return Err(Error::InsufficientData(format!(
            "need {ways} classes with at least {need} records each, bank has {} (of {} classes)",
            eligible.len(),
            bank.num_classes()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<u64> = sample(&mut rng, eligible.len(), ways)
        .into_iter()
        .map(|i| eligible[i])
        .collect();
    chosen.sort_unstable();

    let mut roles = RecordRoles::default();
    let mut query: Vec<(usize, usize)> = Vec::with_capacity(ways * q);
    let mut heldout: Vec<(usize, usize)> = Vec::with_capacity(ways * h);
    for (label, &cid) in chosen.iter().enumerate() {
        let pool = bank.indices_of(cid);
        let picks: Vec<usize> = sample(&mut rng, pool.len(), need)
            .into_iter()
            .map(|i| pool[i])
            .collect();
        roles.support.push(picks[0]);
        query.extend(picks[1..1 + q].iter().map(|&r| (r, label)));
        heldout.extend(picks[1 + q..].iter().map(|&r| (r, label)));
    }
    query.shuffle(&mut rng);
    heldout.shuffle(&mut rng);
    roles.query = query.iter().map(|p| p.0).collect();
    roles.heldout = heldout.iter().map(|p| p.0).collect();

    let vec_of = |r: usize| bank.records()[r].vector.clone();
    let support: Vec<(usize, Vec<T>)> = roles
        .support
        .iter()
        .enumerate()
        .map(|(l, &r)| (l, vec_of(r)))
        .collect();
    let qv: Vec<(Vec<T>, usize)> = query.iter().map(|&(r, l)| (vec_of(r), l)).collect();
    let hv: Vec<(Vec<T>, usize)> = heldout.iter().map(|&(r, l)| (vec_of(r), l)).collect();
    let mut ep = Episode::from_vectors(ways, &support, &qv, (h > 0).then_some(hv.as_slice()))?;
    ep.roles = Some(roles);
    Ok(ep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Record;
    use std::collections::HashSet;

    fn bank(classes: u64, per_class: usize, dim: usize) -> FeatureBank<f64> {
        let mut records = Vec::new();
        for c in 0..classes {
            for k in 0..per_class {
                let vector = (0..dim)
                    .map(|j| 1.0 + (c as f64) * 0.1 + (k * dim + j) as f64 * 0.01)
                    .collect();
                records.push(Record {
                    class_id: 100 + c * 3,
                    vector,
                });
            }
        }
        FeatureBank::new(dim, records).unwrap()
    }

    #[test]
    fn standard_and_heldout_sizes() {
        let b = bank(5, 21, 4);
        let ep = sample_episode(
            &b,
            EpisodeSizes {
                ways: 5,
                queries_per_class: 15,
                heldout_per_class: 5,
            },
            1,
        )
        .unwrap();
        assert_eq!(ep.task().support().nrows(), 5);
        assert_eq!(ep.task().query().nrows(), 75);
        assert_eq!(ep.task().heldout().unwrap().nrows(), 25);
        assert_eq!(ep.task().support_labels(), &[0, 1, 2, 3, 4]);
        assert!(ep.max_norm_deviation() <= 1e-9);
    }

    #[test]
    fn deterministic_per_seed() {
        let b = bank(8, 20, 3);
        let s = EpisodeSizes::default();
        assert_eq!(
            sample_episode(&b, s, 42).unwrap(),
            sample_episode(&b, s, 42).unwrap()
        );
        assert_ne!(
            sample_episode(&b, s, 42).unwrap(),
            sample_episode(&b, s, 43).unwrap()
        );
    }

    #[test]
    fn roles_are_disjoint() {
        let b = bank(7, 22, 3);
        let s = EpisodeSizes {
            ways: 5,
            queries_per_class: 15,
            heldout_per_class: 5,
        };
        for seed in 0..100 {
            let ep = sample_episode(&b, s, seed).unwrap();
            let r = ep.roles().unwrap();
            let all: Vec<usize> = r
                .support
                .iter()
                .chain(&r.query)
                .chain(&r.heldout)
                .copied()
                .collect();
            let uniq: HashSet<usize> = all.iter().copied().collect();
            assert_eq!(uniq.len(), all.len(), "seed {seed}");
        }
    }

    #[test]
    fn labels_follow_ascending_class_ids() {
        let b = bank(5, 16, 2);
        let ep = sample_episode(&b, EpisodeSizes::default(), 9).unwrap();
        let roles = ep.roles().unwrap();
        for (label, &r) in roles.support.iter().enumerate() {
            assert_eq!(b.records()[r].class_id, 100 + label as u64 * 3);
        }
        for (&r, &l) in roles.query.iter().zip(ep.hidden().query_labels()) {
            assert_eq!(b.records()[r].class_id, 100 + l as u64 * 3);
        }
    }

    #[test]
    fn insufficient_records_are_reported() {
        let b = bank(5, 15, 2);
        let err = sample_episode(&b, EpisodeSizes::default(), 0).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
        let b = bank(4, 30, 2);
        assert!(sample_episode(&b, EpisodeSizes::default(), 0).is_err());
    }

    #[test]
    fn mismatched_hidden_labels_rejected() {
        let task = Task::new(
            1,
            Array2::<f64>::ones((1, 2)),
            vec![0],
            Array2::ones((3, 2)),
            None,
        )
        .unwrap();
        assert!(Episode::new(task, HiddenLabels::new(vec![0, 0], None)).is_err());
    }
}
