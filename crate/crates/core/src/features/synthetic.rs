use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Episode;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Gaussian class clusters whose means differ only in the leading `relevant_dims`
/// coordinates; the remaining coordinates carry noise alone.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTaskSpec {
    pub num_classes: usize,
    pub dim: usize,
    pub intra_class_stddev: f64,
    pub inter_class_separation: f64,
    pub relevant_dims: usize,
    pub queries_per_class: usize,
    pub heldout_per_class: usize,
    pub seed: u64,
}

impl Default for SyntheticTaskSpec {
    /// The standard desk-scale suite: 5-way, d=64, 10 informative dimensions.
    fn default() -> Self {
        Self {
            num_classes: 5,
            dim: 64,
            intra_class_stddev: 0.25,
            inter_class_separation: 1.0,
            relevant_dims: 10,
            queries_per_class: 15,
            heldout_per_class: 0,
            seed: 0,
        }
    }
}

impl SyntheticTaskSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 || self.dim == 0 || self.queries_per_class == 0 {
            return Err(Error::InvalidConfig(
                "classes, dim and queries must be positive".into(),
            ));
        }
        if self.relevant_dims == 0 || self.relevant_dims > self.dim {
            return Err(Error::InvalidConfig(format!(
                "relevant_dims must lie in 1..={}, got {}",
                self.dim, self.relevant_dims
            )));
        }
        if !(self.intra_class_stddev.is_finite() && self.intra_class_stddev >= 0.0)
            || !(self.inter_class_separation.is_finite() && self.inter_class_separation >= 0.0)
        {
            return Err(Error::InvalidConfig(
                "stddev and separation must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

/// Mean of class `c`: the relevant coordinates are dealt round-robin to the
/// classes and each class gets a scaled indicator of its share. With fewer
/// relevant coordinates than classes, classes share an axis with alternating
/// sign and growing magnitude.
pub fn class_mean(spec: &SyntheticTaskSpec, c: usize) -> Vec<f64> {
    let mut mean = vec![0.0; spec.dim];
    let r = spec.relevant_dims;
    let sep = spec.inter_class_separation;
    if r >= spec.num_classes {
        let block: Vec<usize> = (c..r).step_by(spec.num_classes).collect();
        let scale = sep / (block.len() as f64).sqrt();
        for j in block {
            mean[j] = scale;
        }
    } else {
        let axis = c % r;
        let level = c / r;
        let sign = if level % 2 == 0 { 1.0 } else { -1.0 };
        mean[axis] = sign * sep * (1 + level / 2) as f64;
    }
    mean
}

/// Generates a normalized episode; identical specs yield identical episodes.
pub fn generate_synthetic_episode<T: Scalar>(spec: &SyntheticTaskSpec) -> Result<Episode<T>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let means: Vec<Vec<f64>> = (0..spec.num_classes).map(|c| class_mean(spec, c)).collect();
    let mut draw = |c: usize| -> Vec<T> {
        means[c]
            .iter()
            .map(|&m| {
                let z: f64 = StandardNormal.sample(&mut rng);
                T::lit(m + spec.intra_class_stddev * z)
            })
            .collect()
    };

    let mut support = Vec::with_capacity(spec.num_classes);
    let mut query = Vec::with_capacity(spec.num_classes * spec.queries_per_class);
    let mut heldout = Vec::with_capacity(spec.num_classes * spec.heldout_per_class);
    for c in 0..spec.num_classes {
        support.push((c, draw(c)));
        for _ in 0..spec.queries_per_class {
            query.push((draw(c), c));
        }
        for _ in 0..spec.heldout_per_class {
            heldout.push((draw(c), c));
        }
    }
    use rand::seq::SliceRandom;
    query.shuffle(&mut rng);
    heldout.shuffle(&mut rng);
    Episode::from_vectors(
        spec.num_classes,
        &support,
        &query,
        (spec.heldout_per_class > 0).then_some(heldout.as_slice()),
    )
}
