//! Feature ingestion, normalization, synthetic tasks and episodic sampling.

mod bank;
mod episode;
mod synthetic;

pub use bank::{load_feature_bank, read_feature_bank, write_feature_bank, FeatureBank, Record};
pub use episode::{sample_episode, Episode, EpisodeSizes, HiddenLabels, RecordRoles, Task};
pub use synthetic::{class_mean, generate_synthetic_episode, SyntheticTaskSpec};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

/// Scales `v` to unit L2 norm.
pub fn l2_normalize<T: Scalar>(v: &[T]) -> Result<Vec<T>> {
    if !v.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite("vector to normalize"));
    }
    let n = linalg::norm(v);
    if n == T::zero() || !n.is_finite() {
        return Err(Error::ZeroNorm);
    }
    Ok(v.iter().map(|&x| x / n).collect())
}
