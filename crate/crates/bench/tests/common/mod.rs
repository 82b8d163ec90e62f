#![allow(dead_code)]

use std::path::Path;

use fttim_core::features::{write_feature_bank, FeatureBank, Record};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Writes a bank of `classes` Gaussian clusters with unnormalized vectors
/// and sparse class ids, as a user export might look.
pub fn write_bank(path: &Path, classes: usize, per_class: usize, dim: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    for c in 0..classes {
        let center: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        for _ in 0..per_class {
            let vector = center
                .iter()
                .map(|m| 3.0 * (m + rng.random_range(-0.6..0.6)))
                .collect();
            records.push(Record {
                class_id: 100 + 7 * c as u64,
                vector,
            });
        }
    }
    let bank = FeatureBank::new(dim, records).unwrap();
    std::fs::write(path, write_feature_bank(&bank)).unwrap();
}

/// Report JSON with the `wall_time_s` lines removed.
pub fn without_wall_time(json: &str) -> String {
    json.lines()
        .filter(|l| !l.contains("\"wall_time_s\""))
        .collect::<Vec<_>>()
        .join("\n")
}
