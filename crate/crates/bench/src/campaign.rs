//! Episode campaigns: what to sample, how to run it, and the per-episode
//! outcomes. Results are indexed by episode, never by completion order, so
//! they do not depend on the worker count.

use std::path::PathBuf;

use fttim_core::features::{load_feature_bank, sample_episode, EpisodeSizes, SyntheticTaskSpec};
use fttim_core::tim::{run_ft_tim, run_semi_supervised, TimConfig};
use fttim_core::{Episode64, FeatureBank64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{BenchError, Result};

/// Where episodes come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceSpec {
    Synthetic {
        dim: usize,
        intra_class_stddev: f64,
        inter_class_separation: f64,
        relevant_dims: usize,
    },
    FeatureBank {
        path: PathBuf,
    },
}

impl SourceSpec {
    /// The standard synthetic suite.
    pub fn standard_synthetic() -> Self {
        let d = SyntheticTaskSpec::default();
        SourceSpec::Synthetic {
            dim: d.dim,
            intra_class_stddev: d.intra_class_stddev,
            inter_class_separation: d.inter_class_separation,
            relevant_dims: d.relevant_dims,
        }
    }
}

/// Everything needed to reproduce a campaign; echoed in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSpec {
    pub source: SourceSpec,
    pub ways: usize,
    pub queries_per_class: usize,
    /// Non-zero selects the semi-supervised protocol: accuracy is measured
    /// on the held-out rows.
    pub heldout_per_class: usize,
    pub episodes: usize,
    pub base_seed: u64,
    pub tim: TimConfig,
}

impl CampaignSpec {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(BenchError::Usage("--episodes must be at least 1".into()));
        }
        if self.ways < 2 {
            return Err(BenchError::Usage("--ways must be at least 2".into()));
        }
        if self.queries_per_class == 0 {
            return Err(BenchError::Usage("--queries must be at least 1".into()));
        }
        self.tim.validate()?;
        Ok(())
    }

    pub fn semi_supervised(&self) -> bool {
        self.heldout_per_class > 0
    }

    /// Seed of episode `index`.
    pub fn episode_seed(&self, index: usize) -> u64 {
        self.base_seed.wrapping_add(index as u64)
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.episodes).map(|i| self.episode_seed(i)).collect()
    }
}

/// A source with its feature bank loaded once.
#[derive(Debug, Clone)]
pub struct LoadedSource {
    spec: SourceSpec,
    bank: Option<FeatureBank64>,
}

impl LoadedSource {
    pub fn load(spec: &SourceSpec) -> Result<Self> {
        let bank = match spec {
            SourceSpec::Synthetic { .. } => None,
            SourceSpec::FeatureBank { path } => {
                Some(load_feature_bank(path).map_err(|e| match e {
                    fttim_core::Error::Io(source) => BenchError::Io {
                        path: path.clone(),
                        source,
                    },
                    other => other.into(),
                })?)
            }
        };
        Ok(Self {
            spec: spec.clone(),
            bank,
        })
    }

    pub fn episode(&self, campaign: &CampaignSpec, seed: u64) -> Result<Episode64> {
        match (&self.spec, &self.bank) {
            (
                SourceSpec::Synthetic {
                    dim,
                    intra_class_stddev,
                    inter_class_separation,
                    relevant_dims,
                },
                _,
            ) => {
                let spec = SyntheticTaskSpec {
                    num_classes: campaign.ways,
                    dim: *dim,
                    intra_class_stddev: *intra_class_stddev,
                    inter_class_separation: *inter_class_separation,
                    relevant_dims: *relevant_dims,
                    queries_per_class: campaign.queries_per_class,
                    heldout_per_class: campaign.heldout_per_class,
                    seed,
                };
                Ok(fttim_core::features::generate_synthetic_episode(&spec)?)
            }
            (SourceSpec::FeatureBank { .. }, Some(bank)) => {
                let sizes = EpisodeSizes {
                    ways: campaign.ways,
                    queries_per_class: campaign.queries_per_class,
                    heldout_per_class: campaign.heldout_per_class,
                };
                Ok(sample_episode(bank, sizes, seed)?)
            }
            (SourceSpec::FeatureBank { .. }, None) => {
                unreachable!("bank loaded in LoadedSource::load")
            }
        }
    }
}

/// Result of one episode under one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub seed: u64,
    pub query_accuracy: Option<f64>,
    /// Present under the semi-supervised protocol.
    pub heldout_accuracy: Option<f64>,
    pub iterations_run: usize,
    pub failure: Option<String>,
}

impl EpisodeOutcome {
    fn failed(seed: u64, err: impl std::fmt::Display) -> Self {
        Self {
            seed,
            query_accuracy: None,
            heldout_accuracy: None,
            iterations_run: 0,
            failure: Some(err.to_string()),
        }
    }

    /// Accuracy under the campaign's protocol.
    pub fn accuracy(&self, semi_supervised: bool) -> Option<f64> {
        if semi_supervised {
            self.heldout_accuracy
        } else {
            self.query_accuracy
        }
    }
}

/// Runs one sampled episode under `cfg`. Failures are recorded, not raised.
pub fn run_episode(
    episode: &Episode64,
    cfg: &TimConfig,
    semi_supervised: bool,
    seed: u64,
) -> EpisodeOutcome {
    let hidden = episode.hidden();
    if semi_supervised {
        match run_semi_supervised(episode.task(), cfg) {
            Ok(r) => EpisodeOutcome {
                seed,
                query_accuracy: Some(hidden.query_accuracy(&r.run.predictions)),
                heldout_accuracy: hidden.heldout_accuracy(&r.heldout_predictions),
                iterations_run: r.run.state.iter,
                failure: None,
            },
            Err(e) => EpisodeOutcome::failed(seed, e),
        }
    } else {
        match run_ft_tim(episode.task(), cfg) {
            Ok(r) => EpisodeOutcome {
                seed,
                query_accuracy: Some(hidden.query_accuracy(&r.predictions)),
                heldout_accuracy: None,
                iterations_run: r.state.iter,
                failure: None,
            },
            Err(e) => EpisodeOutcome::failed(seed, e),
        }
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| BenchError::Pool(e.to_string()))
}

/// Runs every configuration in `configs` on the same episodes. The outer
/// vector follows `configs`, the inner one the episode index.
pub fn run_paired(
    source: &LoadedSource,
    campaign: &CampaignSpec,
    configs: &[TimConfig],
    workers: usize,
) -> Result<Vec<Vec<EpisodeOutcome>>> {
    campaign.validate()?;
    for cfg in configs {
        cfg.validate()?;
    }
    let semi = campaign.semi_supervised();
    let per_episode: Vec<Vec<EpisodeOutcome>> = pool(workers)?.install(|| {
        (0..campaign.episodes)
            .into_par_iter()
            .map(|i| {
                let seed = campaign.episode_seed(i);
                match source.episode(campaign, seed) {
                    Ok(ep) => configs
                        .iter()
                        .map(|cfg| run_episode(&ep, cfg, semi, seed))
                        .collect(),
                    Err(e) => configs
                        .iter()
                        .map(|_| EpisodeOutcome::failed(seed, &e))
                        .collect(),
                }
            })
            .collect()
    });
    let mut by_config: Vec<Vec<EpisodeOutcome>> =
        vec![Vec::with_capacity(campaign.episodes); configs.len()];
    for row in per_episode {
        for (k, outcome) in row.into_iter().enumerate() {
            by_config[k].push(outcome);
        }
    }
    Ok(by_config)
}

/// Runs `campaign.tim` on every episode.
pub fn run_campaign(
    source: &LoadedSource,
    campaign: &CampaignSpec,
    workers: usize,
) -> Result<Vec<EpisodeOutcome>> {
    Ok(run_paired(
        source,
        campaign,
        std::slice::from_ref(&campaign.tim),
        workers,
    )?
    .pop()
    .expect("one configuration"))
}
