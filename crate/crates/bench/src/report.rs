//! Report types, their JSON form and the plain-text tables printed to stdout.
//!
//! Struct field order fixes the JSON key order.

use std::fmt::Write as _;

use fttim_core::tim::{TimConfig, Variant};
use serde::{Deserialize, Serialize};

use crate::campaign::{CampaignSpec, EpisodeOutcome};
use crate::stats::{self, PairedDifference, SignTest};

/// JSON schema every [`EvalReport`] validates against.
pub const EVAL_REPORT_SCHEMA: &str = include_str!("../schema/eval_report.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub seed: u64,
    /// `None` for failed episodes.
    pub accuracy: Option<f64>,
    pub iterations_run: usize,
    pub failure_flag: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub variant: Variant,
    pub episodes: usize,
    /// Mean over non-failed episodes.
    pub mean_accuracy: f64,
    /// `1.96 * stderr`; absent below thirty non-failed episodes.
    pub ci95_halfwidth: Option<f64>,
    pub per_episode: Vec<EpisodeRecord>,
    pub config_echo: CampaignSpec,
    pub wall_time_s: f64,
}

impl EvalReport {
    pub fn new(
        campaign: &CampaignSpec,
        tim: &TimConfig,
        outcomes: &[EpisodeOutcome],
        wall_time_s: f64,
    ) -> Self {
        let semi = campaign.semi_supervised();
        let per_episode: Vec<EpisodeRecord> = outcomes
            .iter()
            .map(|o| EpisodeRecord {
                seed: o.seed,
                accuracy: o.accuracy(semi),
                iterations_run: o.iterations_run,
                failure_flag: o.failure.is_some(),
            })
            .collect();
        let ok: Vec<f64> = per_episode.iter().filter_map(|r| r.accuracy).collect();
        Self {
            variant: tim.variant,
            episodes: per_episode.len(),
            mean_accuracy: stats::mean(&ok),
            ci95_halfwidth: stats::ci95_halfwidth(&ok),
            per_episode,
            config_echo: CampaignSpec {
                tim: tim.clone(),
                ..campaign.clone()
            },
            wall_time_s,
        }
    }

    pub fn failures(&self) -> usize {
        self.per_episode.iter().filter(|r| r.failure_flag).count()
    }

    /// Per-episode accuracies with failed episodes counted as zero, so paired
    /// arrays keep their length.
    pub fn paired_accuracies(&self) -> Vec<f64> {
        self.per_episode
            .iter()
            .map(|r| r.accuracy.unwrap_or(0.0))
            .collect()
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.per_episode.iter().map(|r| r.seed).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub variant: Variant,
    pub reference: Variant,
    pub difference: PairedDifference,
    pub sign_test: SignTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub seeds: Vec<u64>,
    pub reports: Vec<EvalReport>,
    pub paired: Vec<PairedComparison>,
    pub wall_time_s: f64,
}

/// Ordered pairs compared by `compare`, when both variants are present.
pub const COMPARED_PAIRS: [(Variant, Variant); 3] = [
    (Variant::FtTim, Variant::TimBaseline),
    (Variant::FtTim, Variant::LinearTransform),
    (Variant::LinearTransform, Variant::TimBaseline),
];

impl CompareReport {
    pub fn new(reports: Vec<EvalReport>, wall_time_s: f64) -> Self {
        let seeds = reports.first().map(EvalReport::seeds).unwrap_or_default();
        assert!(
            reports.iter().all(|r| r.seeds() == seeds),
            "paired reports must share episode seeds"
        );
        let find = |v: Variant| reports.iter().find(|r| r.variant == v);
        let paired = COMPARED_PAIRS
            .iter()
            .filter_map(|&(a, b)| {
                let (ra, rb) = (find(a)?, find(b)?);
                let (xa, xb) = (ra.paired_accuracies(), rb.paired_accuracies());
                Some(PairedComparison {
                    variant: a,
                    reference: b,
                    difference: PairedDifference::new(&xa, &xb),
                    sign_test: stats::sign_test(&xa, &xb),
                })
            })
            .collect();
        Self {
            seeds,
            reports,
            paired,
            wall_time_s,
        }
    }

    pub fn failures(&self) -> usize {
        self.reports.iter().map(EvalReport::failures).sum()
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn ci(h: Option<f64>) -> String {
    h.map_or_else(|| "n/a".to_string(), |h| format!("{:.4}", h))
}

pub fn eval_table(reports: &[EvalReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<18} {:>8} {:>10} {:>10} {:>8} {:>9}",
        "variant", "episodes", "accuracy", "ci95", "failed", "time_s"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<18} {:>8} {:>10.4} {:>10} {:>8} {:>9.2}",
            r.variant.as_str(),
            r.episodes,
            r.mean_accuracy,
            ci(r.ci95_halfwidth),
            r.failures(),
            r.wall_time_s
        );
    }
    out
}

pub fn compare_table(report: &CompareReport) -> String {
    let mut out = eval_table(&report.reports);
    out.push('\n');
    let _ = writeln!(
        out,
        "{:<36} {:>10} {:>10} {:>6} {:>6} {:>6} {:>10}",
        "pair", "mean_diff", "ci95", "wins", "losses", "ties", "sign_p"
    );
    for p in &report.paired {
        let _ = writeln!(
            out,
            "{:<36} {:>10.4} {:>10} {:>6} {:>6} {:>6} {:>10.3e}",
            format!("{} - {}", p.variant, p.reference),
            p.difference.mean,
            ci(p.difference.ci95_halfwidth),
            p.sign_test.wins,
            p.sign_test.losses,
            p.sign_test.ties,
            p.sign_test.p_value
        );
    }
    out
}
