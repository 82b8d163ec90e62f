//! Feature-table exports of one fitted episode for external plotting, plus
//! the fitted parameters and loss trace as a checkpoint.

use std::fs;
use std::path::{Path, PathBuf};

use fttim_core::features::{write_feature_bank, FeatureBank, Record};
use fttim_core::tim::{feature_forward, run_ft_tim, FeatureSpace, TimConfig};
use fttim_core::Episode64;
use ndarray::{concatenate, Array2, ArrayView2, Axis};
use serde::Serialize;

use crate::{BenchError, Result};

pub const RAW_FILE: &str = "raw.csv";
pub const TRANSFORMED_FILE: &str = "transformed.csv";
pub const PROTOTYPES_FILE: &str = "prototypes.csv";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const TRANSFORM_FILE: &str = "transform.csv";
pub const TRACE_FILE: &str = "trace.json";

/// Mean pairwise distance between rows of different classes divided by the
/// mean pairwise distance between rows of the same class.
pub fn class_separation(features: ArrayView2<'_, f64>, labels: &[usize]) -> f64 {
    let (mut inter, mut n_inter, mut intra, mut n_intra) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..features.nrows() {
        for j in i + 1..features.nrows() {
            let d = (&features.row(i) - &features.row(j))
                .mapv(|v| v * v)
                .sum()
                .sqrt();
            if labels[i] == labels[j] {
                intra += d;
                n_intra += 1;
            } else {
                inter += d;
                n_inter += 1;
            }
        }
    }
    (inter / n_inter as f64) / (intra / n_intra as f64)
}

#[derive(Debug, Clone, Serialize)]
struct TraceEntry {
    iteration: usize,
    total: f64,
    cross_entropy: f64,
    conditional_entropy: f64,
    marginal_term: f64,
}

#[derive(Debug, Clone, Serialize)]
struct TraceFile<'a> {
    config: &'a TimConfig,
    final_space: FeatureSpace,
    iterations_run: usize,
    loss_trace: Vec<TraceEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExportSummary {
    pub files: Vec<PathBuf>,
    pub query_accuracy: f64,
    /// Separation over support and query rows before and after fitting.
    pub separation_before: f64,
    pub separation_after: f64,
    pub final_space: FeatureSpace,
}

fn table(rows: ArrayView2<'_, f64>, ids: &[usize]) -> Result<FeatureBank<f64>> {
    let records = rows
        .outer_iter()
        .zip(ids)
        .map(|(r, &c)| Record {
            class_id: c as u64,
            vector: r.to_vec(),
        })
        .collect();
    Ok(FeatureBank::new(rows.ncols(), records)?)
}

fn write(dir: &Path, name: &str, contents: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| BenchError::Io {
        path: path.clone(),
        source,
    })?;
    files.push(path);
    Ok(())
}

/// Fits `cfg` on `episode` and writes, into `dir`:
/// support-then-query input features and their final-space images (class id
/// is the true label), prototypes (class id is the class), query features in
/// the final space labelled by prediction, the transform rows, and the loss
/// trace.
pub fn export_embeddings(
    episode: &Episode64,
    cfg: &TimConfig,
    dir: &Path,
) -> Result<ExportSummary> {
    fs::create_dir_all(dir).map_err(|source| BenchError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let task = episode.task();
    let run = run_ft_tim(task, cfg)?;
    let state = &run.state;

    let inputs: Array2<f64> =
        concatenate(Axis(0), &[task.support().view(), task.query().view()]).expect("equal widths");
    let labels: Vec<usize> = task
        .support_labels()
        .iter()
        .chain(episode.hidden().query_labels())
        .copied()
        .collect();
    let mapped = feature_forward(inputs.view(), &state.w, state.space)?.features;
    let query_mapped = mapped.slice(ndarray::s![task.support().nrows().., ..]);

    let mut files = Vec::new();
    write(
        dir,
        RAW_FILE,
        &write_feature_bank(&table(inputs.view(), &labels)?),
        &mut files,
    )?;
    write(
        dir,
        TRANSFORMED_FILE,
        &write_feature_bank(&table(mapped.view(), &labels)?),
        &mut files,
    )?;
    let classes: Vec<usize> = (0..task.num_classes()).collect();
    write(
        dir,
        PROTOTYPES_FILE,
        &write_feature_bank(&table(state.prototypes.view(), &classes)?),
        &mut files,
    )?;
    write(
        dir,
        PREDICTIONS_FILE,
        &write_feature_bank(&table(query_mapped, &run.predictions)?),
        &mut files,
    )?;
    write(
        dir,
        TRANSFORM_FILE,
        &write_feature_bank(&state.w.to_feature_bank()),
        &mut files,
    )?;
    let trace = TraceFile {
        config: cfg,
        final_space: state.space,
        iterations_run: state.iter,
        loss_trace: state
            .loss_trace
            .iter()
            .enumerate()
            .map(|(iteration, l)| TraceEntry {
                iteration,
                total: l.total,
                cross_entropy: l.cross_entropy,
                conditional_entropy: l.conditional_entropy,
                marginal_term: l.marginal_term,
            })
            .collect(),
    };
    write(dir, TRACE_FILE, &crate::report::to_json(&trace), &mut files)?;

    Ok(ExportSummary {
        files,
        query_accuracy: episode.hidden().query_accuracy(&run.predictions),
        separation_before: class_separation(inputs.view(), &labels),
        separation_after: class_separation(mapped.view(), &labels),
        final_space: state.space,
    })
}
