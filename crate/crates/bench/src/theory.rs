//! Seeded sweeps over the K-means / entropy relationships, reported as pass
//! counts per property, plus the bound-gap trace across temperatures.

use std::fmt::Write as _;

use fttim_core::analysis::{
    alternate_kmeans, bound_check, bound_stationarity, entropy_decomposition_scaled,
    exact_bound_minimizer, kkt_soft_assignments, mm_iteration, FeatureMode, GapRow, KMeansConfig,
    MmConfig, TAU_SWEEP,
};
use fttim_core::features::{generate_synthetic_episode, SyntheticTaskSpec};
use fttim_core::transform::{init_transform, transform_rows, InitMode};
use fttim_core::{Task64, TransformMatrix64};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryConfig {
    pub seed: u64,
    pub decomposition_instances: usize,
    pub kkt_instances: usize,
    pub kkt_tau: f64,
    pub micro_instances: usize,
    /// Instances for the MM sweep and the bound-gap trace.
    pub mm_instances: usize,
    pub mm_tau: f64,
    pub mm_rounds: usize,
    pub tau_sweep: Vec<f64>,
    /// Multiplier on the clustering term inside the identity check. Anything
    /// other than 1 must make the identity fail.
    pub clustering_scale: f64,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            decomposition_instances: 1000,
            kkt_instances: 100,
            kkt_tau: 0.01,
            micro_instances: 200,
            mm_instances: 500,
            mm_tau: 0.001,
            mm_rounds: 10,
            tau_sweep: TAU_SWEEP.to_vec(),
            clustering_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyResult {
    pub name: &'static str,
    pub passed: usize,
    pub total: usize,
    /// Exact identities gate the exit code; the rest are measurements.
    pub exact: bool,
}

impl PropertyResult {
    pub fn all_passed(&self) -> bool {
        self.passed == self.total
    }
}

#[derive(Debug, Clone)]
pub struct TheoryReport {
    pub properties: Vec<PropertyResult>,
    pub gap_rows: Vec<GapRow>,
}

impl TheoryReport {
    pub fn exact_failure(&self) -> bool {
        self.properties.iter().any(|p| p.exact && !p.all_passed())
    }

    pub fn property(&self, name: &str) -> Option<&PropertyResult> {
        self.properties.iter().find(|p| p.name == name)
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for p in &self.properties {
            let verdict = if p.all_passed() { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "{verdict} {:<34} {:>5}/{}", p.name, p.passed, p.total);
        }
        out
    }
}

/// Synthetic task with a perturbed Gram transform and prototypes scattered
/// around the transformed supports.
pub fn random_instance(
    seed: u64,
    classes: usize,
    dim: usize,
    queries_per_class: usize,
) -> Result<(Task64, TransformMatrix64, Array2<f64>)> {
    let spec = SyntheticTaskSpec {
        num_classes: classes,
        dim,
        relevant_dims: classes.min(dim),
        queries_per_class,
        seed,
        ..Default::default()
    };
    let task = generate_synthetic_episode::<f64>(&spec)?.task().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_7e57);
    let mut w = init_transform(task.support().view(), InitMode::Gram)?
        .as_array()
        .clone();
    w.mapv_inplace(|v| v + rng.random_range(-0.2..0.2));
    let w = TransformMatrix64::from_array(w)?;
    let mut protos = transform_rows(task.support().view(), &w);
    protos.mapv_inplace(|v| v + rng.random_range(-0.3..0.3));
    Ok((task, w, protos))
}

/// Four queries in two classes of the plane, tightly clustered.
pub fn micro_instance(seed: u64) -> Result<Task64> {
    let spec = SyntheticTaskSpec {
        num_classes: 2,
        dim: 2,
        relevant_dims: 2,
        queries_per_class: 2,
        intra_class_stddev: 0.1,
        seed,
        ..Default::default()
    };
    Ok(generate_synthetic_episode::<f64>(&spec)?.task().clone())
}

/// Exhaustive minimum of `J` over all labellings of `g` into `classes`.
fn enumerate_kmeans(g: &Array2<f64>, classes: usize) -> f64 {
    let n = g.nrows();
    let mut best = f64::INFINITY;
    for code in 0..classes.pow(n as u32) {
        let labels: Vec<usize> = (0..n)
            .map(|i| code / classes.pow(i as u32) % classes)
            .collect();
        let mut j = 0.0;
        for c in 0..classes {
            let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
            if members.is_empty() {
                continue;
            }
            let mean = members.iter().fold(vec![0.0; g.ncols()], |mut acc, &i| {
                acc.iter_mut()
                    .zip(g.row(i))
                    .for_each(|(a, v)| *a += v / members.len() as f64);
                acc
            });
            for &i in &members {
                j += g
                    .row(i)
                    .iter()
                    .zip(&mean)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
            }
        }
        best = best.min(j);
    }
    best
}

fn decomposition(cfg: &TheoryConfig) -> Result<PropertyResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut passed = 0;
    for k in 0..cfg.decomposition_instances {
        let (task, w, protos) = random_instance(cfg.seed.wrapping_add(k as u64), 5, 16, 4)?;
        let tau = rng.random_range(0.01..20.0);
        let mode = if k % 2 == 0 {
            FeatureMode::Raw
        } else {
            FeatureMode::Normalized
        };
        if let Ok(b) =
            entropy_decomposition_scaled(&task, &w, &protos, tau, mode, cfg.clustering_scale)
        {
            let residual =
                b.conditional_entropy - (tau / 2.0 * b.clustering_term + b.dispersion_term);
            passed += (residual.abs() <= 1e-10) as usize;
        }
    }
    Ok(PropertyResult {
        name: "decomposition_identity",
        passed,
        total: cfg.decomposition_instances,
        exact: true,
    })
}

fn kkt(cfg: &TheoryConfig) -> Result<[PropertyResult; 2]> {
    let (mut stated, mut exact) = (0, 0);
    for k in 0..cfg.kkt_instances {
        let (task, w, protos) = random_instance(cfg.seed.wrapping_add(k as u64), 4, 8, 3)?;
        let tau = cfg.kkt_tau;
        let q = kkt_soft_assignments(&task, &w, &protos, tau, FeatureMode::Raw)?;
        stated +=
            (bound_stationarity(&task, &w, &protos, tau, &q, FeatureMode::Raw)? <= 1e-6) as usize;
        let q = exact_bound_minimizer(&task, &w, &protos, tau, FeatureMode::Raw)?;
        exact +=
            (bound_stationarity(&task, &w, &protos, tau, &q, FeatureMode::Raw)? <= 1e-6) as usize;
    }
    Ok([
        PropertyResult {
            name: "kkt_assignments_stationary",
            passed: stated,
            total: cfg.kkt_instances,
            exact: false,
        },
        PropertyResult {
            name: "exact_minimizer_stationary",
            passed: exact,
            total: cfg.kkt_instances,
            exact: false,
        },
    ])
}

fn lloyd(cfg: &TheoryConfig) -> Result<[PropertyResult; 2]> {
    let (mut optimal, mut monotone) = (0, 0);
    for k in 0..cfg.micro_instances {
        let task = micro_instance(cfg.seed.wrapping_add(k as u64))?;
        let run = alternate_kmeans(
            &task,
            &KMeansConfig {
                lr_w: 0.0,
                ..Default::default()
            },
        )?;
        let g = transform_rows(task.query().view(), &run.w);
        let opt = enumerate_kmeans(&g, 2);
        let j = run
            .trace
            .last()
            .map_or(f64::INFINITY, |r| r.after_prototypes);
        optimal += ((j - opt).abs() <= 1e-10 * opt.max(1.0)) as usize;
        monotone += run.trace.windows(2).all(|p| {
            p[1].after_assignment <= p[0].after_w + 1e-12
                && p[1].after_prototypes <= p[1].after_assignment + 1e-12
        }) as usize;
    }
    Ok([
        PropertyResult {
            name: "lloyd_reaches_enumerated_optimum",
            passed: optimal,
            total: cfg.micro_instances,
            exact: false,
        },
        PropertyResult {
            name: "lloyd_trace_non_increasing",
            passed: monotone,
            total: cfg.micro_instances,
            exact: false,
        },
    ])
}

fn mm_and_gap(cfg: &TheoryConfig) -> Result<([PropertyResult; 2], Vec<GapRow>)> {
    let (mut monotone, mut shrinking) = (0, 0);
    let mut rows = Vec::with_capacity(cfg.mm_instances * cfg.tau_sweep.len());
    for k in 0..cfg.mm_instances {
        let (task, _, _) = random_instance(cfg.seed.wrapping_add(k as u64), 5, 16, 4)?;
        let w = init_transform(task.support().view(), InitMode::Gram)?;
        let protos = transform_rows(task.support().view(), &w);
        let trace = mm_iteration(
            &task,
            &w,
            &protos,
            cfg.mm_tau,
            cfg.mm_rounds,
            &MmConfig::default(),
        )?;
        monotone += trace.iter().all(|r| r.h_after <= r.h_before + 1e-6) as usize;

        let mut gaps = Vec::with_capacity(cfg.tau_sweep.len());
        for &tau in &cfg.tau_sweep {
            let q = kkt_soft_assignments(&task, &w, &protos, tau, FeatureMode::Raw)?;
            let chk = bound_check(&task, &w, &protos, tau, &q, FeatureMode::Raw)?;
            gaps.push(chk.gap);
            rows.push(GapRow {
                instance_id: k,
                tau,
                h: chk.h_value,
                bound: chk.bound_value,
                gap: chk.gap,
            });
        }
        shrinking += gaps.windows(2).all(|g| g[1].abs() < g[0].abs()) as usize;
    }
    Ok((
        [
            PropertyResult {
                name: "mm_clustering_term_non_increasing",
                passed: monotone,
                total: cfg.mm_instances,
                exact: false,
            },
            PropertyResult {
                name: "kkt_gap_shrinks_along_sweep",
                passed: shrinking,
                total: cfg.mm_instances,
                exact: false,
            },
        ],
        rows,
    ))
}

pub fn verify(cfg: &TheoryConfig) -> Result<TheoryReport> {
    let mut properties = vec![decomposition(cfg)?];
    properties.extend(kkt(cfg)?);
    properties.extend(lloyd(cfg)?);
    let (mm, gap_rows) = mm_and_gap(cfg)?;
    properties.extend(mm);
    Ok(TheoryReport {
        properties,
        gap_rows,
    })
}
