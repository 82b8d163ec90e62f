use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use fttim_bench::campaign::{run_paired, CampaignSpec, LoadedSource, SourceSpec};
use fttim_bench::export::export_embeddings;
use fttim_bench::report::{compare_table, eval_table, to_json, CompareReport, EvalReport};
use fttim_bench::theory::{verify, TheoryConfig};
use fttim_bench::{config, BenchError, Result};
use fttim_core::analysis::gap_trace_csv;
use fttim_core::tim::{PrototypeHandoff, TimConfig, UpdateRule, Variant};
use fttim_core::transform::InitMode;

#[derive(Parser, Debug)]
#[command(
    name = "fttim-bench",
    version,
    about = "Episodic evaluation and theory checks for transductive one-shot inference"
)]
#[command(args_override_self = true)]
struct Cli {
    /// Flat key=value file of long flags; command-line flags take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one variant over a seeded campaign of episodes.
    Evaluate(EvaluateArgs),
    /// Run all variants on the same episodes and compare them pairwise.
    Compare(CampaignArgs),
    /// Sweep seeded random instances through the K-means / entropy checks.
    VerifyTheory(TheoryArgs),
    /// Fit one episode and write its features before and after the transform.
    ExportEmbeddings(ExportArgs),
}

#[derive(Args, Debug)]
struct SourceArgs {
    /// Feature bank file (`d=<int> n=<int>` header, then `class_id,v1,...,vd` rows).
    #[arg(
        long,
        value_name = "PATH",
        conflicts_with = "synthetic",
        required_unless_present = "synthetic"
    )]
    features: Option<PathBuf>,
    /// Sample episodes from the synthetic Gaussian suite.
    #[arg(long)]
    synthetic: bool,
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u64).range(1..))]
    synthetic_dim: u64,
    #[arg(long, default_value_t = 0.25)]
    synthetic_noise: f64,
    #[arg(long, default_value_t = 1.0)]
    synthetic_separation: f64,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    synthetic_relevant_dims: u64,
}

impl SourceArgs {
    fn spec(&self) -> SourceSpec {
        match &self.features {
            Some(path) => SourceSpec::FeatureBank { path: path.clone() },
            None => SourceSpec::Synthetic {
                dim: self.synthetic_dim as usize,
                intra_class_stddev: self.synthetic_noise,
                inter_class_separation: self.synthetic_separation,
                relevant_dims: self.synthetic_relevant_dims as usize,
            },
        }
    }
}

#[derive(Args, Debug)]
struct TimArgs {
    #[arg(long)]
    tim_tau: Option<f64>,
    #[arg(long)]
    tim_lambda_ce: Option<f64>,
    #[arg(long)]
    tim_alpha_cond: Option<f64>,
    #[arg(long)]
    tim_iterations: Option<usize>,
    #[arg(long)]
    tim_transform_start: Option<usize>,
    #[arg(long)]
    tim_lr_theta: Option<f64>,
    #[arg(long)]
    tim_lr_w: Option<f64>,
    /// plain_gradient or adaptive_moment.
    #[arg(long)]
    tim_update_rule: Option<UpdateRule>,
    /// keep or reinit.
    #[arg(long)]
    tim_prototype_handoff: Option<PrototypeHandoff>,
    /// gram or identity_like:<epsilon>.
    #[arg(long)]
    tim_init_mode: Option<InitMode>,
}

impl TimArgs {
    fn config(&self, variant: Variant, seed: u64) -> TimConfig {
        let d = TimConfig::default();
        TimConfig {
            tau: self.tim_tau.unwrap_or(d.tau),
            lambda_ce: self.tim_lambda_ce.unwrap_or(d.lambda_ce),
            alpha_cond: self.tim_alpha_cond.unwrap_or(d.alpha_cond),
            iterations: self.tim_iterations.unwrap_or(d.iterations),
            transform_start: self.tim_transform_start.unwrap_or(d.transform_start),
            lr_theta: self.tim_lr_theta.unwrap_or(d.lr_theta),
            lr_w: self.tim_lr_w.unwrap_or(d.lr_w),
            update_rule: self.tim_update_rule.unwrap_or(d.update_rule),
            variant,
            prototype_handoff: self.tim_prototype_handoff.unwrap_or(d.prototype_handoff),
            init_mode: self.tim_init_mode.unwrap_or(d.init_mode),
            seed,
        }
    }
}

#[derive(Args, Debug)]
struct CampaignArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, default_value_t = 600, value_parser = clap::value_parser!(u64).range(1..))]
    episodes: u64,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(2..))]
    ways: u64,
    /// Query samples per class.
    #[arg(long, default_value_t = 15, value_parser = clap::value_parser!(u64).range(1..))]
    queries: u64,
    /// Held-out samples per class; non-zero selects the semi-supervised protocol.
    #[arg(long, default_value_t = 0)]
    heldout: u64,
    /// Seed of the first episode; episode i uses seed + i.
    #[arg(long, env = "FTTIM_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: available parallelism).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
    /// Where to write the JSON report.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[command(flatten)]
    tim: TimArgs,
}

impl CampaignArgs {
    fn campaign(&self, variant: Variant) -> CampaignSpec {
        CampaignSpec {
            source: self.source.spec(),
            ways: self.ways as usize,
            queries_per_class: self.queries as usize,
            heldout_per_class: self.heldout as usize,
            episodes: self.episodes as usize,
            base_seed: self.seed,
            tim: self.tim.config(variant, self.seed),
        }
    }

    fn workers(&self) -> usize {
        self.workers
            .map(|w| w as usize)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    campaign: CampaignArgs,
    #[arg(long, default_value_t = Variant::FtTim)]
    variant: Variant,
}

#[derive(Args, Debug)]
struct TheoryArgs {
    #[arg(long, env = "FTTIM_SEED", default_value_t = 0)]
    seed: u64,
    /// Instances for the decomposition identity.
    #[arg(long, default_value_t = 1000)]
    instances: usize,
    #[arg(long, default_value_t = 100)]
    kkt_instances: usize,
    #[arg(long, default_value_t = 0.01)]
    kkt_tau: f64,
    #[arg(long, default_value_t = 200)]
    micro_instances: usize,
    /// Instances for the MM sweep and the gap trace.
    #[arg(long, default_value_t = 500)]
    mm_instances: usize,
    #[arg(long, default_value_t = 0.001)]
    mm_tau: f64,
    /// Temperatures for the gap trace, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 0.1, 0.01, 0.001])]
    tau_sweep: Vec<f64>,
    /// Where to write the gap-trace CSV.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, hide = true, default_value_t = 1.0)]
    tamper_scale: f64,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(2..))]
    ways: u64,
    #[arg(long, default_value_t = 15, value_parser = clap::value_parser!(u64).range(1..))]
    queries: u64,
    #[arg(long, env = "FTTIM_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = Variant::FtTim)]
    variant: Variant,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[command(flatten)]
    tim: TimArgs,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn evaluate(args: &EvaluateArgs) -> Result<ExitCode> {
    let campaign = args.campaign.campaign(args.variant);
    campaign.validate()?;
    let source = LoadedSource::load(&campaign.source)?;
    let start = Instant::now();
    let mut outcomes = run_paired(
        &source,
        &campaign,
        std::slice::from_ref(&campaign.tim),
        args.campaign.workers(),
    )?;
    let report = EvalReport::new(
        &campaign,
        &campaign.tim,
        &outcomes.pop().expect("one run"),
        start.elapsed().as_secs_f64(),
    );
    print!("{}", eval_table(std::slice::from_ref(&report)));
    if let Some(out) = &args.campaign.out {
        write_file(out, &to_json(&report))?;
    }
    Ok(exit_for_failures(report.failures()))
}

fn compare(args: &CampaignArgs) -> Result<ExitCode> {
    let campaign = args.campaign(Variant::FtTim);
    campaign.validate()?;
    let source = LoadedSource::load(&campaign.source)?;
    let configs: Vec<TimConfig> = Variant::ALL
        .iter()
        .map(|&v| campaign.tim.with_variant(v))
        .collect();
    let start = Instant::now();
    let outcomes = run_paired(&source, &campaign, &configs, args.workers())?;
    let elapsed = start.elapsed().as_secs_f64();
    let reports = configs
        .iter()
        .zip(&outcomes)
        .map(|(cfg, o)| EvalReport::new(&campaign, cfg, o, elapsed))
        .collect();
    let report = CompareReport::new(reports, elapsed);
    print!("{}", compare_table(&report));
    if let Some(out) = &args.out {
        write_file(out, &to_json(&report))?;
    }
    Ok(exit_for_failures(report.failures()))
}

fn verify_theory(args: &TheoryArgs) -> Result<ExitCode> {
    let cfg = TheoryConfig {
        seed: args.seed,
        decomposition_instances: args.instances,
        kkt_instances: args.kkt_instances,
        kkt_tau: args.kkt_tau,
        micro_instances: args.micro_instances,
        mm_instances: args.mm_instances,
        mm_tau: args.mm_tau,
        tau_sweep: args.tau_sweep.clone(),
        clustering_scale: args.tamper_scale,
        ..TheoryConfig::default()
    };
    let report = verify(&cfg)?;
    print!("{}", report.summary());
    if let Some(out) = &args.out {
        write_file(out, &gap_trace_csv(&report.gap_rows))?;
    }
    if report.exact_failure() {
        eprintln!("exact identity violated");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn export(args: &ExportArgs) -> Result<ExitCode> {
    let campaign = CampaignSpec {
        source: args.source.spec(),
        ways: args.ways as usize,
        queries_per_class: args.queries as usize,
        heldout_per_class: 0,
        episodes: 1,
        base_seed: args.seed,
        tim: args.tim.config(args.variant, args.seed),
    };
    campaign.validate()?;
    let source = LoadedSource::load(&campaign.source)?;
    let episode = source.episode(&campaign, args.seed)?;
    let summary = export_embeddings(&episode, &campaign.tim, &args.out)?;
    print!("{}", to_json(&summary));
    Ok(ExitCode::SUCCESS)
}

fn exit_for_failures(failures: usize) -> ExitCode {
    if failures > 0 {
        eprintln!("{failures} episode(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

fn main() -> ExitCode {
    let argv = match config::expand_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(argv);
    let result = match &cli.command {
        Command::Evaluate(a) => evaluate(a),
        Command::Compare(a) => compare(a),
        Command::VerifyTheory(a) => verify_theory(a),
        Command::ExportEmbeddings(a) => export(a),
    };
    match result {
        Ok(code) => code,
        Err(e @ BenchError::Usage(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
