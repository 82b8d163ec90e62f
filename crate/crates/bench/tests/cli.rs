mod common;

use std::path::Path;
use std::process::{Command, Output};

use fttim_bench::report::{CompareReport, EvalReport, EVAL_REPORT_SCHEMA};
use fttim_core::features::load_feature_bank;

const FAST: &[&str] = &["--tim-iterations", "40", "--tim-transform-start", "10"];

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fttim-bench"))
        .args(args)
        .env_remove("FTTIM_SEED")
        .output()
        .unwrap()
}

fn with_fast(args: &[&str]) -> Vec<String> {
    args.iter().chain(FAST).map(|s| s.to_string()).collect()
}

fn run(args: &[String]) -> Output {
    bench(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_report(path: &Path) -> EvalReport {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn zero_episodes_is_a_usage_error_naming_the_flag() {
    let o = bench(&["evaluate", "--synthetic", "--episodes", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--episodes"));
}

#[test]
fn unknown_flags_and_conflicting_sources_are_rejected() {
    let o = bench(&["evaluate", "--synthetic", "--bogus", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--bogus"));
    let o = bench(&["evaluate", "--synthetic", "--features", "x.csv"]);
    assert_eq!(o.status.code(), Some(2));
    let o = bench(&["evaluate", "--synthetic", "--variant", "fancy"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--variant"));
}

#[test]
fn repeated_runs_give_identical_reports_that_match_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for out in [&a, &b] {
        let mut args = with_fast(&["evaluate", "--synthetic", "--episodes", "8", "--seed", "5"]);
        args.extend(["--out".into(), out.to_str().unwrap().into()]);
        assert!(run(&args).status.success());
    }
    let (ta, tb) = (
        std::fs::read_to_string(&a).unwrap(),
        std::fs::read_to_string(&b).unwrap(),
    );
    assert_eq!(
        common::without_wall_time(&ta),
        common::without_wall_time(&tb)
    );

    let schema: serde_json::Value = serde_json::from_str(EVAL_REPORT_SCHEMA).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let value: serde_json::Value = serde_json::from_str(&ta).unwrap();
    assert!(validator.is_valid(&value));

    let report = read_report(&a);
    assert_eq!(report.episodes, 8);
    assert_eq!(report.ci95_halfwidth, None, "fewer than thirty episodes");
    assert_eq!(report.seeds(), (5..13).collect::<Vec<u64>>());
}

#[test]
fn config_file_values_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("campaign.cfg");
    std::fs::write(&cfg, "# small campaign\nsynthetic=true\nepisodes=6\nways=3\ntim-iterations=30\ntim-transform-start=5\n").unwrap();
    let out = dir.path().join("r.json");
    let o = bench(&[
        "--config",
        cfg.to_str().unwrap(),
        "evaluate",
        "--ways",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = read_report(&out);
    assert_eq!(r.episodes, 6);
    assert_eq!(r.config_echo.ways, 4);
    assert_eq!(r.config_echo.tim.iterations, 30);

    std::fs::write(&cfg, "synthetic=true\nepisodes=6\nturbo=yes\n").unwrap();
    let o = bench(&["--config", cfg.to_str().unwrap(), "evaluate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--turbo"));
}

#[test]
fn seed_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let mut args = with_fast(&["evaluate", "--synthetic", "--episodes", "2"]);
    args.extend(["--out".into(), out.to_str().unwrap().into()]);
    let o = Command::new(env!("CARGO_BIN_EXE_fttim-bench"))
        .args(&args)
        .env("FTTIM_SEED", "41")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(read_report(&out).seeds(), vec![41, 42]);

    args.extend(["--seed".into(), "3".into()]);
    let o = Command::new(env!("CARGO_BIN_EXE_fttim-bench"))
        .args(&args)
        .env("FTTIM_SEED", "41")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(read_report(&out).seeds(), vec![3, 4]);
}

#[test]
fn compare_pairs_every_variant_on_the_same_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.json");
    let mut args = with_fast(&["compare", "--synthetic", "--episodes", "5", "--seed", "9"]);
    args.extend(["--out".into(), out.to_str().unwrap().into()]);
    let o = run(&args);
    assert!(o.status.success());
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(table.contains("ft_tim - tim_baseline"));
    let c: CompareReport = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(c.reports.len(), 3);
    for r in &c.reports {
        assert_eq!(r.seeds(), c.seeds);
        assert_eq!(r.per_episode.len(), 5);
    }
    assert_eq!(c.paired.len(), 3);
    let st = &c.paired[0].sign_test;
    assert_eq!(st.wins + st.losses + st.ties, 5);
}

#[test]
fn bank_campaigns_run_and_report_failures() {
    let dir = tempfile::tempdir().unwrap();
    let bank = dir.path().join("bank.csv");
    common::write_bank(&bank, 8, 20, 12, 1);
    let mut args = with_fast(&[
        "evaluate",
        "--features",
        bank.to_str().unwrap(),
        "--episodes",
        "4",
    ]);
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));

    // Three classes cannot fill a five-way episode: every episode fails.
    common::write_bank(&bank, 3, 20, 12, 1);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("4 episode(s) failed"));

    args[2] = dir.path().join("missing.csv").to_str().unwrap().into();
    let o = run(&args);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing.csv"));
}

#[test]
fn theory_sweep_writes_four_rows_per_instance() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("gap.csv");
    let o = bench(&[
        "verify-theory",
        "--instances",
        "40",
        "--kkt-instances",
        "5",
        "--micro-instances",
        "10",
        "--mm-instances",
        "7",
        "--tau-sweep",
        "1,0.1,0.01,0.001",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("PASS decomposition_identity") && stdout.contains("40/40"));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "instance_id,tau,H,bound,gap");
    assert_eq!(lines.len(), 1 + 4 * 7);
    assert!(lines[1..5].iter().all(|l| l.starts_with("0,")));
}

#[test]
fn tampered_identity_fails_the_run() {
    let o = bench(&[
        "verify-theory",
        "--instances",
        "20",
        "--kkt-instances",
        "1",
        "--micro-instances",
        "1",
        "--mm-instances",
        "1",
        "--tamper-scale",
        "1.001",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL decomposition_identity"));
}

#[test]
fn exported_tables_reload_and_transformed_rows_are_unit_norm() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("emb");
    let mut args = with_fast(&["export-embeddings", "--synthetic", "--seed", "2"]);
    args.extend(["--out".into(), out.to_str().unwrap().into()]);
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let raw = load_feature_bank::<f64>(out.join("raw.csv")).unwrap();
    let transformed = load_feature_bank::<f64>(out.join("transformed.csv")).unwrap();
    assert_eq!(raw.len(), 5 + 75);
    assert_eq!(transformed.len(), raw.len());
    for r in transformed.records() {
        let n: f64 = r.vector.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-12);
    }
    assert_eq!(
        load_feature_bank::<f64>(out.join("prototypes.csv"))
            .unwrap()
            .len(),
        5
    );
    assert_eq!(
        load_feature_bank::<f64>(out.join("predictions.csv"))
            .unwrap()
            .len(),
        75
    );
    assert_eq!(
        load_feature_bank::<f64>(out.join("transform.csv"))
            .unwrap()
            .len(),
        64
    );
    let trace: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("trace.json")).unwrap()).unwrap();
    assert_eq!(trace["loss_trace"].as_array().unwrap().len(), 40);

    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let mut args = with_fast(&["export-embeddings", "--synthetic"]);
    args.extend(["--out".into(), blocker.join("sub").to_str().unwrap().into()]);
    assert_eq!(run(&args).status.code(), Some(1));
}
