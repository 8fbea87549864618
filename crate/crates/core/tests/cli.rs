//! End-to-end runs of the `scrisk` binary: pipeline wiring, exit codes,
//! manifest replay determinism, and input immutability.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_scrisk")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .env("SCRISK_WORKERS", "2")
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "scrisk {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

struct TempDir(PathBuf);

impl TempDir {
    fn new(tag: &str) -> TempDir {
        let dir = std::env::temp_dir().join(format!("scrisk-cli-{tag}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        TempDir(dir)
    }

    fn path(&self, name: &str) -> String {
        self.0.join(name).display().to_string()
    }
}

impl Drop for TempDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn generate_fixture(dir: &TempDir) -> (String, String) {
    let net = dir.path("net.csv");
    let ess = dir.path("ess.csv");
    run_ok(&[
        "generate", "--firms", "50", "--sectors", "5", "--seed", "11", "--output", &net,
        "--ess-output", &ess,
    ]);
    (net, ess)
}

#[test]
fn esri_command_matches_library() {
    let dir = TempDir::new("esri");
    let (net_path, ess_path) = generate_fixture(&dir);
    let out_dir = dir.path("esri_out");
    let out = run_ok(&[
        "esri", "--input", &net_path, "--essentiality", &ess_path, "--output-dir", &out_dir,
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("mean ESRI"));

    // same computation through the library
    let net = scrisk::edgelist::load_edge_list(
        &net_path,
        scrisk::network::Mode::Weighted,
        &scrisk::edgelist::LoadOptions::default(),
    )
    .unwrap();
    let ess = scrisk::production::EssentialityMatrix::load_csv(
        &ess_path,
        scrisk::production::Essentiality::NonEssential,
    )
    .unwrap();
    let model = scrisk::production::calibrate(&net, &ess, 0.5).unwrap();
    let profile =
        scrisk::cascade::risk_profile(&net, &model, &scrisk::cascade::CascadeConfig::default())
            .unwrap();
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(Path::new(&out_dir).join("summary.json")).unwrap())
            .unwrap();
    let mean = summary["mean"].as_f64().unwrap();
    assert!((mean - profile.mean).abs() < 1e-12);
    // profile csv has one row per firm plus header
    let csv = std::fs::read_to_string(Path::new(&out_dir).join("profile.csv")).unwrap();
    assert_eq!(csv.lines().count(), net.n_firms() + 1);
}

#[test]
fn default_essential_fallback_runs_without_file() {
    let dir = TempDir::new("fallback");
    let (net_path, _) = generate_fixture(&dir);
    let out_dir = dir.path("out");
    run_ok(&[
        "esri", "--input", &net_path, "--default-essential", "--output-dir", &out_dir,
    ]);
}

#[test]
fn optimize_is_deterministic_and_replayable_from_manifest() {
    let dir = TempDir::new("determinism");
    let (net_path, ess_path) = generate_fixture(&dir);
    let net_digest_before = std::fs::read(&net_path).unwrap();

    let run1 = dir.path("run1");
    let run2 = dir.path("run2");
    let replay = dir.path("replay");
    let base_args = [
        "optimize", "--input", &net_path, "--essentiality", &ess_path, "--steps", "60",
        "--beta", "linear:4000:60", "--seed", "9", "--snapshot-every", "30",
    ];
    run_ok(&[&base_args[..], &["--output-dir", &run1]].concat());
    run_ok(&[&base_args[..], &["--output-dir", &run2]].concat());
    let t1 = std::fs::read(Path::new(&run1).join("trajectory.csv")).unwrap();
    let t2 = std::fs::read(Path::new(&run2).join("trajectory.csv")).unwrap();
    assert_eq!(t1, t2, "same seed, same trajectory bytes");

    let manifest = Path::new(&run1).join("manifest.json");
    run_ok(&[
        "optimize",
        "--input",
        "ignored.csv",
        "--manifest",
        &manifest.display().to_string(),
        "--output-dir",
        &replay,
    ]);
    let t3 = std::fs::read(Path::new(&replay).join("trajectory.csv")).unwrap();
    assert_eq!(t1, t3, "replay from manifest is byte-identical");

    for name in ["final.csv", "best.csv", "initial.csv", "moves.jsonl"] {
        let a = std::fs::read(Path::new(&run1).join(name)).unwrap();
        let b = std::fs::read(Path::new(&replay).join(name)).unwrap();
        assert_eq!(a, b, "{name} differs under replay");
    }

    // inputs are never mutated
    assert_eq!(std::fs::read(&net_path).unwrap(), net_digest_before);

    // report over the finished run
    let report_dir = dir.path("report");
    run_ok(&["report", "--run-dir", &run1, "--output-dir", &report_dir]);
    for artifact in [
        "summary.csv",
        "summary.json",
        "trajectory.svg",
        "profile_compare.svg",
        "profile_diff.csv",
        "metrics_trajectory.csv",
    ] {
        assert!(
            Path::new(&report_dir).join(artifact).exists(),
            "missing report artifact {artifact}"
        );
    }
    // the re-scored final network agrees with the trajectory endpoint
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(Path::new(&report_dir).join("summary.json")).unwrap(),
    )
    .unwrap();
    let mitigated_mean = report
        .as_array()
        .unwrap()
        .iter()
        .find(|row| row["artifact"] == "risk_mitigated")
        .unwrap()["mean_esri"]
        .as_f64()
        .unwrap();
    let trajectory =
        std::fs::read_to_string(Path::new(&run1).join("trajectory.csv")).unwrap();
    let last_mean: f64 = trajectory
        .lines()
        .last()
        .unwrap()
        .split(',')
        .nth(2)
        .unwrap()
        .parse()
        .unwrap();
    assert!(
        (mitigated_mean - last_mean).abs() < 1e-9,
        "report mean {mitigated_mean} vs trajectory endpoint {last_mean}"
    );
}

#[test]
fn beta_zero_accepts_every_step() {
    let dir = TempDir::new("beta0");
    let (net_path, ess_path) = generate_fixture(&dir);
    let run_dir = dir.path("run");
    run_ok(&[
        "optimize", "--input", &net_path, "--essentiality", &ess_path, "--steps", "40",
        "--beta", "0", "--seed", "2", "--output-dir", &run_dir,
    ]);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(Path::new(&run_dir).join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["accepted"].as_u64().unwrap(), 40);
    assert_eq!(summary["acceptance_rate"].as_f64().unwrap(), 1.0);
}

#[test]
fn config_file_values_with_flag_override() {
    let dir = TempDir::new("config");
    let (net_path, ess_path) = generate_fixture(&dir);
    let cfg_path = dir.path("run.conf");
    std::fs::write(
        &cfg_path,
        "# run settings\nsteps = 25\nbeta = fixed:100\nseed = 4\n",
    )
    .unwrap();
    let run_dir = dir.path("run");
    // --steps flag wins over the config file's 25
    run_ok(&[
        "optimize", "--input", &net_path, "--essentiality", &ess_path, "--config", &cfg_path,
        "--steps", "10", "--output-dir", &run_dir,
    ]);
    let trajectory =
        std::fs::read_to_string(Path::new(&run_dir).join("trajectory.csv")).unwrap();
    assert_eq!(trajectory.lines().count(), 11, "10 steps + header");
    assert!(trajectory.lines().nth(1).unwrap().starts_with("1,100,"));
}

#[test]
fn exit_codes_follow_error_classes() {
    let dir = TempDir::new("exitcodes");
    // missing input file → data error (3)
    let out = run(&[
        "esri", "--input", &dir.path("absent.csv"), "--default-essential", "--output-dir",
        &dir.path("x"),
    ]);
    assert_eq!(out.status.code(), Some(3));

    // malformed network file → parse/data error (3)
    let bad = dir.path("bad.csv");
    std::fs::write(&bad, "source,target,source_nace3,target_nace3,weight\nA,B,101\n").unwrap();
    let out = run(&[
        "esri", "--input", &bad, "--default-essential", "--output-dir", &dir.path("y"),
    ]);
    assert_eq!(out.status.code(), Some(3));

    // bad gamma → config error (2)
    let (net_path, _) = generate_fixture(&dir);
    let out = run(&[
        "esri", "--input", &net_path, "--default-essential", "--gamma-ne", "1.5",
        "--output-dir", &dir.path("z"),
    ]);
    assert_eq!(out.status.code(), Some(2));

    // report on an empty dir → explicit data error (3)
    let empty = dir.path("empty");
    std::fs::create_dir_all(&empty).unwrap();
    let out = run(&["report", "--run-dir", &empty, "--output-dir", &dir.path("r")]);
    assert_eq!(out.status.code(), Some(3));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("manifest"), "explains what is missing: {msg}");
}

#[test]
fn extract_subcommands_produce_induced_subnetworks() {
    let dir = TempDir::new("extract");
    let (net_path, _) = generate_fixture(&dir);
    // community extraction over all generated divisions
    let sub = dir.path("community.csv");
    run_ok(&[
        "extract", "community", "--input", &net_path, "--divisions", "10-20",
        "--target-size", "10", "--output", &sub,
    ]);
    let net = scrisk::edgelist::load_edge_list(
        &sub,
        scrisk::network::Mode::Weighted,
        &scrisk::edgelist::LoadOptions {
            min_weight: scrisk::weight::Weight::ZERO,
        },
    )
    .unwrap();
    assert!(net.n_firms() > 0);
    assert!(Path::new(&dir.path("community.provenance.json")).exists());

    // seed extraction around the largest generated sector
    let seed_out = dir.path("seed.csv");
    let out = run(&[
        "extract", "seed-sector", "--input", &net_path, "--seed-sector", "100",
        "--supplier-groups", "3", "--customer-groups", "3", "--min-group-size", "1",
        "--output", &seed_out,
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
