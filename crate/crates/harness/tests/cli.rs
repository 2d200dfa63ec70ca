//! End-to-end checks of the `safe-explore` binary: exit codes, output
//! determinism (including across worker counts), and the config/flag
//! precedence rules.

use std::fs;
use std::path::PathBuf;
use std::process::Command;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_safe-explore"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("safe-explore-cli-{tag}-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn help_exits_zero() {
    let out = binary().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("bandit"));
    let out = binary().args(["bandit", "--help"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn unknown_flag_exits_one() {
    let out = binary().args(["bandit", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = binary().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn corridor_csv_is_deterministic_across_worker_counts() {
    let dir = temp_dir("corridor");
    let out_a = dir.join("a.csv");
    let out_b = dir.join("b.csv");
    for (path, threads) in [(&out_a, "1"), (&out_b, "2")] {
        let status = binary()
            .args([
                "corridor",
                "--length",
                "8",
                "--agents",
                "16",
                "--seed",
                "7",
                "--out",
            ])
            .arg(path)
            .env("SAFE_EXPLORE_THREADS", threads)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = fs::read_to_string(&out_a).unwrap();
    let b = fs::read_to_string(&out_b).unwrap();
    assert_eq!(a, b, "worker count changed the output");
    assert!(a.starts_with("kind,mode,agent,seed,transitions_to_goal"));
}

#[test]
fn oracle_round_trip_and_validate() {
    let dir = temp_dir("oracle");
    let mdp_path = dir.join("corridor.json");
    let out = binary()
        .args(["oracle", "--corridor-length", "15", "--dump-mdp"])
        .arg(&mdp_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("unsafe pairs: 31 / 68"), "{text}");

    let out = binary().args(["oracle", "--mdp"]).arg(&mdp_path).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("unsafe pairs: 31 / 68"));

    let out = binary().args(["validate", "--mdp"]).arg(&mdp_path).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok:"));

    // Corrupt the probability mass and expect a cited violation, exit 1.
    let broken = fs::read_to_string(&mdp_path).unwrap().replacen("1.0", "0.5", 1);
    let broken_path = dir.join("broken.json");
    fs::write(&broken_path, broken).unwrap();
    let out = binary().args(["validate", "--mdp"]).arg(&broken_path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("violation"));
}

#[test]
fn grid_runs_from_map_file() {
    let dir = temp_dir("map");
    let map_path = dir.join("grid.map");
    fs::write(&map_path, ".....\n..O..\n.....\n").unwrap();
    let out_path = dir.join("grid.csv");
    let status = binary()
        .args(["grid", "--map"])
        .arg(&map_path)
        .args(["--runs", "1", "--seed", "3", "--out"])
        .arg(&out_path)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(&out_path).unwrap();
    assert!(csv.lines().last().unwrap().starts_with("summary,"));
}

#[test]
fn config_file_sets_fields_and_flags_override() {
    let dir = temp_dir("config");
    let config_path = dir.join("bandit.json");
    fs::write(
        &config_path,
        r#"{
            "experiment": "bandit_sweep",
            "n_arms": 25,
            "mu": 0.1,
            "arm_lo": 0.0,
            "arm_hi": 0.2,
            "epsilons": [0.05],
            "alphas": [0.2],
            "seeds": {"base_seed": 9, "n_runs": 3},
            "horizon_factor": 10.0,
            "arm_file": null,
            "output_path": null
        }"#,
    )
    .unwrap();
    let out_path = dir.join("sweep.csv");
    let status = binary()
        .args(["bandit", "--config"])
        .arg(&config_path)
        .args(["--alphas", "0.3,0.5", "--out"])
        .arg(&out_path)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(&out_path).unwrap();
    // Config fields survive (3 runs, eps 0.05) while the flag replaced alphas.
    assert!(csv.contains("summary,0.3,0.05"));
    assert!(csv.contains("summary,0.5,0.05"));
    assert!(!csv.contains("summary,0.2,0.05"));
}

#[test]
fn bandit_arms_file_fixes_the_instance() {
    let dir = temp_dir("arms");
    let arms_path = dir.join("arms.txt");
    fs::write(&arms_path, "0.0\n0.05\n0.15\n0.2\n").unwrap();
    let out_path = dir.join("sweep.csv");
    let status = binary()
        .args(["bandit", "--arms-file"])
        .arg(&arms_path)
        .args(["--alphas", "0.2", "--epsilons", "0.05", "--runs", "3", "--seed", "1", "--out"])
        .arg(&out_path)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(&out_path).unwrap();
    // Two arms above mu = 0.1 in every run.
    for line in csv.lines().filter(|l| l.starts_with("run,")) {
        let n_unsafe: usize = line.split(',').nth(5).unwrap().parse().unwrap();
        assert_eq!(n_unsafe, 2, "{line}");
    }
}
