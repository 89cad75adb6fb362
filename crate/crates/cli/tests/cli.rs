use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cascade_boot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cascade-boot"))
        .args(args)
        .env_remove("CASCADE_BOOT_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn json(args: &[&str]) -> Value {
    let mut all = args.to_vec();
    all.extend(["--format", "json"]);
    let out = cascade_boot(&all);
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(&out)))
}

fn config_path(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name).display().to_string()
}

#[test]
fn kvalue_example() {
    let out = cascade_boot(&["kvalue", "--perm", "2,3,1"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("K = 1"), "{text}");
    assert!(text.contains("(0 1 3)(2)"), "{text}");
}

#[test]
fn enumerate_csv_row() {
    let out = cascade_boot(&["enumerate", "--n", "4", "--format", "csv"]);
    assert!(out.status.success());
    let counts: Vec<String> = stdout(&out).lines().skip(1).map(|l| l.split(',').nth(2).unwrap().to_string()).collect();
    assert_eq!(counts, ["8", "12", "3", "1"]);
    assert!(stdout(&out).starts_with("n,k,count,relative_frequency\n"));
}

#[test]
fn enumerate_classes() {
    let v = json(&["enumerate", "--n", "6", "--classes"]);
    assert_eq!(v["classes"]["B1.4"]["count"], 5);
    assert_eq!(v["unclassified"], 0);
}

#[test]
fn cost_example() {
    let v = json(&["cost", "--nr", "10000", "--ndelta", "300", "--n1", "1000", "--n2", "1000", "--ndeltaslab", "30"]);
    let r = v["reports"].as_array().unwrap();
    assert_eq!((r[0]["generations"].as_u64(), r[0]["products"].as_u64()), (Some(3_000_000), Some(2_990_000)));
    assert_eq!((r[2]["generations"].as_u64(), r[2]["products"].as_u64()), (Some(1000), Some(120_000)));
}

#[test]
fn covariance_with_oracle() {
    let v = json(&["covariance", "--perm", "1,2,3", "--m", "2", "--oracle"]);
    assert_eq!(v["total"], 16.0);
    assert_eq!(v["oracle_agrees"], true);
}

#[test]
fn quick_verify_passes() {
    let out = cascade_boot(&["verify", "--quick"]);
    assert!(out.status.success(), "{}", stdout(&out));
    assert!(stdout(&out).contains("12/12 passed"));
}

#[test]
fn usage_errors_exit_nonzero() {
    let out = cascade_boot(&["kvalue", "--perm", "1,1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    assert!(!cascade_boot(&["frobnicate"]).status.success());
    assert!(!cascade_boot(&["enumerate", "--n", "12"]).status.success());
}

#[test]
fn mc_cov_is_reproducible_and_seedable() {
    let args = ["mc-cov", "--perm", "2,1", "--m", "3", "--trials", "20000", "--jobs", "2"];
    let a = json(&[&args[..], &["--seed", "5"]].concat());
    let b = json(&[&args[..], &["--seed", "5"]].concat());
    assert_eq!(a, b);
    assert_eq!(a["pass"], true);
    let from_env: Value = serde_json::from_slice(
        &Command::new(env!("CARGO_BIN_EXE_cascade-boot"))
            .args(args)
            .args(["--format", "json"])
            .env("CASCADE_BOOT_SEED", "5")
            .output()
            .unwrap()
            .stdout,
    )
    .unwrap();
    assert_eq!(from_env, a);
    let c = json(&[&args[..], &["--seed", "6"]].concat());
    assert_ne!(a["estimate"], c["estimate"]);
}

#[test]
fn bias_demo_flags() {
    let v = json(&["bias-demo", "--seq", "1,1", "--m", "3", "--trials", "20000"]);
    assert_eq!(v["pass"], true);
    assert_eq!(v["predicted_bias"][0][0][0], 1.0);
    let v = json(&["bias-demo", "--random", "3", "--pool-size", "5", "--m", "2", "--trials", "20000"]);
    assert_eq!(v["pass"], true);
}

#[test]
fn simulate_is_bit_exact_and_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = cascade_boot(&[
            "simulate",
            "--config",
            &config_path("dual_pool.json"),
            "--jobs",
            "2",
            "--save-matrices",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        out_dir
    };
    let (a, b) = (run("a"), run("b"));
    for file in ["summary.csv", "provenance.json", "matrices.bin", "result.txt"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
    let manifest: Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 7);
    assert_eq!(manifest["workers"], 2);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 4);
    for o in manifest["outputs"].as_array().unwrap() {
        assert_eq!(o["sha256"].as_str().unwrap().len(), 64);
    }

    let predicted = json(&["predict-var", "--provenance", a.join("provenance.json").to_str().unwrap()]);
    assert_eq!(predicted["prediction"]["n_z"], 200);
    assert!(predicted["ratio"]["approximate"].as_f64().unwrap() >= 1.0);
}

#[test]
fn flat_config_and_complex_simulation() {
    let v = json(&["simulate", "--config", &config_path("ballistic.conf"), "--seed", "3"]);
    assert_eq!(v["seed"], 3);
    assert_eq!(v["realisations"], 500);
}

#[test]
fn predict_var_from_sequence_list() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("seqs.json");
    fs::write(&path, "[[1,2],[1,2]]").unwrap();
    let v = json(&["predict-var", "--provenance", path.to_str().unwrap(), "--m", "3"]);
    assert_eq!(v["prediction"]["correlation_term"], 13.5);
    assert_eq!(v["ratio"]["approximate"], 3.0);
}

#[test]
fn pool_files_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let gen = |name: &str, extra: &[&str]| {
        let path = dir.path().join(name);
        let mut args = vec!["pool", "gen", "--m", "3", "--size", "6", "--seed", "9", "--out", path.to_str().unwrap()];
        args.extend(extra);
        assert!(cascade_boot(&args).status.success());
        path
    };
    let (a, b) = (gen("a.bin", &[]), gen("b.bin", &["--jobs", "3"]));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let light = gen("c.bin", &["--no-matrices"]);
    assert!(fs::metadata(&light).unwrap().len() < fs::metadata(&a).unwrap().len());
    let info = json(&["pool", "info", a.to_str().unwrap()]);
    assert_eq!(info["size"], 6);
    assert_eq!(info["seed_record"]["master_seed"], 9);
    assert!(dir.path().join("a.bin.manifest.json").exists());
}
