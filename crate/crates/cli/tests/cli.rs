use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn csp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csp"))
        .args(args)
        .env_remove("CSP_SEED")
        .output()
        .expect("csp runs")
}

fn lines(out: &Output) -> Vec<Value> {
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).expect("each line is JSON"))
        .collect()
}

fn tmp(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name)
}

#[test]
fn header_carries_schema_and_config() {
    let out = csp(&["--seed", "3", "sample", "crp", "--theta", "2", "--n", "6", "--reps", "4"]);
    assert!(out.status.success());
    let v = lines(&out);
    assert_eq!(v.len(), 5);
    assert_eq!(v[0]["schema"], "csp-report/1");
    let config = &v[0]["config"];
    assert_eq!(config["subcommand"], "sample crp");
    assert_eq!(config["seed"], 3);
    assert_eq!(config["n"], 6);
    assert_eq!(config["params"]["theta"], 2.0);
    for (i, rec) in v[1..].iter().enumerate() {
        assert_eq!(rec["rep"], i);
        assert!(rec["log_prob"].as_f64().unwrap() < 0.0);
    }
}

#[test]
fn seed_from_environment_matches_flag() {
    let flag = csp(&["--seed", "11", "sample", "ibp", "--reps", "20"]);
    let env = Command::new(env!("CARGO_BIN_EXE_csp"))
        .args(["sample", "ibp", "--reps", "20"])
        .env("CSP_SEED", "11")
        .output()
        .unwrap();
    assert_eq!(flag.stdout, env.stdout);
}

#[test]
fn enumerated_eppf_sums_to_one() {
    let out = csp(&["prob", "eppf", "--theta", "0.5", "--n", "4"]);
    assert!(out.status.success());
    let v = lines(&out);
    // Bell(4) partitions after the header.
    assert_eq!(v.len(), 1 + 15);
    let total: f64 = v[1..].iter().map(|r| r["prob"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12, "{total}");
}

#[test]
fn csv_output_has_comment_header_and_columns() {
    let out = csp(&["--format", "csv", "prob", "eppf", "--sizes", "2,1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut it = text.lines();
    let header: Value = serde_json::from_str(it.next().unwrap().strip_prefix("# ").unwrap()).unwrap();
    assert_eq!(header["schema"], "csp-report/1");
    assert_eq!(it.next().unwrap(), "block_sizes,log_prob,prob,structure");
    let row = it.next().unwrap();
    assert!(row.starts_with("\"[2,1]\","), "{row}");
    assert!(it.next().is_none());
}

#[test]
fn output_flag_writes_the_same_report() {
    let path = tmp("cli_output_flag.jsonl");
    let args = ["--seed", "5", "sample", "gem", "--k", "6", "--reps", "3"];
    let stdout = csp(&args);
    let mut with_file = args.to_vec();
    let p = path.to_str().unwrap();
    with_file.extend(["--output", p]);
    let out = csp(&with_file);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let written = std::fs::read_to_string(&path).unwrap();
    // Only the recorded output path differs.
    let strip = |s: &str| s.lines().skip(1).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(&written), strip(std::str::from_utf8(&stdout.stdout).unwrap()));
    assert!(written.lines().next().unwrap().contains("cli_output_flag.jsonl"));
}

#[test]
fn exit_codes() {
    assert_eq!(csp(&["check", "epf"]).status.code(), Some(0));
    // A failed check still writes its report.
    let caught = csp(&["check", "epf", "--candidate", "inconsistent-example"]);
    assert_eq!(caught.status.code(), Some(1));
    assert_eq!(lines(&caught)[1]["passed"], false);
    assert_eq!(lines(&caught)[1]["detail"]["first_violation"]["kind"], "additivity");
    // A tolerance nobody can meet at this sample size.
    let tight = csp(&["equiv", "crp-self", "--reps", "200", "--tolerance", "1e-6"]);
    assert_eq!(tight.status.code(), Some(1));
    // Domain and usage errors.
    let domain = csp(&["prob", "eppf", "--theta=-1", "--sizes", "1"]);
    assert_eq!(domain.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&domain.stderr).contains("concentration"));
    assert_eq!(csp(&["sample", "nonsense"]).status.code(), Some(2));
    assert_eq!(csp(&["prob", "eppf"]).status.code(), Some(2));
    assert_eq!(csp(&["infer", "crp", "--data", "/nonexistent/x.jsonl"]).status.code(), Some(2));
}

#[test]
fn every_equivalence_pairing_runs() {
    for pairing in [
        "crp-gem",
        "crp-gamma-crm",
        "gamma-first-stick",
        "ibp-sticks",
        "ibp-round-sticks",
        "polya-urn",
        "crp-self",
    ] {
        // Small runs with loose tolerances: this checks plumbing, not laws.
        let out = csp(&["equiv", pairing, "--reps", "500", "--tolerance", "1", "--horizon", "100"]);
        assert_eq!(out.status.code(), Some(0), "{pairing}");
        let v = lines(&out);
        assert_eq!(v[0]["config"]["settings"]["pairing"], pairing);
        assert_eq!(v[1]["passed"], true);
    }
}

#[test]
fn crp_inference_separates_two_clusters() {
    let path = tmp("cli_two_clusters.jsonl");
    let (data, truth) = csp_cli::experiments::two_cluster_data(30, 9);
    let text: String = data.iter().map(|x| format!("{x}\n")).collect();
    std::fs::write(&path, text).unwrap();
    let out = csp(&["infer", "crp", "--data", path.to_str().unwrap(), "--sweeps", "100"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = lines(&out);
    let summary = v.last().unwrap();
    assert_eq!(summary["summary"], "posterior");
    let point: Vec<usize> = serde_json::from_value(summary["point_estimate"].clone()).unwrap();
    for i in 0..truth.len() {
        for j in 0..truth.len() {
            assert_eq!(point[i] == point[j], truth[i] == truth[j], "indices {i} {j}");
        }
    }
}

#[test]
fn ibp_inference_rejects_ragged_rows() {
    let path = tmp("cli_ragged.jsonl");
    std::fs::write(&path, "[1, 2]\n[3]\n").unwrap();
    let out = csp(&["infer", "ibp", "--data", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
