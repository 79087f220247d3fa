//! End-to-end checks of the binary: exit codes, determinism of outputs,
//! and the shape of the emitted files.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn riscf() -> Command {
    Command::new(env!("CARGO_BIN_EXE_riscf"))
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("riscf-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_scenario(dir: &Path) -> PathBuf {
    let path = dir.join("scenario.txt");
    std::fs::write(
        &path,
        "M = 12\nK = 4\nS = 3\nN = 6\nD = 1\nchannel_draws_per_topology = 50\ntopology_draws = 8\n",
    )
    .unwrap();
    path
}

fn read_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn rate_is_byte_identical_across_runs() {
    let dir = tmp_dir("rate-determinism");
    let scenario = write_scenario(&dir);
    let (a, b) = (dir.join("a"), dir.join("b"));
    for out in [&a, &b] {
        let status = riscf()
            .args(["--config", scenario.to_str().unwrap(), "--seed", "7", "--out"])
            .arg(out)
            .args(["rate", "--dump-inputs"])
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", stderr_of(&status));
    }
    let files_a = read_sorted(&a);
    let files_b = read_sorted(&b);
    assert_eq!(files_a.len(), 5, "rate + summary + three input dumps");
    assert_eq!(files_a, files_b, "outputs must be byte-identical");

    // stdout is deterministic too, apart from the output paths
    // (timing goes to stderr)
    let run = |out: &Path| {
        let stdout = riscf()
            .args(["--config", scenario.to_str().unwrap(), "--seed", "7", "--out"])
            .arg(out)
            .arg("rate")
            .output()
            .unwrap()
            .stdout;
        String::from_utf8(stdout)
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with("wrote "))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(run(&a), run(&b));
}

#[test]
fn short_pilots_rejected_with_exit_code_two() {
    let dir = tmp_dir("tau-c");
    let scenario = write_scenario(&dir);
    let out = riscf()
        .args(["--config", scenario.to_str().unwrap(), "--override", "tau_c=3", "--out"])
        .arg(&dir)
        .arg("min-rate")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("pilot_len_symbols"), "{}", stderr_of(&out));
}

#[test]
fn unknown_override_key_rejected() {
    let dir = tmp_dir("unknown-key");
    let scenario = write_scenario(&dir);
    let out = riscf()
        .args(["--config", scenario.to_str().unwrap(), "--override", "bogus=1"])
        .arg("rate")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("bogus"));
}

#[test]
fn validate_emits_table_and_summary() {
    let dir = tmp_dir("validate");
    let out = riscf()
        .args(["--override", "topology_draws=2", "--trials", "40", "--out"])
        .arg(&dir)
        .args(["validate", "--sweep-m", "4,8"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr_of(&out));

    let files = read_sorted(&dir);
    let csv = files.iter().find(|(n, _)| n.starts_with("validate_") && n.ends_with(".csv")).unwrap();
    let text = String::from_utf8(csv.1.clone()).unwrap();
    assert!(text.contains("m,closed_mean,mc_mean,mc_stderr,draws"));
    assert!(text.contains("# config_hash="));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 3, "{text}");

    let json = files.iter().find(|(n, _)| n.ends_with(".json")).unwrap();
    let value: serde_json::Value = serde_json::from_slice(&json.1).unwrap();
    assert_eq!(value["experiment"], "validate");
    assert_eq!(value["results"]["rows"].as_array().unwrap().len(), 2);
    assert!(value["config_hash"].as_str().unwrap().len() == 16);
}

#[test]
fn validate_accepts_range_sweep_syntax() {
    let dir = tmp_dir("validate-range");
    let out = riscf()
        .args(["--override", "topology_draws=2", "--trials", "20", "--out"])
        .arg(&dir)
        .args(["validate", "--sweep-m", "4..12:4"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr_of(&out));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("3 points"), "{stdout}");

    let bad = riscf().args(["validate", "--sweep-m", "4..:nope"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn throughput_reports_quantile_ratios() {
    let dir = tmp_dir("throughput");
    let scenario = write_scenario(&dir);
    let out = riscf()
        .args(["--config", scenario.to_str().unwrap(), "--trials", "8", "--out"])
        .arg(&dir)
        .args(["throughput", "--outage", "0.25"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr_of(&out));
    let files = read_sorted(&dir);
    assert!(files.iter().any(|(n, _)| n.starts_with("throughput_baseline_")));
    let json = files.iter().find(|(n, _)| n.starts_with("throughput_") && n.ends_with(".json")).unwrap();
    let value: serde_json::Value = serde_json::from_slice(&json.1).unwrap();
    assert_eq!(value["results"]["quantiles"].as_array().unwrap().len(), 1);
}

#[test]
fn min_rate_compares_against_baseline() {
    let dir = tmp_dir("min-rate");
    let scenario = write_scenario(&dir);
    let out = riscf()
        .args(["--config", scenario.to_str().unwrap(), "--trials", "10", "--out"])
        .arg(&dir)
        .args(["min-rate", "--outage", "0.1,0.5"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr_of(&out));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("ratio"), "{stdout}");

    let files = read_sorted(&dir);
    assert!(files.iter().any(|(n, _)| n.starts_with("min-rate_baseline_")));
    let json = files.iter().find(|(n, _)| n.starts_with("min-rate_") && n.ends_with(".json")).unwrap();
    let value: serde_json::Value = serde_json::from_slice(&json.1).unwrap();
    let quantiles = value["results"]["quantiles"].as_array().unwrap();
    assert_eq!(quantiles.len(), 2);
    assert!(quantiles[0]["ratio"].as_f64().is_some());
}

#[test]
fn ap_sweep_reports_equivalent_ap_counts() {
    let dir = tmp_dir("ap-sweep");
    let scenario = write_scenario(&dir);
    let out = riscf()
        .args(["--config", scenario.to_str().unwrap(), "--trials", "6", "--out"])
        .arg(&dir)
        .args(["ap-sweep", "--cf-m", "8,12,16", "--ris-m", "12", "--ris-s", "0,6"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr_of(&out));
    let files = read_sorted(&dir);
    let csv = files.iter().find(|(n, _)| n.starts_with("ap_sweep_") && n.ends_with(".csv")).unwrap();
    let text = String::from_utf8(csv.1.clone()).unwrap();
    assert!(text.contains("kind,ap_count,ris_count,mean_sum_rate,stderr,equivalent_ap_count"));
    assert_eq!(text.lines().filter(|l| l.starts_with("cf,")).count(), 3);
    assert_eq!(text.lines().filter(|l| l.starts_with("ris,")).count(), 2);
}

#[test]
fn json_format_skips_csv_tables() {
    let dir = tmp_dir("json-only");
    let scenario = write_scenario(&dir);
    let out_dir = dir.join("out");
    let out = riscf()
        .args(["--config", scenario.to_str().unwrap(), "--format", "json", "--out"])
        .arg(&out_dir)
        .arg("rate")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr_of(&out));
    let files = read_sorted(&out_dir);
    assert_eq!(files.len(), 1);
    assert!(files[0].0.ends_with(".json"));
}

#[test]
fn output_directory_env_var_is_honored() {
    let dir = tmp_dir("env-out");
    let scenario = write_scenario(&dir);
    let out_dir = dir.join("from-env");
    let out = riscf()
        .env("RISCF_OUT", &out_dir)
        .args(["--config", scenario.to_str().unwrap()])
        .arg("rate")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr_of(&out));
    assert!(read_sorted(&out_dir).iter().any(|(n, _)| n.starts_with("rate_")));
}

#[test]
fn missing_required_keys_name_the_fields() {
    let out = riscf().arg("rate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_of(&out);
    for key in ["ap_count", "user_count", "ris_count", "elements_per_ris", "area_side_km"] {
        assert!(err.contains(key), "{err}");
    }
}

#[test]
fn threads_flag_does_not_change_results() {
    let dir = tmp_dir("threads");
    let scenario = write_scenario(&dir);
    let run = |threads: &str, sub: &str| {
        let out_dir = dir.join(format!("t{threads}-{sub}"));
        let out = riscf()
            .args(["--config", scenario.to_str().unwrap(), "--threads", threads, "--out"])
            .arg(&out_dir)
            .arg("rate")
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", stderr_of(&out));
        read_sorted(&out_dir)
    };
    assert_eq!(run("1", "a"), run("2", "b"));
}
