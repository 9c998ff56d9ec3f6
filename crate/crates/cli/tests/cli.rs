use std::path::PathBuf;
use std::process::{Command, Output};

use relaycap::generate::{diamond, line};

fn relaycap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relaycap"))
        .args(args)
        .env_remove("RELAYCAP_THREADS")
        .output()
        .expect("relaycap runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write_network(dir: &tempfile::TempDir, name: &str, json: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, json).unwrap();
    path
}

/// Top-level keys of a pretty-printed object, in output order.
fn json_keys(text: &str) -> Vec<String> {
    text.lines()
        .filter_map(|l| l.strip_prefix("  \""))
        .map(|l| l[..l.find('"').unwrap()].to_string())
        .collect()
}

#[test]
fn certificate_on_a_file_holds() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_network(&dir, "diamond.json", &diamond(2.0).unwrap().to_json());
    let out = relaycap(&["certificate", path.to_str().unwrap(), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let keys = json_keys(&text);
    assert_eq!(keys[..6], ["upper_bits", "lower_bits", "gap_bits", "bound_bits", "min_cut_iid", "per_cut"]);
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(value["gap_bits"].as_f64().unwrap() <= value["bound_bits"].as_f64().unwrap());
    assert_eq!(value["min_cut_iid"]["omega"], serde_json::json!(["S"]));
    assert_eq!(value["per_cut"].as_array().unwrap().len(), 4);
}

#[test]
fn trellis_check_reports_the_cut_count() {
    let out = relaycap(&["verify-trellis", "diamond", "--stages", "6"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).starts_with("0 violations / 4096 cuts\n"));
}

#[test]
fn trellis_violation_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_network(&dir, "link.json", &line(&[3.0]).unwrap().to_json());
    let out = relaycap(&["verify-trellis", path.to_str().unwrap(), "--stages", "4", "--format", "json"]);
    assert_eq!(out.status.code(), Some(4));
    let value: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(value["violations"], 1);
    assert_eq!(value["witnesses"][0]["sequence"], serde_json::json!([["S"], ["S"], ["S"], ["S"]]));
}

#[test]
fn oversized_trellis_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_network(&dir, "line.json", &line(&[2.0; 5]).unwrap().to_json());
    let out = relaycap(&["verify-trellis", path.to_str().unwrap(), "--stages", "6"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("capacity"));
}

#[test]
fn missing_and_malformed_files_exit_with_two() {
    assert_eq!(relaycap(&["bound", "missing.json"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let path = write_network(&dir, "bad.json", "{\"field\": \"real\"}");
    let out = relaycap(&["bound", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(relaycap(&[]).status.code(), Some(1));
    assert_eq!(relaycap(&["frobnicate", "diamond"]).status.code(), Some(1));
    assert_eq!(relaycap(&["sweep", "diamond", "--schemes", "af,xx"]).status.code(), Some(1));
    assert_eq!(relaycap(&["bound", "diamond", "--format", "yaml"]).status.code(), Some(1));
    assert_eq!(relaycap(&["--help"]).status.code(), Some(0));
}

#[test]
fn sweep_requires_the_template() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_network(&dir, "diamond.json", &diamond(2.0).unwrap().to_json());
    let out = relaycap(&["sweep", path.to_str().unwrap(), "--values", "2,4"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(relaycap(&["sweep", "diamond", "--param", "b"]).status.code(), Some(2));
}

#[test]
fn sweep_csv_has_the_column_contract() {
    let out = relaycap(&["sweep", "diamond", "--values", "2,4,8", "--schemes", "qmf,df", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "a,upper_bits,qmf_lower_bits,af_bits,df_bits,cf_bits,gap_qmf_bits,gap_af_bits,gap_df_bits");
    assert_eq!(lines.len(), 4);
    let cells: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(cells[0], "2");
    assert_eq!(cells[3], "", "af was not requested");
    assert_eq!(cells[5], "", "cf was not requested");
    assert!(!cells[4].is_empty());
}

#[test]
fn numbers_carry_twelve_significant_digits() {
    let out = relaycap(&["bound", "diamond", "--format", "json"]);
    let value: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    // min cut {S}: 1/2 log2(1 + 32^2 + 4^2)
    assert_eq!(value["upper_bits"].as_f64().unwrap(), 5.01187717665);
}

#[test]
fn text_output_has_one_line_per_cut() {
    let out = relaycap(&["bound", "diamond"]);
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().filter(|l| l.starts_with('{')).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("{S} "));
}

#[test]
fn field_override_warns() {
    let out = relaycap(&["bound", "diamond", "--field", "complex", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let value: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(value["upper_bits"].as_f64().unwrap(), 10.0237543533);
}

#[test]
fn loop_check_parses_named_sets() {
    let out = relaycap(&["verify-loop", "diamond", "--sets", "D,A1;D,A2", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let value: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(value["tilde_sets"], serde_json::json!([["A1", "A2", "D"], ["D"]]));
    assert_eq!(value["holds"], true);
    assert_eq!(relaycap(&["verify-loop", "diamond", "--sets", "D,Q;D"]).status.code(), Some(2));
    assert_eq!(relaycap(&["verify-loop", "diamond", "--sets", "S,D;D"]).status.code(), Some(2));
}

#[test]
fn simulate_json_fields_and_thread_env() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_network(&dir, "line.json", &line(&[100.0, 100.0]).unwrap().to_json());
    let args = ["simulate", path.to_str().unwrap(), "--trials", "50", "--seed", "9", "--format", "json"];
    let out = relaycap(&args);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json_keys(&stdout(&out))[..6], ["trials", "errors", "error_rate", "T", "rate_bits", "seed"]);

    let env_run = Command::new(env!("CARGO_BIN_EXE_relaycap"))
        .args(args)
        .env("RELAYCAP_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(env_run.stdout, out.stdout);
    assert_eq!(relaycap(&["simulate", "diamond", "--threads", "0"]).status.code(), Some(2));
}

#[test]
fn simulate_rejects_complex_networks() {
    let out = relaycap(&["simulate", "diamond", "--field", "complex"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unfold_and_achievable_reports() {
    let out = relaycap(&["unfold", "diamond", "--stages", "3", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let value: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(value["nodes"], 12);
    assert_eq!(value["memory_edges"], 4);
    let steady = value["steady_bits"].as_f64().unwrap();
    assert!((steady - 2.0 * 5.01187717665).abs() < 1e-10);

    let out = relaycap(&["achievable", "diamond", "--stages", "4", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).starts_with("layered_bits,conservative_bits,general_bits,stages,unfolded_bits\n"));
}
