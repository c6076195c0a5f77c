use std::path::Path;
use std::process::{Command, Output};

fn cachecost(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cachecost")).args(args).output().expect("spawn")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn solve_free_placement() {
    let out = cachecost(&["solve", "--users", "5", "--files", "10", "--rho", "0", "--alpha", "0.5", "--json"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["support"], serde_json::json!([5]));
    assert_eq!(v["r_delivery"], 0.0);
    assert_eq!(v["regime"]["tag"], "free-placement");
}

#[test]
fn solve_pair_example() {
    let out = cachecost(&["solve", "-k", "5", "-n", "10", "--rho", "0.1", "--alpha", "1", "--json"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["support"], serde_json::json!([1, 2]));
    assert!((v["r_delivery"].as_f64().unwrap() - 1.5).abs() < 1e-12);
    assert!((v["x"][1].as_f64().unwrap() - 0.1).abs() < 1e-12);
    assert_eq!(v["uncoded_is_optimal"], false);
}

#[test]
fn solve_table_mentions_regime() {
    let out = cachecost(&["solve", "-k", "5", "-n", "10", "--rho", "0.1", "--alpha", "1"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("architecture-limited(a=1, b=2)"), "{text}");
    assert!(text.contains("{1, 2}"));
}

#[test]
fn rho_above_one_needs_override() {
    let out = cachecost(&["solve", "--users", "5", "--files", "10", "--rho", "1.5"]);
    assert_eq!(code(&out), 1);
    let out = cachecost(&["solve", "-k", "5", "-n", "10", "--rho", "1.5", "--alpha", "0.5", "--allow-rho-gt-1"]);
    assert_eq!(code(&out), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&cachecost(&["solve", "-k", "5", "-n", "3", "--rho", "0.1", "--alpha", "1"])), 1);
    assert_eq!(code(&cachecost(&["solve", "-k", "5"])), 1);
    assert_eq!(code(&cachecost(&["frobnicate"])), 1);
    assert_eq!(code(&cachecost(&["--help"])), 0);
}

#[test]
fn verify_single_config() {
    let out = cachecost(&["verify", "-k", "5", "-n", "10", "--rho", "0.1", "--alpha", "1", "--json"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["points"], 1);
    assert_eq!(v["claims_passed"], 1);
    assert!(v["max_discrepancy"].as_f64().unwrap() < 1e-9);
}

#[test]
fn verify_small_grid() {
    let out = cachecost(&[
        "verify", "--k-min", "2", "--k-max", "4", "--rho-steps", "11", "--alpha-steps", "11", "--json",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["points"], 3 * 3 * 11 * 11);
}

#[test]
fn verify_empty_grid() {
    assert_eq!(code(&cachecost(&["verify", "--rho-steps", "0"])), 1);
    assert_eq!(code(&cachecost(&["verify", "--k-min", "5", "--k-max", "4"])), 1);
}

#[test]
fn simulate_exact_case() {
    let out = cachecost(&[
        "simulate", "-k", "5", "-n", "10", "--rho", "0.1", "--alpha", "1", "--file-length", "600", "--json",
    ]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["sizes"], serde_json::json!([0, 60, 30, 0, 0, 0]));
    assert_eq!(v["decoded"], serde_json::json!([true, true, true, true, true]));
    for phase in ["placement", "delivery"] {
        let m = v[phase]["measured"].as_f64().unwrap();
        assert!((m - 1.5).abs() < 1e-12, "{phase}: {m}");
    }
}

#[test]
fn simulate_full_caching() {
    let out = cachecost(&["simulate", "-k", "2", "-n", "2", "--rho", "0", "--alpha", "0", "--file-length", "10", "--json"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["placement"]["measured"], 0.0);
    assert_eq!(v["decoded"], serde_json::json!([true, true]));
}

#[test]
fn simulate_rejects_tiny_file_and_repeated_demand() {
    let tiny = cachecost(&["simulate", "-k", "5", "-n", "10", "--rho", "0.1", "--alpha", "1", "--file-length", "3"]);
    assert_eq!(code(&tiny), 1);
    assert!(String::from_utf8_lossy(&tiny.stderr).contains("quantization"));
    let repeated = cachecost(&["simulate", "-k", "3", "-n", "4", "--rho", "0.1", "--alpha", "1", "--demand", "1,1,2"]);
    assert_eq!(code(&repeated), 1);
}

#[test]
fn simulate_writes_transcripts() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    let out = cachecost(&[
        "simulate", "-k", "3", "-n", "5", "--rho", "0.05", "--alpha", "0.6", "--demand", "5,2,4",
        "--seed", "11", "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["report"]["demand"], serde_json::json!([5, 2, 4]));
    assert_eq!(v["delivery"]["transmissions"].as_array().unwrap().len(), 7);
    let digest = v["delivery"]["transmissions"][0]["digest"].as_str().unwrap();
    assert_eq!(digest.len(), 64);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, r#"{"users": 5, "files": 10, "rho": 0.1, "alpha": 0.2}"#).unwrap();
    let out = cachecost(&["--config", path.to_str().unwrap(), "solve", "--alpha", "1", "--json"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["config"]["alpha"], 1.0);
    assert_eq!(v["support"], serde_json::json!([1, 2]));

    let missing = cachecost(&["--config", dir.path().join("none.json").to_str().unwrap(), "solve"]);
    assert_eq!(code(&missing), 3);
}

fn sweep_to(dir: &Path, name: &str, extra: &[&str]) -> (String, serde_json::Value) {
    let csv = dir.join(name);
    let mut args = vec!["sweep", "--out", csv.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = cachecost(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = dir.join(format!("{name}.manifest.json"));
    let m = serde_json::from_str(&std::fs::read_to_string(manifest).unwrap()).unwrap();
    (std::fs::read_to_string(csv).unwrap(), m)
}

#[test]
fn sweep_is_deterministic_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (a, ma) = sweep_to(dir.path(), "a.csv", &["--preset", "figure1"]);
    let (b, _) = sweep_to(dir.path(), "b.csv", &["--preset", "figure1"]);
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 1 + 31 * 101);
    assert_eq!(ma["row_count"], 31 * 101);
    assert_eq!(ma["spec"]["users"], 5);
    assert!(ma["version"].is_string());
    assert!(ma["timestamp"].as_u64().unwrap() > 0);
}

#[test]
fn sweep_rerun_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (a, _) = sweep_to(dir.path(), "a.csv", &["--outer", "alpha=0:1:6", "--inner", "n=5,10,20", "-k", "4", "--rho", "0.02"]);
    let manifest = dir.path().join("a.csv.manifest.json");
    let (b, _) = sweep_to(dir.path(), "b.csv", &["--config", manifest.to_str().unwrap()]);
    assert_eq!(a, b);
    let first = a.lines().nth(1).unwrap();
    assert!(first.starts_with("4,5,0.02,0,"), "{first}");
}

#[test]
fn sweep_gain_zero_where_uncoded_optimal() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, _) = sweep_to(dir.path(), "fig3.csv", &["--preset", "figure3"]);
    let mut header = None;
    for line in csv.lines() {
        let cols: Vec<&str> = line.split(',').collect();
        let Some(h) = &header else {
            header = Some(cols.iter().map(|c| c.to_string()).collect::<Vec<_>>());
            continue;
        };
        let col = |name: &str| cols[h.iter().position(|c| c == name).unwrap()];
        let alpha: f64 = col("alpha").parse().unwrap();
        let gain: f64 = col("gain").parse().unwrap();
        assert!(gain >= -1e-9);
        if alpha <= 0.18 {
            assert!(gain.abs() <= 1e-9, "{line}");
        }
    }
}

#[test]
fn sweep_errors() {
    assert_eq!(code(&cachecost(&["sweep"])), 1);
    assert_eq!(code(&cachecost(&["sweep", "--outer", "alpha=0:1:5", "--inner", "alpha=0:1:5", "-k", "3", "-n", "3", "--rho", "0"])), 1);
    assert_eq!(code(&cachecost(&["sweep", "--outer", "alpha=0:1:1", "--inner", "rho=0:0.1:3", "-k", "3", "-n", "3"])), 1);
    let out = cachecost(&["sweep", "--preset", "figure2", "--out", "/nonexistent-dir/x.csv"]);
    assert_eq!(code(&out), 3);
}
