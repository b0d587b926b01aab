use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fracdec"))
}

fn exec(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!(
            "{e}: {}\n{}",
            String::from_utf8_lossy(&o.stdout),
            String::from_utf8_lossy(&o.stderr)
        )
    })
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn binom(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

#[test]
fn solve_missing_edge_weights_r3_q4() {
    let o = exec(&["solve-missing-edge", "--r", "3", "--q", "4"]);
    assert_eq!(code(&o), 0);
    let rep = stdout_json(&o);
    assert_eq!(rep["weights"], json!(["19/168", "3/28", "1/8"]));
    assert_eq!(rep["meta"]["tool"], "fracdec");
    assert_eq!(rep["meta"]["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(rep["meta"]["config_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn expanded_missing_edge_packing_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.json");
    let o = exec(&["solve-missing-edge", "--r", "2", "--q", "3", "--expand", path_str(&p)]);
    assert_eq!(code(&o), 0);
    let packing = read_json(&p);
    assert_eq!(packing["format"], "fracdec-packing/1");
    // K_6 - {0,1}: C(6,3) - 4 triangles, every weight a fraction string
    let entries = packing["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 16);
    assert!(entries.iter().all(|e| e["weight"].as_str().unwrap().contains('/')));
    let o = exec(&["verify", "--packing", path_str(&p)]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["status"], "pass");
}

#[test]
fn lp_on_four_cycle_is_infeasible_with_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("c.json");
    let graph = r#"{"kind":"explicit","n":4,"r":2,"edges":[[0,1],[1,2],[2,3],[0,3]]}"#;
    let o = exec(&["lp", "--graph", graph, "--q", "3", "--emit-certificate", path_str(&c)]);
    assert_eq!(code(&o), 2);
    assert_eq!(stdout_json(&o)["feasible"], false);
    let cert = read_json(&c);
    assert_eq!(cert["kind"], "infeasible");
    // no triangles: y^T A <= 0 holds vacuously, y^T 1 must be positive
    let total: i64 = cert["y"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| {
            let (n, d) = e["value"].as_str().unwrap().split_once('/').unwrap();
            assert!(d.parse::<i64>().unwrap() > 0);
            n.parse::<i64>().unwrap()
        })
        .sum();
    assert!(total > 0);
    assert!(cert["meta"]["config_digest"].is_string());
}

#[test]
fn lp_orbit_reduction_agrees_with_full_lp() {
    let graph = r#"{"kind":"complete-minus","n":6,"r":2,"removed":[[0,1]]}"#;
    let full = stdout_json(&exec(&["lp", "--graph", graph, "--q", "3"]));
    let orbit = stdout_json(&exec(&["lp", "--graph", graph, "--q", "3", "--orbit", "edge"]));
    assert_eq!(full["feasible"], true);
    assert_eq!(orbit["feasible"], true);
    assert_eq!(orbit["verified"], true);
    assert_eq!((full["rows"].as_u64(), full["cols"].as_u64()), (Some(14), Some(16)));
    assert!(orbit["reduced_cols"].as_u64().unwrap() < 16);
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

fn artifacts_of(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| !p.ends_with("cfg.json"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

fn run_in(dir: &Path, cfg: &Value, workers: &str) -> i32 {
    let mut cfg = cfg.clone();
    let outs = cfg["output_paths"].as_object_mut().unwrap();
    for (_, v) in outs.iter_mut() {
        *v = json!(dir.join(v.as_str().unwrap()));
    }
    let path = write_config(dir, "cfg.json", &cfg);
    code(&exec(&["--workers", workers, "run", "--config", path_str(&path)]))
}

#[test]
fn same_config_and_seed_give_identical_artifacts() {
    let configs = [
        json!({
            "command": "sample",
            "inputs": { "graph": { "kind": "complete-minus-blocks", "n": 12, "r": 2, "count": 4 } },
            "parameters": { "k": 6, "m": 1, "edge": [0, 2], "mc": 50000 },
            "seed": 17,
            "output_paths": { "report": "report.json" }
        }),
        json!({
            "command": "pipeline",
            "inputs": { "graph": { "kind": "complete", "n": 8, "r": 2 } },
            "parameters": { "q": 3, "strategy": "empirical", "k": 6, "m": 0 },
            "output_paths": { "report": "report.json", "packing": "packing.json", "csv": "edges.csv" }
        }),
    ];
    for cfg in &configs {
        let (a, b, c) = (
            tempfile::tempdir().unwrap(),
            tempfile::tempdir().unwrap(),
            tempfile::tempdir().unwrap(),
        );
        assert_eq!(run_in(a.path(), cfg, "1"), 0);
        assert_eq!(run_in(b.path(), cfg, "1"), 0);
        assert_eq!(run_in(c.path(), cfg, "4"), 0);
        let (x, y, z) = (artifacts_of(a.path()), artifacts_of(b.path()), artifacts_of(c.path()));
        assert_eq!(x.len(), cfg["output_paths"].as_object().unwrap().len());
        assert_eq!(x, y);
        assert_eq!(x, z);
    }
}

#[test]
fn different_seed_changes_digest_but_not_exact_values() {
    let run = |seed: &str| {
        stdout_json(&exec(&[
            "sample",
            "--graph",
            r#"{"kind":"complete","n":10,"r":2}"#,
            "--k",
            "5",
            "--m",
            "0",
            "--edge",
            "0,1",
            "--mc",
            "1000",
            "--seed",
            seed,
        ]))
    };
    let (a, b) = (run("1"), run("2"));
    assert_ne!(a["meta"]["config_digest"], b["meta"]["config_digest"]);
    assert_eq!(a["exact"], b["exact"]);
    assert_eq!(a["exact"], "0/1");
    assert_eq!(a["meta"]["seed"], 1);
    assert!(a["meta"]["generator"].as_str().unwrap().contains("ChaCha8"));
}

#[test]
fn saved_config_reproduces_direct_invocation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("saved.json");
    let direct = exec(&[
        "params",
        "--r",
        "3",
        "--eps",
        "1/1",
        "--q",
        "4",
        "--save-config",
        path_str(&cfg),
    ]);
    assert_eq!(code(&direct), 0);
    let saved = read_json(&cfg);
    assert_eq!(saved["command"], "params");
    let replay = exec(&["run", "--config", path_str(&cfg)]);
    assert_eq!(direct.stdout, replay.stdout);
    let rep = stdout_json(&replay);
    assert_eq!(rep["beta_log2"], 149);
    assert_eq!(rep["epsilon"], "1/1");
}

#[test]
fn invalid_inputs_exit_1() {
    assert_eq!(
        code(&exec(&["lp", "--graph", r#"{"kind":"complete","n":4}"#, "--q", "3"])),
        1
    );
    assert_eq!(
        code(&exec(&["lp", "--graph", "/nonexistent/graph.json", "--q", "3"])),
        1
    );
    assert_eq!(code(&exec(&["solve-missing-edge", "--r", "3", "--q", "3"])), 1);
    assert_eq!(code(&exec(&["no-such-command"])), 1);
    let dir = tempfile::tempdir().unwrap();
    let bad_field = write_config(
        dir.path(),
        "a.json",
        &json!({ "command": "params", "parameters": {}, "extra": 1 }),
    );
    assert_eq!(code(&exec(&["run", "--config", path_str(&bad_field)])), 1);
    let bad_param = write_config(
        dir.path(),
        "b.json",
        &json!({ "command": "params", "parameters": { "r": 3, "q": 4, "eps": "1/2", "zeta": 1 } }),
    );
    assert_eq!(code(&exec(&["run", "--config", path_str(&bad_param)])), 1);
}

#[test]
fn budgets_exit_3() {
    let k6 = r#"{"kind":"complete","n":6,"r":2}"#;
    assert_eq!(code(&exec(&["lp", "--graph", k6, "--q", "3"])), 0);
    assert_eq!(
        code(&exec(&["--budget-columns", "5", "lp", "--graph", k6, "--q", "3"])),
        3
    );
    assert_eq!(
        code(&exec(&["--budget-pivots", "1", "lp", "--graph", k6, "--q", "3"])),
        3
    );
    let o = exec(&[
        "--materialize-limit",
        "10",
        "pipeline",
        "--graph",
        r#"{"kind":"complete","n":9,"r":2}"#,
        "--q",
        "3",
        "--k",
        "7",
        "--m",
        "0",
    ]);
    assert_eq!(code(&o), 3);
    assert_eq!(stdout_json(&o)["status"], "failed");
}

#[test]
fn deficiency_failure_exits_2_with_witness() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.json");
    std::fs::write(&m, "[[0,1],[2,3],[4,5]]").unwrap();
    let o = exec(&[
        "matching",
        "--n",
        "8",
        "--r",
        "2",
        "--q",
        "3",
        "--matching",
        path_str(&m),
    ]);
    assert_eq!(code(&o), 2);
    let rep = stdout_json(&o);
    assert_eq!(rep["status"], "failed");
    assert_eq!(rep["error"]["deficiency"]["threshold"], "1/15");
    assert!(rep["error"]["deficiency"]["witness"].is_array());
}

#[test]
fn deficiency_only_csv_lists_every_edge() {
    let dir = tempfile::tempdir().unwrap();
    let (m, csv) = (dir.path().join("m.json"), dir.path().join("eta.csv"));
    std::fs::write(&m, "[[0,1]]").unwrap();
    let o = exec(&[
        "matching",
        "--n",
        "10",
        "--r",
        "2",
        "--q",
        "3",
        "--matching",
        path_str(&m),
        "--deficiency-only",
        "--csv",
        path_str(&csv),
    ]);
    assert!(code(&o) == 0 || code(&o) == 2);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(lines.next(), Some("edge_rank,numerator,denominator"));
    assert_eq!(lines.count() as u64, binom(10, 2) - 1);
    assert!(text.starts_with("# tool=fracdec"));
}

#[test]
fn fix_then_verify_against_targets() {
    let dir = tempfile::tempdir().unwrap();
    let (t, out) = (dir.path().join("t.json"), dir.path().join("f.json"));
    // K_6^2, 15 edges, targets inside [1 - 1/15, 1]
    let targets: Vec<String> = (0..15)
        .map(|i| if i % 2 == 0 { "1/1".into() } else { "29/30".into() })
        .collect();
    std::fs::write(&t, serde_json::to_string(&targets).unwrap()).unwrap();
    let o = exec(&[
        "fix",
        "--r",
        "2",
        "--q",
        "3",
        "--targets",
        path_str(&t),
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["matches_targets"], true);
    let strict = exec(&["verify", "--packing", path_str(&out)]);
    assert_eq!(code(&strict), 2);
    let rep = stdout_json(&strict);
    assert_eq!(rep["validation"]["violation_count"], 7);
    assert_eq!(rep["validation"]["min_boundary"], "29/30");
    assert_eq!(
        code(&exec(&["verify", "--packing", path_str(&out), "--eta", "1/30"])),
        0
    );
    let out_of_range = exec(&["fix", "--r", "2", "--q", "3", "--target", "1/2"]);
    assert_eq!(code(&out_of_range), 2);
}

#[test]
fn almost_to_full_on_hand_built_packing() {
    // every 6-subset of 7 vertices with weight 1/C(5,4) decomposes K_7^2 into K_6's
    let dir = tempfile::tempdir().unwrap();
    let (inp, out) = (dir.path().join("in.json"), dir.path().join("out.json"));
    let entries: Vec<Value> = (0..7)
        .map(|skip| json!({ "vertices": (0..7).filter(|&v| v != skip).collect::<Vec<_>>(), "weight": "1/5" }))
        .collect();
    let packing = json!({
        "format": "fracdec-packing/1",
        "meta": { "tool": "hand", "version": "0", "command": "none", "config_digest": "", "seed": null, "generator": "none" },
        "host": { "kind": "complete", "n": 7, "r": 2 },
        "family": { "kind": "clique", "q": 6 },
        "entries": entries,
    });
    std::fs::write(&inp, packing.to_string()).unwrap();
    let o = exec(&["almost-to-full", "--packing", path_str(&inp), "--out", path_str(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let rep = stdout_json(&o);
    assert_eq!(rep["q"], 3);
    assert_eq!(rep["validation"]["pass"], true);
    let full = read_json(&out);
    assert_eq!(full["family"], json!({ "kind": "clique", "q": 3 }));
    let graph = r#"{"kind":"complete","n":7,"r":2}"#;
    assert_eq!(
        code(&exec(&["verify", "--packing", path_str(&out), "--graph", graph])),
        0
    );
    let other = r#"{"kind":"complete","n":8,"r":2}"#;
    assert_eq!(
        code(&exec(&["verify", "--packing", path_str(&out), "--graph", other])),
        1
    );
}

#[test]
fn pipeline_lp_strategy_and_analytic_vacuity() {
    let g = r#"{"kind":"complete","n":9,"r":2}"#;
    let o = exec(&[
        "pipeline",
        "--graph",
        g,
        "--q",
        "3",
        "--strategy",
        "lp",
        "--k",
        "6",
        "--m",
        "0",
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["validation"]["pass"], true);
    let o = exec(&[
        "pipeline",
        "--graph",
        g,
        "--q",
        "3",
        "--strategy",
        "analytic",
        "--eps",
        "1/2",
    ]);
    assert_eq!(code(&o), 3);
    assert_eq!(stdout_json(&o)["failed_stage"], "parameters");
}
