//! End-to-end runs of the `sep-ergo` binary.

use std::path::Path;
use std::process::{Command, Output};

use sep_ergo::dynamics::trajectory::read_trajectory;
use serde_json::Value;

fn sep_ergo(args: &[&str], workers: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sep-ergo"));
    cmd.args(args).env_remove("SEP_ERGO_WORKERS");
    if let Some(w) = workers {
        cmd.env("SEP_ERGO_WORKERS", w);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

const SMALL_DECAY: &str = r#"{"dimension": 1, "side": "auto", "epsilon": 1e-6,
    "measure": {"kind": "markov", "a": 0.3, "b": 0.45},
    "times": {"t0": 1, "count": 5}, "replicas": 6, "engine": "stirring"}"#;

#[test]
fn decay_is_reproducible_across_workers_and_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL_DECAY);
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));

    let o = sep_ergo(&["decay", "--config", &cfg, "--seed", "5", "--out", a.to_str().unwrap()], Some("1"));
    assert!(o.status.code().is_some_and(|c| c <= 1), "{}", String::from_utf8_lossy(&o.stderr));
    let o = sep_ergo(
        &["decay", "--config", &cfg, "--seed", "5", "--workers", "3", "--out", b.to_str().unwrap()],
        None,
    );
    assert!(o.status.code().is_some_and(|c| c <= 1));
    for f in ["decay.csv", "decay.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }

    // feeding an output back as the config reproduces it byte for byte
    let from_json = a.join("decay.json");
    sep_ergo(&["decay", "--config", from_json.to_str().unwrap(), "--out", c.to_str().unwrap()], None);
    assert_eq!(std::fs::read(a.join("decay.csv")).unwrap(), std::fs::read(c.join("decay.csv")).unwrap());
    let from_csv = a.join("decay.csv");
    sep_ergo(&["decay", "--config", from_csv.to_str().unwrap(), "--out", c.to_str().unwrap()], None);
    assert_eq!(std::fs::read(a.join("decay.json")).unwrap(), std::fs::read(c.join("decay.json")).unwrap());

    let report = read_json(&a.join("decay.json"));
    assert_eq!(report["seed"], 5);
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
    let est = report["series"]["estimate"].as_array().unwrap();
    assert_eq!(est.len(), 5);
    let csv = std::fs::read_to_string(a.join("decay.csv")).unwrap();
    assert!(csv.starts_with("# config={"));

    // a different seed changes the numbers
    let d = dir.path().join("d");
    sep_ergo(&["decay", "--config", &cfg, "--seed", "6", "--out", d.to_str().unwrap()], None);
    assert_ne!(std::fs::read(a.join("decay.csv")).unwrap(), std::fs::read(d.join("decay.csv")).unwrap());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    for (name, body) in [
        ("tiny.json", r#"{"side": 2, "measure": {"kind": "bernoulli", "rho": 0.5}, "times": [1, 2, 4, 8]}"#),
        ("unknown.json", r#"{"sides": 9}"#),
        (
            "density.json",
            r#"{"side": 64, "measure": {"kind": "bernoulli", "rho": 0.5}, "rho": 0.4, "times": [1, 2, 4, 8]}"#,
        ),
        ("times.json", r#"{"side": 64, "measure": {"kind": "bernoulli", "rho": 0.5}, "times": [4, 2]}"#),
        ("markov2d.json", r#"{"dimension": 2, "side": 8, "measure": {"kind": "markov", "a": 0.2, "b": 0.3}, "times": [1, 2, 4, 8]}"#),
    ] {
        let cfg = write_config(dir.path(), name, body);
        let o = sep_ergo(&["decay", "--config", &cfg, "--out", out], None);
        assert_eq!(o.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = sep_ergo(&["decay", "--config", "/nonexistent/c.json", "--out", out], None);
    assert_eq!(o.status.code(), Some(2));
    let o = sep_ergo(&["decay", "--workers", "0", "--out", out], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oversized_oracle_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "big.json", r#"{"side": 12, "process": "free", "engine": "gillespie", "replicas": 10}"#);
    let out = dir.path().join("o");
    let o = sep_ergo(&["oracle-compare", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn oracle_compare_passes_on_the_three_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"replicas": 20000}"#);
    let out = dir.path().join("o");
    let o = sep_ergo(&["oracle-compare", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&out.join("oracle_compare.json"));
    // four processes on gillespie, three on stirring
    assert_eq!(report["reports"].as_array().unwrap().len(), 7);
}

#[test]
fn validate_catches_a_wrong_annihilation_rate() {
    let dir = tempfile::tempdir().unwrap();
    let lemma_failures = |body: &str, tag: &str| {
        let cfg = write_config(dir.path(), &format!("{tag}.json"), body);
        let out = dir.path().join(tag);
        let o = sep_ergo(&["validate", "--config", &cfg, "--out", out.to_str().unwrap()], None);
        let report = read_json(&out.join("validate.json"));
        let n = report["checks"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|c| c["check"].as_str().unwrap().starts_with("lemma_2_1") && c["pass"] == false)
            .count();
        (o.status.code(), n)
    };
    let (_, honest) = lemma_failures("{}", "honest");
    assert_eq!(honest, 0);
    let (code, mutated) = lemma_failures(r#"{"annihilation_rate": 1.0}"#, "mutated");
    assert_eq!(code, Some(1));
    assert!(mutated > 0);
}

#[test]
fn simulate_writes_a_conserving_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sim.json",
        r#"{"process": "annihilation", "side": 40, "measure": {"kind": "bernoulli", "rho": 0.5},
            "times": [0, 1, 2, 4, 8], "replicas": 3, "seed": 12}"#,
    );
    let out = dir.path().join("o");
    let o = sep_ergo(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let file = std::fs::File::open(out.join("trajectory.bin")).unwrap();
    let (header, records) = read_trajectory(std::io::BufReader::new(file)).unwrap();
    assert_eq!(header.side, 40);
    assert_eq!(header.config["seed"], 12);
    assert_eq!(records.len(), 3 * 5);
    let charge = |s: &[u8]| s.iter().map(|&c| (c == b'+') as i64 - (c == b'-') as i64).sum::<i64>();
    let alive = |s: &[u8]| s.iter().filter(|&&c| c != b'0').count();
    for rep in records.chunks(5) {
        assert!(rep.windows(2).all(|w| charge(&w[0].symbols) == charge(&w[1].symbols)));
        assert!(rep.windows(2).all(|w| alive(&w[1].symbols) <= alive(&w[0].symbols)));
        assert!(rep.windows(2).all(|w| w[0].time < w[1].time && w[0].replica == w[1].replica));
    }
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let o = sep_ergo(&["frobnicate"], None);
    assert_eq!(o.status.code(), Some(2));
}
