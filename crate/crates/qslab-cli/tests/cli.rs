//! End-to-end tests driving the built `qslab` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_qslab")
}

struct Run {
    out: Output,
    dir: tempfile::TempDir,
}

impl Run {
    fn stdout(&self) -> String {
        String::from_utf8_lossy(&self.out.stdout).into_owned()
    }

    fn stderr(&self) -> String {
        String::from_utf8_lossy(&self.out.stderr).into_owned()
    }

    fn code(&self) -> i32 {
        self.out.status.code().expect("no signal")
    }

    fn json_stdout(&self) -> serde_json::Value {
        serde_json::from_str(&self.stdout()).expect("stdout is a single JSON document")
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn run(config: &str, args: &[&str]) -> Run {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = run_in(dir.path(), config, args);
    Run { out, dir }
}

fn run_in(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("config.json");
    // Configs may point outputs at {DIR}; substitute the tempdir path.
    let body = config.replace("{DIR}", dir.to_str().expect("utf8 tempdir"));
    std::fs::write(&cfg, body).expect("write config");
    Command::new(bin())
        .arg("--config")
        .arg(&cfg)
        .args(args)
        .output()
        .expect("spawn qslab")
}

fn field(v: &serde_json::Value, path: &[&str]) -> serde_json::Value {
    let mut cur = v;
    for p in path {
        cur = cur
            .get(p)
            .unwrap_or_else(|| panic!("missing field {p:?} in {cur}"));
    }
    cur.clone()
}

fn num(v: &serde_json::Value, path: &[&str]) -> f64 {
    field(v, path).as_f64().expect("numeric field")
}

const WORKED_EXAMPLE: &str = r#"{
  "command": "superpose-overlap",
  "seed": 3,
  "states": ["0", "+"],
  "copies": 2,
  "reference": ["0", "+", "0"]
}"#;

#[test]
fn worked_example_matches_the_closed_form() {
    let r = run(WORKED_EXAMPLE, &[]);
    assert_eq!(r.code(), 0, "stderr: {}", r.stderr());
    let doc = r.json_stdout();
    let expected = (1.0 + 1.0 / 2f64.sqrt()) / 9.0;
    let predicted = num(&doc, &["results", "predicted_probability", "value"]);
    let simulated = num(&doc, &["results", "simulated_probability", "value"]);
    assert!((predicted - expected).abs() < 1e-6);
    assert!((simulated - predicted).abs() < 1e-9);
    assert!(num(&doc, &["results", "output_fidelity_defect", "value"]) < 1e-9);
    assert_eq!(field(&doc, &["status"]), "ok");
    assert_eq!(field(&doc, &["command"]), "superpose-overlap");
    // Timing stays out of the document; it lands on stderr for stdout runs.
    assert!(r.stderr().contains("wall_clock_ms"));
}

#[test]
fn identical_config_and_seed_rerun_byte_identically() {
    let cfg = r#"{
      "command": "design-clone",
      "seed": 11,
      "states": ["0", "+"],
      "copies": 1,
      "target_copies": [2],
      "output": {"path": "{DIR}/out.json"}
    }"#;
    let dir = tempfile::tempdir().expect("tempdir");
    let a = run_in(dir.path(), cfg, &[]);
    assert_eq!(a.status.code(), Some(0));
    let first = std::fs::read(dir.path().join("out.json")).expect("first result");
    let b = run_in(dir.path(), cfg, &[]);
    assert_eq!(b.status.code(), Some(0));
    let second = std::fs::read(dir.path().join("out.json")).expect("second result");
    assert_eq!(first, second);
    // The sidecar carries the wall clock so the result file never differs.
    assert!(dir.path().join("out.json.timing.txt").exists());
}

#[test]
fn seed_flag_overrides_the_config_seed() {
    let cfg = r#"{
      "command": "nogo",
      "seed": 0,
      "candidate": {"p0": 0.5, "p0_prime": 0.5,
                    "alpha": [0.7071067811865476, 0.0],
                    "beta": [0.7071067811865476, 0.0]},
      "gap": {"samples": 64}
    }"#;
    let with_flag = run(cfg, &["--seed", "9"]);
    assert_eq!(with_flag.code(), 0, "stderr: {}", with_flag.stderr());
    let baked = run(&cfg.replace("\"seed\": 0", "\"seed\": 9"), &[]);
    assert_eq!(with_flag.stdout(), baked.stdout());
    let different = run(cfg, &["--seed", "10"]);
    assert_ne!(with_flag.stdout(), different.stdout());
    assert_eq!(
        field(&with_flag.json_stdout(), &["seed"]).as_u64(),
        Some(9)
    );
}

#[test]
fn malformed_state_reports_its_position() {
    let cfg = r#"{
      "command": "design-clone",
      "states": ["0", [[0.9, 0.0], [0.9, 0.0]]],
      "target_copies": [2]
    }"#;
    let r = run(cfg, &[]);
    assert_eq!(r.code(), 1);
    assert!(
        r.stderr().contains("states[1]"),
        "stderr: {}",
        r.stderr()
    );
}

#[test]
fn infeasible_design_exits_two_with_a_reported_envelope() {
    let cfg = r#"{
      "command": "design-clone",
      "states": ["0", "+"],
      "copies": 1,
      "target_copies": [2],
      "policy": {"explicit": {"diagonals": [[1.0, 1.0]]}},
      "output": {"path": "{DIR}/out.json"}
    }"#;
    let r = run(cfg, &[]);
    assert_eq!(r.code(), 2, "stderr: {}", r.stderr());
    let doc: serde_json::Value =
        serde_json::from_slice(&std::fs::read(r.path("out.json")).expect("envelope written"))
            .expect("valid JSON envelope");
    assert_eq!(field(&doc, &["status"]), "infeasible");
    assert_eq!(
        field(&doc, &["error", "code"]),
        "set-transform::infeasible-efficiency"
    );
    assert!(doc.get("results").is_none());
}

#[test]
fn unknown_command_is_an_input_error() {
    let r = run(r#"{"command": "transmogrify"}"#, &[]);
    assert_eq!(r.code(), 1);
    assert!(r.stderr().contains("transmogrify"));
}

#[test]
fn selftest_quick_passes() {
    let r = run(r#"{"command": "selftest", "seed": 2, "quick": true}"#, &[]);
    assert_eq!(r.code(), 0, "stderr: {}", r.stderr());
    let doc = r.json_stdout();
    assert_eq!(field(&doc, &["results", "all_pass"]), true);
    let suites = field(&doc, &["results", "suites"]);
    assert!(suites.as_array().expect("suite rows").len() >= 6);
}

#[test]
fn gap_csv_has_one_row_per_sample_plus_metadata() {
    let cfg = r#"{
      "command": "nogo",
      "seed": 9,
      "candidate": {"p0": 0.5, "p0_prime": 0.5,
                    "alpha": [0.7071067811865476, 0.0],
                    "beta": [0.7071067811865476, 0.0]},
      "gap": {"samples": 40},
      "output": {"path": "{DIR}/gap.csv", "format": "csv"}
    }"#;
    let r = run(cfg, &[]);
    assert_eq!(r.code(), 0, "stderr: {}", r.stderr());
    let csv = std::fs::read_to_string(r.path("gap.csv")).expect("csv written");
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "sample,residual");
    assert_eq!(lines.len(), 41);
    for (i, line) in lines[1..].iter().enumerate() {
        let (idx, residual) = line.split_once(',').expect("two columns");
        assert_eq!(idx.parse::<usize>().expect("sample index"), i);
        let residual: f64 = residual.parse().expect("numeric residual");
        assert!((0.0..=1.0).contains(&residual));
    }
    let doc: serde_json::Value =
        serde_json::from_slice(&std::fs::read(r.path("gap.meta.json")).expect("meta envelope"))
            .expect("valid envelope");
    assert_eq!(field(&doc, &["status"]), "ok");
    assert!(num(&doc, &["results", "gap", "mean_residual", "value"]) > 0.0);
}

#[test]
fn csv_without_an_output_path_is_rejected() {
    let cfg = r#"{
      "command": "nogo",
      "candidate": {"p0": 0.5, "p0_prime": 0.5,
                    "alpha": [0.7071067811865476, 0.0],
                    "beta": [0.7071067811865476, 0.0]},
      "gap": {"samples": 8}
    }"#;
    let r = run(cfg, &["--format", "csv"]);
    assert_eq!(r.code(), 1);
    assert!(r.stderr().contains("output path"));
}

fn read_unitary_dump(path: &Path) -> (usize, Vec<Vec<(f64, f64)>>) {
    let bytes = std::fs::read(path).expect("dump written");
    assert_eq!(&bytes[..8], b"QSLU1\0\0\0");
    let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    assert_eq!(rows, cols);
    assert_eq!(bytes.len(), 16 + rows * cols * 16);
    let mut at = 16;
    let mut matrix = vec![vec![(0.0, 0.0); cols]; rows];
    for row in matrix.iter_mut() {
        for entry in row.iter_mut() {
            let re = f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
            let im = f64::from_le_bytes(bytes[at + 8..at + 16].try_into().unwrap());
            *entry = (re, im);
            at += 16;
        }
    }
    (rows, matrix)
}

#[test]
fn unitary_dump_is_readable_and_orthonormal() {
    let cfg = r#"{
      "command": "design-clone",
      "states": ["0", "+"],
      "copies": 1,
      "target_copies": [2],
      "dump_unitary": "{DIR}/u.bin",
      "output": {"path": "{DIR}/out.json"}
    }"#;
    let r = run(cfg, &[]);
    assert_eq!(r.code(), 0, "stderr: {}", r.stderr());
    let doc: serde_json::Value =
        serde_json::from_slice(&std::fs::read(r.path("out.json")).expect("result")).unwrap();
    let total = num(&doc, &["results", "design", "total_dim"]) as usize;
    let (n, u) = read_unitary_dump(&r.path("u.bin"));
    assert_eq!(n, total);
    for a in 0..n {
        for b in a..n {
            // Columns of a unitary are orthonormal.
            let mut dot = (0.0f64, 0.0f64);
            for r in 0..n {
                let (xr, xi) = u[r][a];
                let (yr, yi) = u[r][b];
                dot.0 += xr * yr + xi * yi;
                dot.1 += xr * yi - xi * yr;
            }
            let expect = if a == b { 1.0 } else { 0.0 };
            assert!(
                (dot.0 - expect).abs() < 1e-9 && dot.1.abs() < 1e-9,
                "columns {a},{b} not orthonormal: {dot:?}"
            );
        }
    }
}

#[test]
fn tol_flag_rewrites_every_reported_tolerance() {
    let r = run(WORKED_EXAMPLE, &["--tol", "0.5"]);
    assert_eq!(r.code(), 0);
    let doc = r.json_stdout();
    assert_eq!(num(&doc, &["results", "predicted_probability", "tol"]), 0.5);
    assert_eq!(num(&doc, &["results", "contraction_defect", "tol"]), 0.5);
    assert_eq!(num(&doc, &["config", "tolerances", "probability"]), 0.5);
}

#[test]
fn jobs_flag_does_not_change_batched_results() {
    let cfg = r#"{
      "command": "bounds",
      "seed": 6,
      "random_trials": {"count": 10}
    }"#;
    let serial = run(cfg, &["--jobs", "1"]);
    let parallel = run(cfg, &["--jobs", "4"]);
    assert_eq!(serial.code(), 0, "stderr: {}", serial.stderr());
    assert_eq!(serial.stdout(), parallel.stdout());
}
