//! End-to-end tests of the `treebound` binary: exit codes, output formats and
//! reproducibility.

use std::path::PathBuf;
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_treebound"))
}

static FILE_SEQ: AtomicUsize = AtomicUsize::new(0);

fn fixture(name: &str, contents: &str) -> PathBuf {
    let seq = FILE_SEQ.fetch_add(1, Ordering::Relaxed);
    let path = std::env::temp_dir().join(format!(
        "treebound-cli-test-{}-{seq}-{name}",
        std::process::id()
    ));
    std::fs::write(&path, contents).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const TREE1: &str = r#"{
  "root": 1,
  "nodes": [{"id":1,"p":0.55},{"id":2,"p":0.55},{"id":3,"p":0.55},{"id":4,"p":0.5}],
  "edges": [{"parent":1,"child":2,"p11":0.4},{"parent":1,"child":4,"p11":0.3},
            {"parent":2,"child":3,"p11":0.45}]
}"#;

const TREE2: &str = r#"{
  "root": 1,
  "nodes": [{"id":1,"p":0.55},{"id":2,"p":0.55},{"id":3,"p":0.55},{"id":4,"p":0.5}],
  "edges": [{"parent":1,"child":2,"p11":0.4},{"parent":2,"child":3,"p11":0.45},
            {"parent":2,"child":4,"p11":0.25}]
}"#;

#[test]
fn validate_ok_and_violations() {
    let good = fixture("good.json", TREE1);
    let out = run(&["validate", good.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("status: ok"));

    let bad = fixture(
        "bad.json",
        r#"{"root":1,"nodes":[{"id":1,"p":0.5},{"id":2,"p":0.5}],
            "edges":[{"parent":1,"child":2,"p11":0.6}]}"#,
    );
    let out = run(&["validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(err.contains("(1,2)"), "edge not named in: {err}");

    let out = run(&["validate", "/no/such/file.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn parse_errors_exit_one() {
    let junk = fixture("junk.json", "{ not json");
    let out = run(&["bound", junk.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    let unknown = fixture(
        "unknown.json",
        r#"{"root":1,"nodes":[{"id":1,"p":0.5}],"edges":[],"surprise":true}"#,
    );
    let out = run(&["bound", unknown.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    let good = fixture("goodk.json", TREE1);
    let out = run(&["bound", good.to_str().unwrap(), "--k", "4..2"]);
    assert_eq!(out.status.code(), Some(1));
}

fn parse_csv(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect()
}

#[test]
fn bound_table_matches_reference_values() {
    let model = fixture("tree2.json", TREE2);
    let out = run(&["bound", model.to_str().unwrap(), "--k", "1..4"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.starts_with("k,U,L,P_ci,U_uv,L_uv\n"));
    let rows = parse_csv(&text);
    let want_u = [1.0, 0.8, 0.65, 0.25];
    let want_l = [0.8, 0.475, 0.3, 0.0];
    let want_ci = [0.8963, 0.6703, 0.4346, 0.1488];
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row[0] as usize, i + 1);
        assert!(
            (row[1] - want_u[i]).abs() < 1e-6,
            "U({}) = {}",
            i + 1,
            row[1]
        );
        assert!(
            (row[2] - want_l[i]).abs() < 1e-6,
            "L({}) = {}",
            i + 1,
            row[2]
        );
        assert!(
            (row[3] - want_ci[i]).abs() < 5e-5,
            "P_ci({}) = {}",
            i + 1,
            row[3]
        );
    }
}

#[test]
fn bound_k_zero_row_and_single_node() {
    let model = fixture("tree1.json", TREE1);
    let out = run(&["bound", model.to_str().unwrap(), "--k", "0..0"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "k,U,L,P_ci,U_uv,L_uv\n0,1,1,1,1,1\n");

    let single = fixture(
        "single.json",
        r#"{"root":7,"nodes":[{"id":7,"p":0.3}],"edges":[]}"#,
    );
    let out = run(&["bound", single.to_str().unwrap()]);
    let rows = parse_csv(&stdout(&out));
    for col in 1..=3 {
        assert!((rows[0][col] - 0.3).abs() < 1e-9);
    }
}

#[test]
fn univariate_and_ci_commands() {
    let model = fixture("tree1u.json", TREE1);
    let out = run(&["univariate", model.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let rows = parse_csv(&stdout(&out));
    assert!((rows[2][1] - 0.7166666666666668).abs() < 1e-9);
    assert!((rows[0][2] - 0.55).abs() < 1e-9);

    let out = run(&["ci", model.to_str().unwrap(), "--k", "1..1"]);
    let rows = parse_csv(&stdout(&out));
    assert!((rows[0][1] - 0.8703703703703705).abs() < 1e-9);
}

#[test]
fn oracle_command_exit_codes() {
    // Pairwise-consistent triangle with no joint distribution.
    let triangle = fixture(
        "triangle.json",
        r#"{"nodes":[{"id":1,"p":0.5},{"id":2,"p":0.5},{"id":3,"p":0.5}],
            "edges":[{"parent":1,"child":2,"p11":0.0},{"parent":2,"child":3,"p11":0.0},
                     {"parent":1,"child":3,"p11":0.0}]}"#,
    );
    let out = run(&["oracle", triangle.to_str().unwrap(), "--k", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("INFEASIBLE"));

    let tree = fixture("tree1o.json", TREE1);
    let out = run(&["oracle", tree.to_str().unwrap(), "--k", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let v: f64 = stdout(&out).trim().parse().unwrap();
    assert!((v - 0.8).abs() < 1e-6);

    // 21 nodes exceeds the exponential cap.
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for i in 1..=21 {
        nodes.push(format!("{{\"id\":{i},\"p\":0.5}}"));
        if i > 1 {
            edges.push(format!(
                "{{\"parent\":{},\"child\":{i},\"p11\":0.25}}",
                i - 1
            ));
        }
    }
    let big = fixture(
        "big.json",
        &format!(
            r#"{{"nodes":[{}],"edges":[{}]}}"#,
            nodes.join(","),
            edges.join(",")
        ),
    );
    let out = run(&["oracle", big.to_str().unwrap(), "--k", "1"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn experiment_bands_is_deterministic() {
    let args = [
        "experiment-bands",
        "--n",
        "5",
        "--runs",
        "3",
        "--copula",
        "comonotone",
        "--seed",
        "42",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.starts_with("run,k,U,U_uv,P_ci\n"));
    assert_eq!(text.lines().count(), 1 + 3 * 5);
    // Tree information can only tighten the univariate bound.
    for row in parse_csv(&text) {
        assert!(row[2] <= row[3] + 1e-9);
    }

    let out = run(&[
        "experiment-bands",
        "--n",
        "5",
        "--runs",
        "1",
        "--copula",
        "sideways",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn orderstats_gaussian_sweep() {
    let topo = fixture(
        "topo.json",
        r#"{"root":1,"nodes":[1,2,3],
            "edges":[{"parent":1,"child":2},{"parent":2,"child":3}]}"#,
    );
    let out = run(&[
        "orderstats",
        "--topology",
        topo.to_str().unwrap(),
        "--gaussian-means",
        "0.0,0.5,-0.5",
        "--copula",
        "independence",
        "--x-range",
        "-1:1:0.5",
        "--k",
        "1",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    assert!(text.starts_with("x,U,L,CI,U_uv,L_uv\n"));
    let rows = parse_csv(&text);
    assert_eq!(rows.len(), 5);
    for row in &rows {
        // L_uv <= L <= CI <= U <= U_uv.
        assert!(row[5] <= row[2] + 1e-7);
        assert!(row[2] <= row[3] + 1e-7);
        assert!(row[3] <= row[1] + 1e-7);
        assert!(row[1] <= row[4] + 1e-7);
    }

    // Grid file path with an explicit copula.
    let grid = fixture(
        "grid.json",
        r#"{"x":[0.0,1.0],
            "marginals":{"1":[0.1,0.5],"2":[0.2,0.6],"3":[0.0,0.4]},
            "copula":"anti-comonotone"}"#,
    );
    let out = run(&[
        "orderstats",
        "--topology",
        topo.to_str().unwrap(),
        "--grid",
        grid.to_str().unwrap(),
        "--k",
        "2",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(parse_csv(&stdout(&out)).len(), 2);
}

#[test]
fn output_file_and_table_format() {
    let model = fixture("tree1f.json", TREE1);
    let out_path = std::env::temp_dir().join(format!(
        "treebound-out-{}-{}.csv",
        std::process::id(),
        FILE_SEQ.fetch_add(1, Ordering::Relaxed)
    ));
    let out = run(&[
        "bound",
        model.to_str().unwrap(),
        "--k",
        "2",
        "--output",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).is_empty());
    let written = std::fs::read_to_string(&out_path).unwrap();
    assert!(written.contains("0.8"));

    let out = run(&[
        "bound",
        model.to_str().unwrap(),
        "--k",
        "2",
        "--format",
        "table",
    ]);
    let text = stdout(&out);
    assert!(text.contains("0.8000"), "table output: {text}");
}
