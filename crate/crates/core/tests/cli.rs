use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

use finpop::matrix::DataMatrix;
use finpop::pa::planted_factor_matrix;
use finpop::sampling::{gaussian_matrix, SeedSpec};

fn finpop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_finpop"))
        .args(args)
        .env("FINPOP_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_csv(dir: &Path, name: &str, m: &DataMatrix, header: bool) -> PathBuf {
    let mut s = String::new();
    if header {
        let cols: Vec<String> = (0..m.cols()).map(|j| format!("obs{j}")).collect();
        s.push_str(&cols.join(","));
        s.push('\n');
    }
    for row in m.row_iter() {
        let fields: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    let path = dir.join(name);
    std::fs::write(&path, s).unwrap();
    path
}

fn validate(instance: &Value, def: &str) {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/schema/finpop.schema.json")).unwrap();
    let mut schema: Value = serde_json::from_str(&text).unwrap();
    let obj = schema.as_object_mut().unwrap();
    obj.remove("oneOf");
    obj.insert("$ref".into(), Value::String(format!("#/$defs/{def}")));
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(instance).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{def}: {errors:?}\n{instance}");
}

#[test]
fn pa_tw_recovers_three_planted_factors() {
    let dir = TempDir::new().unwrap();
    let n = 400;
    let b = planted_factor_matrix(200, n, &[10.0 * (n as f64).sqrt(); 3], 77).unwrap();
    let csv = write_csv(dir.path(), "planted.csv", &b, true);
    let o = finpop(&["pa", csv.to_str().unwrap(), "--method", "tw", "--kmax", "6"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    validate(&v, "pa_output");
    assert_eq!(v["result"]["k_selected"], 3);
    assert_eq!(v["result"]["config"]["method"], "tw_direct");
    assert_eq!(v["manifest"]["input_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn pa_mc_on_noise_selects_nothing_and_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let b = gaussian_matrix(40, 80, SeedSpec::new(5), 0).unwrap();
    let csv = write_csv(dir.path(), "noise.csv", &b, false);
    let out = dir.path().join("pa.json");
    let scree = dir.path().join("scree.csv");
    let args = [
        "pa",
        csv.to_str().unwrap(),
        "--method",
        "mc",
        "--perms",
        "500",
        "--seed",
        "0x2a",
        "--out",
        out.to_str().unwrap(),
        "--scree",
        scree.to_str().unwrap(),
    ];
    let o = finpop(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    validate(&v, "pa_output");
    assert_eq!(v["result"]["k_selected"], 0);
    assert_eq!(v["manifest"]["seed"], 42);
    let scree_text = std::fs::read_to_string(&scree).unwrap();
    assert!(scree_text.starts_with("factor_index,"));

    finpop(&args);
    let again: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(again["result"], v["result"]);
}

#[test]
fn pa_transpose_reads_observations_as_rows() {
    let dir = TempDir::new().unwrap();
    let b = gaussian_matrix(30, 10, SeedSpec::new(1), 0).unwrap();
    let csv = write_csv(dir.path(), "obs.csv", &b, false);
    let o = finpop(&["pa", csv.to_str().unwrap(), "--method", "tw", "--transpose", "--kmax", "2"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["result"]["p"], 10);
    assert_eq!(v["result"]["n"], 30);
}

#[test]
fn malformed_csv_exits_2_with_position() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "1,2,3\n4,five,6\n").unwrap();
    let o = finpop(&["pa", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") && err.contains("column 2"), "{err}");
}

#[test]
fn degenerate_rows_exit_3() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("flat.csv");
    std::fs::write(&path, "1,2,3,4\n5,5,5,5\n0,1,0,2\n").unwrap();
    let o = finpop(&["pa", path.to_str().unwrap(), "--method", "tw", "--kmax", "1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("[1]"));
}

#[test]
fn bad_pa_flags_exit_2() {
    let dir = TempDir::new().unwrap();
    let b = gaussian_matrix(5, 30, SeedSpec::new(1), 0).unwrap();
    let csv = write_csv(dir.path(), "x.csv", &b, false);
    let c = csv.to_str().unwrap();
    assert_eq!(finpop(&["pa", c, "--perms", "10"]).status.code(), Some(2));
    assert_eq!(finpop(&["pa", c, "--method", "tw", "--variant", "raw"]).status.code(), Some(2));
    assert_eq!(finpop(&["pa", c, "--seed", "nope"]).status.code(), Some(2));
    assert_eq!(finpop(&["pa", "/nonexistent/file.csv"]).status.code(), Some(2));
}

#[test]
fn simulate_null_small_and_deterministic() {
    let dir = TempDir::new().unwrap();
    let json = dir.path().join("null.json");
    let args = ["simulate-null", "--p", "8", "--n", "12", "--perms", "100", "--seed", "3"];
    let a = finpop(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let b = finpop(&args);
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("percentile,empirical,tw"));
    for line in lines {
        for field in line.split(',') {
            assert!(field.parse::<f64>().unwrap().is_finite());
        }
    }

    let mut with_json = args.to_vec();
    with_json.extend(["--json", json.to_str().unwrap()]);
    assert!(finpop(&with_json).status.success());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    validate(&v, "null_output");
    assert_eq!(v["table"]["rows"][1]["tw"].as_f64().unwrap().round(), -1.0);

    let out = dir.path().join("null.csv");
    let mut with_out = args.to_vec();
    with_out.extend(["--out", out.to_str().unwrap()]);
    assert!(finpop(&with_out).status.success());
    let sidecar: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("null.csv.manifest.json")).unwrap()).unwrap();
    validate(&sidecar, "manifest");
    assert_eq!(sidecar["command"], "simulate-null");
}

#[test]
fn edge_identity_closed_forms() {
    for (c, want) in [("1", 4.0), ("0.25", 2.25)] {
        let o = finpop(&["edge", "--identity", "--c", c]);
        assert!(o.status.success());
        let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
        validate(&v, "edge_output");
        assert!((v["edge"]["e_plus"].as_f64().unwrap() - want).abs() < 1e-10);
    }
}

#[test]
fn edge_tvals_file() {
    let dir = TempDir::new().unwrap();
    let good = dir.path().join("t.txt");
    std::fs::write(&good, "1\n2\n").unwrap();
    let o = finpop(&["edge", "--tvals", good.to_str().unwrap(), "--c", "1"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["edge"]["e_plus"].as_f64().unwrap() - 6.53295209641218).abs() < 1e-9);

    let zero = dir.path().join("z.txt");
    std::fs::write(&zero, "1\n0\n2\n").unwrap();
    assert_eq!(finpop(&["edge", "--tvals", zero.to_str().unwrap(), "--c", "1"]).status.code(), Some(2));
}

#[test]
fn tw_queries() {
    let q: f64 = stdout(&finpop(&["tw", "--quantile", "0.95"])).trim().parse().unwrap();
    assert!((q - 0.9765).abs() <= 0.01);
    let f: f64 = stdout(&finpop(&["tw", "--cdf", "-1.2680"])).trim().parse().unwrap();
    assert!((f - 0.5).abs() <= 0.002);
    let p: f64 = stdout(&finpop(&["tw", "--pvalue", "0.9765"])).trim().parse().unwrap();
    assert!((p - 0.05).abs() <= 0.002);
    assert_eq!(finpop(&["tw", "--quantile", "1.5"]).status.code(), Some(2));
    assert_eq!(finpop(&["tw"]).status.code(), Some(2));
}

fn eigenvalues(text: &str) -> Vec<f64> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn spectrum_of_orthonormal_rows_is_flat() {
    let dir = TempDir::new().unwrap();
    // rows are scaled standard basis vectors: orthogonal with equal norms
    let n = 6;
    let rows: Vec<Vec<f64>> = (0..4)
        .map(|i| (0..n).map(|j| if i == j { (n as f64).sqrt() } else { 0.0 }).collect())
        .collect();
    let csv = write_csv(dir.path(), "orth.csv", &DataMatrix::from_rows(&rows).unwrap(), false);
    let o = finpop(&["spectrum", csv.to_str().unwrap(), "--matrix", "scov"]);
    assert!(o.status.success());
    for v in eigenvalues(&stdout(&o)) {
        assert!((v - 1.0).abs() < 1e-12);
    }
}

#[test]
fn spectrum_spearman_of_monotone_copies() {
    let dir = TempDir::new().unwrap();
    let base = gaussian_matrix(1, 50, SeedSpec::new(2), 0).unwrap();
    let rows: Vec<Vec<f64>> = (0..5)
        .map(|k| base.row(0).iter().map(|x| (x * (k + 1) as f64).exp()).collect())
        .collect();
    let csv = write_csv(dir.path(), "mono.csv", &DataMatrix::from_rows(&rows).unwrap(), false);
    let o = finpop(&["spectrum", csv.to_str().unwrap(), "--matrix", "spearman"]);
    assert!(o.status.success());
    let ev = eigenvalues(&stdout(&o));
    assert!((ev[0] - 5.0).abs() < 1e-10);
}

#[test]
fn spectrum_overlay_matches_mp_law() {
    let dir = TempDir::new().unwrap();
    let b = gaussian_matrix(500, 1000, SeedSpec::new(9), 0).unwrap();
    let csv = write_csv(dir.path(), "g.csv", &b, false);
    let out = dir.path().join("ev.csv");
    let curve = dir.path().join("curve.csv");
    let o = finpop(&[
        "spectrum",
        csv.to_str().unwrap(),
        "--matrix",
        "spatial-sign",
        "--density-overlay",
        curve.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("ev.csv.manifest.json")).unwrap()).unwrap();
    validate(&manifest, "manifest");
    let ks = manifest["diagnostics"]["ks_distance"].as_f64().unwrap();
    assert!(ks <= 0.03, "KS {ks}");
    assert_eq!(eigenvalues(&std::fs::read_to_string(&out).unwrap()).len(), 500);
    let curve_text = std::fs::read_to_string(&curve).unwrap();
    assert!(curve_text.starts_with("x,density,cdf\n"));
}
