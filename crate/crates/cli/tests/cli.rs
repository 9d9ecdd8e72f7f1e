use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_exsparse"))
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn without_meta(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("meta");
    v
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

#[test]
fn zero_data_solves_to_empty_support() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("r.json");
    let out = run(&["solve", example("zero_data.json").to_str().unwrap(), "-o", out_path.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_json(&out_path);
    assert_eq!(r["p"], 0);
    assert_eq!(r["certified"], true);
    assert_eq!(f(&r["objective"]), 0.0);
}

#[test]
fn analytic_example_solves() {
    let out = run(&["solve", example("measures_single.json").to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    let atoms = r["atoms"].as_array().unwrap();
    assert_eq!(atoms.len(), 1);
    assert!((f(&atoms[0]["param"]) - 0.5).abs() < 1e-6);
    assert!((f(&atoms[0]["weight"]) - 1.999999).abs() < 1e-5);
    assert_eq!(atoms[0]["sign"], 1);
    assert_eq!(r["dim_HN"], 1);
    assert!(r["certificate"]["c1_bounded"].as_bool().unwrap());
}

#[test]
fn malformed_input_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let text = std::fs::read_to_string(example("measures_single.json")).unwrap().replace("\"lambda\"", "\"lamda\"");
    std::fs::write(&path, text).unwrap();
    let out = run(&["solve", path.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("lamda"));

    std::fs::write(&path, "{ \"kind\": \"measures\", ").unwrap();
    assert_eq!(code(&run(&["solve", path.to_str().unwrap()])), 1);
    assert_eq!(code(&run(&["solve", dir.path().join("missing.json").to_str().unwrap()])), 1);
}

#[test]
fn exact_oracle_on_unit_data() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("o.json");
    let out = run(&[
        "oracle",
        example("measures_unit.json").to_str().unwrap(),
        "--grid",
        "1001",
        "--mode",
        "exact",
        "-o",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_json(&out_path);
    assert!((f(&r["objective"]) - 1.0).abs() < 1e-12);
    assert_eq!(r["source"], "oracle_exact");
    assert_eq!(r["grid"], 1001);
    assert!((f(&r["atoms"][0]["param"]) - 0.5).abs() < 1e-3);
}

#[test]
fn oracle_preconditions_exit_one() {
    let single = example("measures_single.json");
    let out = run(&["oracle", single.to_str().unwrap(), "--grid", "1"]);
    assert_eq!(code(&out), 1);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.json");
    let kernels: Vec<String> = (0..25)
        .map(|i| format!("{{\"type\": \"gaussian\", \"center\": {}, \"width\": 0.04}}", 0.3 + 0.4 * i as f64 / 24.0))
        .collect();
    let data = vec!["0.1"; 25].join(", ");
    std::fs::write(
        &path,
        format!(
            "{{\"kind\": \"measures\", \"domain\": [0, 1], \"kernels\": [{}], \"data\": [{data}], \"lambda\": 10}}",
            kernels.join(", ")
        ),
    )
    .unwrap();
    let out = run(&["oracle", path.to_str().unwrap(), "--grid", "101", "--mode", "exact"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("exact oracle limited to N <= 20"));
}

#[test]
fn compare_passes_on_analytic_instance() {
    let out = run(&["compare", example("measures_single.json").to_str().unwrap(), "--grid", "1001"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn certify_rechecks_results() {
    let dir = tempfile::tempdir().unwrap();
    let problem = example("measures_single.json");
    let result = dir.path().join("r.json");
    assert_eq!(code(&run(&["solve", problem.to_str().unwrap(), "-o", result.to_str().unwrap()])), 0);
    assert_eq!(code(&run(&["certify", problem.to_str().unwrap(), result.to_str().unwrap()])), 0);

    let mut r = read_json(&result);
    r["atoms"][0]["param"] = Value::from(0.45);
    std::fs::write(&result, serde_json::to_string(&r).unwrap()).unwrap();
    assert_eq!(code(&run(&["certify", problem.to_str().unwrap(), result.to_str().unwrap()])), 2);
}

#[test]
fn solve_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let problem = example("spline_q2.json");
    let paths: Vec<PathBuf> = (0..2).map(|i| dir.path().join(format!("r{i}.json"))).collect();
    for (i, p) in paths.iter().enumerate() {
        let threads = if i == 0 { "1" } else { "3" };
        let out = bin()
            .args(["solve", problem.to_str().unwrap(), "-o", p.to_str().unwrap()])
            .env("EXSPARSE_THREADS", threads)
            .output()
            .unwrap();
        assert!(matches!(code(&out), 0 | 2));
    }
    assert_eq!(without_meta(read_json(&paths[0])), without_meta(read_json(&paths[1])));
}

#[test]
fn csv_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("c.csv");
    let recon = dir.path().join("u.csv");
    let out = run(&[
        "solve",
        example("spline_q2.json").to_str().unwrap(),
        "-o",
        dir.path().join("r.json").to_str().unwrap(),
        "--emit-cert",
        cert.to_str().unwrap(),
        "--emit-recon",
        recon.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let cert = std::fs::read_to_string(cert).unwrap();
    assert!(cert.starts_with("param,correlation\n"));
    assert_eq!(cert.lines().count(), 10240 + 1);
    let recon = std::fs::read_to_string(recon).unwrap();
    assert!(recon.starts_with("s,u\n"));
    assert_eq!(recon.lines().count(), 1024 + 1);

    // measures have no pointwise reconstruction
    let out = run(&["solve", example("measures_single.json").to_str().unwrap(), "--emit-recon", dir.path().join("x.csv").to_str().unwrap()]);
    assert_eq!(code(&out), 1);
}

#[test]
fn argument_errors_and_help() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["solve", "--help"])), 0);
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["oracle", "x.json", "--mode", "simplex"])), 1);
    let out = bin()
        .args(["solve", example("measures_single.json").to_str().unwrap()])
        .env("EXSPARSE_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn unknown_demo_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["demo", "waves", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 1);
}

fn run_demo(name: &str) -> (tempfile::TempDir, Value) {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["demo", name, "--seed", "7", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let result = read_json(&dir.path().join(format!("{name}_result.json")));
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{name}_result.json"));
    assert_eq!(without_meta(result.clone()), without_meta(read_json(&golden)), "{name} differs from its golden file");
    let problem = read_json(&dir.path().join(format!("{name}_problem.json")));
    assert_eq!(problem["seed"], 7);
    (dir, result)
}

fn recon_samples(dir: &Path, name: &str) -> Vec<(f64, f64)> {
    std::fs::read_to_string(dir.join(format!("{name}_recon.csv")))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let (s, u) = l.split_once(',').unwrap();
            (s.parse().unwrap(), u.parse().unwrap())
        })
        .collect()
}

fn knots(result: &Value) -> Vec<f64> {
    let mut k: Vec<f64> = result["atoms"].as_array().unwrap().iter().map(|a| f(&a["param"])).collect();
    k.sort_by(f64::total_cmp);
    k
}

#[test]
fn demo_spikes() {
    let (_dir, r) = run_demo("spikes");
    assert_eq!(r["certified"], true);
    assert!(r["p"].as_u64().unwrap() <= 8);
    assert!(r["p"].as_u64().unwrap() <= r["dim_HN"].as_u64().unwrap());
}

#[test]
fn demo_staircase() {
    let (dir, r) = run_demo("staircase");
    assert_eq!(r["certified"], true);
    let jumps = knots(&r);
    assert!(jumps.len() as u64 <= r["dim_HN"].as_u64().unwrap());
    let samples = recon_samples(dir.path(), "staircase");
    // constant between consecutive jumps
    let mut edges = vec![0.0];
    edges.extend(&jumps);
    edges.push(1.0);
    for w in edges.windows(2) {
        let inside: Vec<f64> = samples.iter().filter(|(s, _)| *s > w[0] && *s < w[1]).map(|p| p.1).collect();
        assert!(inside.windows(2).all(|p| (p[0] - p[1]).abs() <= 1e-12));
    }
}

#[test]
fn demo_spline() {
    let (dir, r) = run_demo("spline");
    assert_eq!(r["certified"], true);
    let ks = knots(&r);
    assert!(ks.len() as u64 <= r["dim_HN"].as_u64().unwrap());
    let samples = recon_samples(dir.path(), "spline");
    let mut edges = vec![0.0];
    edges.extend(&ks);
    edges.push(1.0);
    for w in edges.windows(2) {
        let inside: Vec<(f64, f64)> = samples.iter().copied().filter(|(s, _)| *s > w[0] && *s < w[1]).collect();
        // second differences of a linear function vanish
        for t in inside.windows(3) {
            let slope1 = (t[1].1 - t[0].1) / (t[1].0 - t[0].0);
            let slope2 = (t[2].1 - t[1].1) / (t[2].0 - t[1].0);
            assert!((slope1 - slope2).abs() <= 1e-7, "{slope1} {slope2}");
        }
    }
}
