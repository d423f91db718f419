use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_randtime")).args(args).current_dir(dir).output().expect("spawn randtime")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn density_exp_sup_row_at_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["density", "--oracle", "exp_sup", "--q", "2"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let row = out.lines().find(|l| l.starts_with("1,")).expect("x = 1 row");
    let v: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!((v - 2.0 * (-2.0f64).exp()).abs() < 1e-12, "{row}");
}

#[test]
fn density_two_dimensional_grid_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["density", "--oracle", "bm_max_joint", "--mu", "1", "--grid", "t=0.5:1:2,x=0.5:1:3", "--out", "d.csv"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("d.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("d.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["subcommand"], "density");
    assert!(m["started"].is_string() && m["finished"].is_string());
}

#[test]
fn missing_model_exits_two_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate-max", "--model", "does_not_exist.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("does_not_exist.json"));
}

#[test]
fn unknown_suite_and_oracle_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["validate", "--suite", "nope"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["density", "--oracle", "nope"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["density", "--oracle", "exp_sup", "--q", "1", "--grid", "x=1:0:5"], dir.path()).status.code(), Some(2));
}

#[test]
fn help_lists_suites_and_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["--help"], dir.path());
    assert!(o.status.success());
    let h = stdout(&o);
    for s in ["discrete", "levy_max", "levy_last_exit", "diffusion_max", "finite_horizon_max", "finite_horizon_last"] {
        assert!(h.contains(s), "help misses {s}");
    }
    assert!(h.contains("sigma2") && h.contains("bessel(") && h.contains("\"T\""));
}

#[test]
fn simulate_max_levy_writes_csv_and_manifest_hash() {
    let dir = tempfile::tempdir().unwrap();
    let model = r#"{"alpha": -1, "sigma2": 1, "jumps": {"family": "none"}}"#;
    fs::write(dir.path().join("m.json"), model).unwrap();
    let o = run(&["simulate-max", "--model", "m.json", "--n", "50", "--seed", "3", "--out", "s.csv"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(csv.lines().count(), 51);
    assert!(csv.starts_with("index,rho,x_rho,k_rho,censored"));
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("s.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 3);
    assert_eq!(m["model_sha256"].as_str().unwrap().len(), 64);
    let again = run(&["simulate-max", "--model", "m.json", "--n", "50", "--seed", "3"], dir.path());
    assert_eq!(stdout(&again), csv);
}

#[test]
fn simulate_last_exit_and_passage() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bm.json"), r#"{"alpha": -1, "sigma2": 1, "jumps": {"family": "none"}}"#).unwrap();
    fs::write(dir.path().join("fin.json"), r#"{"mu": 1, "T": 1}"#).unwrap();
    fs::write(dir.path().join("gam.json"), r#"{"alpha": -1, "sigma2": 1, "jumps": {"family": "gamma", "c": 1, "lambda": 2}}"#).unwrap();
    let o = run(&["simulate-last-exit", "--model", "bm.json", "--level", "-0.5", "--n", "30", "--local-time", "tanaka"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 31);
    let o = run(&["simulate-last-passage", "--model", "fin.json", "--level", "-0.5", "--n", "5", "--dt", "1e-3"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 6);
    assert_eq!(run(&["simulate-last-exit", "--model", "gam.json", "--level", "-0.5"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["simulate-last-passage", "--model", "bm.json", "--level", "-0.5"], dir.path()).status.code(), Some(2));
}

#[test]
fn discrete_verify_shipped_and_generated() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["discrete-verify", "--report", "r.csv"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(dir.path().join("r.csv")).unwrap().lines().count(), 201);
    let o = run(&["gen-trees", "--seed", "5", "--size", "4", "--out", "t.json"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&["discrete-verify", "--trees", "t.json"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 5);
}

#[test]
fn validate_discrete_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["validate", "--suite", "discrete", "--out", "v.json"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("v.json")).unwrap()).unwrap();
    assert_eq!(r["pass"], true);
    assert!(r["checks"].as_array().unwrap().len() >= 7);
}

#[test]
fn writes_only_the_output_and_its_manifest() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("m.json"), r#"{"mu": 1, "T": 1}"#).unwrap();
    let cases: [&[&str]; 3] = [
        &["simulate-max", "--model", "m.json", "--n", "3", "--dt", "1e-2", "--out", "a.csv"],
        &["density", "--oracle", "uniform", "--grid", "x=0:1:5", "--out", "b.csv"],
        &["gen-trees", "--size", "2", "--out", "c.json"],
    ];
    for args in cases {
        assert!(run(args, dir.path()).status.success());
    }
    let mut names: Vec<String> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    let expect = ["a.csv", "a.csv.manifest.json", "b.csv", "b.csv.manifest.json", "c.json", "c.json.manifest.json", "m.json"];
    assert_eq!(names, expect);
}
