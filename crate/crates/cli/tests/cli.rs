use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_leakynorm"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn interp(dir: &Path) -> PathBuf {
    write(dir, "interp.csv", "x1,y\n-1,1\n-0.6,-1\n-0.2,1\n0.2,1\n0.6,-1\n1,1\n")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn patterns_on_interp_data() {
    let tmp = tempfile::tempdir().unwrap();
    let data = interp(tmp.path());
    let out = tmp.path().join("p");
    let o = run(&["patterns", "--data", s(&data), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(out.join("patterns.json"));
    assert_eq!(v["count"], 12);
    assert_eq!(v["bound"], 12);
    assert_eq!(v["witnesses"][0].as_array().unwrap().len(), 2);
    let m = json(out.join("manifest.json"));
    assert_eq!(m["command"], "patterns");
    assert!(m["inputs"][0]["sha256"].is_string());
}

#[test]
fn missing_file_is_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["patterns", "--data", "/nonexistent.csv", "--out", s(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
}

#[test]
fn enumeration_cutoff_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csv = String::from("x1,x2,y\n");
    for i in 0..25 {
        let t = i as f64 * 0.7;
        csv.push_str(&format!("{},{},1\n", t.cos(), (1.3 * t).sin()));
    }
    let data = write(tmp.path(), "big.csv", &csv);
    let o = run(&["patterns", "--data", s(&data), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn fit_weights_then_joint() {
    let tmp = tempfile::tempdir().unwrap();
    let data = interp(tmp.path());
    let mut objectives = Vec::new();
    for f in ["weights", "joint"] {
        let out = tmp.path().join(f);
        let o = run(&["fit", "--data", s(&data), "--formulation", f, "--out", s(&out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let report = json(out.join("solver_report.json"));
        assert_eq!(report["status"], "optimal");
        objectives.push(report["objective"].as_f64().unwrap());
        let net: Value = json(out.join("network.json"));
        assert!(net["neurons"].is_array());
        let grid = std::fs::read_to_string(out.join("grid.csv")).unwrap();
        assert!(grid.starts_with("x1,f\n"));
        assert_eq!(grid.lines().count(), 202);

        let ev = tmp.path().join(format!("{f}-eval"));
        let o = run(&["eval", "--net", s(&out.join("network.json")), "--data", s(&data), "--out", s(&ev)]);
        assert!(o.status.success());
        let e = json(ev.join("eval.json"));
        assert!(e["data"]["max_abs_residual"].as_f64().unwrap() <= 1e-5);
    }
    assert!(objectives[1] >= objectives[0] - 1e-6);
}

#[test]
fn margin_on_contradictory_data_is_infeasible() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write(tmp.path(), "bad.csv", "x1,y\n0,1\n0,-1\n");
    let out = tmp.path().join("o");
    let o = run(&["fit", "--data", s(&data), "--formulation", "margin", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("infeasible"));
    assert_eq!(json(out.join("solver_report.json"))["status"], "infeasible");
    assert!(out.join("manifest.json").exists());
}

#[test]
fn alpha_one_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let data = interp(tmp.path());
    let o = run(&["fit", "--data", s(&data), "--alpha", "1", "--out", s(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_with_cli_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let data = interp(tmp.path());
    let cfg = write(
        tmp.path(),
        "run.toml",
        &format!("data = {:?}\n[fit]\nformulation = \"joint\"\nout = {:?}\n", s(&data), s(&tmp.path().join("cfg"))),
    );
    let o = run(&["--config", s(&cfg), "fit"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(tmp.path().join("cfg/manifest.json"))["config"]["formulation"], "joint-interp");

    let o = run(&["--config", s(&cfg), "fit", "--formulation", "weights", "--out", s(&tmp.path().join("cli"))]);
    assert!(o.status.success());
    assert_eq!(json(tmp.path().join("cli/manifest.json"))["config"]["formulation"], "weights-interp");
}

#[test]
fn train_gd_and_compare() {
    let tmp = tempfile::tempdir().unwrap();
    let data = interp(tmp.path());
    let out = tmp.path().join("gd");
    let o = run(&[
        "train-gd", "--data", s(&data), "--hidden", "20", "--max-epochs", "50", "--seed", "1", "--out", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trace = std::fs::read_to_string(out.join("loss_trace.csv")).unwrap();
    assert!(trace.starts_with("epoch,loss\n"));
    assert_eq!(trace.lines().count(), 52);
    assert_eq!(json(out.join("manifest.json"))["rng"]["seed"], 1);

    let net = out.join("network.json");
    let cmp = tmp.path().join("cmp");
    let o = run(&["compare", "--net-a", s(&net), "--net-b", s(&net), "--out", s(&cmp)]);
    assert!(o.status.success());
    assert_eq!(json(cmp.join("compare.json"))["linf"], 0.0);

    let o = run(&["compare", "--net-a", s(&net), "--net-b", s(&net), "--sign-agreement", "--out", s(&cmp)]);
    assert!(o.status.success());
    let p = json(cmp.join("compare.json"))["agreement"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
}

#[test]
fn train_gd_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let data = interp(tmp.path());
    let mut nets = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        let o = run(&["train-gd", "--data", s(&data), "--hidden", "10", "--max-epochs", "100", "--out", s(&out)]);
        assert!(o.status.success());
        nets.push(std::fs::read(out.join("network.json")).unwrap());
    }
    assert_eq!(nets[0], nets[1]);
}

#[test]
fn oracle_output() {
    let tmp = tempfile::tempdir().unwrap();
    let data = interp(tmp.path());
    let out = tmp.path().join("o");
    let o = run(&["oracle", "--data", s(&data), "--grid-step", "0.01", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(out.join("oracle.json"));
    assert!((v["objective"].as_f64().unwrap() - 30.0).abs() < 1e-6);
    assert!(v["active_atoms"][0]["coef"].is_number());
}

#[test]
fn xor_margin_fit_writes_sign_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write(tmp.path(), "xor.csv", "x1,x2,y\n-1,-1,1\n-1,1,-1\n1,-1,-1\n1,1,1\n");
    let out = tmp.path().join("m");
    let o = run(&["fit", "--data", s(&data), "--formulation", "margin", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let grid = std::fs::read_to_string(out.join("grid.csv")).unwrap();
    assert!(grid.starts_with("x1,x2,f,sign\n"));
    assert_eq!(grid.lines().count(), 101 * 101 + 1);
}

#[test]
fn help_lists_subcommands() {
    let o = run(&["--help"]);
    let text = String::from_utf8_lossy(&o.stdout);
    for sub in ["patterns", "fit", "train-gd", "oracle", "eval", "compare"] {
        assert!(text.contains(sub), "{sub}");
    }
}
