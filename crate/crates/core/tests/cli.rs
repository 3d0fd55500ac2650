use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn phsysid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phsysid"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn error_kind(out: &Output) -> String {
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().unwrap();
    let v: serde_json::Value = serde_json::from_str(line).unwrap();
    assert!(v["message"].is_string());
    v["error"].as_str().unwrap().to_string()
}

#[test]
fn failures_print_one_json_error_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(error_kind(&phsysid(&["generate", "--preset", "pendulum", "--out", out])), "unknown");
    assert_eq!(error_kind(&phsysid(&["train", "--preset", "nls", "--integrator", "leapfrog"])), "usage");
    assert_eq!(error_kind(&phsysid(&["frobnicate"])), "usage");
    assert_eq!(error_kind(&phsysid(&["generate", "--out", out])), "config");
    let missing = dir.path().join("nope.json");
    let kind = error_kind(&phsysid(&["evaluate", "--preset", "nls", "--model", missing.to_str().unwrap()]));
    assert_eq!(kind, "io");
    assert!(phsysid(&["--help"]).status.success());
}

#[test]
fn generate_train_evaluate_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let common = ["--preset", "henon-heiles", "--budget", "desk", "--seed", "3", "--out", out];
    let run = |cmd: &str, extra: &[&str]| {
        let mut args = vec![cmd];
        args.extend_from_slice(&common);
        args.extend_from_slice(extra);
        let o = phsysid(&args);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        o
    };
    run("generate", &[]);
    let data = dir.path().join("dataset.csv");
    run("train", &["--data", data.to_str().unwrap()]);
    for f in ["model.json", "history.json", "equations.txt", "config.toml"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let eval = run("evaluate", &[]);
    let v: serde_json::Value = serde_json::from_slice(&eval.stdout).unwrap();
    assert!(v["mean_error"].as_f64().unwrap().is_finite());
    assert!(dir.path().join("coefficients.csv").exists());
    run("simulate", &["--model", dir.path().join("model.json").to_str().unwrap(), "--x0", "0.1,-0.2,0.1,0.0"]);
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("series,t,x0,x1,x2,x3\n"));
    assert!(csv.lines().any(|l| l.starts_with("model,")));
}

fn report_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "timing.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn report_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = phsysid(&["report", "--preset", "mass-spring", "--budget", "desk", "--out", d.path().to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (fa, fb) = (report_files(a.path()), report_files(b.path()));
    assert!(fa.len() >= 7);
    assert_eq!(fa, fb);
}
