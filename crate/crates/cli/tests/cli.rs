use std::path::Path;
use std::process::{Command, Output};

fn osmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_osmc")).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn missing_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let cfg = dir.path().join("missing.cfg");
    let res = osmc(&["sweep", "--config", p(&cfg), "--out", p(&out)]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("missing.cfg"));
    assert!(!out.exists());
}

#[test]
fn unknown_key_and_flag_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "d = 10\nbogus = 3\n").unwrap();
    let out = dir.path().join("r.csv");
    let res = osmc(&["sweep", "--config", p(&cfg), "--out", p(&out)]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("bogus"));
    assert_eq!(osmc(&["sweep", "--frobnicate"]).status.code(), Some(1));
    assert_eq!(osmc(&["nonsense"]).status.code(), Some(1));
}

#[test]
fn unreadable_input_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("obs.txt");
    std::fs::write(&bad, "3 4 2\n0 9 1.0\n").unwrap();
    let res = osmc(&["estimate", "--in", p(&bad), "--out", p(&dir.path().join("f.txt")), "--rank", "1"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    for out in [&a, &b] {
        let res = osmc(&["synth", "--seed", "7", "--m", "200", "--d", "8", "--r", "2", "--k", "3", "--out", p(out)]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().next().unwrap(), "200 8 3");
    assert_eq!(text.lines().count(), 1 + 600);
}

#[test]
fn synth_estimate_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let obs = dir.path().join("obs.txt");
    let truth = dir.path().join("truth.txt");
    let theta_star = dir.path().join("theta_star.txt");
    let est = dir.path().join("est.txt");
    let theta_hat = dir.path().join("theta_hat.txt");
    let metrics = dir.path().join("metrics.csv");
    let run = |args: &[&str]| {
        let res = osmc(args);
        assert!(res.status.success(), "{args:?}: {}", String::from_utf8_lossy(&res.stderr));
    };
    run(&[
        "synth", "--seed", "3", "--m", "3e4", "--d", "30", "--r", "3", "--k", "3",
        "--out", p(&obs), "--truth", p(&truth), "--theta", p(&theta_star),
    ]);
    run(&[
        "estimate", "--in", p(&obs), "--out", p(&est), "--rank", "3", "--steps", "3000",
        "--seed", "1", "--theta", p(&theta_hat),
    ]);
    run(&[
        "eval", "--estimate", p(&est), "--truth", p(&truth),
        "--theta-hat", p(&theta_hat), "--theta-star", p(&theta_star), "--out", p(&metrics),
    ]);
    let text = std::fs::read_to_string(&metrics).unwrap();
    let value = |key: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(&format!("{key},"))).unwrap_or_else(|| panic!("{key} in {text}"));
        line.split(',').nth(1).unwrap().parse().unwrap()
    };
    assert!(value("rowspace_err_norm") < 0.5, "{text}");
    assert!(value("theta_err").is_finite());
}
