use std::path::Path;
use std::process::{Command, Output};

use axblab_core::report::ResidualReport;

const SMALL: &str = r#"
seed = 7

[samples]
groupoid_triples = 50
modular_points = 50
decomposition_draws = 50
"#;

fn axblab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_axblab")).args(args).current_dir(dir).output().expect("binary runs")
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    std::fs::write(&path, SMALL).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn passing_suite_exits_zero_and_writes_every_format() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = axblab(&["run", "group", "--config", &cfg, "--out", "out"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains(" 0 failed"), "{stdout}");
    for ext in ["json", "csv", "md"] {
        assert!(tmp.path().join("out").join(format!("group.{ext}")).is_file(), "missing group.{ext}");
    }
    let json = std::fs::read_to_string(tmp.path().join("out/group.json")).unwrap();
    let report = ResidualReport::from_json(&json).unwrap();
    assert_eq!(report.seed, 7);
    assert!(report.passed());
    assert_eq!(report.to_json().unwrap(), json);
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    // Same output directory both times: it is part of the recorded config.
    let files = ["group.json", "group.csv", "group.md"];
    let mut runs = Vec::new();
    for _ in 0..2 {
        let run = axblab(&["run", "group", "--config", &cfg, "--out", "out"], tmp.path());
        assert_eq!(run.status.code(), Some(0));
        runs.push(files.map(|f| std::fs::read(tmp.path().join("out").join(f)).unwrap()));
    }
    for (i, file) in files.iter().enumerate() {
        assert_eq!(runs[0][i], runs[1][i], "{file} differs");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = axblab(&["run", "group", "--config", &cfg, "--seed", "11", "--out", "out"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let report = ResidualReport::from_json(&std::fs::read_to_string(tmp.path().join("out/group.json")).unwrap()).unwrap();
    assert_eq!(report.seed, 11);
}

#[test]
fn failing_check_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = axblab(&["run", "generators", "--orientation", "paper", "--out", "out"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL  generators.coproduct.y"));
}

#[test]
fn configuration_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let unknown = axblab(&["run", "nonsense"], tmp.path());
    assert_eq!(unknown.status.code(), Some(2));

    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "[samples]\ngroupoid_triples = 0\n").unwrap();
    let out = axblab(&["run", "group", "--config", bad.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("axblab: "));

    std::fs::write(&bad, "typo_key = 1\n").unwrap();
    assert_eq!(axblab(&["run", "group", "--config", bad.to_str().unwrap()], tmp.path()).status.code(), Some(2));

    let missing = axblab(&["run", "group", "--config", "does-not-exist.toml"], tmp.path());
    assert_eq!(missing.status.code(), Some(2));

    let orientation = axblab(&["run", "group", "--orientation", "sideways"], tmp.path());
    assert_eq!(orientation.status.code(), Some(2));
}

#[test]
fn thread_count_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let run = |threads: &str, out: &str| {
        Command::new(env!("CARGO_BIN_EXE_axblab"))
            .args(["run", "group", "--config", &cfg, "--out", out])
            .env("AXBLAB_THREADS", threads)
            .current_dir(tmp.path())
            .output()
            .unwrap()
    };
    assert_eq!(run("0", "x").status.code(), Some(2));
    assert_eq!(run("many", "x").status.code(), Some(2));
    assert_eq!(run("2", "two").status.code(), Some(0));
    let report = ResidualReport::from_json(&std::fs::read_to_string(tmp.path().join("two/group.json")).unwrap()).unwrap();
    assert_eq!(report.environment.threads, 2);
}
