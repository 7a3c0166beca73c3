use std::path::Path;
use std::process::Command;

const BASE: &str = r#"
seed = 3
[space]
kind = "unit-interval"
[sequence]
kind = "rational-approx"
tau = 3.0
[f]
s = 0.5
[run]
q_max = 200
c_list = [1.0]
depth = 2
samples = 500
mdp_samples = 500
traces = 2
"#;

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("config.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn limsup(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_limsup")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn run_with(text: &str, cmd: &str, extra: &[&str]) -> (i32, String, String, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), text);
    let out = dir.path().join("out");
    let mut args = vec![cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let (code, stdout, stderr) = limsup(&args);
    (code, stdout, stderr, dir)
}

#[test]
fn check_accepts_half_power() {
    let (code, stdout, _, dir) = run_with(BASE, "check", &[]);
    assert_eq!(code, 0);
    assert!(stdout.starts_with("valid"), "{stdout}");
    let report = std::fs::read_to_string(dir.path().join("out/report.txt")).unwrap();
    assert!(report.contains("verdict = \"valid\""));
    assert!(report.contains("[[check.cantelli]]"));
}

#[test]
fn check_rejects_full_power() {
    let text = BASE.replace("s = 0.5", "s = 1.0");
    let (code, stdout, _, _d) = run_with(&text, "check", &[]);
    assert_eq!(code, 2);
    assert!(stdout.starts_with("fails divergence"), "{stdout}");
}

#[test]
fn malformed_numeric_is_a_usage_error() {
    let text = BASE.replace("s = 0.5", "s = \"half\"");
    let (code, _, stderr, _d) = run_with(&text, "check", &[]);
    assert_eq!(code, 1);
    assert!(stderr.contains("usage error"), "{stderr}");
    let (code, _, _, _d) = run_with(BASE, "check", &["--seed", "abc"]);
    assert_eq!(code, 1);
}

#[test]
fn unknown_field_names_the_field() {
    let text = BASE.replace("[f]\n", "[f]\nsigma = 2.0\n");
    let (code, _, stderr, _d) = run_with(&text, "check", &[]);
    assert_eq!(code, 1);
    assert!(stderr.contains("sigma"), "{stderr}");
}

#[test]
fn depth_zero_is_a_usage_error() {
    let (code, _, stderr, _d) = run_with(BASE, "build", &["--depth", "0"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("run.depth"), "{stderr}");
}

#[test]
fn help_exits_zero_and_missing_command_exits_one() {
    assert_eq!(limsup(&["--help"]).0, 0);
    assert_eq!(limsup(&[]).0, 1);
    assert_eq!(limsup(&["build"]).0, 1);
}

#[test]
fn huge_c_has_no_cutoff() {
    let (code, stdout, _, dir) = run_with(BASE, "build", &["--c-list", "1e30"]);
    assert_eq!(code, 2);
    assert!(stdout.contains("radii too large for this C"), "{stdout}");
    let report = std::fs::read_to_string(dir.path().join("out/report.txt")).unwrap();
    assert!(report.contains("stage = \"cutoff\""));
}

#[test]
fn build_writes_all_artifacts_and_a_positive_bound() {
    let (code, stdout, stderr, dir) = run_with(BASE, "build", &[]);
    assert_eq!(code, 0, "{stdout}{stderr}");
    for name in ["report.txt", "timings.txt", "tree.dump", "selection.csv", "traces.csv"] {
        assert!(dir.path().join("out").join(name).exists(), "{name}");
    }
    let report = std::fs::read_to_string(dir.path().join("out/report.txt")).unwrap();
    let parsed: toml::Value = toml::from_str(&report).unwrap();
    let run = &parsed["runs"][0];
    assert!(run["mdp"]["lower_bound"].as_float().unwrap() > 0.0);
    assert_eq!(run["tree"]["children_in_tail"].as_bool(), Some(true));
    let traces = std::fs::read_to_string(dir.path().join("out/traces.csv")).unwrap();
    assert!(traces.lines().count() > 1);
}

#[test]
fn build_reports_are_byte_identical() {
    let (_, _, _, a) = run_with(BASE, "build", &["--c-list", "1,100"]);
    let (_, _, _, b) = run_with(BASE, "build", &["--c-list", "1,100"]);
    for name in ["report.txt", "tree.dump", "selection.csv", "traces.csv"] {
        let x = std::fs::read(a.path().join("out").join(name)).unwrap();
        let y = std::fs::read(b.path().join("out").join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
}

#[test]
fn seed_changes_the_sampled_part() {
    let (_, _, _, a) = run_with(BASE, "build", &["--seed", "1"]);
    let (_, _, _, b) = run_with(BASE, "build", &["--seed", "2"]);
    let x = std::fs::read_to_string(a.path().join("out/traces.csv")).unwrap();
    let y = std::fs::read_to_string(b.path().join("out/traces.csv")).unwrap();
    assert_ne!(x, y);
}

#[test]
fn dimension_rejects_a_non_bracketing_range() {
    let text = format!("{BASE}\n[dimension]\ns_range = [0.9, 0.95]\n");
    let (code, stdout, _, _d) = run_with(&text, "dimension", &[]);
    assert_eq!(code, 2);
    assert!(stdout.contains("bisect failed"), "{stdout}");
}

#[test]
fn dimension_without_section_is_a_usage_error() {
    let (code, _, stderr, _d) = run_with(BASE, "dimension", &[]);
    assert_eq!(code, 1);
    assert!(stderr.contains("dimension"), "{stderr}");
}
