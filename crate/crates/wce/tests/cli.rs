//! End-to-end runs of the `wce` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"scenario = "heat-advection"
[truncation]
modes = 3
order = 2
[grid]
points = 32
[time]
horizon = 0.1
steps = 20
[oracle]
paths = 400
probes = 4
samples = 10
[output]
dir = "out"
"#;

const SUPERCRITICAL: &str = r#"scenario = "heat-advection"
[[equation.noise]]
sigma = [2.0]
[truncation]
modes = 3
order = 3
[grid]
points = 32
[time]
horizon = 0.1
steps = 20
[oracle]
paths = 400
probes = 4
[output]
dir = "out"
"#;

fn wce(dir: &Path, args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_wce"));
    cmd.args(args).current_dir(dir);
    match threads {
        Some(t) => cmd.env("WCE_THREADS", t),
        None => cmd.env_remove("WCE_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn workspace(config: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("scenario.toml"), config).unwrap();
    let path = dir.path().to_path_buf();
    (dir, path)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn solve_writes_the_report_bundle() {
    let (_keep, dir) = workspace(SMALL);
    let o = wce(&dir, &["solve", "--config", "scenario.toml"], Some("2"));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = dir.join("out");
    for f in ["config.toml", "report.json", "manifest.json", "moments.csv", "energy.csv", "coefficient_norms.csv", "uh.csv", "monte_carlo.csv", "coefficients/u_0.csv"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["exit_code"], 0);
    assert_eq!(report["classification"]["unweighted"]["label"], "strong");
    // The written config parses back to the one that ran.
    let written = fs::read_to_string(out.join("config.toml")).unwrap();
    let cfg = wce::config::parse_config(&written).unwrap();
    assert_eq!(report["config_digest"], cfg.digest());
}

#[test]
fn outputs_are_identical_across_runs_and_thread_counts() {
    let (_a, one) = workspace(SMALL);
    let (_b, many) = workspace(SMALL);
    assert_eq!(wce(&one, &["solve", "--config", "scenario.toml"], Some("1")).status.code(), Some(0));
    assert_eq!(wce(&many, &["solve", "--config", "scenario.toml"], Some("4")).status.code(), Some(0));
    let (a, b) = (tree(&one.join("out")), tree(&many.join("out")));
    assert!(!a.is_empty());
    assert_eq!(a.len(), b.len());
    for ((pa, da), (pb, db)) in a.iter().zip(&b) {
        assert_eq!(pa, pb);
        assert!(da == db, "{} differs between thread counts", pa.display());
    }
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = wce(dir.path(), &["bogus"], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn bad_configs_exit_1_with_a_location() {
    let (_keep, dir) = workspace("");
    let o = wce(&dir, &["solve", "--config", "scenario.toml"], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("scenario"), "{}", stderr(&o));

    let (_keep, dir) = workspace("scenario = \"not-a-scenario\"\n");
    let o = wce(&dir, &["solve", "--config", "scenario.toml"], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));

    let (_keep, dir) = workspace("scenario = \"passive-scalar\"\n[equation]\nviscosity = -1\n");
    let o = wce(&dir, &["solve", "--config", "scenario.toml"], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("equation.viscosity"), "{}", stderr(&o));

    let (_keep, dir) = workspace(SMALL);
    let o = wce(&dir, &["solve", "--config", "missing.toml"], None);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bad_thread_count_is_an_error() {
    let (_keep, dir) = workspace(SMALL);
    let o = wce(&dir, &["solve", "--config", "scenario.toml"], Some("zero"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("WCE_THREADS"));
}

#[test]
fn supercritical_equation_is_flagged_and_moments_skipped() {
    let (_keep, dir) = workspace(SUPERCRITICAL);
    let o = wce(&dir, &["classify", "--config", "scenario.toml"], None);
    assert_eq!(o.status.code(), Some(0));
    let class: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(class["unweighted"]["label"], "none");

    let o = wce(&dir, &["solve", "--config", "scenario.toml"], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("out/report.json")).unwrap()).unwrap();
    let status = |name: &str| {
        report["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).map(|c| c["status"].clone())
    };
    assert_eq!(status("monte-carlo"), Some("skipped".into()));
    assert_eq!(status("fourier-second-moment"), Some("skipped".into()));
}

#[test]
fn suggested_weights_make_the_supercritical_case_strong() {
    let config = format!("{SUPERCRITICAL}[weights]\nkind = \"suggest\"\nepsilon = 0.5\n");
    let (_keep, dir) = workspace(&config);
    let o = wce(&dir, &["classify", "--config", "scenario.toml"], None);
    assert_eq!(o.status.code(), Some(0));
    let class: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(class["weighted"]["label"], "strong");
    // a = 1, σ = 2: q = ε√(2a)/σ and the guaranteed margin 2a(1 − ε²).
    let q = class["weights"][0].as_f64().unwrap();
    assert!((q - 0.5 * 2f64.sqrt() / 2.0).abs() < 1e-12, "q = {q}");
    assert!((class["guaranteed_margin"].as_f64().unwrap() - 1.5).abs() < 1e-12);
}

#[test]
fn verify_selected_criteria_writes_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = wce(dir.path(), &["verify", "--criteria", "4,9", "--out", "v"], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("criterion ")).count(), 2);
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("v/verify.json")).unwrap()).unwrap();
    assert_eq!(summary["pass"], true);
    assert_eq!(summary["criteria"].as_array().unwrap().len(), 2);
}

#[test]
fn sample_writes_one_file_per_sample() {
    let (_keep, dir) = workspace(SMALL);
    let o = wce(&dir, &["sample", "--config", "scenario.toml", "--samples", "3"], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.join("out/samples/xi.csv").is_file());
    let n = fs::read_dir(dir.join("out/samples")).unwrap().filter(|e| {
        e.as_ref().unwrap().file_name().to_string_lossy().starts_with("sample_")
    }).count();
    assert_eq!(n, 3);
}
