//! End-to-end tests of the command-line pipeline against the bundled
//! three-feature fixture.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use cohort_shapley_cli::{load_config, pipeline, Overrides};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn out_override(dir: &tempfile::TempDir) -> Overrides {
    Overrides {
        out: Some(dir.path().to_path_buf()),
        ..Default::default()
    }
}

/// phi by (target, feature) from an attributions.csv.
fn read_phi(path: &Path) -> HashMap<(usize, String), f64> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut out = HashMap::new();
    for line in text.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        let target: usize = cells[0].parse().unwrap();
        let phi: f64 = cells[2].parse().unwrap();
        out.insert((target, cells[1].to_string()), phi);
    }
    out
}

#[test]
fn report_emits_expected_attributions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = fixture("running.conf");
    let cfg = load_config(&cfg_path, &out_override(&dir)).unwrap();
    pipeline::cmd_report(&cfg, &cfg_path).unwrap();

    let phi = read_phi(&dir.path().join("attributions.csv"));
    assert!((phi[&(0, "x1".to_string())] + 0.5).abs() < 1e-12);
    assert!((phi[&(0, "x2".to_string())] - 1.0).abs() < 1e-12);
    assert!(phi[&(0, "x3".to_string())].abs() < 1e-12);

    for name in [
        "attributions.csv",
        "attributions.jsonl",
        "groups.csv",
        "histogram_x1.csv",
        "histogram_x2.csv",
        "histogram_x3.csv",
        "manifest.json",
    ] {
        assert!(dir.path().join(name).exists(), "missing {name}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let cfg_path = fixture("running.conf");
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let cfg_a = load_config(&cfg_path, &out_override(&dir_a)).unwrap();
    let cfg_b = load_config(&cfg_path, &out_override(&dir_b)).unwrap();
    pipeline::cmd_report(&cfg_a, &cfg_path).unwrap();
    pipeline::cmd_report(&cfg_b, &cfg_path).unwrap();
    for name in [
        "attributions.csv",
        "attributions.jsonl",
        "groups.csv",
        "histogram_x1.csv",
    ] {
        let a = std::fs::read(dir_a.path().join(name)).unwrap();
        let b = std::fs::read(dir_b.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between reruns");
    }
}

#[test]
fn mc_mode_override_runs_and_reports_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = fixture("running.conf");
    let ov = Overrides {
        out: Some(dir.path().to_path_buf()),
        mode: Some(cohort_shapley::config::ModeKind::MonteCarlo),
        n_perms: Some(500),
        seed: Some(5),
        ..Default::default()
    };
    let cfg = load_config(&cfg_path, &ov).unwrap();
    pipeline::cmd_attribute(&cfg, &cfg_path).unwrap();
    let text = std::fs::read_to_string(dir.path().join("attributions.csv")).unwrap();
    let row = text.lines().nth(1).unwrap();
    assert!(row.contains(",mc,500,"), "{row}");
}

#[test]
fn negative_window_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = "\
[dataset]
path = running.csv

[column.x1]
role = feature
kind = continuous
rule = abs(-1)

[column.x2]
role = ignore
[column.x3]
role = ignore
[column.f1]
role = response
name = f1
[column.f2]
role = ignore
";
    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, bad).unwrap();
    std::fs::copy(fixture("running.csv"), dir.path().join("running.csv")).unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_cohort-shapley"))
        .args(["attribute", "--config"])
        .arg(&conf)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("positive"), "{stderr}");
    assert!(stderr.contains("line 7"), "{stderr}");
}

#[test]
fn missing_data_file_exits_with_data_code() {
    let dir = tempfile::tempdir().unwrap();
    let conf_text = "\
[dataset]
path = nope.csv
[column.x]
role = feature
kind = categorical
";
    let conf = dir.path().join("c.conf");
    std::fs::write(&conf, conf_text).unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_cohort-shapley"))
        .args(["attribute", "--config"])
        .arg(&conf)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn unknown_config_key_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let conf_text = "\
[dataset]
path = running.csv
wat = 1
";
    let conf = dir.path().join("c.conf");
    std::fs::write(&conf, conf_text).unwrap();
    let err = load_config(&conf, &Overrides::default()).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("line 3"), "{msg}");
    assert!(msg.contains("wat"), "{msg}");
}

#[test]
fn sobol_subcommand_reports_indices() {
    let dir = tempfile::tempdir().unwrap();
    let conf_text = format!(
        "[dataset]\npath = running.csv\n[column.x1]\nrole = feature\nkind = categorical\n\
         [column.x2]\nrole = ignore\n[column.x3]\nrole = ignore\n[column.f1]\nrole = ignore\n\
         [column.f2]\nrole = ignore\n[sobol]\ngrid = {}\npickfreeze_n = 4000\npickfreeze_seed = 3\n",
        fixture("grid.csv").display()
    );
    let conf = dir.path().join("sobol.conf");
    std::fs::write(&conf, &conf_text).unwrap();
    std::fs::copy(fixture("running.csv"), dir.path().join("running.csv")).unwrap();
    let ov = out_override(&dir);
    let cfg = load_config(&conf, &ov).unwrap();
    pipeline::cmd_sobol(&cfg, &conf).unwrap();

    // f = x1 - 2 x2 on uniform bits: closed index 0.25 for x1, 1.0 for x2.
    let text = std::fs::read_to_string(dir.path().join("indices.csv")).unwrap();
    let mut closed = HashMap::new();
    for line in text.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        closed.insert(cells[0].to_string(), cells[1].parse::<f64>().unwrap());
    }
    assert!((closed["x1"] - 0.25).abs() < 1e-12);
    assert!((closed["x2"] - 1.0).abs() < 1e-12);
    assert!(closed["x3"].abs() < 1e-12);
    assert!(dir.path().join("components.csv").exists());
    assert!(dir.path().join("estimates.csv").exists());
}

#[test]
fn conditional_audit_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = fixture("audit.conf");
    let cfg = load_config(&cfg_path, &out_override(&dir)).unwrap();
    pipeline::cmd_report(&cfg, &cfg_path).unwrap();

    // The condition keeps only outcome-0 rows: 80 minus every third row.
    let kept = (0..80).filter(|i| i % 3 != 0).count();
    let text = std::fs::read_to_string(dir.path().join("attributions.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + kept * 2);

    // Race X is scored over the cutoff, race Y under it, so the race
    // impact on the thresholded prediction separates by group.
    let groups = std::fs::read_to_string(dir.path().join("groups.csv")).unwrap();
    let mut race_mean = HashMap::new();
    for line in groups.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells[2] == "race" {
            race_mean.insert(cells[0].to_string(), cells[3].parse::<f64>().unwrap());
        }
    }
    assert!(race_mean["X"] > 0.2, "X mean {}", race_mean["X"]);
    assert!(race_mean["Y"] < -0.2, "Y mean {}", race_mean["Y"]);

    // Bootstrap intervals for the race impact exclude zero on both sides.
    let summary = std::fs::read_to_string(dir.path().join("bootstrap_summary.csv")).unwrap();
    for line in summary.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells[1] != "race" {
            continue;
        }
        let lo: f64 = cells[4].parse().unwrap();
        let hi: f64 = cells[5].parse().unwrap();
        assert!(lo * hi > 0.0, "{line}");
    }

    // Figures come out as well-formed SVG derived from the binned data.
    for name in ["histogram_race.svg", "histogram_age.svg", "bootstrap_violins.svg"] {
        let svg = std::fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(svg.starts_with("<svg"), "{name}");
        assert!(svg.trim_end().ends_with("</svg>"), "{name}");
    }

    // JSONL mirrors the CSV records.
    let jsonl = std::fs::read_to_string(dir.path().join("attributions.jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), kept * 2);
    for line in jsonl.lines().take(4) {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["phi"].is_number(), "{line}");
    }
}

#[test]
fn false_positive_response_through_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(fixture("audit.csv"), dir.path().join("audit.csv")).unwrap();
    let conf_text = std::fs::read_to_string(fixture("audit.conf"))
        .unwrap()
        .replace("kind = raw\ncolumn = yhat", "kind = fp")
        .replace("[condition]\nwhere = y=0\n", "");
    let conf = dir.path().join("fp.conf");
    std::fs::write(&conf, conf_text).unwrap();
    let cfg = load_config(&conf, &out_override(&dir)).unwrap();
    pipeline::cmd_aggregate(&cfg, &conf).unwrap();
    let text = std::fs::read_to_string(dir.path().join("attributions.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 80 * 2);
    // Only race-X rows can be false positives here, so revealing race X
    // raises the false-positive indicator.
    let groups = std::fs::read_to_string(dir.path().join("groups.csv")).unwrap();
    let x_race: f64 = groups
        .lines()
        .find(|l| l.starts_with("X,") && l.contains(",race,"))
        .unwrap()
        .split(',')
        .nth(3)
        .unwrap()
        .parse()
        .unwrap();
    assert!(x_race > 0.1, "{x_race}");
}

#[test]
fn bootstrap_subcommand_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let conf_text = "\
[dataset]
path = running.csv

[column.x1]
role = feature
kind = categorical
[column.x2]
role = feature
kind = categorical
[column.x3]
role = feature
kind = categorical
[column.f1]
role = response
name = f1
[column.f2]
role = ignore

[response]
kind = raw
column = f1

[group.x1-low]
x1 = 0

[bootstrap]
replicates = 50
seed = 4
quantiles = 0.025, 0.975
targets = 0
";
    let conf = dir.path().join("b.conf");
    std::fs::write(&conf, conf_text).unwrap();
    std::fs::copy(fixture("running.csv"), dir.path().join("running.csv")).unwrap();
    let ov = out_override(&dir);
    let cfg = load_config(&conf, &ov).unwrap();
    pipeline::cmd_bootstrap(&cfg, &conf).unwrap();
    let text = std::fs::read_to_string(dir.path().join("bootstrap_summary.csv")).unwrap();
    assert!(text
        .lines()
        .next()
        .unwrap()
        .starts_with("series,feature,mean,sd,q0.025,q0.975"));
    // one group series + one target series, three features each
    assert_eq!(text.lines().count(), 1 + 6);
    assert!(dir.path().join("bootstrap_violins.json").exists());
}
