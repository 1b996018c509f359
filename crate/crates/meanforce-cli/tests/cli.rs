//! End-to-end runs of the `meanforce` binary against temp-dir configs.

use assert_cmd::Command;
use predicates::prelude::*;
use std::path::Path;

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const MODEL_BLOCK: &str = r#"
[model]
omega0 = 1.0

[[model.bands]]
strengths = [0.30, 0.20, 0.10]
resonances = [0.80, 1.30, 1.90]
dampings = [0.30, 0.40, 0.50]

[[model.bands]]
strengths = [0.15, 0.10, 0.05]
resonances = [2.30, 2.90, 3.40]
dampings = [0.60, 0.50, 0.40]
rotation = { axis = [1.0, 1.0, 1.0], angle = 0.7 }
"#;

fn cmd() -> Command {
    Command::cargo_bin("meanforce").unwrap()
}

#[test]
fn validate_passes_on_good_model() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.toml",
        &format!("task = \"validate\"\n{MODEL_BLOCK}"),
    );
    cmd()
        .args(["--config"])
        .arg(&cfg)
        .args(["--output-dir"])
        .arg(dir.path())
        .assert()
        .success();
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["task"], "validate");
    assert!(report["results"]["checks"]["static_stability"]["passed"]
        .as_bool()
        .unwrap());
    assert!(report["results"]["checks"]["kramers_kronig"]["passed"]
        .as_bool()
        .unwrap());
    assert!(report["failures"].as_array().unwrap().is_empty());
}

#[test]
fn validate_fails_on_unstable_model() {
    // α sums far past the static stability bound
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.toml",
        r#"
task = "validate"

[model]
omega0 = 1.0

[[model.bands]]
strengths = [1.5, 1.5, 1.5]
resonances = [1.0, 1.0, 1.0]
dampings = [0.3, 0.3, 0.3]
"#,
    );
    cmd()
        .args(["--config"])
        .arg(&cfg)
        .args(["--output-dir"])
        .arg(dir.path())
        .assert()
        .failure()
        .stderr(predicate::str::contains("static stability"));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.toml",
        &format!("task = \"validate\"\ntypo_key = 1\n{MODEL_BLOCK}"),
    );
    cmd()
        .args(["--config"])
        .arg(&cfg)
        .assert()
        .failure()
        .stderr(predicate::str::contains("typo_key"));
}

#[test]
fn missing_task_section_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.toml",
        &format!("task = \"thermo-sweep\"\n{MODEL_BLOCK}"),
    );
    cmd()
        .args(["--config"])
        .arg(&cfg)
        .assert()
        .failure()
        .stderr(predicate::str::contains("[temperatures]"));
}

#[test]
fn thermo_sweep_matches_library_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.toml",
        &format!(
            "task = \"thermo-sweep\"\n{MODEL_BLOCK}\n[temperatures]\nvalues = [0.5, 1.0, 2.0]\n"
        ),
    );
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        cmd()
            .args(["--config"])
            .arg(&cfg)
            .args(["--output-dir"])
            .arg(out)
            .assert()
            .success();
    }
    let csv = std::fs::read_to_string(out_a.join("results.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4, "header + three temperatures");
    assert!(lines[0].starts_with("temperature,u_mean_force"));

    // row values must equal a direct library evaluation bit-for-bit
    let model = {
        use meanforce::model::{rotation_axis_angle, LorentzBand, SusceptibilityModel};
        let b1 = LorentzBand::axis_aligned([0.3, 0.2, 0.1], [0.8, 1.3, 1.9], [0.3, 0.4, 0.5])
            .unwrap();
        let rot = rotation_axis_angle(nalgebra::Vector3::new(1.0, 1.0, 1.0), 0.7);
        let b2 =
            LorentzBand::new(rot, [0.15, 0.1, 0.05], [2.3, 2.9, 3.4], [0.6, 0.5, 0.4]).unwrap();
        SusceptibilityModel::new(1.0, vec![b1, b2]).unwrap()
    };
    let p = meanforce::thermo::thermo_point(&model, 1.0, &Default::default()).unwrap();
    let row: Vec<f64> = lines[2]
        .split(',')
        .take(7)
        .map(|s| s.parse().unwrap())
        .collect();
    assert_eq!(row[0], 1.0);
    assert_eq!(row[1], p.u_mean_force);
    assert_eq!(row[3], p.f_mean_force);

    // byte-identical outputs across runs
    assert_eq!(
        std::fs::read(out_a.join("results.csv")).unwrap(),
        std::fs::read(out_b.join("results.csv")).unwrap()
    );
    assert_eq!(
        std::fs::read(out_a.join("report.json")).unwrap(),
        std::fs::read(out_b.join("report.json")).unwrap()
    );
}

#[test]
fn temperature_grid_expansion() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.toml",
        &format!(
            "task = \"thermo-sweep\"\n{MODEL_BLOCK}\n\
             [temperatures]\ngrid = {{ start = 0.5, stop = 2.0, count = 5, spacing = \"log\" }}\n"
        ),
    );
    cmd()
        .args(["--config"])
        .arg(&cfg)
        .args(["--output-dir"])
        .arg(dir.path())
        .assert()
        .success();
    let csv = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    let first: f64 = csv.lines().nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
    let last: f64 = csv.lines().nth(5).unwrap().split(',').next().unwrap().parse().unwrap();
    assert!((first - 0.5).abs() < 1e-12 && (last - 2.0).abs() < 1e-12);
}

#[test]
fn correlators_table_shape() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.toml",
        &format!(
            "task = \"correlators\"\n{MODEL_BLOCK}\n\
             [correlators]\ntemperature = 1.0\ntaus = [0.0, 0.5, 1.0, 2.0]\n"
        ),
    );
    cmd()
        .args(["--config"])
        .arg(&cfg)
        .args(["--output-dir"])
        .arg(dir.path())
        .assert()
        .success();
    let csv = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[0].split(',').count(), 15);
    assert_eq!(lines[1].split(',').count(), 15);
    // τ = 0 position variance must dominate later lags on the diagonal
    let at = |line: &str, k: usize| line.split(',').nth(k).unwrap().parse::<f64>().unwrap();
    assert!(at(lines[1], 1) > at(lines[4], 1).abs());
}

#[test]
fn oracle_compare_deviations_are_small_and_gate_works() {
    let dir = tempfile::tempdir().unwrap();
    let base = format!(
        "task = \"oracle-compare\"\n{MODEL_BLOCK}\n\
         [temperatures]\nvalues = [1.0]\n\
         [oracle]\nn_modes = 1200\n"
    );
    let cfg = write(dir.path(), "run.toml", &base);
    cmd()
        .args(["--config"])
        .arg(&cfg)
        .args(["--output-dir"])
        .arg(dir.path())
        .assert()
        .success();
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    let devs = &report["results"]["comparisons"][0]["relative_deviations"];
    for (k, v) in devs.as_object().unwrap() {
        let d = v.as_f64().unwrap();
        assert!(d < 0.01, "{k} deviates {d:.3e} at N = 1200");
    }

    // an absurdly tight gate must flip the exit code
    let cfg2 = write(
        dir.path(),
        "gate.toml",
        &base.replace("n_modes = 1200", "n_modes = 150\nfail_above = 1e-9"),
    );
    cmd()
        .args(["--config"])
        .arg(&cfg2)
        .args(["--output-dir"])
        .arg(dir.path())
        .assert()
        .failure()
        .stderr(predicate::str::contains("deviates"));
}

#[test]
fn langevin_runs_and_seed_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.toml",
        &format!(
            "task = \"langevin\"\n{MODEL_BLOCK}\n\
             [sim]\ntemperature = 5.0\ndt = 0.01\nn_steps = 4000\nburn_in = 1000\n\
             n_traj = 8\nn_bath = 30\nomega_max = 8.0\nseed = 7\nacf_lags = 8\nacf_stride = 10\n"
        ),
    );
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    cmd()
        .args(["--config"])
        .arg(&cfg)
        .args(["--output-dir"])
        .arg(&out_a)
        .assert()
        .success();
    // same config, overridden seed → different sample, same shape
    cmd()
        .args(["--config"])
        .arg(&cfg)
        .args(["--output-dir"])
        .arg(&out_b)
        .args(["--seed", "8"])
        .assert()
        .success();
    let load = |p: &Path| -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(p.join("report.json")).unwrap()).unwrap()
    };
    let (a, b) = (load(&out_a), load(&out_b));
    let cov = |v: &serde_json::Value| v["results"]["ensemble"]["position_cov"].clone();
    assert_ne!(cov(&a), cov(&b));
    assert_eq!(a["results"]["ensemble"]["n_traj"], 8);
    let acf = std::fs::read_to_string(out_a.join("results.csv")).unwrap();
    assert_eq!(acf.lines().count(), 9, "header + 8 lags");
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.toml",
        &format!(
            "task = \"langevin\"\n{MODEL_BLOCK}\n\
             [sim]\ntemperature = 5.0\ndt = 0.01\nn_steps = 3000\nburn_in = 500\n\
             n_traj = 6\nn_bath = 25\nomega_max = 8.0\nseed = 11\nacf_lags = 4\nacf_stride = 10\n"
        ),
    );
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    cmd()
        .args(["--config"])
        .arg(&cfg)
        .args(["--output-dir"])
        .arg(&out_a)
        .args(["--threads", "1"])
        .assert()
        .success();
    cmd()
        .args(["--config"])
        .arg(&cfg)
        .args(["--output-dir"])
        .arg(&out_b)
        .env("MEANFORCE_THREADS", "3")
        .assert()
        .success();
    assert_eq!(
        std::fs::read(out_a.join("report.json")).unwrap(),
        std::fs::read(out_b.join("report.json")).unwrap()
    );
}
