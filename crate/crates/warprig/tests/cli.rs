//! End-to-end CLI behavior: exit codes, report contents, validation.

use std::path::PathBuf;
use std::process::Command;

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("warprig-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_warprig")
}

#[test]
fn verify_on_unit_sphere_is_clean() {
    let dir = workdir("verify");
    let config = dir.join("config.json");
    std::fs::write(
        &config,
        serde_json::json!({
            "ambient": {"preset": "euclidean", "interval": [0.5, 4.0]},
            "surface": {"base_radius": 1.0},
            "grid": {"lat": 24, "lon": 48},
            "output": {"path": dir.join("report.json").to_str().unwrap()}
        })
        .to_string(),
    )
    .unwrap();
    let status = Command::new(bin())
        .args(["verify", "-c", config.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema"], "warprig-report/1");
    for entry in report["results"]["identities"].as_array().unwrap() {
        let max_rel = entry["max_rel"].as_f64().unwrap();
        assert!(max_rel <= 1e-11, "{}: {max_rel}", entry["identity"]);
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn spectrum_reports_kernel_dimension_three() {
    let dir = workdir("spectrum");
    let config = dir.join("config.json");
    std::fs::write(
        &config,
        serde_json::json!({
            "ambient": {"preset": "schwarzschild", "mass": 0.5, "interval": [1.1, 6.0]},
            "surface": {"base_radius": 2.0, "harmonics": [
                {"l": 2, "m": 2, "c": 0.08}, {"l": 3, "m": 1, "c": 0.06}
            ]},
            "grid": {"lat": 16, "lon": 32},
            "deformation": {"degree": 3},
            "output": {"path": dir.join("spec.json").to_str().unwrap()}
        })
        .to_string(),
    )
    .unwrap();
    let status = Command::new(bin())
        .args(["spectrum", "-c", config.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.join("spec.json")).unwrap()).unwrap();
    assert_eq!(report["results"]["kernel_dimension"], 3);
    assert!(dir.join("spec.spectrum.csv").exists());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn malformed_config_exits_2_without_partial_output() {
    let dir = workdir("badcfg");
    let config = dir.join("config.json");
    let out = dir.join("report.json");
    std::fs::write(
        &config,
        serde_json::json!({
            "ambient": {"preset": "euclidean", "interval": [0.5, 4.0]},
            "surface": {"base_radius": 1.0},
            "grid": {"lat": -4, "lon": 48},
            "output": {"path": out.to_str().unwrap()}
        })
        .to_string(),
    )
    .unwrap();
    let output = Command::new(bin())
        .args(["verify", "-c", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(
        output.status.code(),
        Some(2),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    assert!(!out.exists(), "partial output was written");
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("grid.lat"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn numeric_errors_exit_3() {
    let dir = workdir("numeric");
    let config = dir.join("config.json");
    // Surface radius outside the ambient interval: degeneracy, exit 3.
    std::fs::write(
        &config,
        serde_json::json!({
            "ambient": {"preset": "euclidean", "interval": [0.5, 1.5]},
            "surface": {"base_radius": 2.0},
            "grid": {"lat": 8, "lon": 16}
        })
        .to_string(),
    )
    .unwrap();
    let output = Command::new(bin())
        .args(["verify", "-c", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn ambient_weight_and_search_commands() {
    let dir = workdir("trio");
    let config = dir.join("config.json");
    std::fs::write(
        &config,
        serde_json::json!({
            "ambient": {"preset": "schwarzschild", "mass": 0.1, "interval": [0.7, 5.0]},
            "surface": {"base_radius": 2.0, "harmonics": [{"l": 2, "m": 2, "c": 0.05}]},
            "grid": {"lat": 8, "lon": 16},
            "deformation": {"degree": 2},
            "search": {"seed": 3, "perturbation": 5e-3, "restarts": 1},
            "output": {"path": dir.join("out.json").to_str().unwrap()}
        })
        .to_string(),
    )
    .unwrap();
    for cmd in ["ambient", "weight", "search"] {
        let status = Command::new(bin())
            .arg(cmd)
            .arg("-c")
            .arg(config.to_str().unwrap())
            .status()
            .unwrap();
        assert!(status.success(), "{cmd} failed");
    }
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.join("out.json")).unwrap()).unwrap();
    // Last command was search: one restart with a small objective.
    let trace = &report["results"]["restarts"][0];
    assert!(trace["final_objective"].as_f64().unwrap() <= 1e-8);
    assert!(dir.join("out.trace0.csv").exists());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn pair_command_on_rotation_pair() {
    let dir = workdir("pair");
    let config = dir.join("config.json");
    std::fs::write(
        &config,
        serde_json::json!({
            "ambient": {"preset": "schwarzschild", "mass": 0.5, "interval": [1.1, 6.0]},
            "surface": {"base_radius": 2.0, "harmonics": [{"l": 2, "m": 2, "c": 0.08}]},
            "surface_b": {"rotation_of_a": {"axis": [0.0, 0.0, 1.0], "angle": 0.8}},
            "grid": {"lat": 16, "lon": 32},
            "output": {"path": dir.join("pair.json").to_str().unwrap()}
        })
        .to_string(),
    )
    .unwrap();
    let status = Command::new(bin())
        .args(["pair", "-c", config.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.join("pair.json")).unwrap()).unwrap();
    let sum = report["results"]["sum"].as_f64().unwrap();
    assert!(sum.abs() <= 1e-10, "pair sum {sum}");
    std::fs::remove_dir_all(&dir).ok();
}
