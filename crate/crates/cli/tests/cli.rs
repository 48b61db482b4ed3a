//! End-to-end checks of the command-line surface: subcommands, flags,
//! exit codes, and the files each scenario writes.

use std::path::Path;
use std::process::Command;

fn colemit() -> Command {
    Command::new(env!("CARGO_BIN_EXE_colemit"))
}

fn write_config(dir: &Path, scenario: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(
        &path,
        format!(
            r#"
[cloud]
lx = 6.0
ly = 6.0
lz = 6.0
n_atoms = 8

[run]
scenario = "{scenario}"
instances = 2
base_seed = 5
times = [0.0, 4.0]

[grid]
z_obs = 25.0
x_span = 3.0
y_span = 3.0
spacing = 0.5
window = 2.0

[sweep]
n_values = [6, 10]
"#
        ),
    )
    .unwrap();
    path
}

#[test]
fn run_norm_trace_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "norm-trace");
    let out = tmp.path().join("results");
    let status = colemit()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join("norms_aggregate.csv").exists());
    assert!(out.join("metadata.json").exists());
}

#[test]
fn instances_and_seed_flags_override_config() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "norm-trace");
    let out = tmp.path().join("results");
    let status = colemit()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .args(["--instances", "3", "--seed", "99", "--threads", "1"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("metadata.json")).unwrap())
            .unwrap();
    assert_eq!(meta["seeds"], serde_json::json!([99, 100, 101]));
}

#[test]
fn missing_out_dir_is_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "norm-trace");
    let status = colemit()
        .args(["run", "--config"])
        .arg(&config)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn bad_config_is_exit_code_1() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    std::fs::write(&path, "[cloud]\nlx = -4.0\n").unwrap();
    let status = colemit()
        .args(["run", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(tmp.path().join("x"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn sweep_scenario_under_run_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "coherence-vs-N");
    let status = colemit()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn sweep_writes_combined_table() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "coherence-vs-N");
    let out = tmp.path().join("sweep_out");
    let status = colemit()
        .args(["sweep", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let table = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(table.lines().count() == 3);
    assert!(out.join("N6").join("metadata.json").exists());
}

#[test]
fn spectrum_subcommand_exports_eigenvalues() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "norm-trace");
    let out = tmp.path().join("spec_out");
    let status = colemit()
        .args(["spectrum", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let text = std::fs::read_to_string(out.join("spectrum_instance_0.csv")).unwrap();
    assert!(text.starts_with("mode_index,beta,rate_over_gamma"));
}

#[test]
fn scenario_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "norm-trace");
    let out = tmp.path().join("over_out");
    let status = colemit()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .args(["--scenario", "coherence-vs-time"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join("widths_x.csv").exists());
}

#[test]
fn fit_recovers_synthetic_xi() {
    let tmp = tempfile::tempdir().unwrap();
    // synthetic fom table generated from the model with xi = 0.45
    let w_u = 2.0;
    let mut table = String::from(
        "n_atoms,box_l,sigma_h,w0_mean,w0_unsat_mean,w_mean,w_unsat_mean,w_std,n_saturated,n_instances\n",
    );
    for (n, l) in [(50u32, 12.8f64), (400, 25.7), (1500, 40.0), (4000, 55.5)] {
        let sigma = (std::f64::consts::PI + 29.0 / 12.0).sqrt() / (4.0 * std::f64::consts::PI)
            * n as f64
            / l;
        let w = w_u * (1.0 + 0.45 * sigma);
        table.push_str(&format!(
            "{n},{l},{sigma},{w_u},{w_u},{w},{w},0.1,0,20\n"
        ));
    }
    let input = tmp.path().join("sweep.csv");
    std::fs::write(&input, table).unwrap();
    let out = colemit()
        .args(["fit", "--input"])
        .arg(&input)
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("xi = 0.45"), "stdout: {stdout}");
    let fit: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("fom_fit.json")).unwrap())
            .unwrap();
    assert!((fit["xi"].as_f64().unwrap() - 0.45).abs() < 1e-9);
}

#[test]
fn render_produces_graymap() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "field-evolution");
    let out = tmp.path().join("maps");
    let status = colemit()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let csv = out.join("field_map_instance_0_t0.csv");
    let pgm = tmp.path().join("render.pgm");
    let status = colemit()
        .args(["render", "--input"])
        .arg(&csv)
        .arg("--out")
        .arg(&pgm)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let text = std::fs::read_to_string(&pgm).unwrap();
    assert!(text.starts_with("P2\n13 13\n255\n"));
    // must match the graymap the run itself wrote
    let direct = std::fs::read_to_string(out.join("field_map_instance_0_t0.pgm")).unwrap();
    assert_eq!(text, direct);
}

#[test]
fn occupied_out_dir_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "norm-trace");
    let out = tmp.path().join("busy");
    std::fs::create_dir_all(&out).unwrap();
    std::fs::write(out.join("old.txt"), "previous run").unwrap();
    let status = colemit()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    // prior contents untouched
    assert!(out.join("old.txt").exists());
}
