//! Persistence: CSV tables, graymap renders, and the metadata document.
//!
//! An experiment's files are written into a staging directory that is
//! renamed into place once complete, so output directories are either
//! whole or absent. The metadata document echoes the resolved
//! configuration and every seed, which is enough to reproduce every number
//! in every table.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::coherence::Axis;
use crate::ensemble::write_positions_csv;
use crate::error::{Error, Result};
use crate::harness::config::{RunConfig, Scenario};
use crate::harness::runner::{ExperimentResult, InstanceRecord, SweepResult};
use crate::radiation::{write_field_csv, write_field_pgm};

pub const SOFTWARE_NAME: &str = "colemit";
pub const SOFTWARE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance and aggregate summary serialized as `metadata.json`.
#[derive(Debug, Serialize)]
struct Metadata<'a> {
    software: &'static str,
    version: &'static str,
    scenario: &'a str,
    config: &'a RunConfig,
    seeds: Vec<u64>,
    partial: bool,
    instances_requested: usize,
    instances_completed: usize,
    failures: &'a [(usize, String)],
    per_instance: Vec<InstanceMeta>,
    total_wall_ms: u128,
    #[serde(skip_serializing_if = "Option::is_none")]
    spectrum_summary: Option<SpectrumSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    extra: Option<serde_json::Value>,
}

#[derive(Debug, Serialize)]
struct InstanceMeta {
    index: usize,
    seed: u64,
    wall_ms: u128,
    resample_count: u64,
    sample_sigma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    closed_form_sigma: Option<f64>,
    saturated_widths: usize,
}

/// Closed-form comparison appended to the run metadata.
#[derive(Debug, Serialize)]
struct SpectrumSummary {
    sample_sigma_mean: f64,
    sample_sigma_std: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    closed_form_sigma: Option<f64>,
}

fn create_file(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

/// Check writability up front: the output parent must exist (or be
/// creatable) and the target must not already hold a previous run.
pub fn prepare_out_dir(out_dir: &Path) -> Result<()> {
    if out_dir.exists() {
        let non_empty = std::fs::read_dir(out_dir)?.next().is_some();
        if non_empty {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::AlreadyExists,
                format!("output directory {} is not empty", out_dir.display()),
            )));
        }
        std::fs::remove_dir(out_dir)?;
    }
    if let Some(parent) = out_dir.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    // Probe writability before any computation starts.
    let staging = staging_path(out_dir);
    std::fs::create_dir_all(&staging)?;
    Ok(())
}

fn staging_path(out_dir: &Path) -> PathBuf {
    let mut name = out_dir
        .file_name()
        .map(|s| s.to_os_string())
        .unwrap_or_else(|| ".".into());
    name.push(".staging");
    out_dir.with_file_name(name)
}

/// Commit the staged tree into its final location.
pub fn commit_out_dir(out_dir: &Path) -> Result<()> {
    std::fs::rename(staging_path(out_dir), out_dir)?;
    Ok(())
}

/// Remove a staging directory after a failed run.
pub fn discard_staging(out_dir: &Path) {
    let _ = std::fs::remove_dir_all(staging_path(out_dir));
}

/// Directory that writers should target while an experiment is staged.
pub fn staged(out_dir: &Path) -> PathBuf {
    staging_path(out_dir)
}

fn format_t(t: f64) -> String {
    if (t - t.round()).abs() < 1e-9 {
        format!("{}", t.round() as i64)
    } else {
        format!("{t}")
    }
}

/// Per-instance norm traces plus the aggregate envelope.
pub fn write_norm_traces(result: &ExperimentResult, dir: &Path) -> Result<()> {
    for rec in &result.records {
        let Some(trace) = &rec.norms else { continue };
        let mut out = create_file(&dir.join(format!("norms_instance_{}.csv", rec.instance_index)))?;
        writeln!(out, "t_over_tau,norm")?;
        for (t, n) in trace.times.iter().zip(&trace.norms) {
            writeln!(out, "{:.6},{:.12e}", t, n)?;
        }
    }
    let traces: Vec<_> = result.records.iter().filter_map(|r| r.norms.as_ref()).collect();
    if let Some(first) = traces.first() {
        let mut out = create_file(&dir.join("norms_aggregate.csv"))?;
        writeln!(out, "t_over_tau,norm_mean,norm_min,norm_max")?;
        for (i, t) in first.times.iter().enumerate() {
            let values: Vec<f64> = traces.iter().map(|tr| tr.norms[i]).collect();
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            writeln!(out, "{:.6},{:.12e},{:.12e},{:.12e}", t, mean, min, max)?;
        }
    }
    Ok(())
}

/// Width tables `t_over_tau,w_mean,w_std,n_instances`, one file per axis,
/// plus the per-instance breakdown.
pub fn write_width_tables(result: &ExperimentResult, dir: &Path) -> Result<()> {
    for axis in [Axis::X, Axis::Y] {
        let mut out = create_file(&dir.join(format!("widths_{axis}.csv")))?;
        writeln!(out, "t_over_tau,w_mean,w_std,n_instances")?;
        for &t in &result.config.times {
            if let Some((mean, std, n, _)) = result.width_stats(t, axis) {
                writeln!(out, "{:.6},{:.12e},{:.12e},{}", t, mean, std, n)?;
            }
        }
    }
    let mut out = create_file(&dir.join("widths_instances.csv"))?;
    writeln!(out, "instance,axis,t_over_tau,w,saturated")?;
    for rec in &result.records {
        for w in &rec.widths {
            writeln!(
                out,
                "{},{},{:.6},{:.12e},{}",
                rec.instance_index, w.axis, w.t, w.w, w.saturated as u8
            )?;
        }
    }
    Ok(())
}

/// Instance-averaged |H| per observation time and axis:
/// `lag,abs_H,log10_abs_H`.
pub fn write_correlation_tables(result: &ExperimentResult, dir: &Path) -> Result<()> {
    for axis in [Axis::X, Axis::Y] {
        for &t in &result.config.times {
            let profiles: Vec<_> = result
                .records
                .iter()
                .flat_map(|r| &r.profiles)
                .filter(|p| p.axis == axis && (p.t - t).abs() < 1e-9)
                .collect();
            let Some(first) = profiles.first() else { continue };
            let mut out = create_file(
                &dir.join(format!("correlation_t{}_{}.csv", format_t(t), axis)),
            )?;
            writeln!(out, "lag,abs_H,log10_abs_H")?;
            for (i, lag) in first.lags.iter().enumerate() {
                let mean = profiles.iter().map(|p| p.values[i].norm()).sum::<f64>()
                    / profiles.len() as f64;
                let log10 = if mean > 0.0 {
                    mean.log10()
                } else {
                    f64::NEG_INFINITY
                };
                writeln!(out, "{:.6},{:.12e},{:.6}", lag, mean, log10)?;
            }
        }
    }
    Ok(())
}

/// Field maps as CSV plus graymap renders.
pub fn write_field_maps(result: &ExperimentResult, dir: &Path) -> Result<()> {
    for rec in &result.records {
        for map in &rec.maps {
            let stem = format!(
                "field_map_instance_{}_t{}",
                rec.instance_index,
                format_t(map.t)
            );
            write_field_csv(map, &dir.join(format!("{stem}.csv")))?;
            write_field_pgm(map, &dir.join(format!("{stem}.pgm")))?;
        }
    }
    Ok(())
}

/// Eigenvalue exports `mode_index,beta,rate_over_gamma`, one per instance.
pub fn write_spectra(result: &ExperimentResult, dir: &Path) -> Result<()> {
    for rec in &result.records {
        let Some(betas) = &rec.betas else { continue };
        let mut out =
            create_file(&dir.join(format!("spectrum_instance_{}.csv", rec.instance_index)))?;
        writeln!(out, "mode_index,beta,rate_over_gamma")?;
        for (i, beta) in betas.iter().enumerate() {
            writeln!(out, "{},{:.12e},{:.12e}", i, beta, 1.0 + beta)?;
        }
    }
    Ok(())
}

pub fn write_positions(result: &ExperimentResult, dir: &Path) -> Result<()> {
    for rec in &result.records {
        if let Some(p) = &rec.positions {
            write_positions_csv(
                p,
                &dir.join(format!("positions_instance_{}.csv", rec.instance_index)),
            )?;
        }
    }
    Ok(())
}

fn instance_meta(rec: &InstanceRecord) -> InstanceMeta {
    InstanceMeta {
        index: rec.instance_index,
        seed: rec.seed,
        wall_ms: rec.wall_ms,
        resample_count: rec.resample_count,
        sample_sigma: rec.sample_sigma,
        closed_form_sigma: rec.closed_form_sigma,
        saturated_widths: rec.widths.iter().filter(|w| w.saturated).count(),
    }
}

pub fn write_metadata(
    result: &ExperimentResult,
    dir: &Path,
    extra: Option<serde_json::Value>,
) -> Result<()> {
    let sigmas: Vec<f64> = result.records.iter().map(|r| r.sample_sigma).collect();
    let spectrum_summary = if sigmas.is_empty() {
        None
    } else {
        let mean = sigmas.iter().sum::<f64>() / sigmas.len() as f64;
        let var =
            sigmas.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / sigmas.len() as f64;
        Some(SpectrumSummary {
            sample_sigma_mean: mean,
            sample_sigma_std: var.sqrt(),
            closed_form_sigma: result.records[0].closed_form_sigma,
        })
    };
    let meta = Metadata {
        software: SOFTWARE_NAME,
        version: SOFTWARE_VERSION,
        scenario: result.config.scenario.name(),
        config: &result.config,
        seeds: (0..result.config.instances)
            .map(|i| result.config.instance_seed(i))
            .collect(),
        partial: result.partial(),
        instances_requested: result.config.instances,
        instances_completed: result.records.len(),
        failures: &result.failures,
        per_instance: result.records.iter().map(instance_meta).collect(),
        total_wall_ms: result.wall_ms,
        spectrum_summary,
        extra,
    };
    let mut out = create_file(&dir.join("metadata.json"))?;
    serde_json::to_writer_pretty(&mut out, &meta)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    writeln!(out)?;
    Ok(())
}

/// Write every file an experiment produces for its scenario.
pub fn write_experiment_files(result: &ExperimentResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    match result.config.scenario {
        Scenario::NormTrace => write_norm_traces(result, dir)?,
        Scenario::FieldEvolution => {
            write_field_maps(result, dir)?;
            write_width_tables(result, dir)?;
        }
        Scenario::Spectrum => write_spectra(result, dir)?,
        _ => {
            write_width_tables(result, dir)?;
            write_correlation_tables(result, dir)?;
        }
    }
    write_positions(result, dir)?;
    write_metadata(result, dir, None)?;
    Ok(())
}

/// Combined sweep table plus per-point experiment directories.
pub fn write_sweep_files(sweep: &SweepResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let t_end = sweep.config.t_max();

    let key = match sweep.config.scenario {
        Scenario::ZobsSensitivity => "z_obs",
        _ => "n_atoms",
    };
    let mut out = create_file(&dir.join("sweep.csv"))?;
    writeln!(
        out,
        "{key},box_l,sigma_h,w0_mean,w0_unsat_mean,w_mean,w_unsat_mean,w_std,n_saturated,n_instances"
    )?;
    for p in &sweep.points {
        let (w_mean, w_std, n, n_sat) = p
            .result
            .width_stats(t_end, Axis::X)
            .unwrap_or((f64::NAN, f64::NAN, 0, 0));
        let w0 = p
            .result
            .width_stats(0.0, Axis::X)
            .map(|(m, _, _, _)| m)
            .unwrap_or(f64::NAN);
        let w0_unsat = p
            .result
            .unsaturated_width_mean(0.0, Axis::X)
            .map(|(m, _)| m)
            .unwrap_or(f64::NAN);
        let w_unsat = p
            .result
            .unsaturated_width_mean(t_end, Axis::X)
            .map(|(m, _)| m)
            .unwrap_or(f64::NAN);
        let sigma = p
            .box_l
            .map(|l| crate::coupling::sigma_h_closed_form(p.n_atoms, l));
        let keyval = match sweep.config.scenario {
            Scenario::ZobsSensitivity => format!("{}", p.z_obs),
            _ => format!("{}", p.n_atoms),
        };
        writeln!(
            out,
            "{},{},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{},{}",
            keyval,
            p.box_l.map(|l| format!("{l:.6}")).unwrap_or_default(),
            sigma.map(|s| format!("{s:.12e}")).unwrap_or_default(),
            w0,
            w0_unsat,
            w_mean,
            w_unsat,
            w_std,
            n_sat,
            n
        )?;
    }
    drop(out);

    if let Some(fit) = &sweep.fom_fit {
        let mut out = create_file(&dir.join("fom_fit.json"))?;
        serde_json::to_writer_pretty(&mut out, fit)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        writeln!(out)?;
    }

    if let Some(time_table) = &sweep.time_table {
        let sub = dir.join("time_table");
        write_experiment_files(time_table, &sub)?;
    }
    for p in &sweep.points {
        let sub = dir.join(&p.label);
        write_experiment_files(&p.result, &sub)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::runner::{run_experiment, sweep as run_sweep};

    fn tiny_config(scenario: &str) -> RunConfig {
        RunConfig::from_toml_str(&format!(
            r#"
[cloud]
lx = 6.0
ly = 6.0
lz = 6.0
n_atoms = 8

[run]
scenario = "{scenario}"
instances = 2
base_seed = 11
times = [0.0, 4.0]
export_positions = true

[grid]
z_obs = 25.0
x_span = 3.0
y_span = 3.0
spacing = 0.5
window = 2.0

[sweep]
n_values = [6, 10]
zobs_values = [25.0, 50.0]
"#
        ))
        .unwrap()
    }

    #[test]
    fn norm_trace_files_written_atomically() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("run");
        prepare_out_dir(&out).unwrap();
        let result = run_experiment(&tiny_config("norm-trace")).unwrap();
        write_experiment_files(&result, &staged(&out)).unwrap();
        assert!(!out.exists());
        commit_out_dir(&out).unwrap();
        assert!(out.join("norms_instance_0.csv").exists());
        assert!(out.join("norms_instance_1.csv").exists());
        assert!(out.join("norms_aggregate.csv").exists());
        assert!(out.join("metadata.json").exists());
        assert!(out.join("positions_instance_0.csv").exists());
        let header = std::fs::read_to_string(out.join("norms_aggregate.csv")).unwrap();
        assert!(header.starts_with("t_over_tau,norm_mean,norm_min,norm_max"));
    }

    #[test]
    fn metadata_contains_seeds_and_version() {
        let tmp = tempfile::tempdir().unwrap();
        let result = run_experiment(&tiny_config("coherence-vs-time")).unwrap();
        write_experiment_files(&result, tmp.path()).unwrap();
        let meta: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(tmp.path().join("metadata.json")).unwrap())
                .unwrap();
        assert_eq!(meta["seeds"], serde_json::json!([11, 12]));
        assert_eq!(meta["software"], "colemit");
        assert_eq!(meta["partial"], false);
        assert_eq!(meta["instances_completed"], 2);
        assert!(meta["config"]["cloud"]["n_atoms"].as_u64() == Some(8));
    }

    #[test]
    fn width_and_correlation_tables_written() {
        let tmp = tempfile::tempdir().unwrap();
        let result = run_experiment(&tiny_config("coherence-vs-time")).unwrap();
        write_experiment_files(&result, tmp.path()).unwrap();
        for name in [
            "widths_x.csv",
            "widths_y.csv",
            "widths_instances.csv",
            "correlation_t0_x.csv",
            "correlation_t4_y.csv",
        ] {
            assert!(tmp.path().join(name).exists(), "{name} missing");
        }
        let text = std::fs::read_to_string(tmp.path().join("widths_x.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t_over_tau,w_mean,w_std,n_instances");
        assert_eq!(lines.count(), 2);
    }

    #[test]
    fn field_maps_written_with_pgm() {
        let tmp = tempfile::tempdir().unwrap();
        let result = run_experiment(&tiny_config("field-evolution")).unwrap();
        write_experiment_files(&result, tmp.path()).unwrap();
        assert!(tmp.path().join("field_map_instance_0_t0.csv").exists());
        assert!(tmp.path().join("field_map_instance_1_t4.pgm").exists());
        let pgm = std::fs::read_to_string(tmp.path().join("field_map_instance_0_t0.pgm")).unwrap();
        assert!(pgm.starts_with("P2\n13 13\n255\n"));
        let csv = std::fs::read_to_string(tmp.path().join("field_map_instance_0_t0.csv")).unwrap();
        assert!(csv.starts_with("x,y,Re_Ex,Im_Ex,Re_Ey,Im_Ey,Re_Ez,Im_Ez"));
    }

    #[test]
    fn spectrum_files_written() {
        let tmp = tempfile::tempdir().unwrap();
        let result = run_experiment(&tiny_config("spectrum")).unwrap();
        write_experiment_files(&result, tmp.path()).unwrap();
        let text = std::fs::read_to_string(tmp.path().join("spectrum_instance_0.csv")).unwrap();
        assert!(text.starts_with("mode_index,beta,rate_over_gamma"));
        assert_eq!(text.lines().count(), 9);
        let meta: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(tmp.path().join("metadata.json")).unwrap())
                .unwrap();
        assert!(meta["spectrum_summary"]["sample_sigma_mean"].as_f64().unwrap() > 0.0);
        assert!(meta["spectrum_summary"]["closed_form_sigma"].as_f64().unwrap() > 0.0);
    }

    #[test]
    fn sweep_files_written() {
        let tmp = tempfile::tempdir().unwrap();
        let result = run_sweep(&tiny_config("coherence-vs-N")).unwrap();
        write_sweep_files(&result, tmp.path()).unwrap();
        let text = std::fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
        assert!(text.starts_with(
            "n_atoms,box_l,sigma_h,w0_mean,w0_unsat_mean,w_mean,w_unsat_mean,w_std,n_saturated,n_instances"
        ));
        assert_eq!(text.lines().count(), 3);
        assert!(tmp.path().join("N6/widths_x.csv").exists());
        assert!(tmp.path().join("N10/metadata.json").exists());
    }

    #[test]
    fn non_empty_out_dir_rejected_before_compute() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("run");
        std::fs::create_dir_all(&out).unwrap();
        std::fs::write(out.join("leftover.txt"), "x").unwrap();
        assert!(prepare_out_dir(&out).is_err());
    }

    #[test]
    fn reruns_are_byte_identical() {
        let config = tiny_config("coherence-vs-time");
        let tmp = tempfile::tempdir().unwrap();
        let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
        write_experiment_files(&run_experiment(&config).unwrap(), &a).unwrap();
        write_experiment_files(&run_experiment(&config).unwrap(), &b).unwrap();
        for name in ["widths_x.csv", "widths_y.csv", "correlation_t0_x.csv"] {
            let fa = std::fs::read(a.join(name)).unwrap();
            let fb = std::fs::read(b.join(name)).unwrap();
            assert_eq!(fa, fb, "{name} differs between reruns");
        }
    }
}
