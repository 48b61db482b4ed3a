//! Instance execution and scenario orchestration.
//!
//! Instances are independent disorder realizations distributed over a
//! bounded worker pool. Every module call is a pure function of immutable
//! inputs and each instance is deterministic in its seed, so results are
//! byte-identical regardless of scheduling or worker count. The dense
//! eigendecomposition runs sequentially inside each instance; parallelism
//! comes from running instances (and grid rows) concurrently.

use std::time::Instant;

use rayon::prelude::*;

use crate::coherence::{
    coherence_width, cross_correlation, Axis, CoherenceWidth, CorrelationProfile,
};
use crate::coupling::{assemble_exchange, decompose, SpectrumStats};
use crate::ensemble::{sample_cloud, AtomPositions, CloudSpec};
use crate::error::{Error, Result};
use crate::evolution::{initial_amplitudes, norm_trace, NormTrace, Propagator};
use crate::harness::config::{RunConfig, Scenario};
use crate::radiation::{field_map, FieldMap};

/// Which pipeline products a scenario needs from each instance.
#[derive(Debug, Clone, Copy)]
pub struct InstanceNeeds {
    pub norms: bool,
    pub widths: bool,
    pub keep_maps: bool,
    pub keep_betas: bool,
    pub keep_positions: bool,
}

impl InstanceNeeds {
    /// Everything: the full per-instance record.
    pub fn full() -> Self {
        InstanceNeeds {
            norms: true,
            widths: true,
            keep_maps: true,
            keep_betas: true,
            keep_positions: true,
        }
    }

    pub fn for_scenario(scenario: Scenario, export_positions: bool) -> Self {
        let mut needs = InstanceNeeds {
            norms: false,
            widths: true,
            keep_maps: false,
            keep_betas: false,
            keep_positions: export_positions,
        };
        match scenario {
            Scenario::NormTrace => {
                needs.norms = true;
                needs.widths = false;
            }
            Scenario::FieldEvolution => {
                needs.keep_maps = true;
            }
            Scenario::Spectrum => {
                needs.keep_betas = true;
                needs.widths = false;
            }
            _ => {}
        }
        needs
    }
}

/// Everything computed for one disorder realization.
#[derive(Debug, Clone)]
pub struct InstanceRecord {
    pub instance_index: usize,
    pub seed: u64,
    pub resample_count: u64,
    /// Spectral summary (betas retained only when requested).
    pub sample_sigma: f64,
    pub closed_form_sigma: Option<f64>,
    pub betas: Option<Vec<f64>>,
    pub norms: Option<NormTrace>,
    /// One width per (time, axis), x first, times in config order.
    pub widths: Vec<CoherenceWidth>,
    /// Correlation profiles matching `widths`.
    pub profiles: Vec<CorrelationProfile>,
    pub maps: Vec<FieldMap>,
    pub positions: Option<AtomPositions>,
    pub wall_ms: u128,
}

impl InstanceRecord {
    pub fn width_at(&self, t: f64, axis: Axis) -> Option<&CoherenceWidth> {
        self.widths
            .iter()
            .find(|w| w.axis == axis && (w.t - t).abs() < 1e-9)
    }
}

/// Run the full pipeline for one instance: sample → assemble → initial
/// amplitudes → propagate → field map per time → correlation → width.
/// Deterministic in `base_seed + instance_index`.
pub fn run_instance(config: &RunConfig, instance_index: usize) -> Result<InstanceRecord> {
    run_instance_with(config, instance_index, InstanceNeeds::full())
}

pub fn run_instance_with(
    config: &RunConfig,
    instance_index: usize,
    needs: InstanceNeeds,
) -> Result<InstanceRecord> {
    let started = Instant::now();
    let spec = CloudSpec {
        seed: config.instance_seed(instance_index),
        ..config.cloud.clone()
    };
    let cloud = sample_cloud(&spec)?;
    let matrix = assemble_exchange(&cloud, &spec.dipole_axis)?;
    let eig = decompose(&matrix)?;
    let mut stats = SpectrumStats::from_decomposition(&eig, matrix.gamma);
    if spec.is_cubic() {
        stats = stats.with_closed_form(spec.n_atoms, spec.lx);
    }
    let c0 = initial_amplitudes(&cloud, &spec.laser_axis);
    let propagator = Propagator::new(&eig, matrix.gamma, &c0)?;

    let norms = if needs.norms {
        let t_max = config.t_max();
        let count = (t_max / config.norm_dt + 1e-9).floor() as usize;
        let trajectory: Vec<_> = (0..=count)
            .map(|k| propagator.at(k as f64 * config.norm_dt))
            .collect();
        Some(norm_trace(&trajectory))
    } else {
        None
    };

    let mut widths = Vec::new();
    let mut profiles = Vec::new();
    let mut maps = Vec::new();
    if needs.widths || needs.keep_maps {
        for &t in &config.times {
            let amps = propagator.at(t);
            let map = field_map(&cloud, &amps, &spec.dipole_axis, &config.grid)?;
            if needs.widths {
                for axis in [Axis::X, Axis::Y] {
                    let profile = cross_correlation(&map, axis, config.window)?;
                    widths.push(coherence_width(&profile)?);
                    profiles.push(profile);
                }
            }
            if needs.keep_maps {
                maps.push(map);
            }
        }
    }

    Ok(InstanceRecord {
        instance_index,
        seed: spec.seed,
        resample_count: cloud.resample_count,
        sample_sigma: stats.sample_sigma,
        closed_form_sigma: stats.closed_form_sigma,
        betas: needs.keep_betas.then(|| stats.betas.clone()),
        norms,
        widths,
        profiles,
        maps,
        positions: needs.keep_positions.then_some(cloud),
        wall_ms: started.elapsed().as_millis(),
    })
}

/// All instances of one configuration, run concurrently.
#[derive(Debug)]
pub struct ExperimentResult {
    pub config: RunConfig,
    /// Completed instances in index order.
    pub records: Vec<InstanceRecord>,
    /// Instances that aborted, with the logged cause.
    pub failures: Vec<(usize, String)>,
    pub wall_ms: u128,
}

impl ExperimentResult {
    pub fn partial(&self) -> bool {
        !self.failures.is_empty()
    }

    /// Mean and population std of per-instance widths at (t, axis),
    /// over all completed instances (saturated widths included: they are
    /// pinned to the window width). Returns (mean, std, n, n_saturated).
    pub fn width_stats(&self, t: f64, axis: Axis) -> Option<(f64, f64, usize, usize)> {
        let ws: Vec<&CoherenceWidth> = self
            .records
            .iter()
            .filter_map(|r| r.width_at(t, axis))
            .collect();
        if ws.is_empty() {
            return None;
        }
        let n = ws.len() as f64;
        let mean = ws.iter().map(|w| w.w).sum::<f64>() / n;
        let var = ws.iter().map(|w| (w.w - mean).powi(2)).sum::<f64>() / n;
        let n_sat = ws.iter().filter(|w| w.saturated).count();
        Some((mean, var.sqrt(), ws.len(), n_sat))
    }

    /// Mean width over unsaturated instances only; None when every
    /// instance saturated.
    pub fn unsaturated_width_mean(&self, t: f64, axis: Axis) -> Option<(f64, usize)> {
        let ws: Vec<f64> = self
            .records
            .iter()
            .filter_map(|r| r.width_at(t, axis))
            .filter(|w| !w.saturated)
            .map(|w| w.w)
            .collect();
        if ws.is_empty() {
            None
        } else {
            Some((ws.iter().sum::<f64>() / ws.len() as f64, ws.len()))
        }
    }
}

/// Execute all instances of `config` concurrently and aggregate.
///
/// A failing instance is recorded and does not disturb the others; the
/// experiment is then partial. If every instance fails, the first error
/// propagates.
pub fn run_experiment(config: &RunConfig) -> Result<ExperimentResult> {
    run_experiment_with(config, InstanceNeeds::for_scenario(config.scenario, config.export_positions))
}

pub fn run_experiment_with(
    config: &RunConfig,
    needs: InstanceNeeds,
) -> Result<ExperimentResult> {
    config.validate()?;
    // One instance per worker; the eigensolver stays sequential inside.
    faer::set_global_parallelism(faer::Par::Seq);
    let started = Instant::now();
    let outcomes: Vec<(usize, Result<InstanceRecord>)> = (0..config.instances)
        .into_par_iter()
        .map(|i| (i, run_instance_with(config, i, needs)))
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (i, outcome) in outcomes {
        match outcome {
            Ok(rec) => records.push(rec),
            Err(e) => {
                log::error!("instance {i} aborted: {e}");
                failures.push((i, e.to_string()));
            }
        }
    }
    if records.is_empty() {
        if let Some((i, msg)) = failures.first() {
            return Err(Error::numerical(format!(
                "all {} instances failed; first failure (instance {i}): {msg}",
                config.instances
            )));
        }
    }
    Ok(ExperimentResult {
        config: config.clone(),
        records,
        failures,
        wall_ms: started.elapsed().as_millis(),
    })
}

/// One point of a parameter sweep.
#[derive(Debug)]
pub struct SweepPoint {
    /// Value of the swept variable (atom number or z_obs).
    pub label: String,
    pub n_atoms: usize,
    pub box_l: Option<f64>,
    pub z_obs: f64,
    pub result: ExperimentResult,
}

/// Outcome of a sweep scenario: one experiment per axis value plus the
/// already-derived table rows; fom-sweep also records the fit.
#[derive(Debug)]
pub struct SweepResult {
    pub config: RunConfig,
    pub points: Vec<SweepPoint>,
    /// Width-versus-time experiment for the asymmetric scenarios.
    pub time_table: Option<ExperimentResult>,
    pub fom_fit: Option<crate::coherence::FomFit>,
    /// Measured uncorrelated width used by the fit.
    pub fom_w_u: Option<f64>,
}

impl SweepResult {
    pub fn partial(&self) -> bool {
        self.points.iter().any(|p| p.result.partial())
            || self
                .time_table
                .as_ref()
                .map(|r| r.partial())
                .unwrap_or(false)
    }
}

fn sub_config_for_n(config: &RunConfig, n_atoms: usize) -> RunConfig {
    let mut sub = config.clone();
    sub.cloud.n_atoms = n_atoms;
    // Sweep points only need the start and end times.
    sub.times = vec![0.0, config.t_max()];
    sub
}

/// Run a sweep scenario. The swept axis comes from the `[sweep]` section:
/// atom numbers for coherence-vs-N / fom-sweep / asym tables, plane
/// distances for zobs-sensitivity.
pub fn sweep(config: &RunConfig) -> Result<SweepResult> {
    config.validate()?;
    if !config.scenario.is_sweep() {
        return Err(Error::config(format!(
            "scenario '{}' is not a sweep; use run",
            config.scenario
        )));
    }
    let needs = InstanceNeeds::for_scenario(config.scenario, config.export_positions);
    let mut points = Vec::new();
    let mut time_table = None;
    let mut fom_fit = None;
    let mut fom_w_u = None;

    match config.scenario {
        Scenario::CoherenceVsN | Scenario::AsymX | Scenario::AsymZ => {
            if matches!(config.scenario, Scenario::AsymX | Scenario::AsymZ) {
                // Width versus time at the configured atom number.
                time_table = Some(run_experiment_with(config, needs)?);
            }
            for &n in &config.sweep.n_values {
                let sub = sub_config_for_n(config, n);
                let result = run_experiment_with(&sub, needs)?;
                points.push(SweepPoint {
                    label: format!("N{n}"),
                    n_atoms: n,
                    box_l: sub.cloud.is_cubic().then_some(sub.cloud.lx),
                    z_obs: sub.grid.z_obs,
                    result,
                });
            }
        }
        Scenario::FomSweep => {
            for &n in &config.sweep.n_values {
                let l = (n as f64 / config.sweep.density).cbrt();
                let mut sub = sub_config_for_n(config, n);
                sub.cloud.lx = l;
                sub.cloud.ly = l;
                sub.cloud.lz = l;
                sub.validate()?;
                let result = run_experiment_with(&sub, needs)?;
                points.push(SweepPoint {
                    label: format!("N{n}"),
                    n_atoms: n,
                    box_l: Some(l),
                    z_obs: sub.grid.z_obs,
                    result,
                });
            }
            let (fit, w_u) = fit_fom_sweep(config, &points)?;
            fom_fit = fit;
            fom_w_u = Some(w_u);
        }
        Scenario::ZobsSensitivity => {
            for &z in &config.sweep.zobs_values {
                let mut sub = config.clone();
                sub.grid.z_obs = z;
                sub.times = vec![0.0, config.t_max()];
                let result = run_experiment_with(&sub, needs)?;
                points.push(SweepPoint {
                    label: format!("zobs{z}"),
                    n_atoms: sub.cloud.n_atoms,
                    box_l: sub.cloud.is_cubic().then_some(sub.cloud.lx),
                    z_obs: z,
                    result,
                });
            }
        }
        _ => unreachable!("non-sweep scenarios handled above"),
    }

    Ok(SweepResult {
        config: config.clone(),
        points,
        time_table,
        fom_fit,
        fom_w_u,
    })
}

/// Fit the figure of merit from sweep points. The uncorrelated width w_u
/// is the measured mean t=0 width of the smallest-N point; saturated
/// widths never enter the fit. Points whose instances all saturated are
/// excluded (and reported by the export layer).
fn fit_fom_sweep(
    config: &RunConfig,
    points: &[SweepPoint],
) -> Result<(Option<crate::coherence::FomFit>, f64)> {
    let smallest = points
        .iter()
        .min_by_key(|p| p.n_atoms)
        .ok_or_else(|| Error::config("fom sweep needs at least one point"))?;
    let (w_u, _) = smallest
        .result
        .unsaturated_width_mean(0.0, Axis::X)
        .ok_or_else(|| {
            Error::Fit("every t=0 width of the smallest-N point saturated".into())
        })?;
    let t_end = config.t_max();
    let mut fit_points = Vec::new();
    for p in points {
        if let (Some(l), Some((w, _))) =
            (p.box_l, p.result.unsaturated_width_mean(t_end, Axis::X))
        {
            fit_points.push(crate::coherence::FomPoint {
                n_atoms: p.n_atoms,
                box_l: l,
                w,
            });
        }
    }
    match crate::coherence::fit_fom(&fit_points, w_u) {
        Ok(fit) => Ok((Some(fit), w_u)),
        Err(Error::Fit(msg)) => {
            log::warn!("figure-of-merit fit skipped: {msg}");
            Ok((None, w_u))
        }
        Err(e) => Err(e),
    }
}
