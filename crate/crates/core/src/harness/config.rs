//! Run configuration: a strict TOML file with `section.key = value`
//! entries. Unknown keys are rejected so sweep tooling cannot silently
//! misspell a parameter.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::ensemble::CloudSpec;
use crate::error::{Error, Result};
use crate::radiation::ObservationGrid;

/// The simulation campaigns exposed by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    /// Wavefunction norm versus time, per instance plus aggregate.
    #[serde(rename = "norm-trace")]
    NormTrace,
    /// Field maps at each observation time, exported as CSV and graymap.
    #[serde(rename = "field-evolution")]
    FieldEvolution,
    /// Coherence width versus observation time.
    #[serde(rename = "coherence-vs-time")]
    CoherenceVsTime,
    /// Coherence width versus atom number at fixed box.
    #[serde(rename = "coherence-vs-N")]
    CoherenceVsN,
    /// Fixed-density sweep over cubic boxes plus the figure-of-merit fit.
    #[serde(rename = "fom-sweep")]
    FomSweep,
    /// Width-versus-time and width-versus-N for a cloud elongated along x.
    #[serde(rename = "asym-x")]
    AsymX,
    /// Same tables for a cloud elongated along z.
    #[serde(rename = "asym-z")]
    AsymZ,
    /// Collective decay-rate spectrum export.
    #[serde(rename = "spectrum")]
    Spectrum,
    /// Coherence widths as a function of the observation-plane distance.
    #[serde(rename = "zobs-sensitivity")]
    ZobsSensitivity,
}

impl Scenario {
    pub const ALL: [Scenario; 9] = [
        Scenario::NormTrace,
        Scenario::FieldEvolution,
        Scenario::CoherenceVsTime,
        Scenario::CoherenceVsN,
        Scenario::FomSweep,
        Scenario::AsymX,
        Scenario::AsymZ,
        Scenario::Spectrum,
        Scenario::ZobsSensitivity,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::NormTrace => "norm-trace",
            Scenario::FieldEvolution => "field-evolution",
            Scenario::CoherenceVsTime => "coherence-vs-time",
            Scenario::CoherenceVsN => "coherence-vs-N",
            Scenario::FomSweep => "fom-sweep",
            Scenario::AsymX => "asym-x",
            Scenario::AsymZ => "asym-z",
            Scenario::Spectrum => "spectrum",
            Scenario::ZobsSensitivity => "zobs-sensitivity",
        }
    }

    /// Sweep scenarios iterate a parameter axis and emit a combined table.
    pub fn is_sweep(&self) -> bool {
        matches!(
            self,
            Scenario::CoherenceVsN
                | Scenario::FomSweep
                | Scenario::AsymX
                | Scenario::AsymZ
                | Scenario::ZobsSensitivity
        )
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .iter()
            .find(|sc| sc.name() == s)
            .copied()
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown scenario '{s}'; expected one of: {}",
                    Scenario::ALL.map(|sc| sc.name()).join(", ")
                ))
            })
    }
}

/// Parameter axes for the sweep scenarios.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Atom numbers for coherence-vs-N, fom-sweep and the asymmetric
    /// width-versus-N tables.
    #[serde(default = "default_n_values")]
    pub n_values: Vec<usize>,
    /// Observation-plane distances for zobs-sensitivity.
    #[serde(default = "default_zobs_values")]
    pub zobs_values: Vec<f64>,
    /// Fixed density (atoms/λ³) defining the cubic boxes of fom-sweep.
    #[serde(default = "default_density")]
    pub density: f64,
}

fn default_n_values() -> Vec<usize> {
    vec![50, 100, 200, 400, 800, 1500, 2500, 4000]
}

fn default_zobs_values() -> Vec<f64> {
    vec![50.0, 100.0, 200.0, 400.0]
}

fn default_density() -> f64 {
    // 1500 atoms in a 40λ cube, the reference dilute density.
    1500.0 / (40.0 * 40.0 * 40.0)
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            n_values: default_n_values(),
            zobs_values: default_zobs_values(),
            density: default_density(),
        }
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub cloud: CloudSpec,
    pub scenario: Scenario,
    /// Independent disorder realizations; instance i uses seed
    /// base_seed + i.
    pub instances: usize,
    pub base_seed: u64,
    /// Observation times (τ), ascending, starting at 0.
    pub times: Vec<f64>,
    /// Step of the norm-trace time grid (τ).
    pub norm_dt: f64,
    pub grid: ObservationGrid,
    /// Analysis-window half-width for correlations (λ).
    pub window: f64,
    /// Output directory; may also be supplied on the command line.
    pub out_dir: Option<PathBuf>,
    pub export_positions: bool,
    pub sweep: SweepSection,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.cloud.validate()?;
        self.grid.validate_against_box(self.cloud.lz)?;
        if self.instances == 0 {
            return Err(Error::config("instances must be at least 1"));
        }
        if self.times.is_empty() || self.times[0] != 0.0 {
            return Err(Error::config("times must start at 0"));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("times must be strictly ascending"));
        }
        if !(self.norm_dt > 0.0) {
            return Err(Error::config("norm_dt must be positive"));
        }
        if !(self.window > 0.0) {
            return Err(Error::config("analysis window must be positive"));
        }
        if self.window > self.grid.x_span + 1e-9 || self.window > self.grid.y_span + 1e-9 {
            return Err(Error::config(
                "analysis window cannot exceed the computed grid span",
            ));
        }
        if self.scenario == Scenario::FomSweep && !(self.sweep.density > 0.0) {
            return Err(Error::config("sweep density must be positive"));
        }
        if self.scenario.is_sweep() && self.scenario != Scenario::ZobsSensitivity {
            if self.sweep.n_values.is_empty() {
                return Err(Error::config("sweep n_values must not be empty"));
            }
            if self.sweep.n_values.iter().any(|&n| n == 0) {
                return Err(Error::config("sweep n_values must be positive"));
            }
        }
        if self.scenario == Scenario::ZobsSensitivity {
            if self.sweep.zobs_values.is_empty() {
                return Err(Error::config("sweep zobs_values must not be empty"));
            }
            for &z in &self.sweep.zobs_values {
                let probe = ObservationGrid {
                    z_obs: z,
                    ..self.grid.clone()
                };
                probe.validate_against_box(self.cloud.lz)?;
            }
        }
        Ok(())
    }

    /// Largest observation time (τ).
    pub fn t_max(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Seed for one instance.
    pub fn instance_seed(&self, instance_index: usize) -> u64 {
        self.base_seed.wrapping_add(instance_index as u64)
    }

    /// Load from a TOML file.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<RunConfig> {
        let raw: ConfigFile =
            toml::from_str(text).map_err(|e| Error::config(format!("config parse: {e}")))?;
        raw.resolve()
    }
}

fn default_axis_dipole() -> [f64; 3] {
    [0.0, 1.0, 0.0]
}

fn default_axis_laser() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CloudSection {
    lx: f64,
    ly: f64,
    lz: f64,
    n_atoms: usize,
    #[serde(default = "default_axis_dipole")]
    dipole_axis: [f64; 3],
    #[serde(default = "default_axis_laser")]
    laser_axis: [f64; 3],
}

fn default_instances() -> usize {
    20
}

fn default_base_seed() -> u64 {
    1
}

fn default_times() -> Vec<f64> {
    vec![0.0, 10.0, 20.0, 30.0, 40.0]
}

fn default_norm_dt() -> f64 {
    0.5
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    scenario: String,
    #[serde(default = "default_instances")]
    instances: usize,
    #[serde(default = "default_base_seed")]
    base_seed: u64,
    #[serde(default = "default_times")]
    times: Vec<f64>,
    #[serde(default = "default_norm_dt")]
    norm_dt: f64,
    #[serde(default)]
    out_dir: Option<PathBuf>,
    #[serde(default)]
    export_positions: bool,
}

fn default_window() -> f64 {
    10.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    #[serde(default = "default_z_obs")]
    z_obs: f64,
    #[serde(default = "default_span")]
    x_span: f64,
    #[serde(default = "default_span")]
    y_span: f64,
    #[serde(default = "default_spacing")]
    spacing: f64,
    #[serde(default = "default_window")]
    window: f64,
}

fn default_z_obs() -> f64 {
    100.0
}

fn default_span() -> f64 {
    20.0
}

fn default_spacing() -> f64 {
    0.25
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            z_obs: default_z_obs(),
            x_span: default_span(),
            y_span: default_span(),
            spacing: default_spacing(),
            window: default_window(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    cloud: CloudSection,
    run: RunSection,
    #[serde(default)]
    grid: GridSection,
    #[serde(default)]
    sweep: SweepSection,
}

impl ConfigFile {
    fn resolve(self) -> Result<RunConfig> {
        let scenario = Scenario::from_str(&self.run.scenario)?;
        let cloud = CloudSpec {
            lx: self.cloud.lx,
            ly: self.cloud.ly,
            lz: self.cloud.lz,
            n_atoms: self.cloud.n_atoms,
            seed: self.run.base_seed,
            dipole_axis: Vector3::from(self.cloud.dipole_axis),
            laser_axis: Vector3::from(self.cloud.laser_axis),
        };
        let config = RunConfig {
            cloud,
            scenario,
            instances: self.run.instances,
            base_seed: self.run.base_seed,
            times: self.run.times,
            norm_dt: self.run.norm_dt,
            grid: ObservationGrid {
                z_obs: self.grid.z_obs,
                x_span: self.grid.x_span,
                y_span: self.grid.y_span,
                spacing: self.grid.spacing,
            },
            window: self.grid.window,
            out_dir: self.run.out_dir,
            export_positions: self.run.export_positions,
            sweep: self.sweep,
        };
        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[cloud]
lx = 40.0
ly = 40.0
lz = 40.0
n_atoms = 1500

[run]
scenario = "coherence-vs-time"
"#;

    #[test]
    fn minimal_config_resolves_with_defaults() {
        let cfg = RunConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.instances, 20);
        assert_eq!(cfg.base_seed, 1);
        assert_eq!(cfg.times, vec![0.0, 10.0, 20.0, 30.0, 40.0]);
        assert_eq!(cfg.grid.z_obs, 100.0);
        assert_eq!(cfg.grid.spacing, 0.25);
        assert_eq!(cfg.window, 10.0);
        assert_eq!(cfg.cloud.dipole_axis, Vector3::y());
        assert_eq!(cfg.cloud.laser_axis, Vector3::x());
        assert_eq!(cfg.scenario, Scenario::CoherenceVsTime);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = format!("{MINIMAL}\n[grid]\nzobs = 50.0\n");
        let err = RunConfig::from_toml_str(&bad).unwrap_err();
        assert!(err.to_string().contains("config parse"));
    }

    #[test]
    fn unknown_scenario_rejected() {
        let bad = MINIMAL.replace("coherence-vs-time", "coherence");
        assert!(RunConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn times_must_start_at_zero_and_ascend() {
        let bad = format!(
            "{}\ntimes = [10.0, 20.0]\n",
            MINIMAL.trim_end()
        );
        assert!(RunConfig::from_toml_str(&bad).is_err());
        let bad = format!(
            "{}\ntimes = [0.0, 20.0, 10.0]\n",
            MINIMAL.trim_end()
        );
        assert!(RunConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn plane_too_close_rejected() {
        let bad = format!("{MINIMAL}\n[grid]\nz_obs = 25.0\n");
        assert!(RunConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn window_cannot_exceed_span() {
        let bad = format!("{MINIMAL}\n[grid]\nwindow = 30.0\n");
        assert!(RunConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn scenario_parsing_round_trips() {
        for sc in Scenario::ALL {
            assert_eq!(Scenario::from_str(sc.name()).unwrap(), sc);
        }
        assert!(Scenario::from_str("banana").is_err());
    }

    #[test]
    fn instance_seeds_are_offsets() {
        let cfg = RunConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.instance_seed(0), 1);
        assert_eq!(cfg.instance_seed(7), 8);
    }
}
