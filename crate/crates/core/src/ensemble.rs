//! Random disordered atomic clouds in a rectangular volume.
//!
//! All lengths are expressed in units of the transition wavelength λ, so the
//! resonant wave number is `2π` throughout the crate. Positions are sampled
//! uniformly inside a box centered at the origin.

use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pairs closer than this (in λ) are resampled to keep the pairwise coupling
/// kernel finite in floating point. The analytic kernel limit at zero
/// separation is finite, but the direct expression overflows.
pub const MIN_PAIR_SEPARATION: f64 = 1e-6;

/// Geometry and reproducibility parameters of a disordered cloud.
///
/// The dipole orientation is set by the excitation-laser polarization and
/// must be transverse to the propagation axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudSpec {
    /// Box edge along x (λ).
    pub lx: f64,
    /// Box edge along y (λ).
    pub ly: f64,
    /// Box edge along z (λ).
    pub lz: f64,
    /// Number of atoms.
    pub n_atoms: usize,
    /// RNG seed for position sampling.
    pub seed: u64,
    /// Dipole orientation (unit vector), default ŷ.
    pub dipole_axis: Vector3<f64>,
    /// Laser propagation direction (unit vector), default x̂.
    pub laser_axis: Vector3<f64>,
}

impl CloudSpec {
    /// A cloud with the default axes: laser along x̂, dipoles along ŷ.
    pub fn new(lx: f64, ly: f64, lz: f64, n_atoms: usize, seed: u64) -> Self {
        CloudSpec {
            lx,
            ly,
            lz,
            n_atoms,
            seed,
            dipole_axis: Vector3::y(),
            laser_axis: Vector3::x(),
        }
    }

    /// A cubic cloud of edge `l`.
    pub fn cubic(l: f64, n_atoms: usize, seed: u64) -> Self {
        Self::new(l, l, l, n_atoms, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lx > 0.0 && self.ly > 0.0 && self.lz > 0.0) {
            return Err(Error::config(format!(
                "box edges must be positive, got {} x {} x {}",
                self.lx, self.ly, self.lz
            )));
        }
        if self.n_atoms == 0 {
            return Err(Error::config("atom count must be at least 1"));
        }
        for (name, axis) in [("dipole_axis", &self.dipole_axis), ("laser_axis", &self.laser_axis)] {
            if (axis.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::config(format!("{name} must be a unit vector")));
            }
        }
        // The laser is a transverse wave: its polarization (which sets the
        // dipoles) cannot have a component along the propagation axis.
        if self.dipole_axis.dot(&self.laser_axis).abs() > 1e-9 {
            return Err(Error::config(
                "dipole_axis must be perpendicular to laser_axis (transverse polarization)",
            ));
        }
        Ok(())
    }

    /// Box volume in λ³.
    pub fn volume(&self) -> f64 {
        self.lx * self.ly * self.lz
    }

    pub fn is_cubic(&self) -> bool {
        self.lx == self.ly && self.ly == self.lz
    }
}

/// Sampled atom positions, in λ, box centered on the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomPositions {
    pub positions: Vec<Vector3<f64>>,
    /// Number of positions that were redrawn by the minimum-separation guard.
    pub resample_count: u64,
}

impl AtomPositions {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Draw `spec.n_atoms` positions, each coordinate uniform over its box
/// interval. The draw is deterministic in the seed: the generator is
/// ChaCha8 seeded with `spec.seed`, and coordinates are drawn in x, y, z
/// order per atom.
///
/// Atoms landing within [`MIN_PAIR_SEPARATION`] of an earlier atom are
/// redrawn from the same stream; every redraw is logged.
pub fn sample_cloud(spec: &CloudSpec) -> Result<AtomPositions> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dist_x = Uniform::new_inclusive(-spec.lx / 2.0, spec.lx / 2.0);
    let dist_y = Uniform::new_inclusive(-spec.ly / 2.0, spec.ly / 2.0);
    let dist_z = Uniform::new_inclusive(-spec.lz / 2.0, spec.lz / 2.0);

    let mut positions: Vec<Vector3<f64>> = Vec::with_capacity(spec.n_atoms);
    let mut resample_count = 0u64;
    let min_sep_sq = MIN_PAIR_SEPARATION * MIN_PAIR_SEPARATION;
    while positions.len() < spec.n_atoms {
        let candidate = Vector3::new(
            dist_x.sample(&mut rng),
            dist_y.sample(&mut rng),
            dist_z.sample(&mut rng),
        );
        let too_close = positions
            .iter()
            .any(|p| (p - candidate).norm_squared() < min_sep_sq);
        if too_close {
            resample_count += 1;
            log::warn!(
                "resampling atom {}: candidate within {} λ of an existing atom (seed {})",
                positions.len(),
                MIN_PAIR_SEPARATION,
                spec.seed
            );
            continue;
        }
        positions.push(candidate);
    }
    Ok(AtomPositions {
        positions,
        resample_count,
    })
}

/// Atomic density N / (Lx·Ly·Lz) in atoms per λ³.
pub fn density(spec: &CloudSpec) -> Result<f64> {
    spec.validate()?;
    Ok(spec.n_atoms as f64 / spec.volume())
}

/// Resonant optical depth n·σ·Lx with σ = λ²/2π, i.e. n·Lx/2π in λ units.
pub fn optical_depth(spec: &CloudSpec) -> Result<f64> {
    Ok(density(spec)? * spec.lx / (2.0 * std::f64::consts::PI))
}

/// Write positions as CSV with header `atom_index,x,y,z` (λ units).
pub fn write_positions_csv(positions: &AtomPositions, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "atom_index,x,y,z")?;
    for (i, p) in positions.positions.iter().enumerate() {
        writeln!(out, "{},{:.12e},{:.12e},{:.12e}", i, p.x, p.y, p.z)?;
    }
    Ok(())
}
