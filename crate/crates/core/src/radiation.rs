//! Far-field radiated electric field on an observation-plane grid.
//!
//! Each atom radiates the far-field dipole pattern weighted by its
//! amplitude; the observed field is the coherent sum over atoms. The
//! field-unit constant k³|p|/(4πε₀) is set to 1 and the optical carrier is
//! dropped; both cancel in every normalized observable. The ideal M=1
//! imaging of the set-up is realized by reading the plane z = z_obs
//! directly as image coordinates.

use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::WAVE_NUMBER;
use crate::ensemble::AtomPositions;
use crate::error::{Error, Result};
use crate::evolution::Amplitudes;

/// Regular grid on the plane z = z_obs, symmetric about the optical axis.
///
/// Samples along each transverse axis run from -span to +span in steps of
/// `spacing` (the effective span is rounded to a whole number of steps so
/// that 0 is always a sample).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationGrid {
    /// Plane distance from the cloud center (λ).
    pub z_obs: f64,
    /// Half-width of the computed grid along x (λ).
    pub x_span: f64,
    /// Half-width of the computed grid along y (λ).
    pub y_span: f64,
    /// Grid step (λ).
    pub spacing: f64,
}

impl ObservationGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0) {
            return Err(Error::config("grid spacing must be positive"));
        }
        if !(self.x_span > 0.0 && self.y_span > 0.0) {
            return Err(Error::config("grid spans must be positive"));
        }
        if !(self.z_obs > 0.0) {
            return Err(Error::config("observation plane must be at positive z"));
        }
        Ok(())
    }

    /// The plane must sit outside the cloud, far enough for the per-dipole
    /// far-field form (z_obs - Lz/2 ≥ 10λ).
    pub fn validate_against_box(&self, lz: f64) -> Result<()> {
        self.validate()?;
        if self.z_obs - lz / 2.0 < 10.0 {
            return Err(Error::config(format!(
                "observation plane at z={} is closer than 10λ to the cloud edge (Lz={})",
                self.z_obs, lz
            )));
        }
        Ok(())
    }

    fn axis_samples(span: f64, spacing: f64) -> Vec<f64> {
        let m = (span / spacing).round() as i64;
        (-m..=m).map(|i| i as f64 * spacing).collect()
    }

    pub fn xs(&self) -> Vec<f64> {
        Self::axis_samples(self.x_span, self.spacing)
    }

    pub fn ys(&self) -> Vec<f64> {
        Self::axis_samples(self.y_span, self.spacing)
    }
}

impl Default for ObservationGrid {
    fn default() -> Self {
        ObservationGrid {
            z_obs: 100.0,
            x_span: 20.0,
            y_span: 20.0,
            spacing: 0.25,
        }
    }
}

/// Complex 3-vector field sampled on the observation grid at one time.
/// Storage is row-major in y: index = iy·nx + ix.
#[derive(Debug, Clone)]
pub struct FieldMap {
    pub grid: ObservationGrid,
    /// Observation time (τ).
    pub t: f64,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub field: Vec<Vector3<Complex64>>,
}

impl FieldMap {
    pub fn nx(&self) -> usize {
        self.xs.len()
    }

    pub fn ny(&self) -> usize {
        self.ys.len()
    }

    pub fn at(&self, ix: usize, iy: usize) -> &Vector3<Complex64> {
        &self.field[iy * self.nx() + ix]
    }
}

/// Far-field contribution of a single atom at one observation point,
/// weighted by an arbitrary complex amplitude. The polarization structure
/// is the transverse projection (r̂ × p) × r̂ = p - (p·r̂)r̂.
fn weighted_dipole_field(
    atom_pos: &Vector3<f64>,
    weight: Complex64,
    dipole_axis: &Vector3<f64>,
    obs_point: &Vector3<f64>,
) -> Vector3<Complex64> {
    let d = obs_point - atom_pos;
    let r = d.norm();
    let kr = WAVE_NUMBER * r;
    let rhat = d / r;
    let transverse = dipole_axis - rhat * dipole_axis.dot(&rhat);
    let f = Complex64::from_polar(1.0 / kr, kr) * weight;
    Vector3::new(f * transverse.x, f * transverse.y, f * transverse.z)
}

/// Far-field of the dipole in state q at an observation point:
/// E_q = (e^{i k r}/(k r))·[(r̂×p̂)×r̂]·e^{-Γt/2}·c_q, with C₀ = 1.
pub fn dipole_field(
    atom_pos: &Vector3<f64>,
    c_q: Complex64,
    dipole_axis: &Vector3<f64>,
    obs_point: &Vector3<f64>,
    t: f64,
) -> Result<Vector3<Complex64>> {
    if (obs_point - atom_pos).norm_squared() == 0.0 {
        return Err(Error::config(
            "observation point coincides with the radiating atom",
        ));
    }
    let weight = c_q * (-0.5 * t).exp();
    Ok(weighted_dipole_field(atom_pos, weight, dipole_axis, obs_point))
}

/// Coherent sum of every atom's far field over the full grid.
///
/// Grid points are independent; rows are evaluated in parallel and the
/// output ordering is fixed by the grid indexing regardless of schedule.
pub fn field_map(
    positions: &AtomPositions,
    amplitudes: &Amplitudes,
    dipole_axis: &Vector3<f64>,
    grid: &ObservationGrid,
) -> Result<FieldMap> {
    grid.validate()?;
    let n = positions.len();
    if amplitudes.c.len() != n {
        return Err(Error::config(format!(
            "amplitude dimension {} does not match {} atoms",
            amplitudes.c.len(),
            n
        )));
    }
    let max_z = positions
        .positions
        .iter()
        .map(|p| p.z)
        .fold(f64::NEG_INFINITY, f64::max);
    if grid.z_obs <= max_z {
        return Err(Error::config(format!(
            "observation plane z={} lies inside the cloud (max atom z = {max_z})",
            grid.z_obs
        )));
    }

    let xs = grid.xs();
    let ys = grid.ys();
    let nx = xs.len();
    let decay = (-0.5 * amplitudes.t).exp();
    let weights: Vec<Complex64> = amplitudes.c.iter().map(|c| c * decay).collect();

    let mut field = vec![Vector3::new(
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
    ); nx * ys.len()];

    field
        .par_chunks_mut(nx)
        .zip(ys.par_iter())
        .for_each(|(row, &y)| {
            for (slot, &x) in row.iter_mut().zip(&xs) {
                let obs = Vector3::new(x, y, grid.z_obs);
                let mut acc = Vector3::new(
                    Complex64::new(0.0, 0.0),
                    Complex64::new(0.0, 0.0),
                    Complex64::new(0.0, 0.0),
                );
                for (p, &w) in positions.positions.iter().zip(&weights) {
                    acc += weighted_dipole_field(p, w, dipole_axis, &obs);
                }
                *slot = acc;
            }
        });

    Ok(FieldMap {
        grid: grid.clone(),
        t: amplitudes.t,
        xs,
        ys,
        field,
    })
}

/// CSV export: `x,y,Re_Ex,Im_Ex,Re_Ey,Im_Ey,Re_Ez,Im_Ez`, x fastest.
pub fn write_field_csv(map: &FieldMap, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "x,y,Re_Ex,Im_Ex,Re_Ey,Im_Ey,Re_Ez,Im_Ez")?;
    for (iy, &y) in map.ys.iter().enumerate() {
        for (ix, &x) in map.xs.iter().enumerate() {
            let e = map.at(ix, iy);
            writeln!(
                out,
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                x, y, e.x.re, e.x.im, e.y.re, e.y.im, e.z.re, e.z.im
            )?;
        }
    }
    Ok(())
}

/// Field magnitude |E| at each grid point (Euclidean norm over the three
/// complex components).
pub fn magnitude(map: &FieldMap) -> Vec<f64> {
    map.field
        .iter()
        .map(|e| (e.x.norm_sqr() + e.y.norm_sqr() + e.z.norm_sqr()).sqrt())
        .collect()
}

/// Render |E| as a plain (ASCII) portable graymap, 0..255 scaled to the
/// map maximum. The top image row is the largest y.
pub fn write_field_pgm(map: &FieldMap, path: &Path) -> Result<()> {
    let mag = magnitude(map);
    let max = mag.iter().cloned().fold(0.0f64, f64::max);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "P2")?;
    writeln!(out, "{} {}", map.nx(), map.ny())?;
    writeln!(out, "255")?;
    for iy in (0..map.ny()).rev() {
        let row: Vec<String> = (0..map.nx())
            .map(|ix| {
                let v = if max > 0.0 {
                    (mag[iy * map.nx() + ix] / max * 255.0).round() as u32
                } else {
                    0
                };
                v.min(255).to_string()
            })
            .collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    Ok(())
}
