//! Single-excitation amplitude dynamics under the exchange Hamiltonian.
//!
//! With H_exc = -i(Γ/2)·B and B = V·diag(β)·Vᵀ orthogonal, the exact
//! propagator is c(t) = V·diag(e^{-(Γ/2)β t})·Vᵀ·c(0). The global carrier
//! phase is dropped (it enters no observable here) and the global e^{-Γt/2}
//! decay factor is applied in [`norm_trace`] and in the radiation module,
//! not stored in the amplitudes.

use nalgebra::Vector3;
use num_complex::Complex64;

use crate::coupling::{decompose, EigenDecomposition, ExchangeMatrix, WAVE_NUMBER};
use crate::ensemble::AtomPositions;
use crate::error::{Error, Result};

/// Single-excitation coefficient vector at a given time (in τ = 1/Γ).
#[derive(Debug, Clone, PartialEq)]
pub struct Amplitudes {
    pub c: Vec<Complex64>,
    pub t: f64,
}

impl Amplitudes {
    /// Squared norm ‖c‖² (without the global decay factor).
    pub fn norm_sq(&self) -> f64 {
        self.c.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Laser-imprinted initial state: c_q(0) = (1/√N)·exp(i·k_a·x_q) with x_q
/// the atom coordinate along the laser propagation axis.
pub fn initial_amplitudes(positions: &AtomPositions, laser_axis: &Vector3<f64>) -> Amplitudes {
    let n = positions.len();
    let scale = 1.0 / (n as f64).sqrt();
    let c = positions
        .positions
        .iter()
        .map(|p| Complex64::from_polar(scale, WAVE_NUMBER * laser_axis.dot(p)))
        .collect();
    Amplitudes { c, t: 0.0 }
}

/// Spectral propagator: one decomposition serves every requested time.
pub struct Propagator<'a> {
    eig: &'a EigenDecomposition,
    gamma: f64,
    /// Initial amplitudes rotated into the eigenbasis, a = Vᵀ·c(0).
    modal: Vec<Complex64>,
}

impl<'a> Propagator<'a> {
    pub fn new(eig: &'a EigenDecomposition, gamma: f64, c0: &Amplitudes) -> Result<Self> {
        let n = eig.betas.len();
        if c0.c.len() != n {
            return Err(Error::config(format!(
                "amplitude dimension {} does not match matrix dimension {n}",
                c0.c.len()
            )));
        }
        let mut modal = vec![Complex64::new(0.0, 0.0); n];
        for (m, slot) in modal.iter_mut().enumerate() {
            let col = eig.vectors.col(m);
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, cv) in c0.c.iter().enumerate() {
                acc += col[i] * cv;
            }
            *slot = acc;
        }
        Ok(Propagator {
            eig,
            gamma,
            modal,
        })
    }

    /// c(t) = V·diag(e^{-(Γ/2)β t})·a, exact for any t ≥ 0.
    pub fn at(&self, t: f64) -> Amplitudes {
        let n = self.modal.len();
        let mut c = vec![Complex64::new(0.0, 0.0); n];
        for m in 0..n {
            let decay = (-0.5 * self.gamma * self.eig.betas[m] * t).exp();
            let weight = self.modal[m] * decay;
            let col = self.eig.vectors.col(m);
            for (i, slot) in c.iter_mut().enumerate() {
                *slot += weight * col[i];
            }
        }
        Amplitudes { c, t }
    }
}

/// Propagate `c0` to each requested time via the spectral propagator.
/// The decomposition is computed once and reused across all times.
pub fn propagate(
    matrix: &ExchangeMatrix,
    c0: &Amplitudes,
    times: &[f64],
) -> Result<Vec<Amplitudes>> {
    let eig = decompose(matrix)?;
    let prop = Propagator::new(&eig, matrix.gamma, c0)?;
    Ok(times.iter().map(|&t| prop.at(t)).collect())
}

/// Fixed-step fourth-order integrator for i·ċ = H_exc·c, i.e.
/// ċ = -(Γ/2)·B·c. Independent of the spectral path; used for verification.
pub fn propagate_ode_oracle(
    matrix: &ExchangeMatrix,
    c0: &Amplitudes,
    t: f64,
    dt: f64,
) -> Result<Amplitudes> {
    if dt <= 0.0 || dt > 0.01 {
        return Err(Error::config(format!(
            "oracle step must satisfy 0 < dt <= 0.01τ, got {dt}"
        )));
    }
    if t < 0.0 {
        return Err(Error::config("oracle target time must be nonnegative"));
    }
    if t / dt > 1e8 {
        return Err(Error::numerical("oracle step count exceeds 1e8"));
    }
    let n = matrix.dim();
    if c0.c.len() != n {
        return Err(Error::config("amplitude dimension does not match matrix"));
    }

    let steps = (t / dt).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let b = &matrix.couplings;
    let rate = -0.5 * matrix.gamma;

    let deriv = |c: &[Complex64], out: &mut [Complex64]| {
        for slot in out.iter_mut() {
            *slot = Complex64::new(0.0, 0.0);
        }
        // out = rate * B * c, accumulated column-wise for locality.
        for j in 0..n {
            let cj = c[j];
            if cj == Complex64::new(0.0, 0.0) {
                continue;
            }
            let col = b.col(j);
            for i in 0..n {
                out[i] += col[i] * cj;
            }
        }
        for slot in out.iter_mut() {
            *slot *= rate;
        }
    };

    let mut c = c0.c.clone();
    let mut k1 = vec![Complex64::new(0.0, 0.0); n];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut tmp = k1.clone();
    if t > 0.0 {
        for _ in 0..steps {
            deriv(&c, &mut k1);
            for i in 0..n {
                tmp[i] = c[i] + 0.5 * h * k1[i];
            }
            deriv(&tmp, &mut k2);
            for i in 0..n {
                tmp[i] = c[i] + 0.5 * h * k2[i];
            }
            deriv(&tmp, &mut k3);
            for i in 0..n {
                tmp[i] = c[i] + h * k3[i];
            }
            deriv(&tmp, &mut k4);
            for i in 0..n {
                c[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
    }
    Ok(Amplitudes { c, t })
}

/// Wavefunction norm over time: ⟨ψ(t)|ψ(t)⟩ = e^{-Γt}·‖c(t)‖².
#[derive(Debug, Clone)]
pub struct NormTrace {
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
}

pub fn norm_trace(trajectory: &[Amplitudes]) -> NormTrace {
    norm_trace_with_gamma(trajectory, 1.0)
}

pub fn norm_trace_with_gamma(trajectory: &[Amplitudes], gamma: f64) -> NormTrace {
    let times: Vec<f64> = trajectory.iter().map(|a| a.t).collect();
    let norms = trajectory
        .iter()
        .map(|a| (-gamma * a.t).exp() * a.norm_sq())
        .collect();
    NormTrace { times, norms }
}
