//! Pairwise exchange couplings and the collective decay spectrum.
//!
//! The atom-only exchange Hamiltonian of the single-excitation problem
//! factors exactly as `H_exc = -i(Γ/2)·B` with `B` real symmetric and zero
//! on the diagonal, because the pairwise coupling bracket is real. All
//! spectral work therefore reduces to an orthogonal eigendecomposition of
//! `B`: eigenvalues β_n give collective decay rates Γ(1+β_n), and the
//! propagator is diagonal with purely real decay exponents.

use faer::{Mat, Side};
use nalgebra::Vector3;
use rayon::prelude::*;

use crate::ensemble::AtomPositions;
use crate::error::{Error, Result};

/// Resonant wave number k_a = 2π/λ in λ units.
pub const WAVE_NUMBER: f64 = 2.0 * std::f64::consts::PI;

/// Maximum-norm residual allowed for the eigendecomposition,
/// relative to the largest matrix entry.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-8;

/// Dimensionless pairwise coupling b_jk, defined by F_jk = -i(Γ/2)·b_jk.
///
/// `separation` is r_j - r_k in λ; `dipole_axis` must be a unit vector.
/// b depends only on the distance and on the angle between the dipole and
/// the separation, so it is symmetric under exchanging the endpoints.
/// In the small-separation limit b → 1 (the Dicke limit), independent of
/// the angle.
pub fn coupling_kernel(separation: &Vector3<f64>, dipole_axis: &Vector3<f64>) -> Result<f64> {
    let r = separation.norm();
    if r <= 0.0 {
        return Err(Error::config(
            "coupling kernel is undefined at zero separation",
        ));
    }
    let kr = WAVE_NUMBER * r;
    let cos_theta = dipole_axis.dot(separation) / r;
    let cos2 = cos_theta * cos_theta;
    let four_pi = 4.0 * std::f64::consts::PI;

    // sin(kr)/kr and cos(kr)/(kr)^2 - sin(kr)/(kr)^3: below kr ~ 1e-2 the
    // second combination loses ~4 digits to cancellation, so switch to its
    // series there.
    let (sinc, spherical) = if kr < 1e-2 {
        let kr2 = kr * kr;
        (
            1.0 - kr2 / 6.0 + kr2 * kr2 / 120.0,
            -1.0 / 3.0 + kr2 / 30.0 - kr2 * kr2 / 840.0,
        )
    } else {
        let (s, c) = kr.sin_cos();
        (s / kr, c / (kr * kr) - s / (kr * kr * kr))
    };

    let bracket = four_pi * (1.0 - cos2) * sinc + four_pi * (1.0 - 3.0 * cos2) * spherical;
    Ok(3.0 / (8.0 * std::f64::consts::PI) * bracket)
}

/// The real symmetric factor of the exchange Hamiltonian.
#[derive(Debug, Clone)]
pub struct ExchangeMatrix {
    /// N×N real symmetric matrix with zero diagonal; H_exc = -i(Γ/2)·B.
    pub couplings: Mat<f64>,
    /// Single-atom decay rate (the inverse time unit); fixed to 1.
    pub gamma: f64,
}

impl ExchangeMatrix {
    pub fn dim(&self) -> usize {
        self.couplings.nrows()
    }

    /// Largest entry magnitude, used to scale the residual check.
    pub fn max_abs(&self) -> f64 {
        let n = self.dim();
        let mut m = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                m = m.max(self.couplings[(i, j)].abs());
            }
        }
        m
    }
}

/// Assemble B[j][k] = b(r_j - r_k) for j ≠ k, zero on the diagonal.
///
/// The strict upper triangle is computed (rows in parallel) and mirrored,
/// so B = Bᵀ holds exactly. Coincident atoms are reported as an error
/// naming the pair.
pub fn assemble_exchange(
    positions: &AtomPositions,
    dipole_axis: &Vector3<f64>,
) -> Result<ExchangeMatrix> {
    let n = positions.len();
    if n == 0 {
        return Err(Error::config("cannot assemble couplings for zero atoms"));
    }
    let pos = &positions.positions;

    // Row-major upper triangle, one row slice per atom.
    let mut entries = vec![0.0f64; n * n];
    let results: Vec<Result<()>> = entries
        .par_chunks_mut(n)
        .enumerate()
        .map(|(j, row)| {
            for k in (j + 1)..n {
                let sep = pos[j] - pos[k];
                row[k] = coupling_kernel(&sep, dipole_axis).map_err(|_| {
                    Error::config(format!("atoms {j} and {k} are coincident"))
                })?;
            }
            Ok(())
        })
        .collect();
    for r in results {
        r?;
    }
    for j in 0..n {
        for k in (j + 1)..n {
            entries[k * n + j] = entries[j * n + k];
        }
    }

    let couplings = Mat::from_fn(n, n, |i, j| entries[i * n + j]);
    Ok(ExchangeMatrix {
        couplings,
        gamma: 1.0,
    })
}

/// Orthogonal eigendecomposition B = V·diag(β)·Vᵀ, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Eigenvalues of B, sorted ascending.
    pub betas: Vec<f64>,
    /// Orthogonal eigenvector matrix; column n pairs with betas[n].
    pub vectors: Mat<f64>,
}

/// Decompose B and verify the residual ‖BV − VΛ‖_max ≤ tol·‖B‖_max.
pub fn decompose(matrix: &ExchangeMatrix) -> Result<EigenDecomposition> {
    let n = matrix.dim();
    let evd = matrix
        .couplings
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::numerical(format!("eigensolver failed: {e:?} (dim {n})")))?;
    let s = evd.S();
    let u = evd.U();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].partial_cmp(&s[b]).unwrap().then(a.cmp(&b)));
    let betas: Vec<f64> = order.iter().map(|&i| s[i]).collect();
    let vectors = Mat::from_fn(n, n, |i, j| u[(i, order[j])]);

    // Residual check guards against solver drift at large dimension.
    let product = &matrix.couplings * &vectors;
    let mut residual = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            residual = residual.max((product[(i, j)] - vectors[(i, j)] * betas[j]).abs());
        }
    }
    let scale = matrix.max_abs().max(f64::MIN_POSITIVE);
    if residual > EIGEN_RESIDUAL_TOL * scale {
        return Err(Error::numerical(format!(
            "eigendecomposition residual {residual:.3e} exceeds tolerance at dim {n}"
        )));
    }
    Ok(EigenDecomposition { betas, vectors })
}

/// Spectral statistics of the collective decay problem.
#[derive(Debug, Clone)]
pub struct SpectrumStats {
    /// Eigenvalues of B, ascending.
    pub betas: Vec<f64>,
    /// Collective decay rates Γ(1+β_n), same order as `betas`.
    pub rates: Vec<f64>,
    /// Population standard deviation of {β_n} (eigenvalue spread of the
    /// exchange Hamiltonian in units of Γ/2).
    pub sample_sigma: f64,
    /// Closed-form spectral width for a cubic box, when applicable.
    pub closed_form_sigma: Option<f64>,
}

impl SpectrumStats {
    /// Summarize an existing decomposition (Γ from the parent matrix).
    pub fn from_decomposition(eig: &EigenDecomposition, gamma: f64) -> Self {
        let n = eig.betas.len() as f64;
        let mean: f64 = eig.betas.iter().sum::<f64>() / n;
        let var: f64 = eig.betas.iter().map(|b| (b - mean) * (b - mean)).sum::<f64>() / n;
        SpectrumStats {
            betas: eig.betas.clone(),
            rates: eig.betas.iter().map(|b| gamma * (1.0 + b)).collect(),
            sample_sigma: var.sqrt(),
            closed_form_sigma: None,
        }
    }

    pub fn with_closed_form(mut self, n_atoms: usize, box_l: f64) -> Self {
        self.closed_form_sigma = Some(sigma_h_closed_form(n_atoms, box_l));
        self
    }
}

/// Eigendecompose and summarize in one call.
pub fn spectrum(matrix: &ExchangeMatrix) -> Result<SpectrumStats> {
    let eig = decompose(matrix)?;
    Ok(SpectrumStats::from_decomposition(&eig, matrix.gamma))
}

/// Closed-form width of the eigenvalue distribution for a cubic box of
/// edge `box_l` (λ): (1/4π)·√(π + 29/12)·N/(L/λ).
pub fn sigma_h_closed_form(n_atoms: usize, box_l: f64) -> f64 {
    let prefactor = (std::f64::consts::PI + 29.0 / 12.0).sqrt() / (4.0 * std::f64::consts::PI);
    prefactor * n_atoms as f64 / box_l
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{sample_cloud, CloudSpec};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn positions_of(v: Vec<Vector3<f64>>) -> AtomPositions {
        AtomPositions {
            positions: v,
            resample_count: 0,
        }
    }

    #[test]
    fn kernel_half_wavelength_reference() {
        // Separation λ/2 along x with the dipole along y: kr = π, cosθ = 0,
        // so the bracket collapses to 4π·(-1/π²) and b = -3/(2π²).
        let b = coupling_kernel(&Vector3::new(0.5, 0.0, 0.0), &Vector3::y()).unwrap();
        let expected = -3.0 / (2.0 * std::f64::consts::PI.powi(2));
        assert_relative_eq!(b, expected, epsilon = 1e-12);
        assert_relative_eq!(b, -0.15198, epsilon = 1e-5);
    }

    #[test]
    fn kernel_small_separation_limit() {
        for dir in [
            Vector3::x(),
            Vector3::y(),
            Vector3::new(1.0, 2.0, -3.0).normalize(),
        ] {
            let b = coupling_kernel(&(1e-8 * dir), &Vector3::y()).unwrap();
            assert_relative_eq!(b, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn kernel_series_joins_direct_branch() {
        // The series and direct evaluations must agree near the switch point.
        let dipole = Vector3::new(0.0, 0.6, 0.8).normalize();
        let dir = Vector3::new(1.0, 1.0, 1.0).normalize();
        for r in [1.5e-3, 1.59e-3, 1.6e-3, 1.7e-3] {
            let b = coupling_kernel(&(r * dir), &dipole).unwrap();
            let kr = WAVE_NUMBER * r;
            let cos2 = dipole.dot(&dir).powi(2);
            let four_pi = 4.0 * std::f64::consts::PI;
            let direct = 3.0 / (8.0 * std::f64::consts::PI)
                * (four_pi * (1.0 - cos2) * kr.sin() / kr
                    + four_pi
                        * (1.0 - 3.0 * cos2)
                        * (kr.cos() / (kr * kr) - kr.sin() / (kr * kr * kr)));
            assert_relative_eq!(b, direct, epsilon = 1e-7);
        }
    }

    #[test]
    fn kernel_rejects_zero_separation() {
        assert!(coupling_kernel(&Vector3::zeros(), &Vector3::y()).is_err());
    }

    #[test]
    fn single_atom_matrix_is_zero() {
        let m = assemble_exchange(&positions_of(vec![Vector3::zeros()]), &Vector3::y()).unwrap();
        assert_eq!(m.dim(), 1);
        assert_eq!(m.couplings[(0, 0)], 0.0);
    }

    #[test]
    fn dicke_pair_matrix() {
        let m = assemble_exchange(
            &positions_of(vec![Vector3::zeros(), Vector3::new(1e-4, 0.0, 0.0)]),
            &Vector3::y(),
        )
        .unwrap();
        assert_relative_eq!(m.couplings[(0, 1)], 1.0, epsilon = 1e-6);
        assert_relative_eq!(m.couplings[(1, 0)], 1.0, epsilon = 1e-6);
        assert_eq!(m.couplings[(0, 0)], 0.0);
        assert_eq!(m.couplings[(1, 1)], 0.0);
    }

    #[test]
    fn matrix_matches_kernel_elementwise() {
        let pts = vec![
            Vector3::new(0.1, -0.7, 2.0),
            Vector3::new(-1.3, 0.4, 0.9),
            Vector3::new(2.2, 1.8, -0.5),
        ];
        let m = assemble_exchange(&positions_of(pts.clone()), &Vector3::y()).unwrap();
        for j in 0..3 {
            for k in 0..3 {
                if j == k {
                    assert_eq!(m.couplings[(j, k)], 0.0);
                } else {
                    let b = coupling_kernel(&(pts[j] - pts[k]), &Vector3::y()).unwrap();
                    assert_eq!(m.couplings[(j, k)], b);
                }
            }
        }
    }

    #[test]
    fn matrix_exactly_symmetric() {
        let cloud = sample_cloud(&CloudSpec::cubic(8.0, 60, 31)).unwrap();
        let m = assemble_exchange(&cloud, &Vector3::y()).unwrap();
        for j in 0..60 {
            for k in 0..60 {
                assert_eq!(m.couplings[(j, k)], m.couplings[(k, j)]);
            }
        }
    }

    #[test]
    fn coincident_atoms_name_the_pair() {
        let err = assemble_exchange(
            &positions_of(vec![Vector3::zeros(), Vector3::zeros()]),
            &Vector3::y(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("0 and 1"));
    }

    #[test]
    fn dicke_pair_spectrum() {
        let m = assemble_exchange(
            &positions_of(vec![Vector3::zeros(), Vector3::new(1e-4, 0.0, 0.0)]),
            &Vector3::y(),
        )
        .unwrap();
        let stats = spectrum(&m).unwrap();
        assert_relative_eq!(stats.betas[0], -1.0, epsilon = 1e-6);
        assert_relative_eq!(stats.betas[1], 1.0, epsilon = 1e-6);
        assert_relative_eq!(stats.rates[0], 0.0, epsilon = 1e-6);
        assert_relative_eq!(stats.rates[1], 2.0, epsilon = 1e-6);
    }

    #[test]
    fn trace_and_rate_sum_conserved() {
        let cloud = sample_cloud(&CloudSpec::cubic(10.0, 80, 7)).unwrap();
        let m = assemble_exchange(&cloud, &Vector3::y()).unwrap();
        let stats = spectrum(&m).unwrap();
        let beta_sum: f64 = stats.betas.iter().sum();
        assert!(beta_sum.abs() < 1e-10 * 80.0);
        let rate_sum: f64 = stats.rates.iter().sum();
        assert_relative_eq!(rate_sum, 80.0, epsilon = 1e-8 * 80.0);
    }

    #[test]
    fn rates_nonnegative_and_mixed() {
        let cloud = sample_cloud(&CloudSpec::cubic(12.0, 150, 99)).unwrap();
        let m = assemble_exchange(&cloud, &Vector3::y()).unwrap();
        let stats = spectrum(&m).unwrap();
        let min_rate = stats.rates.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min_rate >= -1e-8 * 150.0);
        assert!(stats.rates.iter().any(|&r| r < 1.0), "expected subradiant modes");
        assert!(stats.rates.iter().any(|&r| r > 1.0), "expected superradiant modes");
    }

    #[test]
    fn dicke_contraction_spectrum() {
        // Shrinking all separations toward zero drives B to
        // (all-ones minus identity): one eigenvalue N-1, the rest -1.
        let n = 12usize;
        let cloud = sample_cloud(&CloudSpec::cubic(1.0, n, 5)).unwrap();
        let shrunk = AtomPositions {
            positions: cloud.positions.iter().map(|p| p * 1e-3).collect(),
            resample_count: 0,
        };
        let m = assemble_exchange(&shrunk, &Vector3::y()).unwrap();
        let stats = spectrum(&m).unwrap();
        assert_relative_eq!(stats.betas[n - 1], (n - 1) as f64, epsilon = 1e-3);
        for b in &stats.betas[..n - 1] {
            assert_relative_eq!(*b, -1.0, epsilon = 1e-3);
        }
        assert_relative_eq!(stats.rates[n - 1], n as f64, epsilon = 1e-3);
    }

    #[test]
    fn closed_form_sigma_values() {
        assert_relative_eq!(sigma_h_closed_form(1500, 40.0), 7.035, epsilon = 2e-3);
        assert_eq!(sigma_h_closed_form(0, 17.0), 0.0);
        assert_relative_eq!(sigma_h_closed_form(50, 12.8), 0.7329, epsilon = 2e-4);
    }

    #[test]
    fn eigenvectors_reproduce_matrix() {
        let cloud = sample_cloud(&CloudSpec::cubic(6.0, 40, 3)).unwrap();
        let m = assemble_exchange(&cloud, &Vector3::y()).unwrap();
        let eig = decompose(&m).unwrap();
        // V diag(beta) V^T must reconstruct B.
        let n = 40;
        let mut recon = Mat::<f64>::zeros(n, n);
        for c in 0..n {
            for i in 0..n {
                for j in 0..n {
                    recon[(i, j)] += eig.vectors[(i, c)] * eig.betas[c] * eig.vectors[(j, c)];
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                assert_relative_eq!(recon[(i, j)], m.couplings[(i, j)], epsilon = 1e-10);
            }
        }
    }

    proptest! {
        #[test]
        fn kernel_symmetric_under_endpoint_swap(
            x in -5.0f64..5.0, y in -5.0f64..5.0, z in -5.0f64..5.0,
        ) {
            prop_assume!(x * x + y * y + z * z > 1e-12);
            let sep = Vector3::new(x, y, z);
            let b1 = coupling_kernel(&sep, &Vector3::y()).unwrap();
            let b2 = coupling_kernel(&(-sep), &Vector3::y()).unwrap();
            prop_assert_eq!(b1, b2);
        }

        #[test]
        fn kernel_bounded_by_dicke_value(
            r in 0.05f64..20.0, ux in -1.0f64..1.0, uy in -1.0f64..1.0, uz in -1.0f64..1.0,
        ) {
            prop_assume!(ux * ux + uy * uy + uz * uz > 1e-6);
            let dir = Vector3::new(ux, uy, uz).normalize();
            let b = coupling_kernel(&(r * dir), &Vector3::y()).unwrap();
            // |b| ≤ 1 away from the contact divergence region kr ≳ 0.3.
            if WAVE_NUMBER * r > 0.5 {
                prop_assert!(b.abs() <= 1.0 + 1e-9);
            }
        }
    }
}
