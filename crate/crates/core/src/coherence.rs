//! Spatial cross-correlation of the observed field, coherence widths, and
//! the figure-of-merit fit.
//!
//! The correlation is the unnormalized zero-padded overlap of the field
//! with its shifted copy inside a fixed analysis window, averaged over the
//! transverse rows. The window is kept fixed across configurations so the
//! triangle envelope of the finite overlap biases every width the same way
//! and cancels in compared trends.

use num_complex::Complex64;
use serde::Serialize;

use crate::coupling::sigma_h_closed_form;
use crate::error::{Error, Result};
use crate::radiation::FieldMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Axis {
    X,
    Y,
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Axis::X => write!(f, "x"),
            Axis::Y => write!(f, "y"),
        }
    }
}

/// Equal-time cross-correlation samples along one transverse axis.
#[derive(Debug, Clone)]
pub struct CorrelationProfile {
    pub axis: Axis,
    /// Observation time of the underlying map (τ).
    pub t: f64,
    /// Lag offsets in λ, symmetric about 0.
    pub lags: Vec<f64>,
    /// Correlation value per lag; H(0) is real ≥ 0 and |H| peaks there.
    pub values: Vec<Complex64>,
}

impl CorrelationProfile {
    pub fn peak(&self) -> f64 {
        let mid = self.lags.len() / 2;
        self.values[mid].re
    }
}

/// 1/e² radius of |H| along one axis.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CoherenceWidth {
    pub axis: Axis,
    /// Observation time (τ).
    pub t: f64,
    /// Width in λ.
    pub w: f64,
    /// Set when |H| never falls below the threshold inside the window;
    /// `w` is then the window width and should not enter fits.
    pub saturated: bool,
}

fn window_indices(samples: &[f64], half_width: f64) -> Vec<usize> {
    let tol = 1e-9;
    samples
        .iter()
        .enumerate()
        .filter(|(_, &v)| v.abs() <= half_width + tol)
        .map(|(i, _)| i)
        .collect()
}

/// Cross-correlation of the map along `axis` over the analysis window of
/// the given half-width (λ).
///
/// For the x axis: H(x) = ⟨ Σ_{x'} E(x',y)·E*(x'-x,y)·Δ ⟩_y with the sum
/// running over the zero-padded window and the dot product contracting all
/// three field components; rows are the window's y samples. The y axis is
/// treated symmetrically.
pub fn cross_correlation(
    map: &FieldMap,
    axis: Axis,
    window_half_width: f64,
) -> Result<CorrelationProfile> {
    if window_half_width <= 0.0 {
        return Err(Error::config("analysis window must be positive"));
    }
    if window_half_width > map.grid.x_span + 1e-9 || window_half_width > map.grid.y_span + 1e-9 {
        return Err(Error::config(format!(
            "analysis window ±{window_half_width}λ exceeds the computed map (±{} × ±{} λ)",
            map.grid.x_span, map.grid.y_span
        )));
    }
    let along = window_indices(
        match axis {
            Axis::X => &map.xs,
            Axis::Y => &map.ys,
        },
        window_half_width,
    );
    let across = window_indices(
        match axis {
            Axis::X => &map.ys,
            Axis::Y => &map.xs,
        },
        window_half_width,
    );
    if along.len() < 2 || across.is_empty() {
        return Err(Error::config(
            "analysis window is larger than the computed map or too small to resolve",
        ));
    }

    let w = along.len();
    let spacing = map.grid.spacing;
    let sample = |row: usize, i: usize| -> &nalgebra::Vector3<Complex64> {
        match axis {
            Axis::X => map.at(along[i], across[row]),
            Axis::Y => map.at(across[row], along[i]),
        }
    };

    // One complex value per signed lag, fixed summation order over rows.
    let max_lag = w as i64 - 1;
    let mut values = vec![Complex64::new(0.0, 0.0); 2 * w - 1];
    for row in 0..across.len() {
        for (slot, lag) in values.iter_mut().zip(-max_lag..=max_lag) {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..w as i64 {
                let j = i - lag;
                if j < 0 || j >= w as i64 {
                    continue;
                }
                let a = sample(row, i as usize);
                let b = sample(row, j as usize);
                acc += a.x * b.x.conj() + a.y * b.y.conj() + a.z * b.z.conj();
            }
            *slot += acc * spacing;
        }
    }
    let rows = across.len() as f64;
    for v in &mut values {
        *v /= rows;
    }
    let lags = (-max_lag..=max_lag).map(|l| l as f64 * spacing).collect();
    Ok(CorrelationProfile {
        axis,
        t: map.t,
        lags,
        values,
    })
}

/// Locate the 1/e² radius of |H|: the smallest positive lag where
/// |H(x)|/|H(0)| first drops below e⁻², linearly interpolated between the
/// bracketing samples.
pub fn coherence_width(profile: &CorrelationProfile) -> Result<CoherenceWidth> {
    let mid = profile.lags.len() / 2;
    let h0 = profile.values[mid].norm();
    if !(h0 > 0.0) {
        return Err(Error::config("correlation peak H(0) must be positive"));
    }
    let threshold = h0 * (-2.0f64).exp();
    let mut prev = h0;
    for k in 1..(profile.lags.len() - mid) {
        let cur = profile.values[mid + k].norm();
        if cur < threshold {
            let x_prev = profile.lags[mid + k - 1];
            let x_cur = profile.lags[mid + k];
            let frac = (prev - threshold) / (prev - cur);
            return Ok(CoherenceWidth {
                axis: profile.axis,
                t: profile.t,
                w: x_prev + frac * (x_cur - x_prev),
                saturated: false,
            });
        }
        prev = cur;
    }
    Ok(CoherenceWidth {
        axis: profile.axis,
        t: profile.t,
        w: *profile.lags.last().unwrap(),
        saturated: true,
    })
}

/// One sweep point for the figure-of-merit fit.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FomPoint {
    pub n_atoms: usize,
    /// Cubic box edge (λ).
    pub box_l: f64,
    /// Measured mean coherence width (λ).
    pub w: f64,
}

/// Single-parameter least-squares result for w = w_u·(1 + ξ·σ_Ĥ).
#[derive(Debug, Clone, Serialize)]
pub struct FomFit {
    pub xi: f64,
    /// Uncorrelated width (λ), supplied, not fitted.
    pub w_u: f64,
    /// Per-point residual w_i - w_u·(1 + ξ·σ_i), in input order.
    pub residuals: Vec<f64>,
}

/// Fit ξ only, with the closed-form spectral width evaluated at each
/// point's (N, L). `w_u` is the measured uncorrelated width.
pub fn fit_fom(points: &[FomPoint], w_u: f64) -> Result<FomFit> {
    if points.len() < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    if !(w_u > 0.0) {
        return Err(Error::Fit("uncorrelated width w_u must be positive".into()));
    }
    let sigmas: Vec<f64> = points
        .iter()
        .map(|p| sigma_h_closed_form(p.n_atoms, p.box_l))
        .collect();
    let spread = sigmas.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - sigmas.iter().cloned().fold(f64::INFINITY, f64::min);
    if spread < 1e-12 {
        return Err(Error::Fit(
            "degenerate design: all spectral widths are equal".into(),
        ));
    }
    // Minimize Σ (w_i - w_u - w_u·ξ·σ_i)² over ξ.
    let num: f64 = points
        .iter()
        .zip(&sigmas)
        .map(|(p, s)| s * (p.w - w_u))
        .sum();
    let den: f64 = w_u * sigmas.iter().map(|s| s * s).sum::<f64>();
    let xi = num / den;
    let residuals = points
        .iter()
        .zip(&sigmas)
        .map(|(p, s)| p.w - w_u * (1.0 + xi * s))
        .collect();
    Ok(FomFit { xi, w_u, residuals })
}
