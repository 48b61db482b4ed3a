//! Coupled-dipole simulation of collective spontaneous emission from
//! dilute, disordered atomic ensembles.
//!
//! The crate covers the full pipeline: sampling a random cloud, assembling
//! the pairwise exchange Hamiltonian, propagating the single-excitation
//! amplitudes, evaluating the far-field radiation pattern on an observation
//! plane, extracting spatial-coherence widths from cross-correlations, and
//! fitting the N/(L/λ) figure of merit. Units throughout: lengths in λ,
//! times in τ = 1/Γ, Γ = 1, k_a = 2π.

pub mod coherence;
pub mod coupling;
pub mod ensemble;
pub mod error;
pub mod evolution;
pub mod harness;
pub mod radiation;

pub use coherence::{
    coherence_width, cross_correlation, fit_fom, Axis, CoherenceWidth, CorrelationProfile,
    FomFit, FomPoint,
};
pub use coupling::{
    assemble_exchange, coupling_kernel, decompose, sigma_h_closed_form, spectrum,
    EigenDecomposition, ExchangeMatrix, SpectrumStats, WAVE_NUMBER,
};
pub use ensemble::{
    density, optical_depth, sample_cloud, AtomPositions, CloudSpec, MIN_PAIR_SEPARATION,
};
pub use error::{Error, Result};
pub use evolution::{
    initial_amplitudes, norm_trace, propagate, propagate_ode_oracle, Amplitudes, NormTrace,
    Propagator,
};
pub use harness::config::{RunConfig, Scenario};
pub use harness::runner::{run_experiment, run_instance, sweep, ExperimentResult, InstanceRecord};
pub use radiation::{dipole_field, field_map, FieldMap, ObservationGrid};
