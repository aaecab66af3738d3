//! A measurement model in which a band-limited probe and pointer decohere a
//! system exactly, in finite time.
//!
//! Closed forms for the decoherence factor I_kl and the orthogonality kernel
//! S_kl sit next to independent quadrature and grid evaluations of the same
//! quantities, so every formula can be checked against a second route.

// `!(x > y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decoherence;
pub mod densities;
pub mod dynamics;
pub mod error;
pub mod model;
pub mod orthogonality;
pub mod quad;
pub mod sampling;
pub mod special;
pub mod states;

pub use num_complex::Complex64;

pub use decoherence::{
    decoherence_threshold_scan, i_closed, i_oscillator_closed, i_quadrature, i_qubit_closed, DecoherenceFactorSpec,
    DecoherenceFamily, Evaluator, ThresholdReport,
};
pub use densities::{
    density_vs_grid, grid_density, oscillator_density, qubit_density, supports_disjoint, DensityCase, PiecewiseDensity,
    PointerLevel, Sign,
};
pub use dynamics::{
    assemble_reduced_system, assemble_reduced_system_pointer, pde_residual, purity, Grid1D, JointModel,
    ReducedDensityMatrix,
};
pub use error::{Error, Result};
pub use model::{
    beta_of, decoherence_time, min_gap, orthogonality_condition, orthogonality_time, Coupling, MeasurementConfig,
    PulseProfile, SpectrumSpec, SystemKind,
};
pub use orthogonality::{
    orthogonality_threshold_scan, pointer_state_kernel, s_oscillator_closed, s_quadrature, s_qubit_closed, Branch,
    OrthogonalityFamily, PiecewiseKernel,
};
pub use states::BandLimitedState;
