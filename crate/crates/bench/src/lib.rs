//! Shared fixtures for the benchmarks.

use decolab_core::{BandLimitedState, MeasurementConfig};

pub fn sinc(tau: f64) -> BandLimitedState {
    BandLimitedState::sinc(tau, 1.0).unwrap()
}

/// λ=4, α=1, κ₀=0.25, g₀=2, b₀=1, ħ=1.
pub fn qubit_cfg() -> MeasurementConfig {
    MeasurementConfig::new(1.0, 1.0, 2.0, 4.0, 0.25, 1.0).unwrap()
}
