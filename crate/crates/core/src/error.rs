use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("spectrum needs at least two eigenvalues")]
    SingleLevel,
    #[error("eigenvalues {0} and {1} are degenerate")]
    DegenerateSpectrum(f64, f64),
    #[error("amplitudes are not normalized: sum |c|^2 = {0}")]
    NotNormalized(f64),
    #[error("orthogonality unattainable: lambda = {lambda} <= 2 b0 hbar / a0 = {bound}")]
    OrthogonalityUnattainable { lambda: f64, bound: f64 },
    #[error("beta is undefined at t = 0 with fixed lambda")]
    DegenerateTime,
    #[error("integrand is not absolutely integrable: {0}")]
    NotIntegrable(String),
    #[error("quadrature did not converge: estimate {value} with error {error:e} after {panels} panels")]
    NoConvergence {
        value: Complex64,
        error: f64,
        panels: usize,
    },
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("condition violated: {0}")]
    ConditionViolated(String),
    #[error("threshold not reached; scan ended at {last} with max |value| = {max_abs:e}")]
    NotReached { last: f64, max_abs: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn positive(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            field,
            reason: format!("must be finite and > 0, got {v}"),
        })
    }
}
