use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "effective susceptibility is singular at omega = {omega}: B(omega) vanishes, the working point is unstable"
    )]
    SingularSusceptibility { omega: f64 },

    #[error("effective damping at omega_b vanishes; the approximate variance is undefined")]
    DegenerateDamping,

    #[error("induced phonon number requires positive detuning, got delta = {delta}")]
    NonPositiveDetuning { delta: f64 },

    #[error("variances give n = {n_bf}, below zero by more than the quadrature tolerance {tolerance}")]
    InconsistentVariances { n_bf: f64, tolerance: f64 },

    #[error("stability methods disagree: eigenvalues say {eigen}, Routh-Hurwitz says {routh}")]
    StabilityDisagreement { eigen: String, routh: String },

    #[error("drift matrix is not stable; no stationary covariance exists")]
    NoStationaryState,

    #[error("no feasible point in the optimization region")]
    NoFeasiblePoint,

    #[error("quadrature did not converge: value {value}, error estimate {abs_error}")]
    NotConverged { value: f64, abs_error: f64 },

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> ModelError {
    ModelError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
