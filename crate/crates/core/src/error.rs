use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter `{field}` = {value}")]
    InvalidParameter { field: &'static str, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundaryError {
    #[error(transparent)]
    Model(#[from] ModelError),
    /// `l_th² ≤ 2`: the removed centre-of-mass energy cannot beat the measurement noise.
    #[error("no cooling possible for l_th^2 = {l_th_sq} (requires l_th^2 > 2)")]
    NoCoolingDomain { l_th_sq: f64 },
    #[error("s = {s} is below the minimal beam radius {s_min}")]
    BelowMinimalRadius { s: f64, s_min: f64 },
    #[error("energy change is not monotone in d at s = {s}: sign changes near d = {crossings:?}")]
    NonMonotone { s: f64, crossings: Vec<f64> },
    #[error("s grid must be strictly increasing and positive")]
    BadGrid,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("thermal kernel check `{check}` failed: got {got}, expected {expected}")]
    KernelCheck {
        check: &'static str,
        got: f64,
        expected: f64,
    },
    #[error("quadrature for `{quantity}` did not converge: order doubling changed it by {change:e} (relative)")]
    NotConverged { quantity: &'static str, change: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("could not start a pool of {workers} worker threads: {reason}")]
    ThreadPool { workers: usize, reason: String },
}
