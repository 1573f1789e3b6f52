use thiserror::Error;

/// Errors raised by the attitude-integration and benchmark routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not skew-symmetric (|M + M^T|_F = {residual:e})")]
    NotSkewSymmetric { residual: f64 },

    #[error("rotation angle {angle} rad is too close to pi for axis extraction")]
    NearPiRotation { angle: f64 },

    #[error("matrix is not close enough to SO(3) to orthonormalize: {reason}")]
    NotNearOrthogonal { reason: String },

    #[error("rotation angle {angle} rad is outside the Jacobian domain [0, 2*pi - 1e-3)")]
    AngleOutOfDomain { angle: f64 },

    #[error("time step must be positive and finite, got {dt}")]
    DegenerateStep { dt: f64 },

    #[error("design matrix is numerically singular (condition estimate {condition:e})")]
    SingularSystem { condition: f64 },

    #[error("window is empty")]
    EmptyWindow,

    #[error("invalid measurement window: {0}")]
    InvalidWindow(String),

    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("reference integration did not converge after {halvings} halvings (last change {last_change:e} rad)")]
    NoConvergence { halvings: u32, last_change: f64 },

    #[error("reference attitude disagrees with the closed-form attitude by {error:e} rad")]
    ReferenceMismatch { error: f64 },

    #[error("insufficient data for an order fit: {usable} usable records, need at least 3")]
    InsufficientData { usable: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("stage {stage}: {source}")]
    Stage {
        stage: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
