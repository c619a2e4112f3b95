use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParams { field: &'static str, reason: String },

    #[error("mass matrix is singular (condition number {0:.3e})")]
    SingularMassMatrix(f64),

    #[error("attack angle undefined: gripper is {0:.3e} m from the target")]
    UndefinedAttackAngle(f64),

    #[error("collocation grid has no point inside the approach window [{start:.4}, {end:.4}] of the flight phase")]
    EmptyApproachWindow { start: f64, end: f64 },

    #[error("initial guess has {got} entries, transcription expects {expected}")]
    GuessDimension { expected: usize, got: usize },

    #[error("riccati solution diverged at t = {t:.4} s (|S| = {norm:.3e})")]
    RiccatiBlowUp { t: f64, norm: f64 },

    #[error("least-squares release fit is rank deficient")]
    RankDeficientFit,

    #[error("estimator window needs at least 3 strictly increasing samples: {0}")]
    InvalidWindow(String),

    #[error("trajectory does not cover t = {t:.4} s (range [{start:.4}, {end:.4}])")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("malformed trajectory: {0}")]
    MalformedTrajectory(String),

    #[error("failed to write output: {0}")]
    Output(String),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParams {
            field,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Output(e.to_string())
    }
}
