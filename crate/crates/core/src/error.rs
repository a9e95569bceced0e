use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("evaluation point lies on a current path (distance {distance:e} m)")]
    SingularPoint { distance: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty input")]
    EmptyInput,

    #[error("all input values are zero")]
    AllZero,

    #[error("integration step {dt:e} s exceeds the limit {limit:e} s")]
    StepTooLarge { dt: f64, limit: f64 },

    #[error("drive saturates the spins (saturation parameter {parameter:e} > {threshold:e})")]
    SaturationRegime { parameter: f64, threshold: f64 },

    #[error("voxel grid has no cells along axis {axis}")]
    BadDiscretization { axis: usize },

    #[error("beam path intersects the sample volume")]
    BeamIntersectsSample,

    #[error("lock-in modulation is not quasi-static (omega_m * T2 = {product:e})")]
    QuasiStaticViolation { product: f64 },

    #[error("fit did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("both quadrature offsets are zero")]
    BothZero,

    #[error("I/O error: {0}")]
    Io(String),

    #[error("malformed data at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of a numerical procedure, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularPoint { .. }
                | Error::StepTooLarge { .. }
                | Error::SaturationRegime { .. }
                | Error::QuasiStaticViolation { .. }
                | Error::NoConvergence { .. }
                | Error::DegenerateData(_)
                | Error::BothZero
                | Error::AllZero
                | Error::BeamIntersectsSample
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
