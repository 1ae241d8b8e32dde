use thiserror::Error;

/// Errors shared by orbit iteration, sampling, and the estimators.
#[derive(Debug, Error)]
pub enum DynError {
    #[error("orbit produced non-finite coordinates at step {index}")]
    Divergence { index: usize },

    #[error("orbit climbed past y = {limit:.1e} at step {index}; aborting instead of clamping")]
    CuspExcursion { index: usize, limit: f64 },

    #[error("fundamental-domain reduction did not settle within {max_iters} moves")]
    ReductionOverflow { max_iters: usize },

    #[error("tangent map numerically singular at step {index} (|det| = {det:.3e})")]
    SingularJacobian { index: usize, det: f64 },

    #[error("invalid parameter `{name}`: {why}")]
    InvalidParameter { name: &'static str, why: String },

    #[error("point outside the domain of system `{system}`: {why}")]
    OutsideDomain { system: String, why: String },

    #[error("orbit escapes the window: no returning times among the requested n")]
    NoReturningTimes,

    #[error("estimate unresolved: {why}")]
    Unresolved { why: String },

    #[error("measure class `{measure}` not supported here: {why}")]
    MeasureClass { measure: String, why: String },

    #[error("unknown system id `{0}`")]
    UnknownSystem(String),

    #[error("i/o failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed point file {path}: {why}")]
    PointFile { path: String, why: String },
}

impl DynError {
    pub fn invalid(name: &'static str, why: impl Into<String>) -> Self {
        DynError::InvalidParameter {
            name,
            why: why.into(),
        }
    }

    pub fn unresolved(why: impl Into<String>) -> Self {
        DynError::Unresolved { why: why.into() }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        DynError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn point_file(path: impl Into<String>, why: impl Into<String>) -> Self {
        DynError::PointFile {
            path: path.into(),
            why: why.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, DynError>;
