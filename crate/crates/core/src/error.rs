use std::path::PathBuf;

use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("closest-point iteration did not converge after {iterations} steps at {point:?}")]
    NoConvergence { iterations: usize, point: [f64; 3] },

    #[error("level-set gradient vanishes (|grad F| = {norm:e}) at {point:?}")]
    DegenerateGradient { norm: f64, point: [f64; 3] },

    #[error("{path}:{line}: {message}")]
    FileFormat {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("no built-in node sampler for surface {0}")]
    UnsupportedSurface(String),

    #[error("point-cloud patch is not surface-like (eigenvalue ratio {ratio:.3} > 0.5)")]
    DegeneratePatch { ratio: f64 },

    #[error("kernel order nu = {nu} does not support {what}")]
    UnsupportedOrder { nu: f64, what: &'static str },

    #[error("collocation matrix is numerically singular (pivot {pivot:e}, scale {scale:e})")]
    SingularSystem { pivot: f64, scale: f64 },

    #[error("unsupported Runge-Kutta stage count {0}; expected 1, 2 or 3")]
    UnsupportedStage(usize),

    #[error("velocity is (nearly) zero; advection frame undefined")]
    ZeroVelocity,

    #[error("velocity has a normal component ({normal:e} relative)")]
    NonTangential { normal: f64 },

    #[error("band point beyond focal distance (det R = {det:e})")]
    SingularBand { det: f64 },

    #[error("solution diverged at t = {t}: max|u| = {max_abs:e}")]
    Diverged { t: f64, max_abs: f64 },

    #[error("config error at line {line}: key `{key}`: {message}")]
    Config {
        key: String,
        line: usize,
        message: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            line,
            message: message.into(),
        }
    }

    /// Numerical failures, as opposed to bad input or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::DegenerateGradient { .. }
                | Error::DegeneratePatch { .. }
                | Error::SingularSystem { .. }
                | Error::ZeroVelocity
                | Error::NonTangential { .. }
                | Error::SingularBand { .. }
                | Error::Diverged { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
