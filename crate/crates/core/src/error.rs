use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported Lebedev order {requested}; valid orders are {valid:?}")]
    UnsupportedLebedevOrder {
        requested: usize,
        valid: &'static [usize],
    },

    #[error("quadrature rule needs at least one node")]
    EmptyRule,

    #[error("non-finite integrand {value} at node ({x}, {y}, {z})")]
    NonFiniteIntegrand { value: f64, x: f64, y: f64, z: f64 },

    #[error("singular collision kernel input: v == w with lambda = {lambda}")]
    SingularKernel { lambda: f64 },

    #[error("non-finite collision distribution q_{index} for node pair ({v_node}, {w_node})")]
    NonFiniteCollision {
        index: usize,
        v_node: usize,
        w_node: usize,
    },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("mass matrix block l = {l} is singular")]
    SingularMass { l: usize },

    #[error("non-finite state at step {step}")]
    NonFiniteState { step: usize },

    #[error("invalid time grid: {0}")]
    TimeGrid(String),

    #[error("reference function has zero L2 norm")]
    ZeroNorm,

    #[error("unsupported kernel family for particle simulation: {0}")]
    UnsupportedDsmcKernel(String),

    #[error("invalid particle setup: {0}")]
    Particles(String),

    #[error("config error [{key}]: {message}")]
    Config { key: String, message: String },

    #[error("cache {path}: bad magic bytes")]
    CacheMagic { path: PathBuf },

    #[error("cache {path}: format version {found}, expected {expected}")]
    CacheVersion {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("cache {path}: parameter mismatch for {field}: cached {cached}, requested {requested}")]
    CacheMismatch {
        path: PathBuf,
        field: &'static str,
        cached: String,
        requested: String,
    },

    #[error("cache {path}: checksum failure")]
    CacheChecksum { path: PathBuf },

    #[error("refusing to overwrite existing file {0} (use --force)")]
    Exists(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn is_cache_error(&self) -> bool {
        matches!(
            self,
            Error::CacheMagic { .. }
                | Error::CacheVersion { .. }
                | Error::CacheMismatch { .. }
                | Error::CacheChecksum { .. }
        )
    }
}
