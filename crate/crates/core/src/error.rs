use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MtvError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("image has no pixels")]
    EmptyImage,

    #[error("theta must lie in [0, 1], got {0}")]
    InvalidTheta(f64),

    #[error("lambda must be finite and nonnegative, got {0}")]
    InvalidLambda(f64),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("reconstruction is infeasible: entry ({row}, {col}) = {value} is negative")]
    Infeasible { row: usize, col: usize, value: f64 },

    #[error("image level {level} is coarser than the target level {target}")]
    LevelTooCoarse { level: u32, target: u32 },

    #[error("cannot downsample a {rows}x{cols} image (both sides must be even)")]
    NotDownsamplable { rows: usize, cols: usize },

    #[error("instance with {pixels} pixels exceeds the oracle limit of {limit}")]
    InstanceTooLarge { pixels: usize, limit: usize },

    #[error("file not found: {0}")]
    NotFound(PathBuf),

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("corrupt image file: {0}")]
    CorruptImage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, MtvError>;
