use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("shape mismatch: {left_width}x{left_height} vs {right_width}x{right_height}")]
    ShapeMismatch {
        left_width: usize,
        left_height: usize,
        right_width: usize,
        right_height: usize,
    },

    #[error("image data length {len} does not match {width}x{height}")]
    DataLength { width: usize, height: usize, len: usize },

    #[error("non-finite value at pixel ({x}, {y})")]
    NonFinite { x: usize, y: usize },

    #[error("pixel ({x}, {y}) has value {value}, expected {expected}")]
    PixelOutOfDomain {
        x: usize,
        y: usize,
        value: f64,
        expected: &'static str,
    },

    #[error("gray-level indicator undefined: smoothed image maximum is zero")]
    ZeroIndicatorScale,

    #[error("tridiagonal pivot {pivot:e} at row {row} is below the singularity threshold")]
    SingularPivot { row: usize, pivot: f64 },

    #[error(
        "shifted energy eps1 = {value:e} is not positive; increase the shift constant C (currently {shift:e})"
    )]
    NonPositiveShiftedEnergy { value: f64, shift: f64 },

    #[error(
        "auxiliary variable r = {r:e} became non-positive at iteration {iter}; increase C (currently {shift:e}) or lower tau"
    )]
    AuxiliaryVariableNonPositive { iter: usize, r: f64, shift: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
