use alloc::string::String;

/// Errors raised by the core operations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("rect {x},{y} {w}x{h} is outside the {width}x{height} image")]
    OutOfBounds {
        x: i64,
        y: i64,
        w: u32,
        h: u32,
        width: u32,
        height: u32,
    },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("dimension mismatch: {0}")]
    ShapeMismatch(String),
    #[error("patch support does not fit the background at the requested position")]
    Placement,
    #[error("patch has no pixel with alpha > 0")]
    EmptyChange,
    #[error("image of {width}x{height} is too small for any anchor area bin")]
    ImageTooSmall { width: u32, height: u32 },
    #[error("polygon has zero area")]
    DegeneratePolygon,
    #[error("box {0} lies outside the input bounds")]
    BoxOutOfBounds(String),
    #[error("generation failed: {0}")]
    Generation(String),
    #[error("evaluation undefined: {0}")]
    Evaluation(&'static str),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
