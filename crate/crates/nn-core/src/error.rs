use std::fmt;

/// Errors surfaced by the engine. Shape errors name the layer and the
/// offending dimension so genome bugs are traceable from the message alone.
#[derive(Debug, Clone, PartialEq)]
pub enum NnError {
    ShapeMismatch {
        layer: String,
        expected: String,
        got: String,
    },
    SpatialUnderflow {
        layer: String,
        axis: &'static str,
        input: usize,
        kernel: usize,
    },
    NonFinite {
        context: String,
    },
    LabelOutOfRange {
        label: usize,
        classes: usize,
    },
    InvalidParameter {
        context: String,
    },
    Io(String),
    Corrupt {
        context: String,
    },
}

impl fmt::Display for NnError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NnError::ShapeMismatch {
                layer,
                expected,
                got,
            } => write!(f, "shape mismatch in {layer}: expected {expected}, got {got}"),
            NnError::SpatialUnderflow {
                layer,
                axis,
                input,
                kernel,
            } => write!(
                f,
                "spatial underflow in {layer}: {axis} input {input} smaller than kernel {kernel}"
            ),
            NnError::NonFinite { context } => write!(f, "non-finite value in {context}"),
            NnError::LabelOutOfRange { label, classes } => {
                write!(f, "label {label} out of range for {classes} classes")
            }
            NnError::InvalidParameter { context } => write!(f, "invalid parameter: {context}"),
            NnError::Io(msg) => write!(f, "i/o error: {msg}"),
            NnError::Corrupt { context } => write!(f, "corrupt data: {context}"),
        }
    }
}

impl std::error::Error for NnError {}

impl From<std::io::Error> for NnError {
    fn from(e: std::io::Error) -> Self {
        NnError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, NnError>;
