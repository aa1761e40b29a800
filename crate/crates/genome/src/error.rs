use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum GenomeError {
    /// Spatial dims ran out at `layer` (0-based searched-layer index; the
    /// terminal head reports the searched length).
    Underflow {
        layer: usize,
        stage: &'static str,
        axis: &'static str,
        input: usize,
        kernel: usize,
    },
    InvalidField {
        layer: usize,
        field: String,
        message: String,
    },
    RetriesExhausted {
        context: String,
    },
    Parse {
        message: String,
    },
}

impl fmt::Display for GenomeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GenomeError::Underflow {
                layer,
                stage,
                axis,
                input,
                kernel,
            } => write!(
                f,
                "layer {layer} {stage}: {axis} extent {input} cannot fit kernel {kernel}"
            ),
            GenomeError::InvalidField {
                layer,
                field,
                message,
            } => write!(f, "layer {layer} field `{field}`: {message}"),
            GenomeError::RetriesExhausted { context } => {
                write!(f, "retry limit exhausted: {context}")
            }
            GenomeError::Parse { message } => write!(f, "genome parse error: {message}"),
        }
    }
}

impl std::error::Error for GenomeError {}

pub type Result<T> = std::result::Result<T, GenomeError>;
