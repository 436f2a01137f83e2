use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("variable `{0}` is not ordered by the region")]
    VariableNotInRegion(String),

    #[error("window has no bounds for variable `{0}`")]
    WindowMissingVariable(String),

    #[error("invalid window for `{var}`: lower bound {lo} exceeds upper bound {hi}")]
    InvalidWindow { var: String, lo: i64, hi: i64 },

    #[error("substitution is not invertible: {0}")]
    NonInvertibleSubstitution(String),

    #[error("linear form `{0}` is not an admissible pole factor")]
    UnsupportedPoleFactor(String),

    #[error("basis index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("module index {index} out of range for module dimension {dim}")]
    ModuleIndexOutOfRange { index: usize, dim: usize },

    #[error("blocks must carry distinct points, `{0}` repeats")]
    RepeatedPoint(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
}

impl Error {
    pub(crate) fn parse(offset: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
