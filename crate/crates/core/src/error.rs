use thiserror::Error;

/// Errors raised by the processing core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("size mismatch in {context}: expected {expected}, got {got}")]
    SizeMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("frame out of order: expected frame {expected}, got {got}")]
    OutOfOrder { expected: u64, got: u64 },

    #[error("invalid gain {value} at bin {bin}: gains must be finite and non-negative")]
    InvalidGain { bin: usize, value: f64 },

    #[error("matrix at bin {bin} is not Hermitian (defect {defect:e})")]
    NotHermitian { bin: usize, defect: f64 },

    #[error("the oracle enhancer needs a clean reference for every frame")]
    MissingReference,

    #[error("unsupported audio: {0}")]
    UnsupportedAudio(String),

    #[error("wav: {0}")]
    Wav(#[from] hound::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::SizeMismatch {
            context,
            expected,
            got,
        })
    }
}
