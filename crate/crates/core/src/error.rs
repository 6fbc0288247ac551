use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("duration {0} s out of range [{1}, {2}] s")]
    DurationOutOfRange(f64, f64, f64),
    #[error("audio is empty")]
    EmptyAudio,
    #[error("audio shorter than one frame ({0} samples < {1})")]
    AudioTooShort(usize, usize),
    #[error("unknown event name: {0:?}")]
    UnknownEvent(String),
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("invalid interval {onset}-{offset}: {msg}")]
    InvalidInterval { onset: f64, offset: f64, msg: String },
    #[error("overlapping intervals for event {0:?}")]
    OverlappingIntervals(String),
    #[error("infeasible packing: {0}")]
    InfeasiblePacking(String),
    #[error("empty bank")]
    EmptyBank,
    #[error("class {0:?} has no surviving segments after filtering")]
    EmptyClass(String),
    #[error("frequency bands overlap: {0}")]
    BandOverlap(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("insufficient samples: {count} for dimension {dim}")]
    InsufficientSamples { count: usize, dim: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("mismatched clip lengths: {0} vs {1}")]
    ClipLengthMismatch(f64, f64),
    #[error("invalid noise schedule: {0}")]
    InvalidSchedule(String),
    #[error("model parameters are uninitialized (train first)")]
    UntrainedModel,
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },
    #[error("misaligned metric inputs: {0} specs vs {1} detections")]
    MisalignedLists(usize, usize),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("normalizer gave no parseable caption; replies: {0:?}")]
    UnparseableReply(Vec<String>),
    #[error("chat client error: {0}")]
    ChatClient(String),
    #[error("missing files: {0:?}")]
    MissingFiles(Vec<String>),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("wav error: {0}")]
    Wav(#[from] hound::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Other(String),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
