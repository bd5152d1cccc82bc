use std::path::PathBuf;

/// Errors raised by the engine.
///
/// Every variant maps onto one of three process exit codes (see
/// [`Error::exit_code`]): validation problems, numerical failures and I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid design space: {0}")]
    InvalidDesignSpace(String),

    #[error("malformed input: {0}")]
    MalformedInput(String),

    #[error("via placed over a missing pixel at {}", format_sites(.sites))]
    ViaConstraintViolation {
        /// `(row, col, via_layer)` triples, 1-based.
        sites: Vec<(usize, usize, usize)>,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid I/O selection: {0}")]
    InvalidIo(String),

    #[error("port count mismatch: file has {found} ports, topology has {expected}")]
    PortCountMismatch { expected: usize, found: usize },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("frequencies are not strictly increasing (at sample {index}: {value} Hz)")]
    NonIncreasingFrequencies { index: usize, value: f64 },

    #[error("cache topology hash {found:#018x} does not match topology hash {expected:#018x}")]
    HashMismatch { expected: u64, found: u64 },

    #[error("corrupt cache: {0}")]
    CorruptCache(String),

    #[error("non-reciprocal prior: {} violation(s), first at f#{} ports ({}, {}) with |Zpq - Zqp| = {:.3e}",
        .violations.len(), .violations[0].freq_index, .violations[0].p, .violations[0].q, .violations[0].deviation)]
    NonReciprocal { violations: Vec<ReciprocityViolation> },

    #[error(
        "singular system at {freq_hz} Hz (condition estimate {condition:.3e}); \
         the network may be lossless at this frequency, consider adding loss"
    )]
    SingularSystem { freq_hz: f64, condition: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("representation mismatch: {0}")]
    RepresentationMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReciprocityViolation {
    pub freq_index: usize,
    pub p: usize,
    pub q: usize,
    pub deviation: f64,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 validation, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::SingularSystem { .. } => 3,
            Error::Io { .. } | Error::CorruptCache(_) => 4,
            _ => 2,
        }
    }
}

fn format_sites(sites: &[(usize, usize, usize)]) -> String {
    let shown: Vec<String> = sites
        .iter()
        .take(8)
        .map(|(i, j, l)| format!("({i},{j},{l})"))
        .collect();
    let mut s = shown.join(", ");
    if sites.len() > 8 {
        s.push_str(&format!(" and {} more", sites.len() - 8));
    }
    s
}
