use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("total count at period {index} is zero")]
    ZeroTotal { index: usize },

    #[error("term count {term} exceeds total {total} at period {index}")]
    TermExceedsTotal { index: usize, term: u64, total: u64 },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("invalid series{}: {reason}", .index.map(|i| format!(" at period {i}")).unwrap_or_default())]
    InvalidSeries { index: Option<usize>, reason: String },

    #[error("invalid sample pool: {0}")]
    InvalidPool(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("catalog error: {0}")]
    Catalog(String),

    #[error("unknown sample id `{0}`")]
    UnknownSample(String),

    #[error("empty selection: {0}")]
    EmptySelection(&'static str),

    #[error("insufficient samples: need {needed}, have {available}")]
    InsufficientSamples { needed: usize, available: usize },

    #[error("correlation undefined: series `{0}` is constant")]
    ConstantSeries(String),

    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("misaligned vintage sets: {0}")]
    MisalignedVintages(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable snake_case name of the variant, for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::ZeroTotal { .. } => "zero_total",
            Error::TermExceedsTotal { .. } => "term_exceeds_total",
            Error::InvalidGrid(_) => "invalid_grid",
            Error::InvalidQuery(_) => "invalid_query",
            Error::InvalidSeries { .. } => "invalid_series",
            Error::InvalidPool(_) => "invalid_pool",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Parse { .. } => "parse",
            Error::Catalog(_) => "catalog",
            Error::UnknownSample(_) => "unknown_sample",
            Error::EmptySelection(_) => "empty_selection",
            Error::InsufficientSamples { .. } => "insufficient_samples",
            Error::ConstantSeries(_) => "constant_series",
            Error::DegenerateSignal(_) => "degenerate_signal",
            Error::InvalidWindow(_) => "invalid_window",
            Error::MisalignedVintages(_) => "misaligned_vintages",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn series(index: impl Into<Option<usize>>, reason: impl Into<String>) -> Self {
        Error::InvalidSeries {
            index: index.into(),
            reason: reason.into(),
        }
    }
}
