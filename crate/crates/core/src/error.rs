use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index:?} out of range for dims {dims:?}")]
    IndexOutOfRange { index: Vec<usize>, dims: Vec<usize> },

    #[error("mode {mode} out of range for a tensor of order {order}")]
    InvalidMode { mode: usize, order: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid tolerance {0}: expected 0 < tol < 1")]
    InvalidTolerance(f64),

    #[error("invalid ranks: {0}")]
    InvalidRanks(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("size limit exceeded: {0}")]
    TooLarge(String),

    #[error("shifted system is singular at shift {shift}")]
    SingularShift { shift: f64 },

    #[error("spectral intervals overlap: [{e_lo}, {e_hi}] and [{f_lo}, {f_hi}]")]
    OverlappingIntervals { e_lo: f64, e_hi: f64, f_lo: f64, f_hi: f64 },

    #[error("ownership gap: {0}")]
    OwnershipGap(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short machine-readable tag, used by the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::InvalidMode { .. } => "invalid_mode",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::InvalidTolerance(_) => "invalid_tolerance",
            Error::InvalidRanks(_) => "invalid_ranks",
            Error::InvalidPartition(_) => "invalid_partition",
            Error::TooLarge(_) => "too_large",
            Error::SingularShift { .. } => "singular_shift",
            Error::OverlappingIntervals { .. } => "overlapping_intervals",
            Error::OwnershipGap(_) => "ownership_gap",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
        }
    }
}
