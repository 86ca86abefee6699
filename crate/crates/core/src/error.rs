use std::fmt;

/// Broad failure class, used by the command line to pick an exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Category {
    Config,
    Numeric,
    Io,
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::Config => "config",
            Category::Numeric => "numeric",
            Category::Io => "io",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: fields live on different grids")]
    GridMismatch,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("time {t} outside [0, {t_f}]")]
    TimeOutOfRange { t: f64, t_f: f64 },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("positive-modulus interpolation needs node-free states ({0})")]
    NodalState(String),
    #[error("normalization undefined: endpoint amplitudes are anti-collinear at eta = {eta}")]
    Collinear { eta: f64 },
    #[error("empty trust window")]
    EmptyWindow,
    #[error("non-finite value in {what} at x = {x}")]
    NonFinite { what: &'static str, x: f64 },
    #[error("slice {slice} (t = {t}): {source}")]
    Slice {
        slice: usize,
        t: f64,
        #[source]
        source: Box<Error>,
    },
    #[error("eigensolver: {0}")]
    Eigensolver(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn category(&self) -> Category {
        match self {
            Error::InvalidGrid(_)
            | Error::GridMismatch
            | Error::InvalidArgument(_)
            | Error::InvalidSchedule(_)
            | Error::NodalState(_)
            | Error::TimeOutOfRange { .. }
            | Error::Config(_) => Category::Config,
            Error::Collinear { .. }
            | Error::EmptyWindow
            | Error::NonFinite { .. }
            | Error::Eigensolver(_) => Category::Numeric,
            Error::Slice { source, .. } => match source.category() {
                Category::Config => Category::Config,
                _ => Category::Numeric,
            },
            Error::Io(_) => Category::Io,
        }
    }

    /// Slice index for failures raised while designing a protocol.
    pub fn slice(&self) -> Option<usize> {
        match self {
            Error::Slice { slice, .. } => Some(*slice),
            _ => None,
        }
    }

    pub(crate) fn at_slice(self, slice: usize, t: f64) -> Error {
        Error::Slice {
            slice,
            t,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
