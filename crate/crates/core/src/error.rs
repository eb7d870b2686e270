use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: String, index: usize },

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("mean {mean:e} exceeds tolerance {tol:e}; inverse Laplacian needs a zero-mean source")]
    NonZeroMean { mean: f64, tol: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what} = {value} outside domain ({domain})")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("noise mode {mode} out of range (model has {modes} modes)")]
    ModeOutOfRange { mode: usize, modes: usize },

    #[error("vacuum cell {cell} carries nonzero momentum {momentum:e}")]
    VacuumMomentum { cell: usize, momentum: f64 },

    #[error("time step {dt:e} violates stability limit {limit:e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("divergence {value:e} exceeds limit {limit:e}")]
    DivergenceGrowth { value: f64, limit: f64 },

    #[error("convexity violation: {what} = {value:e} at cell {cell}")]
    Convexity {
        what: &'static str,
        cell: usize,
        value: f64,
    },

    #[error("remainder term `{term}` needs decomposition field `{field}`")]
    MissingDecomposition {
        term: &'static str,
        field: &'static str,
    },

    #[error("solution blew up at t = {time}: {reason}")]
    BlowUp { time: f64, reason: String },

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
