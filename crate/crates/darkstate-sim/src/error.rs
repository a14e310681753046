use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("photon truncation n_max must be at least 1, got {0}")]
    InvalidTruncation(usize),

    #[error("basis index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("basis state |{n},{s1}{s2}> outside truncated space (n_max = {n_max})")]
    StateOutOfRange { n: usize, s1: u8, s2: u8, n_max: usize },

    #[error("atom index must be 1 or 2, got {0}")]
    InvalidAtom(usize),

    #[error("rate {name} must be finite and non-negative, got {value}")]
    InvalidRate { name: &'static str, value: f64 },

    #[error("dark state undefined for g1 = g2 = 0")]
    DegenerateCouplings,

    #[error("{what} undefined: denominator is zero")]
    ZeroDenominator { what: &'static str },

    #[error("thermal parameter mu = {0} has no finite positive temperature")]
    UnphysicalTemperature(f64),

    #[error("operator is not Hermitian (max asymmetry {0:.3e})")]
    NonHermitian(f64),

    #[error("density matrix failed validation: {0}")]
    InvalidState(String),

    #[error("state trace {0:.3e} too small to renormalize")]
    DegenerateTrace(f64),

    #[error("integration diverged at t = {t:.6e} (monitor deviation {deviation:.3e})")]
    IntegrationDiverged { t: f64, deviation: f64 },

    #[error("steady state is not unique: null space dimension {multiplicity}")]
    DegenerateSteadyState { multiplicity: usize },

    #[error("steady-state residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    OracleResidual { residual: f64, tol: f64 },

    #[error("threshold scan not bracketed: both ends classify as {class}")]
    NotBracketed { class: String },

    #[error("parameter grid is empty or degenerate: {0}")]
    EmptyGrid(String),

    #[error("linear solve failed: {0}")]
    SingularMatrix(&'static str),

    #[error("fast-path compilation failed: {0}")]
    Compile(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
