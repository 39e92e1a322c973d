use thiserror::Error;

/// Every failure the solver stack can report.
///
/// `is_physical` separates outcomes that are legitimate answers about the
/// model (current too strong, map not contracting) from genuine faults.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GlcError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid contact segment: {0}")]
    InvalidContacts(String),
    #[error("invalid current profile: {0}")]
    InvalidProfile(String),
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(
        "right-hand side is incompatible with the Neumann kernel (relative defect {defect:.3e})"
    )]
    Incompatible { defect: f64 },
    #[error(
        "{method} did not converge: relative residual {residual:.3e} after {iterations} iterations"
    )]
    SolverFailure {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("supercritical current: delta^2 |grad chi|^2 = {max_value:.6} >= 1 at cell {cell}")]
    SupercriticalCurrent { cell: usize, max_value: f64 },
    #[error("corrector diverged after {iterations} iterations (residual {residual:.3e})")]
    CorrectorDiverged { iterations: usize, residual: f64 },
    #[error("delta = {delta:.6} is not below the guard {guard:.6}")]
    DeltaAboveGuard { delta: f64, guard: f64 },
    #[error("fixed-point map is not contracting at iteration {iteration} (ratio {ratio:.4})")]
    NoContraction { iteration: usize, ratio: f64 },
    #[error("iteration limit {max_iter} reached (last increment {increment:.3e})")]
    MaxIterations { max_iter: usize, increment: f64 },
    #[error("eigensolver failed: {0}")]
    EigenFailure(String),
    #[error("evolution blew up at t = {time:.6}")]
    BlowUp { time: f64 },
    #[error("decay fit rejected: {0}")]
    DecayFit(String),
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl GlcError {
    /// True for outcomes that describe the model rather than a defect.
    pub fn is_physical(&self) -> bool {
        matches!(
            self,
            GlcError::SupercriticalCurrent { .. }
                | GlcError::NoContraction { .. }
                | GlcError::CorrectorDiverged { .. }
                | GlcError::DeltaAboveGuard { .. }
        )
    }

    /// Short machine-readable tag used in reports.
    pub fn tag(&self) -> &'static str {
        match self {
            GlcError::InvalidGrid(_) => "InvalidGrid",
            GlcError::InvalidContacts(_) => "InvalidContacts",
            GlcError::InvalidProfile(_) => "InvalidProfile",
            GlcError::GridMismatch => "GridMismatch",
            GlcError::InvalidArgument(_) => "InvalidArgument",
            GlcError::Incompatible { .. } => "Incompatible",
            GlcError::SolverFailure { .. } => "SolverFailure",
            GlcError::SupercriticalCurrent { .. } => "SupercriticalCurrent",
            GlcError::CorrectorDiverged { .. } => "CorrectorDiverged",
            GlcError::DeltaAboveGuard { .. } => "DeltaAboveGuard",
            GlcError::NoContraction { .. } => "NoContraction",
            GlcError::MaxIterations { .. } => "MaxIterations",
            GlcError::EigenFailure(_) => "EigenFailure",
            GlcError::BlowUp { .. } => "BlowUp",
            GlcError::DecayFit(_) => "DecayFit",
            GlcError::Config { .. } => "Config",
            GlcError::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for GlcError {
    fn from(e: std::io::Error) -> Self {
        GlcError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, GlcError>;
