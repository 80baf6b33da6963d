use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("seeds {0} and {1} coincide within tolerance")]
    DuplicateSeeds(usize, usize),
    #[error("seed {index} at ({x}, {y}) lies outside the domain")]
    SeedOutsideDomain { index: usize, x: f64, y: f64 },
    #[error("non-physical state in cell {cell}: {reason}")]
    NonPhysicalState { cell: usize, reason: String },
    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    SolverDiverged { solver: &'static str, iterations: usize, residual: f64 },
    #[error("singular pressure system with incompatible right-hand side (imbalance {0:.3e})")]
    SingularSystem(f64),
    #[error("remap drove the mass of cell {cell} to {mass:.3e}")]
    NegativeMass { cell: usize, mass: f64 },
    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),
    #[error("invalid Mach number {0} (must be at least 1)")]
    InvalidMach(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed snapshot: {0}")]
    Snapshot(String),
}

impl Error {
    /// Variant name, for machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidDomain(_) => "InvalidDomain",
            Error::DuplicateSeeds(..) => "DuplicateSeeds",
            Error::SeedOutsideDomain { .. } => "SeedOutsideDomain",
            Error::NonPhysicalState { .. } => "NonPhysicalState",
            Error::SolverDiverged { .. } => "SolverDiverged",
            Error::SingularSystem(_) => "SingularSystem",
            Error::NegativeMass { .. } => "NegativeMass",
            Error::UnknownScenario(_) => "UnknownScenario",
            Error::InvalidMach(_) => "InvalidMach",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::Io(_) => "Io",
            Error::Csv(_) => "Csv",
            Error::Snapshot(_) => "Snapshot",
        }
    }

    /// True for failures of the numerical scheme itself, as opposed to bad input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::SolverDiverged { .. }
                | Error::SingularSystem(_)
                | Error::NegativeMass { .. }
                | Error::NonPhysicalState { .. }
        )
    }
}
