use thiserror::Error;

/// Failure modes shared across the solver pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("no positive root of the scalar-flat radius equation for S^{p} x S^{q}")]
    NoScalarFlatRadii { p: usize, q: usize },
    #[error("degenerate link: S1 vanishes for both orientations")]
    DegenerateLink,
    #[error("invalid order r = {r} for {len} values")]
    InvalidOrder { r: usize, len: usize },
    #[error("unsupported factor: {0}")]
    UnsupportedFactor(String),
    #[error("forbidden weight exponent m = {m}: {reason}")]
    ForbiddenWeight { m: f64, reason: String },
    #[error("mode budget {budget} exhausted before finding an admissible gap above 2")]
    BudgetExceeded { budget: usize },
    #[error("discrete eigenproblem failed: {0}")]
    SolverFailure(String),
    #[error("repeated indicial root for mu = {mu}")]
    DegenerateRoot { mu: f64 },
    #[error("tail integral diverges for exponent {exponent}")]
    QuadratureUnderflow { exponent: f64 },
    #[error("field has no mode profiles")]
    MissingProfiles,
    #[error("field has no grid values")]
    MissingValues,
    #[error("normal graph is not immersed: {0}")]
    ImmersionFailure(String),
    #[error("tangent block is rank deficient at node {0:?}")]
    NormalDegeneracy([usize; 3]),
    #[error("Picard iteration did not converge after {iterations} steps")]
    NonConvergence { iterations: usize, ratios: Vec<f64>, updates: Vec<f64> },
    #[error("cone is not unstable (mu_M = {mu_m})")]
    NotUnstable { mu_m: f64 },
    #[error("zero denominator in Rayleigh quotient")]
    ZeroDenominator,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("artifact i/o: {0}")]
    Artifact(String),
}

impl Error {
    /// Numerical failures map to exit status 2, everything else is a setup problem.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SolverFailure(_)
                | Error::DegenerateRoot { .. }
                | Error::QuadratureUnderflow { .. }
                | Error::ImmersionFailure(_)
                | Error::NormalDegeneracy(_)
                | Error::NonConvergence { .. }
                | Error::ZeroDenominator
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
