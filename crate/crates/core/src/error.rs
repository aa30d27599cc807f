use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{periods} periods are too few for {needed} sieve coefficients")]
    InsufficientPeriods { periods: usize, needed: usize },

    #[error("rank-deficient design ({context}): reciprocal condition estimate {rcond:.3e}")]
    RankDeficient { context: String, rcond: f64 },

    #[error("firm {firm}: {source}")]
    Firm {
        firm: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{} firm fits failed; first: {}", .0.len(), .0[0])]
    FirmFailures(Vec<Error>),

    #[error("group {group}: {source}")]
    Group {
        group: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("degenerate information criterion: group {group} has zero residual variance")]
    DegenerateIc { group: usize },

    #[error("optimizer did not converge after {iterations} iterations (best objective {objective})")]
    NonConvergence {
        iterations: usize,
        objective: f64,
        best: Vec<f64>,
    },

    #[error("hessian is not positive definite (eigenvalues {eigenvalues:?})")]
    NotPositiveDefinite { eigenvalues: Vec<f64> },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown design `{0}`")]
    UnknownDesign(String),

    #[error("no successful replications")]
    NoSuccessfulReplications,
}

impl Error {
    /// True for failures of the numerical machinery (rank, convergence,
    /// curvature) as opposed to malformed input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::RankDeficient { .. }
            | Error::DegenerateIc { .. }
            | Error::NonConvergence { .. }
            | Error::NotPositiveDefinite { .. }
            | Error::NoSuccessfulReplications => true,
            Error::Firm { source, .. } | Error::Group { source, .. } | Error::Stage { source, .. } => source.is_numerical(),
            Error::FirmFailures(errs) => errs.iter().any(Error::is_numerical),
            _ => false,
        }
    }

    pub(crate) fn for_firm(self, firm: impl Into<String>) -> Self {
        Error::Firm {
            firm: firm.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub(crate) fn for_group(self, group: usize) -> Self {
        Error::Group {
            group,
            source: Box::new(self),
        }
    }
}
