use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure in {context}: {detail}")]
    Numerical { context: &'static str, detail: String },

    #[error("design infeasible: {0}")]
    DesignInfeasible(String),

    #[error("pair is not controllable: controllability matrix rank {rank} < {n}")]
    Uncontrollable { rank: usize, n: usize },

    #[error("no conjugation-closed selection of {r} eigenvalues exists")]
    SelectionInfeasible { r: usize },

    #[error("C*V_r is singular for retained set {retained:?} (condition number {condition:e})")]
    ProjectionInfeasible { retained: Vec<usize>, condition: f64 },

    #[error("simulation diverged at t = {time} s")]
    Divergence { time: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures that mean the requested controller cannot be built.
    pub fn is_design_infeasible(&self) -> bool {
        matches!(
            self,
            Error::DesignInfeasible(_)
                | Error::Uncontrollable { .. }
                | Error::SelectionInfeasible { .. }
                | Error::ProjectionInfeasible { .. }
        )
    }

    pub(crate) fn dim(context: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        Error::Dimension {
            context,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
