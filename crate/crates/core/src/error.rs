use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("design matrix is rank deficient (rank {rank} < {cols} columns)")]
    RankDeficient { rank: usize, cols: usize },

    #[error("not enough observations: n = {n} must exceed p = {p}")]
    DegreesOfFreedom { n: usize, p: usize },

    #[error("IRLS did not converge after {iterations} iterations")]
    Convergence {
        iterations: usize,
        last_beta: Vec<f64>,
    },

    #[error("boundary fit: {0}")]
    Boundary(String),

    #[error("degenerate series: no split has positive pooled variance")]
    DegenerateSeries,

    #[error("series too short: n = {n}, need at least {min}")]
    SeriesTooShort { n: usize, min: usize },

    #[error("unsupported alpha {0}; tabulated levels are 0.10, 0.05 and 0.01")]
    UnsupportedAlpha(f64),

    #[error("changepoint {psi} outside the covariate interior ({lo}, {hi})")]
    PsiOutOfRange { psi: f64, lo: f64, hi: f64 },

    #[error("segmented covariate is constant")]
    DegenerateCovariate,

    #[error("segmented term lies in the null column space")]
    NonIdentifiable,

    #[error("dispersion is zero")]
    DegenerateDispersion,

    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("target power {target} not reachable below n = {max_n}")]
    Unreachable { target: f64, max_n: usize },

    #[error("target power {target} does not exceed the test size {alpha}")]
    TargetBelowSize { target: f64, alpha: f64 },

    #[error("fitted slope difference is zero; changepoint variance undefined")]
    FlatFit,

    #[error("covariance matrix is not positive semidefinite")]
    NotPsd,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Stable machine-readable code used by the HTTP API and JSON reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension_mismatch",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::DegreesOfFreedom { .. } => "degrees_of_freedom",
            Error::Convergence { .. } => "no_convergence",
            Error::Boundary(_) => "boundary_fit",
            Error::DegenerateSeries => "degenerate_series",
            Error::SeriesTooShort { .. } => "series_too_short",
            Error::UnsupportedAlpha(_) => "unsupported_alpha",
            Error::PsiOutOfRange { .. } => "psi_out_of_range",
            Error::DegenerateCovariate => "degenerate_covariate",
            Error::NonIdentifiable => "non_identifiable",
            Error::DegenerateDispersion => "degenerate_dispersion",
            Error::Parse { .. } => "parse_error",
            Error::Unreachable { .. } => "unreachable_target",
            Error::TargetBelowSize { .. } => "target_below_size",
            Error::FlatFit => "flat_fit",
            Error::NotPsd => "not_psd",
            Error::Config(_) => "configuration",
            Error::InvalidInput(_) => "invalid_input",
        }
    }
}
