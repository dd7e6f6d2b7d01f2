//! Error types shared across the crate.

use std::fmt;

/// A single rejected input row, with enough context to fix the file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    /// Source file the row came from ("proposals", "votes", "voters", "panel").
    pub table: String,
    /// 1-based line number in the file (header is line 1).
    pub line: u64,
    /// Offending field name, when attributable to one field.
    pub field: Option<String>,
    pub message: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.field {
            Some(field) => write!(
                f,
                "{} line {}, field `{}`: {}",
                self.table, self.line, field, self.message
            ),
            None => write!(f, "{} line {}: {}", self.table, self.line, self.message),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {table}: {source}")]
    Csv {
        table: String,
        #[source]
        source: csv::Error,
    },

    #[error("{table} header mismatch: expected `{expected}`, found `{found}`")]
    HeaderMismatch {
        table: String,
        expected: String,
        found: String,
    },

    #[error("{} row error(s); first: {}", .0.len(), .0[0])]
    RowErrors(Vec<RowError>),

    #[error("duplicate voters-table row for dao `{dao_id}`, quarter {quarter}")]
    DuplicateVotersRow { dao_id: String, quarter: String },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("rank-deficient design: column `{column}` has no independent variation after demeaning")]
    RankDeficient { column: String },

    #[error("running variable has insufficient interior variation")]
    DegenerateGrid,

    #[error("no candidate cutoff yields an identifiable fit")]
    NoIdentifiableCandidate,

    #[error(
        "within transformation did not converge after {sweeps} sweeps (last change {last_change:e})"
    )]
    DemeanNonConvergence { sweeps: usize, last_change: f64 },

    #[error("clustered inference requires at least 2 clusters, found {found}")]
    TooFewClusters { found: usize },

    #[error("bootstrap for `{spec}` failed in {failures} of {replications} replications (over 50%)")]
    BootstrapUnstable {
        spec: String,
        failures: usize,
        replications: usize,
    },

    #[error("unknown spec `{name}`; known specs: {registry}")]
    UnknownSpec { name: String, registry: String },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
