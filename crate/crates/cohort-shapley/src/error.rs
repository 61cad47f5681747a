use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error at line {line}: {msg}")]
    Csv { line: u64, msg: String },
    #[error("config error{}: {msg}", line_suffix(.line))]
    Config { line: Option<usize>, msg: String },
    #[error("table has no data rows")]
    EmptyTable,
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("column `{0}` not found")]
    MissingColumn(String),
    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column `{column}`: cannot parse `{cell}` as a number")]
    BadNumericCell {
        line: u64,
        column: String,
        cell: String,
    },
    #[error("column `{0}` must be binary (all values 0 or 1)")]
    NonBinaryColumn(String),
    #[error("vector lengths do not match: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("bin edges must be strictly ascending")]
    NonAscendingEdges,
    #[error("binning needs at least two edges")]
    TooFewEdges,
    #[error("quantile bin count must be between 2 and 50, got {0}")]
    BadQuantileCount(usize),
    #[error("column `{0}` has no non-missing values")]
    AllMissing(String),
    #[error("column `{0}` is not continuous")]
    NotContinuous(String),
    #[error("column `{0}` is not categorical")]
    NotCategorical(String),
    #[error("similarity rule for feature `{feature}` does not apply to a {kind} column")]
    RuleKindMismatch { feature: String, kind: &'static str },
    #[error("similarity window for feature `{0}` must be positive")]
    NonPositiveWindow(String),
    #[error("target index {t} out of range for {n} observations")]
    TargetOutOfRange { t: usize, n: usize },
    #[error("feature index {j} out of range for {d} features")]
    FeatureOutOfRange { j: usize, d: usize },
    #[error("feature {0} is already in the subset")]
    FeatureInSubset(usize),
    #[error("exact mode handles at most {limit} features, got {d}; use the Monte Carlo path")]
    ExactLimitExceeded { d: usize, limit: usize },
    #[error("weights must be length {n}, nonnegative, with a positive weight on observation {t}")]
    InvalidWeights { n: usize, t: usize },
    #[error("selection is empty")]
    EmptySelection,
    #[error("group `{0}` selects no observations")]
    EmptyGroup(String),
    #[error("need at least {need} bootstrap replicates, got {got}")]
    TooFewReplicates { need: usize, got: usize },
    #[error("grid dimension {dim}: {msg}")]
    BadGridDimension { dim: usize, msg: String },
    #[error("grid has {points} joint points, over the limit of {limit}")]
    GridTooLarge { points: u128, limit: u64 },
    #[error("grid has {got} values but {want} joint points")]
    GridValuesLength { got: usize, want: usize },
    #[error("grid rows do not describe a product distribution: {0}")]
    NotProductGrid(String),
    #[error("histogram bin width must be positive")]
    NonPositiveBinWidth,
    #[error("arity mismatch: {0}")]
    ArityMismatch(String),
}

fn line_suffix(line: &Option<usize>) -> String {
    match line {
        Some(l) => format!(" at line {l}"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True when the error stems from configuration rather than data.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config { .. }
                | Error::NonAscendingEdges
                | Error::TooFewEdges
                | Error::BadQuantileCount(_)
                | Error::RuleKindMismatch { .. }
                | Error::NonPositiveWindow(_)
                | Error::NonPositiveBinWidth
        )
    }
}
