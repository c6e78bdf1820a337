use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("unknown parameter `{name}` for environment `{env}`")]
    UnknownParam { env: String, name: String },
    #[error("environment must be reset with a seed before first use")]
    Unseeded,
    #[error("step called after episode end; reset first")]
    StepAfterDone,
    #[error("action {0} is not valid for this environment")]
    InvalidAction(String),
    #[error("cell ({x}, {y}) is outside the {width}x{height} grid")]
    OutOfBounds { x: i64, y: i64, width: usize, height: usize },
    #[error("observation index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("wrapper not applicable: {0}")]
    NotApplicable(String),
    #[error("observation cannot be mapped back to a simulator state: {0}")]
    NotInvertible(String),
    #[error("singular normal equations (ridge = {ridge})")]
    Singular { ridge: f64 },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("missing simulator prediction in correction mode")]
    MissingSimPrediction,
    #[error("estimand undefined: action {0} has zero probability under the behavior policy")]
    UndefinedEstimand(usize),
    #[error("environment `{0}` has no enumerable model")]
    NotEnumerable(String),
    #[error("training budget too small: best normalized score {achieved:.1} never reached {target:.1}")]
    BudgetTooSmall { achieved: f64, target: f64 },
    #[error("expert reference {expert} must exceed random reference {random}")]
    BadReferences { random: f64, expert: f64 },
    #[error("dataset line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("dataset line {line}: format version `{found}` not supported (expected `{expected}`)")]
    Version { line: usize, found: String, expected: String },
    #[error("dataset line {line}: dimension mismatch ({msg})")]
    Dimension { line: usize, msg: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("nothing to report: empty result set")]
    EmptyResults,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
