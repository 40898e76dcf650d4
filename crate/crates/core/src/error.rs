use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the toolkit can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: column `{column}` value {value} is outside its valid range")]
    RangeViolation { row: usize, column: String, value: f64 },
    #[error("row {row}: column `{column}` could not be parsed from `{raw}`")]
    Parse { row: usize, column: String, raw: String },
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("each class needs at least {needed} instances, smallest class has {found}")]
    TooFewInstances { needed: usize, found: usize },
    #[error("release-based split needs at least 4 releases, found {0}")]
    TooFewReleases(usize),
    #[error("training set contains a single class")]
    SingleClassTrainingSet,
    #[error("input contains a single class")]
    SingleClass,
    #[error("minority class has {0} rows, at least 2 are required")]
    MinorityTooSmall(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("a view needs at least 2 columns to split, found {0}")]
    ViewTooSmall(usize),
    #[error("effort vector has {found} entries, expected {expected}")]
    EffortMismatch { expected: usize, found: usize },
    #[error("no labeled rows")]
    NoLabeledRows,
    #[error("linear system is singular")]
    SingularSystem,
    #[error("pool of {found} points exceeds the dense-solve cap of {cap}")]
    PoolTooLarge { found: usize, cap: usize },
    #[error("mixture component {0} lost all responsibility")]
    EmptyCluster(usize),
    #[error("need at least {needed} samples, found {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("need at least {needed} treatments, found {found}")]
    TooFewTreatments { needed: usize, found: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    /// Short failure class written into error rows of result tables.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Io(_) => "Io",
            Error::MissingColumn(_) => "MissingColumn",
            Error::RangeViolation { .. } => "RangeViolation",
            Error::Parse { .. } => "Parse",
            Error::EmptyDataset => "EmptyDataset",
            Error::TooFewInstances { .. } => "TooFewInstances",
            Error::TooFewReleases(_) => "TooFewReleases",
            Error::SingleClassTrainingSet => "SingleClassTrainingSet",
            Error::SingleClass => "SingleClass",
            Error::MinorityTooSmall(_) => "MinorityTooSmall",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::DegenerateInput(_) => "DegenerateInput",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::ViewTooSmall(_) => "ViewTooSmall",
            Error::EffortMismatch { .. } => "EffortMismatch",
            Error::NoLabeledRows => "NoLabeledRows",
            Error::SingularSystem => "SingularSystem",
            Error::PoolTooLarge { .. } => "PoolTooLarge",
            Error::EmptyCluster(_) => "EmptyCluster",
            Error::TooFewSamples { .. } => "TooFewSamples",
            Error::TooFewTreatments { .. } => "TooFewTreatments",
            Error::EmptyInput => "EmptyInput",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::InsufficientSamples(_) => "InsufficientSamples",
            Error::UnknownMethod(_) => "UnknownMethod",
            Error::Config(_) => "Config",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
