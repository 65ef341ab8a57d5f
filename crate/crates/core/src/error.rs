use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown feature \"{0}\"")]
    UnknownFeature(String),

    #[error("missing numeric feature \"{0}\"")]
    MissingFeature(String),

    #[error("invalid value for feature \"{name}\": {value}")]
    InvalidFeatureValue { name: String, value: f64 },

    #[error("stars out of range: {0} (expected 1-5)")]
    StarsOutOfRange(i64),

    #[error("rating class out of range: {0} (expected 1-5)")]
    ClassOutOfRange(i64),

    #[error("duplicate property id \"{0}\"")]
    DuplicateId(String),

    #[error("unknown property \"{0}\"")]
    UnknownProperty(String),

    #[error("hotel \"{0}\" has no official stars")]
    HotelWithoutStars(String),

    #[error("feature vector has {got} entries, schema expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value at feature index {0}")]
    NonFinite(usize),

    #[error("training labels contain a single class")]
    SingleClass,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
