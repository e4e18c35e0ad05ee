use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid sample {index}: {reason}")]
    InvalidSample { index: usize, reason: String },

    #[error("sample {index} has zero trials; proportions are undefined")]
    DegenerateSample { index: usize },

    #[error("a multinomial block needs at least 2 categories, got {0}")]
    InvalidDimension(usize),

    #[error("joint sample space has {cardinality} outcomes, above the cap of {cap}")]
    SpaceTooLarge { cardinality: u128, cap: u64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid probability vector: {0}")]
    InvalidProbability(String),

    #[error("unknown psi function `{name}`; registered: {}", .registered.join(", "))]
    UnknownPsi { name: String, registered: Vec<String> },

    #[error("psi0 = {psi0} lies outside psi limits [{lower}, {upper}]")]
    Domain { psi0: f64, lower: f64, upper: f64 },

    #[error("no sign change on bracket: f({a}) = {fa}, f({b}) = {fb}")]
    Bracket { a: f64, b: f64, fa: f64, fb: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}
