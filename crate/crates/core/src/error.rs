use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("spheres {0} and {1} overlap or touch")]
    Overlap(usize, usize),
    #[error("non-positive parameter: {0}")]
    NonPositiveParameter(String),
    #[error("empty sphere system")]
    EmptySystem,
    #[error("invalid harmonic arguments: {0}")]
    Domain(String),
    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("translation between coincident centers")]
    SingularTranslation,
    #[error("octree depth {depth}: leaf width {leaf_width} is smaller than the largest sphere diameter {diameter}")]
    Depth {
        depth: u32,
        leaf_width: f64,
        diameter: f64,
    },
    #[error("sphere index {index} out of range for {len} spheres")]
    Index { index: usize, len: usize },
    #[error("perturbed geometry is invalid: {0}")]
    Geometry(Box<Error>),
    #[error("invalid settings: {0}")]
    Settings(String),
    #[error("invalid system file: {0}")]
    Format(String),
}
