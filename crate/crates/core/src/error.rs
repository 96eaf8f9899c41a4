use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("sphere intersects plane: center distance {distance} < radius {radius}")]
    SphereIntersectsPlane { distance: f64, radius: f64 },
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("planes are not parallel (|n1 . n2| = {0})")]
    PlanesNotParallel(f64),
    #[error("receiver is not strictly inside the slab between the two planes: {0}")]
    SphereOutsideSlab(String),
    #[error("time must be non-negative, got {0}")]
    NonPositiveTime(f64),
    #[error("invalid simulation config: {0}")]
    ConfigInvalid(String),
    #[error("unknown receiver index {index} (environment has {count})")]
    ReceiverUnknown { index: usize, count: usize },
    #[error("invalid topology spec: {0}")]
    SpecInvalid(String),
    #[error("series length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
}
