#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degrees ({0}, {1}, {2}) violate the triangle inequality")]
    TriangleViolation(usize, usize, usize),
    #[error("matrix is not orthogonal (deviation {0:e})")]
    NonOrthogonalRotation(f64),
    #[error("color {color} outside palette of size {palette}")]
    UnknownColor { color: usize, palette: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("chain must contain at least one factor")]
    EmptyChain,
    #[error("evaluation matrix is rank deficient (smallest singular value {0:e})")]
    SingularSystem(f64),
    #[error("point {0} sits at the origin where the radial basis is not differentiable")]
    NonDifferentiablePoint(usize),
    #[error("malformed contraction: {0}")]
    MalformedSpec(String),
    #[error("feature dimension {n} does not exceed target dimension {target}")]
    DimensionTooSmall { n: usize, target: usize },
    #[error("loss {loss:e} exceeded 1e3 times the initial loss {initial:e} at epoch {epoch}")]
    DivergenceDetected {
        epoch: usize,
        loss: f64,
        initial: f64,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
