use core::fmt;

/// Errors raised by the estimation core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Spatial dimension outside the supported set {1, 2}.
    UnsupportedDimension(usize),
    /// Resolution level too deep for the cell index space.
    LevelTooDeep(u32),
    /// Basis index outside `0..len`.
    IndexOutOfRange { index: usize, len: usize },
    /// A point lies outside the half-open unit cube.
    PointOutsideDomain,
    /// Two objects that must share a dimension or level do not.
    ShapeMismatch(&'static str),
    /// A size that must be a resolution prefix `2^(i d)` (or 0) is not.
    NotAdmissible(usize),
    /// A scalar argument is outside its allowed range.
    InvalidParameter(&'static str),
    /// A non-finite value was produced or supplied.
    NonFinite(&'static str),
    /// A projection weight is not bounded away from zero.
    WeightNotPositive { min: f64 },
    /// The Gram matrix could not be factorized.
    SingularGram,
    /// Too few observations for the requested order.
    SampleTooSmall { needed: usize, found: usize },
    /// Sample exceeds the guard of a brute-force routine.
    SampleTooLarge { limit: usize, found: usize },
    /// Kernel order not supported by the routine.
    UnsupportedOrder(usize),
    /// A kernel failed the degeneracy check.
    NotDegenerate { residual: f64 },
    /// Discrete space too large for exhaustive enumeration.
    SpaceTooLarge { limit: usize, found: usize },
    /// Affine clamping would shrink a function to (near) constant.
    ClampCollapse(&'static str),
    /// A fitted nuisance estimate had no usable observations.
    EmptySubsample(&'static str),
    /// Truncation grid does not match the projection dimension.
    GridMismatch,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::UnsupportedDimension(d) => write!(f, "unsupported dimension {d}, expected 1 or 2"),
            Error::LevelTooDeep(l) => write!(f, "resolution level {l} is too deep"),
            Error::IndexOutOfRange { index, len } => {
                write!(f, "basis index {index} out of range for basis of size {len}")
            }
            Error::PointOutsideDomain => write!(f, "point outside [0,1)^d"),
            Error::ShapeMismatch(what) => write!(f, "shape mismatch: {what}"),
            Error::NotAdmissible(size) => write!(f, "{size} is not an admissible prefix size"),
            Error::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::WeightNotPositive { min } => {
                write!(f, "weight not bounded away from zero (min {min})")
            }
            Error::SingularGram => write!(f, "Gram matrix is not positive definite"),
            Error::SampleTooSmall { needed, found } => {
                write!(f, "sample of size {found} is smaller than required {needed}")
            }
            Error::SampleTooLarge { limit, found } => {
                write!(f, "sample of size {found} exceeds the limit {limit}")
            }
            Error::UnsupportedOrder(m) => write!(f, "kernel order {m} is not supported"),
            Error::NotDegenerate { residual } => {
                write!(f, "kernel is not degenerate (residual {residual:e})")
            }
            Error::SpaceTooLarge { limit, found } => {
                write!(f, "discrete space of size {found} exceeds the limit {limit}")
            }
            Error::ClampCollapse(what) => write!(f, "clamping collapses {what} to a constant"),
            Error::EmptySubsample(what) => write!(f, "no observations available to fit {what}"),
            Error::GridMismatch => write!(f, "truncation grid does not match the projection"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
