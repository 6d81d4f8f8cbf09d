use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("dimension must be 1, 2 or 3 (got {0})")]
    Dimension(usize),
    #[error("{lengths} lengths given but {cells} cell counts")]
    AxisMismatch { lengths: usize, cells: usize },
    #[error("length along axis {axis} must be positive and finite (got {value})")]
    Length { axis: usize, value: f64 },
    #[error("cell count along axis {axis} must be at least 2 (got {value})")]
    Cells { axis: usize, value: usize },
    #[error("index {index} out of range for {total} interior nodes")]
    IndexOutOfRange { index: usize, total: usize },
    #[error("field has {actual} values but the domain has {expected} interior nodes")]
    FieldLength { expected: usize, actual: usize },
    #[error("fields live on different domains")]
    DomainMismatch,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NonlinearityError {
    #[error("argument must be finite (got {0})")]
    NonFinite(f64),
    #[error("threshold a must be nonnegative and finite (got {0})")]
    Threshold(f64),
    #[error("discontinuity at u = {point} lies outside [-a, a] with a = {a}")]
    DiscontinuityOutsideRange { point: f64, a: f64 },
    #[error("one-sided limits at u = {0} must be finite")]
    NonFiniteLimit(f64),
    #[error("discontinuity points must be strictly increasing")]
    UnorderedDiscontinuities,
    #[error("sampling window u_max = {u_max} must exceed a = {a}")]
    InvalidRange { u_max: f64, a: f64 },
    #[error("at least {min} samples required (got {got})")]
    TooFewSamples { min: usize, got: usize },
    #[error("malformed piecewise table: {0}")]
    Table(String),
    #[error("unknown builtin nonlinearity `{0}`")]
    UnknownBuiltin(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OperatorError {
    #[error("k must be positive (got {0})")]
    NonPositiveK(f64),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(
        "linear solver broke down after {iterations} iterations (relative residual {residual:e})"
    )]
    Breakdown { iterations: usize, residual: f64 },
    #[error("yukawa kernel is singular at r = {0}")]
    Singular(f64),
    #[error("kernel bound check requires a 3D domain (got dim {0})")]
    Unsupported(usize),
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("newton iteration requires a nonlinearity without declared discontinuities")]
    Discontinuous,
    #[error("invalid solver options: {0}")]
    Options(String),
}
