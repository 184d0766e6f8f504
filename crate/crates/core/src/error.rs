use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LfmError {
    #[error("tensor quadrature needs {required} nodes, budget is {budget}")]
    BudgetExceeded { required: f64, budget: usize },
    #[error("integrand is not integrable as configured: {0}")]
    NonIntegrable(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("spatial grids differ: {0}")]
    GridMismatch(String),
    #[error("vector field has no Jacobian available")]
    NoJacobian,
    #[error("space Jacobian is singular at tau = {tau}")]
    SingularJacobian { tau: f64 },
    #[error("quadratic slice form is singular at slice {slice} (focal point)")]
    DegenerateSlice { slice: usize },
    #[error("propagator evaluated at a caustic, t = {t}")]
    Caustic { t: f64 },
    #[error("unstable time step: {0}")]
    UnstableStep(String),
    #[error("mass {mass:e} reached the periodic boundary (tolerance {tolerance:e})")]
    BoundaryLeak { mass: f64, tolerance: f64 },
    #[error("kernel oscillation is not resolved by the spatial grid (phase step {phase_step:.3} rad)")]
    UnresolvedKernel { phase_step: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, LfmError>;
