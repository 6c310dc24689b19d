use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("frame columns are linearly dependent (smallest singular value {sigma_min:.3e})")]
    RankDeficient { sigma_min: f64 },

    #[error("frame is not Lagrangian: |X^tY - Y^tX| = {residual:.3e}")]
    NotLagrangian { residual: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("eigensolver failed: {0}")]
    EigensolverFailure(String),

    #[error("refinement exhausted near t = {t}")]
    RefinementExhausted { t: f64 },

    #[error("ambiguous crossing near t = {t}: {reason}")]
    AmbiguousCrossing { t: f64, reason: String },

    #[error("paths do not meet at the junction (rho = {distance:.3e})")]
    JunctionMismatch { distance: f64 },

    #[error("homotopy endpoints move with s (slice s = {s}, rho = {distance:.3e})")]
    EndpointsNotFixed { s: f64, distance: f64 },

    #[error("no crossing: the subspaces intersect trivially at t = {t}")]
    NoCrossing { t: f64 },

    #[error("invalid boundary condition: {0}")]
    InvalidBoundaryCondition(String),

    #[error("integrator failure: {0}")]
    IntegratorFailure(String),

    #[error("non-degeneracy assumption fails: {0}")]
    DegenerateProblem(String),

    #[error("Maslov box does not close: edge indices {edges:?} sum to {sum}")]
    BoxNotClosed { edges: Vec<i64>, sum: i64 },

    #[error("lambda = {lambda} is not below the essential spectrum floor {floor}")]
    LambdaNotBelowSpectrum { lambda: f64, floor: f64 },

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("truncation insufficient: index {at_l} at L = {l} but {at_2l} at 2L")]
    TruncationInsufficient { l: f64, at_l: i64, at_2l: i64 },

    #[error("discretisation unstable: {count_n} negative eigenvalues at N = {n}, {count_2n} at 2N")]
    DiscretizationUnstable { n: usize, count_n: usize, count_2n: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}
