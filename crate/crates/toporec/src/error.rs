//! Error types for the algebra, curve, and evaluation layers.
//!
//! Three enums mirror the three failure domains:
//!
//! * [`AlgebraError`] — polynomial/series arithmetic and root finding;
//! * [`CurveError`] — loading and validating a spectral curve;
//! * [`EvalError`] — correlator evaluation (budget, truncation, bad inputs).
//!
//! [`EvalError`] wraps the lower layers so engine entry points can return a
//! single error type.

use thiserror::Error;

/// Errors from polynomial, rational-function, and Laurent-series arithmetic.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum AlgebraError {
    /// Root finding was asked for the roots of the zero polynomial.
    #[error("cannot compute roots of the zero polynomial")]
    ZeroPolynomial,
    /// Root finding was asked for the roots of a nonzero constant.
    #[error("polynomial has degree zero; it has no roots")]
    DegreeZero,
    /// The simultaneous root iteration did not converge within its budget.
    #[error("root finding did not converge within {iterations} iterations")]
    NoConvergence {
        /// Iteration budget that was exhausted.
        iterations: usize,
    },
    /// Two series with different expansion centers were combined.
    #[error("series expansion centers differ: {left} vs {right}")]
    CenterMismatch {
        /// Center of the left operand (shown as "re+im i").
        left: String,
        /// Center of the right operand.
        right: String,
    },
    /// Every known coefficient of a divisor series vanishes.
    #[error("division by a series whose known coefficients all vanish")]
    DivisionByZeroSeries,
    /// Series composition requires the inner series to vanish at the center.
    #[error("composition inner series has non-positive valuation {valuation}")]
    ComposeValuation {
        /// Valuation of the offending inner series.
        valuation: i64,
    },
    /// Newton series solving hit a vanishing derivative with no ramified ansatz.
    #[error("Jacobian dF/dw vanishes at the seed; request the ramified branch")]
    SingularJacobian,
    /// The post-check |F(w(t),t)| of a Newton solve exceeded tolerance.
    #[error("Newton series solution residual {residual:e} exceeds tolerance")]
    ResidualTooLarge {
        /// Magnitude of the residual that failed the check.
        residual: f64,
    },
    /// A requested series coefficient lies outside the validity window.
    ///
    /// Signals that the truncation order was too small; callers retry with a
    /// larger order.
    #[error("series coefficient {exponent} is outside the validity window [{lowest}, {cutoff})")]
    WindowMiss {
        /// Requested exponent.
        exponent: i64,
        /// Lowest valid exponent.
        lowest: i64,
        /// One past the highest valid exponent.
        cutoff: i64,
    },
    /// A non-finite sample was encountered during quadrature.
    #[error("non-finite sample encountered in quadrature")]
    NonFinite,
}

/// Errors from loading or validating a spectral curve.
#[derive(Debug, Error)]
pub enum CurveError {
    /// The curve-spec document could not be parsed.
    #[error("curve spec parse error: {0}")]
    ParseError(String),
    /// A zero of dx has multiplicity ≥ 2; the engine requires simple
    /// branch points.
    #[error("branch point at {location} is not simple (multiplicity {multiplicity})")]
    NonSimpleBranchPoint {
        /// Uniformizer coordinate of the offending zero of dx.
        location: String,
        /// Multiplicity of the zero.
        multiplicity: usize,
    },
    /// The number of preimages of a generic value disagrees with the degree.
    #[error("expected {expected} sheets over a generic value, found {found}")]
    SheetCountMismatch {
        /// d2 + 1 from the degrees of x.
        expected: usize,
        /// Number of numerically recovered preimages.
        found: usize,
    },
    /// A point is too close to a branch point for reliable global sheets.
    #[error("point {point} is within {distance:e} of branch point {branch}; use local sheet series")]
    NearBranchPoint {
        /// Offending point.
        point: String,
        /// Distance to the branch point.
        distance: f64,
        /// The branch point.
        branch: String,
    },
    /// Two points that must be distinct coincide.
    #[error("coincident points: {0}")]
    CoincidentPoints(String),
    /// An underlying algebra operation failed.
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// Errors from correlator evaluation.
#[derive(Debug, Error)]
pub enum EvalError {
    /// Order doubling retries were exhausted without a valid residue window.
    #[error("series truncation exhausted after {retries} retries (last order {order})")]
    TruncationExhausted {
        /// Number of retries performed.
        retries: u32,
        /// Truncation order of the final attempt.
        order: usize,
    },
    /// An evaluation point coincides with a branch point.
    #[error("evaluation point {point} coincides with branch point {branch}")]
    BranchPointArgument {
        /// Offending evaluation point.
        point: String,
        /// The branch point it collides with.
        branch: String,
    },
    /// A sheet index outside 1..=d2 was requested.
    #[error("sheet index {index} out of range 1..={d2}")]
    SheetIndexOutOfRange {
        /// Requested index.
        index: usize,
        /// Number of non-physical sheets.
        d2: usize,
    },
    /// The partition enumeration budget was exceeded.
    #[error("partition enumeration budget exceeded: k + h = {total} > {budget}")]
    BudgetExceeded {
        /// Requested k + h.
        total: usize,
        /// Maximum supported k + h.
        budget: usize,
    },
    /// The multi-valent partition recursion budget was exceeded.
    #[error("partition recursion budget exceeded: k + 2h = {total} > {budget}")]
    PartitionBudgetExceeded {
        /// Requested k + 2h.
        total: usize,
        /// Maximum supported k + 2h.
        budget: usize,
    },
    /// Two evaluation points coincide.
    #[error("evaluation points coincide: {0}")]
    CoincidentPoints(String),
    /// The basepoint collides with a branch point or an evaluation point.
    #[error("basepoint {point} collides with {what}")]
    BasepointCollision {
        /// The configured basepoint.
        point: String,
        /// What it collides with.
        what: String,
    },
    /// The curve is not hyperelliptic (d2 ≠ 1) but a d2 = 1 method was used.
    #[error("curve has d2 = {d2}; this method requires d2 = 1")]
    NotHyperelliptic {
        /// Actual d2 of the curve.
        d2: usize,
    },
    /// An underlying curve operation failed.
    #[error(transparent)]
    Curve(#[from] CurveError),
    /// An underlying algebra operation failed.
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

impl EvalError {
    /// True when retrying with a doubled truncation order could help.
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            EvalError::Algebra(AlgebraError::WindowMiss { .. })
                | EvalError::Algebra(AlgebraError::NonFinite)
                | EvalError::Curve(CurveError::Algebra(AlgebraError::WindowMiss { .. }))
                | EvalError::Curve(CurveError::Algebra(AlgebraError::NonFinite))
        )
    }
}
