//! Series and polynomial arithmetic underlying every residue computation:
//! nested truncated Laurent series ([`scalar`]), dense polynomials and
//! rational functions with root finding ([`poly`]), implicit series
//! solutions by Newton iteration ([`newton`]), and contour quadrature for
//! cross-checks ([`quad`]).

pub mod newton;
pub mod poly;
pub mod quad;
pub mod scalar;

pub use newton::newton_series_solve;
pub use poly::{poly_roots, Polynomial, RationalFunction};
pub use quad::{residue_quadrature, DEFAULT_QUADRATURE_SAMPLES};
pub use scalar::{compose, rel_diff, LaurentSeries, Scalar, VarGen, DIV_VALUATION_RTOL};

use crate::error::AlgebraError;
use crate::Real;

/// Binary operations accepted by [`series_arith`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesOp {
    /// Coefficient-wise sum on the intersection of validity windows.
    Add,
    /// Coefficient-wise difference on the intersection of validity windows.
    Sub,
    /// Cauchy product with the truncation-aware window rule.
    Mul,
    /// Product with the inverse; the divisor's valuation is detected from
    /// its coefficients.
    Div,
    /// Substitution of the right series (which must vanish at its center)
    /// into the left one.
    Compose,
}

/// Combines two Laurent series with explicit window tracking.
///
/// Operands in the same variable must share an expansion center
/// ([`AlgebraError::CenterMismatch`] otherwise); operands in different
/// variables nest, the younger variable staying outermost. The result is
/// returned as a [`Scalar`] because an operation can collapse a series to a
/// constant (for example `(1/t) · t`).
pub fn series_arith<F: Real>(
    a: &LaurentSeries<F>,
    b: &LaurentSeries<F>,
    op: SeriesOp,
) -> Result<Scalar<F>, AlgebraError> {
    if a.var() == b.var() && op != SeriesOp::Compose {
        let (ca, cb) = (a.center(), b.center());
        if ca.re != cb.re || ca.im != cb.im {
            return Err(AlgebraError::CenterMismatch {
                left: format!("{:?}", ca),
                right: format!("{:?}", cb),
            });
        }
    }
    let sa = Scalar::from_series(a.clone());
    let sb = Scalar::from_series(b.clone());
    match op {
        SeriesOp::Add => Ok(sa.add(&sb)),
        SeriesOp::Sub => Ok(sa.sub(&sb)),
        SeriesOp::Mul => Ok(sa.mul(&sb)),
        SeriesOp::Div => sa.div(&sb),
        SeriesOp::Compose => compose(a, &sb),
    }
}
