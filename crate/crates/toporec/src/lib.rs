//! Topological expansion of two-matrix-model correlation functions.
//!
//! This crate computes the coefficients `W_k^(h)` of the 1/N² expansion of
//! non-mixed resolvent correlators for a formal two-matrix model whose
//! spectral curve has genus zero. The curve is given by a rational
//! parametrization `x(z), y(z)` of the Riemann sphere; every correlator is
//! then a rational expression in the parametrizing variable, assembled from
//! residues at the branch points of `x`.
//!
//! Three independent evaluation pipelines are provided and cross-checked:
//!
//! * [`correlators`] — the cubic residue recursion, mutually recursive with
//!   an auxiliary fiber-indexed family;
//! * [`effective`] — a recursion with multi-valent vertices derived from an
//!   effective theory on the curve, self-contained in the correlators it
//!   consumes;
//! * [`diagrams`] — explicit enumeration of the finitely many graphs
//!   contributing at fixed order, each evaluated as an iterated residue.
//!
//! A fourth pipeline, [`onematrix`], implements the classical one-matrix
//! recursion for curves where the second sheet degree is one, serving as an
//! external oracle.
//!
//! All values use the *reduced* normalization: a correlator of `k` points is
//! reported as the scalar coefficient of `∏ dz_i` in the corresponding
//! multi-differential, i.e. poles and symmetry are expressed in the
//! parametrizing coordinates `z_i` themselves.

pub mod algebra;
pub mod correlators;
pub mod curve;
pub mod diagrams;
pub mod effective;
pub mod error;
pub mod onematrix;
pub mod partition;
pub mod report;

use std::fmt::{Debug, Display};

use num_complex::Complex;
use num_traits::{Float, FloatConst};

/// Floating-point scalar the whole crate is generic over.
///
/// The bound collects what the numerics actually use: IEEE semantics with
/// transcendentals ([`Float`]), π and friends ([`FloatConst`]), conversion
/// from literals (`from`, via [`Float`]'s `NumCast` supertrait), and the
/// usual utility traits.
pub trait Real:
    Float + FloatConst + Debug + Display + Send + Sync + 'static
{
}

impl<T> Real for T where T: Float + FloatConst + Debug + Display + Send + Sync + 'static {}

/// Complex number over the default `f64` precision.
pub type C64 = Complex<f64>;

/// Scalar tower over `f64`.
pub type Scalar64 = algebra::Scalar<f64>;

/// Spectral curve over `f64`.
pub type Curve64 = curve::SpectralCurve<f64>;

/// Complex number over `f32` (reduced precision, mostly for size/speed
/// experiments; the shipped tolerances assume `f64`).
pub type C32 = Complex<f32>;

/// Scalar tower over `f32`.
pub type Scalar32 = algebra::Scalar<f32>;

/// Spectral curve over `f32`.
pub type Curve32 = curve::SpectralCurve<f32>;

/// Helper: a complex number of type `F` from two `f64` literals.
pub(crate) fn c_from_f64<F: Real>(re: f64, im: f64) -> Complex<F> {
    Complex::new(
        F::from(re).expect("literal fits the float type"),
        F::from(im).expect("literal fits the float type"),
    )
}
