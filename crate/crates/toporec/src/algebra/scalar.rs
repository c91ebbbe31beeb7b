//! Nested truncated Laurent series — the scalar type of every residue
//! computation.
//!
//! A [`Scalar`] is either a plain complex number (level 0) or a truncated
//! Laurent series whose coefficients are themselves scalars. Each series
//! level carries a numeric *variable id*; ids are allocated monotonically by
//! [`VarGen`], so an id doubles as a nesting timestamp: arithmetic between
//! series in different variables treats the smaller id as a constant
//! coefficient of the larger. This lets nested residues (series whose
//! coefficients depend on outer expansion variables) fall out of ordinary
//! `+ - * /` without any global bookkeeping.
//!
//! # Validity windows
//!
//! A [`LaurentSeries`] stores coefficients for exponents
//! `lowest .. lowest + coeffs.len()`. Exponents **below** `lowest` are exact
//! zeros; exponents **at or above** the cutoff are unknown. Arithmetic never
//! silently extends validity:
//!
//! * `a + b` — window `[min(l1,l2), min(c1,c2))`;
//! * `a * b` — window `[l1+l2, min(c1+l2, c2+l1))`;
//! * `1 / b` — valuation `v` detected from the coefficients, window
//!   `[-v, c - 2v)`.
//!
//! Extracting a coefficient outside the window raises
//! [`AlgebraError::WindowMiss`], the signal for callers to retry at a larger
//! truncation order.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex;

use crate::error::AlgebraError;
use crate::Real;

/// Relative threshold below which a leading series coefficient is treated as
/// an exact zero when detecting the valuation of a divisor.
///
/// Exact zero detection is impossible in floating point: cancellation leaves
/// residues around 1e-16 relative. 1e-11 leaves three orders of headroom
/// above that noise floor while staying far below any genuine coefficient;
/// a wrong call is caught by the order-doubling retry loop upstream.
pub const DIV_VALUATION_RTOL: f64 = 1e-11;

/// Allocator of series variable ids.
///
/// Ids increase monotonically, so a variable created later (an inner residue)
/// always has a larger id than every variable alive when it was created.
#[derive(Debug, Default)]
pub struct VarGen(std::cell::Cell<u32>);

impl VarGen {
    /// Creates a generator starting at id 1 (0 is reserved for raw cached
    /// series that are re-tagged before use).
    pub fn new() -> Self {
        VarGen(std::cell::Cell::new(1))
    }

    /// Returns a fresh variable id, larger than all previously returned ones.
    pub fn fresh(&self) -> u32 {
        let v = self.0.get();
        self.0.set(v + 1);
        v
    }
}

/// One level of a scalar tower: a truncated Laurent series in the variable
/// `var`, expanded around `center`, with [`Scalar`] coefficients.
///
/// Invariants: `coeffs` is non-empty; every coefficient's top-level variable
/// id is strictly smaller than `var`; coefficients below `lowest` are exact
/// zeros of the represented germ.
#[derive(Debug, Clone)]
pub struct LaurentSeries<F: Real> {
    var: u32,
    center: Complex<F>,
    lowest: i64,
    coeffs: Vec<Scalar<F>>,
}

/// A complex number, or a truncated Laurent series over scalars.
///
/// Cloning is cheap: series levels are reference-counted.
#[derive(Debug, Clone)]
pub enum Scalar<F: Real> {
    /// Level 0: an ordinary complex number.
    C(Complex<F>),
    /// Level n ≥ 1: a series whose coefficients are level < n scalars.
    S(Arc<LaurentSeries<F>>),
}

impl<F: Real> LaurentSeries<F> {
    /// Builds a series, trimming exact-zero coefficients from the bottom of
    /// the window (they carry no information: below-`lowest` exponents are
    /// exact zeros by convention).
    pub fn new(var: u32, center: Complex<F>, lowest: i64, coeffs: Vec<Scalar<F>>) -> Self {
        assert!(!coeffs.is_empty(), "series must have at least one coefficient");
        let mut s = LaurentSeries { var, center, lowest, coeffs };
        s.trim();
        s
    }

    /// The series `center + t` in a fresh variable `var`, valid to
    /// `t^order` (exclusive): the local coordinate seed for residues.
    pub fn identity_seed(var: u32, center: Complex<F>, order: usize) -> Self {
        assert!(order >= 2, "seed order must be at least 2");
        let mut coeffs = vec![Scalar::zero(); order];
        coeffs[0] = Scalar::C(center);
        coeffs[1] = Scalar::one();
        LaurentSeries::new(var, center, 0, coeffs)
    }

    /// Variable id of this level.
    pub fn var(&self) -> u32 {
        self.var
    }

    /// Expansion center of this level.
    pub fn center(&self) -> Complex<F> {
        self.center
    }

    /// Lowest valid exponent.
    pub fn lowest(&self) -> i64 {
        self.lowest
    }

    /// One past the highest valid exponent.
    pub fn cutoff(&self) -> i64 {
        self.lowest + self.coeffs.len() as i64
    }

    /// Coefficients for exponents `lowest .. cutoff`.
    pub fn coeffs(&self) -> &[Scalar<F>] {
        &self.coeffs
    }

    /// Returns a copy with a different variable id (used to re-tag cached
    /// series onto a freshly allocated residue variable). Coefficients are
    /// shared, which is sound because they do not contain `var`.
    pub fn with_var(&self, var: u32) -> Self {
        LaurentSeries { var, center: self.center, lowest: self.lowest, coeffs: self.coeffs.clone() }
    }

    fn trim(&mut self) {
        let mut skip = 0;
        while skip + 1 < self.coeffs.len() && self.coeffs[skip].is_c_zero() {
            skip += 1;
        }
        if skip > 0 {
            self.coeffs.drain(..skip);
            self.lowest += skip as i64;
        }
    }

    /// Coefficient at exponent `e`: stored value, exact zero below the
    /// window, `None` at or above the cutoff (unknown).
    fn coeff_at(&self, e: i64) -> Option<Scalar<F>> {
        if e < self.lowest {
            Some(Scalar::zero())
        } else if e < self.cutoff() {
            Some(self.coeffs[(e - self.lowest) as usize].clone())
        } else {
            None
        }
    }
}

impl<F: Real> Scalar<F> {
    /// The exact zero.
    pub fn zero() -> Self {
        Scalar::C(Complex::new(F::zero(), F::zero()))
    }

    /// The exact one.
    pub fn one() -> Self {
        Scalar::C(Complex::new(F::one(), F::zero()))
    }

    /// Wraps a complex number.
    pub fn from_c(c: Complex<F>) -> Self {
        Scalar::C(c)
    }

    /// Wraps a series level.
    pub fn from_series(s: LaurentSeries<F>) -> Self {
        Scalar::S(Arc::new(s))
    }

    /// True exactly for the level-0 value 0 + 0i. Series that merely *look*
    /// zero on their window are not exact zeros (their tails are unknown).
    pub fn is_c_zero(&self) -> bool {
        matches!(self, Scalar::C(c) if c.re == F::zero() && c.im == F::zero())
    }

    /// The level-0 value, if this scalar is one.
    pub fn level0(&self) -> Option<Complex<F>> {
        match self {
            Scalar::C(c) => Some(*c),
            Scalar::S(_) => None,
        }
    }

    /// The series level, if this scalar is one.
    pub fn as_series(&self) -> Option<&LaurentSeries<F>> {
        match self {
            Scalar::C(_) => None,
            Scalar::S(s) => Some(s),
        }
    }

    /// Largest absolute value among all level-0 coefficients of the tower.
    pub fn max_abs(&self) -> F {
        match self {
            Scalar::C(c) => c.norm(),
            Scalar::S(s) => s
                .coeffs
                .iter()
                .map(|c| c.max_abs())
                .fold(F::zero(), |a, b| if b > a { b } else { a }),
        }
    }

    /// True when every level-0 coefficient is finite.
    pub fn is_finite(&self) -> bool {
        match self {
            Scalar::C(c) => c.re.is_finite() && c.im.is_finite(),
            Scalar::S(s) => s.coeffs.iter().all(|c| c.is_finite()),
        }
    }

    /// Coefficient of `t_var^e` where `t_var` is the variable with id `var`.
    ///
    /// A scalar whose top variable differs from `var` is constant with
    /// respect to it (ids are allocated monotonically, so an inner variable
    /// can never appear below an outer one): its coefficient is itself at
    /// `e = 0` and exact zero elsewhere.
    pub fn coefficient(&self, var: u32, e: i64) -> Result<Scalar<F>, AlgebraError> {
        let s = match self {
            Scalar::C(_) => {
                return Ok(if e == 0 { self.clone() } else { Scalar::zero() });
            }
            Scalar::S(s) => s,
        };
        assert!(
            s.var <= var,
            "inner variable {} escaped its residue extraction (requested {var})",
            s.var
        );
        if s.var != var {
            return Ok(if e == 0 { self.clone() } else { Scalar::zero() });
        }
        s.coeff_at(e).ok_or(AlgebraError::WindowMiss {
            exponent: e,
            lowest: s.lowest,
            cutoff: s.cutoff(),
        })
    }

    /// Coefficient of the simple pole in the variable `var` — the residue of
    /// `self d t_var` at the expansion center.
    pub fn residue(&self, var: u32) -> Result<Scalar<F>, AlgebraError> {
        self.coefficient(var, -1)
    }

    /// Structural fingerprint: equal values produced by identical call paths
    /// hash equally. Used as a memoization key component.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.hash_into(&mut h);
        h.finish()
    }

    fn hash_into(&self, h: &mut impl Hasher) {
        fn bits<F: Real>(x: F) -> u64 {
            let v = x.to_f64().unwrap_or(f64::NAN);
            // Normalize -0.0 so it fingerprints like 0.0.
            if v == 0.0 { 0u64 } else { v.to_bits() }
        }
        match self {
            Scalar::C(c) => {
                0u8.hash(h);
                bits(c.re).hash(h);
                bits(c.im).hash(h);
            }
            Scalar::S(s) => {
                1u8.hash(h);
                s.var.hash(h);
                bits(s.center.re).hash(h);
                bits(s.center.im).hash(h);
                s.lowest.hash(h);
                s.coeffs.len().hash(h);
                for c in &s.coeffs {
                    c.hash_into(h);
                }
            }
        }
    }

    fn add_impl(&self, other: &Self) -> Self {
        match (self, other) {
            (Scalar::C(a), Scalar::C(b)) => Scalar::C(a + b),
            (Scalar::S(s), c @ Scalar::C(_)) | (c @ Scalar::C(_), Scalar::S(s)) => {
                if c.is_c_zero() {
                    return Scalar::S(s.clone());
                }
                add_constant(s, c)
            }
            (Scalar::S(a), Scalar::S(b)) => {
                if a.var == b.var {
                    debug_assert_eq!(
                        (a.center.re, a.center.im),
                        (b.center.re, b.center.im),
                        "same variable id with different centers"
                    );
                    add_same_var(a, b)
                } else if a.var > b.var {
                    add_constant(a, other)
                } else {
                    add_constant(b, self)
                }
            }
        }
    }

    fn mul_impl(&self, other: &Self) -> Self {
        if self.is_c_zero() || other.is_c_zero() {
            return Scalar::zero();
        }
        match (self, other) {
            (Scalar::C(a), Scalar::C(b)) => Scalar::C(a * b),
            (Scalar::S(s), c @ Scalar::C(_)) | (c @ Scalar::C(_), Scalar::S(s)) => scale(s, c),
            (Scalar::S(a), Scalar::S(b)) => {
                if a.var == b.var {
                    mul_same_var(a, b)
                } else if a.var > b.var {
                    scale(a, other)
                } else {
                    scale(b, self)
                }
            }
        }
    }

    /// Negation.
    pub fn neg_impl(&self) -> Self {
        match self {
            Scalar::C(c) => Scalar::C(-c),
            Scalar::S(s) => Scalar::S(Arc::new(LaurentSeries {
                var: s.var,
                center: s.center,
                lowest: s.lowest,
                coeffs: s.coeffs.iter().map(|c| c.neg_impl()).collect(),
            })),
        }
    }

    /// Multiplicative inverse.
    ///
    /// For a series, the valuation is detected from the stored coefficients
    /// using [`DIV_VALUATION_RTOL`]; the result window is `[-v, c - 2v)`.
    pub fn inv(&self) -> Result<Self, AlgebraError> {
        match self {
            Scalar::C(c) => {
                if self.is_c_zero() {
                    Err(AlgebraError::DivisionByZeroSeries)
                } else {
                    Ok(Scalar::C(Complex::new(F::one(), F::zero()) / c))
                }
            }
            Scalar::S(s) => {
                let m = Scalar::S(s.clone()).max_abs();
                if m == F::zero() {
                    return Err(AlgebraError::DivisionByZeroSeries);
                }
                let thresh = m * F::from(DIV_VALUATION_RTOL).unwrap();
                let vi = s
                    .coeffs
                    .iter()
                    .position(|c| c.max_abs() > thresh)
                    .ok_or(AlgebraError::DivisionByZeroSeries)?;
                let val_exp = s.lowest + vi as i64;
                let b: &[Scalar<F>] = &s.coeffs[vi..];
                let n = b.len();
                let b0_inv = b[0].inv()?;
                let mut r: Vec<Scalar<F>> = Vec::with_capacity(n);
                r.push(b0_inv.clone());
                for k in 1..n {
                    let mut acc = Scalar::zero();
                    for j in 1..=k {
                        let term = b[j].mul_impl(&r[k - j]);
                        acc = acc.add_impl(&term);
                    }
                    r.push(acc.neg_impl().mul_impl(&b0_inv));
                }
                Ok(Scalar::from_series(LaurentSeries::new(
                    s.var, s.center, -val_exp, r,
                )))
            }
        }
    }

    /// Division `self / other`.
    pub fn div(&self, other: &Self) -> Result<Self, AlgebraError> {
        Ok(self.mul_impl(&other.inv()?))
    }

    /// Integer power (small exponents; negative via inversion).
    pub fn powi(&self, e: i32) -> Result<Self, AlgebraError> {
        if e < 0 {
            return self.inv()?.powi(-e);
        }
        let mut acc = Scalar::one();
        for _ in 0..e {
            acc = acc.mul_impl(self);
        }
        Ok(acc)
    }
}

/// Adds a scalar that is constant with respect to `s.var` (a plain complex
/// number or a series in a strictly smaller variable).
fn add_constant<F: Real>(s: &Arc<LaurentSeries<F>>, c: &Scalar<F>) -> Scalar<F> {
    let cutoff = s.cutoff();
    if 0 >= cutoff {
        // The constant falls in the unknown region: it cannot contribute.
        return Scalar::S(s.clone());
    }
    let lowest = s.lowest.min(0);
    let mut coeffs = Vec::with_capacity((cutoff - lowest) as usize);
    for e in lowest..cutoff {
        let mut v = s.coeff_at(e).expect("within window");
        if e == 0 {
            v = v.add_impl(c);
        }
        coeffs.push(v);
    }
    Scalar::from_series(LaurentSeries::new(s.var, s.center, lowest, coeffs))
}

fn add_same_var<F: Real>(a: &LaurentSeries<F>, b: &LaurentSeries<F>) -> Scalar<F> {
    let lowest = a.lowest.min(b.lowest);
    let cutoff = a.cutoff().min(b.cutoff());
    debug_assert!(lowest < cutoff);
    let mut coeffs = Vec::with_capacity((cutoff - lowest) as usize);
    for e in lowest..cutoff {
        let va = a.coeff_at(e).unwrap_or_else(Scalar::zero);
        let vb = b.coeff_at(e).unwrap_or_else(Scalar::zero);
        coeffs.push(va.add_impl(&vb));
    }
    Scalar::from_series(LaurentSeries::new(a.var, a.center, lowest, coeffs))
}

/// Multiplies every coefficient by a scalar constant with respect to `s.var`.
fn scale<F: Real>(s: &Arc<LaurentSeries<F>>, c: &Scalar<F>) -> Scalar<F> {
    Scalar::from_series(LaurentSeries::new(
        s.var,
        s.center,
        s.lowest,
        s.coeffs.iter().map(|x| x.mul_impl(c)).collect(),
    ))
}

fn mul_same_var<F: Real>(a: &LaurentSeries<F>, b: &LaurentSeries<F>) -> Scalar<F> {
    let lowest = a.lowest + b.lowest;
    let cutoff = (a.cutoff() + b.lowest).min(b.cutoff() + a.lowest);
    let n = (cutoff - lowest) as usize;
    debug_assert!(n >= 1);
    let mut coeffs = vec![Scalar::<F>::zero(); n];
    for (i, ca) in a.coeffs.iter().enumerate() {
        if ca.is_c_zero() {
            continue;
        }
        for (j, cb) in b.coeffs.iter().enumerate() {
            if i + j >= n {
                break;
            }
            if cb.is_c_zero() {
                continue;
            }
            let prod = ca.mul_impl(cb);
            coeffs[i + j] = coeffs[i + j].add_impl(&prod);
        }
    }
    Scalar::from_series(LaurentSeries::new(a.var, a.center, lowest, coeffs))
}

/// Substitutes `inner` for the variable of `outer`: returns
/// `Σ_e outer_e · inner^e`.
///
/// `inner` must have positive valuation in its own top variable (it vanishes
/// where `outer` is centered), otherwise [`AlgebraError::ComposeValuation`].
pub fn compose<F: Real>(
    outer: &LaurentSeries<F>,
    inner: &Scalar<F>,
) -> Result<Scalar<F>, AlgebraError> {
    let is = match inner {
        Scalar::C(_) => return Err(AlgebraError::ComposeValuation { valuation: 0 }),
        Scalar::S(s) => s,
    };
    let m = inner.max_abs();
    let thresh = m * F::from(DIV_VALUATION_RTOL).unwrap();
    let vi = is.coeffs.iter().position(|c| c.max_abs() > thresh);
    let v = match vi {
        Some(i) => is.lowest + i as i64,
        None => i64::MAX,
    };
    if v <= 0 {
        return Err(AlgebraError::ComposeValuation { valuation: v });
    }
    let l = outer.lowest;
    let c1 = outer.cutoff();
    let c2 = is.cutoff();
    // Unknown-tail bounds: the first unknown term of `outer` enters at
    // v*c1; the unknown tail of `inner` enters at c2 + v*(min(l,1) - 1).
    let cut = (v * c1).min(c2 + v * (l.min(1) - 1));

    // Non-negative part by Horner, highest exponent first.
    let mut p = Scalar::zero();
    let hi = c1 - 1;
    if hi >= 0 {
        for e in (0..=hi).rev() {
            p = p.mul_impl(inner);
            if let Some(ce) = outer.coeff_at(e) {
                p = p.add_impl(&ce);
            }
        }
    }
    // Negative (Laurent) part via powers of the inverse.
    if l < 0 {
        let ii = inner.inv()?;
        let mut pw = ii.clone();
        for e in 1..=(-l) {
            if let Some(ce) = outer.coeff_at(-e) {
                if !ce.is_c_zero() {
                    p = p.add_impl(&ce.mul_impl(&pw));
                }
            }
            if e < -l {
                pw = pw.mul_impl(&ii);
            }
        }
    }
    // Clamp the result window to the composition bound.
    clamp_cutoff(p, is.var, is.center, cut)
}

/// Restricts a scalar's top-level window in `var` to end at `cut`. A scalar
/// that is constant with respect to `var` is wrapped into an explicit
/// finite-window series so the bound is not lost. An empty window is a
/// [`AlgebraError::WindowMiss`].
fn clamp_cutoff<F: Real>(
    s: Scalar<F>,
    var: u32,
    center: Complex<F>,
    cut: i64,
) -> Result<Scalar<F>, AlgebraError> {
    let wrap_constant = |k: Scalar<F>| -> Result<Scalar<F>, AlgebraError> {
        if cut <= 0 {
            return Err(AlgebraError::WindowMiss { exponent: 0, lowest: 0, cutoff: cut });
        }
        let mut coeffs = vec![Scalar::zero(); cut as usize];
        coeffs[0] = k;
        Ok(Scalar::from_series(LaurentSeries::new(var, center, 0, coeffs)))
    };
    match &s {
        Scalar::C(_) => wrap_constant(s),
        Scalar::S(t) if t.var != var => wrap_constant(s),
        Scalar::S(t) => {
            if t.cutoff() <= cut {
                return Ok(s);
            }
            if cut <= t.lowest {
                return Err(AlgebraError::WindowMiss {
                    exponent: t.lowest,
                    lowest: t.lowest,
                    cutoff: cut,
                });
            }
            let keep = (cut - t.lowest) as usize;
            Ok(Scalar::from_series(LaurentSeries::new(
                t.var,
                t.center,
                t.lowest,
                t.coeffs[..keep.min(t.coeffs.len())].to_vec(),
            )))
        }
    }
}

/// Relative difference between two scalars: `|a-b| / max(|a|,|b|)` using the
/// tower-wide maximum coefficient magnitude, 0 when both vanish.
pub fn rel_diff<F: Real>(a: &Scalar<F>, b: &Scalar<F>) -> F {
    let d = a.sub(b).max_abs();
    let m = a.max_abs().max(b.max_abs());
    if m == F::zero() {
        F::zero()
    } else {
        d / m
    }
}

impl<F: Real> Scalar<F> {
    /// Addition (also available via `+` on references).
    pub fn add(&self, other: &Self) -> Self {
        self.add_impl(other)
    }

    /// Subtraction (also available via `-` on references).
    pub fn sub(&self, other: &Self) -> Self {
        self.add_impl(&other.neg_impl())
    }

    /// Multiplication (also available via `*` on references).
    pub fn mul(&self, other: &Self) -> Self {
        self.mul_impl(other)
    }
}

impl<'a, F: Real> Add for &'a Scalar<F> {
    type Output = Scalar<F>;
    fn add(self, rhs: Self) -> Scalar<F> {
        self.add_impl(rhs)
    }
}

impl<'a, F: Real> Sub for &'a Scalar<F> {
    type Output = Scalar<F>;
    fn sub(self, rhs: Self) -> Scalar<F> {
        Scalar::sub(self, rhs)
    }
}

impl<'a, F: Real> Mul for &'a Scalar<F> {
    type Output = Scalar<F>;
    fn mul(self, rhs: Self) -> Scalar<F> {
        self.mul_impl(rhs)
    }
}

impl<F: Real> Neg for &Scalar<F> {
    type Output = Scalar<F>;
    fn neg(self) -> Scalar<F> {
        self.neg_impl()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type S = Scalar<f64>;

    fn c(re: f64, im: f64) -> S {
        Scalar::C(Complex::new(re, im))
    }

    fn series(var: u32, lowest: i64, vals: &[f64]) -> S {
        Scalar::from_series(LaurentSeries::new(
            var,
            Complex::new(0.0, 0.0),
            lowest,
            vals.iter().map(|&v| c(v, 0.0)).collect(),
        ))
    }

    fn coeff_f64(s: &S, var: u32, e: i64) -> f64 {
        s.coefficient(var, e).unwrap().level0().unwrap().re
    }

    #[test]
    fn inverse_of_one_minus_t_is_geometric() {
        // 1 - t with exact zero padding out to t^6.
        let b = series(1, 0, &[1.0, -1.0, 0.0, 0.0, 0.0, 0.0]);
        let r = b.inv().unwrap();
        for e in 0..6 {
            assert!((coeff_f64(&r, 1, e) - 1.0).abs() < 1e-14, "coeff {e}");
        }
    }

    #[test]
    fn laurent_times_inverse_cancels() {
        // (1/t) * t = 1 with window [0, 1).
        let a = series(1, -1, &[1.0]);
        let b = series(1, 1, &[1.0]);
        let p = &a * &b;
        let t = p.as_series().unwrap();
        assert_eq!(t.lowest(), 0);
        assert_eq!(t.cutoff(), 1);
        assert_eq!(coeff_f64(&p, 1, 0), 1.0);
    }

    #[test]
    fn mul_window_rule() {
        // [l1,c1) = [0,3), [l2,c2) = [1,4)  =>  [1, min(3+1, 4+0)) = [1,4).
        let a = series(1, 0, &[1.0, 2.0, 3.0]);
        let b = series(1, 1, &[5.0, 7.0, 11.0]);
        let p = &a * &b;
        let t = p.as_series().unwrap();
        assert_eq!((t.lowest(), t.cutoff()), (1, 4));
        assert_eq!(coeff_f64(&p, 1, 1), 5.0);
        assert_eq!(coeff_f64(&p, 1, 2), 17.0);
        assert_eq!(coeff_f64(&p, 1, 3), 40.0);
    }

    #[test]
    fn add_window_is_intersection_of_cutoffs() {
        let a = series(1, 0, &[1.0, 1.0, 1.0, 1.0]); // [0,4)
        let b = series(1, -2, &[4.0, 0.0, 2.0]); // [-2,1)
        let s = &a + &b;
        let t = s.as_series().unwrap();
        assert_eq!((t.lowest(), t.cutoff()), (-2, 1));
        assert_eq!(coeff_f64(&s, 1, -2), 4.0);
        assert_eq!(coeff_f64(&s, 1, -1), 0.0);
        assert_eq!(coeff_f64(&s, 1, 0), 3.0);
        assert!(s.coefficient(1, 1).is_err());
    }

    #[test]
    fn residue_extraction_and_window_miss() {
        let s = series(1, -2, &[3.0, 5.0, 7.0]);
        assert_eq!(coeff_f64(&s.residue(1).unwrap(), 0, 0), 5.0);
        // No pole term: residue is an exact zero when -1 is below the window.
        let s2 = series(1, 0, &[1.0, 2.0]);
        assert!(s2.residue(1).unwrap().is_c_zero());
        // -1 above the cutoff: a window miss, not a silent zero.
        let s3 = series(1, -5, &[1.0, 2.0]);
        assert!(matches!(
            s3.residue(1),
            Err(AlgebraError::WindowMiss { exponent: -1, .. })
        ));
    }

    #[test]
    fn constants_are_transparent_to_foreign_variables() {
        let k = c(2.5, -1.0);
        assert_eq!(coeff_f64(&k, 7, 0), 2.5);
        assert!(k.coefficient(7, -1).unwrap().is_c_zero());
        assert!(k.coefficient(7, 3).unwrap().is_c_zero());
    }

    #[test]
    fn nested_variables_merge_with_outer_as_coefficient() {
        // w = series in var 1; t = series in var 2 (inner). w + t has var 2
        // on top with w folded into the exponent-0 coefficient.
        let w = series(1, 0, &[10.0, 1.0, 0.0]);
        let t = series(2, 0, &[0.0, 1.0, 0.0, 0.0]);
        let sum = &w + &t;
        let c0 = sum.coefficient(2, 0).unwrap();
        assert_eq!(coeff_f64(&c0, 1, 0), 10.0);
        assert_eq!(coeff_f64(&c0, 1, 1), 1.0);
        let c1 = sum.coefficient(2, 1).unwrap();
        assert_eq!(coeff_f64(&c1, 1, 0), 1.0);
        // Multiplying by a pure-inner series keeps the nesting ordered.
        let prod = &sum * &t;
        assert_eq!(coeff_f64(&prod.coefficient(2, 1).unwrap(), 1, 0), 10.0);
    }

    #[test]
    fn division_detects_valuation_above_noise() {
        // Divisor t^2 * (2 + t) with 1e-14 noise below the true valuation.
        let noisy = series(1, 0, &[1e-14, 0.0, 2.0, 1.0, 0.0, 0.0]);
        let one = series(1, 0, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let q = one.div(&noisy).unwrap();
        let t = q.as_series().unwrap();
        assert_eq!(t.lowest(), -2);
        assert!((coeff_f64(&q, 1, -2) - 0.5).abs() < 1e-12);
        assert!((coeff_f64(&q, 1, -1) + 0.25).abs() < 1e-12);
    }

    #[test]
    fn division_by_all_zero_series_fails() {
        let z = series(1, 0, &[0.0, 0.0, 0.0]);
        assert!(matches!(
            z.inv(),
            Err(AlgebraError::DivisionByZeroSeries)
        ));
    }

    #[test]
    fn all_zero_window_is_not_an_exact_zero() {
        // A series that is zero on [0,3) still has an unknown tail: residue
        // (exponent -1) is exact zero, but coefficient 5 is a window miss.
        let z = series(1, 0, &[0.0, 0.0, 0.0]);
        assert!(z.residue(1).unwrap().is_c_zero());
        assert!(z.coefficient(1, 5).is_err());
    }

    #[test]
    fn compose_geometric_with_fibonacci_shift() {
        // 1/(1-u) composed with u = t + t^2 gives 1/(1-t-t^2): Fibonacci.
        let geo = LaurentSeries::new(
            1,
            Complex::new(0.0, 0.0),
            0,
            (0..10).map(|_| c(1.0, 0.0)).collect(),
        );
        let inner = series(2, 0, &[0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let f = compose(&geo, &inner).unwrap();
        let expect = [1.0, 1.0, 2.0, 3.0, 5.0, 8.0, 13.0, 21.0];
        for (e, want) in expect.iter().enumerate() {
            assert!(
                (coeff_f64(&f, 2, e as i64) - want).abs() < 1e-12,
                "fibonacci coeff {e}"
            );
        }
    }

    #[test]
    fn compose_rejects_nonvanishing_inner() {
        let geo = LaurentSeries::new(1, Complex::new(0.0, 0.0), 0, vec![c(1.0, 0.0), c(1.0, 0.0)]);
        let inner = series(2, 0, &[1.0, 1.0]);
        assert!(matches!(
            compose(&geo, &inner),
            Err(AlgebraError::ComposeValuation { .. })
        ));
    }

    #[test]
    fn fingerprints_distinguish_values_and_structure() {
        assert_eq!(c(1.5, 2.0).fingerprint(), c(1.5, 2.0).fingerprint());
        assert_ne!(c(1.5, 2.0).fingerprint(), c(1.5, 2.1).fingerprint());
        let s1 = series(1, 0, &[1.0, 2.0]);
        let s2 = series(1, 0, &[1.0, 2.0]);
        let s3 = series(2, 0, &[1.0, 2.0]);
        assert_eq!(s1.fingerprint(), s2.fingerprint());
        assert_ne!(s1.fingerprint(), s3.fingerprint());
        assert_eq!(c(0.0, 0.0).fingerprint(), c(-0.0, 0.0).fingerprint());
    }

    #[test]
    fn trim_raises_lowest_past_exact_zeros() {
        let s = series(1, -3, &[0.0, 0.0, 4.0, 5.0]);
        let t = s.as_series().unwrap();
        assert_eq!(t.lowest(), -1);
        assert_eq!(t.cutoff(), 1);
    }

    #[test]
    fn ring_axioms_on_random_windows() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
                let lowest = rng.gen_range(-3..2);
                let n = rng.gen_range(2..6);
                let vals: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
                Scalar::from_series(LaurentSeries::new(
                    1,
                    Complex::new(0.0, 0.0),
                    lowest,
                    vals.iter().map(|&v| c(v, 0.0)).collect(),
                ))
            };
            let (a, b, g) = (mk(&mut rng), mk(&mut rng), mk(&mut rng));
            let assoc = rel_diff(&(&(&a * &b) * &g), &(&a * &(&b * &g)));
            assert!(assoc < 1e-12, "associativity failed: {assoc}");
            let dist = rel_diff(&(&a * &(&b + &g)), &(&(&a * &b) + &(&a * &g)));
            assert!(dist < 1e-12, "distributivity failed: {dist}");
        }
    }
}
