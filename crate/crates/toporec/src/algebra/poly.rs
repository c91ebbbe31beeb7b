//! Dense complex polynomials, rational functions, and simultaneous root
//! finding (Aberth–Ehrlich iteration).
//!
//! Polynomials are stored densely in ascending degree order with exact-zero
//! trailing coefficients trimmed. Rational functions keep a reduced
//! numerator/denominator pair (common roots are deflated at construction).
//! Both evaluate either at plain complex points or at [`Scalar`] towers,
//! which is how every series expansion of curve data is produced.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::scalar::Scalar;
use crate::error::AlgebraError;
use crate::Real;

/// Convergence threshold for the Aberth correction step, relative to the
/// magnitude of the approximant. 1e-14 sits just above the f64 roundoff
/// floor for the Horner evaluations driving the iteration.
const ABERTH_STEP_RTOL: f64 = 1e-14;

/// Residual convergence floor in units of machine epsilon, relative to the
/// evaluation scale `Σ|a_j||z|^j`. Horner's backward-error bound is
/// `(2d+1)ε·scale`, so 32ε is reachable exactly when the approximant sits on
/// a root to full precision — which is what the step criterion cannot detect
/// for multiple roots (their steps stall near ε^(1/m)). Anything looser
/// would let two approximants share one simple-root basin and stop early.
const ABERTH_RESID_EPS_FACTOR: f64 = 32.0;

/// Roots closer than this (relative to their magnitude) are clustered into a
/// single multiple root. The residual floor pins the approximants of an
/// m-fold root on a circle of radius ~(32ε·scale)^(1/m) around it — about
/// 2e-7 for a typical double — so the cluster net must be wider than that.
/// Distinct roots this close are reported as one multiple root, which every
/// caller treats as a (conservative) hard error rather than silent data.
const ABERTH_CLUSTER_RTOL: f64 = 1e-5;

/// Acceptance threshold for verifying the converged multiset: the monic
/// polynomial rebuilt from the approximants must match the input
/// coefficient-wise to this relative accuracy. Coefficient reconstruction is
/// scale-correct even for roots at the origin, where a pointwise residual
/// ratio degenerates. Generous because an m-fold root is only determined to
/// ~eps^(1/m) and the product amplifies that back into the coefficients.
const ABERTH_VERIFY_RTOL: f64 = 1e-6;

/// Maximum Aberth sweeps before a deterministic restart, and restarts before
/// giving up.
const ABERTH_MAX_ITERS: usize = 500;
const ABERTH_MAX_RESTARTS: usize = 3;

/// A dense complex polynomial, coefficients in ascending degree order.
#[derive(Debug, Clone)]
pub struct Polynomial<F: Real> {
    coeffs: Vec<Complex<F>>,
}

impl<F: Real> Polynomial<F> {
    /// Builds a polynomial, trimming exact-zero leading (highest-degree)
    /// coefficients. The zero polynomial has an empty coefficient vector.
    pub fn new(mut coeffs: Vec<Complex<F>>) -> Self {
        while let Some(c) = coeffs.last() {
            if c.re == F::zero() && c.im == F::zero() {
                coeffs.pop();
            } else {
                break;
            }
        }
        Polynomial { coeffs }
    }

    /// The constant polynomial `c`.
    pub fn constant(c: Complex<F>) -> Self {
        Polynomial::new(vec![c])
    }

    /// Ascending coefficients (empty for the zero polynomial).
    pub fn coeffs(&self) -> &[Complex<F>] {
        &self.coeffs
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    /// True for the zero polynomial.
    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Horner evaluation at a complex point.
    pub fn eval(&self, z: Complex<F>) -> Complex<F> {
        let mut acc = Complex::new(F::zero(), F::zero());
        for c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    /// `Σ |a_j| |z|^j`, the natural scale for residual tests at `z`.
    pub fn eval_scale(&self, z: Complex<F>) -> F {
        let r = z.norm();
        let mut acc = F::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * r + c.norm();
        }
        acc
    }

    /// Horner evaluation at a scalar tower.
    pub fn eval_scalar(&self, z: &Scalar<F>) -> Scalar<F> {
        let mut acc = Scalar::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(z).add(&Scalar::from_c(*c));
        }
        acc
    }

    /// Formal derivative.
    pub fn derivative(&self) -> Polynomial<F> {
        if self.coeffs.len() <= 1 {
            return Polynomial::new(vec![]);
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(j, c)| {
                let j = F::from(j).expect("small integer fits the float type");
                c * Complex::new(j, F::zero())
            })
            .collect();
        Polynomial::new(coeffs)
    }

    /// Product of two polynomials.
    pub fn mul(&self, other: &Polynomial<F>) -> Polynomial<F> {
        if self.is_zero() || other.is_zero() {
            return Polynomial::new(vec![]);
        }
        let mut coeffs =
            vec![Complex::new(F::zero(), F::zero()); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] = coeffs[i + j] + a * b;
            }
        }
        Polynomial::new(coeffs)
    }

    /// Difference of two polynomials.
    pub fn sub(&self, other: &Polynomial<F>) -> Polynomial<F> {
        let n = self.coeffs.len().max(other.coeffs.len());
        let zero = Complex::new(F::zero(), F::zero());
        let coeffs = (0..n)
            .map(|i| {
                self.coeffs.get(i).copied().unwrap_or(zero)
                    - other.coeffs.get(i).copied().unwrap_or(zero)
            })
            .collect();
        Polynomial::new(coeffs)
    }

    /// Scales every coefficient.
    pub fn scale(&self, k: Complex<F>) -> Polynomial<F> {
        Polynomial::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    /// Synthetic division by `(z - root)`, dropping the remainder. The
    /// caller is responsible for `root` actually being a root within
    /// tolerance; the remainder is discarded.
    pub fn deflate(&self, root: Complex<F>) -> Polynomial<F> {
        let d = match self.degree() {
            Some(d) if d >= 1 => d,
            _ => return Polynomial::new(vec![]),
        };
        let mut out = vec![Complex::new(F::zero(), F::zero()); d];
        let mut carry = self.coeffs[d];
        for j in (0..d).rev() {
            out[j] = carry;
            carry = self.coeffs[j] + carry * root;
        }
        Polynomial::new(out)
    }
}

/// All roots of `p` with multiplicities, by Aberth–Ehrlich simultaneous
/// iteration with deterministic seeding.
///
/// Returns pairs `(root, multiplicity)`. Fails with
/// [`AlgebraError::ZeroPolynomial`] / [`AlgebraError::DegreeZero`] on
/// degenerate input and [`AlgebraError::NoConvergence`] if the iteration
/// stalls, and [`AlgebraError::ResidualTooLarge`] if a clustered root does
/// not verify against the polynomial.
pub fn poly_roots<F: Real>(
    p: &Polynomial<F>,
) -> Result<Vec<(Complex<F>, usize)>, AlgebraError> {
    if p.is_zero() {
        return Err(AlgebraError::ZeroPolynomial);
    }
    let d = p.degree().expect("nonzero polynomial has a degree");
    if d == 0 {
        return Err(AlgebraError::DegreeZero);
    }
    let lead = p.coeffs[d];
    let monic = p.scale(Complex::new(F::one(), F::zero()) / lead);
    let dp = monic.derivative();

    // Cauchy-style inclusion radius for the initial circle of guesses.
    let mut radius = F::zero();
    for c in &monic.coeffs[..d] {
        let r = c.norm();
        if r > radius {
            radius = r;
        }
    }
    let radius = F::one() + radius;

    let mut rng = ChaCha8Rng::seed_from_u64(0x00A1_BE27);
    for restart in 0..=ABERTH_MAX_RESTARTS {
        let mut z: Vec<Complex<F>> = (0..d)
            .map(|k| {
                let jitter: f64 = rng.gen_range(-0.05..0.05);
                let theta = 2.0 * std::f64::consts::PI * (k as f64 + 0.37) / d as f64 + jitter;
                let scale = 0.5 + 0.5 * (k as f64 + 1.0) / d as f64 + restart as f64 * 0.13;
                let m = F::from(scale).unwrap() * radius;
                Complex::new(
                    m * F::from(theta.cos()).unwrap(),
                    m * F::from(theta.sin()).unwrap(),
                )
            })
            .collect();

        let resid_floor = F::from(ABERTH_RESID_EPS_FACTOR).unwrap() * F::epsilon();
        for _ in 0..ABERTH_MAX_ITERS {
            let mut all_done = true;
            for i in 0..d {
                let pi = monic.eval(z[i]);
                let scale_i = monic.eval_scale(z[i]) + F::min_positive_value();
                if pi.norm() <= resid_floor * scale_i {
                    continue; // pinned on a root to full precision
                }
                let dpi = dp.eval(z[i]);
                if dpi.norm() == F::zero() {
                    // Sitting exactly on a critical point: nudge off it.
                    let eps: f64 = rng.gen_range(1e-6..1e-5);
                    z[i] = z[i] + Complex::new(F::from(eps).unwrap(), F::from(eps).unwrap());
                    all_done = false;
                    continue;
                }
                let newton = pi / dpi;
                let mut sum = Complex::new(F::zero(), F::zero());
                for j in 0..d {
                    if j != i {
                        let diff = z[i] - z[j];
                        if diff.norm() > F::zero() {
                            sum = sum + Complex::new(F::one(), F::zero()) / diff;
                        }
                    }
                }
                let denom = Complex::new(F::one(), F::zero()) - newton * sum;
                let step = if denom.norm() == F::zero() { newton } else { newton / denom };
                z[i] = z[i] - step;
                if step.norm() > F::from(ABERTH_STEP_RTOL).unwrap() * (F::one() + z[i].norm()) {
                    all_done = false;
                }
            }
            if all_done {
                return cluster_and_verify(p, &monic, &z);
            }
        }
    }
    Err(AlgebraError::NoConvergence { iterations: (ABERTH_MAX_RESTARTS + 1) * ABERTH_MAX_ITERS })
}

/// Groups converged approximants into multiplicity clusters and verifies the
/// whole multiset by rebuilding the monic polynomial from it.
fn cluster_and_verify<F: Real>(
    p: &Polynomial<F>,
    monic: &Polynomial<F>,
    z: &[Complex<F>],
) -> Result<Vec<(Complex<F>, usize)>, AlgebraError> {
    // Global check: the product of (x - z_i) must reproduce the monic
    // coefficients. This is scale-correct for roots anywhere, including 0.
    let one = Complex::new(F::one(), F::zero());
    let mut rebuilt = Polynomial::new(vec![one]);
    for &r in z {
        rebuilt = rebuilt.mul(&Polynomial::new(vec![-r, one]));
    }
    let coeff_scale = monic
        .coeffs()
        .iter()
        .map(|c| c.norm())
        .fold(F::one(), |a, b| a.max(b));
    let mut worst = F::zero();
    for j in 0..monic.coeffs().len().max(rebuilt.coeffs().len()) {
        let zero = Complex::new(F::zero(), F::zero());
        let a = monic.coeffs().get(j).copied().unwrap_or(zero);
        let b = rebuilt.coeffs().get(j).copied().unwrap_or(zero);
        worst = worst.max((a - b).norm() / coeff_scale);
    }
    if worst > F::from(ABERTH_VERIFY_RTOL).unwrap() {
        return Err(AlgebraError::ResidualTooLarge {
            residual: worst.to_f64().unwrap_or(f64::NAN),
        });
    }

    let mut remaining: Vec<Complex<F>> = z.to_vec();
    let mut out: Vec<(Complex<F>, usize)> = Vec::new();
    let ctol = F::from(ABERTH_CLUSTER_RTOL).unwrap();
    while let Some(seed) = remaining.pop() {
        let mut cluster = vec![seed];
        let mut rest = Vec::with_capacity(remaining.len());
        for &w in &remaining {
            if (w - seed).norm() <= ctol * (F::one() + seed.norm()) {
                cluster.push(w);
            } else {
                rest.push(w);
            }
        }
        remaining = rest;
        let n = F::from(cluster.len()).unwrap();
        let mean = cluster
            .iter()
            .fold(Complex::new(F::zero(), F::zero()), |a, b| a + b)
            / Complex::new(n, F::zero());
        out.push((mean, cluster.len()));
    }
    debug_assert_eq!(out.iter().map(|(_, m)| m).sum::<usize>(), p.degree().unwrap());
    // Deterministic order: by real part, then imaginary part.
    out.sort_by(|a, b| {
        (a.0.re, a.0.im)
            .partial_cmp(&(b.0.re, b.0.im))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(out)
}

/// A ratio of polynomials kept in reduced form (no common roots).
#[derive(Debug, Clone)]
pub struct RationalFunction<F: Real> {
    num: Polynomial<F>,
    den: Polynomial<F>,
}

impl<F: Real> RationalFunction<F> {
    /// Builds `num/den`, deflating any common roots (detected by evaluating
    /// the numerator at each denominator root).
    pub fn new(num: Polynomial<F>, den: Polynomial<F>) -> Result<Self, AlgebraError> {
        if den.is_zero() {
            return Err(AlgebraError::ZeroPolynomial);
        }
        let mut num = num;
        let mut den = den;
        if !num.is_zero() && den.degree() != Some(0) {
            loop {
                let mut reduced = false;
                if den.degree() == Some(0) {
                    break;
                }
                for (root, _) in poly_roots(&den)? {
                    let scale = num.eval_scale(root) + F::min_positive_value();
                    if num.eval(root).norm() <= F::from(1e-9).unwrap() * scale {
                        num = num.deflate(root);
                        den = den.deflate(root);
                        reduced = true;
                        break;
                    }
                }
                if !reduced || num.is_zero() {
                    break;
                }
            }
        }
        Ok(RationalFunction { num, den })
    }

    /// The numerator.
    pub fn num(&self) -> &Polynomial<F> {
        &self.num
    }

    /// The denominator.
    pub fn den(&self) -> &Polynomial<F> {
        &self.den
    }

    /// Evaluation at a complex point; `None` at a pole.
    pub fn eval(&self, z: Complex<F>) -> Option<Complex<F>> {
        let d = self.den.eval(z);
        let scale = self.den.eval_scale(z) + F::min_positive_value();
        if d.norm() <= F::from(1e-14).unwrap() * scale {
            None
        } else {
            Some(self.num.eval(z) / d)
        }
    }

    /// Evaluation at a scalar tower. Poles are fine (they become Laurent
    /// tails); a denominator that vanishes identically on the window fails.
    pub fn eval_scalar(&self, z: &Scalar<F>) -> Result<Scalar<F>, AlgebraError> {
        let n = self.num.eval_scalar(z);
        let d = self.den.eval_scalar(z);
        n.div(&d)
    }

    /// Formal derivative `(n'd - nd')/d^2`.
    pub fn derivative(&self) -> Result<RationalFunction<F>, AlgebraError> {
        let n = self.num.derivative().mul(&self.den).sub(&self.num.mul(&self.den.derivative()));
        let d = self.den.mul(&self.den);
        RationalFunction::new(n, d)
    }

    /// Degree of the map: `max(deg num, deg den)`.
    pub fn map_degree(&self) -> usize {
        self.num.degree().unwrap_or(0).max(self.den.degree().unwrap_or(0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn horner_eval_and_derivative() {
        // p = 1 + 2z + 3z^2
        let p = Polynomial::new(vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)]);
        assert_eq!(p.eval(c(2.0, 0.0)), c(17.0, 0.0));
        let dp = p.derivative();
        assert_eq!(dp.coeffs(), &[c(2.0, 0.0), c(6.0, 0.0)]);
    }

    #[test]
    fn roots_of_quartic_with_known_roots() {
        // (z-1)(z+1)(z-2i)(z+3) = expand via repeated mul
        let mut p = Polynomial::new(vec![c(-1.0, 0.0), c(1.0, 0.0)]);
        for r in [c(-1.0, 0.0), c(0.0, 2.0), c(3.0, 0.0)] {
            p = p.mul(&Polynomial::new(vec![-r, c(1.0, 0.0)]));
        }
        let roots = poly_roots(&p).unwrap();
        assert_eq!(roots.len(), 4);
        for want in [c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 2.0), c(3.0, 0.0)] {
            let hit = roots
                .iter()
                .any(|(r, m)| *m == 1 && (r - want).norm() < 1e-10);
            assert!(hit, "missing root {want}");
        }
    }

    #[test]
    fn roots_cluster_multiplicities() {
        // (z-2)^2 (z+1)
        let p = Polynomial::new(vec![c(4.0, 0.0), c(0.0, 0.0), c(-3.0, 0.0), c(1.0, 0.0)]);
        let roots = poly_roots(&p).unwrap();
        let double = roots.iter().find(|(_, m)| *m == 2).expect("double root");
        assert!((double.0 - c(2.0, 0.0)).norm() < 1e-6);
        let single = roots.iter().find(|(_, m)| *m == 1).expect("simple root");
        assert!((single.0 - c(-1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn roots_reject_degenerate_inputs() {
        assert!(matches!(
            poly_roots(&Polynomial::<f64>::new(vec![])),
            Err(AlgebraError::ZeroPolynomial)
        ));
        assert!(matches!(
            poly_roots(&Polynomial::new(vec![c(3.0, 0.0)])),
            Err(AlgebraError::DegreeZero)
        ));
    }

    #[test]
    fn deflation_removes_a_root() {
        // (z-1)(z^2+1) deflated at 1 leaves z^2+1.
        let p = Polynomial::new(vec![c(-1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0)]);
        let q = p.deflate(c(1.0, 0.0));
        assert_eq!(q.degree(), Some(2));
        assert!(q.eval(c(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn rational_reduces_common_roots() {
        // (z^2-1)/(z-1) reduces to z+1.
        let num = Polynomial::new(vec![c(-1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let den = Polynomial::new(vec![c(-1.0, 0.0), c(1.0, 0.0)]);
        let r = RationalFunction::new(num, den).unwrap();
        assert_eq!(r.den().degree(), Some(0));
        let v = r.eval(c(5.0, 0.0)).unwrap();
        assert!((v - c(6.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn rational_derivative_matches_finite_difference() {
        // f = (z^2+1)/z, f' at 2: 1 - 1/z^2 = 0.75
        let num = Polynomial::new(vec![c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let den = Polynomial::new(vec![c(0.0, 0.0), c(1.0, 0.0)]);
        let f = RationalFunction::new(num, den).unwrap();
        let df = f.derivative().unwrap();
        let v = df.eval(c(2.0, 0.0)).unwrap();
        assert!((v - c(0.75, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn rational_eval_scalar_produces_laurent_tail_at_pole() {
        use crate::algebra::scalar::LaurentSeries;
        // f = 1/z expanded at z = 0 + t: series with lowest exponent -1.
        let f = RationalFunction::new(
            Polynomial::new(vec![c(1.0, 0.0)]),
            Polynomial::new(vec![c(0.0, 0.0), c(1.0, 0.0)]),
        )
        .unwrap();
        let seed = Scalar::from_series(LaurentSeries::identity_seed(1, c(0.0, 0.0), 8));
        let v = f.eval_scalar(&seed).unwrap();
        let s = v.as_series().unwrap();
        assert_eq!(s.lowest(), -1);
        assert!((v.coefficient(1, -1).unwrap().level0().unwrap() - c(1.0, 0.0)).norm() < 1e-14);
    }
}
