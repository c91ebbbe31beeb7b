//! Genus-zero spectral curves: rational parametrizations `x(z), y(z)` of the
//! Riemann sphere, their branch points, sheet structure, and the rational
//! kernels every correlator is assembled from.
//!
//! # Conventions
//!
//! The curve is the locus `{(x(z), y(z)) : z ∈ ℂP¹}`. The degree of the map
//! `x` is `d = max(deg num, deg den)`; a generic value `x₀` has `d`
//! preimages (the *fiber*). `d2 = d - 1` counts the sheets other than the
//! physical one. Branch points are the simple zeros of `x'`; at each one
//! exactly two sheets collide.
//!
//! All kernels are *reduced*: the Bergmann kernel is reported as the
//! coefficient of `dz₁ dz₂`, i.e. `1/(z₁-z₂)²`, and the third-kind kernel as
//! the coefficient of `dz`, i.e. `1/(z-q) - 1/(z-o)`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::algebra::{
    poly_roots, residue_quadrature, LaurentSeries, Polynomial, RationalFunction, Scalar, VarGen,
};
use crate::error::{AlgebraError, CurveError};
use crate::Real;

/// Relative distance below which an evaluation point is considered to sit on
/// a branch point. Series windows degrade like powers of the inverse
/// distance; 1e-7 rejects only points where no truncation order could
/// plausibly recover 1e-8 accuracy.
pub const BRANCH_GUARD_RTOL: f64 = 1e-7;

/// Tolerance for matching a requested fiber point against a computed root,
/// relative to its magnitude.
const FIBER_MATCH_RTOL: f64 = 1e-8;

/// |residue| of `y dx` at the poles of `x` must be within this distance of 1
/// for the curve to be flagged as carrying a normalized resolvent.
const NORMALIZATION_ATOL: f64 = 1e-6;

/// Quadrature sample count for the normalization residues.
const NORMALIZATION_SAMPLES: usize = 512;

/// On-disk description of a curve: dense ascending complex coefficient lists
/// for the numerators and denominators of `x` and `y`, each entry `[re, im]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveSpec {
    /// Numerator coefficients of `x`, ascending degree.
    pub x_num: Vec<[f64; 2]>,
    /// Denominator coefficients of `x`, ascending degree.
    pub x_den: Vec<[f64; 2]>,
    /// Numerator coefficients of `y`, ascending degree.
    pub y_num: Vec<[f64; 2]>,
    /// Denominator coefficients of `y`, ascending degree.
    pub y_den: Vec<[f64; 2]>,
    /// Leading coefficient of the second potential's derivative; scales the
    /// fiber polynomial `∏(y - y(z^i))`. Defaults to 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g2_tilde_lead: Option<[f64; 2]>,
    /// Free-form display name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

/// Parses a [`CurveSpec`] from JSON text.
pub fn parse_curve_spec(json: &str) -> Result<CurveSpec, CurveError> {
    serde_json::from_str(json).map_err(|e| CurveError::ParseError(e.to_string()))
}

/// A branch point of `x`: a simple zero of `x'` in the parametrizing
/// coordinate.
#[derive(Debug, Clone, Copy)]
pub struct BranchPoint<F: Real> {
    /// Location in the parametrizing coordinate.
    pub z: Complex<F>,
}

/// Residue of `y dx` at one pole of `x` (normalization diagnostic).
#[derive(Debug, Clone)]
pub struct PoleResidue<F: Real> {
    /// Pole location, or `None` for the point at infinity.
    pub location: Option<Complex<F>>,
    /// The residue value.
    pub value: Complex<F>,
}

/// Result of the resolvent-normalization diagnostic: the residues of `y dx`
/// at every pole of `x`, and whether they all have unit magnitude.
#[derive(Debug, Clone)]
pub struct NormalizationReport<F: Real> {
    /// Per-pole residues.
    pub residues: Vec<PoleResidue<F>>,
    /// True when every residue magnitude is within [`NORMALIZATION_ATOL`]
    /// of 1.
    pub resolvent_normalized: bool,
}

/// The sheets of `x` over a branch point, as truncated series in the local
/// coordinate `t` (the parametrizing coordinate minus the branch point).
///
/// Index 0 is the physical sheet `ζ₀ = a + t`; index 1 the colliding
/// (conjugate) sheet; the remaining sheets are regular there, sorted by
/// their value at `t = 0`. All coefficient towers are plain complex numbers,
/// so the data can be re-tagged onto any residue variable cheaply.
#[derive(Debug, Clone)]
pub struct FiberData<F: Real> {
    /// Variable id the series are currently expressed in.
    pub var: u32,
    /// Index into [`SpectralCurve::branch_points`].
    pub branch: usize,
    /// Fiber points `ζ_i(t)`, length `d2 + 1`.
    pub zeta: Vec<Scalar<F>>,
    /// `y(ζ_i(t))`.
    pub y: Vec<Scalar<F>>,
    /// `x'(ζ_i(t))`; index 0 has valuation 1.
    pub xp: Vec<Scalar<F>>,
}

impl<F: Real> FiberData<F> {
    /// Returns the same fiber expressed in a different variable id. Sound
    /// because the coefficients are plain complex numbers.
    pub fn retag(&self, var: u32) -> FiberData<F> {
        let map = |v: &Vec<Scalar<F>>| {
            v.iter()
                .map(|s| match s.as_series() {
                    Some(t) if t.var() == self.var => Scalar::from_series(t.with_var(var)),
                    _ => s.clone(),
                })
                .collect()
        };
        FiberData {
            var,
            branch: self.branch,
            zeta: map(&self.zeta),
            y: map(&self.y),
            xp: map(&self.xp),
        }
    }
}

/// A genus-zero spectral curve with its derived data.
#[derive(Debug, Clone)]
pub struct SpectralCurve<F: Real> {
    x: RationalFunction<F>,
    y: RationalFunction<F>,
    dx: RationalFunction<F>,
    dy: RationalFunction<F>,
    d2: usize,
    branch_points: Vec<BranchPoint<F>>,
    g2_lead: Complex<F>,
    label: Option<String>,
    normalization: NormalizationReport<F>,
}

fn poly_from_pairs<F: Real>(pairs: &[[f64; 2]]) -> Polynomial<F> {
    Polynomial::new(
        pairs
            .iter()
            .map(|&[re, im]| crate::c_from_f64(re, im))
            .collect(),
    )
}

/// Builds a [`SpectralCurve`] from its on-disk description, computing branch
/// points, checking they are simple, verifying the generic fiber size, and
/// running the normalization diagnostic.
pub fn load_curve<F: Real>(spec: &CurveSpec) -> Result<SpectralCurve<F>, CurveError> {
    let x_num = poly_from_pairs::<F>(&spec.x_num);
    let x_den = poly_from_pairs::<F>(&spec.x_den);
    let y_num = poly_from_pairs::<F>(&spec.y_num);
    let y_den = poly_from_pairs::<F>(&spec.y_den);
    if x_num.is_zero() {
        return Err(CurveError::ParseError("x numerator is the zero polynomial".into()));
    }
    if y_num.is_zero() {
        return Err(CurveError::ParseError("y numerator is the zero polynomial".into()));
    }
    let x = RationalFunction::new(x_num, x_den).map_err(CurveError::Algebra)?;
    let y = RationalFunction::new(y_num, y_den).map_err(CurveError::Algebra)?;
    let d = x.map_degree();
    if d < 2 {
        return Err(CurveError::ParseError(format!(
            "x must define a degree >= 2 map of the sphere, got degree {d}"
        )));
    }
    if y.map_degree() == 0 {
        return Err(CurveError::ParseError("y must be non-constant".into()));
    }
    let dx = x.derivative().map_err(CurveError::Algebra)?;
    let dy = y.derivative().map_err(CurveError::Algebra)?;

    // Branch points: zeros of x' away from the poles of x, each simple.
    let mut branch_points = Vec::new();
    let ddx_num = dx.num().derivative();
    for (root, mult) in poly_roots(dx.num()).map_err(CurveError::Algebra)? {
        let den_scale = x.den().eval_scale(root) + F::min_positive_value();
        if x.den().eval(root).norm() <= F::from(1e-9).unwrap() * den_scale {
            continue; // a pole of x, not a branch point
        }
        if mult >= 2 {
            return Err(CurveError::NonSimpleBranchPoint {
                location: format!("{root}"),
                multiplicity: mult,
            });
        }
        // Polish the simple root to the roundoff floor; everything
        // downstream expands around this point.
        let mut z = root;
        for _ in 0..3 {
            let d = ddx_num.eval(z);
            if d.norm() > F::zero() {
                z = z - dx.num().eval(z) / d;
            }
        }
        branch_points.push(BranchPoint { z });
    }
    if branch_points.is_empty() {
        return Err(CurveError::ParseError(
            "x' has no zeros away from the poles of x: no branch points".into(),
        ));
    }
    // Deterministic order for reporting and residue sums.
    branch_points.sort_by(|a, b| {
        (a.z.re, a.z.im)
            .partial_cmp(&(b.z.re, b.z.im))
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let g2_lead = match spec.g2_tilde_lead {
        Some([re, im]) => crate::c_from_f64(re, im),
        None => Complex::new(F::one(), F::zero()),
    };

    let normalization = normalization_report(&x, &y, &dx, &branch_points)?;

    let curve = SpectralCurve {
        x,
        y,
        dx,
        dy,
        d2: d - 1,
        branch_points,
        g2_lead,
        label: spec.label.clone(),
        normalization,
    };

    // Generic fiber sanity: the fiber over a few sample points must have
    // exactly d members.
    for probe in [
        crate::c_from_f64::<F>(0.7123, 0.3456),
        crate::c_from_f64::<F>(-1.3517, 0.8191),
    ] {
        curve.sheets_global(probe)?;
    }
    Ok(curve)
}

impl<F: Real> SpectralCurve<F> {
    /// The map `x`.
    pub fn x(&self) -> &RationalFunction<F> {
        &self.x
    }

    /// The map `y`.
    pub fn y(&self) -> &RationalFunction<F> {
        &self.y
    }

    /// `x'`.
    pub fn dx(&self) -> &RationalFunction<F> {
        &self.dx
    }

    /// `y'`.
    pub fn dy(&self) -> &RationalFunction<F> {
        &self.dy
    }

    /// Number of sheets besides the physical one.
    pub fn d2(&self) -> usize {
        self.d2
    }

    /// The simple zeros of `x'`.
    pub fn branch_points(&self) -> &[BranchPoint<F>] {
        &self.branch_points
    }

    /// Leading coefficient of the second potential's derivative.
    pub fn g2_lead(&self) -> Complex<F> {
        self.g2_lead
    }

    /// Display name from the curve description, if any.
    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    /// The normalization diagnostic computed at load time.
    pub fn normalization(&self) -> &NormalizationReport<F> {
        &self.normalization
    }

    /// Rejects evaluation points that sit (nearly) on a branch point.
    pub fn guard_point(&self, z: Complex<F>) -> Result<(), CurveError> {
        for bp in &self.branch_points {
            let dist = (z - bp.z).norm();
            if dist <= F::from(BRANCH_GUARD_RTOL).unwrap() * (F::one() + bp.z.norm()) {
                return Err(CurveError::NearBranchPoint {
                    point: format!("{z}"),
                    distance: dist.to_f64().unwrap_or(f64::NAN),
                    branch: format!("{}", bp.z),
                });
            }
        }
        Ok(())
    }

    /// The full fiber of `x` through `z0`: all `d2 + 1` solutions `w` of
    /// `x(w) = x(z0)`, with `z0` itself first and the rest sorted by
    /// `(re, im)`.
    pub fn sheets_global(&self, z0: Complex<F>) -> Result<Vec<Complex<F>>, CurveError> {
        let expected = self.d2 + 1;
        let x0 = self.x.eval(z0).ok_or_else(|| {
            CurveError::CoincidentPoints(format!("{z0} is a pole of x; its fiber is not finite"))
        })?;
        // Solve num(w) - x0 * den(w) = 0.
        let shifted = self.x.num().sub(&self.x.den().scale(x0));
        let roots = poly_roots(&shifted).map_err(CurveError::Algebra)?;
        let found: usize = roots.iter().map(|(_, m)| m).sum();
        if found != expected {
            return Err(CurveError::SheetCountMismatch { expected, found });
        }
        let mut flat: Vec<Complex<F>> = Vec::with_capacity(found);
        for (r, m) in roots {
            if m > 1 {
                // Colliding fiber members mean z0 is (numerically) over a
                // branch value of x.
                return Err(CurveError::NearBranchPoint {
                    point: format!("{z0}"),
                    distance: 0.0,
                    branch: format!("fiber collision at {r}"),
                });
            }
            flat.push(r);
        }
        let tol = F::from(FIBER_MATCH_RTOL).unwrap() * (F::one() + z0.norm());
        let self_idx = flat
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - z0)
                    .norm()
                    .partial_cmp(&(b.1 - z0).norm())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .map(|(i, _)| i)
            .expect("fiber is non-empty");
        if (flat[self_idx] - z0).norm() > tol {
            return Err(CurveError::SheetCountMismatch { expected, found: 0 });
        }
        let mut fiber = vec![z0];
        flat.remove(self_idx);
        flat.sort_by(|a, b| {
            (a.re, a.im)
                .partial_cmp(&(b.re, b.im))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        fiber.extend(flat);
        Ok(fiber)
    }

    /// `y` evaluated on a global fiber.
    pub fn fiber_y(&self, fiber: &[Complex<F>]) -> Result<Vec<Complex<F>>, CurveError> {
        fiber
            .iter()
            .map(|&w| {
                self.y.eval(w).ok_or_else(|| {
                    CurveError::CoincidentPoints(format!("fiber point {w} is a pole of y"))
                })
            })
            .collect()
    }

    /// `-g̃ ∏_{j≠i} (y_i - y_j)` over a fiber's `y` values: the derivative of
    /// the fiber polynomial `-g̃ ∏_j (y - y_j)` at `y_i`.
    pub fn ey_at(&self, fiber_y: &[Complex<F>], i: usize) -> Complex<F> {
        let mut acc = -self.g2_lead;
        for (j, &yj) in fiber_y.iter().enumerate() {
            if j != i {
                acc = acc * (fiber_y[i] - yj);
            }
        }
        acc
    }

    /// The local sheet system over a branch point, to `t^order` (exclusive).
    ///
    /// Draws fresh variable ids from `vars` (one for `t`, transient ones for
    /// the Newton derivative probes). The returned data can be re-tagged
    /// with [`FiberData::retag`].
    pub fn fiber_series(
        &self,
        branch: usize,
        order: usize,
        vars: &VarGen,
    ) -> Result<FiberData<F>, CurveError> {
        let a = self.branch_points[branch].z;
        let tvar = vars.fresh();
        let seed = LaurentSeries::identity_seed(tvar, a, order);
        let seed_s = Scalar::from_series(seed.clone());
        let x0s = self.x.eval_scalar(&seed_s).map_err(CurveError::Algebra)?;
        let f = |w: &Scalar<F>, _t: &Scalar<F>| -> Result<Scalar<F>, AlgebraError> {
            Ok(self.x.eval_scalar(w)?.sub(&x0s))
        };

        // Conjugate sheet: two-term ramified ansatz w = a - t + c2 t², with
        // c2 = -x'''(a) / (3 x''(a)).
        let ddx = self.dx.derivative().map_err(CurveError::Algebra)?;
        let dddx = ddx.derivative().map_err(CurveError::Algebra)?;
        let x2 = ddx.eval(a).ok_or_else(|| {
            CurveError::CoincidentPoints(format!("branch point {a} is a pole of x''"))
        })?;
        let x3 = dddx.eval(a).unwrap_or_else(|| Complex::new(F::zero(), F::zero()));
        let three = Complex::new(F::from(3.0).unwrap(), F::zero());
        let c2 = -x3 / (three * x2);
        let mut ansatz_coeffs = vec![Scalar::zero(); order];
        ansatz_coeffs[0] = Scalar::from_c(a);
        ansatz_coeffs[1] = Scalar::from_c(-Complex::new(F::one(), F::zero()));
        ansatz_coeffs[2] = Scalar::from_c(c2);
        let ansatz = Scalar::from_series(LaurentSeries::new(tvar, a, 0, ansatz_coeffs));
        let conj = crate::algebra::newton_series_solve(&f, &ansatz, &seed, vars)
            .map_err(CurveError::Algebra)?;

        // Regular sheets: constant seeds from the fiber polynomial deflated
        // twice at the double root a.
        let xa = self.x.eval(a).ok_or_else(|| {
            CurveError::CoincidentPoints(format!("branch point {a} is a pole of x"))
        })?;
        let shifted = self.x.num().sub(&self.x.den().scale(xa));
        let deflated = shifted.deflate(a).deflate(a);
        let mut regular_seeds: Vec<Complex<F>> = if deflated.degree().unwrap_or(0) >= 1 {
            poly_roots(&deflated)
                .map_err(CurveError::Algebra)?
                .into_iter()
                .flat_map(|(r, m)| std::iter::repeat(r).take(m))
                .collect()
        } else {
            Vec::new()
        };
        regular_seeds.sort_by(|a, b| {
            (a.re, a.im)
                .partial_cmp(&(b.re, b.im))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        if regular_seeds.len() != self.d2.saturating_sub(1) {
            return Err(CurveError::SheetCountMismatch {
                expected: self.d2 + 1,
                found: regular_seeds.len() + 2,
            });
        }

        let mut zeta = vec![seed_s, Scalar::from_series(conj)];
        for r in regular_seeds {
            let w = crate::algebra::newton_series_solve(&f, &Scalar::from_c(r), &seed, vars)
                .map_err(CurveError::Algebra)?;
            zeta.push(Scalar::from_series(w));
        }

        let mut yv = Vec::with_capacity(zeta.len());
        let mut xpv = Vec::with_capacity(zeta.len());
        for z in &zeta {
            yv.push(self.y.eval_scalar(z).map_err(CurveError::Algebra)?);
            xpv.push(self.dx.eval_scalar(z).map_err(CurveError::Algebra)?);
        }
        Ok(FiberData { var: tvar, branch, zeta, y: yv, xp: xpv })
    }
}

/// Reduced Bergmann kernel `1/(p-q)²` on scalar towers.
pub fn bergmann<F: Real>(p: &Scalar<F>, q: &Scalar<F>) -> Result<Scalar<F>, AlgebraError> {
    let d = p.sub(q);
    d.mul(&d).inv()
}

/// Reduced third-kind kernel `1/(p-q) - 1/(p-o)` on scalar towers: the
/// unique sphere kernel with residue +1 at `q`, -1 at the basepoint `o`.
pub fn third_kind<F: Real>(
    p: &Scalar<F>,
    q: &Scalar<F>,
    o: &Scalar<F>,
) -> Result<Scalar<F>, AlgebraError> {
    let first = p.sub(q).inv()?;
    let second = p.sub(o).inv()?;
    Ok(first.sub(&second))
}

/// Residues of `y dx` at every pole of `x` and the unit-magnitude flag.
fn normalization_report<F: Real>(
    x: &RationalFunction<F>,
    y: &RationalFunction<F>,
    dx: &RationalFunction<F>,
    branch_points: &[BranchPoint<F>],
) -> Result<NormalizationReport<F>, CurveError> {
    // Singular set for contour-radius selection: poles of x and y plus the
    // branch points (where nothing is singular, but fibers collide and we
    // keep contours clear of them for conditioning).
    let mut singular: Vec<Complex<F>> = Vec::new();
    let mut poles: Vec<Complex<F>> = Vec::new();
    if x.den().degree().unwrap_or(0) >= 1 {
        for (r, _) in poly_roots(x.den()).map_err(CurveError::Algebra)? {
            poles.push(r);
            singular.push(r);
        }
    }
    if y.den().degree().unwrap_or(0) >= 1 {
        for (r, _) in poly_roots(y.den()).map_err(CurveError::Algebra)? {
            singular.push(r);
        }
    }
    for bp in branch_points {
        singular.push(bp.z);
    }

    let radius_at = |p: Complex<F>| -> F {
        let mut best = F::infinity();
        for &s in &singular {
            let d = (s - p).norm();
            if d > F::from(1e-9).unwrap() && d < best {
                best = d;
            }
        }
        if best.is_finite() {
            F::from(0.4).unwrap() * best
        } else {
            F::from(0.5).unwrap()
        }
    };

    let mut residues = Vec::new();
    for p in poles {
        let f = |z: Complex<F>| -> Complex<F> {
            match (y.eval(z), dx.eval(z)) {
                (Some(a), Some(b)) => a * b,
                _ => Complex::new(F::nan(), F::nan()),
            }
        };
        let value = residue_quadrature(f, p, radius_at(p), NORMALIZATION_SAMPLES)
            .map_err(CurveError::Algebra)?;
        residues.push(PoleResidue { location: Some(p), value });
    }

    // Pole at infinity when deg num > deg den: residue via u = 1/z.
    let deg_num = x.num().degree().unwrap_or(0);
    let deg_den = x.den().degree().unwrap_or(0);
    if deg_num > deg_den {
        let mut umax = F::from(0.5).unwrap();
        for &s in &singular {
            let n = s.norm();
            if n > F::from(1e-9).unwrap() {
                let cand = F::from(0.4).unwrap() / n;
                if cand < umax {
                    umax = cand;
                }
            }
        }
        let g = |u: Complex<F>| -> Complex<F> {
            let z = Complex::new(F::one(), F::zero()) / u;
            match (y.eval(z), dx.eval(z)) {
                (Some(a), Some(b)) => a * b / (u * u),
                _ => Complex::new(F::nan(), F::nan()),
            }
        };
        let inner = residue_quadrature(
            g,
            Complex::new(F::zero(), F::zero()),
            umax,
            NORMALIZATION_SAMPLES,
        )
        .map_err(CurveError::Algebra)?;
        residues.push(PoleResidue { location: None, value: -inner });
    }

    let tol = F::from(NORMALIZATION_ATOL).unwrap();
    let resolvent_normalized = !residues.is_empty()
        && residues
            .iter()
            .all(|r| (r.value.norm() - F::one()).abs() <= tol);
    Ok(NormalizationReport { residues, resolvent_normalized })
}
