//! The cubic recursion engine for the correlators `W_k^(h)`.
//!
//! Values follow the reduced-dz convention: a correlator value is the
//! coefficient of `∏_i dz_i` of the corresponding differential form in the
//! uniformizing coordinate, e.g. `W_2^(0)(z_1, z_2) = 1/(z_1 - z_2)²`.
//!
//! # Recursion
//!
//! `W_{k+1}^{(h)}(p, z_K)` is a sum over branch points of residues of
//! `Σ_i Â_i(t) · (1/(p - ζ_0(t)) - 1/(p - o))` where `ζ_0(t) = a_s + t` is
//! the physical sheet over the branch point `a_s`, `o` is a generic
//! basepoint, and `Â_i` couples a fiber-ratio factor `R` to lower
//! correlators. The ratio family `R_k^{(h)}(used; a → i; z_K)` is a chain
//! recursion over the sheets of the fiber: each step hops to a sheet not
//! used before in the chain (the pairwise-distinct slot rule of the closed
//! interpolation formula), never to the target sheet `i`, and terminates
//! with `W_{k+1}^{(h)}(ζ_i, z_K)/x'(ζ_i)`. Loop (genus) steps prepend the
//! current sheet's point to the carried argument list.
//!
//! Truncation orders are chosen per call as `max(base, 6h + 2k + 8)` and the
//! whole evaluation is retried with doubled orders when a residue window is
//! missed.
//!
//! # Interpolation objects
//!
//! [`Engine::u_interp`] and [`Engine::identity_check`] build the degree-
//! `d2 - 1` interpolation (in `y`) of the sheet-indexed objects from sums of
//! correlator blocks over canonical slot configurations (see
//! [`crate::partition`]); `identity_check` evaluates the loop-equation
//! consistency identity sheet by sheet at a probe point and returns the
//! worst relative residual.

use std::cell::{Cell, RefCell};
use std::collections::HashMap;

use num_complex::Complex;

use crate::algebra::{rel_diff, Scalar, VarGen};
use crate::curve::{bergmann, third_kind, FiberData, SpectralCurve};
use crate::error::{CurveError, EvalError};
use crate::partition::enumerate_configs;
use crate::{c_from_f64, Real};

/// Default base truncation order for residue series.
pub const DEFAULT_BASE_ORDER: usize = 8;
/// Default number of order-doubling retries.
pub const DEFAULT_MAX_RETRIES: u32 = 3;
/// Default comparison tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Largest supported `k + h` for the interpolation objects.
pub const INTERP_BUDGET: usize = 6;
/// Relative threshold under which two evaluation points are considered
/// coincident (and rejected).
const COINCIDENCE_RTOL: f64 = 1e-12;

/// Evaluation configuration.
#[derive(Debug, Clone)]
pub struct EvalConfig<F: Real> {
    /// Base truncation order; the effective per-call order is
    /// `max(order, 6h + 2k + 8)`, doubled on each retry.
    pub order: usize,
    /// Basepoint `o` of the third-kind kernel. Any generic point works; the
    /// computed correlators are independent of it.
    pub basepoint: Complex<F>,
    /// Tolerance used by consumers when comparing values.
    pub tol: F,
    /// Number of order-doubling retries after the first attempt.
    pub max_retries: u32,
}

impl<F: Real> Default for EvalConfig<F> {
    fn default() -> Self {
        EvalConfig {
            order: DEFAULT_BASE_ORDER,
            // Arbitrary non-symmetric point unlikely to collide with fixture
            // structure (unit circles, small integers).
            basepoint: c_from_f64(0.3711, 0.5313),
            tol: F::from(DEFAULT_TOL).unwrap(),
            max_retries: DEFAULT_MAX_RETRIES,
        }
    }
}

/// A computed correlator value with evaluation diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelatorValue<F: Real> {
    /// The value, in the reduced-dz convention.
    pub value: Complex<F>,
    /// Base truncation order of the successful attempt.
    pub order_used: usize,
    /// Number of retries that were needed (0 = first attempt succeeded).
    pub retries: u32,
}

/// Memoization key: role (correlator vs ratio), genus, chain state, and
/// fingerprints of every argument (fiber identity first for ratios).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct MemoKey {
    role: u8,
    h: usize,
    a: usize,
    i: usize,
    used: u64,
    args: Vec<u64>,
}

/// A fiber of `x` through a regular point, with everything the sheet-indexed
/// objects need. Plays the role of [`FiberData`] away from branch points.
#[derive(Debug, Clone)]
struct GlobalFiber<F: Real> {
    /// Fiber points; index 0 is the probe point itself.
    z: Vec<Complex<F>>,
    /// `y` on the fiber.
    y: Vec<Complex<F>>,
    /// `x'` on the fiber.
    xp: Vec<Complex<F>>,
}

/// The correlator evaluation engine for one spectral curve.
///
/// Holds the memo tables and the variable-id generator; not `Sync` — use one
/// engine per thread.
pub struct Engine<'c, F: Real> {
    curve: &'c SpectralCurve<F>,
    cfg: EvalConfig<F>,
    vars: VarGen,
    /// Current order multiplier (doubles on retry).
    mult: Cell<usize>,
    memo: RefCell<HashMap<MemoKey, Scalar<F>>>,
    /// Cached branch-point sheet systems per (branch, order).
    fibers: RefCell<HashMap<(usize, usize), FiberData<F>>>,
}

impl<'c, F: Real> Engine<'c, F> {
    /// Creates an engine for `curve` with the given configuration.
    pub fn new(curve: &'c SpectralCurve<F>, cfg: EvalConfig<F>) -> Self {
        Engine {
            curve,
            cfg,
            vars: VarGen::new(),
            mult: Cell::new(1),
            memo: RefCell::new(HashMap::new()),
            fibers: RefCell::new(HashMap::new()),
        }
    }

    /// The engine's configuration.
    pub fn config(&self) -> &EvalConfig<F> {
        &self.cfg
    }

    /// The curve the engine evaluates on.
    pub fn curve(&self) -> &SpectralCurve<F> {
        self.curve
    }

    /// Effective truncation order for a call with `k` point arguments at
    /// genus `h`.
    fn call_order(&self, k: usize, h: usize) -> usize {
        self.cfg.order.max(6 * h + 2 * k + 8) * self.mult.get()
    }

    /// Runs `body` with retries: each retry doubles all truncation orders
    /// and clears the memo tables.
    fn with_retries<T>(
        &self,
        k: usize,
        h: usize,
        body: impl Fn(&Self) -> Result<T, EvalError>,
    ) -> Result<(T, u32), EvalError> {
        for attempt in 0..=self.cfg.max_retries {
            self.mult.set(1usize << attempt);
            self.memo.borrow_mut().clear();
            self.fibers.borrow_mut().clear();
            match body(self) {
                Ok(v) => return Ok((v, attempt)),
                Err(e) if e.is_retryable() && attempt < self.cfg.max_retries => continue,
                Err(e) if e.is_retryable() => {
                    return Err(EvalError::TruncationExhausted {
                        retries: self.cfg.max_retries,
                        order: self.call_order(k, h),
                    });
                }
                Err(e) => return Err(e),
            }
        }
        unreachable!("retry loop always returns");
    }

    /// Validates one evaluation point: finite, away from branch points, away
    /// from the basepoint.
    fn validate_point(&self, z: Complex<F>) -> Result<(), EvalError> {
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(EvalError::CoincidentPoints(format!("non-finite point {z}")));
        }
        self.curve.guard_point(z)?;
        let tol = F::from(COINCIDENCE_RTOL).unwrap() * (F::one() + z.norm());
        if (z - self.cfg.basepoint).norm() <= tol {
            return Err(EvalError::BasepointCollision {
                point: format!("{}", self.cfg.basepoint),
                what: format!("evaluation point {z}"),
            });
        }
        Ok(())
    }

    /// Validates a full point tuple: each point individually plus pairwise
    /// distinctness.
    fn validate_points(&self, points: &[Complex<F>]) -> Result<(), EvalError> {
        for &p in points {
            self.validate_point(p)?;
        }
        for (n, &p) in points.iter().enumerate() {
            for &q in points.iter().skip(n + 1) {
                let tol = F::from(COINCIDENCE_RTOL).unwrap() * (F::one() + p.norm());
                if (p - q).norm() <= tol {
                    return Err(EvalError::CoincidentPoints(format!("{p} appears twice")));
                }
            }
        }
        Ok(())
    }

    /// The correlator `W_k^(h)(points)` in the reduced-dz convention.
    ///
    /// `k` must equal `points.len()` and be at least 1.
    pub fn w(
        &self,
        k: usize,
        h: usize,
        points: &[Complex<F>],
    ) -> Result<CorrelatorValue<F>, EvalError> {
        assert_eq!(k, points.len(), "k must match the number of points");
        assert!(k >= 1, "correlators need at least one point");
        self.validate_points(points)?;
        let args: Vec<Scalar<F>> = points.iter().map(|&p| Scalar::from_c(p)).collect();
        let (value, retries) = self.with_retries(k, h, |eng| {
            let v = eng.w_scalar(h, &args)?;
            v.level0()
                .filter(|c| c.re.is_finite() && c.im.is_finite())
                .ok_or(EvalError::Algebra(crate::error::AlgebraError::NonFinite))
        })?;
        Ok(CorrelatorValue { value, order_used: self.call_order(k, h), retries })
    }

    /// The fiber-ratio `R_k^(h)(0 → i)(z; points)`: the chain object over the
    /// fiber of `x` through `z`, starting on the physical sheet of `z` with
    /// target sheet `i ∈ 1..=d2`.
    pub fn r(
        &self,
        i: usize,
        k: usize,
        h: usize,
        z: Complex<F>,
        points: &[Complex<F>],
    ) -> Result<CorrelatorValue<F>, EvalError> {
        assert_eq!(k, points.len(), "k must match the number of points");
        let d2 = self.curve.d2();
        if i == 0 || i > d2 {
            return Err(EvalError::SheetIndexOutOfRange { index: i, d2 });
        }
        self.validate_point(z)?;
        self.validate_points(points)?;
        let (value, retries) = self.with_retries(k + 1, h, |eng| {
            let gf = eng.global_fiber(z)?;
            let fb = gf.as_fiber_data();
            let pts: Vec<Scalar<F>> = points.iter().map(|&p| Scalar::from_c(p)).collect();
            let v = eng.r_scalar(&fb, 1, 0, i, h, &pts)?;
            v.level0()
                .filter(|c| c.re.is_finite() && c.im.is_finite())
                .ok_or(EvalError::Algebra(crate::error::AlgebraError::NonFinite))
        })?;
        Ok(CorrelatorValue { value, order_used: self.call_order(k + 1, h), retries })
    }

    /// `W_k^(h)` on series/complex scalar arguments; `k = args.len()`.
    fn w_scalar(&self, h: usize, args: &[Scalar<F>]) -> Result<Scalar<F>, EvalError> {
        let k = args.len();
        debug_assert!(k >= 1);
        if h == 0 && k == 1 {
            return Ok(Scalar::zero());
        }
        if h == 0 && k == 2 {
            return Ok(bergmann(&args[0], &args[1])?);
        }
        let key = MemoKey {
            role: 0,
            h,
            a: 0,
            i: 0,
            used: 0,
            args: args.iter().map(Scalar::fingerprint).collect(),
        };
        if let Some(v) = self.memo.borrow().get(&key) {
            return Ok(v.clone());
        }

        let zp = &args[0];
        let carried = &args[1..];
        let order = self.call_order(k, h);
        let o = Scalar::from_c(self.cfg.basepoint);
        let mut total = Scalar::zero();
        for s in 0..self.curve.branch_points().len() {
            let fb = self.fiber(s, order)?;
            let ds = third_kind(zp, &fb.zeta[0], &o)?;
            let mut hat_sum = Scalar::zero();
            for i in 1..=self.curve.d2() {
                hat_sum = hat_sum.add(&self.hat_a(&fb, i, h, carried)?);
            }
            let res = hat_sum.mul(&ds).residue(fb.var)?;
            total = total.add(&res);
        }
        self.memo.borrow_mut().insert(key, total.clone());
        Ok(total)
    }

    /// The coupling `Â_i(t)` of the correlator recursion: all ways to pair a
    /// ratio factor with a lower correlator, plus the genus-reduction term.
    fn hat_a(
        &self,
        fb: &FiberData<F>,
        i: usize,
        h: usize,
        carried: &[Scalar<F>],
    ) -> Result<Scalar<F>, EvalError> {
        let kc = carried.len();
        let mut acc = Scalar::zero();
        for m in 0..=h {
            for j in 0..=kc {
                if (m == 0 && j == 0) || (m == h && j == kc) {
                    // (0,0): no ratio factor of order zero on a distinct
                    // sheet; (h,kc): the correlator partner would be the
                    // vanishing one-point planar function.
                    continue;
                }
                for sel in combinations(kc, j) {
                    let (zj, zrest) = split(carried, &sel);
                    let r_part = self.r_scalar(fb, 1, 0, i, m, &zj)?;
                    if r_part.is_c_zero() {
                        continue;
                    }
                    let mut wargs = Vec::with_capacity(kc - j + 1);
                    wargs.push(fb.zeta[0].clone());
                    wargs.extend(zrest.iter().cloned());
                    let w_part = self.w_scalar(h - m, &wargs)?;
                    if w_part.is_c_zero() {
                        continue;
                    }
                    acc = acc.add(&r_part.mul(&w_part));
                }
            }
        }
        if h >= 1 {
            let mut rpts = Vec::with_capacity(kc + 1);
            rpts.push(fb.zeta[0].clone());
            rpts.extend(carried.iter().cloned());
            acc = acc.add(&self.r_scalar(fb, 1, 0, i, h - 1, &rpts)?);
        }
        Ok(acc)
    }

    /// The chain recursion for the fiber ratio
    /// `R_k^(h)(used; a → i; pts)`.
    ///
    /// `used` is the bitmask of sheet indices already visited by the chain
    /// (bit 0 is always set: chains start on the physical sheet); `a` is the
    /// current sheet, `i` the target. Chain hops go to sheets outside
    /// `used ∪ {i}` — the pairwise-distinct slot rule — which also keeps
    /// every kernel argument pair non-coincident.
    fn r_scalar(
        &self,
        fb: &FiberData<F>,
        used: u64,
        a: usize,
        i: usize,
        h: usize,
        pts: &[Scalar<F>],
    ) -> Result<Scalar<F>, EvalError> {
        let k = pts.len();
        if k == 0 && h == 0 {
            return Ok(if a == i { Scalar::one() } else { Scalar::zero() });
        }
        let mut args = vec![fb.zeta[0].fingerprint()];
        args.extend(pts.iter().map(Scalar::fingerprint));
        let key = MemoKey { role: 1, h, a, i, used, args };
        if let Some(v) = self.memo.borrow().get(&key) {
            return Ok(v.clone());
        }

        let d2 = self.curve.d2();
        let hop_targets: Vec<usize> = (1..=d2)
            .filter(|&l| used & (1 << l) == 0 && l != i)
            .collect();
        let mut acc = Scalar::zero();

        // Split terms: a correlator block leaves the chain at sheet l.
        for m in 0..=h {
            for j in 0..=k {
                if (m == 0 && j == 0) || (m == h && j == k) {
                    // (0,0): the block would be the vanishing one-point
                    // planar correlator; (h,k): the remaining chain would be
                    // a zero Kronecker delta (the target is never a hop).
                    continue;
                }
                for sel in combinations(k, j) {
                    let (zj, zrest) = split(pts, &sel);
                    for &l in &hop_targets {
                        let mut wargs = Vec::with_capacity(j + 1);
                        wargs.push(fb.zeta[l].clone());
                        wargs.extend(zj.iter().cloned());
                        let w_part = self.w_scalar(m, &wargs)?;
                        if w_part.is_c_zero() {
                            continue;
                        }
                        let r_part =
                            self.r_scalar(fb, used | (1 << l), l, i, h - m, &zrest)?;
                        if r_part.is_c_zero() {
                            continue;
                        }
                        acc = acc.add(&w_part.mul(&r_part).div(&fb.xp[l])?);
                    }
                }
            }
        }

        // Loop (genus) terms: hop to sheet l and carry its point forward.
        if h >= 1 {
            for &l in &hop_targets {
                let mut rpts = Vec::with_capacity(k + 1);
                rpts.push(fb.zeta[l].clone());
                rpts.extend(pts.iter().cloned());
                let r_part = self.r_scalar(fb, used | (1 << l), l, i, h - 1, &rpts)?;
                if !r_part.is_c_zero() {
                    acc = acc.add(&r_part.div(&fb.xp[l])?);
                }
            }
        }

        // Terminal: the chain arrives at the target sheet.
        {
            let mut wargs = Vec::with_capacity(k + 1);
            wargs.push(fb.zeta[i].clone());
            wargs.extend(pts.iter().cloned());
            let w_part = self.w_scalar(h, &wargs)?;
            if !w_part.is_c_zero() {
                acc = acc.add(&w_part.div(&fb.xp[i])?);
            }
        }

        let denom = fb.y[i].sub(&fb.y[a]);
        let out = acc.div(&denom)?;
        self.memo.borrow_mut().insert(key, out.clone());
        Ok(out)
    }

    /// Fetches (or computes) the sheet system over branch point `s` at the
    /// given truncation order, re-tagged onto a fresh variable id.
    fn fiber(&self, s: usize, order: usize) -> Result<FiberData<F>, EvalError> {
        if let Some(fb) = self.fibers.borrow().get(&(s, order)) {
            return Ok(fb.retag(self.vars.fresh()));
        }
        let fb = self.curve.fiber_series(s, order, &self.vars)?;
        let out = fb.retag(self.vars.fresh());
        self.fibers.borrow_mut().insert((s, order), fb);
        Ok(out)
    }

    /// The fiber of `x` through a regular probe point, with `y` and `x'`.
    fn global_fiber(&self, z: Complex<F>) -> Result<GlobalFiber<F>, EvalError> {
        let sheets = self.curve.sheets_global(z)?;
        let y = self.curve.fiber_y(&sheets)?;
        let xp = sheets
            .iter()
            .map(|&w| {
                self.curve.dx().eval(w).ok_or_else(|| {
                    EvalError::Curve(CurveError::CoincidentPoints(format!(
                        "fiber point {w} is a pole of x'"
                    )))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(GlobalFiber { z: sheets, y, xp })
    }

    /// `W` at plain complex arguments, as a complex number.
    fn w_complex(&self, h: usize, args: &[Complex<F>]) -> Result<Complex<F>, EvalError> {
        let sargs: Vec<Scalar<F>> = args.iter().map(|&p| Scalar::from_c(p)).collect();
        self.w_scalar(h, &sargs)?
            .level0()
            .filter(|c| c.re.is_finite() && c.im.is_finite())
            .ok_or(EvalError::Algebra(crate::error::AlgebraError::NonFinite))
    }

    /// `W_{|args|}^{(h)}(args) / ∏ x'(arg)`: the normalized block used by the
    /// interpolation objects. `fiber_xp[s]` supplies `x'` on fiber points;
    /// external points use `x'` evaluated directly.
    fn wx_block(
        &self,
        h: usize,
        args: &[Complex<F>],
        xps: &[Complex<F>],
    ) -> Result<Complex<F>, EvalError> {
        debug_assert_eq!(args.len(), xps.len());
        let w = self.w_complex(h, args)?;
        let mut denom = Complex::new(F::one(), F::zero());
        for &xp in xps {
            denom = denom * xp;
        }
        Ok(w / denom)
    }

    /// `x'` at an external point, as needed by the normalized blocks.
    fn xp_at(&self, z: Complex<F>) -> Result<Complex<F>, EvalError> {
        self.curve.dx().eval(z).ok_or_else(|| {
            EvalError::Curve(CurveError::CoincidentPoints(format!(
                "point {z} is a pole of x'"
            )))
        })
    }

    /// The sheet-indexed interpolation object
    /// `UE(l, m; a → e; pts)` over a global fiber: a sum over canonical slot
    /// configurations of products of normalized correlator blocks.
    fn ue(
        &self,
        l: usize,
        m: usize,
        gf: &GlobalFiber<F>,
        a: usize,
        e: usize,
        pts: &[Complex<F>],
    ) -> Result<Complex<F>, EvalError> {
        debug_assert_eq!(pts.len(), l);
        debug_assert_ne!(a, e);
        let d2 = self.curve.d2();
        let pool: Vec<usize> = (0..=d2).filter(|&s| s != a && s != e).collect();
        let pts_xp: Vec<Complex<F>> = pts
            .iter()
            .map(|&p| self.xp_at(p))
            .collect::<Result<Vec<_>, _>>()?;
        let zero = Complex::new(F::zero(), F::zero());
        let mut sum = zero;
        for term in enumerate_configs(l, &pool, m) {
            let mut prod = Complex::new(F::one(), F::zero());
            for (bi, block) in term.blocks.iter().enumerate() {
                let mut args: Vec<Complex<F>> = Vec::new();
                let mut xps: Vec<Complex<F>> = Vec::new();
                if bi == 0 {
                    args.push(gf.z[e]);
                    xps.push(gf.xp[e]);
                } else {
                    args.push(gf.z[block.slots[0]]);
                    xps.push(gf.xp[block.slots[0]]);
                }
                for &x in &block.exts {
                    args.push(pts[x]);
                    xps.push(pts_xp[x]);
                }
                let extra_slots = if bi == 0 { &block.slots[..] } else { &block.slots[1..] };
                for &s in extra_slots {
                    args.push(gf.z[s]);
                    xps.push(gf.xp[s]);
                }
                prod = prod * self.wx_block(block.genus, &args, &xps)?;
                if prod == zero {
                    break;
                }
            }
            if prod == zero {
                continue;
            }
            for block in &term.blocks {
                for &s in &block.slots {
                    prod = prod / (gf.y[e] - gf.y[s]);
                }
            }
            sum = sum + prod;
        }
        let ey_e = self.curve.ey_at(&gf.y, e);
        Ok(ey_e / (gf.y[e] - gf.y[a]) * sum)
    }

    /// The diagonal combination `-ey(a) Σ_{e≠a} UE(l, m; a → e; pts)/ey(e)`.
    fn ue_diag(
        &self,
        l: usize,
        m: usize,
        gf: &GlobalFiber<F>,
        a: usize,
        pts: &[Complex<F>],
    ) -> Result<Complex<F>, EvalError> {
        let d2 = self.curve.d2();
        let mut sum = Complex::new(F::zero(), F::zero());
        for e in 0..=d2 {
            if e == a {
                continue;
            }
            let ey_e = self.curve.ey_at(&gf.y, e);
            sum = sum + self.ue(l, m, gf, a, e, pts)? / ey_e;
        }
        Ok(-self.curve.ey_at(&gf.y, a) * sum)
    }

    /// The interpolated object `U_k^(h)(z, y_sample; points)`: the unique
    /// degree-`d2 - 1` polynomial in `y` through the sheet values
    /// `UE(k, h; 0 → i)`, evaluated at `y_sample` and rescaled by
    /// `x'(z) ∏ x'(points)`.
    pub fn u_interp(
        &self,
        k: usize,
        h: usize,
        z: Complex<F>,
        y_sample: Complex<F>,
        points: &[Complex<F>],
    ) -> Result<CorrelatorValue<F>, EvalError> {
        assert_eq!(k, points.len(), "k must match the number of points");
        if k + h > INTERP_BUDGET {
            return Err(EvalError::BudgetExceeded { total: k + h, budget: INTERP_BUDGET });
        }
        self.validate_point(z)?;
        self.validate_points(points)?;
        let (value, retries) = self.with_retries(k + 1, h, |eng| {
            let gf = eng.global_fiber(z)?;
            let d2 = eng.curve.d2();
            let mut scale = eng.xp_at(z)?;
            for &p in points {
                scale = scale * eng.xp_at(p)?;
            }
            if k == 0 && h == 0 {
                // Closed form: the fiber polynomial in y divided by its root
                // factor at the physical sheet.
                let mut prod = -eng.curve.g2_lead();
                for i in 1..=d2 {
                    prod = prod * (y_sample - gf.y[i]);
                }
                return Ok(prod * eng.xp_at(z)?);
            }
            let mut nodes = Vec::with_capacity(d2);
            for i in 1..=d2 {
                nodes.push((gf.y[i], eng.ue(k, h, &gf, 0, i, points)?));
            }
            // Lagrange interpolation at y_sample.
            let mut p = Complex::new(F::zero(), F::zero());
            for (i, &(yi, ui)) in nodes.iter().enumerate() {
                let mut basis = Complex::new(F::one(), F::zero());
                for (j, &(yj, _)) in nodes.iter().enumerate() {
                    if j != i {
                        basis = basis * (y_sample - yj) / (yi - yj);
                    }
                }
                p = p + ui * basis;
            }
            Ok(p * scale)
        })?;
        Ok(CorrelatorValue { value, order_used: self.call_order(k + 1, h), retries })
    }

    /// Evaluates the loop-equation consistency identity at a probe point `z`
    /// and returns the worst relative residual over the non-physical sheets.
    ///
    /// The diagonal side pairs correlator blocks anchored at `z` with the
    /// diagonal interpolated object; for each non-physical sheet `i` the
    /// sheet side pairs the same blocks re-anchored at `zⁱ` with the
    /// off-diagonal object, plus the mismatch term `(y₀ − yᵢ)·UE(k,h; i→0)`.
    /// Both sides agree sheet by sheet when the engine is consistent, so the
    /// residual measures the joint correctness of `w`, `ue`, and the
    /// interpolation data.
    pub fn identity_check(
        &self,
        k: usize,
        h: usize,
        z: Complex<F>,
        points: &[Complex<F>],
    ) -> Result<F, EvalError> {
        assert_eq!(k, points.len(), "k must match the number of points");
        assert!(k >= 1, "the identity needs at least one carried point");
        if k + h > INTERP_BUDGET {
            return Err(EvalError::BudgetExceeded { total: k + h, budget: INTERP_BUDGET });
        }
        self.validate_point(z)?;
        self.validate_points(points)?;
        let (residual, _) = self.with_retries(k + 1, h, |eng| {
            let gf = eng.global_fiber(z)?;
            let d2 = eng.curve.d2();
            let zero = Complex::new(F::zero(), F::zero());

            // Diagonal side, computed once. The top `(h, k)` block pairs with
            // the level-zero diagonal object, whose value is the fiber
            // discriminant factor `ey` at the physical sheet.
            let mut lhs = zero;
            for m in 0..=h {
                for j in 0..=k {
                    if m == 0 && j == 0 {
                        // Pairs with the vanishing one-point planar
                        // correlator.
                        continue;
                    }
                    for sel in combinations(k, j) {
                        let (zj, zrest) = split_c(points, &sel);
                        let mut args = vec![z];
                        args.extend(zj.iter().copied());
                        let mut xps = vec![eng.xp_at(z)?];
                        for &p in &zj {
                            xps.push(eng.xp_at(p)?);
                        }
                        let wx = eng.wx_block(m, &args, &xps)?;
                        if wx == zero {
                            continue;
                        }
                        let partner = if m == h && j == k {
                            eng.curve.ey_at(&gf.y, 0)
                        } else {
                            eng.ue_diag(k - j, h - m, &gf, 0, &zrest)?
                        };
                        lhs = lhs + wx * partner;
                    }
                }
            }
            if h >= 1 {
                let mut pts2 = vec![z];
                pts2.extend(points.iter().copied());
                lhs = lhs + eng.ue_diag(k + 1, h - 1, &gf, 0, &pts2)?;
            }

            // Sheet side: one equation per non-physical sheet; the top block
            // is replaced by the sheet-mismatch term.
            let mut worst = F::zero();
            for i in 1..=d2 {
                let wi = gf.z[i];
                let mut rhs = (gf.y[0] - gf.y[i]) * eng.ue(k, h, &gf, i, 0, points)?;
                for m in 0..=h {
                    for j in 0..=k {
                        if (m == 0 && j == 0) || (m == h && j == k) {
                            continue;
                        }
                        for sel in combinations(k, j) {
                            let (zj, zrest) = split_c(points, &sel);
                            let mut args = vec![wi];
                            args.extend(zj.iter().copied());
                            let mut xps = vec![gf.xp[i]];
                            for &p in &zj {
                                xps.push(eng.xp_at(p)?);
                            }
                            let wx = eng.wx_block(m, &args, &xps)?;
                            if wx == zero {
                                continue;
                            }
                            rhs = rhs + wx * eng.ue(k - j, h - m, &gf, i, 0, &zrest)?;
                        }
                    }
                }
                if h >= 1 {
                    let mut pts2 = vec![wi];
                    pts2.extend(points.iter().copied());
                    rhs = rhs + eng.ue(k + 1, h - 1, &gf, i, 0, &pts2)?;
                }

                let diff = (lhs - rhs).norm();
                let scale = lhs.norm().max(rhs.norm());
                let rel = if scale > F::zero() { diff / scale } else { diff };
                if rel > worst {
                    worst = rel;
                }
            }
            Ok(worst)
        })?;
        Ok(residual)
    }
}

impl<F: Real> GlobalFiber<F> {
    /// Views the global fiber as constant-coefficient [`FiberData`] so the
    /// chain recursion can run on it directly. The variable and branch tags
    /// are unused for constant fibers.
    fn as_fiber_data(&self) -> FiberData<F> {
        FiberData {
            var: 0,
            branch: 0,
            zeta: self.z.iter().map(|&c| Scalar::from_c(c)).collect(),
            y: self.y.iter().map(|&c| Scalar::from_c(c)).collect(),
            xp: self.xp.iter().map(|&c| Scalar::from_c(c)).collect(),
        }
    }
}

/// All `j`-element index subsets of `0..n`, in lexicographic order.
pub(crate) fn combinations(n: usize, j: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, j: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == j {
            out.push(cur.clone());
            return;
        }
        for idx in start..n {
            if n - idx < j - cur.len() {
                break;
            }
            cur.push(idx);
            rec(idx + 1, n, j, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, j, &mut Vec::with_capacity(j), &mut out);
    out
}

/// Splits `items` into (selected, rest) by the index subset `sel`.
pub(crate) fn split<T: Clone>(items: &[T], sel: &[usize]) -> (Vec<T>, Vec<T>) {
    let mut chosen = Vec::with_capacity(sel.len());
    let mut rest = Vec::with_capacity(items.len() - sel.len());
    for (idx, item) in items.iter().enumerate() {
        if sel.contains(&idx) {
            chosen.push(item.clone());
        } else {
            rest.push(item.clone());
        }
    }
    (chosen, rest)
}

/// [`split`] for copyable complex points.
fn split_c<F: Real>(items: &[Complex<F>], sel: &[usize]) -> (Vec<Complex<F>>, Vec<Complex<F>>) {
    split(items, sel)
}

/// Convenience: relative difference between two complex values.
pub fn value_rel_diff<F: Real>(a: Complex<F>, b: Complex<F>) -> F {
    rel_diff(&Scalar::from_c(a), &Scalar::from_c(b))
}
