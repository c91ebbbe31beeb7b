//! Multi-valent correlator recursion.
//!
//! This module computes the same reduced-dz correlators `W_k^(h)` as
//! [`crate::correlators::Engine`], but through a structurally different
//! recursion: instead of threading chains of fiber ratios sheet by sheet, it
//! couples the recursion root directly to *block configurations* — canonical
//! partitions of the carried points and fiber sheets into lower correlators
//! (see [`crate::partition`]). Each vertex of the resulting expansion can
//! have any valence, so the expansion is much shorter at high order, at the
//! price of enumerating partitions.
//!
//! Concretely, with `ζ_0, …, ζ_{d2}` the fiber of `x` over a point `t` near a
//! branch point, `y_i = y(ζ_i)`, and `dS(z; ζ_0, o) = 1/(z-ζ_0) - 1/(z-o)`
//! the reduced third-kind kernel with basepoint `o`:
//!
//! ```text
//! W_{k+1}^(h)(z, K) = Σ_s Res_{t→a_s} Σ_{e=1}^{d2} 1/(y_e - y_0) ·
//!     [ Σ'_{(m,j)} Σ_{J⊆K, |J|=j} S_e(j, m; J) · W_{k-j+1}^{(h-m)}(ζ_0, K∖J)
//!       + [h ≥ 1] · S_e(k+1, h-1; (ζ_0, K)) ] · dS(z; ζ_0, o)
//! ```
//!
//! where the primed sum skips `(m,j) = (0,0)` and `(h,k)`, and `S_e(l, m; pts)`
//! sums over the canonical block configurations of the `l` points with slot
//! pool `{1..d2}∖{e}` and genus budget `m`:
//!
//! ```text
//! S_e(l, m; pts) = Σ_{cfg} Π_α [ W_{k_α+1}^{(h_α)}(lead_α, exts_α, slots_α) /
//!                                Π_{fiber args of α} x'(ζ) ]
//!                          · Π_{all slots of cfg} 1/(y_e - y_slot)
//! ```
//!
//! The pinned block (α = 0) leads with `ζ_e`; every other block leads with its
//! anchor slot. Only fiber arguments (the lead and the non-anchor slots)
//! divide by `x'`; external points enter plainly. Each canonical configuration
//! is counted once: set-based slot enumeration already absorbs the ordered
//! tuple multiplicity (see [`omega_factor`]).
//!
//! All correlators on the right-hand side are computed by this same
//! recursion — the module shares only the series algebra, the curve fibers,
//! and the partition enumerator with the rest of the crate, which makes it an
//! independent cross-check of the chain-based engine.

use std::cell::{Cell, RefCell};
use std::collections::HashMap;

use num_complex::Complex;

use crate::algebra::{Scalar, VarGen};
use crate::correlators::{combinations, split, CorrelatorValue, EvalConfig};
use crate::curve::{bergmann, third_kind, FiberData, SpectralCurve};
use crate::error::{AlgebraError, EvalError};
use crate::partition::{enumerate_configs, PartitionTerm};
use crate::Real;

/// Relative tolerance below which two evaluation points count as coincident.
const COINCIDENCE_RTOL: f64 = 1e-12;

/// Maximum `k + 2h` accepted by [`EffectiveEngine::w`]. The partition
/// recursion enumerates block configurations at every level; beyond this
/// complexity the enumeration (and the nested series orders it forces) grows
/// too fast to be useful.
pub const PARTITION_BUDGET: usize = 10;

/// The symmetry weight of one block configuration: the number of ordered
/// slot-tuple assignments that collapse onto this canonical set-based term.
///
/// A block with `n` non-anchor slots (all slots for the pinned block, all but
/// the first for anchored blocks) can receive them in `n!` orders; the weight
/// is the product of those factorials. An enumeration over ordered tuples
/// would produce each canonical term this many times and carry the inverse as
/// a prefactor — with the canonical set enumeration of
/// [`crate::partition::enumerate_configs`] the two cancel, so evaluation sums
/// canonical terms with weight one. The function is exposed so the diagram
/// exporter can label vertices with their multiplicities.
pub fn omega_factor(term: &PartitionTerm) -> u64 {
    term.blocks
        .iter()
        .enumerate()
        .map(|(bi, block)| {
            let extras = if bi == 0 {
                block.slots.len()
            } else {
                block.slots.len() - 1
            };
            (1..=extras as u64).product::<u64>().max(1)
        })
        .product()
}

/// Memo key: genus plus argument fingerprints (`args[0]` is the recursion
/// root).
#[derive(PartialEq, Eq, Hash)]
struct KeyEff {
    h: usize,
    args: Vec<u64>,
}

/// The multi-valent correlator engine.
pub struct EffectiveEngine<'c, F: Real> {
    curve: &'c SpectralCurve<F>,
    cfg: EvalConfig<F>,
    vars: VarGen,
    mult: Cell<usize>,
    memo: RefCell<HashMap<KeyEff, Scalar<F>>>,
    fibers: RefCell<HashMap<(usize, usize), FiberData<F>>>,
}

impl<'c, F: Real> EffectiveEngine<'c, F> {
    /// Creates an engine for `curve` with evaluation configuration `cfg`.
    pub fn new(curve: &'c SpectralCurve<F>, cfg: EvalConfig<F>) -> Self {
        EffectiveEngine {
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

    /// Runs `body` with retries: each retry doubles all truncation orders and
    /// clears the memo tables.
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
    /// from the basepoint (the recursion kernel has a pole there).
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

    /// The correlator `W_k^(h)(points)` in the reduced-dz convention,
    /// computed by the multi-valent partition recursion.
    ///
    /// Fails with [`EvalError::PartitionBudgetExceeded`] when `k + 2h`
    /// exceeds [`PARTITION_BUDGET`].
    pub fn w(
        &self,
        k: usize,
        h: usize,
        points: &[Complex<F>],
    ) -> Result<CorrelatorValue<F>, EvalError> {
        assert_eq!(k, points.len(), "k must match the number of points");
        assert!(k >= 1, "correlators need at least one point");
        let total = k + 2 * h;
        if total > PARTITION_BUDGET {
            return Err(EvalError::PartitionBudgetExceeded {
                total,
                budget: PARTITION_BUDGET,
            });
        }
        self.validate_points(points)?;
        let args: Vec<Scalar<F>> = points.iter().map(|&p| Scalar::from_c(p)).collect();
        let (value, retries) = self.with_retries(k, h, |eng| {
            let v = eng.w_scalar(h, &args)?;
            v.level0()
                .filter(|c| c.re.is_finite() && c.im.is_finite())
                .ok_or(EvalError::Algebra(AlgebraError::NonFinite))
        })?;
        Ok(CorrelatorValue { value, order_used: self.call_order(k, h), retries })
    }

    /// Fetches (or computes) the fiber over branch point `s`, re-tagged onto
    /// a fresh variable id.
    fn fiber(&self, s: usize, order: usize) -> Result<FiberData<F>, EvalError> {
        if let Some(fb) = self.fibers.borrow().get(&(s, order)) {
            return Ok(fb.retag(self.vars.fresh()));
        }
        let fb = self.curve.fiber_series(s, order, &self.vars)?;
        let out = fb.retag(self.vars.fresh());
        self.fibers.borrow_mut().insert((s, order), fb);
        Ok(out)
    }

    /// `W_k^(h)` on scalar arguments; `args[0]` is the recursion root.
    fn w_scalar(&self, h: usize, args: &[Scalar<F>]) -> Result<Scalar<F>, EvalError> {
        let k = args.len();
        debug_assert!(k >= 1);
        if h == 0 && k == 1 {
            return Ok(Scalar::zero());
        }
        if h == 0 && k == 2 {
            return Ok(bergmann(&args[0], &args[1])?);
        }
        let key = KeyEff { h, args: args.iter().map(Scalar::fingerprint).collect() };
        if let Some(v) = self.memo.borrow().get(&key) {
            return Ok(v.clone());
        }

        let zp = &args[0];
        let carried = &args[1..];
        let kc = carried.len();
        let order = self.call_order(k, h);
        let o = Scalar::from_c(self.cfg.basepoint);
        let mut total = Scalar::zero();
        for s in 0..self.curve.branch_points().len() {
            let fb = self.fiber(s, order)?;
            let ds = third_kind(zp, &fb.zeta[0], &o)?;
            let mut bracket = Scalar::zero();
            for e in 1..=self.curve.d2() {
                let mut inner = Scalar::zero();
                for m in 0..=h {
                    for j in 0..=kc {
                        if (m == 0 && j == 0) || (m == h && j == kc) {
                            // (0,0): an order-zero block sum has no content;
                            // (h,kc): the correlator partner would be the
                            // vanishing one-point planar function.
                            continue;
                        }
                        for sel in combinations(kc, j) {
                            let (zj, zrest) = split(carried, &sel);
                            let s_part = self.block_sum(&fb, e, m, &zj)?;
                            if s_part.is_c_zero() {
                                continue;
                            }
                            let mut wargs = Vec::with_capacity(kc - j + 1);
                            wargs.push(fb.zeta[0].clone());
                            wargs.extend(zrest.iter().cloned());
                            let w_part = self.w_scalar(h - m, &wargs)?;
                            if w_part.is_c_zero() {
                                continue;
                            }
                            inner = inner.add(&s_part.mul(&w_part));
                        }
                    }
                }
                if h >= 1 {
                    // Genus reduction: the physical-sheet point joins the
                    // carried points as a plain external of the block sum.
                    let mut gpts = Vec::with_capacity(kc + 1);
                    gpts.push(fb.zeta[0].clone());
                    gpts.extend(carried.iter().cloned());
                    inner = inner.add(&self.block_sum(&fb, e, h - 1, &gpts)?);
                }
                bracket = bracket.add(&inner.div(&fb.y[e].sub(&fb.y[0]))?);
            }
            let res = bracket.mul(&ds).residue(fb.var)?;
            total = total.add(&res);
        }
        self.memo.borrow_mut().insert(key, total.clone());
        Ok(total)
    }

    /// The block-configuration sum `S_e(l, extra; pts)` over canonical
    /// partitions of `pts` with slot pool `{1..d2}∖{e}` and genus budget
    /// `extra` (see the module docs).
    fn block_sum(
        &self,
        fb: &FiberData<F>,
        e: usize,
        extra: usize,
        pts: &[Scalar<F>],
    ) -> Result<Scalar<F>, EvalError> {
        let d2 = self.curve.d2();
        let pool: Vec<usize> = (1..=d2).filter(|&s| s != e).collect();
        let mut sum = Scalar::zero();
        'terms: for term in enumerate_configs(pts.len(), &pool, extra) {
            let mut prod = Scalar::one();
            for (bi, block) in term.blocks.iter().enumerate() {
                let (lead, tail) = if bi == 0 {
                    (e, &block.slots[..])
                } else {
                    (block.slots[0], &block.slots[1..])
                };
                let mut wargs = Vec::with_capacity(1 + block.exts.len() + tail.len());
                wargs.push(fb.zeta[lead].clone());
                for &x in &block.exts {
                    wargs.push(pts[x].clone());
                }
                for &sl in tail {
                    wargs.push(fb.zeta[sl].clone());
                }
                let w_val = self.w_scalar(block.genus, &wargs)?;
                if w_val.is_c_zero() {
                    continue 'terms;
                }
                prod = prod.mul(&w_val).div(&fb.xp[lead])?;
                for &sl in tail {
                    prod = prod.div(&fb.xp[sl])?;
                }
            }
            for block in &term.blocks {
                for &sl in &block.slots {
                    prod = prod.div(&fb.y[e].sub(&fb.y[sl]))?;
                }
            }
            sum = sum.add(&prod);
        }
        Ok(sum)
    }
}
