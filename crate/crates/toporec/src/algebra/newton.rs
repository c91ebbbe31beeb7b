//! Newton iteration for implicit series solutions `w(t)` of `F(w, t) = 0`.
//!
//! Each step computes the derivative `∂F/∂w` by automatic differentiation:
//! the current iterate is perturbed by a fresh two-term series `ε` (window
//! `[0, 2)`), `F` is evaluated once on `w + ε`, and the first-order
//! coefficient in `ε` is extracted. No symbolic derivative of `F` is needed,
//! so callers can pass arbitrary rational expressions.
//!
//! For a regular sheet the seed is a constant and the number of correct
//! coefficients doubles per step. At a simple ramification point the
//! derivative has valuation 1 in `t`, the doubling degrades to `n → 2n - 1`,
//! and the seed must already carry two correct terms; callers supply that
//! ansatz explicitly.

use crate::algebra::scalar::{LaurentSeries, Scalar, VarGen};
use crate::error::AlgebraError;
use crate::Real;

/// Residual acceptance for the converged solution, relative to the larger of
/// 1 and the solution magnitude. Newton residuals bottom out at the roundoff
/// of the arithmetic chain (~1e-15 per operation); 1e-9 leaves room for
/// long cancellation chains while still rejecting a wrong branch outright.
const NEWTON_RESID_RTOL: f64 = 1e-9;

/// Hard cap on Newton sweeps. Convergence doubles correct coefficients per
/// sweep, so 64 covers any practical truncation order many times over; the
/// cap only guards against a non-converging functional.
const NEWTON_MAX_ITERS: usize = 64;

/// Solves `F(w, t) = 0` for `w` as a series in the variable of `t`.
///
/// * `f` — evaluator of `F`; called with scalar towers for `w` and `t`.
/// * `w0` — initial iterate: a constant for a regular sheet, or a series in
///   `t`'s variable carrying the two-term ramified ansatz.
/// * `t` — the independent-variable seed series (typically `center + t`)
///   whose window length sets the achievable order.
/// * `vars` — variable allocator; fresh ids are drawn for the perturbation
///   so they nest strictly inside existing variables.
pub fn newton_series_solve<F, E>(
    f: E,
    w0: &Scalar<F>,
    t: &LaurentSeries<F>,
    vars: &VarGen,
) -> Result<LaurentSeries<F>, AlgebraError>
where
    F: Real,
    E: Fn(&Scalar<F>, &Scalar<F>) -> Result<Scalar<F>, AlgebraError>,
{
    let t_s = Scalar::from_series(t.clone());
    let mut w = w0.clone();
    let mut prev_val = i64::MIN;
    for _ in 0..NEWTON_MAX_ITERS {
        let fw = f(&w, &t_s)?;
        if !fw.is_finite() {
            return Err(AlgebraError::NonFinite);
        }
        // Progress is measured by the valuation of the residual in t:
        // coefficients beyond the converged order stay O(1) until their
        // sweep, so a max-norm test would never fire early.
        let scale = F::one().max(w.max_abs());
        let thresh = F::from(1e-13).unwrap() * scale;
        let val = match fw.as_series() {
            Some(s) if s.var() == t.var() => {
                match s.coeffs().iter().position(|c| c.max_abs() > thresh) {
                    Some(i) => Some(s.lowest() + i as i64),
                    None => None, // zero on its whole window: converged
                }
            }
            _ => {
                if fw.max_abs() <= thresh {
                    None
                } else {
                    Some(0) // nonzero constant residual: no series progress
                }
            }
        };
        let val = match val {
            None => break,
            Some(v) => v,
        };
        if val <= prev_val {
            break; // stalled; the post-check below decides pass/fail
        }
        prev_val = val;

        // Derivative via a fresh first-order perturbation variable.
        let eps_var = vars.fresh();
        let eps = Scalar::from_series(LaurentSeries::new(
            eps_var,
            num_complex::Complex::new(F::zero(), F::zero()),
            0,
            vec![Scalar::zero(), Scalar::one()],
        ));
        let f_pert = f(&w.add(&eps), &t_s)?;
        let df = f_pert.coefficient(eps_var, 1)?;
        if df.max_abs() == F::zero() {
            return Err(AlgebraError::SingularJacobian);
        }
        let step = fw.div(&df).map_err(|e| match e {
            AlgebraError::DivisionByZeroSeries => AlgebraError::SingularJacobian,
            other => other,
        })?;
        w = w.sub(&step);
    }

    let resid = f(&w, &t_s)?.max_abs();
    let scale = F::one().max(w.max_abs());
    if resid > F::from(NEWTON_RESID_RTOL).unwrap() * scale {
        return Err(AlgebraError::ResidualTooLarge {
            residual: (resid / scale).to_f64().unwrap_or(f64::NAN),
        });
    }
    match w {
        Scalar::S(ref s) if s.var() == t.var() => Ok(s.as_ref().clone()),
        // Constant solution: wrap it as a series on t's window.
        other => {
            let mut coeffs = vec![Scalar::zero(); (t.cutoff() - t.lowest().min(0)) as usize];
            coeffs[0] = other;
            Ok(LaurentSeries::new(t.var(), t.center(), 0, coeffs))
        }
    }
}
