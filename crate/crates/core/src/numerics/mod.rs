//! Small numerical kernels shared by the optimizer.

mod lp;

pub use lp::{lp_solve, LinearProgram, LpOutcome};

use nalgebra::{Cholesky, DMatrix, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Solves `A X = B` for Hermitian positive-definite `A` via Cholesky.
pub fn hermitian_solve(a: &DMatrix<C64>, b: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    if !a.is_square() || a.nrows() != b.nrows() {
        return Err(Error::invalid(format!(
            "hermitian_solve: A is {:?}, B is {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let scale = a.norm().max(f64::MIN_POSITIVE);
    if (a - a.adjoint()).norm() > 1e-10 * scale {
        return Err(Error::numerical("matrix is not Hermitian"));
    }
    let chol = Cholesky::new(a.clone())
        .ok_or_else(|| Error::numerical("matrix is not positive definite"))?;
    let x = chol.solve(b);
    let residual = (a * &x - b).norm();
    if !residual.is_finite() || residual > 1e-9 * b.norm() {
        return Err(Error::numerical(format!("solve residual {residual:e} too large")));
    }
    Ok(x)
}

/// Central-difference gradient: `(f(x + ξ e_j) − f(x − ξ e_j)) / 2ξ`.
pub fn finite_diff_gradient<F>(mut f: F, x: &Vector3<f64>, xi: f64) -> Result<Vector3<f64>>
where
    F: FnMut(&Vector3<f64>) -> f64,
{
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(Error::invalid(format!("step ξ must be positive, got {xi}")));
    }
    let mut grad = Vector3::zeros();
    for j in 0..3 {
        let mut plus = *x;
        let mut minus = *x;
        plus[j] += xi;
        minus[j] -= xi;
        let (fp, fm) = (f(&plus), f(&minus));
        if !(fp.is_finite() && fm.is_finite()) {
            return Err(Error::numerical(format!("objective not finite near coordinate {j}")));
        }
        grad[j] = (fp - fm) / (2.0 * xi);
    }
    Ok(grad)
}

/// Armijo backtracking parameters (maximization form).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepRule {
    /// Sufficient-increase coefficient `c₁`.
    pub c1: f64,
    /// Step shrink factor per backtrack.
    pub factor: f64,
    pub max_backtracks: usize,
    pub initial_step: f64,
}

impl Default for StepRule {
    fn default() -> Self {
        Self { c1: 1e-4, factor: 0.5, max_backtracks: 30, initial_step: 1.0 }
    }
}

impl StepRule {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0 && self.c1 < 1.0) {
            return Err(Error::invalid("step rule c1 must lie in (0, 1)"));
        }
        if !(self.factor > 0.0 && self.factor < 1.0) {
            return Err(Error::invalid("step rule factor must lie in (0, 1)"));
        }
        if !(self.initial_step > 0.0 && self.initial_step <= 1.0) {
            return Err(Error::invalid("initial step must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// Accepted step; `0` means no step passed (stall).
    pub step: f64,
    pub point: Vector3<f64>,
    pub value: f64,
}

/// Backtracking line search for an ascent step along `d`.
///
/// Accepts the largest `κ = initial · factor^m` with
/// `f(x + κd) ≥ f(x) + c₁ κ ∇fᵀd`. `f` may return `-∞` for points that must be
/// rejected (for example infeasible poses). Returns `κ = 0` and `x` unchanged
/// when `∇fᵀd ≤ 0` or no step passes.
pub fn armijo_step<F>(
    mut f: F,
    x: &Vector3<f64>,
    fx: f64,
    grad: &Vector3<f64>,
    d: &Vector3<f64>,
    rule: &StepRule,
) -> StepOutcome
where
    F: FnMut(&Vector3<f64>) -> f64,
{
    let stall = StepOutcome { step: 0.0, point: *x, value: fx };
    let slope = grad.dot(d);
    if !(slope > 0.0) {
        return stall;
    }
    let mut step = rule.initial_step;
    for _ in 0..=rule.max_backtracks {
        let candidate = x + d * step;
        let value = f(&candidate);
        if value.is_finite() && value >= fx + rule.c1 * step * slope && value > fx {
            return StepOutcome { step, point: candidate, value };
        }
        step *= rule.factor;
    }
    stall
}
