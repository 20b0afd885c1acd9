//! Dense two-phase simplex for small box-bounded linear programs.

use crate::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;

/// `minimize cᵀd  s.t.  aᵢᵀd ≤ bᵢ,  lo ≤ d ≤ hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    /// Inequality rows `(aᵢ, bᵢ)` meaning `aᵢᵀd ≤ bᵢ`.
    pub rows: Vec<(Vec<f64>, f64)>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    /// Program over the box `[lo, hi]ⁿ` with no rows yet.
    pub fn boxed(objective: Vec<f64>, lo: f64, hi: f64) -> Self {
        let n = objective.len();
        Self { objective, rows: Vec::new(), lower: vec![lo; n], upper: vec![hi; n] }
    }

    pub fn push_row(&mut self, a: Vec<f64>, b: f64) {
        self.rows.push((a, b));
    }

    pub fn dim(&self) -> usize {
        self.objective.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 {
            return Err(Error::invalid("linear program has no variables"));
        }
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::invalid("bounds length differs from objective length"));
        }
        for (lo, hi) in self.lower.iter().zip(&self.upper) {
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(Error::invalid("box bounds must be finite"));
            }
            if lo > hi {
                return Err(Error::invalid(format!("lower bound {lo} exceeds upper bound {hi}")));
            }
        }
        for (a, b) in &self.rows {
            if a.len() != n {
                return Err(Error::invalid("constraint row length differs from objective length"));
            }
            if !b.is_finite() || a.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid("constraint rows must be finite"));
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("objective must be finite"));
        }
        Ok(())
    }

    /// Largest violation of any row or bound at `d` (zero when feasible).
    pub fn max_violation(&self, d: &[f64]) -> f64 {
        let rows = self
            .rows
            .iter()
            .map(|(a, b)| a.iter().zip(d).map(|(x, y)| x * y).sum::<f64>() - b);
        let bounds = d
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .flat_map(|(x, (lo, hi))| [lo - x, x - hi]);
        rows.chain(bounds).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { point: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

struct Tableau {
    /// Constraint rows, last entry is the right-hand side.
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.cols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        self.rows[r].iter_mut().for_each(|x| *x /= p);
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                row.iter_mut().zip(&pivot_row).for_each(|(x, y)| *x -= f * y);
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Minimizes `costᵀx` with Bland's rule over the columns `< allowed`.
    /// Returns `false` if unbounded.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> bool {
        loop {
            let entering = (0..allowed).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let reduced = cost[j]
                    - self
                        .rows
                        .iter()
                        .zip(&self.basis)
                        .map(|(row, &bi)| cost[bi] * row[j])
                        .sum::<f64>();
                reduced < -PIVOT_TOL
            });
            let Some(j) = entering else { return true };

            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][j];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i) / a;
                    let better = match leave {
                        None => true,
                        Some((li, lr)) => {
                            ratio < lr - PIVOT_TOL
                                || (ratio <= lr + PIVOT_TOL && self.basis[i] < self.basis[li])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            match leave {
                Some((i, _)) => self.pivot(i, j),
                None => return false,
            }
        }
    }
}

/// Solves a box-bounded LP exactly (up to rounding) with a two-phase simplex.
pub fn lp_solve(lp: &LinearProgram) -> Result<LpOutcome> {
    lp.validate()?;
    let n = lp.dim();

    // shift to x = d − lo ≥ 0; upper bounds become rows x_i ≤ hi_i − lo_i
    let mut constraints: Vec<(Vec<f64>, f64)> = lp
        .rows
        .iter()
        .map(|(a, b)| {
            let shift: f64 = a.iter().zip(&lp.lower).map(|(x, y)| x * y).sum();
            (a.clone(), b - shift)
        })
        .collect();
    for i in 0..n {
        let mut a = vec![0.0; n];
        a[i] = 1.0;
        constraints.push((a, lp.upper[i] - lp.lower[i]));
    }

    let m = constraints.len();
    let negative: Vec<usize> = (0..m).filter(|&i| constraints[i].1 < 0.0).collect();
    let artificials = negative.len();
    // columns: x (n), slacks (m), artificials
    let cols = n + m + artificials;
    let mut rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    for (i, (a, b)) in constraints.iter().enumerate() {
        let mut row = vec![0.0; cols + 1];
        let sign = if *b < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            row[j] = sign * a[j];
        }
        row[n + i] = sign;
        row[cols] = sign * b;
        if let Some(pos) = negative.iter().position(|&r| r == i) {
            row[n + m + pos] = 1.0;
            basis.push(n + m + pos);
        } else {
            basis.push(n + i);
        }
        rows.push(row);
    }
    let mut tab = Tableau { rows, basis, cols };

    if artificials > 0 {
        let mut cost = vec![0.0; cols];
        cost[n + m..].iter_mut().for_each(|c| *c = 1.0);
        tab.optimize(&cost, cols);
        let infeasibility: f64 = (0..m)
            .filter(|&i| tab.basis[i] >= n + m)
            .map(|i| tab.rhs(i))
            .sum();
        let scale = 1.0 + constraints.iter().map(|(_, b)| b.abs()).fold(0.0, f64::max);
        if infeasibility > FEAS_TOL * scale {
            return Ok(LpOutcome::Infeasible);
        }
        // drive zero-level artificials out of the basis where possible
        for i in 0..m {
            if tab.basis[i] >= n + m {
                if let Some(j) = (0..n + m).find(|&j| tab.rows[i][j].abs() > PIVOT_TOL) {
                    tab.pivot(i, j);
                }
            }
        }
    }

    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(&lp.objective);
    if !tab.optimize(&cost, n + m) {
        return Ok(LpOutcome::Unbounded);
    }

    let mut point = lp.lower.clone();
    for (i, &bi) in tab.basis.iter().enumerate() {
        if bi < n {
            point[bi] += tab.rhs(i);
        }
    }
    // clamp rounding drift back into the box
    for ((x, lo), hi) in point.iter_mut().zip(&lp.lower).zip(&lp.upper) {
        *x = x.clamp(*lo, *hi);
    }
    let objective = point.iter().zip(&lp.objective).map(|(x, c)| x * c).sum();
    Ok(LpOutcome::Optimal { point, objective })
}
