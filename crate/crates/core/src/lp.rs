//! Dense two-phase simplex with Bland's anti-cycling rule.
//!
//! Problems here are tiny (one variable per leader action), so the tableau
//! is a plain `Vec<Vec<f64>>` and reduced costs are recomputed on every
//! pivot.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const MAX_PIVOTS: usize = 100_000;

/// `maximize objective·x` subject to `a·x <= b` rows, `a·x = b` rows and
/// per-variable bounds (either side may be infinite).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub inequalities: Vec<(Vec<f64>, f64)>,
    pub equalities: Vec<(Vec<f64>, f64)>,
    pub bounds: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Empty unless `status` is optimal.
    pub x: Vec<f64>,
    pub objective: Option<f64>,
    pub pivots: usize,
}

impl LinearProgram {
    /// Maximize `objective·x` over `x >= 0` with no constraints yet.
    pub fn nonnegative(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            inequalities: Vec::new(),
            equalities: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if n == 0 {
            return Err(invalid("linear program has no variables"));
        }
        if let Some(c) = self.objective.iter().find(|c| !c.is_finite()) {
            return Err(invalid(format!("objective coefficient {c} is not finite")));
        }
        if self.bounds.len() != n {
            return Err(invalid(format!("{} variable bounds for {n} variables", self.bounds.len())));
        }
        for (k, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(invalid(format!("variable {k} has invalid bounds ({lo}, {hi})")));
            }
        }
        let rows = self.inequalities.iter().map(|r| ("inequality", r)).chain(self.equalities.iter().map(|r| ("equality", r)));
        for (i, (kind, (a, b))) in rows.enumerate() {
            if a.len() != n {
                return Err(invalid(format!("{kind} row {i} has {} coefficients, expected {n}", a.len())));
            }
            if !b.is_finite() || a.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("{kind} row {i} has a non-finite coefficient")));
            }
        }
        Ok(())
    }

    /// Largest violation of any constraint or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let dot = |a: &[f64]| a.iter().zip(x).map(|(a, x)| a * x).sum::<f64>();
        let ineq = self.inequalities.iter().map(|(a, b)| (dot(a) - b).max(0.0));
        let eq = self.equalities.iter().map(|(a, b)| (dot(a) - b).abs());
        let bounds = self.bounds.iter().zip(x).map(|(&(lo, hi), &v)| (lo - v).max(v - hi).max(0.0));
        ineq.chain(eq).chain(bounds).fold(0.0, f64::max)
    }
}

/// How an original variable is expressed in non-negative tableau columns:
/// `x = offset + sum(coef * y[col])`.
struct Substitution {
    offset: f64,
    terms: Vec<(usize, f64)>,
}

#[derive(Clone, Copy, PartialEq)]
enum RowKind {
    Le,
    Ge,
    Eq,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
    pivots: usize,
}

enum Phase {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn rhs(&self, r: usize) -> f64 {
        self.rows[r][self.width]
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[col];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[col] = 0.0;
            }
        }
        self.basis[r] = col;
        self.pivots += 1;
    }

    /// Maximizes `cost·y` over the current basis using Bland's rule. Columns
    /// with `allowed[j] == false` never enter.
    fn optimize(&mut self, cost: &[f64], allowed: &[bool], tol: f64) -> Result<Phase> {
        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(Error::NumericalFailure {
                    point: Vec::new(),
                    reason: format!("simplex exceeded {MAX_PIVOTS} pivots"),
                });
            }
            let entering = (0..self.width).find(|&j| {
                allowed[j] && !self.basis.contains(&j) && {
                    let z: f64 = self.basis.iter().enumerate().map(|(r, &b)| cost[b] * self.rows[r][j]).sum();
                    cost[j] - z > tol
                }
            });
            let Some(col) = entering else {
                return Ok(Phase::Optimal);
            };
            let mut leaving: Option<(usize, f64)> = None;
            for r in 0..self.rows.len() {
                let a = self.rows[r][col];
                if a > tol {
                    let ratio = self.rhs(r) / a;
                    leaving = match leaving {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - 1e-12 || (ratio <= lratio + 1e-12 && self.basis[r] < self.basis[lr]) {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            match leaving {
                None => return Ok(Phase::Unbounded),
                Some((r, _)) => self.pivot(r, col),
            }
        }
    }
}

/// Solves `lp` to optimality. `tol` is used for reduced-cost, pivot and
/// phase-one feasibility decisions.
pub fn solve_lp(lp: &LinearProgram, tol: f64) -> Result<LpSolution> {
    lp.validate()?;
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(invalid(format!("LP tolerance must be positive, got {tol}")));
    }
    let n = lp.num_vars();
    let not_optimal = |status, pivots| LpSolution {
        status,
        x: Vec::new(),
        objective: None,
        pivots,
    };

    if lp.bounds.iter().any(|&(lo, hi)| lo > hi) {
        return Ok(not_optimal(LpStatus::Infeasible, 0));
    }

    // Rewrite every variable in terms of non-negative columns.
    let mut subs = Vec::with_capacity(n);
    let mut ncols = 0;
    let mut bound_rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    for &(lo, hi) in &lp.bounds {
        let sub = if lo.is_finite() {
            if hi.is_finite() {
                bound_rows.push((vec![(ncols, 1.0)], hi - lo));
            }
            Substitution { offset: lo, terms: vec![(ncols, 1.0)] }
        } else if hi.is_finite() {
            Substitution { offset: hi, terms: vec![(ncols, -1.0)] }
        } else {
            ncols += 1;
            Substitution { offset: 0.0, terms: vec![(ncols - 1, 1.0), (ncols, -1.0)] }
        };
        ncols += 1;
        subs.push(sub);
    }
    let structural = ncols;

    let substitute = |a: &[f64], b: f64| -> (Vec<f64>, f64) {
        let mut row = vec![0.0; structural];
        let mut rhs = b;
        for (coef, sub) in a.iter().zip(&subs) {
            rhs -= coef * sub.offset;
            for &(col, c) in &sub.terms {
                row[col] += coef * c;
            }
        }
        (row, rhs)
    };

    let mut constraints: Vec<(Vec<f64>, RowKind, f64)> = Vec::new();
    for (a, b) in &lp.inequalities {
        let (row, rhs) = substitute(a, *b);
        constraints.push((row, RowKind::Le, rhs));
    }
    for (terms, b) in bound_rows {
        let mut row = vec![0.0; structural];
        for (col, c) in terms {
            row[col] = c;
        }
        constraints.push((row, RowKind::Le, b));
    }
    for (a, b) in &lp.equalities {
        let (row, rhs) = substitute(a, *b);
        constraints.push((row, RowKind::Eq, rhs));
    }
    for (row, kind, rhs) in constraints.iter_mut() {
        if *rhs < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
            *rhs = -*rhs;
            if *kind == RowKind::Le {
                *kind = RowKind::Ge;
            } else if *kind == RowKind::Ge {
                *kind = RowKind::Le;
            }
        }
    }

    let m = constraints.len();
    let slacks = constraints.iter().filter(|c| c.1 != RowKind::Eq).count();
    let artificials = constraints.iter().filter(|c| c.1 != RowKind::Le).count();
    let width = structural + slacks + artificials;
    let first_artificial = structural + slacks;

    let mut rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let (mut next_slack, mut next_art) = (structural, first_artificial);
    for (coefs, kind, rhs) in &constraints {
        let mut row = vec![0.0; width + 1];
        row[..structural].copy_from_slice(coefs);
        row[width] = *rhs;
        match kind {
            RowKind::Le => {
                row[next_slack] = 1.0;
                basis.push(next_slack);
                next_slack += 1;
            }
            RowKind::Ge => {
                row[next_slack] = -1.0;
                next_slack += 1;
                row[next_art] = 1.0;
                basis.push(next_art);
                next_art += 1;
            }
            RowKind::Eq => {
                row[next_art] = 1.0;
                basis.push(next_art);
                next_art += 1;
            }
        }
        rows.push(row);
    }
    let mut tab = Tableau { rows, basis, width, pivots: 0 };

    if artificials > 0 {
        let mut cost = vec![0.0; width];
        cost[first_artificial..].iter_mut().for_each(|c| *c = -1.0);
        let allowed = vec![true; width];
        tab.optimize(&cost, &allowed, tol)?;
        let infeasibility: f64 = tab
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &b)| b >= first_artificial)
            .map(|(r, _)| tab.rhs(r))
            .sum();
        if infeasibility > tol {
            return Ok(not_optimal(LpStatus::Infeasible, tab.pivots));
        }
        // Drive zero-level artificials out of the basis; drop redundant rows.
        let mut r = 0;
        while r < tab.rows.len() {
            if tab.basis[r] >= first_artificial {
                let col = (0..first_artificial).find(|&j| tab.rows[r][j].abs() > tol && !tab.basis.contains(&j));
                match col {
                    Some(j) => tab.pivot(r, j),
                    None => {
                        tab.rows.remove(r);
                        tab.basis.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
    }

    let mut cost = vec![0.0; width];
    for (coef, sub) in lp.objective.iter().zip(&subs) {
        for &(col, c) in &sub.terms {
            cost[col] += coef * c;
        }
    }
    let allowed: Vec<bool> = (0..width).map(|j| j < first_artificial).collect();
    if let Phase::Unbounded = tab.optimize(&cost, &allowed, tol)? {
        return Ok(not_optimal(LpStatus::Unbounded, tab.pivots));
    }

    let mut y = vec![0.0; width];
    for (r, &b) in tab.basis.iter().enumerate() {
        y[b] = tab.rhs(r);
    }
    let x: Vec<f64> = subs
        .iter()
        .map(|s| s.offset + s.terms.iter().map(|&(col, c)| c * y[col]).sum::<f64>())
        .collect();
    let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective: Some(objective),
        pivots: tab.pivots,
    })
}
