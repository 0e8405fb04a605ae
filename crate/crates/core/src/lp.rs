//! Small dense linear programs.
//!
//! `maximize c·x  subject to  a_k·x {≤,≥} b_k,  x ≥ lb`, solved with a
//! two-phase tableau simplex using Bland's rule. Lower bounds are removed by
//! shifting, `≥` rows are negated, and rows with a negative right-hand side
//! get an artificial variable for phase one.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Entries below this magnitude are never used as pivots, and reduced costs
/// below it are treated as zero.
pub const PIVOT_TOL: f64 = 1e-10;
/// Constraint violation accepted for a feasible point.
pub const FEASIBILITY_TOL: f64 = 1e-8;

const MAX_PIVOTS: usize = 100_000;
const MAX_VARS: usize = 64;
const MAX_CONSTRAINTS: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite coefficient in {0}")]
    NonFinite(String),
    #[error("problem too large: {0}")]
    TooLarge(String),
    #[error("numerical failure: {detail} (tableau condition estimate {condition:.3e})")]
    NumericalFailure { detail: String, condition: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().zip(x).map(|(a, v)| a * v).sum()
    }

    /// Amount by which `x` violates this row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub lower_bounds: Vec<f64>,
}

impl LinearProgram {
    /// Zero objective, no constraints, all variables bounded below by 0.
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: vec![0.0; num_vars],
            constraints: Vec::new(),
            lower_bounds: vec![0.0; num_vars],
        }
    }

    pub fn maximize(mut self, objective: Vec<f64>) -> Self {
        self.objective = objective;
        self
    }

    pub fn le(&mut self, coeffs: Vec<f64>, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint {
            coeffs,
            relation: Relation::Le,
            rhs,
        });
        self
    }

    pub fn ge(&mut self, coeffs: Vec<f64>, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint {
            coeffs,
            relation: Relation::Ge,
            rhs,
        });
        self
    }

    pub fn set_lower_bound(&mut self, var: usize, lb: f64) -> &mut Self {
        self.lower_bounds[var] = lb;
        self
    }

    fn validate(&self) -> Result<(), LpError> {
        if self.num_vars == 0 || self.num_vars > MAX_VARS {
            return Err(LpError::TooLarge(format!("{} variables", self.num_vars)));
        }
        if self.constraints.len() > MAX_CONSTRAINTS {
            return Err(LpError::TooLarge(format!(
                "{} constraints",
                self.constraints.len()
            )));
        }
        let dim = |what: &str, len: usize| {
            if len == self.num_vars {
                Ok(())
            } else {
                Err(LpError::DimensionMismatch(format!(
                    "{what} has length {len}, expected {}",
                    self.num_vars
                )))
            }
        };
        dim("objective", self.objective.len())?;
        dim("lower bounds", self.lower_bounds.len())?;
        if !self.objective.iter().all(|v| v.is_finite()) {
            return Err(LpError::NonFinite("objective".into()));
        }
        if !self.lower_bounds.iter().all(|v| v.is_finite()) {
            return Err(LpError::NonFinite("lower bounds".into()));
        }
        for (k, c) in self.constraints.iter().enumerate() {
            dim(&format!("constraint {k}"), c.coeffs.len())?;
            if !c.rhs.is_finite() || !c.coeffs.iter().all(|v| v.is_finite()) {
                return Err(LpError::NonFinite(format!("constraint {k}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpOutcome {
    pub status: LpStatus,
    /// Objective value, present only when optimal.
    pub value: Option<f64>,
    /// Optimal point; empty unless optimal.
    pub point: Vec<f64>,
    /// Indices of constraints tight within [`FEASIBILITY_TOL`] at the point.
    pub active: Vec<usize>,
}

impl LpOutcome {
    fn without_point(status: LpStatus) -> Self {
        Self {
            status,
            value: None,
            point: Vec::new(),
            active: Vec::new(),
        }
    }
}

/// Largest violation of any constraint or lower bound at `point`.
pub fn check_point(lp: &LinearProgram, point: &[f64]) -> Result<(bool, f64), LpError> {
    if point.len() != lp.num_vars {
        return Err(LpError::DimensionMismatch(format!(
            "point has length {}, expected {}",
            point.len(),
            lp.num_vars
        )));
    }
    let rows = lp.constraints.iter().map(|c| c.violation(point));
    let bounds = point
        .iter()
        .zip(&lp.lower_bounds)
        .map(|(x, lb)| (lb - x).max(0.0));
    let worst = rows.chain(bounds).fold(0.0, f64::max);
    Ok((worst <= FEASIBILITY_TOL, worst))
}

struct Tableau {
    /// Constraint rows; the last column is the right-hand side.
    rows: Vec<Vec<f64>>,
    /// Reduced costs; the last entry is minus the current objective value.
    cost: Vec<f64>,
    basis: Vec<usize>,
    width: usize,
    smallest_pivot: f64,
    largest_entry: f64,
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

    fn condition(&self) -> f64 {
        self.largest_entry / self.smallest_pivot.max(f64::MIN_POSITIVE)
    }

    fn set_objective(&mut self, c: &[f64]) {
        let mut cost = vec![0.0; self.width + 1];
        cost[..c.len()].copy_from_slice(c);
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = cost_of(c, b);
            if cb != 0.0 {
                for (dst, src) in cost.iter_mut().zip(&self.rows[r]) {
                    *dst -= cb * src;
                }
            }
        }
        self.cost = cost;
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col];
        self.smallest_pivot = self.smallest_pivot.min(p.abs());
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (k, row) in self.rows.iter_mut().enumerate() {
            if k == r {
                continue;
            }
            let f = row[col];
            if f != 0.0 {
                for (dst, src) in row.iter_mut().zip(&pivot_row) {
                    *dst -= f * src;
                }
                row[col] = 0.0;
            }
        }
        let f = self.cost[col];
        if f != 0.0 {
            for (dst, src) in self.cost.iter_mut().zip(&pivot_row) {
                *dst -= f * src;
            }
            self.cost[col] = 0.0;
        }
        self.largest_entry = self
            .rows
            .iter()
            .flat_map(|row| row.iter())
            .fold(self.largest_entry, |m, v| m.max(v.abs()));
        self.basis[r] = col;
        self.pivots += 1;
    }

    /// Runs Bland's-rule simplex over columns `0..allowed`.
    fn run(&mut self, allowed: usize) -> Result<Phase, LpError> {
        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(LpError::NumericalFailure {
                    detail: format!("no convergence after {MAX_PIVOTS} pivots"),
                    condition: self.condition(),
                });
            }
            let Some(col) = (0..allowed).find(|&j| self.cost[j] > PIVOT_TOL) else {
                return Ok(Phase::Optimal);
            };
            let mut best: Option<(usize, f64)> = None;
            for r in 0..self.rows.len() {
                let a = self.rows[r][col];
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs(r).max(0.0) / a;
                best = match best {
                    None => Some((r, ratio)),
                    Some((br, bratio)) => {
                        let tie = (ratio - bratio).abs() <= 1e-12 * (1.0 + bratio.abs());
                        if ratio < bratio && !tie || tie && self.basis[r] < self.basis[br] {
                            Some((r, ratio))
                        } else {
                            Some((br, bratio))
                        }
                    }
                };
            }
            match best {
                Some((r, _)) => self.pivot(r, col),
                None => return Ok(Phase::Unbounded),
            }
        }
    }
}

fn cost_of(c: &[f64], col: usize) -> f64 {
    c.get(col).copied().unwrap_or(0.0)
}

/// Solves `lp`, reporting optimality, infeasibility, or unboundedness.
/// Identical inputs give bit-identical outcomes.
pub fn solve(lp: &LinearProgram) -> Result<LpOutcome, LpError> {
    lp.validate()?;
    let nv = lp.num_vars;
    let m = lp.constraints.len();

    // Canonical rows a·y ≤ b over y = x − lb ≥ 0.
    let canon: Vec<(Vec<f64>, f64)> = lp
        .constraints
        .iter()
        .map(|c| {
            let shift: f64 = c.coeffs.iter().zip(&lp.lower_bounds).map(|(a, l)| a * l).sum();
            let b = c.rhs - shift;
            match c.relation {
                Relation::Le => (c.coeffs.clone(), b),
                Relation::Ge => (c.coeffs.iter().map(|a| -a).collect(), -b),
            }
        })
        .collect();

    let needs_artificial: Vec<usize> = (0..m).filter(|&r| canon[r].1 < 0.0).collect();
    let first_art = nv + m;
    let width = first_art + needs_artificial.len();

    let mut rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut art = first_art;
    for (r, (a, b)) in canon.iter().enumerate() {
        let mut row = vec![0.0; width + 1];
        let sign = if *b < 0.0 { -1.0 } else { 1.0 };
        for (dst, v) in row.iter_mut().zip(a) {
            *dst = sign * v;
        }
        row[nv + r] = sign;
        row[width] = sign * b;
        if *b < 0.0 {
            row[art] = 1.0;
            basis.push(art);
            art += 1;
        } else {
            basis.push(nv + r);
        }
        rows.push(row);
    }
    let largest_entry = rows
        .iter()
        .flat_map(|row| row.iter())
        .fold(1.0f64, |acc, v| acc.max(v.abs()));
    let mut tab = Tableau {
        rows,
        cost: Vec::new(),
        basis,
        width,
        smallest_pivot: 1.0,
        largest_entry,
        pivots: 0,
    };

    if !needs_artificial.is_empty() {
        let mut phase_one = vec![0.0; width];
        phase_one[first_art..].iter_mut().for_each(|c| *c = -1.0);
        tab.set_objective(&phase_one);
        tab.run(width)?;
        let infeasibility = tab.cost[width];
        if infeasibility > FEASIBILITY_TOL {
            return Ok(LpOutcome::without_point(LpStatus::Infeasible));
        }
        // Drive remaining (zero-level) artificials out of the basis.
        let mut r = 0;
        while r < tab.rows.len() {
            if tab.basis[r] >= first_art {
                let col = (0..first_art)
                    .filter(|&j| tab.rows[r][j].abs() > PIVOT_TOL)
                    .max_by(|&a, &b| tab.rows[r][a].abs().total_cmp(&tab.rows[r][b].abs()));
                match col {
                    Some(j) => tab.pivot(r, j),
                    None => {
                        // redundant row
                        tab.rows.remove(r);
                        tab.basis.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
    }

    let mut objective = lp.objective.clone();
    objective.resize(first_art, 0.0);
    tab.set_objective(&objective);
    if let Phase::Unbounded = tab.run(first_art)? {
        return Ok(LpOutcome::without_point(LpStatus::Unbounded));
    }

    let mut point = lp.lower_bounds.clone();
    for (r, &b) in tab.basis.iter().enumerate() {
        if b < nv {
            point[b] += tab.rhs(r).max(0.0);
        }
    }
    let (_, worst) = check_point(lp, &point)?;
    if worst > FEASIBILITY_TOL {
        return Err(LpError::NumericalFailure {
            detail: format!("optimal basis violates a constraint by {worst:.3e}"),
            condition: tab.condition(),
        });
    }
    let value = lp.objective.iter().zip(&point).map(|(c, x)| c * x).sum();
    let active = lp
        .constraints
        .iter()
        .enumerate()
        .filter(|(_, c)| (c.activity(&point) - c.rhs).abs() <= FEASIBILITY_TOL)
        .map(|(k, _)| k)
        .collect();
    Ok(LpOutcome {
        status: LpStatus::Optimal,
        value: Some(value),
        point,
        active,
    })
}
