//! Dense two-phase primal simplex.
//!
//! Solves `max c.x  s.t.  A x = b,  G x >= h,  x >= 0`. Inequality rows get a
//! surplus column each (appended after the structural columns); rows that
//! cannot start with a feasible slack get an artificial column for phase 1.
//! Redundant equality rows are detected when an artificial cannot be pivoted
//! out at the end of phase 1, and dropped.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::tol;

/// Reduced costs at or below this value count as optimal.
const OPTIMALITY: f64 = 1e-10;
/// Ratios within this distance are considered tied.
const RATIO_TIE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("row {row} has {found} coefficients, expected {expected}")]
    RowLength { row: usize, expected: usize, found: usize },

    #[error("non-finite coefficient in {0}")]
    NonFinite(&'static str),

    #[error("simplex did not terminate within {0} pivots")]
    IterationLimit(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    eq_rows: Vec<Vec<f64>>,
    eq_rhs: Vec<f64>,
    ge_rows: Vec<Vec<f64>>,
    ge_rhs: Vec<f64>,
}

impl LinearProgram {
    /// A maximization of `objective . x` over `x >= 0` with no rows yet.
    pub fn new(objective: Vec<f64>) -> Self {
        LinearProgram {
            objective,
            eq_rows: Vec::new(),
            eq_rhs: Vec::new(),
            ge_rows: Vec::new(),
            ge_rhs: Vec::new(),
        }
    }

    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
        self
    }

    pub fn add_ge(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.ge_rows.push(row);
        self.ge_rhs.push(rhs);
        self
    }

    /// `row . x <= rhs`, stored as `-row . x >= -rhs`.
    pub fn add_le(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.add_ge(row.into_iter().map(|v| -v).collect(), -rhs)
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn eq_rows(&self) -> &[Vec<f64>] {
        &self.eq_rows
    }

    pub fn eq_rhs(&self) -> &[f64] {
        &self.eq_rhs
    }

    pub fn ge_rows(&self) -> &[Vec<f64>] {
        &self.ge_rows
    }

    pub fn ge_rhs(&self) -> &[f64] {
        &self.ge_rhs
    }

    /// Same matrix and objective with different right-hand sides.
    pub fn with_rhs(&self, eq_rhs: Vec<f64>, ge_rhs: Vec<f64>) -> Result<Self, LpError> {
        if eq_rhs.len() != self.eq_rhs.len() {
            return Err(LpError::RowLength { row: 0, expected: self.eq_rhs.len(), found: eq_rhs.len() });
        }
        if ge_rhs.len() != self.ge_rhs.len() {
            return Err(LpError::RowLength { row: 0, expected: self.ge_rhs.len(), found: ge_rhs.len() });
        }
        Ok(LinearProgram { eq_rhs, ge_rhs, ..self.clone() })
    }

    /// Same rows with a different objective.
    pub fn with_objective(&self, objective: Vec<f64>) -> Result<Self, LpError> {
        if objective.len() != self.n_vars() {
            return Err(LpError::RowLength { row: 0, expected: self.n_vars(), found: objective.len() });
        }
        Ok(LinearProgram { objective, ..self.clone() })
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.n_vars();
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite("objective"));
        }
        for (i, row) in self.eq_rows.iter().chain(&self.ge_rows).enumerate() {
            if row.len() != n {
                return Err(LpError::RowLength { row: i, expected: n, found: row.len() });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(LpError::NonFinite("constraint row"));
            }
        }
        if self.eq_rhs.iter().chain(&self.ge_rhs).any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite("right-hand side"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// `c.x` when optimal; `-inf` when infeasible, `+inf` when unbounded.
    pub value: f64,
    /// Structural variables; empty unless optimal.
    pub x: Vec<f64>,
    /// Basic columns of the final tableau, one per non-redundant row. Indices
    /// `>= n_vars` are surplus columns of the inequality rows, in row order.
    pub basis: Vec<usize>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SimplexOptions {
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub stall_threshold: usize,
    pub pivot_tol: f64,
    pub max_iterations: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions { stall_threshold: 200, pivot_tol: tol::PIVOT, max_iterations: 200_000 }
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_lp_with(lp, &SimplexOptions::default())
}

pub fn solve_lp_with(lp: &LinearProgram, opts: &SimplexOptions) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let n = lp.n_vars();
    let n_slack = lp.ge_rows.len();
    let structural = n + n_slack;
    let m = lp.eq_rows.len() + n_slack;

    // Rows in standard form with nonnegative right-hand sides.
    let mut std_rows: Vec<(Vec<f64>, f64, Option<usize>)> = Vec::with_capacity(m);
    for (row, &b) in lp.eq_rows.iter().zip(&lp.eq_rhs) {
        let mut r = row.clone();
        r.resize(structural, 0.0);
        if b < 0.0 {
            r.iter_mut().for_each(|v| *v = -*v);
        }
        std_rows.push((r, b.abs(), None));
    }
    for (k, (row, &h)) in lp.ge_rows.iter().zip(&lp.ge_rhs).enumerate() {
        let mut r = row.clone();
        r.resize(structural, 0.0);
        r[n + k] = -1.0;
        if h <= 0.0 {
            // -g.x + s = -h >= 0: the surplus column starts basic.
            r.iter_mut().for_each(|v| *v = -*v);
            std_rows.push((r, -h, Some(n + k)));
        } else {
            std_rows.push((r, h, None));
        }
    }

    let n_art = std_rows.iter().filter(|r| r.2.is_none()).count();
    let ncols = structural + n_art;
    let mut tab = Tableau::new(ncols, m);
    let mut next_art = structural;
    for (r, b, slack_basic) in std_rows {
        let mut row = r;
        row.resize(ncols + 1, 0.0);
        row[ncols] = b;
        let basic = match slack_basic {
            Some(j) => j,
            None => {
                row[next_art] = 1.0;
                next_art += 1;
                next_art - 1
            }
        };
        tab.rows.push(row);
        tab.basis.push(basic);
    }

    let mut iterations = 0;

    if n_art > 0 {
        // Phase 1: maximize -(sum of artificials).
        tab.obj = vec![0.0; ncols + 1];
        for j in structural..ncols {
            tab.obj[j] = -1.0;
        }
        for i in 0..tab.rows.len() {
            if tab.basis[i] >= structural {
                for j in 0..=ncols {
                    tab.obj[j] += tab.rows[i][j];
                }
            }
        }
        tab.run(structural, opts, &mut iterations)?;

        let scale = 1.0 + lp.eq_rhs.iter().chain(&lp.ge_rhs).fold(0.0f64, |a, v| a.max(v.abs()));
        let infeasibility: f64 = (0..tab.rows.len())
            .filter(|&i| tab.basis[i] >= structural)
            .map(|i| tab.rows[i][ncols])
            .sum();
        if infeasibility > tol::FEASIBILITY * scale {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                value: f64::NEG_INFINITY,
                x: Vec::new(),
                basis: Vec::new(),
                iterations,
            });
        }

        // Pivot remaining artificials out; rows where that is impossible are redundant.
        let mut redundant = Vec::new();
        for i in 0..tab.rows.len() {
            if tab.basis[i] < structural {
                continue;
            }
            tab.rows[i][ncols] = 0.0;
            let mut best: Option<(usize, f64)> = None;
            for j in 0..structural {
                let a = tab.rows[i][j].abs();
                if a > opts.pivot_tol && best.is_none_or(|(_, b)| a > b) {
                    best = Some((j, a));
                }
            }
            match best {
                Some((j, _)) => tab.pivot(i, j),
                None => redundant.push(i),
            }
        }
        for &i in redundant.iter().rev() {
            tab.rows.remove(i);
            tab.basis.remove(i);
        }
        tab.drop_columns(structural);
    }

    // Phase 2.
    let cols = tab.ncols;
    let mut cost = lp.objective.clone();
    cost.resize(cols, 0.0);
    tab.obj = cost.clone();
    tab.obj.push(0.0);
    for i in 0..tab.rows.len() {
        let cb = cost[tab.basis[i]];
        if cb != 0.0 {
            for j in 0..=cols {
                tab.obj[j] -= cb * tab.rows[i][j];
            }
        }
    }
    if tab.run(cols, opts, &mut iterations)? == Outcome::Unbounded {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            value: f64::INFINITY,
            x: Vec::new(),
            basis: tab.basis.clone(),
            iterations,
        });
    }

    let mut x = vec![0.0; n];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            let v = tab.rows[i][cols];
            x[b] = if v < 0.0 && v > -opts.pivot_tol { 0.0 } else { v };
        }
    }
    let value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution { status: LpStatus::Optimal, value, x, basis: tab.basis, iterations })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Outcome {
    Optimal,
    Unbounded,
}

struct Tableau {
    /// Each row holds `ncols` coefficients followed by the right-hand side.
    rows: Vec<Vec<f64>>,
    /// Reduced costs followed by minus the current objective value.
    obj: Vec<f64>,
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn new(ncols: usize, m: usize) -> Self {
        Tableau { rows: Vec::with_capacity(m), obj: Vec::new(), basis: Vec::with_capacity(m), ncols }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let pv = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= pv;
        }
        self.rows[r][c] = 1.0;
        let pivot_row = self.rows[r].clone();
        let eliminate = |row: &mut Vec<f64>| {
            let f = row[c];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
                row[c] = 0.0;
            }
        };
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                eliminate(row);
            }
        }
        eliminate(&mut self.obj);
        self.basis[r] = c;
    }

    fn drop_columns(&mut self, keep: usize) {
        let rhs_col = self.ncols;
        for row in &mut self.rows {
            let rhs = row[rhs_col];
            row.truncate(keep);
            row.push(rhs);
        }
        self.ncols = keep;
    }

    /// Primal simplex over entering columns `0..n_enter`. Dantzig pricing
    /// until `stall_threshold` consecutive degenerate pivots, then Bland.
    fn run(
        &mut self,
        n_enter: usize,
        opts: &SimplexOptions,
        iterations: &mut usize,
    ) -> Result<Outcome, LpError> {
        let rhs = self.ncols;
        let mut degenerate_run = 0usize;
        let mut bland = false;
        loop {
            let entering = if bland {
                (0..n_enter).find(|&j| self.obj[j] > OPTIMALITY)
            } else {
                let mut best: Option<usize> = None;
                for j in 0..n_enter {
                    if self.obj[j] > OPTIMALITY && best.is_none_or(|b| self.obj[j] > self.obj[b]) {
                        best = Some(j);
                    }
                }
                best
            };
            let Some(c) = entering else {
                return Ok(Outcome::Optimal);
            };

            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[c];
                if a <= opts.pivot_tol {
                    continue;
                }
                let ratio = row[rhs].max(0.0) / a;
                let better = match leave {
                    None => true,
                    Some((li, lr)) => {
                        ratio < lr - RATIO_TIE
                            || ((ratio - lr).abs() <= RATIO_TIE && self.basis[i] < self.basis[li])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            let Some((r, ratio)) = leave else {
                return Ok(Outcome::Unbounded);
            };

            if ratio <= RATIO_TIE {
                degenerate_run += 1;
                if degenerate_run >= opts.stall_threshold {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
            }

            self.pivot(r, c);
            *iterations += 1;
            if *iterations > opts.max_iterations {
                return Err(LpError::IterationLimit(opts.max_iterations));
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Residuals {
    /// `max |A x - b|`
    pub max_eq_residual: f64,
    /// `max (h - G x)^+`
    pub max_ge_violation: f64,
    /// `min x_j` (`0` for an empty vector)
    pub min_value: f64,
}

impl Residuals {
    pub fn within(&self, tol: f64) -> bool {
        self.max_eq_residual <= tol && self.max_ge_violation <= tol && self.min_value >= -tol
    }
}

pub fn lp_residuals(lp: &LinearProgram, x: &[f64]) -> Residuals {
    let dot = |row: &[f64]| row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
    let max_eq_residual = lp
        .eq_rows
        .iter()
        .zip(&lp.eq_rhs)
        .map(|(row, b)| (dot(row) - b).abs())
        .fold(0.0, f64::max);
    let max_ge_violation = lp
        .ge_rows
        .iter()
        .zip(&lp.ge_rhs)
        .map(|(row, h)| (h - dot(row)).max(0.0))
        .fold(0.0, f64::max);
    let min_value = x.iter().copied().fold(f64::INFINITY, f64::min);
    Residuals {
        max_eq_residual,
        max_ge_violation,
        min_value: if x.is_empty() { 0.0 } else { min_value },
    }
}

/// Simplex multipliers recomputed from a final basis and the original data.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimalityCertificate {
    /// One multiplier per row: equality rows first, then inequality rows.
    pub duals: Vec<f64>,
    /// `c_j - y.a_j` over structural and surplus columns.
    pub reduced_costs: Vec<f64>,
    pub max_reduced_cost: f64,
    /// `y . (b, h)`, equal to the primal value at an optimum.
    pub dual_value: f64,
}

impl OptimalityCertificate {
    pub fn certifies(&self, primal_value: f64, tol: f64) -> bool {
        self.max_reduced_cost <= tol && (self.dual_value - primal_value).abs() <= tol
    }
}

/// Solves `B^T y = c_B` for the basis of `solution` (least squares, which
/// tolerates dropped redundant rows) and prices every column.
pub fn certify_optimality(lp: &LinearProgram, solution: &LpSolution) -> OptimalityCertificate {
    let n = lp.n_vars();
    let m_eq = lp.eq_rows.len();
    let m = m_eq + lp.ge_rows.len();
    let cols = n + lp.ge_rows.len();

    let column = |j: usize| -> DVector<f64> {
        DVector::from_fn(m, |i, _| {
            if j < n {
                if i < m_eq {
                    lp.eq_rows[i][j]
                } else {
                    lp.ge_rows[i - m_eq][j]
                }
            } else if i >= m_eq && i - m_eq == j - n {
                -1.0
            } else {
                0.0
            }
        })
    };
    let cost = |j: usize| if j < n { lp.objective[j] } else { 0.0 };

    let duals = if solution.basis.is_empty() || m == 0 {
        DVector::zeros(m)
    } else {
        let b = DMatrix::from_columns(&solution.basis.iter().map(|&j| column(j)).collect::<Vec<_>>());
        let cb = DVector::from_iterator(solution.basis.len(), solution.basis.iter().map(|&j| cost(j)));
        let bt = b.transpose();
        bt.svd(true, true).solve(&cb, 1e-12).unwrap_or_else(|_| DVector::zeros(m))
    };

    let reduced_costs: Vec<f64> = (0..cols).map(|j| cost(j) - duals.dot(&column(j))).collect();
    let max_reduced_cost = reduced_costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rhs = lp.eq_rhs.iter().chain(&lp.ge_rhs);
    let dual_value = duals.iter().zip(rhs).map(|(y, b)| y * b).sum();
    OptimalityCertificate {
        duals: duals.iter().copied().collect(),
        reduced_costs,
        max_reduced_cost: if cols == 0 { 0.0 } else { max_reduced_cost },
        dual_value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_best_vertex() {
        let mut lp = LinearProgram::new(vec![1.0, 0.0]);
        lp.add_eq(vec![1.0, 1.0], 1.0);
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value - 1.0).abs() < 1e-12);
        assert!((s.x[0] - 1.0).abs() < 1e-12 && s.x[1].abs() < 1e-12);
    }

    #[test]
    fn detects_infeasibility() {
        let mut lp = LinearProgram::new(vec![1.0, 0.0]);
        lp.add_eq(vec![1.0, 1.0], 1.0);
        lp.add_ge(vec![1.0, 0.0], 2.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn feasibility_only() {
        let mut lp = LinearProgram::new(vec![0.0]);
        lp.add_eq(vec![1.0], 0.5);
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_eq!(s.value, 0.0);
        assert!((s.x[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn detects_unboundedness() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.add_ge(vec![1.0, -1.0], 0.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn mixed_rows_and_negative_rhs() {
        // max 3x + 2y  s.t. x + y <= 4, x + 3y <= 6, x <= 3, -x - y = -3.5
        let mut lp = LinearProgram::new(vec![3.0, 2.0]);
        lp.add_le(vec![1.0, 1.0], 4.0);
        lp.add_le(vec![1.0, 3.0], 6.0);
        lp.add_le(vec![1.0, 0.0], 3.0);
        lp.add_eq(vec![-1.0, -1.0], -3.5);
        let s = solve_lp(&lp).unwrap();
        assert!((s.value - 10.0).abs() < 1e-12, "{}", s.value);
        assert!((s.x[0] - 3.0).abs() < 1e-12 && (s.x[1] - 0.5).abs() < 1e-12);
        let cert = certify_optimality(&lp, &s);
        assert!(cert.certifies(s.value, 1e-8), "{cert:?}");
    }

    #[test]
    fn redundant_equalities_are_dropped() {
        let mut lp = LinearProgram::new(vec![1.0, 2.0, 0.0]);
        lp.add_eq(vec![1.0, 1.0, 1.0], 1.0);
        lp.add_eq(vec![2.0, 2.0, 2.0], 2.0);
        lp.add_eq(vec![1.0, 0.0, 0.0], 0.25);
        let s = solve_lp(&lp).unwrap();
        assert!((s.value - 1.75).abs() < 1e-12);
        assert_eq!(s.basis.len(), 2);
        assert!(lp_residuals(&lp, &s.x).within(1e-12));
        assert!(certify_optimality(&lp, &s).certifies(s.value, 1e-8));
    }

    #[test]
    fn residuals() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.add_eq(vec![1.0, 1.0], 1.0);
        lp.add_ge(vec![1.0, 0.0], 0.5);
        let r = lp_residuals(&lp, &[0.0, 0.0]);
        assert_eq!(r.max_eq_residual, 1.0);
        assert_eq!(r.max_ge_violation, 0.5);
        let r = lp_residuals(&lp, &[1.1, -0.1]);
        assert_eq!(r.min_value, -0.1);
        assert!(lp_residuals(&lp, &[0.6, 0.4]).within(1e-8));
    }

    #[test]
    fn rejects_ragged_rows() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.add_eq(vec![1.0], 1.0);
        assert!(matches!(solve_lp(&lp), Err(LpError::RowLength { .. })));
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's classic cycling example (as a maximization).
        let mut lp = LinearProgram::new(vec![0.75, -150.0, 1.0 / 50.0, -6.0]);
        lp.add_le(vec![0.25, -60.0, -1.0 / 25.0, 9.0], 0.0);
        lp.add_le(vec![0.5, -90.0, -1.0 / 50.0, 3.0], 0.0);
        lp.add_le(vec![0.0, 0.0, 1.0, 0.0], 1.0);
        let opts = SimplexOptions { stall_threshold: 3, ..Default::default() };
        let s = solve_lp_with(&lp, &opts).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value - 0.05).abs() < 1e-12, "{}", s.value);
    }

    #[test]
    fn deterministic() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0, 1.0, 0.5]);
        lp.add_eq(vec![1.0, 1.0, 0.0, 1.0], 1.0);
        lp.add_eq(vec![0.0, 1.0, 1.0, 1.0], 1.0);
        let a = solve_lp(&lp).unwrap();
        let b = solve_lp(&lp).unwrap();
        assert_eq!(a, b);
    }
}
