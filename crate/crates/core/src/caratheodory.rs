//! Support reduction for splitting plans.
//!
//! A plan over `S` atoms can be rewritten over at most `N + P` atoms while
//! keeping the barycenter and `P` chosen constraint aggregates fixed: the
//! `(N + P + 1) x S` matrix of belief coordinates, preserved constraint values
//! and ones has a kernel once `S > N + P`, and moving the weights along a
//! kernel direction until one of them hits zero changes none of the
//! preserved quantities. The direction is oriented so the objective does not
//! decrease.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::feasibility::check_plan_feasibility;
use crate::grid::AtomTable;
use crate::model::{ConstraintKind, ProblemSpec, SplittingPlan};
use crate::tol;

/// Kernel entries below this magnitude are treated as zero.
const KERNEL_ENTRY_FLOOR: f64 = 1e-13;
/// Objective slopes below this magnitude count as flat.
const FLAT_SLOPE: f64 = 1e-12;

/// Classification of the inequality constraints at a plan.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BindingReport {
    pub binding: Vec<usize>,
    pub slack: Vec<usize>,
    pub tol: f64,
}

impl BindingReport {
    /// The number of binding inequality constraints.
    pub fn m(&self) -> usize {
        self.binding.len()
    }
}

pub fn binding_report(
    plan: &SplittingPlan,
    problem: &ProblemSpec,
    table: &AtomTable,
    tol: f64,
) -> Result<BindingReport> {
    table.check_compatible(problem)?;
    let mut binding = Vec::new();
    let mut slack = Vec::new();
    for (l, c) in problem.constraints().iter().enumerate() {
        if c.kind != ConstraintKind::Ge {
            continue;
        }
        if (plan.aggregate(table, l) - c.threshold).abs() <= tol {
            binding.push(l);
        } else {
            slack.push(l);
        }
    }
    Ok(BindingReport { binding, slack, tol })
}

/// Reduces `plan` to at most `N + |preserve|` atoms, holding the barycenter
/// and the aggregates of the constraints in `preserve` fixed and never
/// lowering the objective. `preserve` must contain every equality constraint.
pub fn reduce_support(
    plan: &SplittingPlan,
    problem: &ProblemSpec,
    table: &AtomTable,
    preserve: &[usize],
) -> Result<SplittingPlan> {
    let verdict = check_plan_feasibility(plan, problem, table, tol::LP_RESIDUAL)?;
    if !verdict.ok {
        return Err(Error::InfeasiblePlan(verdict));
    }
    let mut preserve = preserve.to_vec();
    preserve.sort_unstable();
    preserve.dedup();
    if let Some(&l) = preserve.iter().find(|&&l| l >= problem.n_constraints()) {
        return Err(Error::InvalidProblem(format!("no constraint with index {l} to preserve")));
    }
    if let Some(l) = problem.equality_indices().into_iter().find(|l| !preserve.contains(l)) {
        return Err(Error::InvalidProblem(format!("equality constraint {l} must be preserved")));
    }

    let n = problem.n_states();
    let target = n + preserve.len();
    if plan.support_size() <= target {
        return Ok(plan.clone());
    }

    let mut weights: Vec<(usize, f64)> = plan.entries().iter().map(|e| (e.atom, e.weight)).collect();
    while weights.len() > target {
        let matrix = preserved_rows(table, &weights, &preserve);
        let eta = kernel_vector(&matrix).ok_or_else(|| Error::NumericalRank {
            support: weights.len(),
            rank: numerical_rank(&matrix),
        })?;
        let f: Vec<f64> = weights
            .iter()
            .map(|&(m, _)| table.atom(m).f_value.finite().expect("plan atoms are finite"))
            .collect();
        let slope: f64 = eta.iter().zip(&f).map(|(e, f)| e * f).sum();

        let forward = max_step(&weights, &eta, 1.0);
        let backward = max_step(&weights, &eta, -1.0);
        let (sign, step) = if slope > FLAT_SLOPE {
            (1.0, forward)
        } else if slope < -FLAT_SLOPE {
            (-1.0, backward)
        } else {
            // Flat direction: remove the lowest-index atom either way can reach.
            match (forward, backward) {
                (Some(a), Some(b)) if weights[b.1].0 < weights[a.1].0 => (-1.0, Some(b)),
                (Some(a), _) => (1.0, Some(a)),
                (None, b) => (-1.0, b),
            }
        };
        let (t, blocking) = step.ok_or_else(|| {
            Error::Internal("kernel direction has no negative entry to absorb the step".into())
        })?;

        for (i, (w, e)) in weights.iter_mut().zip(eta.iter()).enumerate() {
            w.1 = if i == blocking { 0.0 } else { w.1 + sign * t * e };
        }
        weights.retain(|&(_, w)| w > tol::WEIGHT_FLOOR);
    }

    SplittingPlan::from_weights(table, weights)
}

/// Belief coordinates, preserved constraint values and a row of ones.
fn preserved_rows(table: &AtomTable, weights: &[(usize, f64)], preserve: &[usize]) -> DMatrix<f64> {
    let n = table.n_states();
    let rows = n + preserve.len() + 1;
    DMatrix::from_fn(rows, weights.len(), |i, j| {
        let atom = table.atom(weights[j].0);
        if i < n {
            atom.belief.probs()[i]
        } else if i < n + preserve.len() {
            atom.g_values[preserve[i - n]]
        } else {
            1.0
        }
    })
}

/// The largest `t` keeping `w + sign * t * eta >= 0`, with the position that
/// hits zero first (lowest atom index on ties).
fn max_step(weights: &[(usize, f64)], eta: &DVector<f64>, sign: f64) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for (i, (&(atom, w), &e)) in weights.iter().zip(eta.iter()).enumerate() {
        let d = sign * e;
        if d >= -KERNEL_ENTRY_FLOOR {
            continue;
        }
        let t = w / -d;
        best = match best {
            Some((bt, bi)) if t > bt || (t == bt && weights[bi].0 < atom) => Some((bt, bi)),
            _ => Some((t, i)),
        };
    }
    best
}

/// A unit (max-norm) kernel vector of `matrix`, retrying with column
/// equilibration when the plain decomposition does not expose one.
fn kernel_vector(matrix: &DMatrix<f64>) -> Option<DVector<f64>> {
    if let Some(v) = svd_kernel(matrix) {
        return Some(v);
    }
    let scales: Vec<f64> = matrix
        .column_iter()
        .map(|c| {
            let norm = c.norm();
            if norm > 0.0 {
                1.0 / norm
            } else {
                1.0
            }
        })
        .collect();
    let mut scaled = matrix.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= scales[j];
    }
    let z = svd_kernel(&scaled)?;
    let eta = DVector::from_iterator(z.len(), z.iter().zip(&scales).map(|(z, s)| z * s));
    normalized(eta)
}

fn svd_kernel(matrix: &DMatrix<f64>) -> Option<DVector<f64>> {
    let (rows, cols) = matrix.shape();
    let square = if rows < cols {
        let mut padded = DMatrix::zeros(cols, cols);
        padded.rows_mut(0, rows).copy_from(matrix);
        padded
    } else {
        matrix.clone()
    };
    let svd = square.svd(false, true);
    let v_t = svd.v_t?;
    let sv = &svd.singular_values;
    let (idx, &smallest) = sv.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1))?;
    let largest = sv.iter().copied().fold(0.0, f64::max);
    if smallest > 1e-9 * largest.max(1.0) {
        return None;
    }
    normalized(v_t.row(idx).transpose())
}

fn normalized(mut v: DVector<f64>) -> Option<DVector<f64>> {
    let norm = v.amax();
    if norm <= 1e-10 || !norm.is_finite() {
        return None;
    }
    v /= norm;
    for e in v.iter_mut() {
        if e.abs() < KERNEL_ENTRY_FLOOR {
            *e = 0.0;
        }
    }
    Some(v)
}

fn numerical_rank(matrix: &DMatrix<f64>) -> usize {
    matrix.clone().svd(false, false).rank(1e-9)
}

/// Outcome of [`reduce_support_slack`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlackReduction {
    pub plan: SplittingPlan,
    /// Classification of the input plan.
    pub report: BindingReport,
    /// Constraints whose aggregates were held fixed: binding inequalities,
    /// promoted inequalities and every equality.
    pub preserved: Vec<usize>,
    /// Slack inequalities that a reduction pushed below their threshold and
    /// that were therefore added to `preserved`.
    pub promoted: Vec<usize>,
}

impl SlackReduction {
    /// `N + M + K - r`, plus one per promoted constraint.
    pub fn bound(&self, n_states: usize) -> usize {
        n_states + self.preserved.len()
    }
}

/// Reduces to at most `N + M + K - r` atoms, where `M` inequality constraints
/// bind at `plan`: only binding inequalities and equalities are preserved.
/// A slack constraint violated by the reduced plan is promoted to preserved
/// and the reduction restarts from the input plan.
pub fn reduce_support_slack(
    plan: &SplittingPlan,
    problem: &ProblemSpec,
    table: &AtomTable,
) -> Result<SlackReduction> {
    reduce_support_slack_with(plan, problem, table, tol::BINDING)
}

pub fn reduce_support_slack_with(
    plan: &SplittingPlan,
    problem: &ProblemSpec,
    table: &AtomTable,
    binding_tol: f64,
) -> Result<SlackReduction> {
    let report = binding_report(plan, problem, table, binding_tol)?;
    let mut preserved: Vec<usize> = report.binding.iter().copied().chain(problem.equality_indices()).collect();
    preserved.sort_unstable();
    let mut promoted = Vec::new();

    loop {
        let reduced = reduce_support(plan, problem, table, &preserved)?;
        let violated: Vec<usize> = report
            .slack
            .iter()
            .copied()
            .filter(|l| !preserved.contains(l))
            .filter(|&l| !problem.constraints()[l].is_met(reduced.aggregate(table, l), tol::FEASIBILITY))
            .collect();
        if violated.is_empty() {
            return Ok(SlackReduction { plan: reduced, report, preserved, promoted });
        }
        for l in violated {
            log::warn!("slack constraint {l} violated after support reduction; preserving it and retrying");
            promoted.push(l);
            preserved.push(l);
        }
        preserved.sort_unstable();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ext::ExtReal;
    use crate::function::FunctionSpec;
    use crate::grid::tabulate;
    use crate::model::{Belief, ConstraintSpec};

    fn two_state(constraints: Vec<ConstraintSpec>, prior: [f64; 2]) -> ProblemSpec {
        ProblemSpec::with_default_states(
            Belief::new(prior.to_vec()).unwrap(),
            FunctionSpec::indicator(1, 0.5, 1.0, 0.0),
            constraints,
        )
        .unwrap()
    }

    #[test]
    fn duplicate_vertex_collapses() {
        let p = two_state(vec![], [0.5, 0.5]);
        // The same belief twice, once perturbed below the dedup resolution of the
        // kernel but above the table's 12-digit key, so they are distinct atoms.
        let beliefs = vec![
            Belief::new(vec![1.0, 0.0]).unwrap(),
            Belief::new(vec![1.0 - 1e-11, 1e-11]).unwrap(),
            Belief::new(vec![0.0, 1.0]).unwrap(),
        ];
        let t = tabulate(&p, beliefs).unwrap();
        let plan = SplittingPlan::from_weights(&t, [(0, 0.25), (1, 0.25), (2, 0.5 - 0.25e-11)]).unwrap();
        let reduced = reduce_support(&plan, &p, &t, &[]).unwrap();
        assert_eq!(reduced.support_size(), 2);
        let bary = reduced.barycenter(&t);
        assert!((bary[0] - 0.5).abs() < 1e-9 && (bary[1] - 0.5).abs() < 1e-9);
        assert!(reduced.value() >= plan.value() - 1e-9);
    }

    #[test]
    fn small_plans_are_untouched() {
        let p = two_state(vec![], [0.7, 0.3]);
        let t = tabulate(&p, vec![Belief::vertex(2, 0), Belief::uniform(2)]).unwrap();
        let plan = SplittingPlan::from_weights(&t, [(0, 0.4), (1, 0.6)]).unwrap();
        assert_eq!(reduce_support(&plan, &p, &t, &[]).unwrap(), plan);
    }

    #[test]
    fn reduction_raises_objective() {
        // prior 0.3 split over mu_2 in {0, 0.25, 0.5, 1}: only {0, 0.5} is optimal
        let p = two_state(vec![], [0.7, 0.3]);
        let beliefs: Vec<Belief> = [0.0, 0.25, 0.5, 1.0]
            .iter()
            .map(|&q| Belief::new(vec![1.0 - q, q]).unwrap())
            .collect();
        let t = tabulate(&p, beliefs).unwrap();
        // 0.25*0.25 + 0.3*0.5 + 0.0875*1 = 0.3 with weight on atom 0 = 0.3625
        let plan = SplittingPlan::from_weights(&t, [(0, 0.3625), (1, 0.25), (2, 0.3), (3, 0.0875)]).unwrap();
        let reduced = reduce_support(&plan, &p, &t, &[]).unwrap();
        assert!(reduced.support_size() <= 2);
        assert!(reduced.value() >= plan.value() - 1e-12);
        assert!(check_plan_feasibility(&reduced, &p, &t, 1e-9).unwrap().ok);
        assert_eq!(reduce_support(&reduced, &p, &t, &[]).unwrap(), reduced);
    }

    #[test]
    fn preserved_aggregates_hold() {
        let g = FunctionSpec::entropy(1.0);
        let beliefs: Vec<Belief> = (0..=8).map(|k| Belief::new(vec![1.0 - k as f64 / 8.0, k as f64 / 8.0]).unwrap()).collect();
        let p0 = two_state(vec![ConstraintSpec::ge(g.clone(), 0.0)], [0.5, 0.5]);
        let t = tabulate(&p0, beliefs).unwrap();
        let weights: Vec<(usize, f64)> = (0..=8).map(|m| (m, 1.0 / 9.0)).collect();
        let plan = SplittingPlan::from_weights(&t, weights).unwrap();
        let agg = plan.aggregate(&t, 0);
        let p = two_state(vec![ConstraintSpec::ge(g, agg)], [0.5, 0.5]);
        let reduced = reduce_support(&plan, &p, &t, &[0]).unwrap();
        assert!(reduced.support_size() <= 3);
        assert!((reduced.aggregate(&t, 0) - agg).abs() < 1e-9);
        assert!(reduced.value() >= plan.value() - 1e-9);
    }

    #[test]
    fn equalities_must_be_preserved() {
        let g = FunctionSpec::affine(vec![1.0, 0.0], 0.0);
        let p = two_state(vec![ConstraintSpec::eq(g, 0.7)], [0.7, 0.3]);
        let t = tabulate(&p, vec![Belief::vertex(2, 0), Belief::vertex(2, 1)]).unwrap();
        let plan = SplittingPlan::from_weights(&t, [(0, 0.7), (1, 0.3)]).unwrap();
        assert!(matches!(reduce_support(&plan, &p, &t, &[]), Err(Error::InvalidProblem(_))));
        assert!(reduce_support(&plan, &p, &t, &[0]).is_ok());
    }

    #[test]
    fn infeasible_input_is_rejected() {
        let p = two_state(vec![], [0.7, 0.3]);
        let t = tabulate(&p, vec![Belief::vertex(2, 0), Belief::vertex(2, 1)]).unwrap();
        let plan = SplittingPlan::from_weights(&t, [(0, 0.5), (1, 0.5)]).unwrap();
        assert!(matches!(reduce_support(&plan, &p, &t, &[]), Err(Error::InfeasiblePlan(_))));
    }

    #[test]
    fn binding_classification() {
        let g = FunctionSpec::affine(vec![1.0, -1.0], 0.0);
        let p = two_state(vec![ConstraintSpec::ge(g.clone(), 0.2)], [0.7, 0.3]);
        let t = tabulate(&p, vec![Belief::vertex(2, 0), Belief::uniform(2)]).unwrap();
        let plan = SplittingPlan::from_weights(&t, [(0, 0.4), (1, 0.6)]).unwrap();
        let r = binding_report(&plan, &p, &t, tol::BINDING).unwrap();
        assert_eq!((r.m(), r.slack.clone()), (0, vec![0]));
        let tight = two_state(vec![ConstraintSpec::ge(g, 0.4)], [0.7, 0.3]);
        assert_eq!(binding_report(&plan, &tight, &t, tol::BINDING).unwrap().binding, vec![0]);
        let none = two_state(vec![], [0.7, 0.3]);
        let t0 = tabulate(&none, vec![Belief::vertex(2, 0), Belief::uniform(2)]).unwrap();
        let r0 = binding_report(&plan, &none, &t0, tol::BINDING).unwrap();
        assert!(r0.binding.is_empty() && r0.slack.is_empty());
    }

    #[test]
    fn slack_reduction_drops_slack_constraints() {
        // one slack affine inequality: bound N + M + K - r = 2
        let g = FunctionSpec::affine(vec![1.0, -1.0], 0.0);
        let p = two_state(vec![ConstraintSpec::ge(g, 0.2)], [0.7, 0.3]);
        let beliefs: Vec<Belief> = [0.0, 0.25, 0.5].iter().map(|&q| Belief::new(vec![1.0 - q, q]).unwrap()).collect();
        let t = tabulate(&p, beliefs).unwrap();
        let plan = SplittingPlan::from_weights(&t, [(0, 0.2), (1, 0.4), (2, 0.4)]).unwrap();
        let out = reduce_support_slack(&plan, &p, &t).unwrap();
        assert_eq!(out.report.m(), 0);
        assert!(out.promoted.is_empty());
        assert_eq!(out.bound(2), 2);
        assert!(out.plan.support_size() <= 2);
        assert_eq!(t.atom(0).f_value, ExtReal::Finite(0.0));
        assert!(out.plan.value() >= plan.value() - 1e-12);
    }

    #[test]
    fn promotion_restores_a_grazed_constraint() {
        // Objective -H: every improving kernel move lowers the entropy aggregate,
        // so a nominally slack entropy floor just below the start value is crossed.
        let beliefs: Vec<Belief> = [0.0, 0.25, 0.5, 0.75, 1.0]
            .iter()
            .map(|&q| Belief::new(vec![1.0 - q, q]).unwrap())
            .collect();
        let f = FunctionSpec::entropy(-1.0);
        let g = FunctionSpec::entropy(1.0);
        let base = ProblemSpec::with_default_states(
            Belief::uniform(2),
            f.clone(),
            vec![ConstraintSpec::ge(g.clone(), 0.0)],
        )
        .unwrap();
        let t = tabulate(&base, beliefs).unwrap();
        let plan = SplittingPlan::from_weights(&t, (0..5).map(|m| (m, 0.2))).unwrap();
        let agg = plan.aggregate(&t, 0);
        let p = ProblemSpec::with_default_states(Belief::uniform(2), f, vec![ConstraintSpec::ge(g, agg - 1e-10)])
            .unwrap();

        let out = reduce_support_slack_with(&plan, &p, &t, 1e-12).unwrap();
        assert_eq!(out.report.slack, vec![0]);
        assert_eq!(out.promoted, vec![0]);
        assert_eq!(out.preserved, vec![0]);
        assert!(out.plan.support_size() <= 3);
        assert!(check_plan_feasibility(&out.plan, &p, &t, 1e-9).unwrap().ok);
        assert!(out.plan.value() >= plan.value() - 1e-9);

        // Without the promotion the plain reduction does cross the floor.
        let unguarded = reduce_support(&plan, &p, &t, &[]).unwrap();
        assert!(unguarded.aggregate(&t, 0) < agg - 1e-3);
    }
}
