//! The lifted program: concavification of `f` extended to beliefs paired
//! with per-atom threshold coordinates.
//!
//! A lifted family `(w_m, b_m, s_{1,m}, .., s_{K,m})` averages to
//! `(prior, gamma)` and is finite exactly when `s_{l,m} <= g_l(b_m)` for
//! inequalities and `s_{l,m} = g_l(b_m)` for equalities. [`lift_plan`] and
//! [`project_plan`] map feasible families between the constrained program and
//! the lifted one; [`verify_equivalence`] solves both independently.

use serde::Serialize;

use crate::concavify::solve_constrained;
use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::feasibility::check_plan_feasibility;
use crate::grid::AtomTable;
use crate::lp::{solve_lp, LinearProgram, LpStatus};
use crate::model::{ConstraintKind, LiftedPlan, ProblemSpec, SplittingPlan};
use crate::tol;

/// Assigns each atom the shares `g_l(b_m) + gamma_l - aggregate_l`.
///
/// The shares average to `gamma_l`; they sit below `g_l(b_m)` for
/// inequalities (the aggregate meets the threshold) and equal it for
/// equalities.
pub fn lift_plan(plan: &SplittingPlan, problem: &ProblemSpec, table: &AtomTable) -> Result<LiftedPlan> {
    let verdict = check_plan_feasibility(plan, problem, table, tol::FEASIBILITY)?;
    if !verdict.ok {
        return Err(Error::InfeasiblePlan(verdict));
    }
    let gamma = problem.thresholds();
    let gamma_bar = plan.aggregates(table);
    let gamma_shares = plan
        .entries()
        .iter()
        .map(|e| {
            let g = &table.atom(e.atom).g_values;
            (0..gamma.len()).map(|l| g[l] + gamma[l] - gamma_bar[l]).collect()
        })
        .collect();
    Ok(LiftedPlan { base: plan.clone(), gamma_shares, gamma_bar })
}

/// Checks that `lifted` is feasible for the lifted program and returns its
/// base plan, which is then feasible for the constrained program with the
/// same value.
pub fn project_plan(lifted: &LiftedPlan, problem: &ProblemSpec, table: &AtomTable) -> Result<SplittingPlan> {
    let k = problem.n_constraints();
    let base = &lifted.base;
    if lifted.gamma_shares.len() != base.support_size() {
        return Err(Error::DimensionMismatch {
            expected: base.support_size(),
            found: lifted.gamma_shares.len(),
        });
    }
    if let Some(bad) = lifted.gamma_shares.iter().find(|s| s.len() != k) {
        return Err(Error::DimensionMismatch { expected: k, found: bad.len() });
    }

    let totals = lifted.share_totals();
    for (l, c) in problem.constraints().iter().enumerate() {
        if (totals[l] - c.threshold).abs() > tol::FEASIBILITY {
            return Err(Error::Projection {
                constraint: l,
                detail: format!("shares average to {} instead of {}", totals[l], c.threshold),
            });
        }
        for (e, shares) in base.entries().iter().zip(&lifted.gamma_shares) {
            let g = table.atom(e.atom).g_values[l];
            let ok = match c.kind {
                ConstraintKind::Ge => shares[l] <= g + tol::FEASIBILITY,
                ConstraintKind::Eq => (shares[l] - g).abs() <= tol::FEASIBILITY,
            };
            if !ok {
                return Err(Error::Projection {
                    constraint: l,
                    detail: format!("share {} at atom {} against g = {g}", shares[l], e.atom),
                });
            }
        }
    }

    let verdict = check_plan_feasibility(base, problem, table, tol::FEASIBILITY)?;
    if !verdict.ok {
        return Err(Error::InfeasiblePlan(verdict));
    }
    Ok(base.clone())
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    /// Value of the constrained program.
    pub primal: ExtReal,
    /// Value of the lifted program.
    pub lifted: ExtReal,
    pub max_abs_diff: f64,
    pub certified: bool,
    /// The optimal lifted family, when feasible.
    pub lifted_plan: Option<LiftedPlan>,
}

/// Solves the constrained program and, separately, a finite lifted program in
/// which every atom carries free share variables `t_{l,m} = w_m s_{l,m}`:
///
/// ```text
/// maximize   sum_m w_m f(b_m)
/// subject to sum_m w_m b_m = prior
///            sum_m t_{l,m} = gamma_l                     for every l
///            t_{l,m} <= w_m g_l(b_m)   (= for equalities) for every l, m
/// ```
///
/// and certifies that both optima agree to within `1e-7`.
pub fn verify_equivalence(problem: &ProblemSpec, table: &AtomTable) -> Result<EquivalenceReport> {
    let (primal, lifted) = rayon::join(|| solve_constrained(problem, table), || solve_lifted(problem, table));
    let primal = primal?.value;
    let (lifted, lifted_plan) = lifted?;
    match (primal, lifted) {
        (ExtReal::NegInf, ExtReal::NegInf) => Ok(EquivalenceReport {
            primal,
            lifted,
            max_abs_diff: 0.0,
            certified: true,
            lifted_plan,
        }),
        (ExtReal::Finite(a), ExtReal::Finite(b)) => {
            let diff = (a - b).abs();
            Ok(EquivalenceReport {
                primal,
                lifted,
                max_abs_diff: diff,
                certified: diff <= tol::EQUIVALENCE,
                lifted_plan,
            })
        }
        _ => Err(Error::Certification(format!(
            "constrained program value {primal} but lifted program value {lifted}"
        ))),
    }
}

/// Column layout: weights for the non-excluded atoms, then `(t+, t-)` pairs
/// for every `(constraint, atom)`.
fn solve_lifted(problem: &ProblemSpec, table: &AtomTable) -> Result<(ExtReal, Option<LiftedPlan>)> {
    table.check_compatible(problem)?;
    let atoms = table.included();
    if atoms.is_empty() {
        return Err(Error::InvalidProblem("every atom has objective -inf".into()));
    }
    let s = atoms.len();
    let k = problem.n_constraints();
    let n_vars = s + 2 * k * s;
    let t_plus = |l: usize, i: usize| s + 2 * (l * s + i);

    let mut objective = vec![0.0; n_vars];
    for (i, &m) in atoms.iter().enumerate() {
        objective[i] = table.atom(m).f_value.finite().expect("included atoms are finite");
    }
    let mut lp = LinearProgram::new(objective);

    for (state, &p) in problem.prior().probs().iter().enumerate() {
        let mut row = vec![0.0; n_vars];
        for (i, &m) in atoms.iter().enumerate() {
            row[i] = table.atom(m).belief.probs()[state];
        }
        lp.add_eq(row, p);
    }
    for (l, c) in problem.constraints().iter().enumerate() {
        let mut row = vec![0.0; n_vars];
        for i in 0..s {
            row[t_plus(l, i)] = 1.0;
            row[t_plus(l, i) + 1] = -1.0;
        }
        lp.add_eq(row, c.threshold);
    }
    for (l, c) in problem.constraints().iter().enumerate() {
        for (i, &m) in atoms.iter().enumerate() {
            // w_m g_l(b_m) - t_{l,m} (>= | =) 0
            let mut row = vec![0.0; n_vars];
            row[i] = table.atom(m).g_values[l];
            row[t_plus(l, i)] = -1.0;
            row[t_plus(l, i) + 1] = 1.0;
            match c.kind {
                ConstraintKind::Ge => lp.add_ge(row, 0.0),
                ConstraintKind::Eq => lp.add_eq(row, 0.0),
            };
        }
    }

    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Infeasible => return Ok((ExtReal::NegInf, None)),
        LpStatus::Unbounded => return Err(Error::Internal("lifted program reported unbounded".into())),
        LpStatus::Optimal => {}
    }

    let plan = SplittingPlan::from_weights(table, atoms.iter().copied().zip(sol.x[..s].iter().copied()))?;
    // Shares of atoms left without weight can only be nonpositive (t <= 0 * g);
    // fold them into the first weighted atom, which keeps every row satisfied.
    let mut shares: Vec<Vec<f64>> = vec![vec![0.0; k]; plan.support_size()];
    for l in 0..k {
        let mut orphan = 0.0;
        for (i, &m) in atoms.iter().enumerate() {
            let t = sol.x[t_plus(l, i)] - sol.x[t_plus(l, i) + 1];
            match plan.entries().iter().position(|e| e.atom == m) {
                Some(pos) => shares[pos][l] += t,
                None => orphan += t,
            }
        }
        if let Some(first) = shares.first_mut() {
            first[l] += orphan;
        }
    }
    for (e, row) in plan.entries().iter().zip(shares.iter_mut()) {
        for v in row.iter_mut() {
            *v /= e.weight;
        }
    }
    let gamma_bar = plan.aggregates(table);
    let value = plan.value();
    Ok((ExtReal::Finite(value), Some(LiftedPlan { base: plan, gamma_shares: shares, gamma_bar })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concavify::evaluate_extended;
    use crate::function::FunctionSpec;
    use crate::grid::{tabulate, DEFAULT_ATOM_BUDGET};
    use crate::model::{Belief, ConstraintSpec};

    fn table_with_g(gs: &[f64], kind: ConstraintKind, gamma: f64) -> (ProblemSpec, AtomTable) {
        // affine g(b) = a * b_1 + c pinned through two atoms
        let (g0, g1) = (gs[0], gs[1]);
        let g = FunctionSpec::affine(vec![g0, g1], 0.0);
        let c = ConstraintSpec { function: g, kind, threshold: gamma };
        let p = ProblemSpec::with_default_states(Belief::uniform(2), FunctionSpec::entropy(1.0), vec![c]).unwrap();
        let t = tabulate(&p, vec![Belief::vertex(2, 0), Belief::vertex(2, 1)]).unwrap();
        (p, t)
    }

    #[test]
    fn shares_follow_the_formula() {
        let (p, t) = table_with_g(&[1.0, 3.0], ConstraintKind::Ge, 1.0);
        let plan = SplittingPlan::from_weights(&t, [(0, 0.5), (1, 0.5)]).unwrap();
        let lifted = lift_plan(&plan, &p, &t).unwrap();
        assert_eq!(lifted.gamma_bar, vec![2.0]);
        assert_eq!(lifted.gamma_shares, vec![vec![0.0], vec![2.0]]);
        assert_eq!(lifted.share_totals(), vec![1.0]);
        assert_eq!(project_plan(&lifted, &p, &t).unwrap(), plan);
    }

    #[test]
    fn equality_shares_equal_g() {
        let (p, t) = table_with_g(&[1.0, 3.0], ConstraintKind::Eq, 2.0);
        let plan = SplittingPlan::from_weights(&t, [(0, 0.5), (1, 0.5)]).unwrap();
        let lifted = lift_plan(&plan, &p, &t).unwrap();
        assert_eq!(lifted.gamma_shares, vec![vec![1.0], vec![3.0]]);
    }

    #[test]
    fn singleton_share_is_threshold() {
        let g = FunctionSpec::affine(vec![1.0, 0.0], 0.0);
        let p = ProblemSpec::with_default_states(
            Belief::new(vec![0.6, 0.4]).unwrap(),
            FunctionSpec::entropy(1.0),
            vec![ConstraintSpec::ge(g, 0.25)],
        )
        .unwrap();
        let t = tabulate(&p, vec![Belief::new(vec![0.6, 0.4]).unwrap()]).unwrap();
        let plan = SplittingPlan::from_weights(&t, [(0, 1.0)]).unwrap();
        let lifted = lift_plan(&plan, &p, &t).unwrap();
        assert!((lifted.gamma_shares[0][0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn slack_shares_project_with_slack() {
        let (p, t) = table_with_g(&[1.0, 3.0], ConstraintKind::Ge, 1.0);
        let plan = SplittingPlan::from_weights(&t, [(0, 0.5), (1, 0.5)]).unwrap();
        let lifted = LiftedPlan { base: plan.clone(), gamma_shares: vec![vec![0.5], vec![1.5]], gamma_bar: vec![2.0] };
        let projected = project_plan(&lifted, &p, &t).unwrap();
        assert!(projected.aggregate(&t, 0) - 1.0 > 0.0);
    }

    #[test]
    fn broken_share_total_is_rejected() {
        let (p, t) = table_with_g(&[1.0, 3.0], ConstraintKind::Ge, 1.0);
        let plan = SplittingPlan::from_weights(&t, [(0, 0.5), (1, 0.5)]).unwrap();
        let lifted = LiftedPlan { base: plan, gamma_shares: vec![vec![0.2], vec![2.0]], gamma_bar: vec![2.0] };
        match project_plan(&lifted, &p, &t) {
            Err(Error::Projection { constraint: 0, .. }) => {}
            other => panic!("expected projection error, got {other:?}"),
        }
    }

    #[test]
    fn share_above_g_is_rejected() {
        let (p, t) = table_with_g(&[1.0, 3.0], ConstraintKind::Ge, 1.0);
        let plan = SplittingPlan::from_weights(&t, [(0, 0.5), (1, 0.5)]).unwrap();
        let lifted = LiftedPlan { base: plan, gamma_shares: vec![vec![1.5], vec![0.5]], gamma_bar: vec![2.0] };
        assert!(matches!(project_plan(&lifted, &p, &t), Err(Error::Projection { .. })));
    }

    #[test]
    fn infeasible_plan_cannot_be_lifted() {
        let (p, t) = table_with_g(&[1.0, 3.0], ConstraintKind::Ge, 2.5);
        let plan = SplittingPlan::from_weights(&t, [(0, 0.5), (1, 0.5)]).unwrap();
        assert!(matches!(lift_plan(&plan, &p, &t), Err(Error::InfeasiblePlan(_))));
    }

    fn prosecutor(constraints: Vec<ConstraintSpec>) -> (ProblemSpec, AtomTable) {
        let p = ProblemSpec::with_default_states(
            Belief::new(vec![0.7, 0.3]).unwrap(),
            FunctionSpec::indicator(1, 0.5, 1.0, 0.0),
            constraints,
        )
        .unwrap();
        let t = AtomTable::grid(&p, 10, DEFAULT_ATOM_BUDGET).unwrap();
        (p, t)
    }

    #[test]
    fn equivalence_without_constraints() {
        let (p, t) = prosecutor(vec![]);
        let r = verify_equivalence(&p, &t).unwrap();
        assert!(r.certified);
        assert!((r.primal.finite().unwrap() - 0.6).abs() < 1e-12);
        assert!((r.lifted.finite().unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn equivalence_with_vacuous_constraint() {
        let (p, t) = prosecutor(vec![ConstraintSpec::ge(FunctionSpec::affine(vec![1.0, -1.0], 0.0), 0.2)]);
        let r = verify_equivalence(&p, &t).unwrap();
        assert!(r.certified, "{r:?}");
        assert!((r.lifted.finite().unwrap() - 0.6).abs() < 1e-9);
        let lifted = r.lifted_plan.unwrap();
        let base = project_plan(&lifted, &p, &t).unwrap();
        for (e, shares) in base.entries().iter().zip(&lifted.gamma_shares) {
            let b = &t.atom(e.atom).belief;
            assert_eq!(evaluate_extended(&p, b, shares).unwrap(), t.atom(e.atom).f_value);
        }
    }

    #[test]
    fn equivalence_when_both_infeasible() {
        let (p, t) = prosecutor(vec![ConstraintSpec::ge(FunctionSpec::entropy(1.0), 0.7)]);
        let r = verify_equivalence(&p, &t).unwrap();
        assert!(r.certified);
        assert_eq!((r.primal, r.lifted), (ExtReal::NegInf, ExtReal::NegInf));
    }
}
