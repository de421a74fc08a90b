//! Brute-force support enumeration and seeded random instances.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::concavify::{assemble, threshold_range};
use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::function::{AffinePiece, FunctionSpec, TableFn};
use crate::grid::{binomial, simplex_grid, AtomTable, DEFAULT_ATOM_BUDGET};
use crate::lp::{solve_lp, LinearProgram, LpStatus};
use crate::model::{Belief, ConstraintKind, ConstraintSpec, ProblemSpec, SplittingPlan};

pub const DEFAULT_SUBSET_BUDGET: u64 = 5_000_000;

/// Values closer than this count as ties, settled by the lower subset.
const TIE: f64 = 1e-12;

/// Value, atoms and weights of the best subset seen so far.
type Candidate = (f64, Vec<usize>, Vec<f64>);

#[derive(Clone, Debug)]
pub struct BruteForceResult {
    /// `NegInf` when no subset admits a feasible weighting.
    pub value: ExtReal,
    pub plan: Option<SplittingPlan>,
    pub subsets: u128,
}

/// Number of subsets [`brute_force_value`] would solve.
pub fn subset_count(table: &AtomTable, max_support: usize) -> u128 {
    let n = table.included().len();
    binomial(n as u64, max_support.min(n) as u64)
}

/// Best plan supported on at most `max_support` atoms, found by solving the
/// program restricted to every subset of exactly `min(max_support, atoms)`
/// non-excluded atoms. Smaller supports are covered because each of them sits
/// inside some enumerated subset.
pub fn brute_force_value(
    problem: &ProblemSpec,
    table: &AtomTable,
    max_support: usize,
    budget: u64,
) -> Result<BruteForceResult> {
    if max_support == 0 {
        return Err(Error::InvalidProblem("max_support must be positive".into()));
    }
    let full = assemble(problem, table)?;
    let columns = full.columns;
    let n = columns.len();
    let k = max_support.min(n);
    let subsets = binomial(n as u64, k as u64);
    if subsets > budget as u128 {
        return Err(Error::OracleBudget { subsets, budget });
    }

    let best = (0..=n - k)
        .into_par_iter()
        .map(|first| best_with_first(problem, table, &columns, first, k))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .fold(None, |acc: Option<Candidate>, cand| match acc {
            Some(a) if cand.0 <= a.0 + TIE => Some(a),
            _ => Some(cand),
        });

    match best {
        None => Ok(BruteForceResult { value: ExtReal::NegInf, plan: None, subsets }),
        Some((_, subset, weights)) => {
            let plan = SplittingPlan::from_weights(table, subset.into_iter().zip(weights))?;
            Ok(BruteForceResult { value: ExtReal::Finite(plan.value()), plan: Some(plan), subsets })
        }
    }
}

/// Best subset (lexicographically first among ties) whose smallest position
/// is `first`.
fn best_with_first(
    problem: &ProblemSpec,
    table: &AtomTable,
    columns: &[usize],
    first: usize,
    k: usize,
) -> Result<Option<Candidate>> {
    let n = columns.len();
    let mut idx: Vec<usize> = std::iter::once(first).chain(first + 1..first + k).collect();
    let mut best: Option<Candidate> = None;
    loop {
        let atoms: Vec<usize> = idx.iter().map(|&i| columns[i]).collect();
        let lp = subset_program(problem, table, &atoms);
        let sol = solve_lp(&lp)?;
        if sol.status == LpStatus::Optimal && best.as_ref().is_none_or(|b| sol.value > b.0 + TIE) {
            best = Some((sol.value, atoms, sol.x));
        }
        // next combination with the first position held fixed
        let mut j = k;
        loop {
            if j <= 1 {
                return Ok(best);
            }
            j -= 1;
            if idx[j] < n - k + j {
                idx[j] += 1;
                for t in j + 1..k {
                    idx[t] = idx[t - 1] + 1;
                }
                break;
            }
        }
    }
}

fn subset_program(problem: &ProblemSpec, table: &AtomTable, atoms: &[usize]) -> LinearProgram {
    let col = |f: &dyn Fn(usize) -> f64| atoms.iter().map(|&m| f(m)).collect::<Vec<f64>>();
    let mut lp = LinearProgram::new(col(&|m| table.atom(m).f_value.finite().unwrap_or(0.0)));
    for (state, &p) in problem.prior().probs().iter().enumerate() {
        lp.add_eq(col(&|m| table.atom(m).belief.probs()[state]), p);
    }
    for (l, c) in problem.constraints().iter().enumerate() {
        let row = col(&|m| table.atom(m).g_values[l]);
        match c.kind {
            ConstraintKind::Eq => lp.add_eq(row, c.threshold),
            ConstraintKind::Ge => lp.add_ge(row, c.threshold),
        };
    }
    lp
}

/// Which constraint forms a random instance may draw from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintForms {
    /// Affine, entropy and tabulated concave quadratics.
    Mixed,
    /// Affine and entropy only, so the problem stays meaningful off the grid.
    Analytic,
    Affine,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObjectiveForms {
    /// Piecewise-linear maxima or uniform tables.
    Mixed,
    PwlMax,
}

#[derive(Clone, Copy, Debug)]
pub struct RandomProblemOptions {
    pub seed: u64,
    pub n_states: usize,
    pub n_constraints: usize,
    /// Number of leading inequality constraints; the rest are equalities.
    pub n_inequalities: usize,
    pub denominator: u32,
    pub constraints: ConstraintForms,
    pub objective: ObjectiveForms,
}

impl RandomProblemOptions {
    pub fn new(seed: u64, n_states: usize, n_constraints: usize, n_inequalities: usize, denominator: u32) -> Self {
        RandomProblemOptions {
            seed,
            n_states,
            n_constraints,
            n_inequalities,
            denominator,
            constraints: ConstraintForms::Mixed,
            objective: ObjectiveForms::Mixed,
        }
    }
}

/// Seeded instance on the `d`-grid with `k` constraints, the first `r` of
/// them inequalities.
pub fn random_problem(seed: u64, n: usize, k: usize, r: usize, d: u32) -> Result<(ProblemSpec, AtomTable)> {
    random_problem_with(&RandomProblemOptions::new(seed, n, k, r, d))
}

/// Inequality thresholds are drawn uniformly from the achievable range, so
/// some draws are infeasible. Equality thresholds are the aggregates of a
/// random mixture of the vertex split and the unsplit prior, which is always
/// achievable.
pub fn random_problem_with(opts: &RandomProblemOptions) -> Result<(ProblemSpec, AtomTable)> {
    let n = opts.n_states;
    let k = opts.n_constraints;
    if !(2..=4).contains(&n) || opts.n_inequalities > k || k > 3 || opts.denominator == 0 {
        return Err(Error::InvalidProblem(format!(
            "random instances need 2 <= N <= 4, r <= K <= 3 and d >= 1 (got N={n}, K={k}, r={}, d={})",
            opts.n_inequalities, opts.denominator
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let grid = simplex_grid(n, opts.denominator)?;

    let interior: Vec<&Belief> = grid.iter().filter(|b| b.probs().iter().all(|&p| p > 0.0)).collect();
    let prior = interior.choose(&mut rng).map_or_else(|| Belief::uniform(n), |b| (*b).clone());

    let objective = match opts.objective {
        ObjectiveForms::Mixed if rng.gen_bool(0.5) => uniform_table(&grid, &mut rng)?,
        _ => random_pwl_max(n, &mut rng),
    };

    let mut functions = Vec::with_capacity(k);
    for _ in 0..k {
        let form = match opts.constraints {
            ConstraintForms::Mixed => rng.gen_range(0..3),
            ConstraintForms::Analytic => rng.gen_range(0..2),
            ConstraintForms::Affine => 0,
        };
        functions.push(match form {
            0 => FunctionSpec::affine((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(), 0.0),
            1 => FunctionSpec::entropy(rng.gen_range(0.5..1.5)),
            _ => concave_table(&grid, &mut rng)?,
        });
    }

    let constraints: Vec<ConstraintSpec> = functions
        .into_iter()
        .enumerate()
        .map(|(l, g)| if l < opts.n_inequalities { ConstraintSpec::ge(g, 0.0) } else { ConstraintSpec::eq(g, 0.0) })
        .collect();
    let problem = ProblemSpec::with_default_states(prior.clone(), objective, constraints)?;
    let table = AtomTable::build(&problem, opts.denominator, &[], DEFAULT_ATOM_BUDGET)?;

    let theta: f64 = rng.gen();
    let mut thresholds = Vec::with_capacity(k);
    for (l, c) in problem.constraints().iter().enumerate() {
        let gamma = match c.kind {
            ConstraintKind::Ge => {
                let range = threshold_range(&problem, &table, l)?;
                if range.max > range.min {
                    rng.gen_range(range.min..=range.max)
                } else {
                    range.min
                }
            }
            ConstraintKind::Eq => {
                let g = |b: &Belief| c.function.eval(b).map(|v| v.finite().unwrap_or(0.0));
                let mut split = 0.0;
                for (s, &p) in prior.probs().iter().enumerate() {
                    split += p * g(&Belief::vertex(n, s))?;
                }
                theta * split + (1.0 - theta) * g(&prior)?
            }
        };
        thresholds.push(gamma);
    }
    Ok((problem.with_thresholds(&thresholds)?, table))
}

fn random_pwl_max(n: usize, rng: &mut ChaCha8Rng) -> FunctionSpec {
    let pieces = (0..rng.gen_range(1..=4))
        .map(|_| AffinePiece::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(), rng.gen_range(-0.5..0.5)))
        .collect();
    FunctionSpec::PwlMax { pieces }
}

fn uniform_table(grid: &[Belief], rng: &mut ChaCha8Rng) -> Result<FunctionSpec> {
    let atoms = grid.iter().map(|b| b.probs().to_vec()).collect();
    let values = (0..grid.len()).map(|_| ExtReal::Finite(rng.gen())).collect();
    Ok(FunctionSpec::Table(TableFn::new(atoms, values)?))
}

/// `b - sum_i a_i (mu_i - c_i)^2` tabulated on the grid.
fn concave_table(grid: &[Belief], rng: &mut ChaCha8Rng) -> Result<FunctionSpec> {
    let n = grid[0].len();
    let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
    let center = grid.choose(rng).expect("grid is nonempty").clone();
    let b: f64 = rng.gen();
    let table = TableFn::sample(grid, |mu| {
        let q: f64 = (0..n).map(|i| a[i] * (mu.probs()[i] - center.probs()[i]).powi(2)).sum();
        ExtReal::Finite(b - q)
    })?;
    Ok(FunctionSpec::Table(table))
}

/// Mixes `plan` with optima of the same program under `extra` random
/// objectives. The mixture stays feasible and usually has a wider support.
pub fn pad_plan(
    plan: &SplittingPlan,
    problem: &ProblemSpec,
    table: &AtomTable,
    seed: u64,
    extra: usize,
) -> Result<SplittingPlan> {
    let program = assemble(problem, table)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts: Vec<(usize, f64)> = plan.entries().iter().map(|e| (e.atom, e.weight)).collect();
    let mut mass = 1.0;
    for _ in 0..extra {
        let objective: Vec<f64> = (0..program.columns.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sol = solve_lp(&program.lp.with_objective(objective)?)?;
        if sol.status != LpStatus::Optimal {
            continue;
        }
        let share: f64 = rng.gen_range(0.1..0.5);
        for p in parts.iter_mut() {
            p.1 *= 1.0 - share;
        }
        parts.extend(program.columns.iter().zip(&sol.x).map(|(&m, &w)| (m, share * w.max(0.0))));
        mass *= 1.0 - share;
    }
    debug_assert!(mass > 0.0);
    SplittingPlan::from_weights(table, parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concavify::solve_constrained;

    fn prosecutor(d: u32) -> (ProblemSpec, AtomTable) {
        let p = ProblemSpec::with_default_states(
            Belief::new(vec![0.7, 0.3]).unwrap(),
            FunctionSpec::indicator(1, 0.5, 1.0, 0.0),
            vec![],
        )
        .unwrap();
        let t = AtomTable::grid(&p, d, DEFAULT_ATOM_BUDGET).unwrap();
        (p, t)
    }

    #[test]
    fn prosecutor_two_point_value() {
        let (p, t) = prosecutor(10);
        let r = brute_force_value(&p, &t, 2, DEFAULT_SUBSET_BUDGET).unwrap();
        assert!((r.value.finite().unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(r.subsets, 55);
    }

    #[test]
    fn singleton_support_is_the_prior() {
        let (p, t) = prosecutor(10);
        let r = brute_force_value(&p, &t, 1, DEFAULT_SUBSET_BUDGET).unwrap();
        assert_eq!(r.value, ExtReal::Finite(0.0));
        let plan = r.plan.unwrap();
        assert_eq!(t.atom(plan.entries()[0].atom).belief.probs(), &[0.7, 0.3]);
    }

    #[test]
    fn full_disclosure_equality() {
        let grid = simplex_grid(2, 10).unwrap();
        let g = TableFn::sample(&grid, |b| ExtReal::Finite(b.probs()[1] * (1.0 - b.probs()[1]))).unwrap();
        let p = ProblemSpec::with_default_states(
            Belief::new(vec![0.7, 0.3]).unwrap(),
            FunctionSpec::indicator(1, 0.5, 1.0, 0.0),
            vec![ConstraintSpec::eq(FunctionSpec::Table(g), 0.0)],
        )
        .unwrap();
        let t = AtomTable::grid(&p, 10, DEFAULT_ATOM_BUDGET).unwrap();
        let r = brute_force_value(&p, &t, 3, DEFAULT_SUBSET_BUDGET).unwrap();
        assert!((r.value.finite().unwrap() - 0.3).abs() < 1e-12);
        let beliefs: Vec<&[f64]> = r.plan.as_ref().unwrap().entries().iter().map(|e| t.atom(e.atom).belief.probs()).collect();
        assert_eq!(beliefs, vec![&[1.0, 0.0][..], &[0.0, 1.0][..]]);
    }

    #[test]
    fn budget_is_enforced() {
        let (p, t) = prosecutor(40);
        assert!(matches!(brute_force_value(&p, &t, 3, 1000), Err(Error::OracleBudget { .. })));
    }

    #[test]
    fn matches_the_full_program() {
        for seed in 0..6 {
            let (p, t) = random_problem(seed, 2, 1, (seed % 2) as usize, 6).unwrap();
            let lp = solve_constrained(&p, &t).unwrap();
            let bf = brute_force_value(&p, &t, 3, DEFAULT_SUBSET_BUDGET).unwrap();
            match (lp.value, bf.value) {
                (ExtReal::Finite(a), ExtReal::Finite(b)) => assert!((a - b).abs() < 1e-7, "seed {seed}: {a} vs {b}"),
                (a, b) => assert_eq!(a, b, "seed {seed}"),
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = random_problem(17, 3, 2, 1, 6).unwrap();
        let b = random_problem(17, 3, 2, 1, 6).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1.len(), b.1.len());
        assert_ne!(random_problem(18, 3, 2, 1, 6).unwrap().0, a.0);
    }

    #[test]
    fn equality_instances_are_feasible() {
        for seed in 0..10 {
            let (p, t) = random_problem(seed, 3, 1, 0, 6).unwrap();
            assert_eq!(p.equality_indices(), vec![0]);
            assert!(solve_constrained(&p, &t).unwrap().is_optimal(), "seed {seed}");
        }
    }

    #[test]
    fn padding_keeps_feasibility() {
        let (p, t) = random_problem(3, 3, 1, 1, 6).unwrap();
        let report = solve_constrained(&p, &t).unwrap();
        if let Some(plan) = report.plan {
            let padded = pad_plan(&plan, &p, &t, 9, 4).unwrap();
            assert!(padded.support_size() >= plan.support_size());
            let v = crate::feasibility::check_plan_feasibility(&padded, &p, &t, 1e-8).unwrap();
            assert!(v.ok, "{v}");
        }
    }

    #[test]
    fn rejects_out_of_range_shapes() {
        assert!(random_problem(0, 5, 0, 0, 6).is_err());
        assert!(random_problem(0, 2, 1, 2, 6).is_err());
    }
}
