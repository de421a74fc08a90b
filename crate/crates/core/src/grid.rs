//! Candidate posterior sets: uniform simplex grids and their tabulation.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::function::belief_key;
use crate::model::{Atom, Belief, ProblemSpec};

pub const DEFAULT_ATOM_BUDGET: u64 = 2_000_000;

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i + 1) as u128,
            None => return u128::MAX,
        };
    }
    acc
}

/// Number of beliefs on the `1/d` grid over `n` states: `C(d + n - 1, n - 1)`.
pub fn grid_size(n_states: usize, denominator: u32) -> u128 {
    binomial(denominator as u64 + n_states as u64 - 1, n_states as u64 - 1)
}

/// All compositions of `d` into `n` nonnegative parts, ordered by descending
/// first part, then descending second part, and so on.
pub fn compositions(n_states: usize, denominator: u32, budget: u64) -> Result<Vec<Vec<u32>>> {
    if n_states < 2 {
        return Err(Error::InvalidProblem(format!("need at least 2 states, found {n_states}")));
    }
    if denominator < 1 {
        return Err(Error::InvalidProblem("grid denominator must be at least 1".into()));
    }
    let count = grid_size(n_states, denominator);
    if count > budget as u128 {
        return Err(Error::AtomBudget { count, budget });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut current = vec![0u32; n_states];
    fill(&mut current, 0, denominator, &mut out);
    debug_assert_eq!(out.len() as u128, count);
    Ok(out)
}

fn fill(current: &mut [u32], pos: usize, remaining: u32, out: &mut Vec<Vec<u32>>) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.push(current.to_vec());
        return;
    }
    for k in (0..=remaining).rev() {
        current[pos] = k;
        fill(current, pos + 1, remaining - k, out);
    }
}

/// Every belief whose entries are multiples of `1/d`, under the default atom budget.
pub fn simplex_grid(n_states: usize, denominator: u32) -> Result<Vec<Belief>> {
    simplex_grid_with_budget(n_states, denominator, DEFAULT_ATOM_BUDGET)
}

pub fn simplex_grid_with_budget(n_states: usize, denominator: u32, budget: u64) -> Result<Vec<Belief>> {
    let d = denominator as f64;
    compositions(n_states, denominator, budget)?
        .into_iter()
        .map(|c| Belief::new(c.into_iter().map(|k| k as f64 / d).collect()))
        .collect()
}

/// The denominator of a nested refinement: every `1/d` point is a `1/(d * factor)` point.
pub fn refine_nested(denominator: u32, factor: u32) -> u32 {
    assert!(factor >= 2, "refinement factor must be at least 2, got {factor}");
    denominator * factor
}

/// Atoms tabulated against one problem.
#[derive(Clone, Debug, Serialize)]
pub struct AtomTable {
    atoms: Vec<Atom>,
    mesh_denominator: u32,
    n_states: usize,
    n_constraints: usize,
}

impl AtomTable {
    /// Tabulates the `1/d` grid.
    pub fn grid(problem: &ProblemSpec, denominator: u32, budget: u64) -> Result<Self> {
        Self::build(problem, denominator, &[], budget)
    }

    /// Tabulates the `1/d` grid (skipped when `denominator == 0`) together with
    /// user-supplied beliefs. Duplicates are dropped after rounding to 12 digits;
    /// grid atoms keep their order and extras follow in input order.
    pub fn build(
        problem: &ProblemSpec,
        denominator: u32,
        extra: &[Belief],
        budget: u64,
    ) -> Result<Self> {
        let mut beliefs = if denominator == 0 {
            Vec::new()
        } else {
            simplex_grid_with_budget(problem.n_states(), denominator, budget)?
        };
        let mut seen: HashSet<Vec<i64>> = beliefs.iter().map(|b| belief_key(b.probs())).collect();
        for b in extra {
            if b.len() != problem.n_states() {
                return Err(Error::DimensionMismatch { expected: problem.n_states(), found: b.len() });
            }
            if seen.insert(belief_key(b.probs())) {
                beliefs.push(b.clone());
            }
        }
        let mut table = tabulate(problem, beliefs)?;
        table.mesh_denominator = denominator;
        Ok(table)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom(&self, index: usize) -> &Atom {
        &self.atoms[index]
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `0` for tables built only from user-supplied beliefs.
    pub fn mesh_denominator(&self) -> u32 {
        self.mesh_denominator
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_constraints(&self) -> usize {
        self.n_constraints
    }

    /// Indices of atoms with a finite objective value.
    pub fn included(&self) -> Vec<usize> {
        (0..self.atoms.len()).filter(|&i| !self.atoms[i].is_excluded()).collect()
    }

    /// Index of the atom equal to `probs` after rounding to 12 digits.
    pub fn find(&self, probs: &[f64]) -> Option<usize> {
        let key = belief_key(probs);
        self.atoms.iter().position(|a| belief_key(a.belief.probs()) == key)
    }

    pub(crate) fn check_compatible(&self, problem: &ProblemSpec) -> Result<()> {
        if self.n_states != problem.n_states() {
            return Err(Error::DimensionMismatch { expected: problem.n_states(), found: self.n_states });
        }
        if self.n_constraints != problem.n_constraints() {
            return Err(Error::DimensionMismatch {
                expected: problem.n_constraints(),
                found: self.n_constraints,
            });
        }
        Ok(())
    }
}

/// Evaluates the objective and every constraint on `beliefs`, preserving order.
///
/// Atoms whose objective is `-inf` are kept and report [`Atom::is_excluded`].
pub fn tabulate(problem: &ProblemSpec, beliefs: Vec<Belief>) -> Result<AtomTable> {
    let n = problem.n_states();
    let mut seen = HashSet::with_capacity(beliefs.len());
    for b in &beliefs {
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: b.len() });
        }
        if !seen.insert(belief_key(b.probs())) {
            return Err(Error::DuplicateAtom(b.probs().to_vec()));
        }
    }

    let atoms = beliefs
        .into_par_iter()
        .map(|belief| {
            let f_value = problem.objective().eval(&belief)?;
            let g_values = problem
                .constraints()
                .iter()
                .enumerate()
                .map(|(l, c)| match c.function.eval(&belief)? {
                    ExtReal::Finite(v) => Ok(v),
                    ExtReal::NegInf => Err(Error::NegInfConstraint {
                        constraint: l,
                        belief: belief.probs().to_vec(),
                    }),
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(Atom { belief, f_value, g_values })
        })
        .collect::<Result<Vec<Atom>>>()?;

    Ok(AtomTable {
        atoms,
        mesh_denominator: 0,
        n_states: n,
        n_constraints: problem.n_constraints(),
    })
}
