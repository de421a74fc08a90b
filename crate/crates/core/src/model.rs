//! Domain types: beliefs, problems, atoms, splitting plans and solve reports.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::function::FunctionSpec;
use crate::grid::AtomTable;
use crate::tol;

/// A probability vector over the states.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Belief(Vec<f64>);

impl Belief {
    /// Validates nonnegativity (to within `-1e-12`) and a unit sum (to within `1e-9`).
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidBelief("empty probability vector".into()));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < -tol::WEIGHT_FLOOR) {
            return Err(Error::InvalidBelief(format!("entry {p} is negative or non-finite")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > tol::FEASIBILITY {
            return Err(Error::InvalidBelief(format!("entries sum to {sum}, not 1")));
        }
        Ok(Belief(probs))
    }

    /// The degenerate belief on `state`.
    pub fn vertex(n_states: usize, state: usize) -> Self {
        let mut probs = vec![0.0; n_states];
        probs[state] = 1.0;
        Belief(probs)
    }

    pub fn uniform(n_states: usize) -> Self {
        Belief(vec![1.0 / n_states as f64; n_states])
    }

    /// Convex combination of beliefs of equal length.
    pub fn mix<'a, I>(parts: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, &'a Belief)>,
    {
        let mut out: Vec<f64> = Vec::new();
        for (w, b) in parts {
            if out.is_empty() {
                out = vec![0.0; b.len()];
            } else if out.len() != b.len() {
                return Err(Error::DimensionMismatch { expected: out.len(), found: b.len() });
            }
            for (o, p) in out.iter_mut().zip(b.probs()) {
                *o += w * p;
            }
        }
        Belief::new(out)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<'de> Deserialize<'de> for Belief {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let probs = Vec::<f64>::deserialize(deserializer)?;
        Belief::new(probs).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    /// `sum_m weight_m g(belief_m) >= threshold`
    Ge,
    /// `sum_m weight_m g(belief_m) == threshold`
    Eq,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    #[serde(rename = "fn")]
    pub function: FunctionSpec,
    pub kind: ConstraintKind,
    pub threshold: f64,
}

impl ConstraintSpec {
    pub fn ge(function: FunctionSpec, threshold: f64) -> Self {
        ConstraintSpec { function, kind: ConstraintKind::Ge, threshold }
    }

    pub fn eq(function: FunctionSpec, threshold: f64) -> Self {
        ConstraintSpec { function, kind: ConstraintKind::Eq, threshold }
    }

    /// Whether `aggregate` meets the threshold to within `tol`.
    pub fn is_met(&self, aggregate: f64, tol: f64) -> bool {
        match self.kind {
            ConstraintKind::Ge => aggregate >= self.threshold - tol,
            ConstraintKind::Eq => (aggregate - self.threshold).abs() <= tol,
        }
    }
}

/// A constrained concavification problem: states, prior, objective and an
/// ordered constraint list with every `Ge` constraint before every `Eq`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProblemSpec {
    states: Vec<String>,
    prior: Belief,
    objective: FunctionSpec,
    constraints: Vec<ConstraintSpec>,
}

impl ProblemSpec {
    pub fn new(
        states: Vec<String>,
        prior: Belief,
        objective: FunctionSpec,
        constraints: Vec<ConstraintSpec>,
    ) -> Result<Self> {
        let n = states.len();
        if n < 2 {
            return Err(Error::InvalidProblem(format!("need at least 2 states, found {n}")));
        }
        if prior.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: prior.len() });
        }
        objective.validate(n, true)?;
        let mut seen_eq = false;
        for (l, c) in constraints.iter().enumerate() {
            c.function
                .validate(n, false)
                .map_err(|e| Error::InvalidProblem(format!("constraint {l}: {e}")))?;
            if !c.threshold.is_finite() {
                return Err(Error::InvalidProblem(format!("constraint {l}: non-finite threshold")));
            }
            match c.kind {
                ConstraintKind::Eq => seen_eq = true,
                ConstraintKind::Ge if seen_eq => {
                    return Err(Error::InvalidProblem(format!(
                        "constraint {l}: inequality constraints must precede equality constraints"
                    )))
                }
                ConstraintKind::Ge => {}
            }
        }
        Ok(ProblemSpec { states, prior, objective, constraints })
    }

    /// States labelled `s0, s1, ...`.
    pub fn with_default_states(
        prior: Belief,
        objective: FunctionSpec,
        constraints: Vec<ConstraintSpec>,
    ) -> Result<Self> {
        let states = (0..prior.len()).map(|i| format!("s{i}")).collect();
        ProblemSpec::new(states, prior, objective, constraints)
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn prior(&self) -> &Belief {
        &self.prior
    }

    pub fn objective(&self) -> &FunctionSpec {
        &self.objective
    }

    pub fn constraints(&self) -> &[ConstraintSpec] {
        &self.constraints
    }

    /// N
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    /// K
    pub fn n_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// r, the number of inequality constraints.
    pub fn n_inequalities(&self) -> usize {
        self.constraints.iter().filter(|c| c.kind == ConstraintKind::Ge).count()
    }

    pub fn equality_indices(&self) -> Vec<usize> {
        (self.n_inequalities()..self.n_constraints()).collect()
    }

    pub fn thresholds(&self) -> Vec<f64> {
        self.constraints.iter().map(|c| c.threshold).collect()
    }

    pub fn with_prior(&self, prior: Belief) -> Result<Self> {
        if prior.len() != self.n_states() {
            return Err(Error::DimensionMismatch { expected: self.n_states(), found: prior.len() });
        }
        Ok(ProblemSpec { prior, ..self.clone() })
    }

    pub fn with_threshold(&self, index: usize, threshold: f64) -> Result<Self> {
        if index >= self.n_constraints() {
            return Err(Error::InvalidProblem(format!("no constraint with index {index}")));
        }
        if !threshold.is_finite() {
            return Err(Error::InvalidProblem("non-finite threshold".into()));
        }
        let mut out = self.clone();
        out.constraints[index].threshold = threshold;
        Ok(out)
    }

    pub fn with_thresholds(&self, thresholds: &[f64]) -> Result<Self> {
        if thresholds.len() != self.n_constraints() {
            return Err(Error::DimensionMismatch {
                expected: self.n_constraints(),
                found: thresholds.len(),
            });
        }
        let mut out = self.clone();
        for (c, &t) in out.constraints.iter_mut().zip(thresholds) {
            c.threshold = t;
        }
        Ok(out)
    }

    /// Drops all constraints, keeping states, prior and objective.
    pub fn unconstrained(&self) -> Self {
        ProblemSpec { constraints: Vec::new(), ..self.clone() }
    }
}

/// A candidate posterior with cached objective and constraint values.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Atom {
    pub belief: Belief,
    pub f_value: ExtReal,
    pub g_values: Vec<f64>,
}

impl Atom {
    /// Atoms with `f = -inf` never enter an LP.
    pub fn is_excluded(&self) -> bool {
        self.f_value.is_neg_inf()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub weight: f64,
    pub atom: usize,
}

/// A Bayes-plausible splitting of the prior over atoms of one [`AtomTable`].
///
/// Entries are sorted by atom index, carry strictly positive weights and
/// reference each atom at most once.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SplittingPlan {
    entries: Vec<PlanEntry>,
    value: f64,
}

impl SplittingPlan {
    /// Builds a plan from `(atom, weight)` pairs. Weights at or below the
    /// floor are dropped and repeated atoms merged. Fails on negative weights
    /// and on positive weight placed on an excluded atom.
    pub fn from_weights<I>(table: &AtomTable, weights: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        let mut merged: Vec<PlanEntry> = Vec::new();
        for (atom, weight) in weights {
            if atom >= table.len() {
                return Err(Error::AtomIndex { index: atom, len: table.len() });
            }
            if !weight.is_finite() || weight < -tol::WEIGHT_FLOOR {
                return Err(Error::InvalidProblem(format!(
                    "weight {weight} on atom {atom} is negative or non-finite"
                )));
            }
            merged.push(PlanEntry { weight, atom });
        }
        merged.sort_by_key(|e| e.atom);
        let mut entries: Vec<PlanEntry> = Vec::with_capacity(merged.len());
        for e in merged {
            match entries.last_mut() {
                Some(last) if last.atom == e.atom => last.weight += e.weight,
                _ => entries.push(e),
            }
        }
        entries.retain(|e| e.weight > tol::WEIGHT_FLOOR);

        let mut value = 0.0;
        for e in &entries {
            match table.atom(e.atom).f_value {
                ExtReal::Finite(f) => value += e.weight * f,
                ExtReal::NegInf => return Err(Error::ExcludedAtom(e.atom)),
            }
        }
        Ok(SplittingPlan { entries, value })
    }

    pub fn entries(&self) -> &[PlanEntry] {
        &self.entries
    }

    /// `sum_m weight_m f(belief_m)`
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn support_size(&self) -> usize {
        self.entries.len()
    }

    pub fn total_weight(&self) -> f64 {
        self.entries.iter().map(|e| e.weight).sum()
    }

    pub fn atom_indices(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.atom).collect()
    }

    /// `sum_m weight_m belief_m`
    pub fn barycenter(&self, table: &AtomTable) -> Vec<f64> {
        let mut out = vec![0.0; table.n_states()];
        for e in &self.entries {
            for (o, p) in out.iter_mut().zip(table.atom(e.atom).belief.probs()) {
                *o += e.weight * p;
            }
        }
        out
    }

    /// `sum_m weight_m g_l(belief_m)`
    pub fn aggregate(&self, table: &AtomTable, constraint: usize) -> f64 {
        self.entries
            .iter()
            .map(|e| e.weight * table.atom(e.atom).g_values[constraint])
            .sum()
    }

    pub fn aggregates(&self, table: &AtomTable) -> Vec<f64> {
        (0..table.n_constraints()).map(|l| self.aggregate(table, l)).collect()
    }
}

/// A splitting plan paired with per-atom threshold shares.
///
/// `gamma_shares[i][l]` is the share of constraint `l` assigned to the `i`-th
/// plan entry; `gamma_bar[l]` is the plan's aggregate of constraint `l`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LiftedPlan {
    pub base: SplittingPlan,
    pub gamma_shares: Vec<Vec<f64>>,
    pub gamma_bar: Vec<f64>,
}

impl LiftedPlan {
    /// `sum_m weight_m share_{l,m}` for every constraint.
    pub fn share_totals(&self) -> Vec<f64> {
        let k = self.gamma_bar.len();
        let mut out = vec![0.0; k];
        for (e, shares) in self.base.entries().iter().zip(&self.gamma_shares) {
            for (o, s) in out.iter_mut().zip(shares) {
                *o += e.weight * s;
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
}

/// Range of `sum_m weight_m g_l(belief_m)` over Bayes-plausible weightings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThresholdRange {
    pub min: f64,
    pub max: f64,
}

impl ThresholdRange {
    /// Whether a threshold of this kind lies within reach, to within `tol`.
    pub fn admits(&self, kind: ConstraintKind, threshold: f64, tol: f64) -> bool {
        match kind {
            ConstraintKind::Ge => threshold <= self.max + tol,
            ConstraintKind::Eq => threshold >= self.min - tol && threshold <= self.max + tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstraintDiagnostic {
    pub index: usize,
    pub kind: ConstraintKind,
    pub threshold: f64,
    /// Present when a plan exists.
    pub aggregate: Option<f64>,
    /// `aggregate - threshold`
    pub slack: Option<f64>,
    /// Present for infeasible solves.
    pub achievable: Option<ThresholdRange>,
    /// The threshold lies outside the achievable range on its own.
    pub out_of_range: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub value: ExtReal,
    pub plan: Option<SplittingPlan>,
    pub support_size: usize,
    /// Inequality constraints that bind at the plan.
    pub binding: Vec<usize>,
    pub diagnostics: Vec<ConstraintDiagnostic>,
}

impl SolveReport {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}
