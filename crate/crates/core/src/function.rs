//! Objective and constraint functions on the belief simplex.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::model::Belief;
use crate::tol;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece {
    pub coeffs: Vec<f64>,
    #[serde(default)]
    pub offset: f64,
}

impl AffinePiece {
    pub fn new(coeffs: Vec<f64>, offset: f64) -> Self {
        AffinePiece { coeffs, offset }
    }

    fn eval(&self, probs: &[f64]) -> f64 {
        affine_value(&self.coeffs, self.offset, probs)
    }
}

fn affine_value(coeffs: &[f64], offset: f64, probs: &[f64]) -> f64 {
    offset + coeffs.iter().zip(probs).map(|(c, p)| c * p).sum::<f64>()
}

/// Explicit function values on a finite list of beliefs.
///
/// Lookups identify beliefs after rounding to 12 decimal digits, so a table
/// built on a grid can be queried with beliefs regenerated from the same grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "TableRepr", into = "TableRepr")]
pub struct TableFn {
    atoms: Vec<Vec<f64>>,
    values: Vec<ExtReal>,
    index: HashMap<Vec<i64>, usize>,
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    atoms: Vec<Vec<f64>>,
    values: Vec<ExtReal>,
}

impl TableFn {
    pub fn new(atoms: Vec<Vec<f64>>, values: Vec<ExtReal>) -> Result<Self> {
        if atoms.len() != values.len() {
            return Err(Error::InvalidProblem(format!(
                "table lists {} atoms but {} values",
                atoms.len(),
                values.len()
            )));
        }
        let mut index = HashMap::with_capacity(atoms.len());
        for (i, atom) in atoms.iter().enumerate() {
            if index.insert(belief_key(atom), i).is_some() {
                return Err(Error::DuplicateAtom(atom.clone()));
            }
        }
        Ok(TableFn { atoms, values, index })
    }

    /// Tabulates `f` on `beliefs`.
    pub fn sample<F>(beliefs: &[Belief], f: F) -> Result<Self>
    where
        F: Fn(&Belief) -> ExtReal,
    {
        let atoms = beliefs.iter().map(|b| b.probs().to_vec()).collect();
        let values = beliefs.iter().map(f).collect();
        TableFn::new(atoms, values)
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn values(&self) -> &[ExtReal] {
        &self.values
    }

    pub fn lookup(&self, probs: &[f64]) -> Option<ExtReal> {
        self.index.get(&belief_key(probs)).map(|&i| self.values[i])
    }
}

impl PartialEq for TableFn {
    fn eq(&self, other: &Self) -> bool {
        self.atoms == other.atoms && self.values == other.values
    }
}

impl TryFrom<TableRepr> for TableFn {
    type Error = Error;

    fn try_from(repr: TableRepr) -> Result<Self> {
        TableFn::new(repr.atoms, repr.values)
    }
}

impl From<TableFn> for TableRepr {
    fn from(t: TableFn) -> Self {
        TableRepr { atoms: t.atoms, values: t.values }
    }
}

pub(crate) fn belief_key(probs: &[f64]) -> Vec<i64> {
    probs.iter().map(|&p| tol::round_key(p)).collect()
}

/// The supported function forms. Coordinates are 0-based state indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FunctionSpec {
    Table(TableFn),
    Affine {
        coeffs: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    /// `hi` when `belief[coord] >= cutoff`, `lo` otherwise.
    IndicatorThreshold { coord: usize, cutoff: f64, hi: f64, lo: f64 },
    /// `scale` times the Shannon entropy in nats.
    Entropy {
        #[serde(default = "unit_scale")]
        scale: f64,
    },
    PwlMax { pieces: Vec<AffinePiece> },
    PwlMin { pieces: Vec<AffinePiece> },
}

fn unit_scale() -> f64 {
    1.0
}

impl FunctionSpec {
    pub fn affine(coeffs: Vec<f64>, offset: f64) -> Self {
        FunctionSpec::Affine { coeffs, offset }
    }

    pub fn indicator(coord: usize, cutoff: f64, hi: f64, lo: f64) -> Self {
        FunctionSpec::IndicatorThreshold { coord, cutoff, hi, lo }
    }

    pub fn entropy(scale: f64) -> Self {
        FunctionSpec::Entropy { scale }
    }

    pub fn is_table(&self) -> bool {
        matches!(self, FunctionSpec::Table(_))
    }

    /// Structural checks against the number of states. `allow_neg_inf` is
    /// false for constraint functions.
    pub fn validate(&self, n_states: usize, allow_neg_inf: bool) -> Result<()> {
        let check_len = |coeffs: &[f64]| {
            if coeffs.len() != n_states {
                Err(Error::DimensionMismatch { expected: n_states, found: coeffs.len() })
            } else if coeffs.iter().any(|c| !c.is_finite()) {
                Err(Error::InvalidProblem("non-finite affine coefficient".into()))
            } else {
                Ok(())
            }
        };
        match self {
            FunctionSpec::Table(t) => {
                for atom in t.atoms() {
                    if atom.len() != n_states {
                        return Err(Error::DimensionMismatch { expected: n_states, found: atom.len() });
                    }
                }
                if !allow_neg_inf && t.values().iter().any(|v| v.is_neg_inf()) {
                    return Err(Error::InvalidProblem(
                        "table values may be -inf only for the objective".into(),
                    ));
                }
            }
            FunctionSpec::Affine { coeffs, offset } => {
                check_len(coeffs)?;
                if !offset.is_finite() {
                    return Err(Error::InvalidProblem("non-finite affine offset".into()));
                }
            }
            FunctionSpec::IndicatorThreshold { coord, cutoff, hi, lo } => {
                if *coord >= n_states {
                    return Err(Error::InvalidProblem(format!(
                        "indicator coordinate {coord} out of range for {n_states} states"
                    )));
                }
                if !(cutoff.is_finite() && hi.is_finite() && lo.is_finite()) {
                    return Err(Error::InvalidProblem("non-finite indicator parameter".into()));
                }
            }
            FunctionSpec::Entropy { scale } => {
                if !scale.is_finite() {
                    return Err(Error::InvalidProblem("non-finite entropy scale".into()));
                }
            }
            FunctionSpec::PwlMax { pieces } | FunctionSpec::PwlMin { pieces } => {
                if pieces.is_empty() {
                    return Err(Error::InvalidProblem("piecewise-linear form needs a piece".into()));
                }
                for piece in pieces {
                    check_len(&piece.coeffs)?;
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, belief: &Belief) -> Result<ExtReal> {
        let p = belief.probs();
        let v = match self {
            FunctionSpec::Table(t) => {
                return t.lookup(p).ok_or_else(|| Error::TableLookup(p.to_vec()));
            }
            FunctionSpec::Affine { coeffs, offset } => {
                check_dim(coeffs.len(), p.len())?;
                affine_value(coeffs, *offset, p)
            }
            FunctionSpec::IndicatorThreshold { coord, cutoff, hi, lo } => {
                let x = *p.get(*coord).ok_or(Error::DimensionMismatch {
                    expected: coord + 1,
                    found: p.len(),
                })?;
                if x >= *cutoff {
                    *hi
                } else {
                    *lo
                }
            }
            FunctionSpec::Entropy { scale } => scale * shannon_entropy(p),
            FunctionSpec::PwlMax { pieces } => {
                pieces.iter().try_fold(f64::NEG_INFINITY, |acc, piece| {
                    check_dim(piece.coeffs.len(), p.len()).map(|_| acc.max(piece.eval(p)))
                })?
            }
            FunctionSpec::PwlMin { pieces } => {
                pieces.iter().try_fold(f64::INFINITY, |acc, piece| {
                    check_dim(piece.coeffs.len(), p.len()).map(|_| acc.min(piece.eval(p)))
                })?
            }
        };
        Ok(ExtReal::Finite(v))
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Shannon entropy in nats with `0 ln 0 = 0`.
pub fn shannon_entropy(probs: &[f64]) -> f64 {
    -probs.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>()
}
