//! Numerical tolerances shared by every module.

/// Feasibility tolerance for Bayes plausibility, weight normalization and
/// constraint thresholds.
pub const FEASIBILITY: f64 = 1e-9;

/// Weights at or below this floor are treated as zero and stripped from plans.
pub const WEIGHT_FLOOR: f64 = 1e-12;

/// Tolerance for classifying an inequality constraint as binding.
pub const BINDING: f64 = 1e-7;

/// Entries smaller than this in magnitude are ignored by the simplex ratio test.
pub const PIVOT: f64 = 1e-10;

/// Residual tolerance for certifying LP solutions.
pub const LP_RESIDUAL: f64 = 1e-8;

/// Agreement tolerance between two independently solved programs.
pub const EQUIVALENCE: f64 = 1e-7;

/// Beliefs are identified after rounding every coordinate to this many decimals.
pub const BELIEF_DECIMALS: i32 = 12;

/// Integer key of a coordinate rounded to [`BELIEF_DECIMALS`] digits.
pub(crate) fn round_key(x: f64) -> i64 {
    (x * 10f64.powi(BELIEF_DECIMALS)).round() as i64
}
