//! Enumeration budgets.
//!
//! Every exhaustive routine has a structural limit. The `GRAPHLIM_BUDGET`
//! environment variable lowers all of them to a common cap.

use std::sync::OnceLock;

use crate::error::{Error, Result};

pub const ENV_VAR: &str = "GRAPHLIM_BUDGET";

/// Default cap on labeled partitions (`k^n`) and similar enumerations.
pub const PARTITIONS: f64 = 2.0e6;
/// Default cap on vertex maps for homomorphism densities (`n^|V|`).
pub const HOM_MAPS: f64 = 1.0e8;
/// Largest ground size for exhaustive labeled cut semidistance.
pub const CUT_EXHAUSTIVE_N: usize = 14;
/// Largest ground size for exhaustive minimization over relabelings.
pub const UNLABELED_EXHAUSTIVE_N: usize = 8;
/// Largest ground size for `cut_norm` row enumeration.
pub const CUT_NORM_ROWS_N: usize = 22;
/// Largest ground size for the brute-force cut norm oracle.
pub const CUT_NORM_BRUTE_N: usize = 12;
/// Default cap on quotient comparisons for exhaustive quotient-set distances.
pub const QUOTIENT_PAIRS: f64 = 5.0e7;
/// Largest blow-up ground size accepted when comparing different `n`.
pub const BLOWUP_N: usize = 4096;

fn env_cap() -> Option<f64> {
    static CAP: OnceLock<Option<f64>> = OnceLock::new();
    *CAP.get_or_init(|| {
        std::env::var(ENV_VAR)
            .ok()
            .and_then(|s| s.trim().parse::<f64>().ok())
            .filter(|v| *v > 0.0)
    })
}

/// Effective limit: the structural limit, lowered by the environment cap.
pub fn limit(structural: f64) -> f64 {
    match env_cap() {
        Some(cap) => structural.min(cap),
        None => structural,
    }
}

pub fn check(what: &str, count: f64, structural: f64) -> Result<()> {
    let limit = limit(structural);
    if count > limit {
        return Err(Error::BudgetExceeded {
            what: what.to_string(),
            count,
            limit,
        });
    }
    Ok(())
}

/// `base^exp` as f64, saturating to infinity.
pub fn pow_count(base: usize, exp: usize) -> f64 {
    (base as f64).powi(exp.min(i32::MAX as usize) as i32)
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}
