//! Block measures and cut distances of probability graphons.

use std::sync::atomic::{AtomicU64, Ordering};

use itertools::Itertools;
use rayon::prelude::*;

use crate::budget;
use crate::error::{Error, Result};
use crate::measures::{lp_measures, DiscreteMeasure};
use crate::partition::FunctionPartition;
use crate::pvariable::{common_refinement, coupling_bound, RealKernel, StepPVariable};
use crate::realgraphon::{align, cut_norm_upper, real_cut_lower};
use crate::seed;
use crate::strategy::{hill_climb, Bounds, CutMode, MOVES_PER_POINT};

/// Largest number of distinct values for the per-value cut bound.
const MAX_VALUES_FOR_SPLIT: usize = 16;
const TAG_CUT: u32 = 0x800;

fn check_subset(s: &[usize], n: usize) -> Result<()> {
    match s.iter().find(|&&x| x >= n) {
        Some(&index) => Err(Error::IndexOutOfRange { index, dim: n }),
        None => Ok(()),
    }
}

/// `(1/n²) Σ_{i∈s, j∈t} cell(i, j)`.
pub fn block_measure(w: &StepPVariable, s: &[usize], t: &[usize]) -> Result<DiscreteMeasure> {
    check_subset(s, w.n())?;
    check_subset(t, w.n())?;
    let s: Vec<usize> = s.iter().copied().sorted().dedup().collect();
    let t: Vec<usize> = t.iter().copied().sorted().dedup().collect();
    Ok(block_of(w, &s, &t))
}

pub(crate) fn block_of(w: &StepPVariable, s: &[usize], t: &[usize]) -> DiscreteMeasure {
    let scale = 1.0 / (w.n() * w.n()) as f64;
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    for &i in s {
        for &j in t {
            let c = w.cell(i, j);
            coords.extend_from_slice(c.coords());
            weights.extend(c.weights().iter().map(|m| m * scale));
        }
    }
    DiscreteMeasure::canonical(1, coords, weights)
}

fn members(mask: u64, n: usize) -> Vec<usize> {
    (0..n).filter(|&i| mask >> i & 1 == 1).collect()
}

/// Labeled cut semidistance by full subset enumeration. Stops early and
/// returns a value above `abort_above` once one is found.
fn labeled_exhaustive(u: &StepPVariable, w: &StepPVariable, abort_above: f64) -> f64 {
    let n = u.n();
    let best = AtomicU64::new(0f64.to_bits());
    (1..1u64 << n).into_par_iter().for_each(|sm| {
        let s = members(sm, n);
        for tm in 1..1u64 << n {
            if f64::from_bits(best.load(Ordering::Relaxed)) > abort_above {
                return;
            }
            let t = members(tm, n);
            let d = lp_measures(&block_of(u, &s, &t), &block_of(w, &s, &t));
            best.fetch_max_f64(d);
        }
    });
    f64::from_bits(best.load(Ordering::Relaxed))
}

trait AtomicF64Ext {
    fn fetch_max_f64(&self, v: f64);
    fn fetch_min_f64(&self, v: f64);
}

impl AtomicF64Ext for AtomicU64 {
    // Nonnegative floats order like their bit patterns.
    fn fetch_max_f64(&self, v: f64) {
        self.fetch_max(v.max(0.0).to_bits(), Ordering::Relaxed);
    }

    fn fetch_min_f64(&self, v: f64) {
        self.fetch_min(v.max(0.0).to_bits(), Ordering::Relaxed);
    }
}

/// `½ Σ_z ‖u(·,·;{z}) − w(·,·;{z})‖_□` over the distinct atom values `z`,
/// an upper bound on the labeled cut semidistance. `None` when there are
/// too many distinct values.
pub fn value_split_bound(u: &StepPVariable, w: &StepPVariable) -> Option<f64> {
    let mut values: Vec<f64> = u
        .cells()
        .iter()
        .chain(w.cells())
        .flat_map(|c| c.coords().iter().copied())
        .collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    if values.len() > MAX_VALUES_FOR_SPLIT {
        return None;
    }
    let n = u.n();
    let at = |c: &DiscreteMeasure, z: f64| {
        c.coords()
            .iter()
            .zip(c.weights())
            .filter(|(x, _)| **x == z)
            .map(|(_, m)| *m)
            .sum::<f64>()
    };
    let total: f64 = values
        .par_iter()
        .map(|&z| {
            let d: Vec<f64> = u
                .cells()
                .iter()
                .zip(w.cells())
                .map(|(a, b)| at(a, z) - at(b, z))
                .collect();
            cut_norm_upper(&RealKernel::from_flat(n, d))
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    Some(0.5 * total)
}

fn labeled_upper(u: &StepPVariable, w: &StepPVariable) -> Result<f64> {
    let coupled = coupling_bound(u, w, None, None)?;
    let split = value_split_bound(u, w).unwrap_or(f64::INFINITY);
    Ok(coupled.min(split).min(1.0))
}

/// Best `(S, T)` witness found by first-improvement hill climbing.
fn labeled_witness(u: &StepPVariable, w: &StepPVariable, restarts: usize, seed: u64) -> f64 {
    let n = u.n();
    let objective = |p: &FunctionPartition| {
        let s: Vec<usize> = (0..n).filter(|&i| p.cell_of(i) == 1).collect();
        let t: Vec<usize> = (0..n).filter(|&j| p.cell_of(n + j) == 1).collect();
        lp_measures(&block_of(u, &s, &t), &block_of(w, &s, &t))
    };
    (0..restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = seed::stream(seed, seed::stream_id(TAG_CUT, r as u64));
            let start = if r == 0 {
                FunctionPartition::new(2, vec![1; 2 * n]).expect("labels in range")
            } else {
                FunctionPartition::random(2 * n, 2, &mut rng)
            };
            hill_climb(start, MOVES_PER_POINT * n, &mut rng, &objective).1
        })
        .reduce(|| 0.0, f64::max)
}

/// `sup_{S,T} lp(u(S×T; ·), w(S×T; ·))` at the shared labeling.
///
/// Exhaustive mode enumerates all subset pairs. Heuristic mode returns a
/// hill-climbed witness (and the global-law distance) as the lower bound and
/// the best of the cell coupling bound and the per-value cut bound as the
/// upper bound. Variables of different sizes are first blown up to a common
/// ground size.
pub fn cut_semidistance(u: &StepPVariable, w: &StepPVariable, mode: &CutMode) -> Result<Bounds> {
    if u.n() != w.n() {
        let (u, w) = common_refinement(u, w)?;
        return cut_semidistance(&u, &w, mode);
    }
    match *mode {
        CutMode::Exhaustive => {
            budget::check("cut subsets ground size", u.n() as f64, budget::CUT_EXHAUSTIVE_N as f64)?;
            Ok(Bounds::exact(labeled_exhaustive(u, w, f64::INFINITY)))
        }
        CutMode::Heuristic { restarts, seed } => {
            let lower = labeled_witness(u, w, restarts, seed).max(lp_measures(&u.global_law(), &w.global_law()));
            Ok(Bounds::new(lower, labeled_upper(u, w)?, None))
        }
    }
}

fn max_abs_atom(w: &StepPVariable) -> f64 {
    w.cells()
        .iter()
        .flat_map(|c| c.coords())
        .map(|z| z.abs())
        .fold(0.0, f64::max)
}

/// Relabeling-invariant lower bound on the unlabeled cut distance.
///
/// Combines the global-law distance with the contraction row-sum statistic,
/// scaled by `1 + 2B` where `B` bounds every atom.
pub fn unlabeled_cut_lower(u: &StepPVariable, w: &StepPVariable) -> f64 {
    let global = lp_measures(&u.global_law(), &w.global_law());
    let b = max_abs_atom(u).max(max_abs_atom(w));
    let rows = real_cut_lower(&u.contraction(), &w.contraction()) / (1.0 + 2.0 * b);
    global.max(rows)
}

fn is_constant(w: &StepPVariable) -> bool {
    w.cells().iter().all(|c| c == &w.cells()[0])
}

/// `min_φ d_□(u, w^φ)` over ground relabelings, after blowing both up to a
/// common ground size.
///
/// Exhaustive mode is exact. Heuristic mode bounds the value from below by
/// relabeling-invariant statistics and from above by the labeled upper bound
/// at explicit relabelings (random starts refined by transpositions).
pub fn unlabeled_cut_distance(u: &StepPVariable, w: &StepPVariable, mode: &CutMode) -> Result<Bounds> {
    let (u, w) = common_refinement(u, w)?;
    let n = u.n();
    if is_constant(&u) || is_constant(&w) {
        // Every relabeling gives the same labeled distance.
        return cut_semidistance(&u, &w, mode);
    }
    match *mode {
        CutMode::Exhaustive => {
            budget::check("relabelings", n as f64, budget::UNLABELED_EXHAUSTIVE_N as f64)?;
            let floor = lp_measures(&u.global_law(), &w.global_law());
            let best = AtomicU64::new(f64::INFINITY.to_bits());
            (0..n).permutations(n).par_bridge().for_each(|p| {
                let current = f64::from_bits(best.load(Ordering::Relaxed));
                if current <= floor {
                    return;
                }
                let wp = w.relabel(&p).expect("valid permutation");
                let d = labeled_exhaustive(&u, &wp, current);
                best.fetch_min_f64(d);
            });
            Ok(Bounds::exact(f64::from_bits(best.load(Ordering::Relaxed))))
        }
        CutMode::Heuristic { restarts, seed } => {
            let lower = unlabeled_cut_lower(&u, &w);
            let candidates = align(&u.contraction(), &w.contraction(), restarts, seed);
            let upper = candidates
                .iter()
                .map(|p| labeled_upper(&u, &w.relabel(p)?))
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(1.0, f64::min);
            Ok(Bounds::new(lower, upper, None))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(a: &[Vec<f64>]) -> StepPVariable {
        StepPVariable::from_matrix(a).unwrap()
    }

    #[test]
    fn block_measure_examples() {
        assert_eq!(
            block_measure(&m(&[vec![1.0]]), &[0], &[0]).unwrap(),
            DiscreteMeasure::dirac(&[1.0])
        );
        let k2 = m(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let b = block_measure(&k2, &[0], &[1]).unwrap();
        assert_eq!(b, DiscreteMeasure::dirac(&[1.0]).scaled(0.25));
        assert_eq!(block_measure(&k2, &[], &[0, 1]).unwrap().mass(), 0.0);
        assert!(block_measure(&k2, &[2], &[0]).is_err());
    }

    #[test]
    fn cut_semidistance_examples() {
        let w = m(&[vec![0.0, 1.0, 0.3], vec![1.0, 0.0, 0.2], vec![0.7, 0.2, 0.0]]);
        assert_eq!(cut_semidistance(&w, &w, &CutMode::Exhaustive).unwrap().upper, 0.0);
        let d = cut_semidistance(&m(&[vec![0.0]]), &m(&[vec![1.0]]), &CutMode::Exhaustive).unwrap();
        assert_eq!(d.upper, 1.0);
        let v = m(&[vec![1.0, 1.0, 0.0], vec![0.0, 0.0, 0.2], vec![0.7, 0.0, 1.0]]);
        let exact = cut_semidistance(&w, &v, &CutMode::Exhaustive).unwrap().upper;
        assert!(exact >= lp_measures(&w.global_law(), &v.global_law()));
        let h = cut_semidistance(&w, &v, &CutMode::Heuristic { restarts: 4, seed: 2 }).unwrap();
        assert!(h.lower <= exact + 1e-12 && exact <= h.upper + 1e-12, "{h:?} vs {exact}");
        let zero = m(&[vec![0.0]]);
        assert_eq!(
            cut_semidistance(&w, &zero, &CutMode::Exhaustive).unwrap(),
            cut_semidistance(&w, &zero.blowup(3).unwrap(), &CutMode::Exhaustive).unwrap()
        );
        assert_eq!(cut_semidistance(&w.blowup(2).unwrap(), &w, &CutMode::Exhaustive).unwrap().upper, 0.0);
    }

    #[test]
    fn unlabeled_examples() {
        let w = m(&[vec![0.0, 1.0, 0.3], vec![1.0, 0.0, 0.2], vec![0.7, 0.2, 0.0]]);
        let r = w.relabel(&[1, 2, 0]).unwrap();
        assert_eq!(unlabeled_cut_distance(&w, &r, &CutMode::Exhaustive).unwrap().upper, 0.0);
        assert_eq!(
            unlabeled_cut_distance(&w, &w, &CutMode::Heuristic { restarts: 2, seed: 0 })
                .unwrap()
                .upper,
            0.0
        );
        let k2 = m(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let id = m(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        // Both relabelings give the same value: blocks {0}x{0} already differ by a full unit.
        let d = unlabeled_cut_distance(&k2, &id, &CutMode::Exhaustive).unwrap();
        assert_eq!(d.upper, 0.25);
        let labeled = cut_semidistance(&k2, &id, &CutMode::Exhaustive).unwrap();
        assert!(d.upper <= labeled.upper);
    }
}
