//! Quotient graphs of step P-variables and distances between quotient sets.

use std::cmp::Ordering;

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::budget;
use crate::error::{invalid, Error, Result};
use crate::graphon::block_of;
use crate::measures::{lp_measures, DiscreteMeasure};
use crate::partition::{count_labeled, FunctionPartition};
use crate::profiles::{
    best_coupling, exhaustive_partitions, inverse, local_partitions, random_partitions, transport, INNER_EXACT,
};
use crate::pvariable::{average, common_refinement, coupling_profile, StepPVariable};
use crate::strategy::{Bounds, Strategy};

const ALPHA_TOL: f64 = 1e-12;
/// Largest order for which relabelings of quotients are enumerated.
pub const MAX_RELABEL_K: usize = 6;
/// Thresholds evaluated for the certified upper bound in sampled modes.
const PROFILE_POINTS: usize = 64;
const TAG_QUOTIENT_U: u32 = 0xa00;
const TAG_QUOTIENT_W: u32 = 0xb00;

/// Vertex-weighted graph with measure-valued edge decorations.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuotientGraph {
    k: usize,
    alpha: Vec<f64>,
    beta: Vec<Vec<DiscreteMeasure>>,
}

#[derive(Deserialize)]
struct QuotientRepr {
    k: usize,
    alpha: Vec<f64>,
    beta: Vec<Vec<DiscreteMeasure>>,
}

impl<'de> Deserialize<'de> for QuotientGraph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = QuotientRepr::deserialize(d)?;
        QuotientGraph::new(r.k, r.alpha, r.beta).map_err(serde::de::Error::custom)
    }
}

impl QuotientGraph {
    pub fn new(k: usize, alpha: Vec<f64>, beta: Vec<Vec<DiscreteMeasure>>) -> Result<Self> {
        if k == 0 {
            return Err(invalid("quotient must have at least one vertex"));
        }
        if alpha.len() != k {
            return Err(Error::LengthMismatch {
                left: k,
                right: alpha.len(),
            });
        }
        if alpha.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(invalid("vertex weights must be finite and nonnegative"));
        }
        let total: f64 = alpha.iter().sum();
        if (total - 1.0).abs() > ALPHA_TOL {
            return Err(invalid(format!("vertex weights sum to {total}, expected 1")));
        }
        if beta.len() != k || beta.iter().any(|r| r.len() != k) {
            return Err(Error::NotSquare);
        }
        for (i, row) in beta.iter().enumerate() {
            for (j, b) in row.iter().enumerate() {
                if b.dim() != 1 {
                    return Err(Error::DimensionMismatch {
                        left: 1,
                        right: b.dim(),
                    });
                }
                if alpha[i] > 0.0 && alpha[j] > 0.0 && !b.is_probability() {
                    return Err(Error::NotProbability { mass: b.mass() });
                }
            }
        }
        Ok(Self { k, alpha, beta })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self, i: usize, j: usize) -> &DiscreteMeasure {
        &self.beta[i][j]
    }

    /// `Σ_ij α_i α_j β_ij`.
    pub fn mixture(&self) -> DiscreteMeasure {
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        for i in 0..self.k {
            for j in 0..self.k {
                let b = &self.beta[i][j];
                let c = self.alpha[i] * self.alpha[j];
                coords.extend_from_slice(b.coords());
                weights.extend(b.weights().iter().map(|w| w * c));
            }
        }
        DiscreteMeasure::canonical(1, coords, weights)
    }

    /// Block masses `α_i α_j β_ij`, row-major.
    fn blocks(&self) -> Vec<DiscreteMeasure> {
        (0..self.k * self.k)
            .map(|ij| {
                let (i, j) = (ij / self.k, ij % self.k);
                self.beta[i][j].scaled(self.alpha[i] * self.alpha[j])
            })
            .collect()
    }
}

/// Quotient of `w` by the partition `p`; empty classes get zero decorations.
pub fn quotient(w: &StepPVariable, p: &FunctionPartition) -> Result<QuotientGraph> {
    let n = w.n();
    if p.n() != n {
        return Err(Error::GroundMismatch { left: n, right: p.n() });
    }
    let groups = p.cells();
    let k = groups.len();
    let alpha = groups.iter().map(|g| g.len() as f64 / n as f64).collect();
    let beta = groups
        .iter()
        .map(|gi| {
            groups
                .iter()
                .map(|gj| {
                    if gi.is_empty() || gj.is_empty() {
                        return DiscreteMeasure::zero(1);
                    }
                    let members: Vec<&DiscreteMeasure> =
                        gi.iter().flat_map(|&x| gj.iter().map(move |&y| w.cell(x, y))).collect();
                    average(&members)
                })
                .collect()
        })
        .collect();
    Ok(QuotientGraph { k, alpha, beta })
}

/// Quotient in the form compared by the d1 distance: weights and block masses.
#[derive(Clone, Debug, PartialEq)]
struct Weighted {
    alpha: Vec<f64>,
    blocks: Vec<DiscreteMeasure>,
}

impl Weighted {
    fn of(w: &StepPVariable, p: &FunctionPartition) -> Self {
        let n = w.n() as f64;
        let groups = p.cells();
        Self {
            alpha: groups.iter().map(|g| g.len() as f64 / n).collect(),
            blocks: groups
                .iter()
                .flat_map(|gi| groups.iter().map(move |gj| (gi, gj)))
                .map(|(gi, gj)| block_of(w, gi, gj))
                .collect(),
        }
    }

    fn relabeled(&self, pi: &[usize]) -> Self {
        let k = self.alpha.len();
        Self {
            alpha: pi.iter().map(|&i| self.alpha[i]).collect(),
            blocks: (0..k * k)
                .map(|ij| self.blocks[pi[ij / k] * k + pi[ij % k]].clone())
                .collect(),
        }
    }

    fn cmp(&self, other: &Self) -> Ordering {
        self.alpha
            .iter()
            .zip(&other.alpha)
            .map(|(a, b)| a.total_cmp(b))
            .chain(self.blocks.iter().zip(&other.blocks).map(|(a, b)| a.canonical_cmp(b)))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    }
}

fn d1(a: &Weighted, b: &Weighted) -> f64 {
    let weights: f64 = a.alpha.iter().zip(&b.alpha).map(|(x, y)| (x - y).abs()).sum();
    let blocks: f64 = a.blocks.iter().zip(&b.blocks).map(|(x, y)| lp_measures(x, y)).sum();
    weights + blocks
}

/// `Σ_i |α_i − α'_i| + Σ_ij d_LP(α_i α_j β_ij, α'_i α'_j β'_ij)`, with the
/// Lévy-Prokhorov distance taken between finite measures of possibly
/// different masses.
pub fn d1_distance(a: &QuotientGraph, b: &QuotientGraph) -> Result<f64> {
    if a.k != b.k {
        return Err(Error::LengthMismatch { left: a.k, right: b.k });
    }
    let wa = Weighted {
        alpha: a.alpha.clone(),
        blocks: a.blocks(),
    };
    let wb = Weighted {
        alpha: b.alpha.clone(),
        blocks: b.blocks(),
    };
    Ok(d1(&wa, &wb))
}

/// Hausdorff distances between quotient sets, with and without minimizing
/// over relabelings of the quotient vertices.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuotientDistance {
    pub k: usize,
    pub labeled: Bounds,
    /// Absent when `k` exceeds [`MAX_RELABEL_K`].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relabeled: Option<Bounds>,
}

fn distinct(mut qs: Vec<Weighted>) -> Vec<Weighted> {
    qs.sort_by(Weighted::cmp);
    qs.dedup_by(|a, b| a.cmp(b).is_eq());
    qs
}

fn quotients_of(w: &StepPVariable, parts: Vec<FunctionPartition>) -> Vec<Weighted> {
    distinct(parts.par_iter().map(|p| Weighted::of(w, p)).collect())
}

fn hausdorff(a: &[Weighted], b: &[Weighted], dist: &(dyn Fn(&Weighted, &Weighted) -> f64 + Sync)) -> f64 {
    let directed = |x: &[Weighted], y: &[Weighted], flip: bool| {
        x.par_iter()
            .map(|p| {
                y.iter()
                    .map(|q| if flip { dist(q, p) } else { dist(p, q) })
                    .fold(f64::INFINITY, f64::min)
            })
            .reduce(|| 0.0, f64::max)
    };
    directed(a, b, false).max(directed(b, a, true))
}

fn directed_inf(a: &[Weighted], b: &[Weighted], flip: bool) -> f64 {
    a.par_iter()
        .map(|p| {
            b.iter()
                .map(|q| if flip { d1(q, p) } else { d1(p, q) })
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max)
}

/// Certified bound `min(1, min_t (k² t + s(t)))` for quotients transported
/// through `sigma`, where `s(t)` is the cellwise coupling shortfall.
fn transported_upper(u: &StepPVariable, w: &StepPVariable, k: usize, sigma: &[usize]) -> Result<f64> {
    let kk = (k * k) as f64;
    let best = coupling_profile(u, w, Some(sigma), PROFILE_POINTS)?
        .into_iter()
        .map(|(t, s)| kk * t + s)
        .fold(f64::INFINITY, f64::min);
    Ok(best.min(1.0))
}

/// Hausdorff distance under d1 between the order-`k` quotient sets of `u`
/// and `w`.
///
/// Exhaustive mode is exact. Sampled modes bound the distance below by the
/// global laws and, when one side is small enough to enumerate, by exact
/// one-sided terms; the upper bound transports every partition through a
/// ground permutation. The estimate uses sampled sets plus transported
/// responses.
pub fn quotient_set_distance(
    u: &StepPVariable,
    w: &StepPVariable,
    k: usize,
    strategy: &Strategy,
) -> Result<QuotientDistance> {
    if k == 0 {
        return Err(invalid("quotient order must be at least 1"));
    }
    let (u, w) = common_refinement(u, w)?;
    let n = u.n();
    let perms: Vec<Vec<usize>> = if k <= MAX_RELABEL_K {
        (0..k).permutations(k).collect()
    } else {
        Vec::new()
    };
    let relabel_min = |a: &Weighted, b: &Weighted| {
        perms
            .iter()
            .map(|pi| d1(a, &b.relabeled(pi)))
            .fold(f64::INFINITY, f64::min)
    };

    if strategy.is_exhaustive() {
        let a = quotients_of(&u, exhaustive_partitions(n, k)?);
        let b = quotients_of(&w, exhaustive_partitions(n, k)?);
        let pairs = a.len() as f64 * b.len() as f64 * perms.len().max(1) as f64;
        budget::check("quotient comparisons", pairs, budget::QUOTIENT_PAIRS)?;
        let labeled = Bounds::exact(hausdorff(&a, &b, &d1));
        let relabeled = (!perms.is_empty()).then(|| Bounds::exact(hausdorff(&a, &b, &relabel_min)));
        return Ok(QuotientDistance { k, labeled, relabeled });
    }

    let (sigma, _) = best_coupling(&u, &w)?;
    let sigma_inv = inverse(&sigma);
    let seed = strategy.seed();
    let (pu, pw) = match *strategy {
        Strategy::Random { samples, .. } => (
            random_partitions(n, k, samples, seed, TAG_QUOTIENT_U + k as u32),
            random_partitions(n, k, samples, seed, TAG_QUOTIENT_W + k as u32),
        ),
        Strategy::Local { restarts, .. } => {
            let obj_u = |p: &FunctionPartition| d1(&Weighted::of(&u, p), &Weighted::of(&w, &transport(p, &sigma)));
            let obj_w = |p: &FunctionPartition| d1(&Weighted::of(&w, p), &Weighted::of(&u, &transport(p, &sigma_inv)));
            (
                local_partitions(n, k, restarts, seed, TAG_QUOTIENT_U + k as u32, &obj_u),
                local_partitions(n, k, restarts, seed, TAG_QUOTIENT_W + k as u32, &obj_w),
            )
        }
        Strategy::Exhaustive => unreachable!(),
    };
    let resp_w: Vec<FunctionPartition> = pu.iter().map(|p| transport(p, &sigma)).collect();
    let resp_u: Vec<FunctionPartition> = pw.iter().map(|p| transport(p, &sigma_inv)).collect();
    let a = quotients_of(&u, pu.into_iter().chain(resp_u).collect());
    let b = quotients_of(&w, pw.into_iter().chain(resp_w).collect());

    // Quotient sets are closed under relabeling, so exact one-sided terms
    // bound both variants.
    let mut lower = lp_measures(&u.global_law(), &w.global_law());
    if count_labeled(n, k) <= INNER_EXACT {
        let full_u = quotients_of(&u, exhaustive_partitions(n, k)?);
        let full_w = quotients_of(&w, exhaustive_partitions(n, k)?);
        lower = lower
            .max(directed_inf(&a, &full_w, false))
            .max(directed_inf(&b, &full_u, true));
    }
    let upper = transported_upper(&u, &w, k, &sigma)?;
    let labeled = Bounds::new(lower, upper, Some(hausdorff(&a, &b, &d1)));
    let relabeled = (!perms.is_empty()).then(|| Bounds::new(lower, upper, Some(hausdorff(&a, &b, &relabel_min))));
    Ok(QuotientDistance { k, labeled, relabeled })
}

/// Largest coordinate or weight gap between `Σ α_i α_j β_ij` and `law`;
/// infinite when the supports differ in size.
pub fn mass_identity_gap(q: &QuotientGraph, law: &DiscreteMeasure) -> f64 {
    let m = q.mixture();
    if m.len() != law.len() {
        return f64::INFINITY;
    }
    m.coords()
        .iter()
        .zip(law.coords())
        .chain(m.weights().iter().zip(law.weights()))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coin() -> DiscreteMeasure {
        DiscreteMeasure::from_pairs(&[(0.0, 0.5), (1.0, 0.5)]).unwrap()
    }

    fn swap() -> StepPVariable {
        StepPVariable::from_matrix(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    #[test]
    fn one_class_quotient_is_global_law() {
        let w = swap();
        let q = quotient(&w, &FunctionPartition::one_class(2)).unwrap();
        assert_eq!(q.alpha(), &[1.0]);
        assert_eq!(q.beta(0, 0), &w.global_law());
    }

    #[test]
    fn singleton_quotient_is_the_matrix() {
        let w = swap();
        let q = quotient(&w, &FunctionPartition::singletons(2)).unwrap();
        assert_eq!(q.alpha(), &[0.5, 0.5]);
        assert_eq!(q.beta(0, 1), &DiscreteMeasure::dirac(&[1.0]));
        assert_eq!(q.beta(1, 1), &DiscreteMeasure::dirac(&[0.0]));
    }

    #[test]
    fn empty_class_gives_zero_decoration() {
        let w = swap();
        let p = FunctionPartition::new(3, vec![0, 0]).unwrap();
        let q = quotient(&w, &p).unwrap();
        assert_eq!(q.alpha(), &[1.0, 0.0, 0.0]);
        assert_eq!(q.beta(1, 2).mass(), 0.0);
        assert!(mass_identity_gap(&q, &w.global_law()) <= 1e-12);
    }

    #[test]
    fn d1_examples() {
        let a = QuotientGraph::new(1, vec![1.0], vec![vec![DiscreteMeasure::dirac(&[0.0])]]).unwrap();
        let b = QuotientGraph::new(1, vec![1.0], vec![vec![DiscreteMeasure::dirac(&[1.0])]]).unwrap();
        assert_eq!(d1_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(d1_distance(&a, &b).unwrap(), 1.0);

        let beta = || vec![vec![DiscreteMeasure::dirac(&[0.0]); 2]; 2];
        let half = QuotientGraph::new(2, vec![0.5, 0.5], beta()).unwrap();
        let lop = QuotientGraph::new(2, vec![1.0, 0.0], beta()).unwrap();
        let d = d1_distance(&half, &lop).unwrap();
        assert!(d >= 1.0);
        assert!(d1_distance(&half, &a).is_err());
    }

    #[test]
    fn json_round_trip() {
        let q = quotient(&swap(), &FunctionPartition::singletons(2)).unwrap();
        let s = serde_json::to_string(&q).unwrap();
        let back: QuotientGraph = serde_json::from_str(&s).unwrap();
        assert_eq!(back, q);
        assert!(serde_json::from_str::<QuotientGraph>(
            r#"{"k":1,"alpha":[0.5],"beta":[[{"dim":1,"atoms":[[0]],"weights":[1]}]]}"#
        )
        .is_err());
    }

    #[test]
    fn constant_half_against_coin() {
        let u = StepPVariable::constant(1, DiscreteMeasure::dirac(&[0.5])).unwrap();
        let w = StepPVariable::constant(1, coin()).unwrap();
        let d = quotient_set_distance(&u, &w, 1, &Strategy::Exhaustive).unwrap();
        assert!((d.labeled.lower - 0.5).abs() <= 1e-12);
        assert!(d.labeled.is_exact());
    }

    #[test]
    fn relabel_invariance_exhaustive() {
        let w = StepPVariable::from_matrix(&[vec![0.0, 1.0, 0.3], vec![0.2, 0.0, 1.0], vec![1.0, 0.5, 0.0]]).unwrap();
        let v = w.relabel(&[2, 0, 1]).unwrap();
        for k in 1..=2 {
            let d = quotient_set_distance(&w, &v, k, &Strategy::Exhaustive).unwrap();
            assert_eq!((d.labeled.lower, d.labeled.upper), (0.0, 0.0));
            assert_eq!(d.relabeled.unwrap().upper, 0.0);
        }
    }

    #[test]
    fn sampled_brackets_exhaustive() {
        let u = StepPVariable::from_matrix(&[vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]]).unwrap();
        let w = StepPVariable::from_matrix(&[vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]]).unwrap();
        let x = StepPVariable::from_matrix(&[vec![1.0, 0.0, 1.0], vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 1.0]]).unwrap();
        for (a, b) in [(&u, &w), (&u, &x)] {
            let exact = quotient_set_distance(a, b, 2, &Strategy::Exhaustive)
                .unwrap()
                .labeled
                .lower;
            for s in [
                Strategy::Random { samples: 8, seed: 3 },
                Strategy::Local { restarts: 2, seed: 3 },
            ] {
                let d = quotient_set_distance(a, b, 2, &s).unwrap().labeled;
                assert!(d.lower <= exact + 1e-12, "{d:?} vs {exact}");
                assert!(d.upper >= exact - 1e-12, "{d:?} vs {exact}");
            }
        }
    }
}
