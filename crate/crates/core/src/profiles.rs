//! Profile measures, k-profiles over function partitions, and the truncated
//! P-variables metric.

use rayon::prelude::*;
use serde::Serialize;

use crate::budget;
use crate::error::{invalid, Error, Result};
use crate::measures::{euclid, hausdorff_by, lp_measures, DiscreteMeasure, MeasureSet};
use crate::partition::{count_labeled, FunctionPartition, TestVector};
use crate::pvariable::{common_refinement, coupling_bound, StepPVariable};
use crate::seed;
use crate::strategy::{multi_start, Bounds, Strategy};

/// Enumerations of the other side smaller than this are used for exact
/// one-sided terms in sampled modes.
pub const INNER_EXACT: f64 = 4096.0;
/// Default order cutoff.
pub const DEFAULT_K_MAX: usize = 4;

const TAG_PROFILE: u32 = 0x100;
const TAG_DM_U: u32 = 0x200;
const TAG_DM_W: u32 = 0x300;
const TAG_SYMMETRY: u32 = 0x400;

fn profile_from(w: &StepPVariable, k: usize, value: impl Fn(usize, usize) -> f64) -> DiscreteMeasure {
    let n = w.n();
    let dim = 2 * k + 1;
    let scale = 1.0 / (n * n) as f64;
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    let mut prefix = vec![0.0; 2 * k];
    for i in 0..n {
        for j in 0..n {
            for f in 0..k {
                prefix[2 * f] = value(f, i);
                prefix[2 * f + 1] = value(f, j);
            }
            let cell = w.cell(i, j);
            for (z, m) in cell.coords().iter().zip(cell.weights()) {
                coords.extend_from_slice(&prefix);
                coords.push(*z);
                weights.push(m * scale);
            }
        }
    }
    DiscreteMeasure::canonical(dim, coords, weights)
}

/// Joint law of `(f_1(x), f_1(y), …, f_k(x), f_k(y), W(x, y, ·))`.
pub fn profile_measure(w: &StepPVariable, t: &TestVector) -> Result<DiscreteMeasure> {
    if t.n() != w.n() {
        return Err(Error::GroundMismatch {
            left: w.n(),
            right: t.n(),
        });
    }
    Ok(profile_from(w, t.k(), |f, x| t.value(f, x)))
}

/// Profile measure of the indicator functions of `p`.
pub fn partition_profile(w: &StepPVariable, p: &FunctionPartition) -> DiscreteMeasure {
    assert_eq!(p.n(), w.n(), "partition_profile: ground size mismatch");
    profile_from(w, p.k(), |f, x| if p.cell_of(x) == f { 1.0 } else { 0.0 })
}

/// A finite set of profile measures and the partitions that produced them.
#[derive(Clone, Debug)]
pub struct ProfileSet {
    pub k: usize,
    pub measures: MeasureSet,
    pub provenance: Vec<FunctionPartition>,
}

impl ProfileSet {
    fn from_pairs(k: usize, mut pairs: Vec<(DiscreteMeasure, FunctionPartition)>) -> Result<Self> {
        // Stable sort keeps the first generator of every distinct measure.
        pairs.sort_by(|a, b| a.0.canonical_cmp(&b.0));
        pairs.dedup_by(|b, a| a.0 == b.0);
        let (members, provenance) = pairs.into_iter().unzip();
        Ok(Self {
            k,
            measures: MeasureSet::new(members)?,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.measures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measures.is_empty()
    }

    pub fn members(&self) -> &[DiscreteMeasure] {
        self.measures.members()
    }
}

pub(crate) fn exhaustive_partitions(n: usize, k: usize) -> Result<Vec<FunctionPartition>> {
    let count = count_labeled(n, k);
    budget::check("labeled partitions", count, budget::PARTITIONS)?;
    Ok((0..count as u64)
        .into_par_iter()
        .map(|i| FunctionPartition::from_index(n, k, i))
        .collect())
}

pub(crate) fn random_partitions(n: usize, k: usize, samples: usize, seed: u64, tag: u32) -> Vec<FunctionPartition> {
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::stream(seed, seed::stream_id(tag, i as u64));
            FunctionPartition::random(n, k, &mut rng)
        })
        .collect()
}

pub(crate) fn local_partitions(
    n: usize,
    k: usize,
    restarts: usize,
    seed: u64,
    tag: u32,
    objective: &(dyn Fn(&FunctionPartition) -> f64 + Sync),
) -> Vec<FunctionPartition> {
    (0..restarts)
        .map(|r| multi_start(n, k, 1, seed, tag.wrapping_add((r as u32) << 20), objective).0)
        .collect()
}

fn profile_set_of(w: &StepPVariable, k: usize, parts: Vec<FunctionPartition>) -> Result<ProfileSet> {
    let pairs = parts.into_par_iter().map(|p| (partition_profile(w, &p), p)).collect();
    ProfileSet::from_pairs(k, pairs)
}

/// The k-profile over function partitions, explored by `strategy`.
///
/// Local search maximizes the distance of the profile from the one-class
/// profile; use [`kprofile_with`] for another objective.
pub fn kprofile(w: &StepPVariable, k: usize, strategy: &Strategy) -> Result<ProfileSet> {
    let k = k.max(1);
    let base = partition_profile(w, &FunctionPartition::new(k, vec![0; w.n()])?);
    let diversity = move |p: &FunctionPartition| lp_measures(&partition_profile(w, p), &base);
    kprofile_with(w, k, strategy, &diversity)
}

/// [`kprofile`] with a caller-supplied objective for local search (maximized).
pub fn kprofile_with(
    w: &StepPVariable,
    k: usize,
    strategy: &Strategy,
    objective: &(dyn Fn(&FunctionPartition) -> f64 + Sync),
) -> Result<ProfileSet> {
    if k == 0 {
        return Err(invalid("profile order must be at least 1"));
    }
    let n = w.n();
    let parts = match *strategy {
        Strategy::Exhaustive => exhaustive_partitions(n, k)?,
        Strategy::Random { samples, seed } => random_partitions(n, k, samples, seed, TAG_PROFILE + k as u32),
        Strategy::Local { restarts, seed } => local_partitions(n, k, restarts, seed, TAG_PROFILE + k as u32, objective),
    };
    profile_set_of(w, k, parts)
}

/// Interval for the truncated P-variables metric.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DmEstimate {
    pub lower: f64,
    pub upper: f64,
    /// Bound on the omitted tail `Σ_{k > k_max} 2^{-k} d_H`.
    pub truncation_bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<f64>,
    /// Per-order Hausdorff bounds, `terms[k - 1]`.
    pub terms: Vec<Bounds>,
}

/// Permutation of `u`'s ground onto `w`'s with a small coupling bound.
///
/// Candidates are the identity and the alignment of sorted contraction row
/// means; the better one is refined by first-improvement transpositions.
pub fn best_coupling(u: &StepPVariable, w: &StepPVariable) -> Result<(Vec<usize>, f64)> {
    let n = u.n();
    let ident: Vec<usize> = (0..n).collect();
    let sorted = |v: &StepPVariable| {
        let c = v.contraction();
        let means: Vec<f64> = (0..n).map(|i| (0..n).map(|j| c.get(i, j)).sum::<f64>()).collect();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| means[a].total_cmp(&means[b]).then(a.cmp(&b)));
        idx
    };
    let (su, sw) = (sorted(u), sorted(w));
    let mut aligned = vec![0; n];
    for r in 0..n {
        aligned[su[r]] = sw[r];
    }
    let mut best = (ident.clone(), coupling_bound(u, w, Some(&ident), None)?);
    let b = coupling_bound(u, w, Some(&aligned), None)?;
    if b < best.1 {
        best = (aligned, b);
    }
    let mut evals = 0usize;
    let max_evals = (n * n).min(256);
    'outer: loop {
        let mut improved = false;
        for a in 0..n {
            for c in a + 1..n {
                if evals >= max_evals || best.1 == 0.0 {
                    break 'outer;
                }
                let mut cand = best.0.clone();
                cand.swap(a, c);
                let v = coupling_bound(u, w, Some(&cand), None)?;
                evals += 1;
                if v < best.1 {
                    best = (cand, v);
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    Ok(best)
}

/// Partition of `w`'s ground matching `p` on `u`'s ground through `sigma`.
pub(crate) fn transport(p: &FunctionPartition, sigma: &[usize]) -> FunctionPartition {
    let mut assign = vec![0; sigma.len()];
    for (x, &sx) in sigma.iter().enumerate() {
        assign[sx] = p.cell_of(x);
    }
    FunctionPartition::new(p.k(), assign).expect("labels are inherited")
}

pub(crate) fn inverse(sigma: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; sigma.len()];
    for (x, &sx) in sigma.iter().enumerate() {
        inv[sx] = x;
    }
    inv
}

/// Directed `sup_a inf_b` over explicit sets.
pub(crate) fn directed(a: &[DiscreteMeasure], b: &[DiscreteMeasure]) -> f64 {
    a.par_iter()
        .map(|x| b.iter().map(|y| lp_measures(x, y)).fold(f64::INFINITY, f64::min))
        .reduce(|| 0.0, f64::max)
}

/// Bounds on `Σ_{k=1}^{k_max} 2^{-k} d_H(S'_k(u), S'_k(w))`.
///
/// Different ground sizes are first blown up to a common one. Exhaustive
/// mode is exact. Sampled modes return certified bounds: the lower bound
/// uses the global laws and exact one-sided terms where the other side is
/// small enough to enumerate, the upper bound couples both variables cell by
/// cell through a ground permutation. The point estimate combines sampled
/// Hausdorff terms with best responses and is not certified.
pub fn dm_estimate(u: &StepPVariable, w: &StepPVariable, k_max: usize, strategy: &Strategy) -> Result<DmEstimate> {
    if k_max == 0 {
        return Err(invalid("k_max must be at least 1"));
    }
    let (u, w) = common_refinement(u, w)?;
    let n = u.n();
    let mut terms = Vec::with_capacity(k_max);
    if strategy.is_exhaustive() {
        for k in 1..=k_max {
            let a = kprofile(&u, k, strategy)?;
            let b = kprofile(&w, k, strategy)?;
            terms.push(Bounds::exact(hausdorff_by(a.members(), b.members(), lp_measures)));
        }
    } else {
        let global = lp_measures(&u.global_law(), &w.global_law());
        let (sigma, coupled) = best_coupling(&u, &w)?;
        let sigma_inv = inverse(&sigma);
        for k in 1..=k_max {
            let seed = strategy.seed();
            let (pu, pw) = match *strategy {
                Strategy::Random { samples, .. } => (
                    random_partitions(n, k, samples, seed, TAG_DM_U + k as u32),
                    random_partitions(n, k, samples, seed, TAG_DM_W + k as u32),
                ),
                Strategy::Local { restarts, .. } => {
                    let obj_u = |p: &FunctionPartition| {
                        lp_measures(&partition_profile(&u, p), &partition_profile(&w, &transport(p, &sigma)))
                    };
                    let obj_w = |p: &FunctionPartition| {
                        lp_measures(
                            &partition_profile(&w, p),
                            &partition_profile(&u, &transport(p, &sigma_inv)),
                        )
                    };
                    (
                        local_partitions(n, k, restarts, seed, TAG_DM_U + k as u32, &obj_u),
                        local_partitions(n, k, restarts, seed, TAG_DM_W + k as u32, &obj_w),
                    )
                }
                Strategy::Exhaustive => unreachable!(),
            };
            // Best responses through the coupling permutation.
            let resp_w: Vec<FunctionPartition> = pu.iter().map(|p| transport(p, &sigma)).collect();
            let resp_u: Vec<FunctionPartition> = pw.iter().map(|p| transport(p, &sigma_inv)).collect();
            let a = profile_set_of(&u, k, pu.into_iter().chain(resp_u).collect())?;
            let b = profile_set_of(&w, k, pw.into_iter().chain(resp_w).collect())?;
            let estimate = hausdorff_by(a.members(), b.members(), lp_measures);

            let mut lower = global;
            if count_labeled(n, k) <= INNER_EXACT {
                let full_u = kprofile(&u, k, &Strategy::Exhaustive)?;
                let full_w = kprofile(&w, k, &Strategy::Exhaustive)?;
                lower = lower
                    .max(directed(a.members(), full_w.members()))
                    .max(directed(b.members(), full_u.members()));
            }
            terms.push(Bounds::new(lower, coupled.min(1.0), Some(estimate)));
        }
    }
    let weight = |k: usize| 0.5f64.powi(k as i32);
    let sum = |f: &dyn Fn(&Bounds) -> f64| -> f64 { terms.iter().enumerate().map(|(i, t)| weight(i + 1) * f(t)).sum() };
    let lower = sum(&|t| t.lower);
    let upper = sum(&|t| t.upper);
    let estimate = sum(&|t| t.estimate.unwrap_or(t.lower));
    Ok(DmEstimate {
        lower,
        upper,
        truncation_bound: weight(k_max),
        estimate: Some(estimate.clamp(lower, upper)),
        terms,
    })
}

/// `k^3 + 3k^2 + 5k + 1`.
pub fn rounding_constant(k: usize) -> f64 {
    let k = k as f64;
    k * k * k + 3.0 * k * k + 5.0 * k + 1.0
}

/// Lévy-Prokhorov distance from the law of `t` to the laws concentrated on
/// the unit vectors `e_1, …, e_k`.
pub fn distance_to_partition_laws(t: &TestVector) -> f64 {
    let (n, k) = (t.n(), t.k());
    let mut dists: Vec<f64> = (0..n)
        .map(|x| {
            let v: Vec<f64> = (0..k).map(|f| t.value(f, x)).collect();
            (0..k)
                .map(|i| {
                    let e: Vec<f64> = (0..k).map(|f| if f == i { 1.0 } else { 0.0 }).collect();
                    euclid(&v, &e)
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    dists.sort_by(f64::total_cmp);
    // Mass strictly farther than eps must be at most eps.
    let far = |eps: f64| dists.iter().filter(|&&d| d > eps).count() as f64 / n as f64;
    let mut candidates: Vec<f64> = dists.clone();
    candidates.extend((0..=n).map(|j| j as f64 / n as f64));
    candidates.push(0.0);
    candidates.sort_by(f64::total_cmp);
    candidates
        .into_iter()
        .find(|&eps| far(eps) <= eps + 1e-12)
        .unwrap_or(1.0)
}

/// Rounds an almost-partition of unity to a function partition.
///
/// Cell `i` collects the points where `f_i > 1 − delta`; points claimed by
/// no cell or by several go to cell 0. When the law of `t` is within `delta`
/// of a partition law, `‖f_i − 1_{P_i}‖_p ≤ rounding_constant(k) · delta`
/// for `p ∈ {1, 2}`.
pub fn round_to_partition(t: &TestVector, delta: f64) -> Result<FunctionPartition> {
    if !(delta > 0.0) {
        return Err(invalid("delta must be positive"));
    }
    let measured = distance_to_partition_laws(t);
    if measured > delta + 1e-12 {
        return Err(Error::RoundingPrecondition { measured, delta });
    }
    let assign = (0..t.n())
        .map(|x| {
            let hot: Vec<usize> = (0..t.k()).filter(|&f| t.value(f, x) > 1.0 - delta).collect();
            if hot.len() == 1 {
                hot[0]
            } else {
                0
            }
        })
        .collect();
    FunctionPartition::new(t.k(), assign)
}

/// `‖f_i − 1_{P_i}‖_p` on the uniform ground, per function.
pub fn rounding_errors(t: &TestVector, p: &FunctionPartition, power: f64) -> Vec<f64> {
    let n = t.n() as f64;
    (0..t.k())
        .map(|f| {
            let s: f64 = (0..t.n())
                .map(|x| {
                    let ind = if p.cell_of(x) == f { 1.0 } else { 0.0 };
                    (t.value(f, x) - ind).abs().powf(power)
                })
                .sum();
            (s / n).powf(1.0 / power)
        })
        .collect()
}

/// `⌈levels · f⌉ / levels`, entrywise.
pub fn quantize_function(f: &[f64], levels: usize) -> Result<Vec<f64>> {
    if levels == 0 {
        return Err(invalid("levels must be positive"));
    }
    let m = levels as f64;
    Ok(f.iter()
        .map(|&x| {
            let scaled = x * m;
            let r = scaled.round();
            let up = if (scaled - r).abs() < 1e-9 { r } else { scaled.ceil() };
            up / m
        })
        .collect())
}

/// {0,1}-valued test vector whose function `i` reads bit `i` of the label.
fn bits_vector(p: &FunctionPartition, k: usize) -> TestVector {
    let funcs = (0..k)
        .map(|f| p.assign().iter().map(|&c| ((c >> f) & 1) as f64).collect())
        .collect();
    TestVector::new(funcs).expect("bit vectors are well formed")
}

/// Largest distance between a profile measure and its coordinate-swapped
/// counterpart over explored {0,1}-valued test vectors.
pub fn symmetry_defect(w: &StepPVariable, k: usize, strategy: &Strategy) -> Result<f64> {
    if k == 0 || k > 16 {
        return Err(invalid("symmetry order must be between 1 and 16"));
    }
    let n = w.n();
    let wt = w.transpose();
    let labels = 1usize << k;
    let defect = |p: &FunctionPartition| {
        let t = bits_vector(p, k);
        let a = profile_from(w, k, |f, x| t.value(f, x));
        let b = profile_from(&wt, k, |f, x| t.value(f, x));
        lp_measures(&a, &b)
    };
    let parts = match *strategy {
        Strategy::Exhaustive => exhaustive_partitions(n, labels)?,
        Strategy::Random { samples, seed } => random_partitions(n, labels, samples, seed, TAG_SYMMETRY),
        Strategy::Local { restarts, seed } => local_partitions(n, labels, restarts, seed, TAG_SYMMETRY, &defect),
    };
    Ok(parts.par_iter().map(defect).reduce(|| 0.0, f64::max))
}
