//! Finitely supported measures on `R^d`.
//!
//! [`DiscreteMeasure`] is kept in canonical form: zero-weight atoms dropped,
//! atoms sorted lexicographically, and atoms closer than [`MERGE_TOL`] in the
//! sup-norm merged. Contributions are summed in sorted order, so the same
//! multiset of `(atom, weight)` pairs always produces the same bits no matter
//! in which order it was supplied.
//!
//! The Lévy-Prokhorov distance is computed exactly through Strassen's
//! characterization: for measures of masses `m1`, `m2` and `m = max(m1, m2)`,
//! `lp(μ, ν) = min { ε : F(ε) ≥ m − ε }` where `F(ε)` is the largest mass that
//! can be coupled along pairs at Euclidean distance `≤ ε`. `F` is a step
//! function jumping only at pairwise atom distances, so a binary search over
//! the sorted distances and one max-flow per probe suffice.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::flow::bipartite_transport;

/// Atoms closer than this in the sup-norm are merged.
pub const MERGE_TOL: f64 = 1e-12;
/// Slack on total mass for a measure to count as a probability measure.
pub const PROB_TOL: f64 = 1e-9;
/// Tolerance used in feasibility comparisons of the flow condition.
pub const FEAS_TOL: f64 = 1e-12;
/// Largest combined support accepted by [`lp_distance_oracle`].
pub const ORACLE_MAX_ATOMS: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MeasureRepr {
    dim: usize,
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl Serialize for DiscreteMeasure {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MeasureRepr {
            dim: self.dim,
            atoms: self.atoms().map(<[f64]>::to_vec).collect(),
            weights: self.weights.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DiscreteMeasure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = MeasureRepr::deserialize(d)?;
        DiscreteMeasure::new(repr.dim, repr.atoms, repr.weights).map_err(serde::de::Error::custom)
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub(crate) fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl DiscreteMeasure {
    pub fn new(dim: usize, atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::LengthMismatch {
                left: atoms.len(),
                right: weights.len(),
            });
        }
        let mut flat = Vec::with_capacity(atoms.len() * dim);
        for a in &atoms {
            if a.len() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: a.len(),
                });
            }
            flat.extend_from_slice(a);
        }
        Self::from_flat(dim, flat, weights)
    }

    /// Builds from a flat coordinate buffer (`atoms.len() == dim * weights.len()`).
    pub fn from_flat(dim: usize, coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("measure dimension must be positive"));
        }
        if coords.len() != dim * weights.len() {
            return Err(Error::LengthMismatch {
                left: coords.len() / dim,
                right: weights.len(),
            });
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(invalid(format!("weights must be finite and nonnegative, got {w}")));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(invalid("atom coordinates must be finite"));
        }
        Ok(Self::canonical(dim, coords, weights))
    }

    /// Canonicalizes already-validated input.
    pub(crate) fn canonical(dim: usize, mut coords: Vec<f64>, weights: Vec<f64>) -> Self {
        for c in coords.iter_mut() {
            if *c == 0.0 {
                *c = 0.0;
            }
        }
        let mut order: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
        let atom = |i: usize| &coords[i * dim..(i + 1) * dim];
        order.sort_by(|&i, &j| lex_cmp(atom(i), atom(j)).then(weights[i].total_cmp(&weights[j])));

        let mut reps: Vec<usize> = Vec::new();
        let mut sums: Vec<f64> = Vec::new();
        for &i in &order {
            let a = atom(i);
            let mut target = None;
            for g in (0..reps.len()).rev() {
                let r = atom(reps[g]);
                if r[0] < a[0] - MERGE_TOL {
                    break;
                }
                if sup_dist(r, a) < MERGE_TOL {
                    target = Some(g);
                    break;
                }
            }
            match target {
                Some(g) => sums[g] += weights[i],
                None => {
                    reps.push(i);
                    sums.push(weights[i]);
                }
            }
        }
        let mut out = Vec::with_capacity(reps.len() * dim);
        for &r in &reps {
            out.extend_from_slice(atom(r));
        }
        Self {
            dim,
            coords: out,
            weights: sums,
        }
    }

    pub fn dirac(point: &[f64]) -> Self {
        Self::canonical(point.len().max(1), point.to_vec(), vec![1.0])
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim: dim.max(1),
            coords: Vec::new(),
            weights: Vec::new(),
        }
    }

    /// One-dimensional measure from `(value, weight)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        let (coords, weights) = pairs.iter().copied().unzip();
        Self::from_flat(1, coords, weights)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn atoms(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn is_probability(&self) -> bool {
        (self.mass() - 1.0).abs() <= PROB_TOL
    }

    /// `∫ f dμ`.
    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.atoms().zip(&self.weights).map(|(a, w)| w * f(a)).sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        let weights = self.weights.iter().map(|w| w * c).collect();
        Self::canonical(self.dim, self.coords.clone(), weights)
    }

    /// Mass of the atoms satisfying `pred`.
    pub fn mass_where(&self, pred: impl Fn(&[f64]) -> bool) -> f64 {
        self.atoms()
            .zip(&self.weights)
            .filter(|(a, _)| pred(a))
            .map(|(_, w)| w)
            .sum()
    }

    /// Total order used for canonical tie-breaking between measures.
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.dim
            .cmp(&other.dim)
            .then(self.len().cmp(&other.len()))
            .then_with(|| lex_cmp(&self.coords, &other.coords))
            .then_with(|| lex_cmp(&self.weights, &other.weights))
    }
}

/// Non-empty list of measures of a common dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureSet {
    members: Vec<DiscreteMeasure>,
}

impl MeasureSet {
    pub fn new(members: Vec<DiscreteMeasure>) -> Result<Self> {
        let first = members.first().ok_or(Error::EmptySupport)?;
        if let Some(m) = members.iter().find(|m| m.dim() != first.dim()) {
            return Err(Error::DimensionMismatch {
                left: first.dim(),
                right: m.dim(),
            });
        }
        Ok(Self { members })
    }

    pub fn dim(&self) -> usize {
        self.members[0].dim()
    }

    pub fn members(&self) -> &[DiscreteMeasure] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

fn check_same_dim(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<()> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            left: mu.dim(),
            right: nu.dim(),
        });
    }
    Ok(())
}

fn check_probability(mu: &DiscreteMeasure) -> Result<()> {
    if mu.is_empty() {
        return Err(Error::EmptySupport);
    }
    if !mu.is_probability() {
        return Err(Error::NotProbability { mass: mu.mass() });
    }
    Ok(())
}

/// Lévy-Prokhorov distance between two probability measures.
pub fn lp_distance(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    check_same_dim(mu, nu)?;
    check_probability(mu)?;
    check_probability(nu)?;
    Ok(lp_measures(mu, nu))
}

/// Lévy-Prokhorov distance between arbitrary finite measures of equal dimension.
///
/// Uses the two-sided condition verbatim, which for measures of masses
/// `m1 ≠ m2` forces `ε ≥ |m1 − m2|`. For equal masses `m` this is the
/// `F(ε) ≥ m − ε` extension of the probability case.
///
/// # Panics
/// Panics if the dimensions differ.
pub fn lp_measures(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    assert_eq!(mu.dim(), nu.dim(), "lp_measures: dimension mismatch");
    let (mu, nu) = match mu.canonical_cmp(nu) {
        Ordering::Greater => (nu, mu),
        _ => (mu, nu),
    };
    if mu == nu {
        return 0.0;
    }
    let m = mu.mass().max(nu.mass());
    if mu.is_empty() || nu.is_empty() {
        return m;
    }
    let (a, b) = (mu.len(), nu.len());
    let dist: Vec<f64> = (0..a)
        .flat_map(|i| (0..b).map(move |j| (i, j)))
        .map(|(i, j)| euclid(mu.atom(i), nu.atom(j)))
        .collect();
    let mut thresholds = dist.clone();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let gap = |t: usize| {
        let thr = thresholds[t];
        let f = bipartite_transport(mu.weights(), nu.weights(), |i, j| dist[i * b + j] <= thr);
        clean_gap(m - f)
    };
    min_eps_over_thresholds(&thresholds, m, gap)
}

pub(crate) fn clean_gap(g: f64) -> f64 {
    if g < FEAS_TOL {
        0.0
    } else {
        g
    }
}

/// Smallest `ε` with `gap(ε) ≤ ε`, where `gap` is a non-increasing step
/// function constant on `[thresholds[t], thresholds[t+1])` and equal to
/// `no_edge_gap` below `thresholds[0]`.
pub(crate) fn min_eps_over_thresholds(thresholds: &[f64], no_edge_gap: f64, gap: impl Fn(usize) -> f64) -> f64 {
    if thresholds.is_empty() {
        return no_edge_gap;
    }
    // First index where the segment start is already feasible.
    let (mut lo, mut hi) = (0usize, thresholds.len());
    let mut last_gap = None;
    while lo < hi {
        let mid = (lo + hi) / 2;
        let g = gap(mid);
        if g <= thresholds[mid] + FEAS_TOL {
            hi = mid;
        } else {
            last_gap = Some((mid, g));
            lo = mid + 1;
        }
    }
    let prev_gap = if lo == 0 {
        no_edge_gap
    } else {
        match last_gap {
            Some((idx, g)) if idx == lo - 1 => g,
            _ => gap(lo - 1),
        }
    };
    if lo == thresholds.len() {
        prev_gap
    } else {
        thresholds[lo].min(prev_gap)
    }
}

/// Largest mass of `mu` that can be coupled with `nu` at distance `≤ eps`.
pub fn coupled_mass_within(mu: &DiscreteMeasure, nu: &DiscreteMeasure, eps: f64) -> f64 {
    bipartite_transport(mu.weights(), nu.weights(), |i, j| euclid(mu.atom(i), nu.atom(j)) <= eps)
}

/// Brute-force Lévy-Prokhorov distance by subset enumeration.
///
/// Evaluates the defining condition `μ(U) ≤ ν(U^ε) + ε` and its mirror over
/// every subset `U` of the combined support, at every candidate `ε` in the
/// union of pairwise atom distances and the mass gaps those distances induce.
/// Shares no code with the flow-based [`lp_distance`].
pub fn lp_distance_oracle(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    check_same_dim(mu, nu)?;
    check_probability(mu)?;
    check_probability(nu)?;
    lp_oracle_measures(mu, nu)
}

/// [`lp_distance_oracle`] for arbitrary finite measures (same condition verbatim).
pub fn lp_oracle_measures(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    check_same_dim(mu, nu)?;
    // Union of supports with the mass each measure puts on every point.
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut mass_mu: Vec<f64> = Vec::new();
    let mut mass_nu: Vec<f64> = Vec::new();
    let mut add = |p: &[f64], w: f64, first: bool| {
        let idx = match points.iter().position(|q| q.as_slice() == p) {
            Some(i) => i,
            None => {
                points.push(p.to_vec());
                mass_mu.push(0.0);
                mass_nu.push(0.0);
                points.len() - 1
            }
        };
        if first {
            mass_mu[idx] += w;
        } else {
            mass_nu[idx] += w;
        }
    };
    for (p, &w) in mu.atoms().zip(mu.weights()) {
        add(p, w, true);
    }
    for (p, &w) in nu.atoms().zip(nu.weights()) {
        add(p, w, false);
    }
    let n = points.len();
    if n > ORACLE_MAX_ATOMS {
        return Err(Error::SupportTooLarge {
            atoms: n,
            limit: ORACLE_MAX_ATOMS,
        });
    }
    let full = 1usize << n;
    let subset_mass = |masses: &[f64]| {
        let mut out = vec![0.0; full];
        for s in 1..full {
            let low = s.trailing_zeros() as usize;
            out[s] = out[s & (s - 1)] + masses[low];
        }
        out
    };
    let mu_of = subset_mass(&mass_mu);
    let nu_of = subset_mass(&mass_nu);

    let mut dists = vec![0.0; n * n];
    let mut candidates = vec![0.0];
    for i in 0..n {
        for j in 0..n {
            dists[i * n + j] = euclid(&points[i], &points[j]);
            candidates.push(dists[i * n + j]);
        }
    }
    // Enlargement masks U ↦ U^ε and the worst violation at a given ε.
    let enlarge = |eps: f64| {
        let near: Vec<usize> = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| dists[i * n + j] <= eps)
                    .fold(0usize, |acc, j| acc | (1 << j))
            })
            .collect();
        let mut out = vec![0usize; full];
        for s in 1..full {
            let low = s.trailing_zeros() as usize;
            out[s] = out[s & (s - 1)] | near[low];
        }
        out
    };
    let worst_violation = |eps: f64| {
        let grown = enlarge(eps);
        (0..full)
            .map(|s| {
                let g = grown[s];
                (mu_of[s] - nu_of[g]).max(nu_of[s] - mu_of[g])
            })
            .fold(0.0, f64::max)
    };
    let distance_candidates = candidates.clone();
    for &d in &distance_candidates {
        candidates.push(worst_violation(d));
    }
    candidates.push(mu.mass().max(nu.mass()));
    candidates.retain(|c| *c >= 0.0);
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    for &eps in &candidates {
        if worst_violation(eps) <= eps + FEAS_TOL {
            return Ok(eps);
        }
    }
    unreachable!("the total mass is always a feasible epsilon")
}

/// Generic Hausdorff distance between finite sets under `dist`.
pub fn hausdorff_by<T: Sync>(a: &[T], b: &[T], dist: impl Fn(&T, &T) -> f64 + Sync) -> f64 {
    let directed = |x: &[T], y: &[T], flip: bool| {
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

/// Hausdorff distance between measure sets under the Lévy-Prokhorov metric.
pub fn hausdorff_distance(a: &MeasureSet, b: &MeasureSet) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(hausdorff_by(a.members(), b.members(), lp_measures))
}

/// Pushforward under the projection onto `coords` (in the given order).
pub fn marginal(mu: &DiscreteMeasure, coords: &[usize]) -> Result<DiscreteMeasure> {
    if coords.is_empty() {
        return Err(invalid("marginal needs at least one coordinate"));
    }
    for (k, &c) in coords.iter().enumerate() {
        if c >= mu.dim() {
            return Err(Error::IndexOutOfRange {
                index: c,
                dim: mu.dim(),
            });
        }
        if coords[..k].contains(&c) {
            return Err(invalid(format!("coordinate {c} repeated")));
        }
    }
    let mut flat = Vec::with_capacity(mu.len() * coords.len());
    for a in mu.atoms() {
        flat.extend(coords.iter().map(|&c| a[c]));
    }
    Ok(DiscreteMeasure::canonical(coords.len(), flat, mu.weights().to_vec()))
}

/// Axis-aligned closed box `[lo_i, hi_i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::LengthMismatch {
                left: lo.len(),
                right: hi.len(),
            });
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(x, (lo, hi))| lo <= x && x <= hi)
    }
}

/// Restriction of `mu` to a closed box. May return the zero measure.
pub fn restrict(mu: &DiscreteMeasure, region: &AxisBox) -> Result<DiscreteMeasure> {
    if region.lo.len() != mu.dim() {
        return Err(Error::DimensionMismatch {
            left: mu.dim(),
            right: region.lo.len(),
        });
    }
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    for (a, &w) in mu.atoms().zip(mu.weights()) {
        if region.contains(a) {
            coords.extend_from_slice(a);
            weights.push(w);
        }
    }
    Ok(DiscreteMeasure::canonical(mu.dim(), coords, weights))
}

/// `Σ c_i μ_i` with atoms merged.
pub fn scale_mix(measures: &[DiscreteMeasure], coefficients: &[f64]) -> Result<DiscreteMeasure> {
    if measures.len() != coefficients.len() {
        return Err(Error::LengthMismatch {
            left: measures.len(),
            right: coefficients.len(),
        });
    }
    let dim = measures
        .first()
        .ok_or_else(|| invalid("scale_mix of an empty list"))?
        .dim();
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    for (m, &c) in measures.iter().zip(coefficients) {
        if m.dim() != dim {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: m.dim(),
            });
        }
        if !(c.is_finite() && c >= 0.0) {
            return Err(invalid(format!(
                "mixture coefficient {c} must be finite and nonnegative"
            )));
        }
        coords.extend_from_slice(m.coords());
        weights.extend(m.weights().iter().map(|w| w * c));
    }
    Ok(DiscreteMeasure::canonical(dim, coords, weights))
}

/// `max_i ∫ |x_i| dμ`.
pub fn tau(mu: &DiscreteMeasure) -> f64 {
    (0..mu.dim()).map(|i| mu.integrate(|a| a[i].abs())).fold(0.0, f64::max)
}
