//! Step P-variables on a uniform finite ground set.
//!
//! A [`StepPVariable`] stores one probability law on `R` per ground pair
//! `(i, j) ∈ [n]²`. Read as a measure-valued kernel it is a probability
//! graphon; read through the per-cell quantile functions on `[0, 1]` it is a
//! P-variable `[n] × [n] × [0, 1] → R`. Both views share the same cells.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::flow::bipartite_transport;
use crate::measures::{clean_gap, euclid, min_eps_over_thresholds, DiscreteMeasure, PROB_TOL};
use crate::partition::FunctionPartition;
use crate::seed;

#[derive(Clone, Debug, PartialEq)]
pub struct StepPVariable {
    n: usize,
    cells: Vec<DiscreteMeasure>,
}

#[derive(Serialize, Deserialize)]
struct KernelRepr {
    n: usize,
    cells: Vec<Vec<DiscreteMeasure>>,
}

impl Serialize for StepPVariable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        KernelRepr {
            n: self.n,
            cells: self.cells.chunks(self.n).map(<[_]>::to_vec).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for StepPVariable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = KernelRepr::deserialize(d)?;
        if repr.cells.len() != repr.n {
            return Err(serde::de::Error::custom(format!(
                "kernel declares n = {} but has {} rows",
                repr.n,
                repr.cells.len()
            )));
        }
        StepPVariable::quantile_from_kernel(repr.cells).map_err(serde::de::Error::custom)
    }
}

/// Block-constant real kernel on the uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct RealKernel {
    n: usize,
    values: Vec<f64>,
}

impl RealKernel {
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::NotSquare);
        }
        let values: Vec<f64> = rows.iter().flatten().copied().collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("kernel entries must be finite"));
        }
        Ok(Self { n, values })
    }

    pub fn from_flat(n: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), n * n);
        Self { n, values }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self {
            n,
            values: vec![c; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.values.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / (self.n * self.n) as f64
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::GroundMismatch {
                left: self.n,
                right: other.n,
            });
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Self { n: self.n, values })
    }

    pub fn neg(&self) -> Self {
        Self {
            n: self.n,
            values: self.values.iter().map(|v| -v).collect(),
        }
    }

    pub fn relabel(&self, p: &[usize]) -> Result<Self> {
        check_permutation(p, self.n)?;
        let n = self.n;
        let values = (0..n * n).map(|ij| self.get(p[ij / n], p[ij % n])).collect();
        Ok(Self { n, values })
    }

    pub fn blowup(&self, factor: usize) -> Self {
        let big = self.n * factor;
        let values = (0..big * big)
            .map(|ij| self.get(ij / big / factor, ij % big / factor))
            .collect();
        Self { n: big, values }
    }
}

/// Non-decreasing step function on `[0, 1]`: `levels[l]` on a piece of width `widths[l]`.
#[derive(Clone, Copy, Debug)]
pub struct QuantileView<'a> {
    cell: &'a DiscreteMeasure,
}

impl<'a> QuantileView<'a> {
    pub fn levels(&self) -> &'a [f64] {
        self.cell.coords()
    }

    pub fn widths(&self) -> &'a [f64] {
        self.cell.weights()
    }

    /// `inf { x : F(x) ≥ p }`, with `p ≤ 0` mapped to the lowest level.
    pub fn eval(&self, p: f64) -> f64 {
        let levels = self.levels();
        let mut acc = 0.0;
        for (l, w) in levels.iter().zip(self.widths()) {
            acc += w;
            if acc >= p {
                return *l;
            }
        }
        *levels.last().expect("quantile of an empty cell")
    }

    /// Law of the step function under Lebesgue measure.
    pub fn law(&self) -> DiscreteMeasure {
        DiscreteMeasure::from_flat(1, self.levels().to_vec(), self.widths().to_vec())
            .expect("levels and widths come from a valid cell")
    }
}

pub(crate) fn check_permutation(p: &[usize], n: usize) -> Result<()> {
    if p.len() != n {
        return Err(Error::NotPermutation { n });
    }
    let mut seen = vec![false; n];
    for &x in p {
        if x >= n || seen[x] {
            return Err(Error::NotPermutation { n });
        }
        seen[x] = true;
    }
    Ok(())
}

fn check_cell(m: &DiscreteMeasure) -> Result<()> {
    if m.dim() != 1 {
        return Err(Error::DimensionMismatch {
            left: 1,
            right: m.dim(),
        });
    }
    if m.is_empty() {
        return Err(Error::EmptySupport);
    }
    if (m.mass() - 1.0).abs() > PROB_TOL {
        return Err(Error::NotProbability { mass: m.mass() });
    }
    Ok(())
}

/// Average of measures; exact copy when they all coincide.
pub(crate) fn average(measures: &[&DiscreteMeasure]) -> DiscreteMeasure {
    let first = measures[0];
    if measures.iter().all(|m| *m == first) {
        return first.clone();
    }
    let scale = 1.0 / measures.len() as f64;
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    for m in measures {
        coords.extend_from_slice(m.coords());
        weights.extend(m.weights().iter().map(|w| w * scale));
    }
    DiscreteMeasure::canonical(first.dim(), coords, weights)
}

impl StepPVariable {
    /// Dirac cells `δ_{a[i][j]}`.
    pub fn from_matrix(a: &[Vec<f64>]) -> Result<Self> {
        let n = a.len();
        if n == 0 || a.iter().any(|r| r.len() != n) {
            return Err(Error::NotSquare);
        }
        if a.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("matrix entries must be finite"));
        }
        let cells = a.iter().flatten().map(|&v| DiscreteMeasure::dirac(&[v])).collect();
        Ok(Self { n, cells })
    }

    /// Cells given as a square array of probability laws on `R`.
    pub fn quantile_from_kernel(k: Vec<Vec<DiscreteMeasure>>) -> Result<Self> {
        let n = k.len();
        if n == 0 || k.iter().any(|r| r.len() != n) {
            return Err(Error::NotSquare);
        }
        let cells: Vec<DiscreteMeasure> = k.into_iter().flatten().collect();
        for c in &cells {
            check_cell(c)?;
        }
        Ok(Self { n, cells })
    }

    /// Every cell equal to `law`.
    pub fn constant(n: usize, law: DiscreteMeasure) -> Result<Self> {
        if n == 0 {
            return Err(invalid("ground size must be positive"));
        }
        check_cell(&law)?;
        Ok(Self {
            n,
            cells: vec![law; n * n],
        })
    }

    /// `G / ‖G‖₁` for a real matrix `G`.
    pub fn normalized(adjacency: &[Vec<f64>]) -> Result<Self> {
        let n = adjacency.len();
        let norm = adjacency.iter().flatten().map(|v| v.abs()).sum::<f64>() / (n * n) as f64;
        if norm == 0.0 {
            return Err(invalid("cannot normalize a graph with no edges"));
        }
        let scaled: Vec<Vec<f64>> = adjacency.iter().map(|r| r.iter().map(|v| v / norm).collect()).collect();
        Self::from_matrix(&scaled)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cell(&self, i: usize, j: usize) -> &DiscreteMeasure {
        &self.cells[i * self.n + j]
    }

    pub fn cells(&self) -> &[DiscreteMeasure] {
        &self.cells
    }

    pub fn cell_rows(&self) -> Vec<Vec<DiscreteMeasure>> {
        self.cells.chunks(self.n).map(<[_]>::to_vec).collect()
    }

    pub fn quantile(&self, i: usize, j: usize) -> QuantileView<'_> {
        QuantileView { cell: self.cell(i, j) }
    }

    pub fn is_deterministic(&self) -> bool {
        self.cells.iter().all(|c| c.len() == 1)
    }

    /// `cell(i, j) == cell(j, i)` everywhere.
    pub fn is_pointwise_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.cell(i, j) == self.cell(j, i)))
    }

    /// `(1/n²) Σ cell(i, j)`.
    pub fn global_law(&self) -> DiscreteMeasure {
        let scale = 1.0 / (self.n * self.n) as f64;
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        for c in &self.cells {
            coords.extend_from_slice(c.coords());
            weights.extend(c.weights().iter().map(|w| w * scale));
        }
        DiscreteMeasure::canonical(1, coords, weights)
    }

    /// Cell means.
    pub fn contraction(&self) -> RealKernel {
        RealKernel {
            n: self.n,
            values: self.cells.iter().map(|c| c.integrate(|z| z[0])).collect(),
        }
    }

    /// Global-law mass of `{|z| > threshold}`.
    pub fn tail_mass(&self, threshold: f64) -> Result<f64> {
        if !(threshold > 0.0) {
            return Err(invalid("tail threshold must be positive"));
        }
        Ok(self.global_law().mass_where(|z| z[0].abs() > threshold))
    }

    /// `cell'(i, j) = cell(p(i), p(j))`.
    pub fn relabel(&self, p: &[usize]) -> Result<Self> {
        check_permutation(p, self.n)?;
        let n = self.n;
        let cells = (0..n * n).map(|ij| self.cell(p[ij / n], p[ij % n]).clone()).collect();
        Ok(Self { n, cells })
    }

    /// `cell'(i, j) = cell(j, i)`.
    pub fn transpose(&self) -> Self {
        let n = self.n;
        let cells = (0..n * n).map(|ij| self.cell(ij % n, ij / n).clone()).collect();
        Self { n, cells }
    }

    /// Averages the cells over every block `S_a × S_b` of the partition.
    pub fn stepping(&self, partition: &FunctionPartition) -> Result<Self> {
        if partition.n() != self.n {
            return Err(Error::GroundMismatch {
                left: self.n,
                right: partition.n(),
            });
        }
        let groups = partition.cells();
        let k = groups.len();
        let blocks: Vec<Option<DiscreteMeasure>> = (0..k * k)
            .into_par_iter()
            .map(|ab| {
                let (sa, sb) = (&groups[ab / k], &groups[ab % k]);
                if sa.is_empty() || sb.is_empty() {
                    return None;
                }
                let members: Vec<&DiscreteMeasure> = sa
                    .iter()
                    .flat_map(|&x| sb.iter().map(move |&y| (x, y)))
                    .map(|(x, y)| self.cell(x, y))
                    .collect();
                Some(average(&members))
            })
            .collect();
        let n = self.n;
        let cells = (0..n * n)
            .map(|ij| {
                let (a, b) = (partition.cell_of(ij / n), partition.cell_of(ij % n));
                blocks[a * k + b].clone().unwrap_or_else(|| DiscreteMeasure::zero(1))
            })
            .collect();
        Ok(Self { n, cells })
    }

    /// Each ground point replaced by `factor` copies.
    pub fn blowup(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(invalid("blow-up factor must be positive"));
        }
        let big = self.n * factor;
        if big > crate::budget::BLOWUP_N {
            return Err(Error::BudgetExceeded {
                what: "blow-up ground size".into(),
                count: big as f64,
                limit: crate::budget::BLOWUP_N as f64,
            });
        }
        let cells = (0..big * big)
            .map(|ij| self.cell(ij / big / factor, ij % big / factor).clone())
            .collect();
        Ok(Self { n: big, cells })
    }

    /// Draws an `m × m` matrix `M_ij = W(X_i, X_j, Y_ij)` with zero diagonal.
    pub fn sample_matrix(&self, m: usize, seed: u64, symmetrize: bool) -> Result<Vec<Vec<f64>>> {
        if m == 0 {
            return Err(invalid("sample size must be positive"));
        }
        let mut rng = seed::rng(seed);
        let xs: Vec<usize> = (0..m).map(|_| rng.random_range(0..self.n)).collect();
        let mut out = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    let y: f64 = rng.random();
                    out[i][j] = self.quantile(xs[i], xs[j]).eval(y);
                }
            }
        }
        if symmetrize {
            for i in 0..m {
                for j in 0..i {
                    out[i][j] = out[j][i];
                }
            }
        }
        Ok(out)
    }
}

/// Blows both variables up to the least common multiple of their sizes.
pub fn common_refinement(u: &StepPVariable, w: &StepPVariable) -> Result<(StepPVariable, StepPVariable)> {
    if u.n() == w.n() {
        return Ok((u.clone(), w.clone()));
    }
    let l = lcm(u.n(), w.n());
    Ok((u.blowup(l / u.n())?, w.blowup(l / w.n())?))
}

pub(crate) fn lcm(a: usize, b: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

struct CellCoupling<'a> {
    pairs: Vec<(&'a DiscreteMeasure, &'a DiscreteMeasure)>,
    thresholds: Vec<f64>,
    full: f64,
    scale: f64,
}

impl<'a> CellCoupling<'a> {
    fn new(
        u: &'a StepPVariable,
        w: &'a StepPVariable,
        sigma: Option<&[usize]>,
        cells: Option<&[usize]>,
    ) -> Result<Self> {
        let n = u.n();
        if n != w.n() {
            return Err(Error::GroundMismatch { left: n, right: w.n() });
        }
        if let Some(s) = sigma {
            check_permutation(s, n)?;
        }
        let map = |x: usize| sigma.map_or(x, |s| s[x]);
        let cell_pair = |ij: usize| (&u.cells[ij], w.cell(map(ij / n), map(ij % n)));
        let pairs: Vec<_> = match cells {
            Some(c) => c.iter().map(|&ij| cell_pair(ij)).collect(),
            None => (0..n * n).map(cell_pair).collect(),
        };
        let scale = 1.0 / (n * n) as f64;
        let mut thresholds: Vec<f64> = pairs
            .iter()
            .flat_map(|(a, b)| a.atoms().flat_map(move |x| b.atoms().map(move |y| euclid(x, y))))
            .collect();
        thresholds.sort_by(f64::total_cmp);
        thresholds.dedup();
        let full = pairs.iter().map(|(a, b)| a.mass().max(b.mass())).sum::<f64>() * scale;
        Ok(Self {
            pairs,
            thresholds,
            full,
            scale,
        })
    }

    /// Uncoupled mass when every cell pair is coupled at distance `≤ thr`.
    fn shortfall(&self, thr: f64) -> f64 {
        let coupled: Vec<f64> = self
            .pairs
            .par_iter()
            .map(|(a, b)| {
                if a.len() == 1 && b.len() == 1 {
                    if euclid(a.atom(0), b.atom(0)) <= thr {
                        a.weights()[0].min(b.weights()[0])
                    } else {
                        0.0
                    }
                } else {
                    bipartite_transport(a.weights(), b.weights(), |i, j| euclid(a.atom(i), b.atom(j)) <= thr)
                }
            })
            .collect();
        clean_gap(self.full - coupled.iter().sum::<f64>() * self.scale)
    }
}

/// Upper bound on Lévy-Prokhorov distances between any two laws that
/// `u` and `w ∘ σ` generate through the same ground functions.
///
/// Couples the ground pair `(i, j)` of `u` with `(σi, σj)` of `w` and every
/// cell pair optimally. Returns the least `ε` for which the mass of the
/// averaged coupling at distance `> ε` is at most `ε`. When `cells` is given,
/// only those ground pairs (as flat indices) are coupled and the bound is for
/// their block measures.
pub fn coupling_bound(
    u: &StepPVariable,
    w: &StepPVariable,
    sigma: Option<&[usize]>,
    cells: Option<&[usize]>,
) -> Result<f64> {
    let c = CellCoupling::new(u, w, sigma, cells)?;
    Ok(min_eps_over_thresholds(&c.thresholds, c.full, |t| {
        c.shortfall(c.thresholds[t])
    }))
}

/// `(t, s(t))` pairs where `s(t)` is the mass left uncoupled at distance `≤ t`
/// by the cellwise coupling through `σ`. At most `max_points` thresholds are
/// evaluated, spread over the distinct cross distances.
pub fn coupling_profile(
    u: &StepPVariable,
    w: &StepPVariable,
    sigma: Option<&[usize]>,
    max_points: usize,
) -> Result<Vec<(f64, f64)>> {
    let c = CellCoupling::new(u, w, sigma, None)?;
    let m = c.thresholds.len();
    let picks: Vec<usize> = if m <= max_points.max(2) {
        (0..m).collect()
    } else {
        let mut p: Vec<usize> = (0..max_points).map(|i| i * (m - 1) / (max_points - 1)).collect();
        p.dedup();
        p
    };
    Ok(picks
        .into_iter()
        .map(|i| (c.thresholds[i], c.shortfall(c.thresholds[i])))
        .collect())
}
