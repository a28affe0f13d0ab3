//! Real-valued kernels: cut norm, cut distance, averaged quotients and L^p norms.

use itertools::Itertools;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::budget;
use crate::error::{invalid, Error, Result};
use crate::partition::FunctionPartition;
use crate::pvariable::{common_refinement, lcm, RealKernel, StepPVariable};
use crate::seed;
use crate::strategy::{Bounds, CutMode, Strategy, MOVES_PER_POINT};

/// Rows per chunk in the split upper bound.
const SPLIT_CHUNK: usize = 16;
/// Row-enumeration prefix bits handed to separate threads.
const PREFIX_BITS: usize = 6;

const TAG_ALIGN: u32 = 0x500;
const TAG_AVQ_U: u32 = 0x600;
const TAG_AVQ_W: u32 = 0x700;
const TAG_WITNESS: u32 = 0x780;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutNormMode {
    /// Enumerates row sets; the best column set is read off the column signs.
    ExhaustiveRows,
    /// Enumerates row and column sets.
    Bruteforce,
}

fn best_columns(col: &[f64]) -> f64 {
    let (mut pos, mut neg) = (0.0, 0.0);
    for &c in col {
        if c > 0.0 {
            pos += c;
        } else {
            neg -= c;
        }
    }
    pos.max(neg)
}

/// `max_{S ⊆ rows, T} |Σ_{S×T} a|` (unnormalized), by Gray-code row enumeration.
fn rows_max(a: &RealKernel, rows: &[usize]) -> f64 {
    let n = a.n();
    let h = rows.len().min(PREFIX_BITS);
    let low = rows.len() - h;
    let add = |col: &mut [f64], r: usize, sign: f64| {
        for (j, c) in col.iter_mut().enumerate() {
            *c += sign * a.get(r, j);
        }
    };
    (0..1u64 << h)
        .into_par_iter()
        .map(|prefix| {
            let mut col = vec![0.0; n];
            for b in 0..h {
                if prefix >> b & 1 == 1 {
                    add(&mut col, rows[low + b], 1.0);
                }
            }
            let mut best = best_columns(&col);
            let mut prev = 0u64;
            for g in 1..1u64 << low {
                let gray = g ^ (g >> 1);
                let bit = (gray ^ prev).trailing_zeros() as usize;
                let sign = if gray >> bit & 1 == 1 { 1.0 } else { -1.0 };
                add(&mut col, rows[bit], sign);
                prev = gray;
                best = best.max(best_columns(&col));
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

fn cut_norm_bruteforce(a: &RealKernel) -> f64 {
    let n = a.n();
    (0..1u64 << n)
        .into_par_iter()
        .map(|s| {
            let col: Vec<f64> = (0..n)
                .map(|j| (0..n).filter(|&i| s >> i & 1 == 1).map(|i| a.get(i, j)).sum())
                .collect();
            let mut best: f64 = 0.0;
            for t in 0..1u64 << n {
                let sum: f64 = (0..n).filter(|&j| t >> j & 1 == 1).map(|j| col[j]).sum();
                best = best.max(sum.abs());
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

/// `sup_{S,T ⊆ [n]} |Σ_{S×T} a| / n²`.
pub fn cut_norm(a: &RealKernel, mode: CutNormMode) -> Result<f64> {
    let n = a.n();
    let scale = (n * n) as f64;
    match mode {
        CutNormMode::ExhaustiveRows => {
            budget::check("cut norm rows", n as f64, budget::CUT_NORM_ROWS_N as f64)?;
            let rows: Vec<usize> = (0..n).collect();
            Ok(rows_max(a, &rows) / scale)
        }
        CutNormMode::Bruteforce => {
            budget::check("cut norm brute force", n as f64, budget::CUT_NORM_BRUTE_N as f64)?;
            Ok(cut_norm_bruteforce(a) / scale)
        }
    }
}

/// `σ_max(a) / n`, an upper bound on the cut norm.
pub fn spectral_bound(a: &RealKernel) -> f64 {
    let n = a.n();
    let m = DMatrix::from_row_slice(n, n, a.values());
    let top = m.singular_values().iter().copied().fold(0.0, f64::max);
    top * (1.0 + 1e-10) / n as f64
}

/// Sum over row chunks of the exact chunk cut norms, an upper bound on the cut norm.
pub fn split_bound(a: &RealKernel) -> f64 {
    let n = a.n();
    let rows: Vec<usize> = (0..n).collect();
    rows.chunks(SPLIT_CHUNK).map(|c| rows_max(a, c)).sum::<f64>() / (n * n) as f64
}

/// Certified upper bound on the cut norm: exact when row enumeration fits the
/// budget, otherwise the best of the L¹, spectral and split bounds.
pub fn cut_norm_upper(a: &RealKernel) -> f64 {
    let n = a.n();
    if (n as f64) <= budget::limit(budget::CUT_NORM_ROWS_N as f64) {
        let rows: Vec<usize> = (0..n).collect();
        return rows_max(a, &rows) / (n * n) as f64;
    }
    let l1 = a.values().iter().map(|v| v.abs()).sum::<f64>() / (n * n) as f64;
    l1.min(spectral_bound(a)).min(split_bound(a))
}

/// Lower bound on the cut norm from explicit `(S, T)` witnesses, found by
/// alternately choosing the best column set for the rows and the best row
/// set for the columns, from seeded random row sets and both signs.
pub fn cut_norm_witness(a: &RealKernel, restarts: usize, seed: u64) -> f64 {
    let n = a.n();
    let best = (0..restarts.max(1) * 2)
        .into_par_iter()
        .map(|r| {
            let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
            let mut rng = seed::stream(seed, seed::stream_id(TAG_WITNESS, r as u64));
            let mut rows: Vec<bool> = (0..n).map(|_| rng.random()).collect();
            let mut value = f64::NEG_INFINITY;
            loop {
                let col: Vec<f64> = (0..n)
                    .map(|j| sign * (0..n).filter(|&i| rows[i]).map(|i| a.get(i, j)).sum::<f64>())
                    .collect();
                let cols: Vec<bool> = col.iter().map(|&c| c > 0.0).collect();
                let row: Vec<f64> = (0..n)
                    .map(|i| sign * (0..n).filter(|&j| cols[j]).map(|j| a.get(i, j)).sum::<f64>())
                    .collect();
                rows = row.iter().map(|&v| v > 0.0).collect();
                let v: f64 = row.iter().filter(|&&v| v > 0.0).sum();
                if v <= value {
                    return value;
                }
                value = v;
            }
        })
        .reduce(|| 0.0, f64::max);
    best / (n * n) as f64
}

fn is_constant(a: &RealKernel) -> bool {
    a.values().iter().all(|&v| v == a.values()[0])
}

/// Relabeling-invariant lower bound on the real cut distance.
///
/// Uses the mean difference and half the L¹ distance between sorted row sums.
pub fn real_cut_lower(a: &RealKernel, b: &RealKernel) -> f64 {
    let n = a.n();
    let sorted_rows = |k: &RealKernel| {
        let mut r: Vec<f64> = (0..n).map(|i| (0..n).map(|j| k.get(i, j)).sum()).collect();
        r.sort_by(f64::total_cmp);
        r
    };
    let (ra, rb) = (sorted_rows(a), sorted_rows(b));
    let rows = 0.5 * ra.iter().zip(&rb).map(|(x, y)| (x - y).abs()).sum::<f64>() / (n * n) as f64;
    rows.max((a.mean() - b.mean()).abs())
}

fn frobenius_gap(a: &RealKernel, b: &RealKernel, sigma: &[usize]) -> f64 {
    let n = a.n();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = a.get(i, j) - b.get(sigma[i], sigma[j]);
            s += d * d;
        }
    }
    s
}

/// Candidate relabelings of `b` onto `a`: identity, sorted row sums, and
/// transposition descents on the Frobenius gap from seeded random starts.
pub fn align(a: &RealKernel, b: &RealKernel, restarts: usize, seed: u64) -> Vec<Vec<usize>> {
    let n = a.n();
    let row_order = |k: &RealKernel| {
        let sums: Vec<f64> = (0..n).map(|i| (0..n).map(|j| k.get(i, j)).sum()).collect();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&x, &y| sums[x].total_cmp(&sums[y]).then(x.cmp(&y)));
        idx
    };
    let (oa, ob) = (row_order(a), row_order(b));
    let mut sorted = vec![0; n];
    for r in 0..n {
        sorted[oa[r]] = ob[r];
    }
    let mut out = vec![(0..n).collect::<Vec<_>>(), sorted.clone()];
    let descents: Vec<Vec<usize>> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed::stream(seed, seed::stream_id(TAG_ALIGN, r as u64));
            let mut sigma = if r == 0 {
                sorted.clone()
            } else {
                let mut s: Vec<usize> = (0..n).collect();
                s.shuffle(&mut rng);
                s
            };
            let mut cur = frobenius_gap(a, b, &sigma);
            let mut evals = 0;
            let max_evals = MOVES_PER_POINT * n;
            loop {
                let mut improved = false;
                for _ in 0..n * n {
                    if evals >= max_evals {
                        break;
                    }
                    let (x, y) = (rng.random_range(0..n), rng.random_range(0..n));
                    if x == y {
                        continue;
                    }
                    sigma.swap(x, y);
                    let v = frobenius_gap(a, b, &sigma);
                    evals += 1;
                    if v < cur - 1e-12 {
                        cur = v;
                        improved = true;
                    } else {
                        sigma.swap(x, y);
                    }
                }
                if !improved || evals >= max_evals {
                    break;
                }
            }
            sigma
        })
        .collect();
    out.extend(descents);
    out.sort();
    out.dedup();
    out
}

fn permutations(n: usize) -> Result<Vec<Vec<usize>>> {
    budget::check("relabelings", n as f64, budget::UNLABELED_EXHAUSTIVE_N as f64)?;
    Ok((0..n).permutations(n).collect())
}

fn refine_kernels(a: &RealKernel, b: &RealKernel) -> Result<(RealKernel, RealKernel)> {
    if a.n() == b.n() {
        return Ok((a.clone(), b.clone()));
    }
    let l = lcm(a.n(), b.n());
    budget::check("blow-up ground size", l as f64, budget::BLOWUP_N as f64)?;
    Ok((a.blowup(l / a.n()), b.blowup(l / b.n())))
}

/// `inf_φ ‖a − b^φ‖_□` over ground relabelings, after blowing both kernels up
/// to a common size. Exhaustive mode is exact; heuristic mode returns
/// certified bounds from explicit relabelings and invariant statistics.
pub fn real_cut_distance(a: &RealKernel, b: &RealKernel, mode: &CutMode) -> Result<Bounds> {
    let (a, b) = refine_kernels(a, b)?;
    match *mode {
        CutMode::Exhaustive => {
            let perms = permutations(a.n())?;
            let v = perms
                .par_iter()
                .map(|p| {
                    let d = a.sub(&b.relabel(p).expect("valid permutation")).expect("same size");
                    rows_max(&d, &(0..d.n()).collect::<Vec<_>>()) / (d.n() * d.n()) as f64
                })
                .reduce(|| f64::INFINITY, f64::min);
            Ok(Bounds::exact(v))
        }
        CutMode::Heuristic { restarts, seed } if is_constant(&a) || is_constant(&b) => {
            // Every relabeling gives the same difference.
            let d = a.sub(&b)?;
            let lower = real_cut_lower(&a, &b).max(cut_norm_witness(&d, restarts, seed));
            Ok(Bounds::new(lower, cut_norm_upper(&d), None))
        }
        CutMode::Heuristic { restarts, seed } => {
            let lower = real_cut_lower(&a, &b);
            let upper = align(&a, &b, restarts, seed)
                .par_iter()
                .map(|p| cut_norm_upper(&a.sub(&b.relabel(p).expect("valid permutation")).expect("same size")))
                .reduce(|| f64::INFINITY, f64::min);
            Ok(Bounds::new(lower, upper, None))
        }
    }
}

/// `k` functions `[n] → [0, 1]` summing to one at every point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FractionalPartition {
    n: usize,
    weights: Vec<Vec<f64>>,
}

impl FractionalPartition {
    pub fn new(weights: Vec<Vec<f64>>) -> Result<Self> {
        let n = weights
            .first()
            .map(Vec::len)
            .ok_or_else(|| invalid("need at least one cell"))?;
        if let Some(r) = weights.iter().find(|r| r.len() != n) {
            return Err(Error::LengthMismatch {
                left: n,
                right: r.len(),
            });
        }
        if weights.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(invalid("fractional weights must lie in [0, 1]"));
        }
        for x in 0..n {
            let s: f64 = weights.iter().map(|r| r[x]).sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(invalid(format!("weights at point {x} sum to {s}, not 1")));
            }
        }
        Ok(Self { n, weights })
    }

    pub fn from_hard(p: &FunctionPartition) -> Self {
        let weights = (0..p.k())
            .map(|c| p.assign().iter().map(|&a| if a == c { 1.0 } else { 0.0 }).collect())
            .collect();
        Self { n: p.n(), weights }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    /// Every cell carries mass `n / k`.
    pub fn is_balanced(&self) -> bool {
        let target = self.n as f64 / self.k() as f64;
        self.weights
            .iter()
            .all(|r| (r.iter().sum::<f64>() - target).abs() <= 1e-9)
    }

    fn relabeled(&self, sigma_inv: &[usize]) -> Self {
        let weights = self
            .weights
            .iter()
            .map(|r| (0..self.n).map(|y| r[sigma_inv[y]]).collect())
            .collect();
        Self { n: self.n, weights }
    }
}

/// `M_ij = (1/n²) Σ_{a,b} f_i(a) f_j(b) c(a, b)` for the contraction `c` of `w`.
pub fn averaged_quotient(w: &StepPVariable, f: &FractionalPartition) -> Result<Vec<Vec<f64>>> {
    if f.n() != w.n() {
        return Err(Error::GroundMismatch {
            left: w.n(),
            right: f.n(),
        });
    }
    Ok(averaged_quotient_kernel(&w.contraction(), f))
}

fn averaged_quotient_kernel(c: &RealKernel, f: &FractionalPartition) -> Vec<Vec<f64>> {
    let n = c.n();
    let scale = 1.0 / (n * n) as f64;
    // g_j(a) = Σ_b c(a, b) f_j(b)
    let g: Vec<Vec<f64>> = f
        .weights
        .iter()
        .map(|fj| (0..n).map(|a| (0..n).map(|b| c.get(a, b) * fj[b]).sum()).collect())
        .collect();
    f.weights
        .iter()
        .map(|fi| {
            g.iter()
                .map(|gj| fi.iter().zip(gj).map(|(x, y)| x * y).sum::<f64>() * scale)
                .collect()
        })
        .collect()
}

fn binomial(n: usize, r: usize) -> f64 {
    (0..r).map(|i| (n - i) as f64 / (i + 1) as f64).product()
}

/// Size of the balanced hard family with `n mod k` points spread evenly.
pub fn balanced_family_size(n: usize, k: usize) -> f64 {
    let (q, r) = (n / k, n % k);
    binomial(n, r) * budget::factorial(n - r) / budget::factorial(q).powi(k as i32)
}

fn spread_partition(n: usize, k: usize, assign: &[Option<usize>]) -> FractionalPartition {
    let weights = (0..k)
        .map(|c| {
            (0..n)
                .map(|x| match assign[x] {
                    Some(a) if a == c => 1.0,
                    Some(_) => 0.0,
                    None => 1.0 / k as f64,
                })
                .collect()
        })
        .collect();
    FractionalPartition { n, weights }
}

/// Every balanced hard partition; the `n mod k` leftover points are split
/// evenly over all cells.
pub fn balanced_family(n: usize, k: usize) -> Result<Vec<FractionalPartition>> {
    if k == 0 || k > n {
        return Err(invalid("need 1 <= k <= n"));
    }
    budget::check("balanced partitions", balanced_family_size(n, k), budget::PARTITIONS)?;
    let (q, r) = (n / k, n % k);
    let mut out = Vec::new();
    for leftover in (0..n).combinations(r) {
        let rest: Vec<usize> = (0..n).filter(|x| !leftover.contains(x)).collect();
        let mut assign: Vec<Option<usize>> = vec![None; n];
        let mut sizes = vec![0usize; k];
        fill(&rest, 0, q, &mut sizes, &mut assign, &mut |a| {
            out.push(spread_partition(n, k, a))
        });
    }
    Ok(out)
}

fn fill(
    rest: &[usize],
    idx: usize,
    q: usize,
    sizes: &mut [usize],
    assign: &mut [Option<usize>],
    emit: &mut dyn FnMut(&[Option<usize>]),
) {
    if idx == rest.len() {
        emit(assign);
        return;
    }
    for c in 0..sizes.len() {
        if sizes[c] < q {
            sizes[c] += 1;
            assign[rest[idx]] = Some(c);
            fill(rest, idx + 1, q, sizes, assign, emit);
            sizes[c] -= 1;
        }
    }
    assign[rest[idx]] = None;
}

fn random_balanced(n: usize, k: usize, rng: &mut impl Rng) -> FractionalPartition {
    let (q, r) = (n / k, n % k);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut assign = vec![None; n];
    for (pos, &x) in order.iter().enumerate().skip(r) {
        assign[x] = Some(((pos - r) / q.max(1)).min(k - 1));
    }
    spread_partition(n, k, &assign)
}

/// Applies a random balanced move: a hard swap of two points between cells,
/// or a fractional transfer of `1 / (4n)` that keeps every cell mass fixed.
fn perturb(f: &FractionalPartition, rng: &mut impl Rng) -> Option<FractionalPartition> {
    let (n, k) = (f.n, f.k());
    if k < 2 || n < 2 {
        return None;
    }
    let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
    let (i, j) = (rng.random_range(0..k), rng.random_range(0..k));
    if a == b || i == j {
        return None;
    }
    let mut g = f.clone();
    let s = if rng.random_bool(0.5) {
        // Hard exchange: move all of a's mass in i to j, and the same amount of b's mass in j to i.
        g.weights[i][a].min(g.weights[j][b])
    } else {
        (1.0 / (4 * n) as f64).min(g.weights[i][a]).min(g.weights[j][b])
    };
    if s <= 0.0 {
        return None;
    }
    g.weights[i][a] -= s;
    g.weights[j][a] += s;
    g.weights[j][b] -= s;
    g.weights[i][b] += s;
    Some(g)
}

fn l1(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .sum()
}

/// Result of comparing averaged-quotient families.
#[derive(Clone, Debug, Serialize)]
pub struct AvqReport {
    pub bounds: Bounds,
    /// Largest `|Σ_ij M_ij − E[W]|` over every matrix produced.
    pub entry_sum_defect: f64,
    pub matrices: usize,
}

fn entry_sum_defect(ms: &[Vec<Vec<f64>>], mean: f64) -> f64 {
    ms.iter()
        .map(|m| (m.iter().flatten().sum::<f64>() - mean).abs())
        .fold(0.0, f64::max)
}

/// Averaged quotients of `w` over the explored balanced family.
pub fn avq_family(w: &StepPVariable, k: usize, strategy: &Strategy) -> Result<Vec<Vec<Vec<f64>>>> {
    let c = w.contraction();
    let fam = explore_family(&c, &c, &(0..w.n()).collect::<Vec<_>>(), k, strategy, TAG_AVQ_U)?;
    Ok(fam.iter().map(|f| averaged_quotient_kernel(&c, f)).collect())
}

fn explore_family(
    own: &RealKernel,
    other: &RealKernel,
    sigma: &[usize],
    k: usize,
    strategy: &Strategy,
    tag: u32,
) -> Result<Vec<FractionalPartition>> {
    let n = own.n();
    if k == 0 || k > n {
        return Err(invalid("need 1 <= k <= n"));
    }
    match *strategy {
        Strategy::Exhaustive => balanced_family(n, k),
        Strategy::Random { samples, seed } => Ok((0..samples)
            .into_par_iter()
            .map(|i| random_balanced(n, k, &mut seed::stream(seed, seed::stream_id(tag, i as u64))))
            .collect()),
        Strategy::Local { restarts, seed } => {
            let sigma_inv = inverse(sigma);
            let gap = |f: &FractionalPartition| {
                l1(
                    &averaged_quotient_kernel(own, f),
                    &averaged_quotient_kernel(other, &f.relabeled(&sigma_inv)),
                )
            };
            Ok((0..restarts)
                .into_par_iter()
                .map(|r| {
                    let mut rng = seed::stream(seed, seed::stream_id(tag, r as u64));
                    let mut best = random_balanced(n, k, &mut rng);
                    let mut val = gap(&best);
                    for _ in 0..MOVES_PER_POINT * n {
                        if let Some(cand) = perturb(&best, &mut rng) {
                            let v = gap(&cand);
                            if v > val + 1e-15 {
                                best = cand;
                                val = v;
                            }
                        }
                    }
                    best
                })
                .collect())
        }
    }
}

fn inverse(sigma: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; sigma.len()];
    for (x, &sx) in sigma.iter().enumerate() {
        inv[sx] = x;
    }
    inv
}

/// Hausdorff distance under entrywise L¹ between the averaged-quotient
/// families of `u` and `w` over balanced partitions into `k` cells.
///
/// Exhaustive mode is exact over balanced hard partitions (leftover points
/// spread evenly). Sampled modes bound the distance by the mean difference
/// from below and by `min(‖D‖₁, k²‖D‖_□)` from above, where `D` is the
/// contraction difference under an explicit relabeling.
pub fn avq_set_distance(u: &StepPVariable, w: &StepPVariable, k: usize, strategy: &Strategy) -> Result<AvqReport> {
    let (u, w) = common_refinement(u, w)?;
    let (cu, cw) = (u.contraction(), w.contraction());
    let (mu, mw) = (cu.mean(), cw.mean());
    let n = u.n();
    let ident: Vec<usize> = (0..n).collect();
    let sigma = if strategy.is_exhaustive() {
        ident.clone()
    } else {
        let cands = align(&cu, &cw, crate::strategy::LOCAL_RESTARTS, strategy.seed());
        cands
            .into_iter()
            .min_by(|p, q| frobenius_gap(&cu, &cw, p).total_cmp(&frobenius_gap(&cu, &cw, q)))
            .expect("identity is always a candidate")
    };
    let sigma_inv = inverse(&sigma);
    let fu = explore_family(&cu, &cw, &sigma, k, strategy, TAG_AVQ_U)?;
    let fw = explore_family(&cw, &cu, &sigma_inv, k, strategy, TAG_AVQ_W)?;
    let mut a: Vec<Vec<Vec<f64>>> = fu.par_iter().map(|f| averaged_quotient_kernel(&cu, f)).collect();
    let mut b: Vec<Vec<Vec<f64>>> = fw.par_iter().map(|f| averaged_quotient_kernel(&cw, f)).collect();
    let defect = entry_sum_defect(&a, mu).max(entry_sum_defect(&b, mw));
    let bounds = if strategy.is_exhaustive() {
        Bounds::exact(crate::measures::hausdorff_by(&a, &b, |x, y| l1(x, y)))
    } else {
        // Best responses through the relabeling.
        let resp_b: Vec<Vec<Vec<f64>>> = fu
            .iter()
            .map(|f| averaged_quotient_kernel(&cw, &f.relabeled(&sigma_inv)))
            .collect();
        let resp_a: Vec<Vec<Vec<f64>>> = fw
            .iter()
            .map(|f| averaged_quotient_kernel(&cu, &f.relabeled(&sigma)))
            .collect();
        a.extend(resp_a);
        b.extend(resp_b);
        let estimate = crate::measures::hausdorff_by(&a, &b, |x, y| l1(x, y));
        let d = cu.sub(&cw.relabel(&sigma)?)?;
        let mean_abs = d.values().iter().map(|v| v.abs()).sum::<f64>() / (n * n) as f64;
        let upper = mean_abs.min((k * k) as f64 * cut_norm_upper(&d));
        Bounds::new((mu - mw).abs(), upper, Some(estimate))
    };
    let matrices = a.len() + b.len();
    Ok(AvqReport {
        bounds,
        entry_sum_defect: defect.max(entry_sum_defect(&a, mu)).max(entry_sum_defect(&b, mw)),
        matrices,
    })
}

/// `(∫ |W|^p)^{1/p}`; `p = ∞` gives the largest absolute atom.
pub fn lp_norm(w: &StepPVariable, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(invalid(format!("p must be at least 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(w
            .cells()
            .iter()
            .flat_map(|c| c.coords())
            .map(|z| z.abs())
            .fold(0.0, f64::max));
    }
    let n = w.n();
    let s: f64 = w.cells().iter().map(|c| c.integrate(|z| z[0].abs().powf(p))).sum();
    Ok((s / (n * n) as f64).powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::DiscreteMeasure;

    fn k(rows: &[Vec<f64>]) -> RealKernel {
        RealKernel::new(rows).unwrap()
    }

    #[test]
    fn cut_norm_examples() {
        let c = RealKernel::constant(5, -0.7);
        for mode in [CutNormMode::ExhaustiveRows, CutNormMode::Bruteforce] {
            assert!((cut_norm(&c, mode).unwrap() - 0.7).abs() < 1e-12);
        }
        let id = k(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(cut_norm(&id, CutNormMode::Bruteforce).unwrap(), 0.5);
        assert_eq!(cut_norm(&id, CutNormMode::ExhaustiveRows).unwrap(), 0.5);
        let a = k(&[vec![1.0, -2.0, 0.5], vec![0.0, 3.0, -1.0], vec![2.0, 0.0, -0.5]]);
        assert_eq!(
            cut_norm(&a, CutNormMode::ExhaustiveRows).unwrap(),
            cut_norm(&a.neg(), CutNormMode::ExhaustiveRows).unwrap()
        );
        assert!(cut_norm(&RealKernel::constant(13, 1.0), CutNormMode::Bruteforce).is_err());
    }

    #[test]
    fn upper_bounds_dominate_exact() {
        let a = k(&[
            vec![1.0, -2.0, 0.5, 0.0],
            vec![0.0, 3.0, -1.0, 1.0],
            vec![2.0, 0.0, -0.5, -1.0],
            vec![0.5, 0.5, 0.5, -3.0],
        ]);
        let exact = cut_norm(&a, CutNormMode::ExhaustiveRows).unwrap();
        assert!(spectral_bound(&a) >= exact);
        assert!(split_bound(&a) >= exact - 1e-15);
        assert!(real_cut_lower(&a, &RealKernel::constant(4, 0.0)) <= exact + 1e-15);
        let w = cut_norm_witness(&a, 4, 1);
        assert!(w <= exact + 1e-15 && w > 0.0);
    }

    #[test]
    fn witness_finds_planted_block() {
        let n = 40;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i < 10 && j >= 25 { 1.0 } else { 0.0 }).collect())
            .collect();
        let a = k(&rows);
        assert_eq!(cut_norm_witness(&a, 2, 0), 150.0 / 1600.0);
        let b = real_cut_distance(
            &a,
            &RealKernel::constant(1, 0.0),
            &CutMode::Heuristic { restarts: 2, seed: 0 },
        )
        .unwrap();
        assert_eq!(b.lower, 150.0 / 1600.0);
        assert!(b.upper >= b.lower);
    }

    #[test]
    fn real_cut_examples() {
        let a = k(&[vec![0.0, 1.0, 2.0], vec![3.0, 4.0, 5.0], vec![6.0, 7.0, 8.0]]);
        let pa = a.relabel(&[2, 0, 1]).unwrap();
        assert_eq!(real_cut_distance(&a, &pa, &CutMode::Exhaustive).unwrap().upper, 0.0);
        let half1 = RealKernel::constant(1, 0.5);
        let half3 = RealKernel::constant(3, 0.5);
        assert_eq!(
            real_cut_distance(&half1, &half3, &CutMode::Exhaustive).unwrap().upper,
            0.0
        );
        let zero = RealKernel::constant(2, 0.0);
        let one = RealKernel::constant(2, 1.0);
        assert_eq!(real_cut_distance(&zero, &one, &CutMode::Exhaustive).unwrap().upper, 1.0);
        let h = real_cut_distance(&a, &pa, &CutMode::Heuristic { restarts: 4, seed: 1 }).unwrap();
        assert_eq!((h.lower, h.upper), (0.0, 0.0));
    }

    #[test]
    fn averaged_quotient_examples() {
        let k2 = StepPVariable::from_matrix(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let one = FractionalPartition::new(vec![vec![1.0, 1.0]]).unwrap();
        assert_eq!(averaged_quotient(&k2, &one).unwrap(), vec![vec![0.5]]);
        let single = FractionalPartition::from_hard(&FunctionPartition::singletons(2));
        assert_eq!(
            averaged_quotient(&k2, &single).unwrap(),
            vec![vec![0.0, 0.25], vec![0.25, 0.0]]
        );
        assert!(single.is_balanced());
        assert!(FractionalPartition::new(vec![vec![0.5, 1.0], vec![0.4, 0.0]]).is_err());
    }

    #[test]
    fn balanced_family_spreads_remainder() {
        let fam = balanced_family(5, 2).unwrap();
        assert_eq!(fam.len() as f64, balanced_family_size(5, 2));
        assert_eq!(fam.len(), 5 * 6);
        assert!(fam.iter().all(FractionalPartition::is_balanced));
    }

    #[test]
    fn avq_examples() {
        let w = StepPVariable::from_matrix(&[vec![0.0, 1.0, 0.5], vec![1.0, 0.0, 0.2], vec![0.5, 0.2, 0.0]]).unwrap();
        let r = avq_set_distance(&w, &w, 2, &Strategy::Exhaustive).unwrap();
        assert_eq!((r.bounds.lower, r.bounds.upper), (0.0, 0.0));
        assert!(r.entry_sum_defect <= 1e-12);

        let half = StepPVariable::from_matrix(&[vec![0.5]]).unwrap();
        let coin = StepPVariable::constant(1, DiscreteMeasure::from_pairs(&[(0.0, 0.5), (1.0, 0.5)]).unwrap()).unwrap();
        let r = avq_set_distance(&half, &coin, 1, &Strategy::Exhaustive).unwrap();
        assert_eq!((r.bounds.lower, r.bounds.upper), (0.0, 0.0));

        let other =
            StepPVariable::from_matrix(&[vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let r = avq_set_distance(&w, &other, 1, &Strategy::Exhaustive).unwrap();
        let gap = (w.contraction().mean() - other.contraction().mean()).abs();
        assert!(r.bounds.lower >= gap - 1e-12);
        for s in [
            Strategy::Random { samples: 8, seed: 3 },
            Strategy::Local { restarts: 2, seed: 3 },
        ] {
            let h = avq_set_distance(&w, &other, 2, &s).unwrap();
            assert!(h.bounds.lower <= h.bounds.upper);
        }
    }

    #[test]
    fn lp_norm_examples() {
        let adj = StepPVariable::from_matrix(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        for p in [1.0, 2.0, 3.5] {
            assert!((lp_norm(&adj, p).unwrap() - 0.5f64.powf(1.0 / p)).abs() < 1e-15);
        }
        let c = StepPVariable::from_matrix(&[vec![-4.0]]).unwrap();
        assert_eq!(lp_norm(&c, f64::INFINITY).unwrap(), 4.0);
        let coin = StepPVariable::constant(1, DiscreteMeasure::from_pairs(&[(0.0, 0.5), (1.0, 0.5)]).unwrap()).unwrap();
        assert!((lp_norm(&coin, 2.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(lp_norm(&coin, 0.5).is_err());
    }
}
