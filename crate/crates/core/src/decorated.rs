//! Decorated graphs: homomorphism densities and overlay functionals.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::budget;
use crate::error::{invalid, Error, Result};
use crate::measures::DiscreteMeasure;
use crate::pvariable::StepPVariable;
use crate::seed;
use crate::strategy::{Bounds, MOVES_PER_POINT};

const RANGE_TOL: f64 = 1e-12;
const TAG_OVERLAY: u32 = 0x900;

/// Bounded edge decoration `R → R`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Decoration {
    Const {
        value: f64,
    },
    /// `z ↦ z` on `range`.
    Identity {
        range: [f64; 2],
    },
    /// `Σ coeffs[i] z^i` on `range`.
    Poly {
        coeffs: Vec<f64>,
        range: [f64; 2],
    },
    /// `1` within `tol` of `value`, else `0`.
    Indicator {
        value: f64,
        tol: f64,
    },
    /// Piecewise-linear through sorted `(x, y)` knots, constant outside.
    BoundedLipschitz {
        table: Vec<[f64; 2]>,
    },
}

fn in_range(z: f64, range: &[f64; 2]) -> Result<()> {
    if z < range[0] - RANGE_TOL || z > range[1] + RANGE_TOL {
        Err(Error::UnboundedDecoration { value: z })
    } else {
        Ok(())
    }
}

impl Decoration {
    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            Decoration::Const { value } if !value.is_finite() => Err(invalid("constant must be finite")),
            Decoration::Identity { range } | Decoration::Poly { range, .. }
                if !(finite(range) && range[0] <= range[1]) =>
            {
                Err(invalid("decoration range must be a finite interval"))
            }
            Decoration::Poly { coeffs, .. } if !finite(coeffs) => Err(invalid("coefficients must be finite")),
            Decoration::Indicator { value, tol } if !(value.is_finite() && *tol >= 0.0) => {
                Err(invalid("indicator needs a finite value and nonnegative tolerance"))
            }
            Decoration::BoundedLipschitz { table } => {
                if table.is_empty() || !table.iter().all(|p| finite(p)) {
                    return Err(invalid("table must be non-empty and finite"));
                }
                if table.windows(2).any(|w| w[0][0] >= w[1][0]) {
                    return Err(invalid("table knots must be strictly increasing"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, z: f64) -> Result<f64> {
        Ok(match self {
            Decoration::Const { value } => *value,
            Decoration::Identity { range } => {
                in_range(z, range)?;
                z
            }
            Decoration::Poly { coeffs, range } => {
                in_range(z, range)?;
                coeffs.iter().rev().fold(0.0, |acc, c| acc * z + c)
            }
            Decoration::Indicator { value, tol } => {
                if (z - value).abs() <= *tol {
                    1.0
                } else {
                    0.0
                }
            }
            Decoration::BoundedLipschitz { table } => {
                let first = table[0];
                let last = table[table.len() - 1];
                if z <= first[0] {
                    first[1]
                } else if z >= last[0] {
                    last[1]
                } else {
                    let i = table.partition_point(|p| p[0] <= z);
                    let (a, b) = (table[i - 1], table[i]);
                    a[1] + (b[1] - a[1]) * (z - a[0]) / (b[0] - a[0])
                }
            }
        })
    }

    /// `∫ β dμ`.
    pub fn integrate(&self, mu: &DiscreteMeasure) -> Result<f64> {
        let mut s = 0.0;
        for (z, m) in mu.coords().iter().zip(mu.weights()) {
            s += m * self.eval(*z)?;
        }
        Ok(s)
    }
}

/// Graph on `vertices` vertices with one decoration per ordered edge, and
/// optional vertex weights for overlays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoratedGraph {
    pub vertices: usize,
    pub edges: Vec<[usize; 2]>,
    pub beta: Vec<Decoration>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
}

impl DecoratedGraph {
    pub fn new(vertices: usize, edges: Vec<[usize; 2]>, beta: Vec<Decoration>) -> Result<Self> {
        let g = Self {
            vertices,
            edges,
            beta,
            alpha: None,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_alpha(mut self, alpha: Vec<f64>) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.edges.len() != self.beta.len() {
            return Err(Error::LengthMismatch {
                left: self.edges.len(),
                right: self.beta.len(),
            });
        }
        for e in &self.edges {
            for &v in e {
                if v >= self.vertices {
                    return Err(Error::IndexOutOfRange {
                        index: v,
                        dim: self.vertices,
                    });
                }
            }
        }
        self.beta.iter().try_for_each(Decoration::validate)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let g: Self = serde_json::from_str(s)?;
        g.validate()?;
        Ok(g)
    }

    /// Disjoint union; vertices of `other` are shifted past those of `self`.
    pub fn disjoint_union(&self, other: &Self) -> Self {
        let shift = self.vertices;
        let mut edges = self.edges.clone();
        edges.extend(other.edges.iter().map(|[a, b]| [a + shift, b + shift]));
        let mut beta = self.beta.clone();
        beta.extend(other.beta.iter().cloned());
        Self {
            vertices: self.vertices + other.vertices,
            edges,
            beta,
            alpha: None,
        }
    }
}

/// `⟨cell(x, y), β⟩` for every ground pair.
fn edge_tables(g: &DecoratedGraph, w: &StepPVariable) -> Result<Vec<Vec<f64>>> {
    g.beta
        .iter()
        .map(|b| w.cells().iter().map(|c| b.integrate(c)).collect())
        .collect()
}

/// `n^{-|V|} Σ_{x: V → [n]} Π_{(a,b) ∈ E} ⟨cell(x_a, x_b), β_ab⟩`.
pub fn hom_density(g: &DecoratedGraph, w: &StepPVariable) -> Result<f64> {
    g.validate()?;
    let n = w.n();
    let v = g.vertices;
    budget::check("vertex maps", budget::pow_count(n, v), budget::HOM_MAPS)?;
    let tables = edge_tables(g, w)?;
    if v == 0 {
        return Ok(1.0);
    }
    let head = v.min(2);
    let heads = budget::pow_count(n, head) as usize;
    let total: f64 = (0..heads)
        .into_par_iter()
        .map(|h| {
            let mut x = vec![0usize; v];
            let mut rest = h;
            for slot in x.iter_mut().take(head) {
                *slot = rest % n;
                rest /= n;
            }
            let mut sum = 0.0;
            loop {
                let mut prod = 1.0;
                for (e, t) in g.edges.iter().zip(&tables) {
                    prod *= t[x[e[0]] * n + x[e[1]]];
                    if prod == 0.0 {
                        break;
                    }
                }
                sum += prod;
                // Odometer over the tail vertices.
                let mut i = head;
                loop {
                    if i == v {
                        return sum;
                    }
                    x[i] += 1;
                    if x[i] < n {
                        break;
                    }
                    x[i] = 0;
                    i += 1;
                }
            }
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    Ok(total / budget::pow_count(n, v))
}

/// Overlay value with the realized cell sizes.
#[derive(Clone, Debug, Serialize)]
pub struct OverlayResult {
    pub bounds: Bounds,
    /// Cell sizes realizing the vertex weights on the ground set.
    pub sizes: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OverlayStrategy {
    Exhaustive,
    Local { restarts: usize, seed: u64 },
}

/// Rounds `alpha · n` to integer sizes summing to `n` by largest remainders.
pub fn realize_sizes(alpha: &[f64], n: usize) -> Result<Vec<usize>> {
    if alpha.is_empty() || alpha.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
        return Err(invalid("vertex weights must be nonnegative"));
    }
    let s: f64 = alpha.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("vertex weights sum to {s}, not 1")));
    }
    let exact: Vec<f64> = alpha.iter().map(|a| a * n as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..alpha.len()).collect();
    order.sort_by(|&a, &b| {
        (exact[b] - exact[b].floor())
            .total_cmp(&(exact[a] - exact[a].floor()))
            .then(a.cmp(&b))
    });
    let missing = n - sizes.iter().sum::<usize>();
    for &i in order.iter().take(missing) {
        sizes[i] += 1;
    }
    Ok(sizes)
}

fn multinomial(n: usize, sizes: &[usize]) -> f64 {
    budget::factorial(n) / sizes.iter().map(|&s| budget::factorial(s)).product::<f64>()
}

fn overlay_value(g: &DecoratedGraph, tables: &[Vec<f64>], assign: &[usize], n: usize) -> f64 {
    let mut total = 0.0;
    for (e, t) in g.edges.iter().zip(tables) {
        for x in (0..n).filter(|&x| assign[x] == e[0]) {
            for y in (0..n).filter(|&y| assign[y] == e[1]) {
                total += t[x * n + y];
            }
        }
    }
    total / (n * n) as f64
}

fn enumerate_sized(sizes: &mut [usize], assign: &mut Vec<usize>, n: usize, emit: &mut dyn FnMut(&[usize])) {
    if assign.len() == n {
        emit(assign);
        return;
    }
    for c in 0..sizes.len() {
        if sizes[c] > 0 {
            sizes[c] -= 1;
            assign.push(c);
            enumerate_sized(sizes, assign, n, emit);
            assign.pop();
            sizes[c] += 1;
        }
    }
}

/// `sup Σ_{(i,j) ∈ E} ⟨w(S_i × S_j; ·), β_ij⟩` over partitions of the ground
/// set with `|S_i|` realizing the vertex weights of `g`.
///
/// Local search swaps points between cells and yields a lower bound; its
/// upper bound charges every edge its largest cell integral.
pub fn overlay(w: &StepPVariable, g: &DecoratedGraph, strategy: &OverlayStrategy) -> Result<OverlayResult> {
    g.validate()?;
    let n = w.n();
    let alpha = g
        .alpha
        .as_ref()
        .ok_or_else(|| invalid("overlay needs vertex weights"))?;
    if alpha.len() != g.vertices {
        return Err(Error::LengthMismatch {
            left: g.vertices,
            right: alpha.len(),
        });
    }
    let sizes = realize_sizes(alpha, n)?;
    let tables = edge_tables(g, w)?;
    let bounds = match *strategy {
        OverlayStrategy::Exhaustive => {
            budget::check(
                "size-constrained partitions",
                multinomial(n, &sizes),
                budget::PARTITIONS,
            )?;
            let mut best = f64::NEG_INFINITY;
            let mut remaining = sizes.clone();
            enumerate_sized(&mut remaining, &mut Vec::with_capacity(n), n, &mut |a| {
                best = best.max(overlay_value(g, &tables, a, n));
            });
            Bounds::exact(best)
        }
        OverlayStrategy::Local { restarts, seed } => {
            let lower = (0..restarts.max(1))
                .into_par_iter()
                .map(|r| {
                    let mut rng = seed::stream(seed, seed::stream_id(TAG_OVERLAY, r as u64));
                    let mut assign: Vec<usize> = sizes
                        .iter()
                        .enumerate()
                        .flat_map(|(c, &s)| std::iter::repeat_n(c, s))
                        .collect();
                    assign.shuffle(&mut rng);
                    let mut cur = overlay_value(g, &tables, &assign, n);
                    for _ in 0..MOVES_PER_POINT * n {
                        let (x, y) = (rng.random_range(0..n), rng.random_range(0..n));
                        if assign[x] == assign[y] {
                            continue;
                        }
                        assign.swap(x, y);
                        let v = overlay_value(g, &tables, &assign, n);
                        if v > cur + 1e-15 {
                            cur = v;
                        } else {
                            assign.swap(x, y);
                        }
                    }
                    cur
                })
                .reduce(|| f64::NEG_INFINITY, f64::max);
            let upper: f64 = g
                .edges
                .iter()
                .zip(&tables)
                .map(|(e, t)| {
                    let top = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    (sizes[e[0]] * sizes[e[1]]) as f64 / (n * n) as f64 * top
                })
                .sum();
            Bounds::new(lower, upper, None)
        }
    };
    Ok(OverlayResult { bounds, sizes })
}
