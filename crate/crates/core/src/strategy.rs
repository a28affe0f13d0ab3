//! Search strategies over partitions and the shared local search.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error};
use crate::partition::FunctionPartition;
use crate::seed;

/// How a partition family is explored.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    Exhaustive,
    /// `samples` uniformly random labeled partitions.
    Random {
        samples: usize,
        seed: u64,
    },
    /// `restarts` hill climbs from random starts.
    Local {
        restarts: usize,
        seed: u64,
    },
}

/// Default number of restarts for local search.
pub const LOCAL_RESTARTS: usize = 8;
/// Moves per restart, per ground point.
pub const MOVES_PER_POINT: usize = 200;

impl Strategy {
    pub fn is_exhaustive(&self) -> bool {
        matches!(self, Strategy::Exhaustive)
    }

    pub fn seed(&self) -> u64 {
        match *self {
            Strategy::Exhaustive => 0,
            Strategy::Random { seed, .. } | Strategy::Local { seed, .. } => seed,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            Strategy::Exhaustive => self,
            Strategy::Random { samples, .. } => Strategy::Random { samples, seed },
            Strategy::Local { restarts, .. } => Strategy::Local { restarts, seed },
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Exhaustive => write!(f, "exhaustive"),
            Strategy::Random { samples, .. } => write!(f, "random:{samples}"),
            Strategy::Local { restarts, .. } => write!(f, "local:{restarts}"),
        }
    }
}

/// Parses `exhaustive`, `random:M`, `local:M` or `local`; the seed is set to 0.
impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, raw) = match s.split_once(':') {
            Some((a, b)) => (a, Some(b)),
            None => (s, None),
        };
        let count = |default: usize| -> Result<usize, Error> {
            match raw {
                None => Ok(default),
                Some(c) => c
                    .trim()
                    .parse::<usize>()
                    .ok()
                    .filter(|&m| m > 0)
                    .ok_or_else(|| invalid(format!("bad count in strategy {s:?}"))),
            }
        };
        match name.trim() {
            "exhaustive" if raw.is_none() => Ok(Strategy::Exhaustive),
            "random" => Ok(Strategy::Random {
                samples: count(64)?,
                seed: 0,
            }),
            "local" => Ok(Strategy::Local {
                restarts: count(LOCAL_RESTARTS)?,
                seed: 0,
            }),
            _ => Err(invalid(format!("unknown strategy {s:?}"))),
        }
    }
}

/// Exact enumeration or seeded heuristic search over relabelings and subsets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutMode {
    Exhaustive,
    Heuristic { restarts: usize, seed: u64 },
}

impl CutMode {
    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            CutMode::Exhaustive => self,
            CutMode::Heuristic { restarts, .. } => CutMode::Heuristic { restarts, seed },
        }
    }
}

/// Parses `exhaustive`, `heuristic` or `heuristic:R`; the seed is set to 0.
impl FromStr for CutMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().split_once(':') {
            None if s.trim() == "exhaustive" => Ok(CutMode::Exhaustive),
            None if s.trim() == "heuristic" => Ok(CutMode::Heuristic {
                restarts: LOCAL_RESTARTS,
                seed: 0,
            }),
            Some(("heuristic", r)) => r
                .trim()
                .parse::<usize>()
                .ok()
                .filter(|&r| r > 0)
                .map(|restarts| CutMode::Heuristic { restarts, seed: 0 })
                .ok_or_else(|| invalid(format!("bad restart count in mode {s:?}"))),
            _ => Err(invalid(format!("unknown mode {s:?}"))),
        }
    }
}

/// A two-sided enclosure with an optional uncertified point estimate inside it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<f64>,
}

impl Bounds {
    pub fn exact(v: f64) -> Self {
        Self {
            lower: v,
            upper: v,
            estimate: Some(v),
        }
    }

    pub fn new(lower: f64, upper: f64, estimate: Option<f64>) -> Self {
        let upper = upper.max(lower);
        Self {
            lower,
            upper,
            estimate: estimate.map(|e| e.clamp(lower, upper)),
        }
    }

    pub fn is_exact(&self) -> bool {
        self.lower == self.upper
    }
}

/// First-improvement hill climb over single-point cell reassignments,
/// maximizing `objective`. Stops at a local optimum or after `max_evals`
/// objective evaluations.
pub fn hill_climb(
    start: FunctionPartition,
    max_evals: usize,
    rng: &mut impl Rng,
    objective: &(impl Fn(&FunctionPartition) -> f64 + ?Sized),
) -> (FunctionPartition, f64) {
    let (n, k) = (start.n(), start.k());
    let mut best = start;
    let mut best_val = objective(&best);
    let mut evals = 1;
    if k < 2 {
        return (best, best_val);
    }
    let mut order: Vec<usize> = (0..n).collect();
    loop {
        order.shuffle(rng);
        let mut improved = false;
        'sweep: for &x in &order {
            let current = best.cell_of(x);
            let shift = rng.random_range(1..k);
            for step in 0..k - 1 {
                if evals >= max_evals {
                    break 'sweep;
                }
                let c = (current + shift + step) % k;
                if c == current {
                    continue;
                }
                let mut cand = best.clone();
                cand.set(x, c);
                let v = objective(&cand);
                evals += 1;
                if v > best_val + 1e-15 {
                    best = cand;
                    best_val = v;
                    improved = true;
                    continue 'sweep;
                }
            }
        }
        if !improved || evals >= max_evals {
            return (best, best_val);
        }
    }
}

/// Runs `restarts` independent hill climbs in parallel from random starts and
/// returns the best result (ties broken by restart index).
pub fn multi_start(
    n: usize,
    k: usize,
    restarts: usize,
    seed: u64,
    tag: u32,
    objective: &(impl Fn(&FunctionPartition) -> f64 + Sync + ?Sized),
) -> (FunctionPartition, f64) {
    let results: Vec<(FunctionPartition, f64)> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = seed::stream(seed, seed::stream_id(tag, r as u64));
            let start = FunctionPartition::random(n, k, &mut rng);
            hill_climb(start, MOVES_PER_POINT * n.max(1), &mut rng, objective)
        })
        .collect();
    results
        .into_iter()
        .reduce(|a, b| if b.1 > a.1 { b } else { a })
        .expect("at least one restart")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_strategies() {
        assert_eq!("exhaustive".parse::<Strategy>().unwrap(), Strategy::Exhaustive);
        assert_eq!(
            "random:12".parse::<Strategy>().unwrap(),
            Strategy::Random { samples: 12, seed: 0 }
        );
        assert_eq!(
            "local:3".parse::<Strategy>().unwrap().with_seed(9),
            Strategy::Local { restarts: 3, seed: 9 }
        );
        assert!("random:0".parse::<Strategy>().is_err());
        assert!("greedy".parse::<Strategy>().is_err());
        assert_eq!(
            "heuristic:5".parse::<CutMode>().unwrap(),
            CutMode::Heuristic { restarts: 5, seed: 0 }
        );
        assert_eq!("exhaustive".parse::<CutMode>().unwrap(), CutMode::Exhaustive);
    }

    #[test]
    fn hill_climb_finds_separable_optimum() {
        let target = [0, 1, 1, 0, 1, 0];
        let obj = |p: &FunctionPartition| p.assign().iter().zip(&target).filter(|(a, b)| a == b).count() as f64;
        let (_, v) = multi_start(6, 2, 4, 3, 0, &obj);
        assert_eq!(v, 6.0);
    }
}
