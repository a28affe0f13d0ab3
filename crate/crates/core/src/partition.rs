//! Function partitions and test vectors over a finite ground set `[n]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Assignment of ground points to `k` labeled cells (labels `0..k`, cells may be empty).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FunctionPartition {
    k: usize,
    assign: Vec<usize>,
}

impl FunctionPartition {
    pub fn new(k: usize, assign: Vec<usize>) -> Result<Self> {
        if k == 0 {
            return Err(invalid("a partition needs at least one cell"));
        }
        if let Some(&bad) = assign.iter().find(|&&c| c >= k) {
            return Err(invalid(format!("cell label {bad} out of range for k = {k}")));
        }
        Ok(Self { k, assign })
    }

    /// Every point in its own cell.
    pub fn singletons(n: usize) -> Self {
        Self {
            k: n.max(1),
            assign: (0..n).collect(),
        }
    }

    pub fn one_class(n: usize) -> Self {
        Self {
            k: 1,
            assign: vec![0; n],
        }
    }

    pub fn random(n: usize, k: usize, rng: &mut impl Rng) -> Self {
        Self {
            k,
            assign: (0..n).map(|_| rng.random_range(0..k)).collect(),
        }
    }

    /// The `index`-th labeled partition in base-`k` order (point 0 least significant).
    pub fn from_index(n: usize, k: usize, mut index: u64) -> Self {
        let assign = (0..n)
            .map(|_| {
                let c = (index % k as u64) as usize;
                index /= k as u64;
                c
            })
            .collect();
        Self { k, assign }
    }

    pub fn n(&self) -> usize {
        self.assign.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assign(&self) -> &[usize] {
        &self.assign
    }

    pub fn cell_of(&self, x: usize) -> usize {
        self.assign[x]
    }

    pub fn set(&mut self, x: usize, cell: usize) {
        assert!(cell < self.k);
        self.assign[x] = cell;
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &c in &self.assign {
            s[c] += 1;
        }
        s
    }

    /// Members of every cell, in increasing order.
    pub fn cells(&self) -> Vec<Vec<usize>> {
        let mut cells = vec![Vec::new(); self.k];
        for (x, &c) in self.assign.iter().enumerate() {
            cells[c].push(x);
        }
        cells
    }

    /// Indicator functions `1_{P_1}, …, 1_{P_k}`.
    pub fn indicators(&self) -> TestVector {
        let funcs = (0..self.k)
            .map(|c| self.assign.iter().map(|&a| if a == c { 1.0 } else { 0.0 }).collect())
            .collect();
        TestVector { n: self.n(), funcs }
    }

    /// Partition of the relabeled ground: point `x` goes where `p(x)` went.
    pub fn pulled_back(&self, p: &[usize]) -> Self {
        Self {
            k: self.k,
            assign: p.iter().map(|&px| self.assign[px]).collect(),
        }
    }
}

/// `k` functions `[n] → [-1, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestVector {
    n: usize,
    funcs: Vec<Vec<f64>>,
}

impl TestVector {
    /// Values are clamped into `[-1, 1]`.
    pub fn new(funcs: Vec<Vec<f64>>) -> Result<Self> {
        let first = funcs
            .first()
            .ok_or_else(|| invalid("test vector needs at least one function"))?;
        let n = first.len();
        if let Some(f) = funcs.iter().find(|f| f.len() != n) {
            return Err(Error::LengthMismatch {
                left: n,
                right: f.len(),
            });
        }
        if funcs.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("test function values must be finite"));
        }
        let funcs = funcs
            .into_iter()
            .map(|f| f.into_iter().map(|v| v.clamp(-1.0, 1.0)).collect())
            .collect();
        Ok(Self { n, funcs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.funcs.len()
    }

    pub fn funcs(&self) -> &[Vec<f64>] {
        &self.funcs
    }

    pub fn value(&self, func: usize, x: usize) -> f64 {
        self.funcs[func][x]
    }
}

/// Number of labeled partitions `k^n`, saturating.
pub fn count_labeled(n: usize, k: usize) -> f64 {
    crate::budget::pow_count(k, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_enumeration_covers_all() {
        let all: std::collections::HashSet<_> = (0..9).map(|i| FunctionPartition::from_index(2, 3, i)).collect();
        assert_eq!(all.len(), 9);
    }

    #[test]
    fn indicators_sum_to_one() {
        let p = FunctionPartition::new(3, vec![0, 2, 2, 1]).unwrap();
        let t = p.indicators();
        for x in 0..4 {
            let s: f64 = (0..3).map(|c| t.value(c, x)).sum();
            assert_eq!(s, 1.0);
        }
        assert_eq!(p.sizes(), vec![1, 1, 2]);
        assert!(FunctionPartition::new(2, vec![0, 2]).is_err());
    }

    #[test]
    fn test_vector_clamps() {
        let t = TestVector::new(vec![vec![2.0, -3.0, 0.5]]).unwrap();
        assert_eq!(t.funcs()[0], vec![1.0, -1.0, 0.5]);
        assert!(TestVector::new(vec![vec![0.0], vec![0.0, 1.0]]).is_err());
    }
}
