#![allow(dead_code)]

use graphlim::measures::DiscreteMeasure;
use graphlim::pvariable::{RealKernel, StepPVariable};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Probability measure on a coarse grid so that distances tie often.
pub fn measure(dim: usize, max_atoms: usize) -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::vec((prop::collection::vec(-4i32..=4, dim), 1u32..=8), 1..=max_atoms).prop_map(move |atoms| {
        let total: u32 = atoms.iter().map(|(_, w)| w).sum();
        let (coords, weights): (Vec<Vec<f64>>, Vec<f64>) = atoms
            .into_iter()
            .map(|(a, w)| (a.into_iter().map(|x| x as f64 / 4.0).collect(), w as f64 / total as f64))
            .unzip();
        DiscreteMeasure::new(dim, coords, weights).unwrap()
    })
}

pub fn measure_pair(max_atoms: usize) -> impl Strategy<Value = (DiscreteMeasure, DiscreteMeasure)> {
    (1usize..=3).prop_flat_map(move |d| (measure(d, max_atoms), measure(d, max_atoms)))
}

pub fn random_measure(rng: &mut impl Rng, dim: usize, max_atoms: usize) -> DiscreteMeasure {
    let m = rng.random_range(1..=max_atoms);
    let raw: Vec<f64> = (0..m).map(|_| rng.random_range(1..=8) as f64).collect();
    let total: f64 = raw.iter().sum();
    let atoms = (0..m)
        .map(|_| (0..dim).map(|_| rng.random_range(-4..=4) as f64 / 4.0).collect())
        .collect();
    DiscreteMeasure::new(dim, atoms, raw.iter().map(|w| w / total).collect()).unwrap()
}

/// Cell law on `{0, ½, 1}` with at most `atoms` atoms.
pub fn random_cell(rng: &mut impl Rng, atoms: usize) -> DiscreteMeasure {
    let m = rng.random_range(1..=atoms);
    let mut values = [0.0, 0.5, 1.0];
    values.shuffle(rng);
    let raw: Vec<f64> = (0..m).map(|_| rng.random_range(1..=4) as f64).collect();
    let total: f64 = raw.iter().sum();
    let pairs: Vec<(f64, f64)> = (0..m).map(|i| (values[i], raw[i] / total)).collect();
    DiscreteMeasure::from_pairs(&pairs).unwrap()
}

pub fn random_pvariable(rng: &mut impl Rng, n: usize, atoms: usize) -> StepPVariable {
    let cells = (0..n)
        .map(|_| (0..n).map(|_| random_cell(rng, atoms)).collect())
        .collect();
    StepPVariable::quantile_from_kernel(cells).unwrap()
}

pub fn random_01(rng: &mut impl Rng, n: usize) -> StepPVariable {
    let a: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect())
        .collect();
    StepPVariable::from_matrix(&a).unwrap()
}

pub fn random_kernel(rng: &mut impl Rng, n: usize) -> RealKernel {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| rng.random_range(-8..=8) as f64 / 4.0).collect())
        .collect();
    RealKernel::new(&rows).unwrap()
}

pub fn random_permutation(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

pub fn pvariable(max_n: usize, atoms: usize) -> impl Strategy<Value = StepPVariable> {
    (1..=max_n, any::<u64>()).prop_map(move |(n, s)| random_pvariable(&mut rng(s), n, atoms))
}
