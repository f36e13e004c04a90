#![allow(dead_code)]

use std::sync::Arc;

use kf_core::measure::{AtomicMeasure, Chirality};
use rand::Rng;

/// Random atomic pair with `n` V atoms and at least one W atom in every gap
/// between consecutive V atoms. Some W atoms sit exactly on V atoms.
pub fn random_pair<R: Rng>(rng: &mut R, n: usize) -> (Arc<AtomicMeasure>, Arc<AtomicMeasure>) {
    let mut y: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    y.sort_by(f64::total_cmp);
    y.dedup();
    let v_atoms: Vec<(f64, f64)> = y.iter().map(|&p| (p, rng.random_range(0.05..1.0))).collect();
    let mut w_atoms = Vec::new();
    for j in 0..y.len() {
        let a = y[j];
        let b = if j + 1 < y.len() { y[j + 1] } else { y[0] + 1.0 };
        let k = rng.random_range(1..=2);
        for _ in 0..k {
            let p = if rng.random_bool(0.2) { b } else { a + (b - a) * rng.random_range(0.01..0.99) };
            w_atoms.push((p.rem_euclid(1.0), rng.random_range(0.05..1.0)));
        }
    }
    let w = AtomicMeasure::from_atoms(w_atoms, Chirality::RightContinuous).unwrap();
    let v = AtomicMeasure::from_atoms(v_atoms, Chirality::LeftContinuous).unwrap();
    (Arc::new(w), Arc::new(v))
}
