//! Gaussian fields built from `W` and from a computed spectrum.
//!
//! Every draw comes from a ChaCha8 generator keyed by `(seed, stream)` and
//! consumed sequentially, so an ensemble is the same whatever the thread
//! schedule. Sample `m` of an ensemble uses stream `m`.

mod io;
mod ou;

pub use io::{read_binary, write_binary, write_csv, BINARY_MAGIC, BINARY_VERSION};
pub use ou::{evolve_parabolic, ou_moments, OuConfig, OuEnsemble};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::AtomicMeasure;
use crate::spectrum::{growth_from_spectrum, BoundaryCondition, Spectrum};
use crate::sum::CompensatedSum;

/// Generator for one stream of a seeded family.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// A path sampled at the W atoms; constant between atoms and 0 before the first.
#[derive(Debug, Clone, PartialEq)]
pub struct WPath {
    pub positions: Vec<f64>,
    pub values: Vec<f64>,
}

impl WPath {
    /// Right-continuous evaluation, `B(W(t))`.
    pub fn eval(&self, t: f64) -> f64 {
        match self.positions.partition_point(|&p| p <= t) {
            0 => 0.0,
            k => self.values[k - 1],
        }
    }
}

/// `B_W(t) = B(W(t))`: cumulative sums of centered Gaussians with the W masses as variances.
pub fn sample_w_brownian(w: &AtomicMeasure, seed: u64) -> WPath {
    sample_w_brownian_stream(w, seed, 0)
}

pub fn sample_w_brownian_stream(w: &AtomicMeasure, seed: u64, stream: u64) -> WPath {
    let mut rng = stream_rng(seed, stream);
    let mut acc = 0.0;
    let values = w
        .masses()
        .iter()
        .map(|m| {
            acc += m.sqrt() * normal(&mut rng);
            acc
        })
        .collect();
    WPath { positions: w.positions().to_vec(), values }
}

/// `B_{W,0}(t) = B_W(t) - W(t)/W(1) B_W(1)`, which vanishes at 0 and 1.
pub fn sample_bridge(w: &AtomicMeasure, seed: u64) -> WPath {
    sample_bridge_stream(w, seed, 0)
}

pub fn sample_bridge_stream(w: &AtomicMeasure, seed: u64, stream: u64) -> WPath {
    let mut path = sample_w_brownian_stream(w, seed, stream);
    let end = path.values.last().copied().unwrap_or(0.0);
    let total = w.total_mass();
    for (v, wt) in path.values.iter_mut().zip(w.values_at_atoms()) {
        *v -= wt / total * end;
    }
    path
}

/// `M` bridge paths evaluated at `points`, one stream per path.
pub fn bridge_ensemble(w: &AtomicMeasure, points: &[f64], samples: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..samples)
        .into_par_iter()
        .map(|m| {
            let p = sample_bridge_stream(w, seed, m as u64);
            points.iter().map(|&t| p.eval(t)).collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub kappa: f64,
    pub beta: f64,
    pub modes: usize,
    pub samples: usize,
    pub seed: u64,
}

impl FieldConfig {
    fn check(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidArgument(format!("kappa must be positive, got {}", self.kappa)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("beta must be positive, got {}", self.beta)));
        }
        if self.modes == 0 || self.samples == 0 {
            return Err(Error::InvalidArgument("modes and samples must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldSample {
    /// `samples x (V atom count)`
    pub values: Vec<Vec<f64>>,
    pub positions: Vec<f64>,
    /// `(kappa^2 + lambda_i)^-beta`
    pub mode_weights: Vec<f64>,
    pub seed: u64,
    /// `2 beta > rho_hat`; true when no growth estimate is available
    pub validity_flag: bool,
    pub rho_hat: Option<f64>,
    /// `sum_{i >= K} (kappa^2 + lambda_i)^(-2 beta)`: zero when every mode is
    /// kept, otherwise the bound from `lambda_n >= C n^(1/rho_hat)`
    pub tail_mass: f64,
}

pub fn mode_weights(spec: &Spectrum, kappa: f64, beta: f64, modes: usize) -> Vec<f64> {
    let k2 = kappa * kappa;
    spec.pairs[..modes.min(spec.len())].iter().map(|p| (k2 + p.lambda).powf(-beta)).collect()
}

/// Truncated covariance `sum_{i<K} w_i^2 nu_i(s) nu_i(t)` between V atoms `s` and `t`.
pub fn whittle_matern_covariance(spec: &Spectrum, kappa: f64, beta: f64, modes: usize, s: usize, t: usize) -> f64 {
    let w = mode_weights(spec, kappa, beta, modes);
    let mut acc = CompensatedSum::new();
    for (wi, p) in w.iter().zip(&spec.pairs) {
        acc.add(wi * wi * p.values[s] * p.values[t]);
    }
    acc.value()
}

fn tail_mass(spec: &Spectrum, cfg: &FieldConfig, rho: Option<(f64, f64)>) -> f64 {
    if cfg.modes >= spec.n_available {
        return 0.0;
    }
    let Some((rho, c)) = rho else { return f64::INFINITY };
    let p = 2.0 * cfg.beta;
    let q = p / rho;
    if q <= 1.0 {
        return f64::INFINITY;
    }
    // nonzero modes among the first K
    let n0 = spec.pairs[..cfg.modes].iter().filter(|p| p.lambda > 0.0).count().max(1) as f64;
    c.powf(-p) * n0.powf(1.0 - q) / (q - 1.0)
}

/// `u = sum_{i<K} xi_i (kappa^2 + lambda_i)^-beta nu_i` at the V atoms, `M` times.
pub fn sample_whittle_matern(spec: &Spectrum, cfg: &FieldConfig) -> Result<FieldSample> {
    cfg.check()?;
    if cfg.modes > spec.len() {
        return Err(Error::ScanExhausted { found: spec.len(), requested: cfg.modes });
    }
    let growth = growth_from_spectrum(spec).ok();
    let rho = growth.and_then(|g| Some((g.rho_fit?, g.fit_constant?)));
    let rho_hat = rho.map(|r| r.0);
    let weights = mode_weights(spec, cfg.kappa, cfg.beta, cfg.modes);
    let n = spec.v().len();
    let values = (0..cfg.samples)
        .into_par_iter()
        .map(|m| {
            let mut rng = stream_rng(cfg.seed, m as u64);
            let mut u = vec![CompensatedSum::new(); n];
            for (w, p) in weights.iter().zip(&spec.pairs) {
                let c = w * normal(&mut rng);
                for (acc, x) in u.iter_mut().zip(&p.values) {
                    acc.add(c * x);
                }
            }
            u.iter().map(|a| a.value()).collect()
        })
        .collect();
    Ok(FieldSample {
        values,
        positions: spec.v().positions().to_vec(),
        mode_weights: weights,
        seed: cfg.seed,
        validity_flag: rho_hat.is_none_or(|r| 2.0 * cfg.beta > r),
        rho_hat,
        tail_mass: tail_mass(spec, cfg, rho),
    })
}

/// Eigenvalues below this fraction of the largest count as the zero mode.
pub(crate) fn is_zero_mode(spec: &Spectrum, lambda: f64) -> bool {
    let top = spec.pairs.last().map_or(0.0, |p| p.lambda);
    spec.bc == BoundaryCondition::Periodic && lambda <= 1e-12 * top
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Chirality;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut a = stream_rng(7, 3);
        let mut b = stream_rng(7, 3);
        let mut c = stream_rng(7, 4);
        let (x, y, z) = (normal(&mut a), normal(&mut b), normal(&mut c));
        assert_eq!(x.to_bits(), y.to_bits());
        assert_ne!(x, z);
    }

    #[test]
    fn bridge_pinned_at_ends() {
        let w = AtomicMeasure::from_atoms([(0.2, 0.3), (0.6, 0.5), (0.0, 0.2)], Chirality::RightContinuous).unwrap();
        for s in 0..20 {
            let p = sample_bridge_stream(&w, 1, s);
            assert_eq!(p.eval(0.0), 0.0);
            assert_eq!(p.eval(1.0), 0.0);
        }
    }
}
