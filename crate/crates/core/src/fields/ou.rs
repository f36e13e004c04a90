//! Spectral Ornstein-Uhlenbeck simulation of `dY = alpha Delta Y dt + beta dN`.
//!
//! On mode `i` the equation is `dY_i = -alpha lambda_i Y_i dt + beta dN_i` with
//! `d<N_i>_t = lambda_i dt`, which has an exact Gaussian transition. The zero
//! mode has no noise and no drift.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{is_zero_mode, normal, stream_rng};
use crate::error::{Error, Result};
use crate::spectrum::Spectrum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuConfig {
    pub alpha: f64,
    pub beta: f64,
    pub dt: f64,
    pub t_end: f64,
    pub modes: usize,
    pub paths: usize,
    pub seed: u64,
    /// starting mode coefficients, zero when empty
    #[serde(default)]
    pub initial: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OuEnsemble {
    pub alpha: f64,
    pub beta: f64,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub lambdas: Vec<f64>,
    pub times: Vec<f64>,
    /// `paths[p][i][j]`: path p, mode i, time j
    pub paths: Vec<Vec<Vec<f64>>>,
}

impl OuEnsemble {
    /// Values of one mode at one time step across paths.
    pub fn slice(&self, mode: usize, step: usize) -> Vec<f64> {
        self.paths.iter().map(|p| p[mode][step]).collect()
    }
}

/// Decay factor and noise standard deviation of one step.
fn transition(lambda: f64, alpha: f64, beta: f64, dt: f64, zero: bool) -> (f64, f64) {
    if zero {
        return (1.0, 0.0);
    }
    let r = alpha * lambda;
    let decay = (-r * dt).exp();
    // lambda (1 - e^{-2 r dt}) / (2 r), written with exp_m1 for small r dt
    let var = -(-2.0 * r * dt).exp_m1() / (2.0 * alpha);
    (decay, beta * var.sqrt())
}

fn steps(dt: f64, t_end: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if !(t_end >= dt && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!("T={t_end} is shorter than dt={dt}")));
    }
    Ok((t_end / dt * (1.0 + 1e-12)).floor() as usize)
}

/// Exact mean and variance after `n` steps of size `dt` from `y0`.
pub fn ou_moments(lambda: f64, alpha: f64, beta: f64, y0: f64, dt: f64, n: usize) -> (f64, f64) {
    let (decay, sd) = transition(lambda, alpha, beta, dt, lambda == 0.0);
    let (mut m, mut v) = (y0, 0.0);
    for _ in 0..n {
        m *= decay;
        v = decay * decay * v + sd * sd;
    }
    (m, v)
}

/// Simulate the first `modes` modes; path `p`, mode `i` reads stream `p * 2^32 + i`.
pub fn evolve_parabolic(spec: &Spectrum, cfg: &OuConfig) -> Result<OuEnsemble> {
    if !(cfg.alpha > 0.0 && cfg.beta > 0.0) {
        return Err(Error::InvalidArgument("alpha and beta must be positive".into()));
    }
    if cfg.modes == 0 || cfg.paths == 0 {
        return Err(Error::InvalidArgument("modes and paths must be positive".into()));
    }
    if cfg.modes > spec.len() {
        return Err(Error::ScanExhausted { found: spec.len(), requested: cfg.modes });
    }
    if !cfg.initial.is_empty() && cfg.initial.len() != cfg.modes {
        return Err(Error::LengthMismatch { expected: cfg.modes, got: cfg.initial.len() });
    }
    let n = steps(cfg.dt, cfg.t_end)?;
    let lambdas: Vec<f64> = spec.pairs[..cfg.modes].iter().map(|p| p.lambda).collect();
    let trans: Vec<(f64, f64)> = lambdas
        .iter()
        .map(|&l| transition(l, cfg.alpha, cfg.beta, cfg.dt, is_zero_mode(spec, l)))
        .collect();
    let paths = (0..cfg.paths)
        .into_par_iter()
        .map(|p| {
            trans
                .iter()
                .enumerate()
                .map(|(i, &(decay, sd))| {
                    let mut rng = stream_rng(cfg.seed, ((p as u64) << 32) | i as u64);
                    let mut y = cfg.initial.get(i).copied().unwrap_or(0.0);
                    let mut path = Vec::with_capacity(n + 1);
                    path.push(y);
                    for _ in 0..n {
                        if sd > 0.0 {
                            y = decay * y + sd * normal(&mut rng);
                        }
                        path.push(y);
                    }
                    path
                })
                .collect()
        })
        .collect();
    Ok(OuEnsemble {
        alpha: cfg.alpha,
        beta: cfg.beta,
        dt: cfg.dt,
        t_end: cfg.t_end,
        seed: cfg.seed,
        lambdas,
        times: (0..=n).map(|j| j as f64 * cfg.dt).collect(),
        paths,
    })
}
