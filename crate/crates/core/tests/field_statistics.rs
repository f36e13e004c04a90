use std::sync::Arc;

use kf_core::dirichlet::BridgeKernel;
use kf_core::fields::{
    bridge_ensemble, ou_moments, sample_w_brownian_stream, sample_whittle_matern, FieldConfig,
};
use kf_core::kernels::KernelTable;
use kf_core::measure::{compile, AtomicMeasure, Chirality, MeasureSpec};
use kf_core::spectrum::{coefficients, solve_spectrum, BoundaryCondition};

const M: usize = 4000;

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Sample variance of a Gaussian is within `k` standard errors of `target`.
fn variance_ok(var: f64, target: f64, k: f64) -> bool {
    (var - target).abs() <= k * target * (2.0 / M as f64).sqrt()
}

fn uneven_w() -> AtomicMeasure {
    AtomicMeasure::from_atoms(vec![(0.1, 0.3), (0.4, 1.2), (0.75, 0.05), (1.0, 0.45)], Chirality::RightContinuous).unwrap()
}

#[test]
fn brownian_endpoint_variance_is_total_mass() {
    let w = uneven_w();
    let ends: Vec<f64> = (0..M as u64).map(|m| sample_w_brownian_stream(&w, 3, m).eval(1.0)).collect();
    let (mean, var) = mean_var(&ends);
    assert!(mean.abs() < 4.0 * (w.total_mass() / M as f64).sqrt(), "mean {mean}");
    assert!(variance_ok(var, w.total_mass(), 4.0), "var {var} vs {}", w.total_mass());
}

#[test]
fn bridge_variance_matches_kernel_diagonal() {
    let w = Arc::new(uneven_w());
    let k = BridgeKernel::new(w.clone()).unwrap();
    let points = [0.2, 0.5, 0.9];
    let samples = bridge_ensemble(&w, &points, M, 17);
    for (j, &t) in points.iter().enumerate() {
        let col: Vec<f64> = samples.iter().map(|s| s[j]).collect();
        let (_, var) = mean_var(&col);
        assert!(variance_ok(var, k.eval(t, t), 4.0), "t={t}: {var} vs {}", k.eval(t, t));
    }
    // covariance between two points
    let (a, b) = (0, 2);
    let cov = samples.iter().map(|s| s[a] * s[b]).sum::<f64>() / M as f64;
    let target = k.eval(points[a], points[b]);
    assert!((cov - target).abs() < 0.02, "cov {cov} vs {target}");
}

#[test]
fn neighbouring_streams_are_uncorrelated() {
    let w = uneven_w();
    let xs: Vec<f64> = (0..=M as u64).map(|m| sample_w_brownian_stream(&w, 9, m).eval(1.0)).collect();
    let (mean, var) = mean_var(&xs);
    let lag1 = xs.windows(2).map(|p| (p[0] - mean) * (p[1] - mean)).sum::<f64>() / (M as f64 * var);
    assert!(lag1.abs() < 4.0 / (M as f64).sqrt(), "lag-1 correlation {lag1}");
}

#[test]
fn whittle_matern_mode_variances() {
    let w = Arc::new(compile(&MeasureSpec::uniform(Chirality::RightContinuous), 64).unwrap());
    let v = Arc::new(compile(&MeasureSpec::uniform(Chirality::LeftContinuous), 64).unwrap());
    let t = KernelTable::build(w, v, 40).unwrap();
    let sp = solve_spectrum(&t, BoundaryCondition::Periodic, 6).unwrap();
    let cfg = FieldConfig { kappa: 1.5, beta: 0.75, modes: 6, samples: M, seed: 21 };
    let field = sample_whittle_matern(&sp, &cfg).unwrap();
    let coeffs: Vec<Vec<f64>> = field.values.iter().map(|u| coefficients(&sp, u).unwrap()).collect();
    for i in 0..cfg.modes {
        let col: Vec<f64> = coeffs.iter().map(|c| c[i]).collect();
        let (_, var) = mean_var(&col);
        let target = field.mode_weights[i] * field.mode_weights[i];
        assert!(variance_ok(var, target, 4.0), "mode {i}: {var} vs {target}");
    }
    assert!(field.validity_flag);
    assert!(field.tail_mass > 0.0);
}

#[test]
fn ou_moments_reach_stationarity() {
    let (lambda, alpha, beta) = (4.0, 1.0, 0.5);
    let (mean, var) = ou_moments(lambda, alpha, beta, 2.0, 0.05, 2000);
    assert!(mean.abs() < 1e-12);
    // rate alpha lambda, noise beta sqrt(lambda): stationary variance beta^2 / (2 alpha)
    assert!((var - beta * beta / (2.0 * alpha)).abs() < 1e-12, "{var}");
}
