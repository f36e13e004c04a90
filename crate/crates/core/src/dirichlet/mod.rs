//! Bridge kernel `W(t ^ s) - W(t) W(s) / W(1)` and its Green operator on L2(V).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{AtomicMeasure, Closure};
use crate::spectrum::Spectrum;
use crate::sum::{compensated_sum, CompensatedSum};

#[derive(Debug, Clone)]
pub struct BridgeKernel {
    w: Arc<AtomicMeasure>,
    w_total: f64,
}

impl BridgeKernel {
    pub fn new(w: Arc<AtomicMeasure>) -> Result<Self> {
        let w_total = w.total_mass();
        if !(w_total > 0.0) {
            return Err(Error::EmptyMeasure);
        }
        Ok(Self { w, w_total })
    }

    pub fn w_total(&self) -> f64 {
        self.w_total
    }

    /// `W(t)` and `W(1) - W(t)`, the latter summed directly to avoid cancellation.
    fn split(&self, t: f64) -> (f64, f64) {
        let below = self.w.value(t);
        let above = self.w.interval_mass(t, 1.0, Closure::LeftOpenRightClosed).unwrap_or(0.0);
        (below, above)
    }

    /// Evaluated as `W(lo) (W(1) - W(hi)) / W(1)`, which is the same expression
    /// without the cancellation.
    pub fn eval(&self, t: f64, s: f64) -> f64 {
        let (lo, hi) = if t <= s { (t, s) } else { (s, t) };
        let (a, _) = self.split(lo);
        let (_, b) = self.split(hi);
        a * b / self.w_total
    }
}

pub fn bridge_kernel(k: &BridgeKernel, t: f64, s: f64) -> f64 {
    k.eval(t, s)
}

fn factors(k: &BridgeKernel, v: &AtomicMeasure) -> (Vec<f64>, Vec<f64>) {
    v.positions().iter().map(|&y| k.split(y)).unzip()
}

/// Dense kernel matrix at the V atoms (masses not included).
pub fn green_matrix(k: &BridgeKernel, v: &AtomicMeasure) -> Vec<f64> {
    let (a, b) = factors(k, v);
    let n = a.len();
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
            m[i * n + j] = a[lo] * b[hi] / k.w_total;
        }
    }
    m
}

/// `(Kf)(y_j) = sum_l kernel(y_j, y_l) f_l v_l`, in O(N) via the rank-one
/// structure of the kernel on each side of the diagonal.
pub fn green_apply(k: &BridgeKernel, v: &AtomicMeasure, f: &[f64]) -> Result<Vec<f64>> {
    let n = v.len();
    if f.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: f.len() });
    }
    let (a, b) = factors(k, v);
    let m = v.masses();
    // left[j] = sum_{l <= j} a_l f_l v_l ; right[j] = sum_{l > j} b_l f_l v_l
    let mut left = vec![0.0; n];
    let mut acc = CompensatedSum::new();
    for j in 0..n {
        acc.add(a[j] * f[j] * m[j]);
        left[j] = acc.value();
    }
    let mut right = vec![0.0; n];
    let mut acc = CompensatedSum::new();
    for j in (0..n).rev() {
        right[j] = acc.value();
        acc.add(b[j] * f[j] * m[j]);
    }
    Ok((0..n).map(|j| (b[j] * left[j] + a[j] * right[j]) / k.w_total).collect())
}

/// `sum_j kernel(y_j, y_j) v_j`
pub fn trace(k: &BridgeKernel, v: &AtomicMeasure) -> f64 {
    compensated_sum(v.positions().iter().zip(v.masses()).map(|(&y, &m)| k.eval(y, y) * m))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub trace_integral: f64,
    pub partial_eigen_sum: f64,
    pub relative_gap: f64,
}

pub fn trace_report(k: &BridgeKernel, v: &AtomicMeasure, dirichlet_eigenvalues: &[f64]) -> TraceReport {
    let tr = trace(k, v);
    let sum = compensated_sum(dirichlet_eigenvalues.iter().map(|l| 1.0 / l));
    TraceReport { trace_integral: tr, partial_eigen_sum: sum, relative_gap: (tr - sum).abs() / tr.abs() }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinMaxRow {
    pub k: usize,
    pub periodic: f64,
    pub dirichlet: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinMaxReport {
    pub rows: Vec<MinMaxRow>,
    pub all_hold: bool,
}

/// Relative slack allowed when the two eigenvalues coincide.
pub const MINMAX_SLACK: f64 = 1e-10;

/// Compares the k-th smallest periodic eigenvalue (counting `lambda_0 = 0`)
/// with the k-th smallest Dirichlet eigenvalue.
pub fn minmax_check(periodic: &Spectrum, dirich: &Spectrum) -> Result<MinMaxReport> {
    if periodic.measures_digest != dirich.measures_digest {
        return Err(Error::MeasureMismatch);
    }
    let p = periodic.eigenvalues();
    let d = dirich.eigenvalues();
    let rows: Vec<MinMaxRow> = p
        .iter()
        .zip(&d)
        .enumerate()
        .map(|(k, (&lp, &ld))| MinMaxRow { k: k + 1, periodic: lp, dirichlet: ld, holds: lp <= ld * (1.0 + MINMAX_SLACK) })
        .collect();
    let all_hold = rows.iter().all(|r| r.holds);
    Ok(MinMaxReport { rows, all_hold })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{compile, Chirality, MeasureSpec};

    #[test]
    fn classical_values() {
        let w = Arc::new(compile(&MeasureSpec::uniform(Chirality::RightContinuous), 64).unwrap());
        let k = BridgeKernel::new(w.clone()).unwrap();
        assert_eq!(k.eval(0.0, 0.3), 0.0);
        // W(1/2) = 1/2 exactly on a 64-cell grid
        assert!((k.eval(0.5, 0.5) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn apply_matches_dense() {
        let w = Arc::new(
            AtomicMeasure::from_atoms([(0.1, 0.3), (0.45, 0.2), (0.8, 0.6)], Chirality::RightContinuous).unwrap(),
        );
        let v = AtomicMeasure::from_atoms([(0.2, 0.5), (0.5, 0.25), (0.9, 0.4)], Chirality::LeftContinuous).unwrap();
        let k = BridgeKernel::new(w).unwrap();
        let f = [1.0, -2.0, 0.5];
        let fast = green_apply(&k, &v, &f).unwrap();
        let m = green_matrix(&k, &v);
        for i in 0..3 {
            let slow: f64 = (0..3).map(|j| m[i * 3 + j] * f[j] * v.masses()[j]).sum();
            assert!((fast[i] - slow).abs() < 1e-15);
        }
        assert_eq!(green_apply(&k, &v, &[0.0; 3]).unwrap(), vec![0.0; 3]);
        assert!(green_apply(&k, &v, &[0.0; 2]).is_err());
    }
}
