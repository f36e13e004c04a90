//! Finite mass/conductance model of the operator on atomic data, solved densely.
//!
//! V atoms become sites with masses `v_j`. Consecutive sites are joined by
//! conductances `1 / dW((y_j, y_{j+1}])`. The eigenproblem `A f = lambda M f`
//! is symmetrized to `M^{-1/2} A M^{-1/2}` and diagonalized by Jacobi rotations.

mod fredholm;
mod jacobi;

pub use fredholm::{fredholm_polynomial, FredholmPolynomial};
pub use jacobi::{jacobi_eigen, SymmetricEigen, MAX_SWEEPS};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dirichlet::{green_matrix, BridgeKernel};
use crate::error::{Error, Result};
use crate::measure::{AtomicMeasure, Closure};
use crate::spectrum::{BoundaryCondition, Spectrum};
use crate::sum::CompensatedSum;

#[derive(Debug, Clone, PartialEq)]
pub struct CycleOperator {
    pub bc: BoundaryCondition,
    /// site masses
    pub v: Vec<f64>,
    /// `c[j]` couples site j to site j+1 (cyclically for periodic); for
    /// Dirichlet the path has `n - 1` internal edges
    pub c: Vec<f64>,
    /// Dirichlet only: conductances from the first and last site to the pinned origin
    pub boundary: (f64, f64),
    /// index into the V atoms of each site
    pub sites: Vec<usize>,
    w: Arc<AtomicMeasure>,
    v_measure: Arc<AtomicMeasure>,
}

fn conductance(mass: f64, from: f64, to: f64) -> Result<f64> {
    if mass > 0.0 {
        Ok(1.0 / mass)
    } else {
        Err(Error::ZeroGapMass { from, to })
    }
}

pub fn assemble_cycle(w: &Arc<AtomicMeasure>, v: &Arc<AtomicMeasure>, bc: BoundaryCondition) -> Result<CycleOperator> {
    let y = v.positions();
    let n = y.len();
    let wt = w.total_mass();
    let gap = |a: f64, b: f64| w.interval_mass(a, b, Closure::LeftOpenRightClosed);
    match bc {
        BoundaryCondition::Periodic => {
            let mut c = Vec::with_capacity(n);
            for j in 0..n {
                if j + 1 < n {
                    c.push(conductance(gap(y[j], y[j + 1])?, y[j], y[j + 1])?);
                } else {
                    let wrap = gap(y[n - 1], 1.0)? + gap(0.0, y[0])?;
                    c.push(conductance(wrap, y[n - 1], y[0])?);
                }
            }
            Ok(CycleOperator {
                bc,
                v: v.masses().to_vec(),
                c,
                boundary: (0.0, 0.0),
                sites: (0..n).collect(),
                w: w.clone(),
                v_measure: v.clone(),
            })
        }
        BoundaryCondition::Dirichlet => {
            let sites: Vec<usize> = (0..n).filter(|&j| w.value(y[j]) > 0.0 && gap(y[j], 1.0).unwrap() > 0.0).collect();
            if sites.is_empty() {
                return Err(Error::SingularOperator);
            }
            let mut c = Vec::with_capacity(sites.len());
            for pair in sites.windows(2) {
                let (a, b) = (y[pair[0]], y[pair[1]]);
                c.push(conductance(gap(a, b)?, a, b)?);
            }
            let first = y[sites[0]];
            let last = y[*sites.last().unwrap()];
            let boundary = (1.0 / w.value(first), 1.0 / gap(last, 1.0)?);
            let _ = wt;
            Ok(CycleOperator {
                bc,
                v: sites.iter().map(|&j| v.masses()[j]).collect(),
                c,
                boundary,
                sites,
                w: w.clone(),
                v_measure: v.clone(),
            })
        }
    }
}

impl CycleOperator {
    pub fn len(&self) -> usize {
        self.v.len()
    }
    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    /// Dense stiffness matrix `A`.
    pub fn stiffness(&self) -> Vec<f64> {
        let n = self.len();
        let mut a = vec![0.0; n * n];
        let mut edge = |i: usize, j: usize, c: f64| {
            if i == j {
                return;
            }
            a[i * n + i] += c;
            a[j * n + j] += c;
            a[i * n + j] -= c;
            a[j * n + i] -= c;
        };
        match self.bc {
            BoundaryCondition::Periodic => {
                for (j, &c) in self.c.iter().enumerate() {
                    edge(j, (j + 1) % n, c);
                }
            }
            BoundaryCondition::Dirichlet => {
                for (j, &c) in self.c.iter().enumerate() {
                    edge(j, j + 1, c);
                }
                a[0] += self.boundary.0;
                a[n * n - 1] += self.boundary.1;
            }
        }
        a
    }

    /// `M^{-1/2} A M^{-1/2}`
    pub fn symmetrized(&self) -> Vec<f64> {
        let n = self.len();
        let mut a = self.stiffness();
        let d: Vec<f64> = self.v.iter().map(|m| 1.0 / m.sqrt()).collect();
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] *= d[i] * d[j];
            }
        }
        a
    }

    /// Trace of `M^{-1} A`, equal to the eigenvalue sum.
    pub fn trace(&self) -> f64 {
        let a = self.stiffness();
        let n = self.len();
        (0..n).map(|i| a[i * n + i] / self.v[i]).sum()
    }
}

#[derive(Debug, Clone)]
pub struct DenseSpectrum {
    pub bc: BoundaryCondition,
    pub eigenvalues: Vec<f64>,
    /// M-orthonormal eigenvectors at the sites
    pub vectors: Vec<Vec<f64>>,
    pub sites: Vec<usize>,
    pub masses: Vec<f64>,
    pub sweeps: usize,
    pub off_norm: f64,
}

pub fn dense_spectrum(op: &CycleOperator) -> Result<DenseSpectrum> {
    let n = op.len();
    if n < 2 && op.bc == BoundaryCondition::Periodic {
        return Err(Error::TooFewAtoms { need: 2, got: n });
    }
    let e = jacobi_eigen(op.symmetrized(), n)?;
    let d: Vec<f64> = op.v.iter().map(|m| 1.0 / m.sqrt()).collect();
    let vectors = (0..n).map(|k| (0..n).map(|r| e.vectors[k * n + r] * d[r]).collect()).collect();
    Ok(DenseSpectrum {
        bc: op.bc,
        eigenvalues: e.values,
        vectors,
        sites: op.sites.clone(),
        masses: op.v.clone(),
        sweeps: e.sweeps,
        off_norm: e.off_norm,
    })
}

/// Largest `|A f - lambda M f|` over the pairs.
pub fn residual_norm(op: &CycleOperator, ds: &DenseSpectrum) -> f64 {
    let a = op.stiffness();
    let n = op.len();
    let mut worst: f64 = 0.0;
    for (lam, f) in ds.eigenvalues.iter().zip(&ds.vectors) {
        let mut r2 = 0.0;
        for i in 0..n {
            let mut acc = CompensatedSum::new();
            for j in 0..n {
                acc.add(a[i * n + j] * f[j]);
            }
            let r = acc.value() - lam * op.v[i] * f[i];
            r2 += r * r;
        }
        worst = worst.max(r2.sqrt());
    }
    worst
}

/// Symmetric Green matrix whose eigenvalues are the reciprocal eigenvalues:
/// `M^{1/2} K M^{1/2}` with the bridge kernel for Dirichlet, the
/// pseudo-inverse of the symmetrized operator for periodic.
pub fn green_operator(op: &CycleOperator) -> Result<Vec<f64>> {
    let n = op.len();
    match op.bc {
        BoundaryCondition::Dirichlet => {
            let k = BridgeKernel::new(op.w.clone())?;
            let y = op.v_measure.positions();
            let sub = AtomicMeasure::from_atoms(
                op.sites.iter().map(|&j| (y[j], op.v_measure.masses()[j])),
                op.v_measure.chirality(),
            )?;
            let mut g = green_matrix(&k, &sub);
            let s: Vec<f64> = op.v.iter().map(|m| m.sqrt()).collect();
            for i in 0..n {
                for j in 0..n {
                    g[i * n + j] *= s[i] * s[j];
                }
            }
            Ok(g)
        }
        BoundaryCondition::Periodic => {
            let e = jacobi_eigen(op.symmetrized(), n)?;
            let lmax = e.values.last().copied().unwrap_or(0.0);
            let mut g = vec![0.0; n * n];
            for k in 0..n {
                if e.values[k] <= 1e-12 * lmax {
                    continue;
                }
                let z = &e.vectors[k * n..(k + 1) * n];
                for i in 0..n {
                    for j in 0..n {
                        g[i * n + j] += z[i] * z[j] / e.values[k];
                    }
                }
            }
            Ok(g)
        }
    }
}

/// `det(I - zG)` coefficients through degree `n` (periodic: `n - 1`).
pub fn fredholm_coefficients(op: &CycleOperator) -> Result<FredholmPolynomial> {
    let n = op.len();
    let g = green_operator(op)?;
    let deg = match op.bc {
        BoundaryCondition::Dirichlet => n,
        BoundaryCondition::Periodic => n - 1,
    };
    fredholm_polynomial(&g, n, deg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub n: usize,
    pub max_rel_gap: f64,
    pub count_series: usize,
    pub count_oracle: usize,
    pub min_cosine: f64,
    pub multiplicity_mismatches: usize,
}

/// Eigenvalues below `ZERO_REL * lambda_max` count as zero.
pub const ZERO_REL: f64 = 1e-12;

/// Relative spacing under which oracle eigenvalues are treated as one cluster
/// when comparing eigenvectors.
pub const CLUSTER_REL: f64 = 1e-6;

pub fn compare_spectra(series: &Spectrum, oracle: &DenseSpectrum) -> Result<CompareReport> {
    let count_oracle = oracle.eigenvalues.len();
    if series.n_available != count_oracle || series.len() > count_oracle {
        return Err(Error::CountMismatch { series: series.n_available, oracle: count_oracle });
    }
    let lmax = oracle.eigenvalues.last().copied().unwrap_or(1.0).abs().max(f64::MIN_POSITIVE);
    let n = series.len();
    let mut max_rel_gap: f64 = 0.0;
    let mut multiplicity_mismatches = 0;
    let mut min_cosine: f64 = 1.0;
    let ov = &oracle.eigenvalues;
    for (i, pair) in series.pairs.iter().enumerate() {
        let lo = ov[i];
        // the zero mode is compared on the scale of the spectrum
        let scale = if lo.abs() > ZERO_REL * lmax { lo.abs() } else { lmax };
        max_rel_gap = max_rel_gap.max((pair.lambda - lo).abs() / scale);

        let near = |j: usize| (ov[j] - lo).abs() <= CLUSTER_REL * scale;
        let cluster: Vec<usize> = (0..count_oracle).filter(|&j| near(j)).collect();
        let oracle_double = cluster.len() >= 2;
        if oracle_double != (pair.multiplicity == 2) {
            multiplicity_mismatches += 1;
        }
        // projection of the series vector onto the oracle cluster, in L2(V)
        let mut proj2 = 0.0;
        for &j in &cluster {
            let mut acc = CompensatedSum::new();
            for (k, &site) in oracle.sites.iter().enumerate() {
                acc.add(pair.values[site] * oracle.vectors[j][k] * oracle.masses[k]);
            }
            proj2 += acc.value().powi(2);
        }
        min_cosine = min_cosine.min(proj2.sqrt());
    }
    Ok(CompareReport { n, max_rel_gap, count_series: series.n_available, count_oracle, min_cosine, multiplicity_mismatches })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Chirality;

    fn two_site(bc: BoundaryCondition) -> CycleOperator {
        let v = Arc::new(AtomicMeasure::from_atoms([(0.25, 0.5), (0.75, 0.5)], Chirality::LeftContinuous).unwrap());
        let w = Arc::new(AtomicMeasure::from_atoms([(0.5, 0.5), (0.0, 0.5)], Chirality::RightContinuous).unwrap());
        assemble_cycle(&w, &v, bc).unwrap()
    }

    #[test]
    fn two_site_assembly_and_spectrum() {
        let op = two_site(BoundaryCondition::Periodic);
        assert_eq!(op.c, vec![2.0, 2.0]);
        assert_eq!(op.stiffness(), vec![4.0, -4.0, -4.0, 4.0]);
        let ds = dense_spectrum(&op).unwrap();
        assert!(ds.eigenvalues[0].abs() < 1e-14);
        assert!((ds.eigenvalues[1] - 16.0).abs() < 1e-13);
        assert!((op.trace() - 16.0).abs() < 1e-13);
        let f0 = &ds.vectors[0];
        assert!((f0[0] - f0[1]).abs() < 1e-14);
    }

    #[test]
    fn zero_gap_is_rejected() {
        let v = Arc::new(AtomicMeasure::from_atoms([(0.25, 0.5), (0.3, 0.5)], Chirality::LeftContinuous).unwrap());
        let w = Arc::new(AtomicMeasure::from_atoms([(0.5, 1.0)], Chirality::RightContinuous).unwrap());
        assert!(matches!(
            assemble_cycle(&w, &v, BoundaryCondition::Periodic),
            Err(Error::ZeroGapMass { .. })
        ));
    }

    #[test]
    fn dirichlet_two_site_fredholm() {
        // sites at 0.25 (pinned: W(0.25) = 0) and 0.75 (free)
        let op = two_site(BoundaryCondition::Dirichlet);
        assert_eq!(op.sites, vec![1]);
        assert_eq!(op.stiffness(), vec![4.0]);
        let p = fredholm_coefficients(&op).unwrap();
        assert_eq!(p.coefficients[0], 1.0);
        assert!((p.coefficients[1] + 0.125).abs() < 1e-16);
    }
}
