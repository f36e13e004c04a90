//! Eigenvalues and eigenfunctions from the secular function.
//!
//! Dirichlet eigenvalues `mu_k` (zeros of `S_{W,V}(sqrt(mu), 1)`) are located by
//! bisection on a Sturm oscillation count. Pinning one point is a rank-one
//! constraint, so periodic eigenvalues interlace: `lambda_{k-1} <= mu_k <= lambda_k`.
//! Each periodic `lambda_k` (k >= 1) is then bracketed by `[mu_k, mu_{k+1}]`,
//! where the periodic secular function `C_{W,V} + C_{V,W} - 2` is negative at
//! odd and nonnegative at even `k`. A double eigenvalue sits on a Dirichlet
//! eigenvalue at which the whole boundary matrix vanishes.

mod fractional;
mod growth;
mod inverse;
mod structure;

pub use fractional::{coefficients, fractional_apply, fractional_solve, sobolev_norm, synthesize};
pub use growth::{
    growth_exponent, growth_from_coefficients, growth_from_spectrum, hilbert_schmidt_sum, rho_coeff_at, tail_sum,
    GrowthEstimate, TailSum,
};
pub use structure::{structure, Structure};

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::digest::combine;
use crate::error::{Error, Result};
use crate::gentrig::{
sweep_at_one, trig_eval, trig_eval_route, Route, TrigValues};
use crate::kernels::{KernelTable, MergedGrid};
use crate::measure::AtomicMeasure;
use crate::sum::CompensatedSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    Periodic,
    Dirichlet,
}

impl BoundaryCondition {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryCondition::Periodic => "periodic",
            BoundaryCondition::Dirichlet => "dirichlet",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenPair {
    pub lambda: f64,
    pub a: f64,
    pub b: f64,
    /// eigenfunction at the V atoms, unit norm in L2(V)
    pub values: Vec<f64>,
    pub multiplicity: u8,
    pub secular_residual: f64,
    pub bc: BoundaryCondition,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub count_evaluations: usize,
    pub secular_evaluations: usize,
    pub bisection_steps: usize,
    pub bracket_expansions: usize,
    pub double_roots: usize,
    pub inverse_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    pub bc: BoundaryCondition,
    /// ascending, multiplicity expanded
    pub pairs: Vec<EigenPair>,
    pub count_requested: usize,
    pub lambda_max_scanned: f64,
    pub gamma: Vec<f64>,
    pub diagnostics: Diagnostics,
    /// total number of eigenvalues of the atomic problem
    pub n_available: usize,
    pub digest: String,
    pub measures_digest: String,
    v: Arc<AtomicMeasure>,
}

impl Spectrum {
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.lambda).collect()
    }
    pub fn len(&self) -> usize {
        self.pairs.len()
    }
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
    pub fn v(&self) -> &AtomicMeasure {
        &self.v
    }

    pub fn report(&self, growth: Option<&GrowthEstimate>) -> SpectrumReport {
        SpectrumReport {
            bc: self.bc,
            eigenvalues: self.eigenvalues(),
            multiplicities: self.pairs.iter().map(|p| p.multiplicity).collect(),
            residuals: self.pairs.iter().map(|p| p.secular_residual).collect(),
            rho_coeff: growth.and_then(|g| g.rho_coeff),
            rho_fit: growth.and_then(|g| g.rho_fit),
            fit_constant: growth.and_then(|g| g.fit_constant),
            count_requested: self.count_requested,
            lambda_max_scanned: self.lambda_max_scanned,
            diagnostics: self.diagnostics.clone(),
            digest: self.digest.clone(),
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "index,lambda,multiplicity")?;
        for (i, p) in self.pairs.iter().enumerate() {
            writeln!(out, "{i},{},{}", p.lambda, p.multiplicity)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub bc: BoundaryCondition,
    pub eigenvalues: Vec<f64>,
    pub multiplicities: Vec<u8>,
    pub residuals: Vec<f64>,
    pub rho_coeff: Option<f64>,
    pub rho_fit: Option<f64>,
    pub fit_constant: Option<f64>,
    pub count_requested: usize,
    pub lambda_max_scanned: f64,
    #[serde(skip_deserializing)]
    pub diagnostics: Diagnostics,
    pub digest: String,
}

impl<'de> Deserialize<'de> for Diagnostics {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        serde::de::IgnoredAny::deserialize(d)?;
        Ok(Diagnostics::default())
    }
}

fn check_lambda(lambda: f64) -> Result<f64> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(lambda.sqrt())
    } else {
        Err(Error::InvalidArgument(format!("lambda must be finite and nonnegative, got {lambda}")))
    }
}

fn secular_from(v: &TrigValues, bc: BoundaryCondition) -> f64 {
    match bc {
        BoundaryCondition::Periodic => v.c_wv + v.c_vw - 2.0,
        BoundaryCondition::Dirichlet => v.s_wv,
    }
}

/// Secular function by the certified series route.
pub fn secular(t: &KernelTable, lambda: f64, bc: BoundaryCondition) -> Result<f64> {
    let alpha = check_lambda(lambda)?;
    Ok(secular_from(&trig_eval(t, alpha, 1.0, None)?.values(), bc))
}

pub fn secular_route(t: &KernelTable, lambda: f64, bc: BoundaryCondition, route: Route) -> Result<f64> {
    let alpha = check_lambda(lambda)?;
    Ok(secular_from(&trig_eval_route(t, alpha, 1.0, route)?.values(), bc))
}

/// Number of Dirichlet eigenvalues strictly below `lambda`: sign changes of
/// the pinned solution `u` (with `u(0) = 0`, `D_W^- u(0) = 1`) read at the V
/// atoms and at 1.
pub fn dirichlet_count(grid: &MergedGrid, lambda: f64) -> usize {
    let mut u = 0.0f64;
    let mut du = 1.0f64;
    let mut last_sign = 0i8;
    let mut changes = 0;
    let mut note = |u: f64, last: &mut i8| {
        let s = if u > 0.0 {
            1
        } else if u < 0.0 {
            -1
        } else {
            0
        };
        if s != 0 {
            if *last != 0 && s != *last {
                changes += 1;
            }
            *last = s;
        }
    };
    for p in grid.points() {
        if p.w > 0.0 {
            u += p.w * du;
        }
        if p.v > 0.0 {
            note(u, &mut last_sign);
            du -= lambda * p.v * u;
        }
        let mag = u.abs() + du.abs();
        if mag > 1e150 {
            u *= 1e-150;
            du *= 1e-150;
        }
    }
    note(u, &mut last_sign);
    changes
}

const DOUBLE_ROOT_REL: f64 = 1e-9;

/// The monodromy `[[C, S], [-S', C']]` at `lambda` is the identity up to
/// rounding, relative to its largest entry.
fn is_double(grid: &MergedGrid, lambda: f64) -> bool {
    let m = sweep_at_one(grid, lambda.sqrt());
    let size = [m.c_wv, m.c_vw, m.s_wv, m.s_vw].iter().fold(1.0f64, |a, x| a.max(x.abs()));
    let defect = [m.c_wv - 1.0, m.c_vw - 1.0, m.s_wv, m.s_vw].iter().fold(0.0f64, |a, x| a.max(x.abs()));
    defect < DOUBLE_ROOT_REL * size
}

struct Solver<'a> {
    t: &'a KernelTable,
    diag: Diagnostics,
    lambda_max: f64,
}

impl<'a> Solver<'a> {
    fn count(&mut self, lambda: f64) -> usize {
        self.diag.count_evaluations += 1;
        self.lambda_max = self.lambda_max.max(lambda);
        dirichlet_count(self.t.grid(), lambda)
    }

    fn h(&mut self, lambda: f64) -> f64 {
        self.diag.secular_evaluations += 1;
        self.lambda_max = self.lambda_max.max(lambda);
        secular_from(&sweep_at_one(self.t.grid(), lambda.sqrt()), BoundaryCondition::Periodic)
    }

    /// First `n` Dirichlet eigenvalues.
    fn dirichlet(&mut self, n: usize) -> Result<Vec<f64>> {
        let grid = self.t.grid();
        let mut mus: Vec<f64> = Vec::with_capacity(n);
        let mut hi = 4.0 / (grid.w_total() * grid.v_total());
        for k in 1..=n {
            let mut lo = mus.last().copied().unwrap_or(0.0);
            hi = hi.max(2.0 * lo);
            let mut expansions = 0;
            while self.count(hi) < k {
                lo = hi;
                hi *= 2.0;
                expansions += 1;
                self.diag.bracket_expansions += 1;
                if expansions > 2000 || !hi.is_finite() {
                    return Err(Error::ScanExhausted { found: k - 1, requested: n });
                }
            }
            // invariant: count(lo) < k <= count(hi)
            let mut steps = 0;
            while hi - lo > 4.0 * f64::EPSILON * hi {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if self.count(mid) >= k {
                    hi = mid;
                } else {
                    lo = mid;
                }
                steps += 1;
                if steps > 400 {
                    return Err(Error::BracketNotConverged { lo, hi });
                }
            }
            self.diag.bisection_steps += steps;
            mus.push(0.5 * (lo + hi));
        }
        Ok(mus)
    }

    /// Root of the periodic secular function in `[lo, hi]` with the sign at
    /// `lo` given.
    fn bisect_periodic(&mut self, mut lo: f64, mut hi: f64, sign_lo: f64) -> Result<f64> {
        let mut steps = 0;
        while hi - lo > 4.0 * f64::EPSILON * hi {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let h = self.h(mid);
            if h == 0.0 {
                return Ok(mid);
            }
            if h.signum() == sign_lo {
                lo = mid;
            } else {
                hi = mid;
            }
            steps += 1;
            if steps > 400 {
                return Err(Error::BracketNotConverged { lo, hi });
            }
        }
        self.diag.bisection_steps += steps;
        Ok(0.5 * (lo + hi))
    }

    /// Eigenvalue list (with multiplicity) for the periodic problem.
    fn periodic(&mut self, count: usize, st: &Structure) -> Result<Vec<(f64, u8)>> {
        let grid = self.t.grid();
        let n_mu = count.min(st.n_dirichlet);
        let mus = self.dirichlet(n_mu)?;
        let doubles: Vec<bool> = mus
            .iter()
            .enumerate()
            .map(|(i, &mu)| (i + 1) % 2 == 0 && is_double(grid, mu))
            .collect();
        let mut out = vec![(0.0, 1u8)];
        let mut k = 1;
        while out.len() < count {
            if k <= n_mu && doubles[k - 1] {
                // lambda_{k-1} = lambda_k = mu_k; the first copy was emitted at k-1
                out.push((mus[k - 1], 2));
                k += 1;
                continue;
            }
            if k < n_mu && doubles[k] {
                out.push((mus[k], 2));
                k += 1;
                continue;
            }
            // odd k: h(mu_k) < 0 and h(mu_{k+1}) >= 0; even k: the reverse
            let sign_lo = if k % 2 == 1 { -1.0 } else { 1.0 };
            let lo = mus[k - 1];
            let hi = if k < n_mu {
                mus[k]
            } else if k < st.n_dirichlet {
                // count < n_dirichlet: extend the Dirichlet list by one
                let more = self.dirichlet(k + 1)?;
                more[k]
            } else {
                // top periodic eigenvalue above the last Dirichlet one
                let mut cap = 4.0 / (st.min_gap * st.min_cluster) * 1.01 + lo;
                let mut tries = 0;
                while self.h(cap).signum() == sign_lo {
                    cap *= 2.0;
                    tries += 1;
                    self.diag.bracket_expansions += 1;
                    if tries > 64 {
                        return Err(Error::BracketNotConverged { lo, hi: cap });
                    }
                }
                cap
            };
            out.push((self.bisect_periodic(lo, hi, sign_lo)?, 1));
            k += 1;
        }
        // complete a pair cut by the count
        if let Some(&(lam, 2)) = out.last() {
            let copies = out.iter().filter(|p| p.0 == lam).count();
            if copies == 1 {
                out.push((lam, 2));
            }
        }
        self.diag.double_roots = out.iter().filter(|p| p.1 == 2).count() / 2;
        Ok(out)
    }
}

fn l2_norm(values: &[f64], masses: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    for (f, m) in values.iter().zip(masses) {
        acc.add(f * f * m);
    }
    acc.value().sqrt()
}

/// Eigenfunctions at a claimed eigenvalue; two orthonormal pairs for a double root.
fn pairs_at(
    t: &KernelTable,
    lambda: f64,
    bc: BoundaryCondition,
    multiplicity: Option<u8>,
    diag: &mut Diagnostics,
) -> Result<Vec<EigenPair>> {
    let masses = t.v().masses();
    let vtot = t.v().total_mass();
    if lambda == 0.0 {
        if bc == BoundaryCondition::Dirichlet {
            return Err(Error::NotAnEigenvalue { lambda, residual: 1.0 });
        }
        let c = 1.0 / vtot.sqrt();
        return Ok(vec![EigenPair {
            lambda,
            a: c,
            b: 0.0,
            values: vec![c; masses.len()],
            multiplicity: 1,
            secular_residual: 0.0,
            bc,
        }]);
    }
    let alpha = lambda.sqrt();
    let at_one = trig_eval_route(t, alpha, 1.0, Route::Auto)?.values();
    let residual = secular_from(&at_one, bc).abs();
    let size_at_one =
        [at_one.c_wv, at_one.c_vw, at_one.s_wv, at_one.s_vw].iter().fold(1.0f64, |a, x| a.max(x.abs()));
    let chain = inverse::Chain::new(t.grid(), bc);

    // atom values and (a, b) = (f(0), D_W f(0)) from M-normalized cluster values
    let make = |x: &[f64], mult: u8| -> Result<EigenPair> {
        let values = chain.expand(x);
        let n = l2_norm(&values, masses);
        if !(n > 0.0) {
            return Err(Error::NotAnEigenvalue { lambda, residual });
        }
        let (a, b) = chain.origin_state(x);
        Ok(EigenPair {
            lambda,
            a: a / n,
            b: b / n,
            values: values.iter().map(|v| v / n).collect(),
            multiplicity: mult,
            secular_residual: residual,
            bc,
        })
    };

    match bc {
        BoundaryCondition::Dirichlet => {
            let rel = at_one.s_wv.abs() / size_at_one;
            if multiplicity.is_none() && rel > 1e-6 {
                return Err(Error::NotAnEigenvalue { lambda, residual: rel });
            }
            diag.inverse_iterations += 1;
            let x = inverse::inverse_iteration(&chain, lambda, 1);
            Ok(vec![make(&x[0], 1)?])
        }
        BoundaryCondition::Periodic => {
            let double = match multiplicity {
                Some(m) => m == 2,
                None => is_double(t.grid(), lambda),
            };
            if !double && multiplicity.is_none() {
                let h = secular_from(&at_one, bc).abs() / size_at_one;
                if h > 1e-6 {
                    return Err(Error::NotAnEigenvalue { lambda, residual: h });
                }
            }
            let k = if double { 2 } else { 1 };
            diag.inverse_iterations += 1;
            let xs = inverse::inverse_iteration(&chain, lambda, k);
            xs.iter().map(|x| make(x, k as u8)).collect()
        }
    }
}

/// Eigenfunction(s) at `lambda`, rejecting values that are not eigenvalues.
pub fn eigenvector(t: &KernelTable, lambda: f64, bc: BoundaryCondition) -> Result<Vec<EigenPair>> {
    check_lambda(lambda)?;
    let mut diag = Diagnostics::default();
    pairs_at(t, lambda, bc, None, &mut diag)
}

pub fn spectrum_digest(t: &KernelTable, bc: BoundaryCondition) -> String {
    combine(&[t.w().digest(), t.v().digest(), &t.order().to_string(), bc.as_str()])
}

/// The smallest `count` eigenvalues with eigenfunctions. A double eigenvalue
/// cut by `count` is completed, so the result may hold `count + 1` pairs.
pub fn solve_spectrum(t: &KernelTable, bc: BoundaryCondition, count: usize) -> Result<Spectrum> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be positive".into()));
    }
    let st = structure(t.grid());
    let available = match bc {
        BoundaryCondition::Periodic => st.n_periodic,
        BoundaryCondition::Dirichlet => st.n_dirichlet,
    };
    if count > available {
        return Err(Error::ScanExhausted { found: available, requested: count });
    }
    let mut solver = Solver { t, diag: Diagnostics::default(), lambda_max: 0.0 };
    let eigen: Vec<(f64, u8)> = match bc {
        BoundaryCondition::Dirichlet => solver.dirichlet(count)?.into_iter().map(|m| (m, 1)).collect(),
        BoundaryCondition::Periodic => solver.periodic(count, &st)?,
    };
    let mut diag = solver.diag;
    let mut pairs = Vec::with_capacity(eigen.len());
    let mut i = 0;
    while i < eigen.len() {
        let (lam, mult) = eigen[i];
        let mut got = pairs_at(t, lam, bc, Some(mult), &mut diag)?;
        i += got.len();
        pairs.append(&mut got);
    }
    pairs.truncate(eigen.len());
    let gamma = pairs.iter().map(|p| 1.0 + p.lambda).collect();
    Ok(Spectrum {
        bc,
        pairs,
        count_requested: count,
        lambda_max_scanned: solver.lambda_max,
        gamma,
        diagnostics: diag,
        n_available: available,
        digest: spectrum_digest(t, bc),
        measures_digest: combine(&[t.w().digest(), t.v().digest()]),
        v: t.v().clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::diagonal_tables;
    use crate::measure::Chirality;

    fn two_site() -> KernelTable {
        let v = AtomicMeasure::from_atoms([(0.25, 0.5), (0.75, 0.5)], Chirality::LeftContinuous).unwrap();
        let w = AtomicMeasure::from_atoms([(0.5, 0.5), (0.0, 0.5)], Chirality::RightContinuous).unwrap();
        diagonal_tables(&w, &v, 4).unwrap()
    }

    #[test]
    fn two_site_periodic() {
        let t = two_site();
        assert_eq!(secular(&t, 0.0, BoundaryCondition::Periodic).unwrap(), 0.0);
        assert!(secular(&t, 16.0, BoundaryCondition::Periodic).unwrap().abs() < 1e-13);
        let sp = solve_spectrum(&t, BoundaryCondition::Periodic, 2).unwrap();
        let ev = sp.eigenvalues();
        assert_eq!(ev[0], 0.0);
        assert!((ev[1] - 16.0).abs() < 1e-12);
        let c = 1.0 / 1f64.sqrt();
        assert!(sp.pairs[0].values.iter().all(|&x| x == c));
        assert!(solve_spectrum(&t, BoundaryCondition::Periodic, 3).is_err());
    }

    #[test]
    fn rejects_non_eigenvalue() {
        let t = two_site();
        assert!(matches!(eigenvector(&t, 9.0, BoundaryCondition::Periodic), Err(Error::NotAnEigenvalue { .. })));
        assert_eq!(eigenvector(&t, 16.0, BoundaryCondition::Periodic).unwrap().len(), 1);
    }

    #[test]
    fn dirichlet_two_site() {
        // the atom at 0.25 is pinned; the one at 0.75 has conductance 2 on each
        // side and mass 1/2, so the only eigenvalue is (2 + 2) / (1/2) = 8
        let t = two_site();
        let sp = solve_spectrum(&t, BoundaryCondition::Dirichlet, 1).unwrap();
        assert!((sp.pairs[0].lambda - 8.0).abs() < 1e-12);
        assert!(secular(&t, 8.0, BoundaryCondition::Dirichlet).unwrap().abs() < 1e-13);
        assert_eq!(sp.pairs[0].values[0], 0.0);
        assert!(solve_spectrum(&t, BoundaryCondition::Dirichlet, 2).is_err());
    }
}
