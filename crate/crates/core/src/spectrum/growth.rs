use serde::Serialize;

use super::{BoundaryCondition, Spectrum};
use crate::error::{Error, Result};
use crate::kernels::KernelTable;
use crate::sum::compensated_sum;

/// First coefficient index used by the coefficient estimator.
pub const N_MIN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthEstimate {
    /// `max_{n >= 5} n ln n / (-ln |a_n|)`, absent when the series terminates early
    pub rho_coeff: Option<f64>,
    /// least-squares slope of `ln n(lambda)` against `ln lambda`
    pub rho_fit: Option<f64>,
    pub n_used: usize,
    /// largest C with `lambda_n >= C n^(1/rho_fit)` on the computed range
    pub fit_constant: Option<f64>,
    /// C implied by the least-squares intercept
    pub intercept_constant: Option<f64>,
}

/// `n ln n / (-ln |a_n|)` for a single index; `a[0]` is `a_1`.
pub fn rho_coeff_at(a: &[f64], n: usize) -> Option<f64> {
    let x = a.get(n.checked_sub(1)?)?.abs();
    if x > 0.0 && x < 1.0 {
        let nf = n as f64;
        Some(nf * nf.ln() / -x.ln())
    } else {
        None
    }
}

/// Coefficient estimator over `n = 5..=len`. Stops at the first vanishing
/// coefficient (atomic termination). Needs ten usable coefficients.
pub fn growth_from_coefficients(a: &[f64]) -> Result<(f64, usize)> {
    let mut best = f64::NEG_INFINITY;
    let mut used = 0;
    for n in N_MIN..=a.len() {
        if a[n - 1] == 0.0 {
            break;
        }
        if let Some(r) = rho_coeff_at(a, n) {
            best = best.max(r);
            used += 1;
        }
    }
    if used < 10 {
        return Err(Error::TooFewTerms { need: 10, got: used });
    }
    Ok((best, used))
}

/// Fit on distinct nonzero eigenvalues against the counting function
/// `n(lambda) = #{nonzero eigenvalues <= lambda}`. Returns (rho, C_envelope, C_intercept).
fn fit(eigen: &[f64]) -> Result<(f64, f64, f64, usize)> {
    let nz: Vec<f64> = eigen.iter().copied().filter(|&l| l > 0.0).collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut i = 0;
    while i < nz.len() {
        let mut j = i + 1;
        while j < nz.len() && (nz[j] - nz[i]).abs() <= 1e-9 * nz[i] {
            j += 1;
        }
        xs.push(nz[i].ln());
        ys.push((j as f64).ln());
        i = j;
    }
    if xs.len() < 3 {
        return Err(Error::TooFewTerms { need: 3, got: xs.len() });
    }
    let n = xs.len() as f64;
    let mx = compensated_sum(xs.iter().copied()) / n;
    let my = compensated_sum(ys.iter().copied()) / n;
    let sxy = compensated_sum(xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)));
    let sxx = compensated_sum(xs.iter().map(|x| (x - mx) * (x - mx)));
    let rho = sxy / sxx;
    let intercept = my - rho * mx;
    let c_ls = (-intercept / rho).exp();
    let c_env = nz
        .iter()
        .enumerate()
        .map(|(k, &l)| l / ((k + 1) as f64).powf(1.0 / rho))
        .fold(f64::INFINITY, f64::min);
    Ok((rho, c_env, c_ls, nz.len()))
}

pub fn growth_from_spectrum(spec: &Spectrum) -> Result<GrowthEstimate> {
    let (rho, c_env, c_ls, n) = fit(&spec.eigenvalues())?;
    Ok(GrowthEstimate {
        rho_coeff: None,
        rho_fit: Some(rho),
        n_used: n,
        fit_constant: Some(c_env),
        intercept_constant: Some(c_ls),
    })
}

/// Either estimator or both. Fails only when neither input is usable.
pub fn growth_exponent(table: Option<&KernelTable>, spec: Option<&Spectrum>) -> Result<GrowthEstimate> {
    let coeff = table.map(|t| growth_from_coefficients(&t.secular_coefficients()));
    let fitted = spec.map(growth_from_spectrum);
    let mut out = GrowthEstimate { rho_coeff: None, rho_fit: None, n_used: 0, fit_constant: None, intercept_constant: None };
    let mut first_err = None;
    match coeff {
        Some(Ok((r, n))) => {
            out.rho_coeff = Some(r);
            out.n_used = n;
        }
        Some(Err(e)) => first_err = Some(e),
        None => {}
    }
    match fitted {
        Some(Ok(g)) => {
            out.rho_fit = g.rho_fit;
            out.fit_constant = g.fit_constant;
            out.intercept_constant = g.intercept_constant;
            out.n_used = out.n_used.max(g.n_used);
        }
        Some(Err(e)) => first_err = first_err.or(Some(e)),
        None => {}
    }
    if out.rho_coeff.is_none() && out.rho_fit.is_none() {
        return Err(first_err.unwrap_or(Error::TooFewTerms { need: 10, got: 0 }));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailSum {
    pub partial: f64,
    /// bound on the omitted terms; infinite when divergent
    pub remainder: f64,
    pub divergent: bool,
    pub rho_hat: f64,
    pub constant: f64,
    pub terms: usize,
}

impl TailSum {
    pub fn total(&self) -> f64 {
        self.partial + self.remainder
    }
}

/// `sum x_i^-p` over `values` plus the integral bound on the rest, given
/// `x_n >= C n^(1/rho)` for `n > values.len()`.
fn power_tail(values: &[f64], p: f64, rho: f64, c: f64, extra: f64) -> TailSum {
    let partial = extra + compensated_sum(values.iter().map(|x| x.powf(-p)));
    let n = values.len() as f64;
    let q = p / rho;
    let (remainder, divergent) = if q > 1.0 {
        (c.powf(-p) * n.powf(1.0 - q) / (q - 1.0), false)
    } else {
        (f64::INFINITY, true)
    };
    TailSum { partial, remainder, divergent, rho_hat: rho, constant: c, terms: values.len() }
}

/// `sum lambda_i^-s` over the nonzero eigenvalues with a tail estimate.
pub fn tail_sum(spec: &Spectrum, s: f64) -> Result<TailSum> {
    if !(s > 0.0) {
        return Err(Error::InvalidArgument(format!("exponent s must be positive, got {s}")));
    }
    let g = growth_from_spectrum(spec)?;
    let nz: Vec<f64> = spec.eigenvalues().into_iter().filter(|&l| l > 0.0).collect();
    Ok(power_tail(&nz, s, g.rho_fit.unwrap(), g.fit_constant.unwrap(), 0.0))
}

/// `sum_i gamma_i^{2(n-m)}` with `gamma_i = 1 + lambda_i`, including the zero mode.
pub fn hilbert_schmidt_sum(spec: &Spectrum, n: f64, m: f64) -> Result<TailSum> {
    let g = growth_from_spectrum(spec)?;
    let p = 2.0 * (m - n);
    let mut rest = Vec::new();
    let mut extra = 0.0;
    for (i, pair) in spec.pairs.iter().enumerate() {
        let gamma = spec.gamma[i];
        if pair.lambda == 0.0 && spec.bc == BoundaryCondition::Periodic {
            extra += gamma.powf(-p);
        } else {
            rest.push(gamma);
        }
    }
    Ok(power_tail(&rest, p, g.rho_fit.unwrap(), g.fit_constant.unwrap(), extra))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ln_fact(n: usize) -> f64 {
        (2..=n).map(|k| (k as f64).ln()).sum()
    }

    #[test]
    fn classical_coefficient_estimator() {
        // a_n = 2/(2n)!; estimator evaluated directly
        let a: Vec<f64> = (1..=30).map(|n| 2.0 * (-ln_fact(2 * n)).exp()).collect();
        let r30 = rho_coeff_at(&a, 30).unwrap();
        let want = 30.0 * 30f64.ln() / (ln_fact(60) - 2f64.ln());
        assert!((r30 - want).abs() < 1e-12);
        assert!(r30 > 0.5 && r30 < 0.56);
        let (best, used) = growth_from_coefficients(&a).unwrap();
        assert_eq!(used, 26);
        assert!(best >= r30 && best < 0.56);
    }

    #[test]
    fn terminated_series_is_rejected() {
        let a = [0.5, 0.1, 0.01, 1e-3, 1e-5, 0.0, 0.0];
        assert!(growth_from_coefficients(&a).is_err());
    }

    #[test]
    fn exact_square_law_fit() {
        let ev: Vec<f64> = (1..=40).map(|k| (k as f64 * std::f64::consts::PI).powi(2)).collect();
        let (rho, c_env, c_ls, n) = fit(&ev).unwrap();
        assert!((rho - 0.5).abs() < 1e-12);
        assert!((c_env - std::f64::consts::PI.powi(2)).abs() < 1e-9);
        assert!((c_ls - c_env).abs() < 1e-9);
        assert_eq!(n, 40);
    }
}
