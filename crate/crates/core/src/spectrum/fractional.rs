use super::Spectrum;
use crate::error::{Error, Result};
use crate::sum::CompensatedSum;

fn check_len(spec: &Spectrum, f: &[f64]) -> Result<()> {
    if f.len() > spec.gamma.len() {
        return Err(Error::LengthMismatch { expected: spec.gamma.len(), got: f.len() });
    }
    Ok(())
}

/// `u_i = gamma_i^s f_i`
pub fn fractional_apply(spec: &Spectrum, f: &[f64], s: f64) -> Result<Vec<f64>> {
    check_len(spec, f)?;
    Ok(f.iter().zip(&spec.gamma).map(|(x, g)| g.powf(s) * x).collect())
}

/// `u_i = gamma_i^-s f_i`, the weak solution of `(I - Delta)^s u = f` on the basis.
pub fn fractional_solve(spec: &Spectrum, f: &[f64], s: f64) -> Result<Vec<f64>> {
    check_len(spec, f)?;
    Ok(f.iter().zip(&spec.gamma).map(|(x, g)| x / g.powf(s)).collect())
}

/// `sum_i gamma_i^s f_i^2`; negative `s` gives the dual norm.
pub fn sobolev_norm(spec: &Spectrum, f: &[f64], s: f64) -> Result<f64> {
    check_len(spec, f)?;
    let mut acc = CompensatedSum::new();
    for (x, g) in f.iter().zip(&spec.gamma) {
        acc.add(g.powf(s) * x * x);
    }
    Ok(acc.value())
}

/// Coefficients `<f, nu_i>` in L2(V) of values given at the V atoms.
pub fn coefficients(spec: &Spectrum, values: &[f64]) -> Result<Vec<f64>> {
    let masses = spec.v().masses();
    if values.len() != masses.len() {
        return Err(Error::LengthMismatch { expected: masses.len(), got: values.len() });
    }
    Ok(spec
        .pairs
        .iter()
        .map(|p| {
            let mut acc = CompensatedSum::new();
            for ((a, b), m) in p.values.iter().zip(values).zip(masses) {
                acc.add(a * b * m);
            }
            acc.value()
        })
        .collect())
}

/// `sum_i c_i nu_i` at the V atoms.
pub fn synthesize(spec: &Spectrum, coeffs: &[f64]) -> Result<Vec<f64>> {
    check_len(spec, coeffs)?;
    let n = spec.v().len();
    let mut out = vec![CompensatedSum::new(); n];
    for (c, p) in coeffs.iter().zip(&spec.pairs) {
        for (o, x) in out.iter_mut().zip(&p.values) {
            o.add(c * x);
        }
    }
    Ok(out.iter().map(|a| a.value()).collect())
}
