//! Coefficients of `det(I - zG) = sum_k (-1)^k e_k(G) z^k`.
//!
//! Newton's identities turn power traces into elementary symmetric functions,
//! but in floating point the alternating sums cancel catastrophically. The
//! matrix is therefore scaled by a power of two to integers, traces of its
//! powers are taken in big-integer arithmetic, and the identities are run over
//! the rationals. Only the final coefficients are rounded.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, ToPrimitive, Zero};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct FredholmPolynomial {
    exact: Vec<BigRational>,
    /// `coefficients[k]` multiplies `z^k`
    pub coefficients: Vec<f64>,
}

fn to_rational(x: f64) -> BigRational {
    BigRational::from_f64(x).expect("finite matrix entry")
}

/// Shared binary exponent that makes every entry an integer.
fn integer_scale(g: &[f64]) -> i32 {
    g.iter()
        .filter(|x| **x != 0.0)
        .map(|&x| {
            let (mant, exp, _) = num_traits::float::FloatCore::integer_decode(x);
            exp as i32 + mant.trailing_zeros() as i32
        })
        .min()
        .map(|e| -e)
        .unwrap_or(0)
}

fn scaled_integer(x: f64, shift: i32) -> BigInt {
    if x == 0.0 {
        return BigInt::zero();
    }
    let (mant, exp, sign) = num_traits::float::FloatCore::integer_decode(x);
    let tz = mant.trailing_zeros();
    let e = exp as i32 + tz as i32 + shift;
    debug_assert!(e >= 0);
    let v = BigInt::from(mant >> tz) << (e as usize);
    if sign < 0 {
        -v
    } else {
        v
    }
}

fn matmul(a: &[BigInt], b: &[BigInt], n: usize) -> Vec<BigInt> {
    let mut out = vec![BigInt::zero(); n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = &a[i * n + k];
            if aik.is_zero() {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += aik * &b[k * n + j];
            }
        }
    }
    out
}

fn trace(a: &[BigInt], n: usize) -> BigInt {
    (0..n).map(|i| a[i * n + i].clone()).sum()
}

/// Coefficients up to `z^kmax` of `det(I - zG)` for a dense row-major `n x n` matrix.
pub fn fredholm_polynomial(g: &[f64], n: usize, kmax: usize) -> Result<FredholmPolynomial> {
    if g.len() != n * n {
        return Err(Error::LengthMismatch { expected: n * n, got: g.len() });
    }
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::SingularOperator);
    }
    let shift = integer_scale(g);
    let z: Vec<BigInt> = g.iter().map(|&x| scaled_integer(x, shift)).collect();
    // q_i = tr(Z^i)
    let mut q = Vec::with_capacity(kmax + 1);
    q.push(BigInt::from(n));
    let mut power = z.clone();
    for i in 1..=kmax {
        if i > 1 {
            power = matmul(&power, &z, n);
        }
        q.push(trace(&power, n));
    }
    // k E_k = sum_{i=1}^k (-1)^{i-1} E_{k-i} q_i, with e_k = E_k 2^{-shift k}
    let mut e: Vec<BigRational> = vec![BigRational::one()];
    for k in 1..=kmax {
        let mut acc = BigRational::zero();
        for i in 1..=k {
            let term = &e[k - i] * BigRational::from_integer(q[i].clone());
            if i % 2 == 1 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        e.push(acc / BigRational::from_integer(BigInt::from(k)));
    }
    let two = BigRational::from_integer(BigInt::from(2));
    let mut exact = Vec::with_capacity(kmax + 1);
    for (k, ek) in e.into_iter().enumerate() {
        let scale = pow_signed(&two, -(shift as i64) * k as i64);
        let c = ek * scale;
        exact.push(if k % 2 == 1 { -c } else { c });
    }
    let coefficients = exact.iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect();
    Ok(FredholmPolynomial { exact, coefficients })
}

fn pow_signed(base: &BigRational, e: i64) -> BigRational {
    let p = num_traits::pow(base.clone(), e.unsigned_abs() as usize);
    if e < 0 {
        p.recip()
    } else {
        p
    }
}

impl FredholmPolynomial {
    pub fn degree(&self) -> usize {
        self.exact.iter().rposition(|c| !c.is_zero()).unwrap_or(0)
    }

    /// Coefficients that are exactly zero (beyond the matrix size).
    pub fn is_exact_zero(&self, k: usize) -> bool {
        self.exact.get(k).is_some_and(|c| c.is_zero())
    }

    /// `p(z)` in exact arithmetic, rounded once.
    pub fn eval_exact(&self, z: f64) -> f64 {
        let zr = to_rational(z);
        let mut acc = BigRational::zero();
        for c in self.exact.iter().rev() {
            acc = acc * &zr + c;
        }
        acc.to_f64().unwrap_or(f64::NAN)
    }

    fn eval_derivs(c: &[f64], z: f64) -> (f64, f64, f64) {
        let mut p = 0.0;
        let mut dp = 0.0;
        let mut ddp = 0.0;
        for &a in c.iter().rev() {
            ddp = ddp * z + 2.0 * dp;
            dp = dp * z + p;
            p = p * z + a;
        }
        (p, dp, ddp)
    }

    /// Real roots, smallest first: Laguerre iteration from zero with forward
    /// deflation, then Newton polishing against the exact polynomial.
    pub fn roots(&self) -> Result<Vec<f64>> {
        let d = self.degree();
        let mut c: Vec<f64> = self.coefficients[..=d].to_vec();
        let mut roots = Vec::with_capacity(d);
        for _ in 0..d {
            let deg = c.len() - 1;
            let nf = deg as f64;
            let mut z = 0.0f64;
            for _ in 0..200 {
                let (p, dp, ddp) = Self::eval_derivs(&c, z);
                if p == 0.0 {
                    break;
                }
                let g = dp / p;
                let h = g * g - ddp / p;
                let disc = ((nf - 1.0) * (nf * h - g * g)).max(0.0).sqrt();
                let den = if g >= 0.0 { g + disc } else { g - disc };
                if den == 0.0 {
                    break;
                }
                let step = nf / den;
                z -= step;
                if step.abs() <= 4.0 * f64::EPSILON * z.abs() {
                    break;
                }
            }
            roots.push(z);
            // synthetic division by (x - z)
            let mut q = vec![0.0; deg];
            let mut carry = c[deg];
            for k in (0..deg).rev() {
                q[k] = carry;
                carry = c[k] + carry * z;
            }
            c = q;
        }
        let full = &self.coefficients[..=d];
        for r in roots.iter_mut() {
            for _ in 0..8 {
                let p = self.eval_exact(*r);
                let (_, dp, _) = Self::eval_derivs(full, *r);
                if dp == 0.0 || p == 0.0 {
                    break;
                }
                let step = p / dp;
                *r -= step;
                if step.abs() <= f64::EPSILON * r.abs() {
                    break;
                }
            }
        }
        roots.sort_by(f64::total_cmp);
        if roots.iter().any(|r| !r.is_finite()) {
            return Err(Error::SingularOperator);
        }
        Ok(roots)
    }
}
