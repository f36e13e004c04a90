//! Generalized trigonometric functions `C_{W,V}`, `S_{W,V}`, `C_{V,W}`, `S_{V,W}`.
//!
//! Two routes compute the same functions:
//! * the series in the kernel diagonals, with a certified truncation bound;
//! * a sweep over the merged grid that integrates the first-order system
//!   `dC = -a S' dW`, `dS = a C' dW`, `dC' = -a S dV`, `dS' = a C dV`.
//!
//! The series loses about `exp(alpha * sqrt(W(1)V(1))) * eps` to cancellation,
//! so large `alpha` goes through the sweep.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{Family, KernelTable, Loc, MergedGrid};
use crate::sum::CompensatedSum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrigValues {
    pub c_wv: f64,
    pub s_wv: f64,
    pub c_vw: f64,
    pub s_vw: f64,
}

impl TrigValues {
    pub const AT_ORIGIN: TrigValues = TrigValues { c_wv: 1.0, s_wv: 0.0, c_vw: 1.0, s_vw: 0.0 };

    /// `C_{W,V} C_{V,W} + S_{W,V} S_{V,W} - 1`
    pub fn pythagorean_defect(&self) -> f64 {
        self.c_wv * self.c_vw + self.s_wv * self.s_vw - 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrigEval {
    pub alpha: f64,
    pub x: f64,
    pub c_wv: f64,
    pub s_wv: f64,
    pub c_vw: f64,
    pub s_vw: f64,
    pub err_bound: f64,
    pub terms_used: usize,
}

impl TrigEval {
    pub fn values(&self) -> TrigValues {
        TrigValues { c_wv: self.c_wv, s_wv: self.s_wv, c_vw: self.c_vw, s_vw: self.s_vw }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Series,
    Sweep,
    /// series when its bound is below `AUTO_SERIES_BOUND`, else sweep
    Auto,
}

pub const AUTO_SERIES_BOUND: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum TrigFn {
    CWV,
    SWV,
    CVW,
    SVW,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Term {
    #[allow(dead_code)] // read by the tests
    pub func: TrigFn,
    pub power: usize,
    pub value: f64,
}

/// The four series terms of index `n`: `(-1)^n alpha^{2n} F_{2n}` and so on.
pub(crate) fn series_terms(t: &KernelTable, alpha: f64, loc: Loc, n: usize) -> [Term; 4] {
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let mk = |func, family, k: usize| Term {
        func,
        power: k,
        value: sign * crate::kernels::scaled_term(alpha, k, t.value(family, k, loc)),
    };
    [
        mk(TrigFn::CWV, Family::F, 2 * n),
        mk(TrigFn::SWV, Family::F, 2 * n + 1),
        mk(TrigFn::CVW, Family::G, 2 * n),
        mk(TrigFn::SVW, Family::G, 2 * n + 1),
    ]
}

/// `1e-12 * max(1, alpha^2 F_2(1,1))`
pub fn default_tol(t: &KernelTable, alpha: f64) -> f64 {
    1e-12 * (alpha * alpha * t.f2_total()).max(1.0)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha >= 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("alpha must be finite and nonnegative, got {alpha}")))
    }
}

/// Series evaluation at a grid point (or 0, or 1) with certified error.
pub fn trig_eval(t: &KernelTable, alpha: f64, x: f64, tol: Option<f64>) -> Result<TrigEval> {
    check_alpha(alpha)?;
    let tol = tol.unwrap_or_else(|| default_tol(t, alpha));
    let loc = t.locate(x)?;
    if alpha == 0.0 {
        let v = TrigValues::AT_ORIGIN;
        return Ok(TrigEval { alpha, x, c_wv: v.c_wv, s_wv: v.s_wv, c_vw: v.c_vw, s_vw: v.s_vw, err_bound: 0.0, terms_used: 1 });
    }
    let n_terms = (1..=t.order() + 1)
        .find(|&n| t.remainder_bound(alpha, n) < tol)
        .ok_or(Error::InsufficientOrder { alpha, tol, order: t.order() })?;
    let tail = t.remainder_bound(alpha, n_terms);

    let mut acc = [CompensatedSum::new(); 4];
    let mut rounding = [0.0f64; 4];
    for n in 0..n_terms {
        for (i, term) in series_terms(t, alpha, loc, n).iter().enumerate() {
            acc[i].add(term.value);
            rounding[i] += (4 * term.power + 4) as f64 * f64::EPSILON * term.value.abs();
        }
    }
    let err_bound = tail + rounding.iter().cloned().fold(0.0, f64::max);
    Ok(TrigEval {
        alpha,
        x,
        c_wv: acc[0].value(),
        s_wv: acc[1].value(),
        c_vw: acc[2].value(),
        s_vw: acc[3].value(),
        err_bound,
        terms_used: n_terms,
    })
}

/// Values along the grid from the sweep. Entry g holds the values at the g-th
/// grid point (after its W atom, before its V atom); the second result is x = 1.
pub fn sweep_profile(grid: &MergedGrid, alpha: f64) -> (Vec<TrigValues>, TrigValues) {
    let mut s = TrigValues::AT_ORIGIN;
    let mut out = Vec::with_capacity(grid.len());
    for p in grid.points() {
        if p.w > 0.0 {
            let am = alpha * p.w;
            s.c_wv -= am * s.s_vw;
            s.s_wv += am * s.c_vw;
        }
        out.push(s);
        if p.v > 0.0 {
            let av = alpha * p.v;
            s.c_vw -= av * s.s_wv;
            s.s_vw += av * s.c_wv;
        }
    }
    (out, s)
}

/// Sweep value at x = 1 only.
pub fn sweep_at_one(grid: &MergedGrid, alpha: f64) -> TrigValues {
    let mut s = TrigValues::AT_ORIGIN;
    for p in grid.points() {
        if p.w > 0.0 {
            let am = alpha * p.w;
            s.c_wv -= am * s.s_vw;
            s.s_wv += am * s.c_vw;
        }
        if p.v > 0.0 {
            let av = alpha * p.v;
            s.c_vw -= av * s.s_wv;
            s.s_vw += av * s.c_wv;
        }
    }
    s
}

/// Rough forward-error scale of the sweep.
fn sweep_error(grid: &MergedGrid, alpha: f64, magnitude: f64) -> f64 {
    4.0 * f64::EPSILON * grid.len() as f64 * (1.0 + alpha * (grid.w_total() + grid.v_total())) * magnitude.max(1.0)
}

/// Evaluate by the requested route.
pub fn trig_eval_route(t: &KernelTable, alpha: f64, x: f64, route: Route) -> Result<TrigEval> {
    check_alpha(alpha)?;
    let use_series = match route {
        Route::Series => return trig_eval(t, alpha, x, None),
        Route::Sweep => false,
        Route::Auto => match trig_eval(t, alpha, x, None) {
            Ok(e) if e.err_bound < AUTO_SERIES_BOUND => return Ok(e),
            _ => false,
        },
    };
    debug_assert!(!use_series);
    let loc = t.locate(x)?;
    let v = match loc {
        Loc::Origin => TrigValues::AT_ORIGIN,
        Loc::One => sweep_at_one(t.grid(), alpha),
        Loc::Grid(g) => sweep_profile(t.grid(), alpha).0[g],
    };
    let mag = v.c_wv.abs().max(v.s_wv.abs()).max(v.c_vw.abs()).max(v.s_vw.abs());
    Ok(TrigEval {
        alpha,
        x,
        c_wv: v.c_wv,
        s_wv: v.s_wv,
        c_vw: v.c_vw,
        s_vw: v.s_vw,
        err_bound: sweep_error(t.grid(), alpha, mag),
        terms_used: 0,
    })
}

pub fn pythagorean_residual(t: &KernelTable, alpha: f64, x: f64) -> Result<f64> {
    Ok(trig_eval(t, alpha, x, None)?.values().pythagorean_defect().abs())
}

/// Values at every grid point by the series route.
pub fn series_profile(t: &KernelTable, alpha: f64) -> Result<Vec<TrigEval>> {
    t.grid().positions().iter().map(|&x| trig_eval(t, alpha, x, None)).collect()
}

/// Largest violation of the four first-order relations
/// `D_W^- C_{W,V} = -a S_{V,W}`, `D_W^- S_{W,V} = a C_{V,W}`,
/// `D_V^+ C_{V,W} = -a S_{W,V}`, `D_V^+ S_{V,W} = a C_{W,V}`,
/// with derivatives taken as difference quotients at the atoms.
pub fn derivative_relation_residual(t: &KernelTable, alpha: f64) -> Result<f64> {
    if alpha == 0.0 {
        return Ok(0.0);
    }
    let prof = series_profile(t, alpha)?;
    let one = trig_eval(t, alpha, 1.0, None)?;
    let grid = t.grid();
    let mut worst: f64 = 0.0;

    let w_idx = grid.w_indices();
    let mut prev = TrigValues::AT_ORIGIN;
    for &g in &w_idx {
        let m = grid.points()[g].w;
        let cur = prof[g].values();
        worst = worst.max(((cur.c_wv - prev.c_wv) / m + alpha * cur.s_vw).abs());
        worst = worst.max(((cur.s_wv - prev.s_wv) / m - alpha * cur.c_vw).abs());
        prev = cur;
    }

    let v_idx = grid.v_indices();
    for (i, &g) in v_idx.iter().enumerate() {
        let m = grid.points()[g].v;
        let cur = prof[g].values();
        let next = match v_idx.get(i + 1) {
            Some(&h) => prof[h].values(),
            None => one.values(),
        };
        worst = worst.max(((next.c_vw - cur.c_vw) / m + alpha * cur.s_wv).abs());
        worst = worst.max(((next.s_vw - cur.s_vw) / m - alpha * cur.c_wv).abs());
    }
    Ok(worst)
}

pub fn write_csv<W: Write>(rows: &[TrigEval], mut out: W) -> Result<()> {
    writeln!(out, "alpha,x,c_wv,s_wv,c_vw,s_vw,err_bound")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{},{},{}", r.alpha, r.x, r.c_wv, r.s_wv, r.c_vw, r.s_vw, r.err_bound)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::diagonal_tables;
    use crate::measure::{AtomicMeasure, Chirality};

    fn small() -> KernelTable {
        let w = AtomicMeasure::from_atoms([(0.1, 0.3), (0.4, 0.2), (0.6, 0.5), (0.9, 0.25)], Chirality::RightContinuous)
            .unwrap();
        let v = AtomicMeasure::from_atoms([(0.0, 0.2), (0.4, 0.4), (0.7, 0.1)], Chirality::LeftContinuous).unwrap();
        diagonal_tables(&w, &v, 8).unwrap()
    }

    #[test]
    fn zero_alpha_is_exact() {
        let t = small();
        let e = trig_eval(&t, 0.0, 0.4, None).unwrap();
        assert_eq!((e.c_wv, e.s_wv, e.c_vw, e.s_vw), (1.0, 0.0, 1.0, 0.0));
        assert_eq!(pythagorean_residual(&t, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(derivative_relation_residual(&t, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn series_parity_structure() {
        let t = small();
        for n in 0..4 {
            for term in series_terms(&t, 1.3, Loc::One, n) {
                let even = term.power % 2 == 0;
                assert_eq!(even, matches!(term.func, TrigFn::CWV | TrigFn::CVW));
            }
        }
    }

    #[test]
    fn sweep_matches_series_on_atoms() {
        let t = small();
        for alpha in [0.5, 2.0, 7.0] {
            let (prof, one) = sweep_profile(t.grid(), alpha);
            let s = trig_eval(&t, alpha, 1.0, None).unwrap();
            assert!((one.c_wv - s.c_wv).abs() < 1e-12);
            assert!((one.s_vw - s.s_vw).abs() < 1e-12);
            for (g, x) in t.grid().positions().into_iter().enumerate() {
                let s = trig_eval(&t, alpha, x, None).unwrap();
                assert!((prof[g].c_vw - s.c_vw).abs() < 1e-12);
                assert!((prof[g].s_wv - s.s_wv).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn relations_hold_on_atoms() {
        let t = small();
        for alpha in [0.3, 1.0, 5.0] {
            assert!(derivative_relation_residual(&t, alpha).unwrap() < 1e-9);
        }
    }

    #[test]
    fn off_grid_is_rejected() {
        let t = small();
        assert!(matches!(trig_eval(&t, 1.0, 0.55, None), Err(Error::NotOnGrid(_))));
    }
}
