//! Diagonal kernel sequences `F_k(x,x)`, `G_k(x,x)` on the merged atom grid.
//!
//! With `p_n = F_{2n}`, `q_n = F_{2n+1}` and `r_n = G_{2n}`, `t_n = G_{2n+1}`:
//!
//! ```text
//! p_{n+1}(x) = sum_{w <= x} dW(w) sum_{y < w} dV(y) p_n(y)     p_0 = 1, q_0 = W
//! r_{n+1}(x) = sum_{y < x} dV(y) sum_{w <= y} dW(w) r_n(w)     r_0 = 1, t_0 = V
//! ```
//!
//! and likewise for `q`, `t`. One sweep over the grid per level gives O(NK).

mod grid;

pub use grid::{GridPoint, Loc, MergedGrid};

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measure::AtomicMeasure;
use crate::sum::CompensatedSum;

#[derive(Debug, Clone)]
pub struct KernelTable {
    order: usize,
    w: Arc<AtomicMeasure>,
    v: Arc<AtomicMeasure>,
    grid: MergedGrid,
    // level-major: entry n * G + g
    f_even: Vec<f64>,
    f_odd: Vec<f64>,
    g_even: Vec<f64>,
    g_odd: Vec<f64>,
    f_at_one: Vec<f64>,
    g_at_one: Vec<f64>,
}

/// One application of the F-type double sum. Returns grid values and the value at 1.
fn step_f(grid: &[GridPoint], p: &[f64], out: &mut [f64]) -> f64 {
    let mut inner = CompensatedSum::new();
    let mut outer = CompensatedSum::new();
    for (g, pt) in grid.iter().enumerate() {
        if pt.w > 0.0 {
            outer.add(pt.w * inner.value());
        }
        out[g] = outer.value();
        if pt.v > 0.0 {
            inner.add(pt.v * p[g]);
        }
    }
    outer.value()
}

fn step_g(grid: &[GridPoint], r: &[f64], out: &mut [f64]) -> f64 {
    let mut inner = CompensatedSum::new();
    let mut outer = CompensatedSum::new();
    for (g, pt) in grid.iter().enumerate() {
        if pt.w > 0.0 {
            inner.add(pt.w * r[g]);
        }
        out[g] = outer.value();
        if pt.v > 0.0 {
            outer.add(pt.v * inner.value());
        }
    }
    outer.value()
}

/// `alpha^k * f` without spurious overflow when `f` is tiny.
pub(crate) fn scaled_term(alpha: f64, k: usize, f: f64) -> f64 {
    if f == 0.0 {
        return 0.0;
    }
    if k == 0 {
        return f;
    }
    if alpha == 0.0 {
        return 0.0;
    }
    let p = alpha.powi(k as i32);
    if p.is_finite() && p > f64::MIN_POSITIVE {
        let t = p * f;
        if t.is_finite() {
            return t;
        }
    }
    (k as f64 * alpha.ln() + f.ln()).exp()
}

/// Upper bound on `sum_{m >= n} x^m / m!`: the leading term times a
/// geometric factor once terms decrease, `e^x` before that. May be infinite.
fn exp_tail(x: f64, n: usize) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let ratio = x / (n as f64 + 1.0);
    if ratio < 1.0 {
        let log_lead = n as f64 * x.ln() - ln_factorial(n);
        (log_lead - (1.0 - ratio).ln()).exp()
    } else {
        x.exp()
    }
}

pub(crate) fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Which of the four diagonal sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    F,
    G,
}

impl KernelTable {
    pub fn build(w: Arc<AtomicMeasure>, v: Arc<AtomicMeasure>, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument("kernel order K must be positive".into()));
        }
        let grid = MergedGrid::new(&w, &v)?;
        let pts = grid.points().to_vec();
        let ng = pts.len();
        let levels = order + 1;
        let mut f_even = vec![0.0; levels * ng];
        let mut f_odd = vec![0.0; levels * ng];
        let mut g_even = vec![0.0; levels * ng];
        let mut g_odd = vec![0.0; levels * ng];
        let mut f_at_one = vec![0.0; 2 * levels];
        let mut g_at_one = vec![0.0; 2 * levels];

        let mut wc = CompensatedSum::new();
        let mut vc = CompensatedSum::new();
        for (g, pt) in pts.iter().enumerate() {
            wc.add(pt.w);
            f_even[g] = 1.0;
            g_even[g] = 1.0;
            f_odd[g] = wc.value();
            g_odd[g] = vc.value();
            vc.add(pt.v);
        }
        f_at_one[0] = 1.0;
        g_at_one[0] = 1.0;
        f_at_one[1] = grid.w_total();
        g_at_one[1] = grid.v_total();

        for n in 0..order {
            let (cur, next) = (n * ng, (n + 1) * ng);
            let (lo, hi) = f_even.split_at_mut(next);
            f_at_one[2 * n + 2] = step_f(&pts, &lo[cur..], &mut hi[..ng]);
            let (lo, hi) = f_odd.split_at_mut(next);
            f_at_one[2 * n + 3] = step_f(&pts, &lo[cur..], &mut hi[..ng]);
            let (lo, hi) = g_even.split_at_mut(next);
            g_at_one[2 * n + 2] = step_g(&pts, &lo[cur..], &mut hi[..ng]);
            let (lo, hi) = g_odd.split_at_mut(next);
            g_at_one[2 * n + 3] = step_g(&pts, &lo[cur..], &mut hi[..ng]);
        }

        Ok(Self { order, w, v, grid, f_even, f_odd, g_even, g_odd, f_at_one, g_at_one })
    }

    pub fn order(&self) -> usize {
        self.order
    }
    pub fn w(&self) -> &Arc<AtomicMeasure> {
        &self.w
    }
    pub fn v(&self) -> &Arc<AtomicMeasure> {
        &self.v
    }
    pub fn grid(&self) -> &MergedGrid {
        &self.grid
    }
    pub fn locate(&self, x: f64) -> Result<Loc> {
        self.grid.locate(x)
    }

    /// `F_2(1,1)`.
    pub fn f2_total(&self) -> f64 {
        self.f_at_one[2]
    }
    pub fn g2_total(&self) -> f64 {
        self.g_at_one[2]
    }

    /// `F_k(1,1)` for `k <= 2K+1`.
    pub fn f_at_one(&self) -> &[f64] {
        &self.f_at_one
    }
    pub fn g_at_one(&self) -> &[f64] {
        &self.g_at_one
    }

    /// Diagonal value of the k-th kernel of `family` at `loc`.
    pub fn value(&self, family: Family, k: usize, loc: Loc) -> f64 {
        assert!(k <= 2 * self.order + 1, "kernel index {k} beyond table order");
        match loc {
            Loc::Origin => {
                if k == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            Loc::One => match family {
                Family::F => self.f_at_one[k],
                Family::G => self.g_at_one[k],
            },
            Loc::Grid(g) => {
                let ng = self.grid.len();
                let idx = (k / 2) * ng + g;
                match (family, k % 2) {
                    (Family::F, 0) => self.f_even[idx],
                    (Family::F, _) => self.f_odd[idx],
                    (Family::G, 0) => self.g_even[idx],
                    (Family::G, _) => self.g_odd[idx],
                }
            }
        }
    }

    pub fn f(&self, k: usize, loc: Loc) -> f64 {
        self.value(Family::F, k, loc)
    }
    pub fn g(&self, k: usize, loc: Loc) -> f64 {
        self.value(Family::G, k, loc)
    }

    /// `a_n = (-1)^n (F_{2n}(1,1) + G_{2n}(1,1))` for `n = 1..=K`; entry 0 is `a_1`.
    pub fn secular_coefficients(&self) -> Vec<f64> {
        (1..=self.order)
            .map(|n| {
                let s = self.f_at_one[2 * n] + self.g_at_one[2 * n];
                if n % 2 == 0 {
                    s
                } else {
                    -s
                }
            })
            .collect()
    }

    /// Bound on `sum_{m >= n} alpha^{2m + parity} K_{2m + parity}(1,1)` for one
    /// of the four sequences, `n <= K + 1`. Combines the factorial envelope with
    /// the chain-splitting inequality `K_{2(a+b)+e} <= K_{2a+e} * K_{2b}`.
    fn tail_one(&self, family: Family, odd: bool, alpha: f64, n: usize) -> f64 {
        let at_one = match family {
            Family::F => &self.f_at_one,
            Family::G => &self.g_at_one,
        };
        let e = odd as usize;
        let kk = self.order;
        let term = |m: usize| scaled_term(alpha, 2 * m + e, at_one[2 * m + e]);
        let even = |m: usize| scaled_term(alpha, 2 * m, at_one[2 * m]);

        // sum_j alpha^{2j} K_{2j}, bounded using the top computed term
        let t_top = even(kk);
        let certified = if t_top < 1.0 {
            let head = crate::sum::compensated_sum((0..kk).map(even));
            let s_abs = head / (1.0 - t_top);
            if n <= kk {
                let mid = crate::sum::compensated_sum((n..kk).map(term));
                mid + term(kk) * s_abs
            } else {
                term(kk) * (s_abs - 1.0).max(0.0)
            }
        } else {
            f64::INFINITY
        };

        let x = alpha * alpha * at_one[2];
        let lead = if odd { alpha * at_one[1] } else { 1.0 };
        let envelope = if lead == 0.0 { 0.0 } else { lead * exp_tail(x, n) };
        certified.min(envelope)
    }

    /// Bound on the truncation error of all four generalized trigonometric
    /// series when terms `0..n` are kept.
    pub fn remainder_bound(&self, alpha: f64, n: usize) -> f64 {
        if n > self.order + 1 {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for family in [Family::F, Family::G] {
            for odd in [false, true] {
                worst = worst.max(self.tail_one(family, odd, alpha, n));
            }
        }
        worst
    }

    /// `d_0 + sum_k d_k F_k(x,x)` where `|d_k| <= growth^k`. Terms are added in
    /// pairs until the certified tail drops below `tol`.
    pub fn maclaurin_eval<D>(&self, d: D, growth: f64, x: f64, tol: f64) -> Result<MaclaurinValue>
    where
        D: Fn(usize) -> f64,
    {
        let loc = self.locate(x)?;
        let mut acc = CompensatedSum::new();
        for n in 0..=self.order {
            acc.add(d(2 * n) * self.f(2 * n, loc));
            acc.add(d(2 * n + 1) * self.f(2 * n + 1, loc));
            let tail = self.tail_one(Family::F, false, growth, n + 1) + self.tail_one(Family::F, true, growth, n + 1);
            if tail < tol {
                return Ok(MaclaurinValue { value: acc.value(), err_bound: tail, terms: 2 * n + 2 });
            }
        }
        Err(Error::InsufficientOrder { alpha: growth, tol, order: self.order })
    }

    /// CSV with columns `n,F_2n,F_2n+1,G_2n,G_2n+1` at x = 1.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "n,F_2n,F_2n+1,G_2n,G_2n+1")?;
        for n in 0..=self.order {
            writeln!(
                out,
                "{n},{},{},{},{}",
                self.f_at_one[2 * n],
                self.f_at_one[2 * n + 1],
                self.g_at_one[2 * n],
                self.g_at_one[2 * n + 1]
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaclaurinValue {
    pub value: f64,
    pub err_bound: f64,
    pub terms: usize,
}

/// Convenience wrapper that clones the measures into shared handles.
pub fn diagonal_tables(w: &AtomicMeasure, v: &AtomicMeasure, order: usize) -> Result<KernelTable> {
    KernelTable::build(Arc::new(w.clone()), Arc::new(v.clone()), order)
}
