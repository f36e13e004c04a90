//! Finite atomic measures on the torus and their Stieltjes calculus.
//!
//! W is stored right-continuous (atoms in (0,1]) and V left-continuous
//! (atoms in [0,1)). Cumulative values start at 0 at the origin.

mod spec;

pub use spec::{compile, Component, MeasureSpec};

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::digest::hex_digest;
use crate::error::{Error, Result};
use crate::sum::CompensatedSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chirality {
    /// cadlag, the W convention: `W(x) = sum of masses at positions <= x`
    RightContinuous,
    /// caglad, the V convention: `V(x) = sum of masses at positions < x`
    LeftContinuous,
}

impl Chirality {
    pub fn as_str(self) -> &'static str {
        match self {
            Chirality::RightContinuous => "right_continuous",
            Chirality::LeftContinuous => "left_continuous",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Value,
    OppositeLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Closure {
    /// (a, b]
    LeftOpenRightClosed,
    /// [a, b)
    LeftClosedRightOpen,
    Closed,
    Open,
}

impl Closure {
    fn includes_left(self) -> bool {
        matches!(self, Closure::LeftClosedRightOpen | Closure::Closed)
    }
    fn includes_right(self) -> bool {
        matches!(self, Closure::LeftOpenRightClosed | Closure::Closed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure {
    positions: Vec<f64>,
    masses: Vec<f64>,
    /// prefix sums, `cumulative[k]` = mass of the first k atoms
    cumulative: Vec<f64>,
    chirality: Chirality,
    resolution: usize,
    digest: String,
}

impl AtomicMeasure {
    /// Build from (position, mass) pairs. Positions are sorted and coinciding
    /// positions merged. A right-continuous atom declared at 0 is the same
    /// torus point as 1 and is stored there; likewise a left-continuous atom
    /// at 1 is stored at 0.
    pub fn from_atoms<I>(atoms: I, chirality: Chirality) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        Self::build(atoms, chirality, 0, None)
    }

    pub(crate) fn build<I>(
        atoms: I,
        chirality: Chirality,
        resolution: usize,
        digest: Option<String>,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut raw: Vec<(f64, f64)> = Vec::new();
        for (p, m) in atoms {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(Error::InvalidSpec(format!("atom position {p} outside [0,1]")));
            }
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::InvalidSpec(format!("atom mass {m} at {p} is not positive")));
            }
            let p = match chirality {
                Chirality::RightContinuous if p == 0.0 => 1.0,
                Chirality::LeftContinuous if p == 1.0 => 0.0,
                _ => p,
            };
            raw.push((p, m));
        }
        if raw.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut positions = Vec::with_capacity(raw.len());
        let mut masses: Vec<f64> = Vec::with_capacity(raw.len());
        for (p, m) in raw {
            if positions.last() == Some(&p) {
                *masses.last_mut().unwrap() += m;
            } else {
                positions.push(p);
                masses.push(m);
            }
        }
        let mut cumulative = Vec::with_capacity(masses.len() + 1);
        let mut acc = CompensatedSum::new();
        cumulative.push(0.0);
        for &m in &masses {
            acc.add(m);
            cumulative.push(acc.value());
        }
        let digest = digest.unwrap_or_else(|| content_digest(&positions, &masses, chirality));
        Ok(Self { positions, masses, cumulative, chirality, resolution, digest })
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }
    pub fn len(&self) -> usize {
        self.positions.len()
    }
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
    pub fn chirality(&self) -> Chirality {
        self.chirality
    }
    pub fn resolution(&self) -> usize {
        self.resolution
    }
    pub fn digest(&self) -> &str {
        &self.digest
    }
    pub fn total_mass(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    fn count_le(&self, x: f64) -> usize {
        self.positions.partition_point(|&p| p <= x)
    }
    fn count_lt(&self, x: f64) -> usize {
        self.positions.partition_point(|&p| p < x)
    }

    /// Cumulative distribution value at `x` in [0,1].
    pub fn eval(&self, x: f64, side: Side) -> f64 {
        let inclusive = match (self.chirality, side) {
            (Chirality::RightContinuous, Side::Value) => true,
            (Chirality::RightContinuous, Side::OppositeLimit) => false,
            (Chirality::LeftContinuous, Side::Value) => false,
            (Chirality::LeftContinuous, Side::OppositeLimit) => true,
        };
        let k = if inclusive { self.count_le(x) } else { self.count_lt(x) };
        self.cumulative[k]
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(x, Side::Value)
    }

    /// Periodic extension to the real line: `F(x + k) = F(x) + k * total`.
    pub fn eval_unrolled(&self, x: f64) -> f64 {
        let k = x.floor();
        let frac = x - k;
        k * self.total_mass() + self.value(frac)
    }

    fn index_range(&self, a: f64, b: f64, closure: Closure) -> Result<(usize, usize)> {
        if a > b {
            return Err(Error::InvalidArgument(format!("interval endpoints reversed: {a} > {b}")));
        }
        let lo = if closure.includes_left() { self.count_lt(a) } else { self.count_le(a) };
        let hi = if closure.includes_right() { self.count_le(b) } else { self.count_lt(b) };
        Ok((lo, hi.max(lo)))
    }

    pub fn interval_mass(&self, a: f64, b: f64, closure: Closure) -> Result<f64> {
        let (lo, hi) = self.index_range(a, b, closure)?;
        Ok(self.cumulative[hi] - self.cumulative[lo])
    }

    /// Sum of `f[k] * mass[k]` over atoms in the interval, ascending order.
    pub fn stieltjes_sum(&self, f: &[f64], a: f64, b: f64, closure: Closure) -> Result<f64> {
        if f.len() != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), got: f.len() });
        }
        let (lo, hi) = self.index_range(a, b, closure)?;
        let mut acc = CompensatedSum::new();
        for k in lo..hi {
            acc.add(f[k] * self.masses[k]);
        }
        Ok(acc.value())
    }

    /// One-sided difference quotient adapted to the measure.
    ///
    /// Right-continuous: `(f[k] - f[k-1]) / m[k]`, with `wrap` standing in for
    /// `f[-1]` (the value just after the origin). Left-continuous:
    /// `(f[k+1] - f[k]) / m[k]`, with `wrap` standing in for `f[N]` (the value
    /// at the end of the period). For a periodic function pass the value at the
    /// last (resp. first) atom.
    pub fn discrete_derivative(&self, f: &[f64], wrap: f64) -> Result<Vec<f64>> {
        let n = self.len();
        if n < 2 {
            return Err(Error::TooFewAtoms { need: 2, got: n });
        }
        if f.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: f.len() });
        }
        let out = match self.chirality {
            Chirality::RightContinuous => (0..n)
                .map(|k| {
                    let prev = if k == 0 { wrap } else { f[k - 1] };
                    (f[k] - prev) / self.masses[k]
                })
                .collect(),
            Chirality::LeftContinuous => (0..n)
                .map(|k| {
                    let next = if k + 1 == n { wrap } else { f[k + 1] };
                    (next - f[k]) / self.masses[k]
                })
                .collect(),
        };
        Ok(out)
    }

    /// Cumulative values at the atoms, `value(u_k)` for each k.
    pub fn values_at_atoms(&self) -> Vec<f64> {
        (0..self.len())
            .map(|k| match self.chirality {
                Chirality::RightContinuous => self.cumulative[k + 1],
                Chirality::LeftContinuous => self.cumulative[k],
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# chirality={} resolution={} digest={}",
            self.chirality.as_str(),
            self.resolution,
            self.digest
        )?;
        writeln!(out, "position,mass")?;
        for (p, m) in self.positions.iter().zip(&self.masses) {
            writeln!(out, "{p},{m}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty file".into()))??;
        let mut chirality = None;
        let mut resolution = 0usize;
        let mut digest = None;
        for field in header.trim_start_matches('#').split_whitespace() {
            match field.split_once('=') {
                Some(("chirality", "right_continuous")) => chirality = Some(Chirality::RightContinuous),
                Some(("chirality", "left_continuous")) => chirality = Some(Chirality::LeftContinuous),
                Some(("resolution", r)) => {
                    resolution = r.parse().map_err(|_| Error::Parse(format!("bad resolution {r}")))?
                }
                Some(("digest", d)) => digest = Some(d.to_string()),
                _ => return Err(Error::Parse(format!("unexpected header field {field}"))),
            }
        }
        let chirality = chirality.ok_or_else(|| Error::Parse("missing chirality".into()))?;
        match lines.next() {
            Some(Ok(l)) if l.trim() == "position,mass" => {}
            _ => return Err(Error::Parse("missing column header".into())),
        }
        let mut atoms = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (p, m) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("bad row {line}")))?;
            let p: f64 = p.trim().parse().map_err(|_| Error::Parse(format!("bad position {p}")))?;
            let m: f64 = m.trim().parse().map_err(|_| Error::Parse(format!("bad mass {m}")))?;
            atoms.push((p, m));
        }
        Self::build(atoms, chirality, resolution, digest)
    }
}

fn content_digest(positions: &[f64], masses: &[f64], chirality: Chirality) -> String {
    let mut bytes = Vec::with_capacity(16 * positions.len() + 16);
    bytes.extend_from_slice(chirality.as_str().as_bytes());
    for (p, m) in positions.iter().zip(masses) {
        bytes.extend_from_slice(&p.to_le_bytes());
        bytes.extend_from_slice(&m.to_le_bytes());
    }
    hex_digest(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_atom(ch: Chirality) -> AtomicMeasure {
        AtomicMeasure::from_atoms([(0.5, 1.0)], ch).unwrap()
    }

    #[test]
    fn cadlag_step() {
        let w = half_atom(Chirality::RightContinuous);
        assert_eq!(w.eval(0.5, Side::Value), 1.0);
        assert_eq!(w.eval(0.5, Side::OppositeLimit), 0.0);
        let v = half_atom(Chirality::LeftContinuous);
        assert_eq!(v.eval(0.5, Side::Value), 0.0);
        assert_eq!(v.eval(0.5, Side::OppositeLimit), 1.0);
    }

    #[test]
    fn interval_closures() {
        let w = half_atom(Chirality::RightContinuous);
        assert_eq!(w.interval_mass(0.4, 0.5, Closure::LeftOpenRightClosed).unwrap(), 1.0);
        assert_eq!(w.interval_mass(0.5, 0.6, Closure::LeftClosedRightOpen).unwrap(), 1.0);
        assert_eq!(w.interval_mass(0.5, 0.6, Closure::LeftOpenRightClosed).unwrap(), 0.0);
        assert_eq!(w.interval_mass(0.5, 0.5, Closure::Closed).unwrap(), 1.0);
        assert_eq!(w.interval_mass(0.5, 0.5, Closure::Open).unwrap(), 0.0);
        assert!(w.interval_mass(0.6, 0.5, Closure::Closed).is_err());
    }

    #[test]
    fn origin_atoms_wrap() {
        let w = AtomicMeasure::from_atoms([(0.0, 0.5), (0.5, 0.5)], Chirality::RightContinuous).unwrap();
        assert_eq!(w.positions(), &[0.5, 1.0]);
        assert_eq!(w.value(0.0), 0.0);
        let v = AtomicMeasure::from_atoms([(1.0, 0.5), (0.5, 0.5)], Chirality::LeftContinuous).unwrap();
        assert_eq!(v.positions(), &[0.0, 0.5]);
        assert_eq!(v.value(0.0), 0.0);
        assert_eq!(v.value(1.0), 1.0);
    }

    #[test]
    fn merges_duplicates() {
        let w = AtomicMeasure::from_atoms([(0.3, 0.25), (0.3, 0.5)], Chirality::RightContinuous).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w.total_mass(), 0.75);
    }

    #[test]
    fn unrolled_period() {
        // dyadic points so that x + 1 - 1 == x
        let w = AtomicMeasure::from_atoms([(0.25, 0.3), (0.75, 0.4)], Chirality::RightContinuous).unwrap();
        for x in [0.125, 0.25, 0.5, 0.75, 0.875] {
            assert!((w.eval_unrolled(x + 1.0) - w.eval_unrolled(x) - 0.7).abs() < 1e-15);
        }
    }

    #[test]
    fn derivative_of_cumulative_is_one() {
        let w = AtomicMeasure::from_atoms([(0.2, 0.3), (0.5, 0.1), (0.7, 0.4)], Chirality::RightContinuous)
            .unwrap();
        let d = w.discrete_derivative(&w.values_at_atoms(), 0.0).unwrap();
        for x in d {
            assert!((x - 1.0).abs() < 1e-14);
        }
        let c = w.discrete_derivative(&[2.0, 2.0, 2.0], 2.0).unwrap();
        assert!(c.iter().all(|&x| x == 0.0));
        let one = AtomicMeasure::from_atoms([(0.2, 0.3)], Chirality::RightContinuous).unwrap();
        assert!(matches!(one.discrete_derivative(&[1.0], 0.0), Err(Error::TooFewAtoms { .. })));
    }

    #[test]
    fn csv_round_trip() {
        let w = AtomicMeasure::from_atoms([(0.1, 1.0 / 3.0), (0.7, 0.123456789)], Chirality::RightContinuous)
            .unwrap();
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        let back = AtomicMeasure::read_csv(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back, w);
    }
}
