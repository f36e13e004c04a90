use crate::error::{Error, Result};
use crate::measure::{AtomicMeasure, Chirality};

/// One position of the merged W/V atom grid; a zero mass means "no atom".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub x: f64,
    pub w: f64,
    pub v: f64,
}

/// W and V atoms merged by position. At a shared position the W event is
/// processed before the V event.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedGrid {
    points: Vec<GridPoint>,
    w_total: f64,
    v_total: f64,
}

/// Where an evaluation point sits relative to the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loc {
    Origin,
    Grid(usize),
    One,
}

impl MergedGrid {
    pub fn new(w: &AtomicMeasure, v: &AtomicMeasure) -> Result<Self> {
        if w.chirality() != Chirality::RightContinuous || v.chirality() != Chirality::LeftContinuous {
            return Err(Error::InvalidArgument("W must be right-continuous and V left-continuous".into()));
        }
        if w.is_empty() || v.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        let (wp, wm) = (w.positions(), w.masses());
        let (vp, vm) = (v.positions(), v.masses());
        let mut points = Vec::with_capacity(wp.len() + vp.len());
        let (mut i, mut j) = (0, 0);
        while i < wp.len() || j < vp.len() {
            let xw = wp.get(i).copied().unwrap_or(f64::INFINITY);
            let xv = vp.get(j).copied().unwrap_or(f64::INFINITY);
            let x = xw.min(xv);
            let mut p = GridPoint { x, w: 0.0, v: 0.0 };
            if xw == x {
                p.w = wm[i];
                i += 1;
            }
            if xv == x {
                p.v = vm[j];
                j += 1;
            }
            points.push(p);
        }
        Ok(Self { points, w_total: w.total_mass(), v_total: v.total_mass() })
    }

    pub fn points(&self) -> &[GridPoint] {
        &self.points
    }
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
    pub fn w_total(&self) -> f64 {
        self.w_total
    }
    pub fn v_total(&self) -> f64 {
        self.v_total
    }

    pub fn positions(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x).collect()
    }

    /// Grid indices carrying a V atom, ascending.
    pub fn v_indices(&self) -> Vec<usize> {
        (0..self.points.len()).filter(|&g| self.points[g].v > 0.0).collect()
    }

    /// Grid indices carrying a W atom, ascending.
    pub fn w_indices(&self) -> Vec<usize> {
        (0..self.points.len()).filter(|&g| self.points[g].w > 0.0).collect()
    }

    pub fn locate(&self, x: f64) -> Result<Loc> {
        if x == 0.0 {
            return Ok(Loc::Origin);
        }
        if x == 1.0 {
            return Ok(Loc::One);
        }
        match self.points.binary_search_by(|p| p.x.total_cmp(&x)) {
            Ok(g) => Ok(Loc::Grid(g)),
            Err(_) => Err(Error::NotOnGrid(x)),
        }
    }
}
