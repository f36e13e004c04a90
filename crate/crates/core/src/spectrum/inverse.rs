//! Eigenfunction values at the V atoms by inverse iteration.
//!
//! On atomic data an eigenfunction is linear in `W` between V atoms, so its
//! values at the atoms solve a mass/conductance chain problem `A f = lambda M f`.
//! V atoms with no W mass between them carry one value and are merged. With
//! the eigenvalue from the secular function as shift, one or two solves with
//! `A - lambda M` give the vector; shooting with the transfer matrices is
//! unstable for localized modes. The cycle is ordered zig-zag so that the
//! matrix is banded and each solve costs O(N).

use crate::kernels::MergedGrid;

use super::BoundaryCondition;

#[derive(Debug, Clone)]
pub(crate) struct Chain {
    /// cluster masses
    mass: Vec<f64>,
    /// (i, j, conductance) edges between clusters
    edges: Vec<(usize, usize, f64)>,
    /// grounding conductances (pinned ends)
    ground: Vec<f64>,
    /// cluster of each V atom, `None` when pinned
    cluster_of: Vec<Option<usize>>,
    /// W mass from the origin to the first cluster and from the last cluster
    /// back to the origin (periodic) or to 1 (pinned)
    lead_in: f64,
    lead_out: f64,
    cyclic: bool,
}

impl Chain {
    pub(crate) fn new(grid: &MergedGrid, bc: BoundaryCondition) -> Self {
        // W mass between consecutive V atoms; gaps[0] precedes the first atom
        let mut gaps = vec![0.0];
        let mut vm = Vec::new();
        for p in grid.points() {
            if p.w > 0.0 {
                *gaps.last_mut().unwrap() += p.w;
            }
            if p.v > 0.0 {
                vm.push(p.v);
                gaps.push(0.0);
            }
        }
        let n = vm.len();
        let (lead, tail) = (gaps[0], gaps[n]);
        let inner = &gaps[1..n];
        match bc {
            BoundaryCondition::Periodic => {
                let mut cluster_of = vec![None; n];
                let mut mass = Vec::new();
                for j in 0..n {
                    if j == 0 || inner[j - 1] > 0.0 {
                        mass.push(0.0);
                    }
                    *mass.last_mut().unwrap() += vm[j];
                    cluster_of[j] = Some(mass.len() - 1);
                }
                let wrap = lead + tail;
                let nc = mass.len();
                if wrap == 0.0 && nc > 1 {
                    // the last cluster continues into the first
                    let last = nc - 1;
                    let moved = mass.pop().unwrap();
                    mass[0] += moved;
                    for c in cluster_of.iter_mut() {
                        if *c == Some(last) {
                            *c = Some(0);
                        }
                    }
                }
                let nc = mass.len();
                let mut edges = Vec::new();
                let mut k = 0;
                for g in inner.iter().filter(|g| **g > 0.0) {
                    edges.push((k, (k + 1) % nc, 1.0 / g));
                    k += 1;
                }
                if wrap > 0.0 && nc > 1 {
                    edges.push((nc - 1, 0, 1.0 / wrap));
                }
                Chain { mass, edges, ground: vec![0.0; nc], cluster_of, lead_in: lead, lead_out: tail, cyclic: true }
            }
            BoundaryCondition::Dirichlet => {
                let mut cluster_of = vec![None; n];
                let mut mass = Vec::new();
                let mut edges = Vec::new();
                let total: f64 = gaps.iter().sum();
                let mut before = lead;
                let mut first_gap = 0.0;
                let mut pending = 0.0;
                for j in 0..n {
                    if j > 0 {
                        before += inner[j - 1];
                    }
                    let after = total - before;
                    if before <= 0.0 || after <= 0.0 {
                        continue;
                    }
                    if mass.is_empty() {
                        first_gap = before;
                        mass.push(0.0);
                    } else if pending > 0.0 {
                        edges.push((mass.len() - 1, mass.len(), 1.0 / pending));
                        mass.push(0.0);
                    }
                    pending = 0.0;
                    *mass.last_mut().unwrap() += vm[j];
                    cluster_of[j] = Some(mass.len() - 1);
                    if j + 1 < n {
                        pending = inner[j];
                    }
                }
                let nc = mass.len();
                let mut ground = vec![0.0; nc];
                let mut last_gap = 0.0;
                if nc > 0 {
                    let last_atom = cluster_of.iter().rposition(|c| c.is_some()).unwrap();
                    let up_to: f64 = lead + inner[..last_atom].iter().sum::<f64>();
                    last_gap = total - up_to;
                    ground[0] += 1.0 / first_gap;
                    ground[nc - 1] += 1.0 / last_gap;
                }
                Chain { mass, edges, ground, cluster_of, lead_in: first_gap, lead_out: last_gap, cyclic: false }
            }
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.mass.len()
    }

    /// Values at every V atom from cluster values.
    pub(crate) fn expand(&self, x: &[f64]) -> Vec<f64> {
        self.cluster_of.iter().map(|c| c.map_or(0.0, |k| x[k])).collect()
    }

    /// `(f(0), D_W f(0))` from cluster values: `f` is linear in `W` on the
    /// stretch through the origin.
    pub(crate) fn origin_state(&self, x: &[f64]) -> (f64, f64) {
        let n = x.len();
        if n == 0 {
            return (0.0, 0.0);
        }
        if self.cyclic {
            let wrap = self.lead_in + self.lead_out;
            if wrap == 0.0 || n == 1 {
                return (x[0], 0.0);
            }
            let slope = (x[0] - x[n - 1]) / wrap;
            (x[0] - self.lead_in * slope, slope)
        } else {
            (0.0, x[0] / self.lead_in)
        }
    }

    /// Zig-zag position of each cluster; consecutive clusters and the wrap
    /// edge end up at most two apart.
    fn order(&self) -> Vec<usize> {
        let n = self.len();
        let mut pos = vec![0; n];
        if !self.cyclic {
            for (i, p) in pos.iter_mut().enumerate() {
                *p = i;
            }
            return pos;
        }
        let (mut lo, mut hi) = (0, n);
        for slot in 0..n {
            let node = if slot % 2 == 0 {
                lo += 1;
                lo - 1
            } else {
                hi -= 1;
                hi
            };
            pos[node] = slot;
        }
        pos
    }
}

/// Sparse-row LU with partial pivoting; rows hold few entries for banded input.
struct Lu {
    rows: Vec<Vec<(usize, f64)>>,
    /// multipliers applied to the right-hand side, in elimination order
    ops: Vec<(usize, usize, f64)>,
    perm_swaps: Vec<(usize, usize)>,
}

fn get(row: &[(usize, f64)], col: usize) -> f64 {
    row.iter().find(|e| e.0 == col).map_or(0.0, |e| e.1)
}

fn axpy(dst: &mut Vec<(usize, f64)>, src: &[(usize, f64)], f: f64, from_col: usize) {
    for &(c, v) in src.iter().filter(|e| e.0 >= from_col) {
        match dst.iter_mut().find(|e| e.0 == c) {
            Some(e) => e.1 += f * v,
            None => dst.push((c, f * v)),
        }
    }
}

impl Lu {
    /// `scale` is the operator's size, used to floor pivots.
    fn factor(mut rows: Vec<Vec<(usize, f64)>>, band: usize, scale: f64) -> Lu {
        let n = rows.len();
        let mut ops = Vec::new();
        let mut perm_swaps = Vec::new();
        for k in 0..n {
            let last = (k + band).min(n - 1);
            let p = (k..=last).max_by(|&a, &b| get(&rows[a], k).abs().total_cmp(&get(&rows[b], k).abs())).unwrap();
            if p != k {
                rows.swap(p, k);
                perm_swaps.push((k, p));
            }
            let mut piv = get(&rows[k], k);
            if piv.abs() < f64::EPSILON * scale {
                // an exact eigenvalue shift: nudge the pivot
                piv = f64::EPSILON * scale;
                match rows[k].iter_mut().find(|e| e.0 == k) {
                    Some(e) => e.1 = piv,
                    None => rows[k].push((k, piv)),
                }
            }
            let pivot_row = rows[k].clone();
            for i in k + 1..=last {
                let a = get(&rows[i], k);
                if a == 0.0 {
                    continue;
                }
                let f = -a / piv;
                axpy(&mut rows[i], &pivot_row, f, k + 1);
                rows[i].retain(|e| e.0 != k);
                ops.push((k, i, f));
            }
        }
        Lu { rows, ops, perm_swaps }
    }

    fn solve(&self, b: &mut [f64]) {
        let mut swaps = self.perm_swaps.iter().peekable();
        let mut ops = self.ops.iter().peekable();
        for k in 0..b.len() {
            if let Some(&&(at, p)) = swaps.peek() {
                if at == k {
                    b.swap(k, p);
                    swaps.next();
                }
            }
            while let Some(&&(at, i, f)) = ops.peek() {
                if at != k {
                    break;
                }
                b[i] += f * b[k];
                ops.next();
            }
        }
        for k in (0..b.len()).rev() {
            let mut acc = b[k];
            let mut d = 0.0;
            for &(c, v) in &self.rows[k] {
                if c == k {
                    d = v;
                } else if c > k {
                    acc -= v * b[c];
                }
            }
            b[k] = acc / d;
        }
    }
}

fn m_dot(x: &[f64], y: &[f64], m: &[f64]) -> f64 {
    x.iter().zip(y).zip(m).map(|((a, b), w)| a * b * w).sum()
}

/// `count` (1 or 2) M-orthonormal cluster vectors for the eigenvalue `lambda`.
pub(crate) fn inverse_iteration(chain: &Chain, lambda: f64, count: usize) -> Vec<Vec<f64>> {
    let n = chain.len();
    let pos = chain.order();
    let band = if chain.cyclic { 2 } else { 1 };
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut add = |i: usize, j: usize, v: f64| {
        let (pi, pj) = (pos[i], pos[j]);
        match rows[pi].iter_mut().find(|e| e.0 == pj) {
            Some(e) => e.1 += v,
            None => rows[pi].push((pj, v)),
        }
    };
    for i in 0..n {
        add(i, i, chain.ground[i] - lambda * chain.mass[i]);
    }
    for &(i, j, c) in &chain.edges {
        add(i, i, c);
        add(j, j, c);
        add(i, j, -c);
        add(j, i, -c);
    }
    let scale = (0..n)
        .map(|i| chain.ground[i] + lambda * chain.mass[i])
        .chain(chain.edges.iter().map(|e| e.2))
        .fold(f64::MIN_POSITIVE, f64::max);
    let lu = Lu::factor(rows, band, scale);

    // deterministic, generic starting vectors
    let mut xs: Vec<Vec<f64>> = (0..count)
        .map(|c| (0..n).map(|j| 1.0 + ((j as f64 + 1.0) * (0.754_877_666 + 0.569_840_29 * c as f64)).fract()).collect())
        .collect();
    const ITERATIONS: usize = 3;
    for _ in 0..ITERATIONS {
        for x in xs.iter_mut() {
            let mut b = vec![0.0; n];
            for i in 0..n {
                b[pos[i]] = chain.mass[i] * x[i];
            }
            lu.solve(&mut b);
            for i in 0..n {
                x[i] = b[pos[i]];
            }
        }
        // M-orthonormalize, twice for stability
        for k in 0..count {
            for _ in 0..2 {
                for j in 0..k {
                    let p = m_dot(&xs[k], &xs[j], &chain.mass);
                    let (head, tail) = xs.split_at_mut(k);
                    for (a, b) in tail[0].iter_mut().zip(&head[j]) {
                        *a -= p * b;
                    }
                }
            }
            let nrm = m_dot(&xs[k], &xs[k], &chain.mass).sqrt();
            for a in xs[k].iter_mut() {
                *a /= nrm;
            }
        }
    }
    xs
}
