use crate::error::{Error, Result};

pub const MAX_SWEEPS: usize = 30;

#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// ascending
    pub values: Vec<f64>,
    /// column k (entries `k*n .. (k+1)*n`) is the unit eigenvector of `values[k]`
    pub vectors: Vec<f64>,
    pub sweeps: usize,
    pub off_norm: f64,
}

fn off_diagonal_norm(a: &[f64], n: usize) -> (f64, f64) {
    let mut off = 0.0;
    let mut all = 0.0;
    for i in 0..n {
        for j in 0..n {
            let x = a[i * n + j] * a[i * n + j];
            all += x;
            if i != j {
                off += x;
            }
        }
    }
    (off.sqrt(), all.sqrt())
}

/// Cyclic Jacobi rotations on a dense symmetric row-major matrix.
///
/// After the first few sweeps an off-diagonal entry that no longer changes
/// either diagonal entry in floating point is zeroed outright, so the
/// iteration terminates with an exactly diagonal matrix.
pub fn jacobi_eigen(mut a: Vec<f64>, n: usize) -> Result<SymmetricEigen> {
    assert_eq!(a.len(), n * n);
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let mut sweeps = 0;
    loop {
        let (off, frob) = off_diagonal_norm(&a, n);
        if off == 0.0 || off <= 1e-300 * frob.max(1.0) {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::NotConverged { off_norm: off, sweeps });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let g = 100.0 * apq.abs();
                if sweeps > 4 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                let h = aqq - app;
                let t = if h.abs() + g == h.abs() {
                    apq / h
                } else {
                    let theta = 0.5 * h / apq;
                    let t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                    if theta < 0.0 {
                        -t
                    } else {
                        t
                    }
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for r in 0..n {
                    if r != p && r != q {
                        let arp = a[r * n + p];
                        let arq = a[r * n + q];
                        let np = arp - s * (arq + tau * arp);
                        let nq = arq + s * (arp - tau * arq);
                        a[r * n + p] = np;
                        a[p * n + r] = np;
                        a[r * n + q] = nq;
                        a[q * n + r] = nq;
                    }
                    let vrp = v[r * n + p];
                    let vrq = v[r * n + q];
                    v[r * n + p] = vrp - s * (vrq + tau * vrp);
                    v[r * n + q] = vrq + s * (vrp - tau * vrq);
                }
            }
        }
    }
    let (off_norm, _) = off_diagonal_norm(&a, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (k, &i) in order.iter().enumerate() {
        for r in 0..n {
            vectors[k * n + r] = v[r * n + i];
        }
    }
    Ok(SymmetricEigen { values, vectors, sweeps, off_norm })
}
