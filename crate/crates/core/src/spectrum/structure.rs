use crate::kernels::MergedGrid;

/// Cluster structure of the V atoms: atoms not separated by W mass move together.
#[derive(Debug, Clone, PartialEq)]
pub struct Structure {
    /// number of periodic eigenvalues (cyclic clusters)
    pub n_periodic: usize,
    /// number of Dirichlet eigenvalues (path clusters not pinned to the origin)
    pub n_dirichlet: usize,
    /// smallest positive W mass between consecutive clusters
    pub min_gap: f64,
    /// smallest cluster V mass
    pub min_cluster: f64,
}

pub fn structure(grid: &MergedGrid) -> Structure {
    // W mass in each gap (y_j, y_{j+1}] between consecutive V atoms, and the
    // W mass before the first and after the last V atom.
    let mut head = 0.0;
    let mut tail = 0.0;
    let mut gaps = Vec::new();
    let mut seen_v = false;
    let mut clusters = Vec::new();
    let mut cluster_mass = 0.0;
    for p in grid.points() {
        if p.w > 0.0 {
            if seen_v {
                tail += p.w;
            } else {
                head += p.w;
            }
        }
        if p.v > 0.0 {
            if seen_v {
                if tail > 0.0 {
                    gaps.push(tail);
                    clusters.push(cluster_mass);
                    cluster_mass = 0.0;
                }
                tail = 0.0;
            }
            seen_v = true;
            cluster_mass += p.v;
        }
    }
    clusters.push(cluster_mass);
    let internal = gaps.len();
    let wrap = head + tail;
    let n_periodic = if wrap > 0.0 {
        internal + 1
    } else {
        // the first and last clusters are glued across the origin
        let last = clusters.pop().unwrap();
        if clusters.is_empty() {
            clusters.push(last);
        } else {
            clusters[0] += last;
        }
        internal.max(1)
    };
    if wrap > 0.0 {
        gaps.push(wrap);
    }
    let path_clusters = internal + 1;
    let pinned = (head == 0.0) as usize + (tail == 0.0) as usize;
    let n_dirichlet = path_clusters.saturating_sub(pinned);
    Structure {
        n_periodic,
        n_dirichlet,
        min_gap: gaps.iter().cloned().fold(f64::INFINITY, f64::min),
        min_cluster: clusters.iter().cloned().fold(f64::INFINITY, f64::min),
    }
}
