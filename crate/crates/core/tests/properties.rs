mod common;

use std::sync::Arc;

use kf_core::dirichlet::{green_apply, green_matrix, minmax_check, trace, BridgeKernel};
use kf_core::fields::mode_weights;
use kf_core::gentrig::{trig_eval_route, Route};
use kf_core::kernels::KernelTable;
use kf_core::measure::{AtomicMeasure, Chirality, Closure};
use kf_core::oracle::jacobi_eigen;
use kf_core::oracle::{assemble_cycle, dense_spectrum, fredholm_coefficients};
use kf_core::spectrum::{coefficients, fractional_apply, fractional_solve, synthesize};
use kf_core::spectrum::{solve_spectrum, BoundaryCondition};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pair(seed: u64, n: usize) -> (Arc<AtomicMeasure>, Arc<AtomicMeasure>) {
    common::random_pair(&mut ChaCha8Rng::seed_from_u64(seed), n)
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

/// `F_k(1,1)` and `G_k(1,1)` by direct double sums over atom pairs.
fn brute_kernels_at_one(w: &AtomicMeasure, v: &AtomicMeasure, kmax: usize) -> (Vec<f64>, Vec<f64>) {
    let (wp, wm) = (w.positions(), w.masses());
    let (vp, vm) = (v.positions(), v.masses());
    // W-type step: x -> sum_{w <= x} dW(w) sum_{y < w} dV(y) h(y), h given at V atoms
    let f_inner = |h: &[f64], wi: usize| -> f64 { (0..vp.len()).filter(|&j| vp[j] < wp[wi]).map(|j| vm[j] * h[j]).sum() };
    let g_inner = |h: &[f64], yj: usize| -> f64 { (0..wp.len()).filter(|&i| wp[i] <= vp[yj]).map(|i| wm[i] * h[i]).sum() };

    let mut f = vec![1.0, w.total_mass()];
    let mut p: Vec<f64> = vec![1.0; vp.len()];
    let mut q: Vec<f64> = vp.iter().map(|&y| wp.iter().zip(wm).filter(|(x, _)| **x <= y).map(|(_, m)| m).sum()).collect();
    while f.len() <= kmax {
        for h in [&mut p, &mut q] {
            let at_w: Vec<f64> = (0..wp.len()).map(|i| f_inner(h, i)).collect();
            let at_one: f64 = at_w.iter().zip(wm).map(|(a, m)| a * m).sum();
            *h = vp.iter().map(|&y| (0..wp.len()).filter(|&i| wp[i] <= y).map(|i| wm[i] * at_w[i]).sum()).collect();
            f.push(at_one);
        }
    }

    let mut g = vec![1.0, v.total_mass()];
    let mut r: Vec<f64> = vec![1.0; wp.len()];
    let mut t: Vec<f64> = wp.iter().map(|&x| vp.iter().zip(vm).filter(|(y, _)| **y < x).map(|(_, m)| m).sum()).collect();
    while g.len() <= kmax {
        for h in [&mut r, &mut t] {
            let at_v: Vec<f64> = (0..vp.len()).map(|j| g_inner(h, j)).collect();
            let at_one: f64 = at_v.iter().zip(vm).map(|(a, m)| a * m).sum();
            *h = wp.iter().map(|&x| (0..vp.len()).filter(|&j| vp[j] < x).map(|j| vm[j] * at_v[j]).sum()).collect();
            g.push(at_one);
        }
    }
    f.truncate(kmax + 1);
    g.truncate(kmax + 1);
    (f, g)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn interval_mass_is_additive(
        atoms in prop::collection::vec((0.0f64..1.0, 0.01f64..2.0), 1..40),
        mut cuts in prop::collection::vec(0.0f64..1.0, 3),
    ) {
        let w = AtomicMeasure::from_atoms(atoms.iter().map(|&(p, m)| (p.max(1e-9), m)), Chirality::RightContinuous).unwrap();
        cuts.sort_by(f64::total_cmp);
        let (a, b, c) = (cuts[0], cuts[1], cuts[2]);
        let whole = w.interval_mass(a, c, Closure::LeftOpenRightClosed).unwrap();
        let parts = w.interval_mass(a, b, Closure::LeftOpenRightClosed).unwrap()
            + w.interval_mass(b, c, Closure::LeftOpenRightClosed).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-12 * w.total_mass());
        // W(c) - W(a) is the mass of (a, c]
        prop_assert!((w.value(c) - w.value(a) - whole).abs() <= 1e-12 * w.total_mass());
        let closed = w.interval_mass(0.0, 1.0, Closure::Closed).unwrap();
        prop_assert!(rel_close(closed, w.total_mass(), 1e-14));
    }

    #[test]
    fn kernel_table_matches_double_sums(seed in any::<u64>(), n in 2usize..10) {
        let (w, v) = pair(seed, n);
        let t = KernelTable::build(w.clone(), v.clone(), 5).unwrap();
        let (f, g) = brute_kernels_at_one(&w, &v, 11);
        for k in 0..=11 {
            prop_assert!(rel_close(t.f_at_one()[k], f[k], 1e-11), "F_{k}: {} vs {}", t.f_at_one()[k], f[k]);
            prop_assert!(rel_close(t.g_at_one()[k], g[k], 1e-11), "G_{k}: {} vs {}", t.g_at_one()[k], g[k]);
        }
    }

    #[test]
    fn pythagorean_identity_on_the_grid(seed in any::<u64>(), n in 2usize..12, alpha in 0.0f64..4.0) {
        let (w, v) = pair(seed, n);
        let t = KernelTable::build(w, v, 40).unwrap();
        let xs = t.grid().positions();
        for &x in xs.iter().step_by(3).chain([0.0, 1.0].iter()) {
            let e = trig_eval_route(&t, alpha, x, Route::Sweep).unwrap();
            let scale = 1.0 + (e.c_wv * e.c_vw).abs() + (e.s_wv * e.s_vw).abs();
            prop_assert!(e.values().pythagorean_defect().abs() <= 1e-10 * scale, "x={x} alpha={alpha}: {e:?}");
        }
    }

    #[test]
    fn periodic_eigenvalues_lie_below_dirichlet(seed in any::<u64>(), n in 2usize..20) {
        let (w, v) = pair(seed, n);
        let t = KernelTable::build(w, v.clone(), v.len() + 2).unwrap();
        let count = v.len().saturating_sub(1).max(1);
        let p = solve_spectrum(&t, BoundaryCondition::Periodic, count).unwrap();
        let d = solve_spectrum(&t, BoundaryCondition::Dirichlet, count).unwrap();
        let r = minmax_check(&p, &d).unwrap();
        prop_assert!(r.all_hold, "{:?}", r.rows);
    }

    #[test]
    fn green_kernel_is_symmetric_and_positive(seed in any::<u64>(), n in 2usize..16) {
        let (w, v) = pair(seed, n);
        let k = BridgeKernel::new(w.clone()).unwrap();
        let g = green_matrix(&k, &v);
        let m = v.masses();
        let n = v.len();
        let mut s = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(g[i * n + j], g[j * n + i]);
                s[i * n + j] = m[i].sqrt() * g[i * n + j] * m[j].sqrt();
            }
        }
        let e = jacobi_eigen(s, n).unwrap();
        let top = e.values.last().copied().unwrap_or(0.0);
        prop_assert!(e.values[0] >= -1e-12 * top, "{:?}", e.values);

        // the O(N) apply agrees with the dense product
        let f: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 5) as f64 - 2.0).collect();
        let fast = green_apply(&k, &v, &f).unwrap();
        for i in 0..n {
            let slow: f64 = (0..n).map(|j| g[i * n + j] * f[j] * m[j]).sum();
            prop_assert!((fast[i] - slow).abs() <= 1e-12 * (1.0 + slow.abs()));
        }

        // trace of the kernel operator is the sum of its eigenvalues
        let eig_sum: f64 = e.values.iter().sum();
        prop_assert!(rel_close(trace(&k, &v), eig_sum, 1e-10));
    }

    #[test]
    fn mode_weights_do_not_increase(seed in any::<u64>(), n in 2usize..16, kappa in 0.1f64..5.0, beta in 0.1f64..3.0) {
        let (w, v) = pair(seed, n);
        let t = KernelTable::build(w, v.clone(), v.len() + 2).unwrap();
        let sp = solve_spectrum(&t, BoundaryCondition::Periodic, v.len()).unwrap();
        let wts = mode_weights(&sp, kappa, beta, sp.len());
        prop_assert!(wts.windows(2).all(|p| p[1] <= p[0]), "{wts:?}");
        prop_assert!(wts.iter().all(|x| *x > 0.0 && x.is_finite()));
    }

    #[test]
    fn eigenbasis_round_trips(seed in any::<u64>(), n in 2usize..14, s in -2.0f64..2.0) {
        let (w, v) = pair(seed, n);
        let t = KernelTable::build(w, v.clone(), v.len() + 2).unwrap();
        let sp = solve_spectrum(&t, BoundaryCondition::Periodic, v.len()).unwrap();
        let c: Vec<f64> = (0..sp.len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let back = fractional_solve(&sp, &fractional_apply(&sp, &c, s).unwrap(), s).unwrap();
        for (a, b) in c.iter().zip(&back) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
        let values = synthesize(&sp, &c).unwrap();
        let again = coefficients(&sp, &values).unwrap();
        for (a, b) in c.iter().zip(&again) {
            prop_assert!((a - b).abs() <= 1e-8, "{c:?} vs {again:?}");
        }
    }
}

#[test]
fn fredholm_roots_match_dense_dirichlet_spectrum() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..40 {
        let (w, v) = common::random_pair(&mut rng, 2 + trial % 7);
        let op = assemble_cycle(&w, &v, BoundaryCondition::Dirichlet).unwrap();
        let ds = dense_spectrum(&op).unwrap();
        let poly = fredholm_coefficients(&op).unwrap();
        let roots = poly.roots().unwrap();
        assert_eq!(roots.len(), ds.eigenvalues.len(), "trial {trial}");
        for (r, l) in roots.iter().zip(&ds.eigenvalues) {
            assert!(rel_close(*r, *l, 1e-8), "trial {trial}: {roots:?} vs {:?}", ds.eigenvalues);
        }
        assert_eq!(poly.coefficients[0], 1.0);
    }
}
