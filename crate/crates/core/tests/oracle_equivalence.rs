mod common;

use kf_core::kernels::KernelTable;
use kf_core::oracle::{assemble_cycle, compare_spectra, dense_spectrum};
use kf_core::spectrum::{solve_spectrum, BoundaryCondition};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn random_pairs_match_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for trial in 0..200 {
        let n = 2 + trial % 30;
        let (w, v) = common::random_pair(&mut rng, n);
        let t = KernelTable::build(w.clone(), v.clone(), v.len() + 2).unwrap();
        for bc in [BoundaryCondition::Periodic, BoundaryCondition::Dirichlet] {
            let op = assemble_cycle(&w, &v, bc).unwrap();
            let ds = dense_spectrum(&op).unwrap();
            let sp = solve_spectrum(&t, bc, ds.eigenvalues.len()).unwrap_or_else(|e| panic!("trial {trial} {bc:?}: {e}"));
            let r = compare_spectra(&sp, &ds).unwrap();
            worst = worst.max(r.max_rel_gap);
            assert!(r.max_rel_gap <= 1e-8, "trial {trial} {bc:?}: {r:?}\n{:?}\n{:?}", sp.eigenvalues(), ds.eigenvalues);
            assert_eq!(r.multiplicity_mismatches, 0, "trial {trial} {bc:?}");
            assert!(r.min_cosine >= 0.999, "trial {trial} {bc:?}: {r:?}");
        }
    }
    eprintln!("worst relative gap {worst:e}");
}
