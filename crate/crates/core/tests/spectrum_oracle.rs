use num_complex::Complex64;
use z2lgt::lattice::*;
use z2lgt::linalg::fidelity;
use z2lgt::spectrum::*;

fn model(l: usize, m: f64, eps: f64) -> Model {
    Model::new(ModelParams::new(l, m, eps).unwrap()).unwrap()
}

#[test]
fn full_spectrum_matches_dense_oracle_at_four_sites() {
    let md = model(4, 0.1, 1.0);
    let dense = dense_spectrum(&md.hamiltonian);
    let it = lowest_k(&md.hamiltonian, md.dim(), &SolverConfig::default()).unwrap();
    for (a, b) in it.energies.iter().zip(&dense.energies) {
        assert!((a - b).abs() < 1e-10);
    }
    assert!(it.orthonormality_error() < 1e-9);
}

#[test]
fn ground_energy_matches_dense_oracle_at_six_sites() {
    let md = model(6, 0.1, 1.0);
    let dense = dense_spectrum(&md.hamiltonian);
    let gs = ground_state(&md.hamiltonian, &SolverConfig::default()).unwrap();
    assert!((gs.ground_energy() - dense.energies[0]).abs() < 1e-10);
    assert!(gs.residuals[0] < 1e-10);
    assert!(fidelity(gs.ground_vector(), &dense.vectors[0]) > 1.0 - 1e-10);
}

#[test]
fn lowest_states_at_eight_sites() {
    let md = model(8, 0.1, 1.0);
    let dense = dense_spectrum(&md.hamiltonian);
    let it = lowest_k(&md.hamiltonian, 30, &SolverConfig::default()).unwrap();
    for i in 0..30 {
        assert!((it.energies[i] - dense.energies[i]).abs() < 1e-9, "state {i}");
        assert!(it.residuals[i] < 1e-9);
    }
    assert!(it.energies.windows(2).all(|w| w[0] <= w[1] + 1e-12));
    assert!(it.orthonormality_error() < 1e-9);
}

#[test]
fn ten_sites_run_beyond_one_krylov_space() {
    let md = model(10, 0.1, 1.0);
    let cfg = SolverConfig {
        krylov_dim: 40,
        ..SolverConfig::default()
    };
    let dense = dense_spectrum(&md.hamiltonian);
    let it = lowest_k(&md.hamiltonian, 4, &cfg).unwrap();
    for i in 0..4 {
        assert!((it.energies[i] - dense.energies[i]).abs() < 1e-9);
    }
}

#[test]
fn single_state_request_is_the_ground_state() {
    let md = model(6, 0.3, 0.5);
    let a = ground_state(&md.hamiltonian, &SolverConfig::default()).unwrap();
    let b = lowest_k(&md.hamiltonian, 1, &SolverConfig::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn strong_coupling_ground_state_is_an_even_flip_pair() {
    let md = model(4, 0.1, 1e3);
    let gs = ground_state(&md.hamiltonian, &SolverConfig::default()).unwrap();
    let layout = md.layout();
    let omega = layout.strong_coupling_vacuum();
    let flipped = omega ^ layout.link_mask();
    let v = gs.ground_vector();
    let a = v[md.sector.index_of(omega).unwrap()];
    let b = v[md.sector.index_of(flipped).unwrap()];
    // the flipped copy costs 2 eps L more electric energy, so the
    // "combination" is dominated by the low-energy copy
    assert!(a.norm_sqr() > 0.999);
    assert!(b.norm_sqr() < 1e-6);
}

#[test]
fn momentum_pairs_are_degenerate_and_resolved_by_conjugation() {
    let md = model(8, 0.1, 1.0);
    let mut sol = lowest_k(&md.hamiltonian, 20, &SolverConfig::default()).unwrap();
    let cvals = resolve_with_symmetry(&mut sol, &md.conjugation, 1e-8);
    for (i, cv) in cvals.iter().enumerate() {
        // each resolved state is a C eigenvector with a unit-modulus eigenvalue
        assert!((cv.norm() - 1.0).abs() < 1e-8, "state {i}: {cv}");
        let cvec = md.conjugation.apply(&sol.vectors[i]);
        assert!(fidelity(&cvec, &sol.vectors[i]) > 1.0 - 1e-8);
    }
    // C^2 is a translation, so a non-real eigenvalue of C comes with its
    // partner of conjugate momentum at the same energy
    for g in sol.multiplets(1e-8) {
        let phases: Vec<Complex64> = g.iter().map(|&i| cvals[i]).collect();
        for p in &phases {
            if p.im.abs() > 1e-6 {
                assert!(phases.iter().any(|q| (q - p.conj()).norm() < 1e-6 || (q + p.conj()).norm() < 1e-6));
            }
        }
    }
}

#[test]
fn eigenvalues_do_not_depend_on_basis_order() {
    let md = model(6, 0.1, 1.0);
    let dense = dense_spectrum(&md.hamiltonian);
    // reverse the basis by conjugating with a permutation
    let d = md.dim();
    let trip: Vec<_> = md
        .hamiltonian
        .triplets()
        .map(|(r, c, v)| (d - 1 - r, d - 1 - c, v))
        .collect();
    let h2 = z2lgt::SparseOperator::from_triplets(md.sector.tag(), d, trip);
    let it = lowest_k(&h2, 10, &SolverConfig::default()).unwrap();
    for i in 0..10 {
        assert!((it.energies[i] - dense.energies[i]).abs() < 1e-9);
    }
}

#[test]
fn iterative_solver_is_deterministic() {
    let md = model(8, 0.1, 1.0);
    let a = lowest_k(&md.hamiltonian, 5, &SolverConfig::default()).unwrap();
    let b = lowest_k(&md.hamiltonian, 5, &SolverConfig::default()).unwrap();
    assert_eq!(a, b);
}
