use num_complex::Complex64;
use proptest::prelude::*;
use z2lgt::lattice::*;
use z2lgt::linalg::{eigh, fidelity};
use z2lgt::sparse::SparseOperator;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Hamiltonian written directly with bare Pauli operators, boundary term
/// carrying its explicit Jordan-Wigner string.
fn spin_hamiltonian(params: &ModelParams) -> OperatorSum {
    let l = params.sites;
    let mut h = OperatorSum::new();
    for n in 1..l {
        h.push(c(0.0, -0.5), vec![Op::SigmaPlus(n), Op::LinkZ(n), Op::SigmaMinus(n + 1)]);
        h.push(c(0.0, 0.5), vec![Op::SigmaMinus(n), Op::LinkZ(n), Op::SigmaPlus(n + 1)]);
    }
    let mut boundary: Vec<Op> = (1..l).map(Op::SigmaZ).collect();
    boundary.extend([Op::SigmaPlus(l), Op::LinkZ(l), Op::SigmaMinus(1)]);
    let coef = c(0.0, -1.0).powu((l - 1) as u32) * 0.5;
    let mut b = OperatorSum::new();
    b.push(coef, boundary);
    h.extend(&b);
    h.extend(&b.dagger());
    for n in 1..=l {
        let s = if n % 2 == 0 { 1.0 } else { -1.0 };
        h.push_real(0.5 * params.mass * s, vec![Op::SigmaZ(n)]);
        h.push_real(params.coupling, vec![Op::LinkX(n)]);
    }
    h
}

#[test]
fn fermionic_and_spin_forms_agree_up_to_constant() {
    for l in [4, 6] {
        let params = ModelParams::new(l, 0.37, 0.8).unwrap();
        let full = Basis::full(params.layout()).unwrap();
        let h = build_hamiltonian(&params, &full).unwrap();
        let hs = spin_hamiltonian(&params).build(&full).unwrap();
        // m Σ (-1)^n n_n = m/2 Σ (-1)^n σ^z + m/2 Σ (-1)^n, and the last sum vanishes
        assert!(h.max_abs_diff(&hs).unwrap() < 1e-13, "L={l}");
    }
}

#[test]
fn jordan_wigner_operators_anticommute() {
    let layout = QubitLayout::new(4).unwrap();
    let full = Basis::full(layout).unwrap();
    let single = |op: Op| {
        let mut s = OperatorSum::new();
        s.push_real(1.0, vec![op]);
        s.build(&full).unwrap()
    };
    let id = SparseOperator::identity(full.tag(), full.dim());
    for n in 1..=4 {
        for l in 1..=4 {
            let a = single(Op::Annihilate(n));
            let b = single(Op::Create(l));
            let anti = a.matmul(&b).unwrap().add(&b.matmul(&a).unwrap()).unwrap();
            let expect = if n == l { id.clone() } else { SparseOperator::zeros(full.tag(), full.dim()) };
            assert!(anti.max_abs_diff(&expect).unwrap() < 1e-14);
            let aa = single(Op::Annihilate(l));
            let anti2 = a.matmul(&aa).unwrap().add(&aa.matmul(&a).unwrap()).unwrap();
            assert!(anti2.max_abs() < 1e-14);
        }
        assert!(single(Op::Create(n)).adjoint().max_abs_diff(&single(Op::Annihilate(n))).unwrap() < 1e-15);
    }
}

#[test]
fn gauss_generators_commute_with_full_hamiltonian() {
    for l in [4, 6] {
        let params = ModelParams::new(l, 0.1, 1.0).unwrap();
        let full = Basis::full(params.layout()).unwrap();
        let h = build_hamiltonian(&params, &full).unwrap();
        assert!(h.is_hermitian(1e-14));
        let id = SparseOperator::identity(full.tag(), full.dim());
        for n in 1..=l {
            let g = gauss_generator(&params.layout(), n).build(&full).unwrap();
            assert!(h.commutator_max(&g).unwrap() < 1e-12);
            assert!(g.matmul(&g).unwrap().max_abs_diff(&id).unwrap() < 1e-14);
        }
    }
}

#[test]
fn sector_hamiltonian_is_the_projection_of_the_full_one() {
    let params = ModelParams::new(6, 0.2, 0.7).unwrap();
    let full = Basis::full(params.layout()).unwrap();
    let sector = physical_sector(&params);
    let hf = build_hamiltonian(&params, &full).unwrap();
    let hs = build_hamiltonian(&params, &sector).unwrap();
    for i in 0..sector.dim() {
        for j in 0..sector.dim() {
            let a = hs.get(i, j);
            let b = hf.get(sector.state(i) as usize, sector.state(j) as usize);
            assert!((a - b).norm() < 1e-15);
        }
    }
    // no leakage: the column sums of |H| outside the sector vanish
    for j in 0..sector.dim() {
        for (r, cidx, v) in hf.triplets() {
            if cidx == sector.state(j) as usize && v.norm() > 0.0 {
                assert!(sector.index_of(r as u64).is_some());
            }
        }
    }
}

#[test]
fn hamiltonian_for_wrong_basis_is_rejected() {
    let params = ModelParams::new(6, 0.1, 1.0).unwrap();
    let other = enumerate_sector(QubitLayout::new(4).unwrap());
    assert!(build_hamiltonian(&params, &other).is_err());
    assert!(build_charge_conjugation(&params, &other).is_err());
}

#[test]
fn charge_conjugation_is_a_unitary_symmetry() {
    for (l, eps) in [(4, 1.0), (6, 0.2), (6, 1.0), (8, 0.5)] {
        let params = ModelParams::new(l, 0.1, eps).unwrap();
        let sector = physical_sector(&params);
        let h = build_hamiltonian(&params, &sector).unwrap();
        let cc = build_charge_conjugation(&params, &sector).unwrap();
        assert!(h.commutator_max(&cc).unwrap() < 1e-12, "L={l} eps={eps}");
        let id = SparseOperator::identity(sector.tag(), sector.dim());
        assert!(cc.adjoint().matmul(&cc).unwrap().max_abs_diff(&id).unwrap() < 1e-12);
    }
}

#[test]
fn charge_conjugation_fixes_strong_coupling_vacuum() {
    let params = ModelParams::new(6, 0.1, 1.0).unwrap();
    let sector = physical_sector(&params);
    let cc = build_charge_conjugation(&params, &sector).unwrap();
    let omega = sector.basis_vector(params.layout().strong_coupling_vacuum()).unwrap();
    let out = cc.apply(&omega);
    assert!((out.iter().zip(&omega).map(|(a, b)| (a - b).norm()).sum::<f64>()) < 1e-14);
}

fn shift_two(layout: &QubitLayout, s: u64) -> u64 {
    let l = layout.sites();
    let mut out = 0;
    for n in 1..=l {
        let m = (n + 1) % l + 1;
        if layout.occupied(s, n) {
            out |= 1 << layout.matter_qubit(m);
        }
        if layout.link_x(s, n) == -1 {
            out |= 1 << layout.link_qubit(m);
        }
    }
    out
}

#[test]
fn conjugation_squared_translates_by_two_sites() {
    for l in [4, 6] {
        let layout = QubitLayout::new(l).unwrap();
        let sector = enumerate_sector(layout);
        let cc = ChargeConjugation::new(layout);
        for &s in sector.states().unwrap() {
            let (a, p) = cc.apply_label(s);
            let (b, q) = cc.apply_label(a);
            assert_eq!(b, shift_two(&layout, s));
            assert!(((p * q).norm() - 1.0).abs() < 1e-14);
        }
    }
}

#[test]
fn conjugation_to_the_power_l_is_a_phase() {
    let params = ModelParams::new(6, 0.1, 1.0).unwrap();
    let sector = physical_sector(&params);
    let cc = build_charge_conjugation(&params, &sector).unwrap();
    let mut p = cc.clone();
    for _ in 1..params.sites {
        p = p.matmul(&cc).unwrap();
    }
    let phase = p.get(0, 0);
    assert!((phase.norm() - 1.0).abs() < 1e-12);
    let id = SparseOperator::identity(sector.tag(), sector.dim()).scale(phase);
    assert!(p.max_abs_diff(&id).unwrap() < 1e-12);
}

#[test]
fn strong_coupling_ground_state_is_omega_infinity() {
    let params = ModelParams::new(4, 0.1, 1e3).unwrap();
    let sector = physical_sector(&params);
    let h = build_hamiltonian(&params, &sector).unwrap().to_dense();
    let (_, vecs) = eigh(&h);
    let g: Vec<Complex64> = vecs.column(0).iter().cloned().collect();
    let omega = sector.basis_vector(params.layout().strong_coupling_vacuum()).unwrap();
    assert!(fidelity(&g, &omega) > 0.999);
}

#[test]
fn pure_hopping_spectrum_is_symmetric() {
    let params = ModelParams::new(4, 0.0, 0.0).unwrap();
    let sector = physical_sector(&params);
    let (vals, _) = eigh(&build_hamiltonian(&params, &sector).unwrap().to_dense());
    let n = vals.len();
    for i in 0..n {
        assert!((vals[i] + vals[n - 1 - i]).abs() < 1e-12);
    }
}

#[test]
fn ground_energy_decreases_with_coupling() {
    let mut last = f64::INFINITY;
    for k in 0..12 {
        let eps = 0.25 * k as f64;
        let params = ModelParams::new(4, 0.1, eps).unwrap();
        let sector = physical_sector(&params);
        let (vals, _) = eigh(&build_hamiltonian(&params, &sector).unwrap().to_dense());
        assert!(vals[0] <= last + 1e-12);
        last = vals[0];
    }
}

#[test]
fn wilson_lines_square_to_identity_and_are_gauge_covariant() {
    let layout = QubitLayout::new(6).unwrap();
    let full = Basis::full(layout).unwrap();
    for n in 1..=6 {
        for l in 1..=6 {
            if n == l {
                assert!(wilson_line(&layout, n, l).is_err());
                continue;
            }
            let w = wilson_line(&layout, n, l).unwrap();
            let mut s = OperatorSum::new();
            s.terms.push((Complex64::new(1.0, 0.0), w.then(&w)));
            let ww = s.build(&full).unwrap();
            let id = SparseOperator::identity(full.tag(), full.dim());
            assert!(ww.max_abs_diff(&id).unwrap() == 0.0);
        }
    }
}

#[test]
fn mesons_stay_in_the_physical_sector() {
    let params = ModelParams::new(6, 0.1, 1.0).unwrap();
    let sector = physical_sector(&params);
    let (_, vecs) = eigh(&build_hamiltonian(&params, &sector).unwrap().to_dense());
    let g: Vec<Complex64> = vecs.column(0).iter().cloned().collect();
    for n in 1..=6 {
        for l in 1..=6 {
            let v = meson_basis_vector(&sector, n, l, &g).unwrap();
            assert_eq!(v.len(), sector.dim());
            // and in the full space the operator keeps Gauss law
            let mut op = OperatorSum::new();
            op.terms.push((Complex64::new(1.0, 0.0), meson_operator(&params.layout(), n, l).unwrap()));
            for &s in sector.states().unwrap() {
                for (t, _) in op.apply_label(&params.layout(), s) {
                    assert!(params.layout().satisfies_gauss_law(t));
                }
            }
        }
    }
}

#[test]
fn local_terms_sum_to_hamiltonian() {
    let params = ModelParams::new(6, 0.3, 0.9).unwrap();
    let sector = physical_sector(&params);
    let h = build_hamiltonian(&params, &sector).unwrap();
    let mut sum = OperatorSum::new();
    for t in local_terms(&params) {
        sum.extend(&t);
    }
    assert!(sum.build(&sector).unwrap().max_abs_diff(&h).unwrap() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dressed_bilinears_differ_from_mesons_only_by_a_global_flip(n in 1usize..=8, l in 1usize..=8) {
        prop_assume!(n != l);
        let layout = QubitLayout::new(8).unwrap();
        let sector = enumerate_sector(layout);
        let m = meson_operator(&layout, n, l).unwrap();
        let d = dressed_bilinear(n, l);
        let flip = layout.link_mask();
        let wraps = n.max(l) - n.min(l) > 4;
        for &s in sector.states().unwrap() {
            let a = m.apply(&layout, s);
            let b = d.apply(&layout, s);
            match (a, b) {
                (None, None) => {}
                (Some((ta, pa)), Some((tb, pb))) => {
                    prop_assert!((pa - pb).norm() < 1e-15);
                    if wraps {
                        prop_assert_eq!(ta ^ flip, tb);
                    } else {
                        prop_assert_eq!(ta, tb);
                    }
                }
                _ => prop_assert!(false),
            }
        }
    }

    #[test]
    fn sector_is_closed_under_the_hamiltonian(l in prop::sample::select(vec![4usize, 6, 8]), m in -1.0f64..1.0, eps in 0.0f64..2.0) {
        let params = ModelParams::new(l, m, eps).unwrap();
        let sector = physical_sector(&params);
        prop_assert!(build_hamiltonian(&params, &sector).is_ok());
    }
}
