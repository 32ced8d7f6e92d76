use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use proptest::prelude::*;
use z2lgt::lattice::*;
use z2lgt::linalg::{dot, fidelity, unitarity_error};
use z2lgt::qse::*;
use z2lgt::spectrum::*;
use z2lgt::wavepacket::*;

struct Fixture {
    model: Model,
    ground: Vec<Complex64>,
    sols: Vec<MesonSolution>,
    lambda: Vec<i64>,
}

fn fixture(l: usize) -> Fixture {
    let model = Model::new(ModelParams::new(l, 0.1, 1.0).unwrap()).unwrap();
    let gs = ground_state(&model.hamiltonian, &SolverConfig::default()).unwrap();
    let ground = gs.ground_vector().to_vec();
    let mats = build_qse_matrices(&model, &ground).unwrap();
    let sols = solve_qse(&mats, &QseConfig::default()).unwrap();
    let lambda = momentum_set(&sols, -1);
    Fixture {
        model,
        ground,
        sols,
        lambda,
    }
}

fn eight() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| fixture(8))
}

fn packet(f: &Fixture, kbar: i64, xbar: f64) -> PacketOperator {
    let l = f.model.params.sites;
    let spec = WavePacketSpec::new(kbar, xbar, 2.0 * PI / l as f64, f.lambda.clone()).unwrap();
    build_packet_operator(&f.model, &spec, &f.sols).unwrap()
}

fn expectation(f: &Fixture, op: &OperatorSum, psi: &[Complex64]) -> f64 {
    dot(psi, &op.apply_vec(&f.model.sector, psi).unwrap()).re
}

#[test]
fn hermitised_operator_overlaps_the_creation_operator() {
    let f = eight();
    let p = packet(f, 1, 4.5);
    let a = p.a_dag.apply(&f.ground);
    let b = p.b_dag.apply(&f.ground);
    assert!(fidelity(&a, &b) >= 0.999, "{}", fidelity(&a, &b));
}

#[test]
fn single_momentum_packet_reproduces_the_eigenstate() {
    let f = eight();
    let mut exact = lowest_k(&f.model.hamiltonian, 12, &SolverConfig::default()).unwrap();
    resolve_with_symmetry(&mut exact, &f.model.conjugation, 1e-8);
    let spec = WavePacketSpec::new(0, 0.0, 1.0, vec![0]).unwrap();
    let p = build_packet_operator(&f.model, &spec, &f.sols).unwrap();
    let psi = p.b_dag.apply(&f.ground);
    let best = exact
        .vectors
        .iter()
        .map(|v| fidelity(v, &psi))
        .fold(0.0, f64::max);
    assert!(best >= 0.999, "{best}");
}

#[test]
fn two_packet_state_is_physical_and_localised() {
    let f = eight();
    let l = 8;
    let p1 = packet(f, 1, 2.0);
    let p2 = packet(f, -1, 6.0);
    let psi = initial_state(&p1, &p2, &f.ground).unwrap();
    let layout = f.model.layout();
    for n in 1..=l {
        let g = expectation(f, &gauss_generator(&layout, n), &psi);
        assert!((g - 1.0).abs() < 1e-12);
    }
    let bump: Vec<f64> = (1..=l)
        .map(|n| {
            let c = staggered_density(n);
            expectation(f, &c, &psi) - expectation(f, &c, &f.ground)
        })
        .collect();
    // the excess density concentrates around the two packet centres
    let near: f64 = [1, 2, 3, 5, 6, 7].iter().map(|&n| bump[n - 1]).sum();
    let far: f64 = [4, 8].iter().map(|&n| bump[n - 1]).sum();
    assert!(near > 0.0 && near > 3.0 * far.abs(), "{bump:?}");
}

#[test]
fn mirrored_packets_commute_up_to_phase() {
    let f = eight();
    let p1 = packet(f, 1, 2.5);
    let p2 = packet(f, -1, 6.5);
    let a = initial_state(&p1, &p2, &f.ground).unwrap();
    let b = initial_state(&p2, &p1, &f.ground).unwrap();
    // the bilinears only commute up to the overlap of the two packets,
    // which is small but nonzero on eight sites
    assert!(fidelity(&a, &b) > 0.999, "{}", fidelity(&a, &b));
    let far = initial_state(&packet(f, 1, 2.5), &packet(f, 1, 2.5), &f.ground).unwrap();
    assert!(fidelity(&a, &far) < fidelity(&a, &b));
}

#[test]
fn edge_momentum_packets_are_broader() {
    let f = eight();
    let edge = *f.lambda.iter().max().unwrap();
    let bulk = WavePacketSpec::new(0, 4.0, 2.0 * PI / 8.0, f.lambda.clone()).unwrap();
    let side = WavePacketSpec::new(edge, 4.0, 2.0 * PI / 8.0, f.lambda.clone()).unwrap();
    let wb = ring_width(&position_profile(&bulk, 8).unwrap());
    let ws = ring_width(&position_profile(&side, 8).unwrap());
    assert!(ws > wb, "{ws} <= {wb}");
}

#[test]
fn dressed_form_matches_in_the_bulk_only() {
    // near link L the dressed bilinears differ from the shortest-path mesons
    let f = eight();
    let fid = |p: &PacketOperator| {
        let a = p.a_dag_dressed(&f.model).unwrap().apply(&f.ground);
        fidelity(&a, &p.b_dag.apply(&f.ground))
    };
    let bulk = fid(&packet(f, 0, 4.5));
    let edge = fid(&packet(f, 0, 1.0));
    assert!(bulk > 0.99, "{bulk}");
    assert!(edge < bulk, "{edge} {bulk}");
}

#[test]
fn exports_have_expected_shape() {
    let f = eight();
    let p = packet(f, 1, 4.0);
    let mut buf = Vec::new();
    write_matrix_csv(&mut buf, &p.mcoef).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 65);
    let mut buf = Vec::new();
    write_profile_csv(&mut buf, &gaussian_profile(&p.spec, 8).unwrap()).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + f.lambda.len());
}

#[test]
fn missing_momentum_is_reported() {
    let f = eight();
    let spec = WavePacketSpec::new(0, 1.0, 1.0, vec![0, 7]).unwrap();
    assert!(build_packet_operator(&f.model, &spec, &f.sols).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn coefficient_matrix_invariants(ki in 0usize..5, xbar in 0.0f64..8.0, sigma in 0.3f64..2.0) {
        let f = eight();
        let kbar = f.lambda[ki % f.lambda.len()];
        let spec = WavePacketSpec::new(kbar, xbar, sigma, f.lambda.clone()).unwrap();
        let p = build_packet_operator(&f.model, &spec, &f.sols).unwrap();
        let herm = (&p.mcoef - p.mcoef.adjoint()).iter().map(|x| x.norm()).fold(0.0, f64::max);
        prop_assert!(herm < 1e-12);
        prop_assert!(unitarity_error(&p.eigvecs) < 1e-10);
        prop_assert!(p.reconstruction_error() < 1e-10);
        prop_assert!(p.a_dag.is_hermitian(1e-12));
    }

    #[test]
    fn packets_overlap_their_hermitian_part(ki in 0usize..5, xbar in 0.0f64..8.0) {
        let f = eight();
        let kbar = f.lambda[ki % f.lambda.len()];
        let spec = WavePacketSpec::new(kbar, xbar, 2.0 * PI / 8.0, f.lambda.clone()).unwrap();
        let used: Vec<&MesonSolution> = spec.lambda_star.iter().map(|&k| select(&f.sols, k, -1).unwrap()).collect();
        if used.iter().any(|s| s.nz >= 0.01) {
            eprintln!("skipped: annihilation norm above 0.01");
            return Ok(());
        }
        let p = build_packet_operator(&f.model, &spec, &f.sols).unwrap();
        let fid = fidelity(&p.a_dag.apply(&f.ground), &p.b_dag.apply(&f.ground));
        prop_assert!(fid >= 0.999, "{}", fid);
    }
}
