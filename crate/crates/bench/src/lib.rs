//! Shared fixtures for the benchmarks.

use std::f64::consts::PI;

use z2lgt::qse::{build_qse_matrices, momentum_set, solve_qse, MesonSolution, QseConfig};
use z2lgt::spectrum::{ground_state, SolverConfig};
use z2lgt::wavepacket::{build_packet_operator, PacketOperator, WavePacketSpec};
use z2lgt::{Complex64, Model, ModelParams};

/// Model, ground state and QSE solutions at `m = 0.1`, `eps = 1`.
pub struct Pipeline {
    pub model: Model,
    pub ground: Vec<Complex64>,
    pub solutions: Vec<MesonSolution>,
}

impl Pipeline {
    pub fn new(sites: usize) -> Self {
        let model = Model::new(ModelParams::new(sites, 0.1, 1.0).expect("valid size")).expect("model");
        let ground = ground_state(&model.hamiltonian, &SolverConfig::default())
            .expect("ground state")
            .ground_vector()
            .to_vec();
        let mats = build_qse_matrices(&model, &ground).expect("QSE matrices");
        let solutions = solve_qse(&mats, &QseConfig::default()).expect("QSE");
        Pipeline {
            model,
            ground,
            solutions,
        }
    }

    /// Packet at the centre of the ring with `kbar = 0`, width `2 pi / L`.
    pub fn packet(&self) -> PacketOperator {
        let l = self.model.params.sites as f64;
        let spec = WavePacketSpec::new(0, l / 2.0, 2.0 * PI / l, momentum_set(&self.solutions, -1))
            .expect("packet spec");
        build_packet_operator(&self.model, &spec, &self.solutions).expect("packet")
    }
}
