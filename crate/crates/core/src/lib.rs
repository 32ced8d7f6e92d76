//! Z2 lattice gauge theory with staggered fermions in 1+1 dimensions:
//! exact and Krylov spectra, quantum subspace expansion for meson
//! creation operators, wave-packet preparation, Trotterised scattering and
//! explicit qubit circuits for packet preparation.

pub mod circuits;
pub mod dynamics;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod qse;
pub mod sparse;
pub mod spectrum;
pub mod wavepacket;

pub use error::{Error, Result};
pub use lattice::{
    build_charge_conjugation, build_hamiltonian, enumerate_sector, Basis, Model, ModelParams,
    PhysicalSector, QubitLayout,
};
pub use num_complex::Complex64;
pub use sparse::{BasisTag, SparseOperator};
