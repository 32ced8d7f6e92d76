//! Qubit circuits preparing a meson wave packet.
//!
//! Circuits act on the `2L` lattice qubits in the computational basis
//! (matter `|1>` = occupied, links in the `Z` basis) plus one ancilla, qubit
//! `2L`. Lattice states, whose links are stored in the `X` basis, are moved
//! over with [`to_computational`], which applies a Hadamard to every link.
//!
//! The packet operator `A^dag = V(u) O_D V(u)^dag` is built from:
//!
//! - `V(u)`: Givens QR decomposition of the eigenvector matrix `u`, with
//!   `L(L-1)/2` nearest-neighbour rotations
//!   `exp(-i theta/2 Z_g (X X + Y Y))` in `2L-3` layers;
//! - `O_D = sum_n mu_n P_n` with `P_1 = I` and `P_n = sigma^z` on matter
//!   qubit `n-1`. The fermion number is fixed at half filling, so
//!   `sum_r sigma^z_r = 0` and `sum_r lambda_r n_r` reduces to `L` strings:
//!   `mu_1 = sum lambda / 2`, `mu_n = (lambda_{n-1} - lambda_L) / 2`;
//! - `{O_a, O_b} = O_D`, with `O_a` and `O_b` linear in fermions hosted on
//!   the link qubits. Each is `V(u') X_{g,1} V(u')^dag` for a real first
//!   column `u'`, and their anticommutator is realised by a Hadamard test on
//!   the ancilla, post-selected on `+`.
//!
//! Every rotation is `exp(-i theta/2 Q (X_a X_b + Y_a Y_b))` with `Q` a
//! Pauli string on other qubits. It expands to `2 + 2|Q|` CNOTs: `Q` is
//! moved onto qubit `a` by basis changes and CNOTs into `a`, around a
//! two-CNOT core.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::io::{self, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Basis, QubitLayout};
use crate::linalg::{unitarity_error, ONE, ZERO};
use crate::wavepacket::PacketOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

/// Product of single-qubit Paulis on distinct qubits.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PauliString(pub BTreeMap<usize, Pauli>);

impl PauliString {
    pub fn identity() -> Self {
        PauliString(BTreeMap::new())
    }

    pub fn z(qubits: &[usize]) -> Self {
        PauliString(qubits.iter().map(|&q| (q, Pauli::Z)).collect())
    }

    pub fn weight(&self) -> usize {
        self.0.len()
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let clashes = self
            .0
            .iter()
            .filter(|(q, p)| other.0.get(q).is_some_and(|o| o != *p))
            .count();
        clashes % 2 == 0
    }

    /// `self * other = phase * string`.
    pub fn product(&self, other: &PauliString) -> (Complex64, PauliString) {
        let mut phase = ONE;
        let mut out = self.0.clone();
        for (&q, &p) in &other.0 {
            match out.remove(&q) {
                None => {
                    out.insert(q, p);
                }
                Some(s) if s == p => {}
                Some(s) => {
                    let (r, ph) = pauli_mul(s, p);
                    phase *= ph;
                    out.insert(q, r);
                }
            }
        }
        (phase, PauliString(out))
    }
}

fn pauli_mul(a: Pauli, b: Pauli) -> (Pauli, Complex64) {
    use Pauli::*;
    let i = Complex64::new(0.0, 1.0);
    match (a, b) {
        (X, Y) => (Z, i),
        (Y, X) => (Z, -i),
        (Y, Z) => (X, i),
        (Z, Y) => (X, -i),
        (Z, X) => (Y, i),
        (X, Z) => (Y, -i),
        _ => unreachable!("equal Paulis handled by caller"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    /// `exp(-i theta/2 Z_g (X X + Y Y))` on `[f_{n-1}, f_n, g_{n-1}]`.
    MatterRotation,
    /// `exp(-i theta/2 (X X + Y Y))` on neighbouring links.
    GaugeRotation,
    /// `exp(-i theta/2 Q (X X + Y Y))` on neighbouring links, dressed by
    /// the Pauli string `Q` on matter qubits.
    DressedGaugeRotation,
    /// `diag(1, e^{i theta})`.
    Phase,
    ControlledX,
    Hadamard,
    Rx,
    Ry,
    Rz,
    PauliX,
}

impl GateKind {
    pub fn name(self) -> &'static str {
        match self {
            GateKind::MatterRotation => "matter_rotation",
            GateKind::GaugeRotation => "gauge_rotation",
            GateKind::DressedGaugeRotation => "dressed_gauge_rotation",
            GateKind::Phase => "phase",
            GateKind::ControlledX => "controlled_x",
            GateKind::Hadamard => "hadamard",
            GateKind::Rx => "rx",
            GateKind::Ry => "ry",
            GateKind::Rz => "rz",
            GateKind::PauliX => "x",
        }
    }

    pub fn is_rotation(self) -> bool {
        matches!(
            self,
            GateKind::MatterRotation | GateKind::GaugeRotation | GateKind::DressedGaugeRotation
        )
    }
}

/// Part of the packet circuit a gate belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    VDagger,
    OaFirst,
    Ob,
    OaSecond,
    V,
    /// Ancilla preparation, controls and read-out; not part of the
    /// tabulated resource counts.
    HadamardTest,
    Free,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    /// Rotations: `[a, b, dress...]`; controlled X: `[control, target]`.
    pub qubits: Vec<usize>,
    pub angle: f64,
    /// Pauli on each dressing qubit (`qubits[2..]`).
    pub dress: Vec<Pauli>,
    pub block: Block,
}

impl Gate {
    fn single(kind: GateKind, q: usize, angle: f64) -> Self {
        Gate {
            kind,
            qubits: vec![q],
            angle,
            dress: Vec::new(),
            block: Block::Free,
        }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Gate {
            kind: GateKind::ControlledX,
            qubits: vec![control, target],
            angle: 0.0,
            dress: Vec::new(),
            block: Block::Free,
        }
    }

    pub fn hadamard(q: usize) -> Self {
        Gate::single(GateKind::Hadamard, q, 0.0)
    }

    pub fn pauli_x(q: usize) -> Self {
        Gate::single(GateKind::PauliX, q, 0.0)
    }

    pub fn phase(q: usize, angle: f64) -> Self {
        Gate::single(GateKind::Phase, q, angle)
    }

    pub fn rx(q: usize, angle: f64) -> Self {
        Gate::single(GateKind::Rx, q, angle)
    }

    pub fn ry(q: usize, angle: f64) -> Self {
        Gate::single(GateKind::Ry, q, angle)
    }

    pub fn rz(q: usize, angle: f64) -> Self {
        Gate::single(GateKind::Rz, q, angle)
    }

    /// `exp(-i theta/2 Q (X_a X_b + Y_a Y_b))`.
    pub fn rotation(kind: GateKind, a: usize, b: usize, dress: &PauliString, theta: f64) -> Self {
        let mut qubits = vec![a, b];
        let mut paulis = Vec::new();
        for (&q, &p) in &dress.0 {
            qubits.push(q);
            paulis.push(p);
        }
        Gate {
            kind,
            qubits,
            angle: theta,
            dress: paulis,
            block: Block::Free,
        }
    }

    fn in_block(mut self, block: Block) -> Self {
        self.block = block;
        self
    }

    pub fn inverse(&self) -> Gate {
        let mut g = self.clone();
        match self.kind {
            GateKind::ControlledX | GateKind::Hadamard | GateKind::PauliX => {}
            _ => g.angle = -self.angle,
        }
        g
    }

    pub fn cnot_count(&self) -> usize {
        match self.kind {
            GateKind::ControlledX => 1,
            k if k.is_rotation() => 2 + 2 * self.dress.len(),
            _ => 0,
        }
    }

    /// Elementary gates (CNOT, H, X, phase, axis rotations) in time order.
    pub fn expand(&self) -> Vec<Gate> {
        if !self.kind.is_rotation() {
            return vec![self.clone()];
        }
        let (a, b, theta) = (self.qubits[0], self.qubits[1], self.angle);
        let dressing: Vec<(usize, Pauli)> = self.qubits[2..]
            .iter()
            .copied()
            .zip(self.dress.iter().copied())
            .collect();
        let mut pre = Vec::new();
        if !dressing.is_empty() {
            // carry the dressing string onto qubit a
            pre.push(Gate::ry(a, -FRAC_PI_2));
            for &(q, p) in &dressing {
                pre.extend(to_z_basis(q, p));
            }
            for &(q, _) in &dressing {
                pre.push(Gate::cnot(q, a));
            }
            pre.push(Gate::ry(a, FRAC_PI_2));
            for &(q, p) in &dressing {
                pre.extend(to_z_basis(q, p).iter().rev().map(Gate::inverse));
            }
        }
        let mut out = pre.clone();
        out.extend([
            Gate::rx(a, FRAC_PI_2),
            Gate::rx(b, FRAC_PI_2),
            Gate::cnot(a, b),
            Gate::rx(a, theta),
            Gate::rz(b, theta),
            Gate::cnot(a, b),
            Gate::rx(a, -FRAC_PI_2),
            Gate::rx(b, -FRAC_PI_2),
        ]);
        out.extend(pre.iter().rev().map(Gate::inverse));
        out.into_iter().map(|g| g.in_block(self.block)).collect()
    }
}

/// Single-qubit rotation taking Pauli `p` to `Z` by conjugation.
fn to_z_basis(q: usize, p: Pauli) -> Vec<Gate> {
    match p {
        Pauli::Z => vec![],
        Pauli::X => vec![Gate::ry(q, -FRAC_PI_2)],
        Pauli::Y => vec![Gate::rx(q, FRAC_PI_2)],
    }
}

/// CNOT totals and CNOT depth of a gate sequence.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockCounts {
    pub cnots: usize,
    pub depth: usize,
    pub rotations: usize,
}

/// Depth in CNOT layers, with each gate scheduled as soon as all of its
/// qubits are free and occupying them for its whole CNOT count.
pub fn cnot_depth(gates: &[Gate]) -> usize {
    let mut front: BTreeMap<usize, usize> = BTreeMap::new();
    let mut depth = 0;
    for g in gates {
        let c = g.cnot_count();
        if c == 0 {
            continue;
        }
        let start = g.qubits.iter().map(|q| front.get(q).copied().unwrap_or(0)).max().unwrap_or(0);
        for &q in &g.qubits {
            front.insert(q, start + c);
        }
        depth = depth.max(start + c);
    }
    depth
}

pub fn block_counts(gates: &[Gate]) -> BlockCounts {
    BlockCounts {
        cnots: gates.iter().map(Gate::cnot_count).sum(),
        depth: cnot_depth(gates),
        rotations: gates.iter().filter(|g| g.kind.is_rotation()).count(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceCounts {
    /// CNOTs of all tabulated blocks.
    pub cnot_total: usize,
    /// Sum of per-block CNOT depths; blocks are not overlapped.
    pub cnot_depth: usize,
    pub rotation_count: usize,
    /// CNOTs added by the Hadamard test, counted separately.
    pub hadamard_test_cnots: usize,
    pub blocks: BTreeMap<Block, BlockCounts>,
}

impl ResourceCounts {
    pub fn of(gates: &[Gate]) -> Self {
        let mut by: BTreeMap<Block, Vec<Gate>> = BTreeMap::new();
        for g in gates {
            by.entry(g.block).or_default().push(g.clone());
        }
        let blocks: BTreeMap<Block, BlockCounts> =
            by.iter().map(|(b, gs)| (*b, block_counts(gs))).collect();
        let tab = blocks.iter().filter(|(b, _)| **b != Block::HadamardTest);
        ResourceCounts {
            cnot_total: tab.clone().map(|(_, c)| c.cnots).sum(),
            cnot_depth: tab.clone().map(|(_, c)| c.depth).sum(),
            rotation_count: tab.map(|(_, c)| c.rotations).sum(),
            hadamard_test_cnots: blocks.get(&Block::HadamardTest).map_or(0, |c| c.cnots),
            blocks,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GivensCircuit {
    pub num_qubits: usize,
    pub gates: Vec<Gate>,
    /// Gate indices of each parallel rotation layer.
    pub layers: Vec<Vec<usize>>,
    pub counts: ResourceCounts,
    pub ancilla: Option<usize>,
}

impl GivensCircuit {
    fn new(num_qubits: usize, gates: Vec<Gate>, layers: Vec<Vec<usize>>, ancilla: Option<usize>) -> Self {
        let counts = ResourceCounts::of(&gates);
        GivensCircuit {
            num_qubits,
            gates,
            layers,
            counts,
            ancilla,
        }
    }

    /// The adjoint circuit.
    pub fn inverse(&self) -> GivensCircuit {
        let n = self.gates.len();
        let gates: Vec<Gate> = self.gates.iter().rev().map(Gate::inverse).collect();
        let layers = self
            .layers
            .iter()
            .rev()
            .map(|l| l.iter().map(|i| n - 1 - i).collect())
            .collect();
        GivensCircuit::new(self.num_qubits, gates, layers, self.ancilla)
    }

    pub fn rotations(&self) -> usize {
        self.gates.iter().filter(|g| g.kind.is_rotation()).count()
    }

    /// Recounts resources from the gate list.
    pub fn recount(&self) -> ResourceCounts {
        ResourceCounts::of(&self.gates)
    }

    /// Line format `GATE kind q0 [q1 q2 q3] angle`, one gate per line.
    pub fn write_gate_list<W: Write>(&self, mut w: W) -> io::Result<()> {
        for g in &self.gates {
            let qs: Vec<String> = g.qubits.iter().map(|q| q.to_string()).collect();
            let dress: String = g
                .dress
                .iter()
                .map(|p| match p {
                    Pauli::X => 'X',
                    Pauli::Y => 'Y',
                    Pauli::Z => 'Z',
                })
                .collect();
            write!(w, "GATE {} {} {:.17e}", g.kind.name(), qs.join(" "), g.angle)?;
            if !dress.is_empty() {
                write!(w, " dress={dress}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Applies `gate` (expanded into elementary gates) to a state on
/// `psi.len() = 2^n` amplitudes.
pub fn apply_gate(psi: &mut [Complex64], gate: &Gate) {
    if gate.kind.is_rotation() {
        for g in gate.expand() {
            apply_gate(psi, &g);
        }
        return;
    }
    match gate.kind {
        GateKind::ControlledX => {
            let (c, t) = (1usize << gate.qubits[0], 1usize << gate.qubits[1]);
            for i in 0..psi.len() {
                if i & c != 0 && i & t == 0 {
                    psi.swap(i, i | t);
                }
            }
        }
        _ => {
            let m = single_qubit_matrix(gate.kind, gate.angle);
            let bit = 1usize << gate.qubits[0];
            for i in 0..psi.len() {
                if i & bit == 0 {
                    let (a, b) = (psi[i], psi[i | bit]);
                    psi[i] = m[0][0] * a + m[0][1] * b;
                    psi[i | bit] = m[1][0] * a + m[1][1] * b;
                }
            }
        }
    }
}

fn single_qubit_matrix(kind: GateKind, t: f64) -> [[Complex64; 2]; 2] {
    let c = Complex64::new((t / 2.0).cos(), 0.0);
    let s = (t / 2.0).sin();
    let i = Complex64::new(0.0, 1.0);
    match kind {
        GateKind::Hadamard => {
            let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
            [[h, h], [h, -h]]
        }
        GateKind::PauliX => [[ZERO, ONE], [ONE, ZERO]],
        GateKind::Phase => [[ONE, ZERO], [ZERO, Complex64::from_polar(1.0, t)]],
        GateKind::Rx => [[c, -i * s], [-i * s, c]],
        GateKind::Ry => [[c, Complex64::new(-s, 0.0)], [Complex64::new(s, 0.0), c]],
        GateKind::Rz => [
            [Complex64::from_polar(1.0, -t / 2.0), ZERO],
            [ZERO, Complex64::from_polar(1.0, t / 2.0)],
        ],
        _ => unreachable!("multi-qubit gate"),
    }
}

/// Runs `circ` on `input`. With `postselect = Some((q, outcome))` the
/// qubit `q` is projected onto `|outcome>` and the normalised conditional
/// state is returned with its probability.
pub fn simulate_circuit(
    circ: &GivensCircuit,
    input: &[Complex64],
    postselect: Option<(usize, bool)>,
) -> Result<(Vec<Complex64>, f64)> {
    if input.len() != 1usize << circ.num_qubits {
        return Err(Error::DimensionMismatch {
            expected: 1usize << circ.num_qubits,
            found: input.len(),
        });
    }
    let mut psi = input.to_vec();
    for g in &circ.gates {
        apply_gate(&mut psi, g);
    }
    let Some((q, outcome)) = postselect else {
        return Ok((psi, 1.0));
    };
    let bit = 1usize << q;
    for (i, x) in psi.iter_mut().enumerate() {
        if (i & bit != 0) != outcome {
            *x = ZERO;
        }
    }
    let p: f64 = psi.iter().map(|x| x.norm_sqr()).sum();
    if p < 1e-300 {
        return Err(Error::ZeroNorm("post-selected state"));
    }
    let s = p.sqrt();
    psi.iter_mut().for_each(|x| *x /= s);
    Ok((psi, p))
}

/// Embeds a basis vector into the `2L + extra` qubit computational basis.
pub fn to_computational(basis: &Basis, v: &[Complex64], extra: usize) -> Result<Vec<Complex64>> {
    if v.len() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            found: v.len(),
        });
    }
    let layout = basis.layout();
    let mut psi = vec![ZERO; 1usize << (layout.num_qubits() + extra)];
    for (i, x) in v.iter().enumerate() {
        psi[basis.state(i) as usize] = *x;
    }
    links_hadamard(&layout, &mut psi);
    Ok(psi)
}

/// Inverse of [`to_computational`]; returns the basis vector and the weight
/// left outside the basis (including any ancilla excitation).
pub fn from_computational(basis: &Basis, psi: &[Complex64]) -> Result<(Vec<Complex64>, f64)> {
    let layout = basis.layout();
    if psi.len() < 1usize << layout.num_qubits() || !psi.len().is_power_of_two() {
        return Err(Error::DimensionMismatch {
            expected: 1usize << layout.num_qubits(),
            found: psi.len(),
        });
    }
    let mut w = psi.to_vec();
    links_hadamard(&layout, &mut w);
    let total: f64 = w.iter().map(|x| x.norm_sqr()).sum();
    let v: Vec<Complex64> = (0..basis.dim()).map(|i| w[basis.state(i) as usize]).collect();
    let kept: f64 = v.iter().map(|x| x.norm_sqr()).sum();
    Ok((v, (total - kept).max(0.0)))
}

fn links_hadamard(layout: &QubitLayout, psi: &mut [Complex64]) {
    for n in 1..=layout.sites() {
        apply_gate(psi, &Gate::hadamard(layout.link_qubit(n)));
    }
}

/// Fermionic modes a Givens circuit acts on.
#[derive(Debug, Clone, PartialEq)]
pub enum Flavor {
    /// Matter fermions dressed by the link string to their left.
    Matter,
    /// Ancilla fermions, one per link qubit.
    Gauge,
    /// Ancilla fermions times matter Pauli strings `P_n`, one per mode.
    DressedGauge(Vec<PauliString>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Columns {
    /// Realise the whole unitary: `L(L-1)/2` rotations.
    All,
    /// Realise only the first column: `L-1` rotations.
    First,
}

/// One elimination `G = R(theta) diag(1, e^{i delta})` on rows
/// `(mode - 1, mode)`, with `R = [[c, s], [-s, c]]`.
#[derive(Debug, Clone, Copy)]
struct Elimination {
    mode: usize,
    theta: f64,
    delta: f64,
    layer: usize,
}

/// Rotation zeroing `y` against `x`: `(theta, delta, r)`. A real pivot is
/// kept non-negative so real inputs need no phase gates.
fn givens_pair(x: Complex64, y: Complex64) -> (f64, f64, Complex64) {
    let (theta, delta, r) = raw_givens_pair(x, y);
    if r.re < 0.0 && r.im.abs() <= 1e-12 * r.norm() {
        let t = if theta > 0.0 { theta - PI } else { theta + PI };
        (t, delta, -r)
    } else {
        (theta, delta, r)
    }
}

fn raw_givens_pair(x: Complex64, y: Complex64) -> (f64, f64, Complex64) {
    if y.norm() < 1e-300 {
        return (0.0, 0.0, x);
    }
    if x.norm() < 1e-300 {
        return (FRAC_PI_2, 0.0, y);
    }
    let ratio = x * y.conj();
    let mut w = ratio / ratio.norm();
    let mut sign = 1.0;
    if w.re < 0.0 {
        w = -w;
        sign = -1.0;
    }
    let theta = (sign * y.norm()).atan2(x.norm());
    let r = theta.cos() * x + theta.sin() * w * y;
    (theta, w.arg(), r)
}

/// Eliminations reducing `u` (or its first column) to a diagonal, in the
/// parallel order `t = (L-1-i) + 2j`; returns them with the residual
/// diagonal.
fn eliminate(u: &DMatrix<Complex64>, columns: Columns) -> (Vec<Elimination>, Vec<Complex64>) {
    let l = u.nrows();
    let mut w = u.clone();
    let ncols = match columns {
        Columns::All => l.saturating_sub(1),
        Columns::First => 1.min(l),
    };
    let mut jobs: Vec<(usize, usize, usize)> = Vec::new();
    for j in 0..ncols {
        for i in (j + 1..l).rev() {
            jobs.push((l - 1 - i + 2 * j, i, j));
        }
    }
    jobs.sort();
    let mut out = Vec::with_capacity(jobs.len());
    for (t, i, j) in jobs {
        let (theta, delta, _) = givens_pair(w[(i - 1, j)], w[(i, j)]);
        let (c, s) = (theta.cos(), theta.sin());
        let ph = Complex64::from_polar(1.0, delta);
        for col in 0..w.ncols() {
            let x = w[(i - 1, col)];
            let y = ph * w[(i, col)];
            w[(i - 1, col)] = c * x + s * y;
            w[(i, col)] = -s * x + c * y;
        }
        out.push(Elimination {
            mode: i,
            theta,
            delta,
            layer: t,
        });
    }
    let diag = match columns {
        Columns::All => (0..l).map(|k| w[(k, k)]).collect(),
        Columns::First => {
            let mut d = vec![ONE; l];
            if l > 0 {
                d[0] = w[(0, 0)];
            }
            d
        }
    };
    (out, diag)
}

struct ModeMap<'a> {
    layout: QubitLayout,
    flavor: &'a Flavor,
}

impl ModeMap<'_> {
    /// `V(R^T(theta))` on modes `(k-1, k)`, 0-based.
    fn rotation(&self, k: usize, theta: f64) -> Gate {
        let lay = &self.layout;
        // generator xi~_{k-1}^dag xi~_k - h.c. = -i/2 Q (X X + Y Y)
        match self.flavor {
            Flavor::Matter => Gate::rotation(
                GateKind::MatterRotation,
                lay.matter_qubit(k),
                lay.matter_qubit(k + 1),
                &PauliString::z(&[lay.link_qubit(k)]),
                -theta,
            ),
            Flavor::Gauge => Gate::rotation(
                GateKind::GaugeRotation,
                lay.link_qubit(k),
                lay.link_qubit(k + 1),
                &PauliString::identity(),
                -theta,
            ),
            Flavor::DressedGauge(p) => {
                let (phase, q) = p[k - 1].product(&p[k]);
                // matter sigma^y and sigma^z are minus their computational forms
                let flips = q.0.values().filter(|p| **p != Pauli::X).count();
                let sign = phase.re * if flips % 2 == 0 { 1.0 } else { -1.0 };
                let kind = if q.weight() == 0 {
                    GateKind::GaugeRotation
                } else {
                    GateKind::DressedGaugeRotation
                };
                Gate::rotation(kind, lay.link_qubit(k), lay.link_qubit(k + 1), &q, -sign * theta)
            }
        }
    }

    /// `exp(i phi n_k)`.
    fn phase(&self, k: usize, phi: f64) -> Result<Option<Gate>> {
        if phi.abs() < 1e-14 {
            return Ok(None);
        }
        match self.flavor {
            Flavor::Matter => Ok(Some(Gate::phase(self.layout.matter_qubit(k + 1), phi))),
            _ => Err(Error::InvalidParameter {
                field: "u",
                reason: "ancilla-mode unitaries must be real".into(),
            }),
        }
    }
}

/// Circuit for `V(u) = exp(sum_{nl} f_n^dag [log u]_{nl} f_l)` over the
/// modes of `flavor`, so that `V f_r^dag V^dag = sum_n f_n^dag u_{nr}`.
/// With [`Columns::First`] only the first column of `u` is honoured and it
/// must be a unit vector.
pub fn decompose_v(
    u: &DMatrix<Complex64>,
    flavor: &Flavor,
    columns: Columns,
    layout: &QubitLayout,
) -> Result<GivensCircuit> {
    let l = layout.sites();
    if u.nrows() != l || (columns == Columns::All && u.ncols() != l) || u.ncols() == 0 {
        return Err(Error::DimensionMismatch {
            expected: l,
            found: u.nrows(),
        });
    }
    match columns {
        Columns::All => {
            let e = unitarity_error(u);
            if e > 1e-8 {
                return Err(Error::NotUnitary(e));
            }
        }
        Columns::First => {
            let e = (u.column(0).norm() - 1.0).abs();
            if e > 1e-8 {
                return Err(Error::NotUnitary(e));
            }
        }
    }
    if let Flavor::DressedGauge(p) = flavor {
        check_dressing(p, layout)?;
    }
    let map = ModeMap {
        layout: *layout,
        flavor,
    };
    let (elims, diag) = eliminate(u, columns);
    let mut gates = Vec::new();
    for (k, d) in diag.iter().enumerate() {
        if let Some(g) = map.phase(k, d.arg())? {
            gates.push(g);
        }
    }
    let n_layers = elims.iter().map(|e| e.layer + 1).max().unwrap_or(0);
    let mut layers = vec![Vec::new(); n_layers];
    for e in elims.iter().rev() {
        layers[n_layers - 1 - e.layer].push(gates.len());
        gates.push(map.rotation(e.mode, e.theta));
        if let Some(g) = map.phase(e.mode, -e.delta)? {
            gates.push(g);
        }
    }
    Ok(GivensCircuit::new(layout.num_qubits(), gates, layers, None))
}

fn check_dressing(p: &[PauliString], layout: &QubitLayout) -> Result<()> {
    if p.len() != layout.sites() {
        return Err(Error::DimensionMismatch {
            expected: layout.sites(),
            found: p.len(),
        });
    }
    if p[0].weight() != 0 {
        return Err(Error::InvalidParameter {
            field: "P",
            reason: "the first string must be the identity".into(),
        });
    }
    for (i, s) in p.iter().enumerate() {
        if s.0.keys().any(|&q| q % 2 == 1 || q >= layout.num_qubits()) {
            return Err(Error::InvalidParameter {
                field: "P",
                reason: format!("string {i} must act on matter qubits only"),
            });
        }
        for (j, t) in p.iter().enumerate().skip(i + 1) {
            if !s.commutes_with(t) {
                return Err(Error::NonCommuting(i, j));
            }
        }
    }
    Ok(())
}

/// `P_1 = I`, `P_n = sigma^z` on matter site `n-1`.
pub fn default_dressing(layout: &QubitLayout) -> Vec<PauliString> {
    (1..=layout.sites())
        .map(|n| {
            if n == 1 {
                PauliString::identity()
            } else {
                PauliString::z(&[layout.matter_qubit(n - 1)])
            }
        })
        .collect()
}

/// `sum_r lambda_r n_r` at half filling as `sum_n mu_n P_n`:
/// `mu_1 = sum lambda / 2`, `mu_n = (lambda_{n-1} - lambda_L) / 2`.
pub fn half_filling_coefficients(lambdas: &[f64]) -> Vec<f64> {
    let Some(&last) = lambdas.last() else {
        return Vec::new();
    };
    let mut mu = vec![lambdas.iter().sum::<f64>() / 2.0];
    mu.extend(lambdas[..lambdas.len() - 1].iter().map(|l| (l - last) / 2.0));
    mu
}

/// `O = scale * V X_{g,1} V^dag = sum_n c_n X~_n` with
/// `X~_n = (f_n^dag + f_n) / sqrt 2` over ancilla modes `f_n`.
#[derive(Debug, Clone)]
pub struct LinearFermionCircuit {
    pub coefficients: Vec<f64>,
    pub scale: f64,
    pub v: GivensCircuit,
    pub core_qubit: usize,
}

impl LinearFermionCircuit {
    /// `V^dag`, the core `X` (controlled on `control = (qubit, value)` if
    /// given) and `V`, in time order.
    pub fn gates(&self, block: Block, control: Option<(usize, bool)>) -> Vec<Gate> {
        let mut out: Vec<Gate> = self.v.inverse().gates.into_iter().map(|g| g.in_block(block)).collect();
        match control {
            None => out.push(Gate::pauli_x(self.core_qubit).in_block(block)),
            Some((anc, value)) => {
                let ht = Block::HadamardTest;
                if !value {
                    out.push(Gate::pauli_x(anc).in_block(ht));
                }
                out.push(Gate::cnot(anc, self.core_qubit).in_block(ht));
                if !value {
                    out.push(Gate::pauli_x(anc).in_block(ht));
                }
            }
        }
        out.extend(self.v.gates.iter().cloned().map(|g| g.in_block(block)));
        out
    }
}

fn linear_circuit(coefficients: Vec<f64>, flavor: Flavor, layout: &QubitLayout) -> Result<LinearFermionCircuit> {
    let norm = coefficients.iter().map(|c| c * c).sum::<f64>().sqrt();
    if norm < 1e-300 || !norm.is_finite() {
        return Err(Error::InvalidParameter {
            field: "lambda",
            reason: "all coefficients vanish".into(),
        });
    }
    let col = DMatrix::from_iterator(
        coefficients.len(),
        1,
        coefficients.iter().map(|c| Complex64::new(c / norm, 0.0)),
    );
    let v = decompose_v(&col, &flavor, Columns::First, layout)?;
    Ok(LinearFermionCircuit {
        coefficients,
        scale: norm * FRAC_1_SQRT_2,
        v,
        core_qubit: layout.link_qubit(1),
    })
}

/// `O_a = sum_n sgn(mu_n) sqrt|mu_n| X~_{g,n}`.
pub fn build_oa(mu: &[f64], layout: &QubitLayout) -> Result<LinearFermionCircuit> {
    if mu.len() != layout.sites() {
        return Err(Error::DimensionMismatch {
            expected: layout.sites(),
            found: mu.len(),
        });
    }
    let c = mu.iter().map(|m| if *m == 0.0 { 0.0 } else { m.signum() * m.abs().sqrt() }).collect();
    linear_circuit(c, Flavor::Gauge, layout)
}

/// `O_b = sum_n sqrt|mu_n| P_n X~_{g,n}`.
pub fn build_ob(mu: &[f64], dressing: &[PauliString], layout: &QubitLayout) -> Result<LinearFermionCircuit> {
    if mu.len() != layout.sites() {
        return Err(Error::DimensionMismatch {
            expected: layout.sites(),
            found: mu.len(),
        });
    }
    check_dressing(dressing, layout)?;
    let c = mu.iter().map(|m| m.abs().sqrt()).collect();
    linear_circuit(c, Flavor::DressedGauge(dressing.to_vec()), layout)
}

/// Full preparation circuit for `A^dag` with its normalisation data.
#[derive(Debug, Clone)]
pub struct PacketCircuit {
    pub circuit: GivensCircuit,
    pub mu: Vec<f64>,
    /// Post-selected (unnormalised) output is `A^dag psi / normalisation`.
    pub normalisation: f64,
}

/// `V(u) {O_a, O_b} V(u)^dag` as a Hadamard test on the ancilla (qubit
/// `2L`): `|+>`, `O_a` controlled on `1`, `O_b`, `O_a` controlled on `0`,
/// then read out in the `X` basis; outcome `+` (bit 0 after the final
/// Hadamard) leaves `(U_a U_b + U_b U_a)/2`.
pub fn assemble_packet_circuit(
    eigvals: &[f64],
    eigvecs: &DMatrix<Complex64>,
    layout: &QubitLayout,
) -> Result<PacketCircuit> {
    let mu = half_filling_coefficients(eigvals);
    let v = decompose_v(eigvecs, &Flavor::Matter, Columns::All, layout)?;
    let oa = build_oa(&mu, layout)?;
    let ob = build_ob(&mu, &default_dressing(layout), layout)?;
    let anc = layout.num_qubits();
    let mut gates: Vec<Gate> = v.inverse().gates.into_iter().map(|g| g.in_block(Block::VDagger)).collect();
    gates.push(Gate::hadamard(anc).in_block(Block::HadamardTest));
    gates.extend(oa.gates(Block::OaFirst, Some((anc, true))));
    gates.extend(ob.gates(Block::Ob, None));
    gates.extend(oa.gates(Block::OaSecond, Some((anc, false))));
    gates.push(Gate::hadamard(anc).in_block(Block::HadamardTest));
    gates.extend(v.gates.iter().cloned().map(|g| g.in_block(Block::V)));
    let normalisation = mu.iter().map(|m| m.abs()).sum();
    Ok(PacketCircuit {
        circuit: GivensCircuit::new(anc + 1, gates, Vec::new(), Some(anc)),
        mu,
        normalisation,
    })
}

/// [`assemble_packet_circuit`] for a wave-packet operator.
pub fn packet_circuit(packet: &PacketOperator, layout: &QubitLayout) -> Result<PacketCircuit> {
    assemble_packet_circuit(&packet.eigvals, &packet.eigvecs, layout)
}

impl PacketCircuit {
    /// Runs the circuit on a lattice state and returns the post-selected
    /// lattice state (normalised) with the success probability.
    pub fn prepare(&self, basis: &Basis, psi: &[Complex64]) -> Result<(Vec<Complex64>, f64)> {
        let input = to_computational(basis, psi, 1)?;
        let anc = self.circuit.ancilla.unwrap_or(basis.layout().num_qubits());
        let (out, p) = simulate_circuit(&self.circuit, &input, Some((anc, false)))?;
        let (v, _) = from_computational(basis, &out)?;
        Ok((v, p))
    }
}

/// Tabulated CNOT count `4L^2 + 16L - 20` and depth `36L - 44`.
pub fn tabulated_counts(sites: usize) -> (usize, usize) {
    let l = sites;
    (4 * l * l + 16 * l - 20, 36 * l - 44)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceReport {
    pub sites: usize,
    pub qubits: usize,
    pub gates: usize,
    pub cnot_total: usize,
    pub cnot_depth: usize,
    pub rotation_count: usize,
    pub hadamard_test_cnots: usize,
    pub tabulated_cnot_total: usize,
    pub tabulated_cnot_depth: usize,
    pub blocks: BTreeMap<Block, BlockCounts>,
}

impl ResourceReport {
    pub fn new(layout: &QubitLayout, circuit: &GivensCircuit) -> Self {
        let c = circuit.recount();
        let (tc, td) = tabulated_counts(layout.sites());
        ResourceReport {
            sites: layout.sites(),
            qubits: circuit.num_qubits,
            gates: circuit.gates.len(),
            cnot_total: c.cnot_total,
            cnot_depth: c.cnot_depth,
            rotation_count: c.rotation_count,
            hadamard_test_cnots: c.hadamard_test_cnots,
            tabulated_cnot_total: tc,
            tabulated_cnot_depth: td,
            blocks: c.blocks,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}
