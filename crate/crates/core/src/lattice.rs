//! Qubit layout, physical Hilbert space and model operators.
//!
//! Conventions, fixed here and nowhere else:
//!
//! * Sites are numbered `1..=L`. Qubits interleave matter and gauge as
//!   `f1 g1 f2 g2 ... fL gL`; `f_n` is qubit `2(n-1)` and the link `g_n`
//!   between sites `n` and `n+1` is qubit `2(n-1)+1`. Link `g_L` closes the
//!   ring back to site 1.
//! * A basis label is a `u64` whose bit `q` is the state of qubit `q`.
//! * Matter bit 1 means the site is occupied, and `sigma^z = +1` there, so
//!   `sigma^z = 2 n - 1`.
//! * Link qubits are stored in the electric-field eigenbasis: bit 0 is
//!   `X = +1`, bit 1 is `X = -1`. The link `Z` therefore flips the bit. The
//!   Gauss-law generators are diagonal in this basis, which is what makes
//!   the physical sector a plain list of labels.
//! * Fermions follow the Jordan-Wigner map
//!   `xi_n^dag = prod_{l<n} (-i sigma^z_l) sigma^+_n`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ONE, ZERO};
use crate::sparse::{BasisTag, SparseOperator};

/// Largest full Hilbert space (in qubits) we are willing to enumerate.
pub const MAX_FULL_QUBITS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Number of matter sites `L` (even).
    pub sites: usize,
    /// Fermion mass `m` in lattice units.
    pub mass: f64,
    /// Electric coupling `epsilon` in lattice units.
    pub coupling: f64,
}

impl ModelParams {
    pub fn new(sites: usize, mass: f64, coupling: f64) -> Result<Self> {
        if sites < 4 || sites % 2 != 0 {
            return Err(Error::InvalidParameter {
                field: "L",
                reason: format!("must be even and >= 4, got {sites}"),
            });
        }
        if sites > 16 {
            return Err(Error::InvalidParameter {
                field: "L",
                reason: format!("labels are 64-bit; L={sites} exceeds 16"),
            });
        }
        if !mass.is_finite() || !coupling.is_finite() {
            return Err(Error::InvalidParameter {
                field: "m/eps",
                reason: "must be finite".into(),
            });
        }
        Ok(ModelParams {
            sites,
            mass,
            coupling,
        })
    }

    pub fn layout(&self) -> QubitLayout {
        QubitLayout { sites: self.sites }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QubitLayout {
    sites: usize,
}

impl QubitLayout {
    /// Any even `L >= 2`; the two-site ring is only useful for counting.
    pub fn new(sites: usize) -> Result<Self> {
        if sites < 2 || sites % 2 != 0 || sites > 16 {
            return Err(Error::InvalidParameter {
                field: "L",
                reason: format!("must be even in 2..=16, got {sites}"),
            });
        }
        Ok(QubitLayout { sites })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn num_qubits(&self) -> usize {
        2 * self.sites
    }

    /// Qubit index of matter site `n` (1-based).
    pub fn matter_qubit(&self, n: usize) -> usize {
        debug_assert!((1..=self.sites).contains(&n));
        2 * (n - 1)
    }

    /// Qubit index of link `n` (1-based), between sites `n` and `n+1`.
    pub fn link_qubit(&self, n: usize) -> usize {
        debug_assert!((1..=self.sites).contains(&n));
        2 * (n - 1) + 1
    }

    /// Cyclic successor of a site.
    pub fn next(&self, n: usize) -> usize {
        n % self.sites + 1
    }

    /// Cyclic predecessor of a site.
    pub fn prev(&self, n: usize) -> usize {
        if n == 1 {
            self.sites
        } else {
            n - 1
        }
    }

    pub fn matter_mask(&self) -> u64 {
        (1..=self.sites).fold(0, |m, n| m | (1u64 << self.matter_qubit(n)))
    }

    pub fn link_mask(&self) -> u64 {
        (1..=self.sites).fold(0, |m, n| m | (1u64 << self.link_qubit(n)))
    }

    pub fn occupied(&self, label: u64, n: usize) -> bool {
        label >> self.matter_qubit(n) & 1 == 1
    }

    /// Electric field eigenvalue (`+1` or `-1`) of link `n`.
    pub fn link_x(&self, label: u64, n: usize) -> i32 {
        if label >> self.link_qubit(n) & 1 == 0 {
            1
        } else {
            -1
        }
    }

    /// Strong-coupling vacuum: odd sites occupied, every link in `X = -1`.
    pub fn strong_coupling_vacuum(&self) -> u64 {
        (1..=self.sites).fold(self.link_mask(), |s, n| {
            if n % 2 == 1 {
                s | 1u64 << self.matter_qubit(n)
            } else {
                s
            }
        })
    }

    /// True when every Gauss-law generator has eigenvalue `+1` on `label`.
    pub fn satisfies_gauss_law(&self, label: u64) -> bool {
        (1..=self.sites).all(|n| self.gauss_eigenvalue(label, n) == 1)
    }

    pub fn gauss_eigenvalue(&self, label: u64, n: usize) -> i32 {
        let sign = if n % 2 == 1 { 1 } else { -1 };
        let sz = if self.occupied(label, n) { 1 } else { -1 };
        sign * self.link_x(label, self.prev(n)) * sz * self.link_x(label, n)
    }

    pub fn filling(&self, label: u64) -> usize {
        (label & self.matter_mask()).count_ones() as usize
    }
}

/// A basis of the lattice Hilbert space: either the whole `2^{2L}` space or
/// the enumerated physical sector.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    layout: QubitLayout,
    tag: BasisTag,
    /// Sorted labels; `None` for the full space.
    states: Option<Vec<u64>>,
}

/// Gauss-law (`G_n = +1`), half-filling basis.
pub type PhysicalSector = Basis;

impl Basis {
    pub fn full(layout: QubitLayout) -> Result<Self> {
        if layout.num_qubits() > MAX_FULL_QUBITS {
            return Err(Error::InvalidParameter {
                field: "L",
                reason: format!(
                    "full space of {} qubits is too large to enumerate",
                    layout.num_qubits()
                ),
            });
        }
        Ok(Basis {
            layout,
            tag: BasisTag::Full,
            states: None,
        })
    }

    fn sector_from(layout: QubitLayout, mut states: Vec<u64>) -> Self {
        states.sort_unstable();
        states.dedup();
        Basis {
            layout,
            tag: BasisTag::Sector,
            states: Some(states),
        }
    }

    pub fn layout(&self) -> QubitLayout {
        self.layout
    }

    pub fn tag(&self) -> BasisTag {
        self.tag
    }

    pub fn dim(&self) -> usize {
        match &self.states {
            Some(s) => s.len(),
            None => 1usize << self.layout.num_qubits(),
        }
    }

    pub fn state(&self, i: usize) -> u64 {
        match &self.states {
            Some(s) => s[i],
            None => i as u64,
        }
    }

    pub fn states(&self) -> Option<&[u64]> {
        self.states.as_deref()
    }

    pub fn index_of(&self, label: u64) -> Option<usize> {
        match &self.states {
            Some(s) => s.binary_search(&label).ok(),
            None => {
                if (label as usize) < self.dim() {
                    Some(label as usize)
                } else {
                    None
                }
            }
        }
    }

    /// Lifts a vector on this basis into the full `2^{2L}` space.
    pub fn embed(&self, psi: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(psi.len(), self.dim());
        let mut out = vec![ZERO; 1usize << self.layout.num_qubits()];
        for (i, a) in psi.iter().enumerate() {
            out[self.state(i) as usize] = *a;
        }
        out
    }

    /// Projects a full-space vector onto this basis (drops other amplitudes).
    pub fn restrict(&self, full: &[Complex64]) -> Vec<Complex64> {
        (0..self.dim()).map(|i| full[self.state(i) as usize]).collect()
    }

    /// Unit vector on a single label.
    pub fn basis_vector(&self, label: u64) -> Result<Vec<Complex64>> {
        let idx = self.index_of(label).ok_or(Error::LeavesBasis(label))?;
        let mut v = vec![ZERO; self.dim()];
        v[idx] = ONE;
        Ok(v)
    }
}

/// Enumerates the Gauss-law-satisfying, half-filled states.
///
/// For each matter configuration the link values follow from
/// `x_n = (-1)^{n+1} sigma^z_n x_{n-1}` once `x_L` is fixed, so every
/// half-filled configuration contributes exactly two link patterns related
/// by a global flip.
pub fn enumerate_sector(layout: QubitLayout) -> PhysicalSector {
    let l = layout.sites();
    let mut states = Vec::with_capacity(2 * binomial(l, l / 2));
    for occ in 0u64..(1u64 << l) {
        if occ.count_ones() as usize != l / 2 {
            continue;
        }
        for x_last in [1i32, -1] {
            let mut label = 0u64;
            let mut x_prev = x_last;
            for n in 1..=l {
                let occupied = occ >> (n - 1) & 1 == 1;
                let sz = if occupied { 1 } else { -1 };
                let sign = if n % 2 == 1 { 1 } else { -1 };
                let x = sign * sz * x_prev;
                if occupied {
                    label |= 1 << layout.matter_qubit(n);
                }
                if x == -1 {
                    label |= 1 << layout.link_qubit(n);
                }
                x_prev = x;
            }
            debug_assert_eq!(x_prev, x_last);
            states.push(label);
        }
    }
    Basis::sector_from(layout, states)
}

/// Convenience wrapper taking model parameters.
pub fn physical_sector(params: &ModelParams) -> PhysicalSector {
    enumerate_sector(params.layout())
}

pub fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Elementary operators from which every model operator is composed.
/// Site and link indices are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    /// `xi_n^dag` with its Jordan-Wigner string.
    Create(usize),
    /// `xi_n` with its Jordan-Wigner string.
    Annihilate(usize),
    /// `xi_n^dag xi_n`.
    Number(usize),
    /// Bare `sigma^z` on a matter qubit.
    SigmaZ(usize),
    /// Bare `sigma^+` (empty -> occupied).
    SigmaPlus(usize),
    /// Bare `sigma^-` (occupied -> empty).
    SigmaMinus(usize),
    /// Link Pauli `Z`: flips the electric field.
    LinkZ(usize),
    /// Link Pauli `X`: the electric field value.
    LinkX(usize),
}

impl Op {
    pub fn dagger(self) -> Op {
        match self {
            Op::Create(n) => Op::Annihilate(n),
            Op::Annihilate(n) => Op::Create(n),
            Op::SigmaPlus(n) => Op::SigmaMinus(n),
            Op::SigmaMinus(n) => Op::SigmaPlus(n),
            other => other,
        }
    }

    /// Action on a basis label; `None` when the result vanishes.
    pub fn apply(self, layout: &QubitLayout, label: u64) -> Option<(u64, Complex64)> {
        match self {
            Op::Create(n) | Op::Annihilate(n) => {
                let bit = 1u64 << layout.matter_qubit(n);
                let occupied = label & bit != 0;
                let creating = matches!(self, Op::Create(_));
                if occupied == creating {
                    return None;
                }
                // string prod_{l<n} (∓ i sigma^z_l)
                let below = label & layout.matter_mask() & (bit - 1);
                let occ_below = below.count_ones() as usize;
                let empty_below = (n - 1) - occ_below;
                let base = if creating {
                    Complex64::new(0.0, -1.0)
                } else {
                    Complex64::new(0.0, 1.0)
                };
                let mut phase = base.powu((n - 1) as u32);
                if empty_below % 2 == 1 {
                    phase = -phase;
                }
                Some((label ^ bit, phase))
            }
            Op::Number(n) => layout.occupied(label, n).then_some((label, ONE)),
            Op::SigmaZ(n) => {
                let s = if layout.occupied(label, n) { 1.0 } else { -1.0 };
                Some((label, Complex64::new(s, 0.0)))
            }
            Op::SigmaPlus(n) => {
                (!layout.occupied(label, n)).then_some((label | 1 << layout.matter_qubit(n), ONE))
            }
            Op::SigmaMinus(n) => layout
                .occupied(label, n)
                .then_some((label & !(1 << layout.matter_qubit(n)), ONE)),
            Op::LinkZ(n) => Some((label ^ (1 << layout.link_qubit(n)), ONE)),
            Op::LinkX(n) => Some((label, Complex64::new(layout.link_x(label, n) as f64, 0.0))),
        }
    }
}

/// Ordered operator product, written left to right and applied right to
/// left.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial(pub Vec<Op>);

impl Monomial {
    pub fn identity() -> Self {
        Monomial(Vec::new())
    }

    pub fn apply(&self, layout: &QubitLayout, mut label: u64) -> Option<(u64, Complex64)> {
        let mut amp = ONE;
        for op in self.0.iter().rev() {
            let (next, ph) = op.apply(layout, label)?;
            label = next;
            amp *= ph;
        }
        Some((label, amp))
    }

    pub fn dagger(&self) -> Self {
        Monomial(self.0.iter().rev().map(|o| o.dagger()).collect())
    }

    pub fn then(&self, other: &Monomial) -> Self {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Monomial(v)
    }
}

/// Linear combination of monomials.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OperatorSum {
    pub terms: Vec<(Complex64, Monomial)>,
}

impl OperatorSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, coef: Complex64, ops: Vec<Op>) {
        self.terms.push((coef, Monomial(ops)));
    }

    pub fn push_real(&mut self, coef: f64, ops: Vec<Op>) {
        self.push(Complex64::new(coef, 0.0), ops);
    }

    pub fn extend(&mut self, other: &OperatorSum) {
        self.terms.extend(other.terms.iter().cloned());
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        OperatorSum {
            terms: self.terms.iter().map(|(c, m)| (c * s, m.clone())).collect(),
        }
    }

    pub fn dagger(&self) -> Self {
        OperatorSum {
            terms: self.terms.iter().map(|(c, m)| (c.conj(), m.dagger())).collect(),
        }
    }

    /// Action on a single label, with coinciding outputs merged.
    pub fn apply_label(&self, layout: &QubitLayout, label: u64) -> Vec<(u64, Complex64)> {
        let mut out: Vec<(u64, Complex64)> = Vec::with_capacity(self.terms.len());
        for (c, m) in &self.terms {
            if let Some((t, a)) = m.apply(layout, label) {
                match out.iter_mut().find(|(l, _)| *l == t) {
                    Some(slot) => slot.1 += c * a,
                    None => out.push((t, c * a)),
                }
            }
        }
        out
    }

    /// Assembles the matrix on `basis`. Fails if the operator leaks out of a
    /// sector basis.
    pub fn build(&self, basis: &Basis) -> Result<SparseOperator> {
        build_from_fn(basis, |s| self.apply_label(&basis.layout(), s))
    }

    /// Applies the operator directly to a vector without assembling it.
    pub fn apply_vec(&self, basis: &Basis, psi: &[Complex64]) -> Result<Vec<Complex64>> {
        let layout = basis.layout();
        let mut out = vec![ZERO; basis.dim()];
        for (j, a) in psi.iter().enumerate() {
            if *a == ZERO {
                continue;
            }
            for (t, v) in self.apply_label(&layout, basis.state(j)) {
                let i = basis.index_of(t).ok_or(Error::LeavesBasis(t))?;
                out[i] += v * a;
            }
        }
        Ok(out)
    }
}

/// Generic column-by-column assembly from a label map.
pub fn build_from_fn<F>(basis: &Basis, f: F) -> Result<SparseOperator>
where
    F: Fn(u64) -> Vec<(u64, Complex64)>,
{
    let mut trip = Vec::new();
    for j in 0..basis.dim() {
        for (t, v) in f(basis.state(j)) {
            if v == ZERO {
                continue;
            }
            let i = basis.index_of(t).ok_or(Error::LeavesBasis(t))?;
            trip.push((i, j, v));
        }
    }
    Ok(SparseOperator::from_triplets(basis.tag(), basis.dim(), trip))
}

fn check_basis(params: &ModelParams, basis: &Basis) -> Result<()> {
    if basis.layout().sites() != params.sites {
        return Err(Error::DimensionMismatch {
            expected: params.sites,
            found: basis.layout().sites(),
        });
    }
    Ok(())
}

fn stagger(n: usize) -> f64 {
    if n % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// The three pieces of the lattice Hamiltonian in fermionic form.
#[derive(Debug, Clone)]
pub struct HamiltonianParts {
    pub kinetic: OperatorSum,
    pub mass: OperatorSum,
    pub electric: OperatorSum,
}

impl HamiltonianParts {
    pub fn new(params: &ModelParams) -> Self {
        let l = params.sites;
        let layout = params.layout();
        let mut kinetic = OperatorSum::new();
        let mut mass = OperatorSum::new();
        let mut electric = OperatorSum::new();
        for n in 1..=l {
            let np = layout.next(n);
            kinetic.push_real(0.5, vec![Op::Create(n), Op::LinkZ(n), Op::Annihilate(np)]);
            kinetic.push_real(0.5, vec![Op::Create(np), Op::LinkZ(n), Op::Annihilate(n)]);
            mass.push_real(params.mass * stagger(n), vec![Op::Number(n)]);
            electric.push_real(params.coupling, vec![Op::LinkX(n)]);
        }
        HamiltonianParts {
            kinetic,
            mass,
            electric,
        }
    }

    pub fn total(&self) -> OperatorSum {
        let mut h = self.kinetic.clone();
        h.extend(&self.mass);
        h.extend(&self.electric);
        h
    }
}

pub fn build_hamiltonian(params: &ModelParams, basis: &Basis) -> Result<SparseOperator> {
    check_basis(params, basis)?;
    HamiltonianParts::new(params).total().build(basis)
}

/// The per-link terms `H_n` used by the Trotter splitting. Each carries the
/// hopping across link `n`, half of the mass difference of its two end
/// sites, and the electric energy of the link; they sum to `H` exactly.
pub fn local_terms(params: &ModelParams) -> Vec<OperatorSum> {
    let layout = params.layout();
    (1..=params.sites)
        .map(|n| {
            let np = layout.next(n);
            let mut h = OperatorSum::new();
            h.push_real(0.5, vec![Op::Create(n), Op::LinkZ(n), Op::Annihilate(np)]);
            h.push_real(0.5, vec![Op::Create(np), Op::LinkZ(n), Op::Annihilate(n)]);
            let half_mass = 0.5 * params.mass * stagger(n);
            h.push_real(half_mass, vec![Op::Number(n)]);
            h.push_real(-half_mass, vec![Op::Number(np)]);
            h.push_real(params.coupling, vec![Op::LinkX(n)]);
            h
        })
        .collect()
}

/// Qubits touched by `H_n` (ignoring the diagonal Jordan-Wigner string of
/// the boundary term).
pub fn local_term_support(layout: &QubitLayout, n: usize) -> [usize; 3] {
    [
        layout.matter_qubit(n),
        layout.link_qubit(n),
        layout.matter_qubit(layout.next(n)),
    ]
}

/// `G_n = (-1)^{n+1} X_{g,n-1} sigma^z_n X_{g,n}`.
pub fn gauss_generator(layout: &QubitLayout, n: usize) -> OperatorSum {
    let mut g = OperatorSum::new();
    let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
    g.push_real(
        sign,
        vec![Op::LinkX(layout.prev(n)), Op::SigmaZ(n), Op::LinkX(n)],
    );
    g
}

/// Staggered density `chi_n`: `1 - n` on odd sites, `n` on even sites.
pub fn staggered_density(n: usize) -> OperatorSum {
    let mut c = OperatorSum::new();
    if n % 2 == 1 {
        c.push_real(1.0, vec![]);
        c.push_real(-1.0, vec![Op::Number(n)]);
    } else {
        c.push_real(1.0, vec![Op::Number(n)]);
    }
    c
}

pub fn electric_field(n: usize) -> OperatorSum {
    let mut e = OperatorSum::new();
    e.push_real(1.0, vec![Op::LinkX(n)]);
    e
}

/// Links on the shorter cyclic path between sites `n` and `l`. At the tie
/// `|n - l| = L/2` the non-wrapping path is taken.
pub fn wilson_path(layout: &QubitLayout, n: usize, l: usize) -> Result<Vec<usize>> {
    let big_l = layout.sites();
    if n == l || !(1..=big_l).contains(&n) || !(1..=big_l).contains(&l) {
        return Err(Error::InvalidParameter {
            field: "(n, l)",
            reason: format!("need distinct sites in 1..={big_l}, got ({n}, {l})"),
        });
    }
    let (a, b) = (n.min(l), n.max(l));
    if b - a <= big_l / 2 {
        Ok((a..b).collect())
    } else {
        Ok((1..a).chain(b..=big_l).collect())
    }
}

/// Wilson line `W_{n,l}` as a product of link `Z`s.
pub fn wilson_line(layout: &QubitLayout, n: usize, l: usize) -> Result<Monomial> {
    Ok(Monomial(
        wilson_path(layout, n, l)?.into_iter().map(Op::LinkZ).collect(),
    ))
}

/// Gauge-invariant bilinear `M_{(n,l)} = xi_n^dag W_{n,l} xi_l`; for `n = l`
/// this is the number operator.
pub fn meson_operator(layout: &QubitLayout, n: usize, l: usize) -> Result<Monomial> {
    let mut ops = vec![Op::Create(n)];
    if n != l {
        ops.extend(wilson_line(layout, n, l)?.0);
    }
    ops.push(Op::Annihilate(l));
    Ok(Monomial(ops))
}

/// Bilinear of the string-dressed fermions
/// `tilde xi_n^dag tilde xi_l`, with `tilde xi_n^dag = xi_n^dag prod_{r<n} Z_{g,r}`.
/// The link string is always the non-wrapping path between the two sites.
pub fn dressed_bilinear(n: usize, l: usize) -> Monomial {
    let (a, b) = (n.min(l), n.max(l));
    let mut ops = vec![Op::Create(n)];
    ops.extend((a..b).map(Op::LinkZ));
    ops.push(Op::Annihilate(l));
    Monomial(ops)
}

/// `M_I |ground>` on the given basis (not normalised).
pub fn meson_basis_vector(
    basis: &Basis,
    n: usize,
    l: usize,
    ground: &[Complex64],
) -> Result<Vec<Complex64>> {
    let m = meson_operator(&basis.layout(), n, l)?;
    let mut op = OperatorSum::new();
    op.terms.push((ONE, m));
    op.apply_vec(basis, ground)
}

/// Charge conjugation, realised on labels.
///
/// `C xi_n C^-1 = (-1)^n xi_{n+1}^dag` and `C Z_{g,n} C^-1 = Z_{g,n+1}`.
/// A label is written as `xi_{n1}^dag ... xi_{nk}^dag |0, links>` up to a
/// Jordan-Wigner phase; its image is the corresponding product of
/// `(-1)^n xi_{n+1}` acting on the fully occupied state with the links
/// translated by one. The global phase is fixed so that the strong-coupling
/// vacuum is invariant.
#[derive(Debug, Clone, Copy)]
pub struct ChargeConjugation {
    layout: QubitLayout,
    phase: Complex64,
}

impl ChargeConjugation {
    pub fn new(layout: QubitLayout) -> Self {
        let mut c = ChargeConjugation { layout, phase: ONE };
        let omega = layout.strong_coupling_vacuum();
        let (img, amp) = c.apply_label(omega);
        debug_assert_eq!(img, omega);
        c.phase = amp.conj() / amp.norm();
        c
    }

    fn shift_links(&self, label: u64) -> u64 {
        let l = self.layout.sites();
        (1..=l).fold(0u64, |acc, n| {
            if label >> self.layout.link_qubit(n) & 1 == 1 {
                acc | 1 << self.layout.link_qubit(self.layout.next(n))
            } else {
                acc
            }
        })
    }

    pub fn apply_label(&self, label: u64) -> (u64, Complex64) {
        let layout = &self.layout;
        let occ: Vec<usize> = (1..=layout.sites())
            .filter(|&n| layout.occupied(label, n))
            .collect();
        // JW phase of the label relative to the ordered creation product
        let mut t = label & layout.link_mask();
        let mut p = ONE;
        for &n in occ.iter().rev() {
            let (next, ph) = Op::Create(n).apply(layout, t).expect("site empty by construction");
            t = next;
            p *= ph;
        }
        debug_assert_eq!(t, label);
        let mut u = layout.matter_mask() | self.shift_links(label);
        let mut q = self.phase;
        for &n in occ.iter().rev() {
            let m = layout.next(n);
            let (next, ph) = Op::Annihilate(m)
                .apply(layout, u)
                .expect("image of distinct sites is occupied");
            u = next;
            q *= ph * stagger(n);
        }
        (u, q / p)
    }

    pub fn build(&self, basis: &Basis) -> Result<SparseOperator> {
        build_from_fn(basis, |s| vec![self.apply_label(s)])
    }
}

pub fn build_charge_conjugation(params: &ModelParams, basis: &Basis) -> Result<SparseOperator> {
    check_basis(params, basis)?;
    ChargeConjugation::new(params.layout()).build(basis)
}

/// Caches sector operators that several modules need for one model.
#[derive(Debug, Clone)]
pub struct Model {
    pub params: ModelParams,
    pub sector: PhysicalSector,
    pub hamiltonian: SparseOperator,
    pub conjugation: SparseOperator,
}

impl Model {
    pub fn new(params: ModelParams) -> Result<Self> {
        let sector = physical_sector(&params);
        let hamiltonian = build_hamiltonian(&params, &sector)?;
        let conjugation = build_charge_conjugation(&params, &sector)?;
        Ok(Model {
            params,
            sector,
            hamiltonian,
            conjugation,
        })
    }

    pub fn layout(&self) -> QubitLayout {
        self.params.layout()
    }

    pub fn dim(&self) -> usize {
        self.sector.dim()
    }

    pub fn meson_vector(&self, n: usize, l: usize, ground: &[Complex64]) -> Result<Vec<Complex64>> {
        meson_basis_vector(&self.sector, n, l, ground)
    }
}
