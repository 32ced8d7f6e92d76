//! Time evolution and scattering observables.
//!
//! Two propagators are provided:
//!
//! - [`TrotterPlan`] / [`trotter_step`]: the symmetric splitting
//!   `e^{-i H_odd dt/2} e^{-i H_even dt} e^{-i H_odd dt/2}`, where `H_odd`
//!   (`H_even`) collects the per-link terms `H_n` of odd (even) `n`. Terms
//!   within a group act on disjoint sites and commute, and each
//!   `exp(-i H_n t)` is applied exactly: basis states are grouped by the bits
//!   outside the support of `H_n`, so the boundary Jordan-Wigner string only
//!   enters as a phase inside each small block.
//! - [`exact_evolve`]: adaptive Lanczos propagation used as the reference.
//!
//! Observables follow the meson-scattering conventions: vacuum-subtracted
//! staggered density and electric field, energy-component drifts, meson
//! numbers from the QSE annihilators, single-string probabilities `P_l` and
//! the half-chain entanglement entropy.

use std::collections::HashMap;
use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{
    local_term_support, local_terms, meson_operator, Basis, HamiltonianParts, Model, ModelParams,
    OperatorSum,
};
use crate::linalg::{dot, expm_hermitian, norm, ZERO};
use crate::qse::{
    build_qse_matrices, lowest_band, momentum_set, pair_index, solve_qse, MesonSolution, QseConfig,
};
use crate::sparse::SparseOperator;
use crate::spectrum::{ground_state, SolverConfig};
use crate::wavepacket::{build_packet_operator, initial_state, WavePacketSpec};

/// `exp(-i H_n t)` stored as dense blocks over basis indices.
#[derive(Debug, Clone)]
struct LocalPropagator {
    blocks: Vec<(Vec<usize>, DMatrix<Complex64>)>,
    phases: Vec<(usize, Complex64)>,
}

impl LocalPropagator {
    fn new(term: &OperatorSum, basis: &Basis, mask: u64, t: f64) -> Result<Self> {
        let layout = basis.layout();
        let mut groups: HashMap<u64, Vec<usize>> = HashMap::new();
        for i in 0..basis.dim() {
            groups.entry(basis.state(i) & !mask).or_default().push(i);
        }
        let mut keys: Vec<u64> = groups.keys().copied().collect();
        keys.sort_unstable();
        let mut blocks = Vec::new();
        let mut phases = Vec::new();
        for key in keys {
            let idx = &groups[&key];
            let local: HashMap<u64, usize> = idx
                .iter()
                .enumerate()
                .map(|(j, &i)| (basis.state(i), j))
                .collect();
            let mut h = DMatrix::<Complex64>::zeros(idx.len(), idx.len());
            for (j, &i) in idx.iter().enumerate() {
                for (label, c) in term.apply_label(&layout, basis.state(i)) {
                    let r = *local.get(&label).ok_or(Error::LeavesBasis(label))?;
                    h[(r, j)] += c;
                }
            }
            if idx.len() == 1 {
                phases.push((idx[0], Complex64::from_polar(1.0, -h[(0, 0)].re * t)));
            } else {
                blocks.push((idx.clone(), expm_hermitian(&h, t)));
            }
        }
        Ok(LocalPropagator { blocks, phases })
    }

    fn apply(&self, psi: &mut [Complex64]) {
        for &(i, p) in &self.phases {
            psi[i] *= p;
        }
        for (idx, u) in &self.blocks {
            let x = DVector::from_iterator(idx.len(), idx.iter().map(|&i| psi[i]));
            let y = u * x;
            for (j, &i) in idx.iter().enumerate() {
                psi[i] = y[j];
            }
        }
    }
}

/// Second-order Trotter schedule on a fixed basis.
#[derive(Debug, Clone)]
pub struct TrotterPlan {
    pub dt: f64,
    pub t_final: f64,
    /// Local terms `H_1..H_L`; odd `n` form `H_odd`, even `n` form `H_even`.
    pub term_list: Vec<OperatorSum>,
    half_odd: Vec<LocalPropagator>,
    full_even: Vec<LocalPropagator>,
}

impl TrotterPlan {
    pub fn new(params: &ModelParams, basis: &Basis, dt: f64, t_final: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter {
                field: "dt",
                reason: format!("must be positive, got {dt}"),
            });
        }
        if !(t_final >= 0.0) || !t_final.is_finite() {
            return Err(Error::InvalidParameter {
                field: "t_final",
                reason: format!("must be non-negative, got {t_final}"),
            });
        }
        if basis.layout().sites() != params.sites {
            return Err(Error::DimensionMismatch {
                expected: params.sites,
                found: basis.layout().sites(),
            });
        }
        let layout = basis.layout();
        let term_list = local_terms(params);
        let mut half_odd = Vec::new();
        let mut full_even = Vec::new();
        for (i, term) in term_list.iter().enumerate() {
            let n = i + 1;
            let mask = local_term_support(&layout, n)
                .iter()
                .fold(0u64, |m, &q| m | (1u64 << q));
            if n % 2 == 1 {
                half_odd.push(LocalPropagator::new(term, basis, mask, 0.5 * dt)?);
            } else {
                full_even.push(LocalPropagator::new(term, basis, mask, dt)?);
            }
        }
        Ok(TrotterPlan {
            dt,
            t_final,
            term_list,
            half_odd,
            full_even,
        })
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// `(H_odd, H_even)` as sparse matrices.
    pub fn group_sums(&self, basis: &Basis) -> Result<(SparseOperator, SparseOperator)> {
        let mut odd = OperatorSum::new();
        let mut even = OperatorSum::new();
        for (i, t) in self.term_list.iter().enumerate() {
            if i % 2 == 0 {
                odd.extend(t);
            } else {
                even.extend(t);
            }
        }
        Ok((odd.build(basis)?, even.build(basis)?))
    }
}

/// One symmetric Trotter step in place.
pub fn trotter_step(psi: &mut [Complex64], plan: &TrotterPlan) {
    plan.half_odd.iter().for_each(|p| p.apply(psi));
    plan.full_even.iter().for_each(|p| p.apply(psi));
    plan.half_odd.iter().for_each(|p| p.apply(psi));
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KrylovConfig {
    pub krylov_dim: usize,
    /// Target error of the whole propagation.
    pub tol: f64,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        KrylovConfig {
            krylov_dim: 30,
            tol: 1e-11,
        }
    }
}

/// `exp(-i H t) psi` by Lanczos steps whose length adapts to the local
/// error estimate `beta_m |y_m|`.
pub fn exact_evolve(
    h: &SparseOperator,
    psi: &[Complex64],
    t: f64,
    cfg: &KrylovConfig,
) -> Result<Vec<Complex64>> {
    if psi.len() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: psi.len(),
        });
    }
    let mut out = psi.to_vec();
    let total = t.abs();
    if total == 0.0 {
        return Ok(out);
    }
    let sign = t.signum();
    let mut done = 0.0;
    let mut tau = total;
    while done < total {
        let beta0 = norm(&out);
        if beta0 == 0.0 {
            return Ok(out);
        }
        let (v, alpha, beta) = lanczos(h, &out, beta0, cfg.krylov_dim);
        let m = alpha.len();
        let happy = beta[m - 1] < 1e-13;
        let mut tri = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            tri[(i, i)] = alpha[i];
            if i + 1 < m {
                tri[(i, i + 1)] = beta[i];
                tri[(i + 1, i)] = beta[i];
            }
        }
        let eig = tri.symmetric_eigen();
        loop {
            let step = tau.min(total - done);
            // y = exp(-i T s) e_1
            let y: Vec<Complex64> = (0..m)
                .map(|r| {
                    (0..m)
                        .map(|j| {
                            Complex64::from_polar(
                                eig.eigenvectors[(r, j)] * eig.eigenvectors[(0, j)],
                                -sign * eig.eigenvalues[j] * step,
                            )
                        })
                        .sum()
                })
                .collect();
            let err = if happy {
                0.0
            } else {
                beta0 * beta[m - 1] * y[m - 1].norm()
            };
            if err <= cfg.tol * step / total {
                out.iter_mut().for_each(|x| *x = ZERO);
                for (j, vj) in v.iter().enumerate() {
                    let c = y[j] * beta0;
                    for (o, x) in out.iter_mut().zip(vj) {
                        *o += c * x;
                    }
                }
                done += step;
                if err < 0.1 * cfg.tol * step / total {
                    tau = step * 1.5;
                }
                break;
            }
            tau = 0.5 * step;
            if tau < 1e-12 * total {
                return Err(Error::StepUnderflow { step: tau });
            }
        }
    }
    Ok(out)
}

/// Lanczos basis with full reorthogonalisation. `beta` has one entry per
/// vector unless the space closes early.
fn lanczos(
    h: &SparseOperator,
    psi: &[Complex64],
    beta0: f64,
    m: usize,
) -> (Vec<Vec<Complex64>>, Vec<f64>, Vec<f64>) {
    let m = m.min(h.dim()).max(1);
    let mut v: Vec<Vec<Complex64>> = vec![psi.iter().map(|x| x / beta0).collect()];
    let mut alpha = Vec::with_capacity(m);
    let mut beta = Vec::with_capacity(m);
    let mut w = vec![ZERO; h.dim()];
    for j in 0..m {
        h.apply_into(&v[j], &mut w);
        let a = dot(&v[j], &w).re;
        alpha.push(a);
        for _ in 0..2 {
            for vk in &v {
                let c = dot(vk, &w);
                for (x, y) in w.iter_mut().zip(vk) {
                    *x -= c * y;
                }
            }
        }
        let b = norm(&w);
        beta.push(b);
        if b < 1e-13 || j + 1 == m {
            break;
        }
        v.push(w.iter().map(|x| x / b).collect());
    }
    (v, alpha, beta)
}

/// Annihilators `b_{k,c} = sum_I conj(a_I) M_I^dag` of the lowest accepted
/// QSE band for each conjugation sign.
#[derive(Debug, Clone)]
pub struct MesonCounter {
    pub vector_momenta: Vec<i64>,
    pub scalar_momenta: Vec<i64>,
    vector: Vec<SparseOperator>,
    scalar: Vec<SparseOperator>,
}

impl MesonCounter {
    pub fn new(model: &Model, sols: &[MesonSolution]) -> Result<Self> {
        let build = |c: i32| -> Result<(Vec<i64>, Vec<SparseOperator>)> {
            let band = lowest_band(sols, c);
            let ks = band.iter().map(|s| s.k_int).collect();
            let ops = band
                .iter()
                .map(|s| annihilator(model, s))
                .collect::<Result<Vec<_>>>()?;
            Ok((ks, ops))
        };
        let (vector_momenta, vector) = build(-1)?;
        let (scalar_momenta, scalar) = build(1)?;
        Ok(MesonCounter {
            vector_momenta,
            scalar_momenta,
            vector,
            scalar,
        })
    }

    /// `rho_c = sum_k <psi| b^dag_{k,c} b_{k,c} |psi>`.
    pub fn count(&self, c: i32, psi: &[Complex64]) -> f64 {
        let ops = if c < 0 { &self.vector } else { &self.scalar };
        ops.iter().map(|b| norm(&b.apply(psi)).powi(2)).sum()
    }
}

/// `b = sum_{nl} conj(a_{nl}) M_{nl}^dag` on the sector.
pub fn annihilator(model: &Model, sol: &MesonSolution) -> Result<SparseOperator> {
    let l = model.params.sites;
    let layout = model.layout();
    let mut op = OperatorSum::new();
    for n in 1..=l {
        for m in 1..=l {
            let a = sol.coeffs[pair_index(l, n, m)];
            if a != ZERO {
                op.terms
                    .push((a.conj(), meson_operator(&layout, n, m)?.dagger()));
            }
        }
    }
    op.build(&model.sector)
}

/// Schmidt blocks of the cut between qubit `L - 1` (link `g_{L/2}`) and
/// qubit `L` (matter `f_{L/2+1}`). Basis states are grouped into connected
/// components of the bipartite graph between left and right bit patterns,
/// so each component is an independent block of the coefficient matrix.
#[derive(Debug, Clone)]
pub struct EntropyCut {
    blocks: Vec<CutBlock>,
}

#[derive(Debug, Clone)]
struct CutBlock {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, usize)>,
}

impl EntropyCut {
    pub fn new(basis: &Basis) -> Self {
        let cut = basis.layout().sites() as u32;
        let low = (1u64 << cut) - 1;
        let mut ids: HashMap<(bool, u64), usize> = HashMap::new();
        let mut parent: Vec<usize> = Vec::new();
        let mut id = |key: (bool, u64), parent: &mut Vec<usize>| -> usize {
            *ids.entry(key).or_insert_with(|| {
                parent.push(parent.len());
                parent.len() - 1
            })
        };
        let mut ends = Vec::with_capacity(basis.dim());
        for i in 0..basis.dim() {
            let s = basis.state(i);
            let a = id((false, s & low), &mut parent);
            let b = id((true, s >> cut), &mut parent);
            ends.push((a, b));
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        let mut block_of: HashMap<usize, usize> = HashMap::new();
        let mut blocks: Vec<CutBlock> = Vec::new();
        let mut local: Vec<HashMap<usize, usize>> = Vec::new();
        for (i, &(a, b)) in ends.iter().enumerate() {
            let root = find(&mut parent, a);
            let k = *block_of.entry(root).or_insert_with(|| {
                blocks.push(CutBlock {
                    rows: 0,
                    cols: 0,
                    entries: Vec::new(),
                });
                local.push(HashMap::new());
                blocks.len() - 1
            });
            let blk = &mut blocks[k];
            let map = &mut local[k];
            let r = *map.entry(a).or_insert_with(|| {
                blk.rows += 1;
                blk.rows - 1
            });
            let c = *map.entry(b).or_insert_with(|| {
                blk.cols += 1;
                blk.cols - 1
            });
            blk.entries.push((i, r, c));
        }
        EntropyCut { blocks }
    }

    /// Von Neumann entropy (base 2) of the left half.
    pub fn entropy(&self, psi: &[Complex64]) -> f64 {
        let mut s = 0.0;
        for b in &self.blocks {
            let mut m = DMatrix::<Complex64>::zeros(b.rows, b.cols);
            for &(i, r, c) in &b.entries {
                m[(r, c)] = psi[i];
            }
            for sv in m.singular_values().iter() {
                let p = sv * sv;
                if p > 1e-300 {
                    s -= p * p.log2();
                }
            }
        }
        s
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Everything needed to evaluate the scattering observables on one model.
#[derive(Debug, Clone)]
pub struct ObservableSet {
    pub sites: usize,
    pub ground: Vec<Complex64>,
    pub meson_counter: MesonCounter,
    chi: Vec<Vec<f64>>,
    efield: Vec<Vec<f64>>,
    gauss: Vec<Vec<f64>>,
    chi_vacuum: Vec<f64>,
    efield_vacuum: Vec<f64>,
    entropy_vacuum: f64,
    parts: [SparseOperator; 3],
    reference: [f64; 3],
    strings: Vec<Vec<Vec<Complex64>>>,
    cut: EntropyCut,
}

impl ObservableSet {
    pub fn new(model: &Model, ground: &[Complex64], sols: &[MesonSolution]) -> Result<Self> {
        let l = model.params.sites;
        let layout = model.layout();
        let labels: Vec<u64> = (0..model.dim()).map(|i| model.sector.state(i)).collect();
        let diag = |f: &dyn Fn(u64, usize) -> f64| -> Vec<Vec<f64>> {
            (1..=l)
                .map(|n| labels.iter().map(|&s| f(s, n)).collect())
                .collect()
        };
        let chi = diag(&|s, n| {
            let occ = layout.occupied(s, n) as u8 as f64;
            if n % 2 == 1 {
                1.0 - occ
            } else {
                occ
            }
        });
        let efield = diag(&|s, n| layout.link_x(s, n) as f64);
        let gauss = diag(&|s, n| layout.gauss_eigenvalue(s, n) as f64);
        let parts_sum = HamiltonianParts::new(&model.params);
        let parts = [
            parts_sum.kinetic.build(&model.sector)?,
            parts_sum.mass.build(&model.sector)?,
            parts_sum.electric.build(&model.sector)?,
        ];
        let mut strings = Vec::with_capacity(l / 2);
        for len in 1..=l / 2 {
            let mut v = Vec::new();
            for n in 1..=l - len {
                v.push(model.meson_vector(n, n + len, ground)?);
            }
            for n in len + 1..=l {
                v.push(model.meson_vector(n, n - len, ground)?);
            }
            strings.push(v);
        }
        let cut = EntropyCut::new(&model.sector);
        let mut set = ObservableSet {
            sites: l,
            ground: ground.to_vec(),
            meson_counter: MesonCounter::new(model, sols)?,
            chi,
            efield,
            gauss,
            chi_vacuum: vec![0.0; l],
            efield_vacuum: vec![0.0; l],
            entropy_vacuum: 0.0,
            parts,
            reference: [0.0; 3],
            strings,
            cut,
        };
        set.chi_vacuum = diag_expect(&set.chi, ground);
        set.efield_vacuum = diag_expect(&set.efield, ground);
        set.entropy_vacuum = set.cut.entropy(ground);
        set.set_reference(ground);
        Ok(set)
    }

    /// Sets the state whose energy components `delta E_B` are measured from.
    pub fn set_reference(&mut self, psi: &[Complex64]) {
        self.reference = self.energy_parts(psi);
    }

    /// `<H_kin>, <H_mass>, <H_el>`.
    pub fn energy_parts(&self, psi: &[Complex64]) -> [f64; 3] {
        let e = |i: usize| self.parts[i].expectation(psi).re;
        [e(0), e(1), e(2)]
    }

    pub fn entropy(&self, psi: &[Complex64]) -> f64 {
        self.cut.entropy(psi)
    }

    /// `P_l` for `l = 1..=L/2`.
    pub fn string_probabilities(&self, psi: &[Complex64]) -> Vec<f64> {
        self.strings
            .iter()
            .map(|vs| vs.iter().map(|v| dot(v, psi).norm_sqr()).sum())
            .collect()
    }
}

fn diag_expect(d: &[Vec<f64>], psi: &[Complex64]) -> Vec<f64> {
    d.iter()
        .map(|w| w.iter().zip(psi).map(|(x, p)| x * p.norm_sqr()).sum())
        .collect()
}

/// One row of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub step: usize,
    pub t: f64,
    /// `Delta <chi_n>` for `n = 1..=L`.
    pub chi: Vec<f64>,
    /// `Delta <X_{g,n}>` for `n = 1..=L`.
    pub efield: Vec<f64>,
    pub d_kin: f64,
    pub d_mass: f64,
    pub d_el: f64,
    pub energy: f64,
    pub rho_vector: Option<f64>,
    pub rho_scalar: Option<f64>,
    /// `P_l` for `l = 1..=L/2`.
    pub strings: Vec<f64>,
    /// Entropy of the left half minus its vacuum value.
    pub entropy: f64,
    pub norm: f64,
    pub gauss_residual: f64,
    /// `1 - |<psi_exact|psi>|^2` when the exact reference is propagated.
    pub exact_infidelity: Option<f64>,
}

/// Evaluates every observable on `psi`; meson numbers only when requested.
pub fn measure_all(
    psi: &[Complex64],
    ctx: &ObservableSet,
    step: usize,
    t: f64,
    with_mesons: bool,
) -> Measurement {
    let nrm = norm(psi);
    let chi = diag_expect(&ctx.chi, psi);
    let ef = diag_expect(&ctx.efield, psi);
    let gauss_residual = diag_expect(&ctx.gauss, psi)
        .iter()
        .map(|g| (g - nrm * nrm).abs())
        .fold(0.0, f64::max);
    let e = ctx.energy_parts(psi);
    Measurement {
        step,
        t,
        chi: chi.iter().zip(&ctx.chi_vacuum).map(|(a, b)| a - b).collect(),
        efield: ef.iter().zip(&ctx.efield_vacuum).map(|(a, b)| a - b).collect(),
        d_kin: e[0] - ctx.reference[0],
        d_mass: e[1] - ctx.reference[1],
        d_el: e[2] - ctx.reference[2],
        energy: e.iter().sum(),
        rho_vector: with_mesons.then(|| ctx.meson_counter.count(-1, psi)),
        rho_scalar: with_mesons.then(|| ctx.meson_counter.count(1, psi)),
        strings: ctx.string_probabilities(psi),
        entropy: ctx.entropy(psi) - ctx.entropy_vacuum,
        norm: nrm,
        gauss_residual,
        exact_infidelity: None,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub rows: Vec<Measurement>,
}

impl TrajectoryRecord {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn write_density_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "step,t,n,d_chi,d_efield")?;
        for r in &self.rows {
            for (n, (c, e)) in r.chi.iter().zip(&r.efield).enumerate() {
                writeln!(w, "{},{:.6},{},{:.12e},{:.12e}", r.step, r.t, n + 1, c, e)?;
            }
        }
        Ok(())
    }

    pub fn write_energy_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "step,t,d_kin,d_mass,d_el,energy")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{:.6},{:.12e},{:.12e},{:.12e},{:.12e}",
                r.step, r.t, r.d_kin, r.d_mass, r.d_el, r.energy
            )?;
        }
        Ok(())
    }

    pub fn write_mesons_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "step,t,rho_vector,rho_scalar")?;
        for r in &self.rows {
            if let (Some(v), Some(s)) = (r.rho_vector, r.rho_scalar) {
                writeln!(w, "{},{:.6},{:.12e},{:.12e}", r.step, r.t, v, s)?;
            }
        }
        Ok(())
    }

    pub fn write_strings_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "step,t,l,p")?;
        for r in &self.rows {
            for (l, p) in r.strings.iter().enumerate() {
                writeln!(w, "{},{:.6},{},{:.12e}", r.step, r.t, l + 1, p)?;
            }
        }
        Ok(())
    }

    pub fn write_entropy_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "step,t,d_entropy,norm,gauss_residual,exact_infidelity")?;
        for r in &self.rows {
            let ex = r
                .exact_infidelity
                .map(|x| format!("{x:.12e}"))
                .unwrap_or_default();
            writeln!(
                w,
                "{},{:.6},{:.12e},{:.12e},{:.12e},{}",
                r.step, r.t, r.entropy, r.norm, r.gauss_residual, ex
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketConfig {
    pub kbar: i64,
    pub xbar: f64,
    pub sigma_k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterConfig {
    pub params: ModelParams,
    pub packets: [PacketConfig; 2],
    pub dt: f64,
    pub t_final: f64,
    /// Observables are recorded every `cadence` steps.
    pub cadence: usize,
    /// Meson numbers are recorded every `meson_cadence` steps.
    pub meson_cadence: usize,
    /// Propagate the Krylov reference alongside the Trotter state.
    pub exact_check: bool,
    pub qse: QseConfig,
    pub solver: SolverConfig,
    pub krylov: KrylovConfig,
}

impl ScatterConfig {
    /// Defaults for `L` sites: packets at `L/4` and `3L/4` with momenta
    /// `+-1`, width `2 pi / L`, `dt = 0.1`.
    pub fn new(params: ModelParams, t_final: f64) -> Self {
        let l = params.sites as f64;
        let sigma_k = 2.0 * std::f64::consts::PI / l;
        ScatterConfig {
            params,
            packets: [
                PacketConfig {
                    kbar: 1,
                    xbar: l / 4.0,
                    sigma_k,
                },
                PacketConfig {
                    kbar: -1,
                    xbar: 3.0 * l / 4.0,
                    sigma_k,
                },
            ],
            dt: 0.1,
            t_final,
            cadence: 1,
            meson_cadence: 4,
            exact_check: false,
            qse: QseConfig::default(),
            solver: SolverConfig::default(),
            krylov: KrylovConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cadence == 0 {
            return Err(Error::InvalidParameter {
                field: "cadence",
                reason: "must be at least 1".into(),
            });
        }
        if self.meson_cadence == 0 {
            return Err(Error::InvalidParameter {
                field: "meson_cadence",
                reason: "must be at least 1".into(),
            });
        }
        let l = self.params.sites as f64;
        for p in &self.packets {
            if !(0.0..l).contains(&p.xbar) {
                return Err(Error::InvalidParameter {
                    field: "xbar",
                    reason: format!("{} outside [0, {l})", p.xbar),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ScatterOutcome {
    pub record: TrajectoryRecord,
    pub ground_energy: f64,
    /// `<psi(0)|H|psi(0)> - E_0`.
    pub excitation_energy: f64,
    pub lambda_star: Vec<i64>,
    pub final_state: Vec<Complex64>,
}

/// Builds the two-packet state on the QSE vacuum and evolves it with the
/// Trotter plan, recording observables along the way.
pub fn run_scattering(cfg: &ScatterConfig) -> Result<ScatterOutcome> {
    cfg.validate()?;
    let model = Model::new(cfg.params)?;
    let gs = ground_state(&model.hamiltonian, &cfg.solver)?;
    let ground = gs.ground_vector().to_vec();
    let mats = build_qse_matrices(&model, &ground)?;
    let sols = solve_qse(&mats, &cfg.qse)?;
    let lambda_star = momentum_set(&sols, -1);
    let packets = cfg
        .packets
        .iter()
        .map(|p| {
            let spec = WavePacketSpec::new(p.kbar, p.xbar, p.sigma_k, lambda_star.clone())?;
            build_packet_operator(&model, &spec, &sols)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut psi = initial_state(&packets[0], &packets[1], &ground)?;
    let mut ctx = ObservableSet::new(&model, &ground, &sols)?;
    ctx.set_reference(&psi);
    let plan = TrotterPlan::new(&cfg.params, &model.sector, cfg.dt, cfg.t_final)?;
    let mut exact = cfg.exact_check.then(|| psi.clone());
    let mut record = TrajectoryRecord::default();
    let excitation_energy = ctx.energy_parts(&psi).iter().sum::<f64>() - gs.ground_energy();
    let steps = plan.steps();
    let mut last_exact = 0usize;
    for step in 0..=steps {
        if step > 0 {
            trotter_step(&mut psi, &plan);
        }
        let on_meson = step % cfg.meson_cadence == 0;
        if step % cfg.cadence == 0 || on_meson || step == steps {
            let mut row = measure_all(&psi, &ctx, step, step as f64 * cfg.dt, on_meson);
            if let Some(ex) = exact.as_mut() {
                let dt = (step - last_exact) as f64 * cfg.dt;
                *ex = exact_evolve(&model.hamiltonian, ex, dt, &cfg.krylov)?;
                last_exact = step;
                let f = dot(ex, &psi).norm_sqr() / (norm(ex) * norm(&psi)).powi(2);
                row.exact_infidelity = Some(1.0 - f);
            }
            record.rows.push(row);
        }
    }
    Ok(ScatterOutcome {
        record,
        ground_energy: gs.ground_energy(),
        excitation_energy,
        lambda_star,
        final_state: psi,
    })
}

/// Qualitative features of a scattering trajectory. The collision time is
/// where the excess density on the two central sites peaks, and the run is
/// judged up to twice that time, when the packets have separated again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterSummary {
    pub rho_initial: f64,
    /// `max_t max_B |delta E_B(t)|` over the excitation energy.
    pub max_drift_fraction: f64,
    pub collision_time: f64,
    pub final_time: f64,
    /// Peak of `sum_l P_l(t)` and when it occurs.
    pub string_peak: f64,
    pub string_peak_time: f64,
    /// Mean of `sum_l P_l` over the last tenth of the window.
    pub string_tail: f64,
    pub entropy_peak: f64,
    pub entropy_final: f64,
}

impl ScatterSummary {
    pub fn new(out: &ScatterOutcome) -> Result<Self> {
        let rows = &out.record.rows;
        let first = rows.first().ok_or(Error::ZeroNorm("empty trajectory"))?;
        let l = first.chi.len();
        let central = |r: &Measurement| r.chi[l / 2 - 1] + r.chi[l / 2];
        let collision = rows
            .iter()
            .max_by(|a, b| central(a).total_cmp(&central(b)))
            .map(|r| r.t)
            .unwrap_or(0.0);
        let last_t = rows.last().map(|r| r.t).unwrap_or(0.0);
        let final_time = (2.0 * collision).min(last_t);
        let window: Vec<&Measurement> = rows.iter().filter(|r| r.t <= final_time + 1e-9).collect();
        let total = |r: &Measurement| r.strings.iter().sum::<f64>();
        let (string_peak, string_peak_time) = window
            .iter()
            .map(|r| (total(r), r.t))
            .fold((f64::MIN, 0.0), |a, b| if b.0 > a.0 { b } else { a });
        let tail: Vec<f64> = window
            .iter()
            .filter(|r| r.t >= 0.9 * final_time)
            .map(|r| total(r))
            .collect();
        let string_tail = tail.iter().sum::<f64>() / tail.len().max(1) as f64;
        let max_drift = window
            .iter()
            .map(|r| r.d_kin.abs().max(r.d_mass.abs()).max(r.d_el.abs()))
            .fold(0.0, f64::max);
        let entropy_peak = window.iter().map(|r| r.entropy).fold(f64::MIN, f64::max);
        let entropy_final = window.last().map(|r| r.entropy).unwrap_or(0.0);
        Ok(ScatterSummary {
            rho_initial: first.rho_vector.unwrap_or(f64::NAN),
            max_drift_fraction: max_drift / out.excitation_energy,
            collision_time: collision,
            final_time,
            string_peak,
            string_peak_time,
            string_tail,
            entropy_peak,
            entropy_final,
        })
    }

    pub fn rho_in_window(&self) -> bool {
        (1.9..=2.05).contains(&self.rho_initial)
    }

    pub fn drifts_bounded(&self) -> bool {
        self.max_drift_fraction <= 0.1
    }

    /// The string probability peaks around the collision and decays after.
    pub fn string_peak_then_decay(&self) -> bool {
        let c = self.collision_time;
        (0.5 * c..=1.5 * c).contains(&self.string_peak_time)
            && self.string_tail < 0.5 * self.string_peak
    }

    pub fn entropy_relaxes(&self) -> bool {
        self.entropy_final < 0.5 * self.entropy_peak
    }
}
