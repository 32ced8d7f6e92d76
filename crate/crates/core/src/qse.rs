//! Quantum subspace expansion for gauge-invariant meson creation
//! operators `O = sum_{n,l} a_{nl} xi_n^dag W_{nl} xi_l`.
//!
//! With `|v_I> = M_I |Omega>` and `|w_I> = M_I^dag |Omega>` the subspace
//! matrices are
//!
//! ```text
//! H_IJ = <v_I|H|v_J>   C_IJ = <v_I|C|v_J>   S_IJ = <v_I|v_J>   Z_IJ = <w_J|w_I>
//! ```
//!
//! and the constrained problem `(H + C + Z) a = lambda S a` is solved in the
//! whitened range of `S`. Multi-indices run row-major over `(n, l)`.

use std::f64::consts::PI;
use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{meson_basis_vector, meson_operator, Model, OperatorSum};
use crate::linalg::{axpy, dot, eig_general, eigh, fidelity, ONE, ZERO};
use crate::spectrum::EigenSolution;

/// Row-major multi-index of the pair `(n, l)` (1-based sites).
pub fn pair_index(sites: usize, n: usize, l: usize) -> usize {
    (n - 1) * sites + (l - 1)
}

pub fn pair_of(sites: usize, idx: usize) -> (usize, usize) {
    (idx / sites + 1, idx % sites + 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QseMatrices {
    pub sites: usize,
    pub h: DMatrix<Complex64>,
    pub c: DMatrix<Complex64>,
    pub s: DMatrix<Complex64>,
    pub z: DMatrix<Complex64>,
}

/// The images `M_I |ground>` for every pair, in multi-index order.
pub fn meson_images(model: &Model, ground: &[Complex64]) -> Result<Vec<Vec<Complex64>>> {
    let l = model.params.sites;
    (0..l * l)
        .map(|idx| {
            let (n, m) = pair_of(l, idx);
            meson_basis_vector(&model.sector, n, m, ground)
        })
        .collect()
}

pub fn build_qse_matrices(model: &Model, ground: &[Complex64]) -> Result<QseMatrices> {
    let l = model.params.sites;
    let layout = model.layout();
    let dim = l * l;
    let v = meson_images(model, ground)?;
    let w: Vec<Vec<Complex64>> = (0..dim)
        .map(|idx| {
            let (n, m) = pair_of(l, idx);
            let mut op = OperatorSum::new();
            op.terms.push((ONE, meson_operator(&layout, n, m)?.dagger()));
            op.apply_vec(&model.sector, ground)
        })
        .collect::<Result<_>>()?;
    let hv: Vec<Vec<Complex64>> = v.iter().map(|x| model.hamiltonian.apply(x)).collect();
    let cv: Vec<Vec<Complex64>> = v.iter().map(|x| model.conjugation.apply(x)).collect();
    let h = DMatrix::from_fn(dim, dim, |i, j| dot(&v[i], &hv[j]));
    let c = DMatrix::from_fn(dim, dim, |i, j| dot(&v[i], &cv[j]));
    let s = DMatrix::from_fn(dim, dim, |i, j| dot(&v[i], &v[j]));
    let z = DMatrix::from_fn(dim, dim, |i, j| dot(&w[j], &w[i]));
    Ok(QseMatrices { sites: l, h, c, s, z })
}

/// How the conjugation sign `c` is read off from `<C> = c e^{-ik}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Labeling {
    /// `c` is the sign of `Re <C>` (ties go to `-1`).
    Nearest,
    /// `c = -1` for every solution, so the full zone is read as vector
    /// mesons.
    VectorBranch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QseConfig {
    /// Relative cutoff on eigenvalues of `S`. Near-null directions of `S`
    /// barely change `O|Omega>` but blow up the action of `O` on other
    /// states, so the default sits well above round-off.
    pub s_cut: f64,
    /// Acceptance window on `| |<C>| - 1 |`.
    pub c_tol: f64,
    /// Acceptance bound on the annihilation norm.
    pub z_tol: f64,
    pub labeling: Labeling,
}

impl Default for QseConfig {
    fn default() -> Self {
        QseConfig {
            s_cut: 1e-4,
            c_tol: 0.05,
            z_tol: 0.05,
            labeling: Labeling::Nearest,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MesonSolution {
    /// `a_{nl}` in multi-index order, normalised so that `a^dag S a = 1`.
    #[serde(skip)]
    pub coeffs: Vec<Complex64>,
    /// `a^dag H a` (absolute, vacuum not subtracted).
    pub energy: f64,
    /// Eigenvalue of the constrained problem.
    pub lambda: Complex64,
    /// `a^dag C a = c e^{-ik}`.
    pub c_expect: Complex64,
    pub k_int: i64,
    pub c: i32,
    /// `a^dag Z a`.
    pub nz: f64,
    /// Eigen-residual of the whitened problem.
    pub residual: f64,
    pub accepted: bool,
    pub fidelity: Option<f64>,
}

impl MesonSolution {
    pub fn coeff(&self, sites: usize, n: usize, l: usize) -> Complex64 {
        self.coeffs[pair_index(sites, n, l)]
    }

    pub fn is_vector(&self) -> bool {
        self.c == -1
    }
}

fn quad(m: &DMatrix<Complex64>, a: &DVector<Complex64>) -> Complex64 {
    (a.adjoint() * m * a)[(0, 0)]
}

/// Whitening transform `X` with `X^dag S X = 1` on the retained range of
/// `S`.
fn whitening(s: &DMatrix<Complex64>, s_cut: f64) -> DMatrix<Complex64> {
    let (vals, vecs) = eigh(s);
    let smax = vals.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > s_cut * smax).collect();
    let mut x = DMatrix::zeros(s.nrows(), keep.len());
    for (j, &i) in keep.iter().enumerate() {
        let col = vecs.column(i) * Complex64::new(1.0 / vals[i].sqrt(), 0.0);
        x.set_column(j, &col);
    }
    x
}

/// Two steps of shifted inverse iteration to polish a computed eigenvector.
fn refine(k: &DMatrix<Complex64>, lambda: Complex64, y: DVector<Complex64>) -> DVector<Complex64> {
    let n = k.nrows();
    let scale = k.norm().max(1e-300);
    let shifted = k - DMatrix::<Complex64>::identity(n, n) * (lambda + scale * 1e-12);
    let lu = shifted.lu();
    let mut best = y.clone();
    let mut best_res = (k * &y - &y * lambda).norm();
    let mut cur = y;
    for _ in 0..2 {
        let Some(next) = lu.solve(&cur) else { break };
        let nn = next.norm();
        if !nn.is_finite() || nn == 0.0 {
            break;
        }
        cur = next / Complex64::new(nn, 0.0);
        let res = (k * &cur - &cur * lambda).norm();
        if res < best_res {
            best_res = res;
            best = cur.clone();
        }
    }
    best
}

/// Labels `<C>` with a sign and an integer momentum in `(-L/2, L/2]`.
pub fn label_momentum(c_expect: Complex64, sites: usize, labeling: Labeling) -> (i32, i64) {
    let c = match labeling {
        Labeling::VectorBranch => -1,
        Labeling::Nearest => {
            if c_expect.re.abs() < 1e-6 || c_expect.re < 0.0 {
                -1
            } else {
                1
            }
        }
    };
    let phase = c_expect / c as f64;
    let raw = (-phase.arg() * sites as f64 / (2.0 * PI)).round() as i64;
    let l = sites as i64;
    let mut k = raw.rem_euclid(l);
    if k > l / 2 {
        k -= l;
    }
    (c, k)
}

/// Solves the constrained eigenproblem and returns every solution, accepted
/// or not, ranked by `E + N_Z`.
pub fn solve_qse(mats: &QseMatrices, cfg: &QseConfig) -> Result<Vec<MesonSolution>> {
    let x = whitening(&mats.s, cfg.s_cut);
    if x.ncols() == 0 {
        return Err(Error::ZeroNorm("subspace overlap matrix"));
    }
    let total = &mats.h + &mats.c + &mats.z;
    let k = x.adjoint() * &total * &x;
    let (vals, vecs) = eig_general(&k);
    let mut out = Vec::with_capacity(vals.len());
    for (j, lambda) in vals.into_iter().enumerate() {
        let y = refine(&k, lambda, vecs.column(j).into_owned());
        let residual = (&k * &y - &y * lambda).norm() / y.norm();
        let a = &x * y;
        let energy = quad(&mats.h, &a).re;
        let c_expect = quad(&mats.c, &a);
        let nz = quad(&mats.z, &a).re;
        let (c, k_int) = label_momentum(c_expect, mats.sites, cfg.labeling);
        let accepted = (c_expect.norm() - 1.0).abs() <= cfg.c_tol && nz <= cfg.z_tol;
        out.push(MesonSolution {
            coeffs: a.iter().cloned().collect(),
            energy,
            lambda,
            c_expect,
            k_int,
            c,
            nz,
            residual,
            accepted,
            fidelity: None,
        });
    }
    out.sort_by(|p, q| (p.energy + p.nz).total_cmp(&(q.energy + q.nz)));
    Ok(out)
}

/// Ritz values of `H a = lambda S a` without the symmetry and annihilation
/// terms; they bound the exact sector eigenvalues from above.
pub fn ritz_values(mats: &QseMatrices, s_cut: f64) -> Vec<f64> {
    let x = whitening(&mats.s, s_cut);
    let k = x.adjoint() * &mats.h * &x;
    eigh(&k).0
}

/// `O |ground> = sum_I a_I M_I |ground>`.
pub fn solution_state(images: &[Vec<Complex64>], sol: &MesonSolution) -> Vec<Complex64> {
    let mut out = vec![ZERO; images[0].len()];
    for (a, v) in sol.coeffs.iter().zip(images) {
        axpy(*a, v, &mut out);
    }
    out
}

/// Sorted, deduplicated momenta of accepted solutions with sign `c`.
pub fn momentum_set(sols: &[MesonSolution], c: i32) -> Vec<i64> {
    let mut ks: Vec<i64> = sols
        .iter()
        .filter(|s| s.accepted && s.c == c)
        .map(|s| s.k_int)
        .collect();
    ks.sort_unstable();
    ks.dedup();
    ks
}

/// Lowest-ranked accepted solution with the given labels.
pub fn select<'a>(sols: &'a [MesonSolution], k_int: i64, c: i32) -> Result<&'a MesonSolution> {
    sols.iter()
        .find(|s| s.accepted && s.k_int == k_int && s.c == c)
        .ok_or(Error::MissingMomentum { k_int, c })
}

/// The lowest accepted solution for every momentum on the branch `c`,
/// ordered by momentum.
pub fn lowest_band(sols: &[MesonSolution], c: i32) -> Vec<&MesonSolution> {
    momentum_set(sols, c)
        .into_iter()
        .filter_map(|k| select(sols, k, c).ok())
        .collect()
}

/// Comparison of one QSE solution with the exact spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumMatch {
    /// Index of the best-overlapping exact eigenstate.
    pub state: usize,
    pub fidelity: f64,
    pub qse_gap: f64,
    pub exact_gap: f64,
    pub rel_error: f64,
}

/// Finds, for `sol`, the exact eigenstate with the largest overlap and
/// records its fidelity and the relative error of the excitation energy.
/// Also stores the fidelity on the solution.
pub fn match_to_spectrum(
    images: &[Vec<Complex64>],
    sol: &mut MesonSolution,
    exact: &EigenSolution,
) -> SpectrumMatch {
    let psi = solution_state(images, sol);
    let (state, fid) = exact
        .vectors
        .iter()
        .enumerate()
        .map(|(i, v)| (i, fidelity(&psi, v)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty reference spectrum");
    sol.fidelity = Some(fid);
    let e0 = exact.energies[0];
    let qse_gap = sol.energy - e0;
    let exact_gap = exact.energies[state] - e0;
    SpectrumMatch {
        state,
        fidelity: fid,
        qse_gap,
        exact_gap,
        rel_error: (qse_gap - exact_gap).abs() / exact_gap.abs().max(1e-300),
    }
}

/// Coefficient grid as CSV rows `n,l,re,im`.
pub fn write_coefficients_csv<W: Write>(mut w: W, sites: usize, sol: &MesonSolution) -> io::Result<()> {
    writeln!(w, "n,l,re,im")?;
    for (idx, a) in sol.coeffs.iter().enumerate() {
        let (n, l) = pair_of(sites, idx);
        writeln!(w, "{},{},{:.17e},{:.17e}", n, l, a.re, a.im)?;
    }
    Ok(())
}

/// Scalar summary of a solution, used as the header next to its CSV.
pub fn solution_header(sol: &MesonSolution) -> serde_json::Value {
    serde_json::json!({
        "E": sol.energy,
        "k_int": sol.k_int,
        "c": sol.c,
        "NZ": sol.nz,
        "C_re": sol.c_expect.re,
        "C_im": sol.c_expect.im,
        "accepted": sol.accepted,
        "fidelity": sol.fidelity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_indices_roundtrip() {
        for idx in 0..36 {
            let (n, l) = pair_of(6, idx);
            assert_eq!(pair_index(6, n, l), idx);
        }
    }

    #[test]
    fn labels_follow_nearest_sign() {
        let l = 8;
        let k1 = 2.0 * PI / l as f64;
        // vector meson at k = 1
        let v = Complex64::from_polar(1.0, -k1) * -1.0;
        assert_eq!(label_momentum(v, l, Labeling::Nearest), (-1, 1));
        // scalar at k = -1
        let s = Complex64::from_polar(1.0, k1);
        assert_eq!(label_momentum(s, l, Labeling::Nearest), (1, -1));
        // purely imaginary value breaks the tie towards the vector branch
        let t = Complex64::new(0.0, 1.0);
        assert_eq!(label_momentum(t, l, Labeling::Nearest), (-1, 2));
        // vector branch reads a vector at k = L/2 correctly
        let far = Complex64::new(1.0, 0.0);
        assert_eq!(label_momentum(far, l, Labeling::VectorBranch), (-1, 4));
        assert_eq!(label_momentum(far, l, Labeling::Nearest), (1, 0));
    }

    #[test]
    fn whitening_inverts_the_retained_range() {
        let s = DMatrix::from_fn(3, 3, |i, j| {
            let u = [1.0, 2.0, 0.0];
            let v = [0.0, 1.0, 1.0];
            Complex64::new(u[i] * u[j] + v[i] * v[j], 0.0)
        });
        let x = whitening(&s, 1e-10);
        assert_eq!(x.ncols(), 2);
        let id = x.adjoint() * &s * &x;
        assert!((id - DMatrix::<Complex64>::identity(2, 2)).norm() < 1e-12);
    }
}
