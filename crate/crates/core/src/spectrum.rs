//! Lowest eigenpairs of sector Hamiltonians.
//!
//! The iterative solver is a restarted Lanczos with full
//! reorthogonalisation. Eigenpairs are found one at a time; every
//! converged vector is projected out of later Krylov spaces, and a final
//! Rayleigh-Ritz pass over the converged set cleans up the residuals.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, eigh, norm, normalize, random_state, ZERO};
use crate::sparse::SparseOperator;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Residual tolerance on `||H v - E v||`.
    pub tol: f64,
    /// Krylov space size per restart.
    pub krylov_dim: usize,
    pub max_restarts: usize,
    /// Seed for the random start vectors.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-10,
            krylov_dim: 120,
            max_restarts: 400,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSolution {
    /// Ascending.
    pub energies: Vec<f64>,
    pub vectors: Vec<Vec<Complex64>>,
    pub residuals: Vec<f64>,
}

impl EigenSolution {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn ground_energy(&self) -> f64 {
        self.energies[0]
    }

    pub fn ground_vector(&self) -> &[Complex64] {
        &self.vectors[0]
    }

    /// Largest `|<v_i|v_j> - delta_ij|`.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.len() {
            for j in 0..=i {
                let d = dot(&self.vectors[i], &self.vectors[j]);
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((d - target).norm());
            }
        }
        worst
    }

    /// Index groups of states whose energies agree within `tol`.
    pub fn multiplets(&self, tol: f64) -> Vec<Vec<usize>> {
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for i in 0..self.len() {
            match groups.last_mut() {
                Some(g) if (self.energies[i] - self.energies[*g.last().unwrap()]).abs() < tol => {
                    g.push(i)
                }
                _ => groups.push(vec![i]),
            }
        }
        groups
    }
}

fn residual(h: &SparseOperator, v: &[Complex64], e: f64) -> f64 {
    let mut hv = h.apply(v);
    axpy(Complex64::new(-e, 0.0), v, &mut hv);
    norm(&hv)
}

fn project_out(v: &mut [Complex64], against: &[Vec<Complex64>]) {
    for u in against {
        let c = dot(u, v);
        axpy(-c, u, v);
    }
}

/// Lowest eigenpair of `(1-P) H (1-P)` restricted to the complement of
/// `deflate`.
fn lanczos_lowest(
    h: &SparseOperator,
    deflate: &[Vec<Complex64>],
    start: Vec<Complex64>,
    cfg: &SolverConfig,
) -> Result<(f64, Vec<Complex64>)> {
    let dim = h.dim();
    let room = dim - deflate.len();
    let m = cfg.krylov_dim.min(room).max(1);
    let scale = h.max_abs().max(1e-300);
    let mut x = start;
    project_out(&mut x, deflate);
    project_out(&mut x, deflate);
    normalize(&mut x, "Lanczos start vector")?;
    let mut best_res = f64::INFINITY;
    for _ in 0..cfg.max_restarts {
        let mut q: Vec<Vec<Complex64>> = vec![x.clone()];
        let mut alpha: Vec<f64> = Vec::with_capacity(m);
        let mut beta: Vec<f64> = Vec::with_capacity(m);
        for j in 0..m {
            let mut w = h.apply(&q[j]);
            project_out(&mut w, deflate);
            let a = dot(&q[j], &w).re;
            alpha.push(a);
            // two passes of Gram-Schmidt against everything seen so far
            for _ in 0..2 {
                project_out(&mut w, &q);
                project_out(&mut w, deflate);
            }
            if j + 1 == m {
                break;
            }
            let b = norm(&w);
            if b < 1e-13 * scale {
                break;
            }
            w.iter_mut().for_each(|z| *z /= b);
            beta.push(b);
            q.push(w);
        }
        let k = alpha.len();
        let mut t = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alpha[i];
            if i + 1 < k {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let se = t.symmetric_eigen();
        let (imin, _) = se
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty tridiagonal");
        let y = se.eigenvectors.column(imin);
        let mut ritz = vec![ZERO; dim];
        for (i, qi) in q.iter().take(k).enumerate() {
            axpy(Complex64::new(y[i], 0.0), qi, &mut ritz);
        }
        project_out(&mut ritz, deflate);
        normalize(&mut ritz, "Ritz vector")?;
        let mut hv = h.apply(&ritz);
        project_out(&mut hv, deflate);
        let theta = dot(&ritz, &hv).re;
        axpy(Complex64::new(-theta, 0.0), &ritz, &mut hv);
        let res = norm(&hv);
        best_res = best_res.min(res);
        x = ritz;
        if res < 0.5 * cfg.tol {
            return Ok((theta, x));
        }
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_restarts,
        residual: best_res,
    })
}

/// The `k` lowest eigenpairs, ascending and orthonormal.
pub fn lowest_k(h: &SparseOperator, k: usize, cfg: &SolverConfig) -> Result<EigenSolution> {
    let dim = h.dim();
    if k == 0 || k > dim {
        return Err(Error::InvalidParameter {
            field: "k",
            reason: format!("need 1 <= k <= {dim}, got {k}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut found: Vec<Vec<Complex64>> = Vec::with_capacity(k);
    // one extra pair when available protects the last multiplet from being
    // cut in half by the final Rayleigh-Ritz rotation
    let target = (k + 1).min(dim);
    while found.len() < target {
        let start = random_state(dim, &mut rng);
        let (_, v) = lanczos_lowest(h, &found, start, cfg)?;
        found.push(v);
    }
    let sol = rayleigh_ritz(h, &found)?;
    let sol = EigenSolution {
        energies: sol.energies[..k].to_vec(),
        vectors: sol.vectors[..k].to_vec(),
        residuals: sol.residuals[..k].to_vec(),
    };
    if let Some(&worst) = sol.residuals.iter().max_by(|a, b| a.total_cmp(b)) {
        if worst > cfg.tol {
            return Err(Error::NoConvergence {
                iterations: cfg.max_restarts,
                residual: worst,
            });
        }
    }
    Ok(sol)
}

pub fn ground_state(h: &SparseOperator, cfg: &SolverConfig) -> Result<EigenSolution> {
    lowest_k(h, 1, cfg)
}

/// Diagonalises `h` inside the span of `vectors` (assumed orthonormal up
/// to round-off; they are re-orthonormalised first).
fn rayleigh_ritz(h: &SparseOperator, vectors: &[Vec<Complex64>]) -> Result<EigenSolution> {
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut w = v.clone();
        project_out(&mut w, &basis);
        project_out(&mut w, &basis);
        normalize(&mut w, "Rayleigh-Ritz basis")?;
        basis.push(w);
    }
    let n = basis.len();
    let hb: Vec<Vec<Complex64>> = basis.iter().map(|b| h.apply(b)).collect();
    let small = DMatrix::from_fn(n, n, |i, j| dot(&basis[i], &hb[j]));
    let (vals, vecs) = eigh(&small);
    let mut out_vecs = Vec::with_capacity(n);
    let mut res = Vec::with_capacity(n);
    for (j, &e) in vals.iter().enumerate() {
        let mut v = vec![ZERO; h.dim()];
        for i in 0..n {
            axpy(vecs[(i, j)], &basis[i], &mut v);
        }
        normalize(&mut v, "Ritz vector")?;
        res.push(residual(h, &v, e));
        out_vecs.push(v);
    }
    Ok(EigenSolution {
        energies: vals,
        vectors: out_vecs,
        residuals: res,
    })
}

/// Dense reference solver for small sectors.
pub fn dense_spectrum(h: &SparseOperator) -> EigenSolution {
    let (vals, vecs) = eigh(&h.to_dense());
    let vectors: Vec<Vec<Complex64>> = (0..vals.len())
        .map(|j| vecs.column(j).iter().cloned().collect())
        .collect();
    let residuals = vals
        .iter()
        .zip(&vectors)
        .map(|(&e, v)| residual(h, v, e))
        .collect();
    EigenSolution {
        energies: vals,
        vectors,
        residuals,
    }
}

/// Rotates each degenerate multiplet (energies within `tol`) onto
/// eigenvectors of the symmetry `c`, and returns `<v|c|v>` for every state.
///
/// `c` must commute with the Hamiltonian, so its restriction to a
/// multiplet is unitary; its Schur vectors are then eigenvectors.
pub fn resolve_with_symmetry(
    sol: &mut EigenSolution,
    c: &SparseOperator,
    tol: f64,
) -> Vec<Complex64> {
    for group in sol.multiplets(tol) {
        if group.len() < 2 {
            continue;
        }
        let g = group.len();
        let cv: Vec<Vec<Complex64>> = group.iter().map(|&i| c.apply(&sol.vectors[i])).collect();
        let small = DMatrix::from_fn(g, g, |a, b| dot(&sol.vectors[group[a]], &cv[b]));
        let (q, _) = small.schur().unpack();
        let old: Vec<Vec<Complex64>> = group.iter().map(|&i| sol.vectors[i].clone()).collect();
        for (b, &i) in group.iter().enumerate() {
            let mut v = vec![ZERO; old[0].len()];
            for (a, o) in old.iter().enumerate() {
                axpy(q[(a, b)], o, &mut v);
            }
            sol.vectors[i] = v;
        }
    }
    sol.vectors.iter().map(|v| c.expectation(v)).collect()
}
