//! Small dense helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr_free::standard_normal;

use crate::error::{Error, Result};

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// `<a|b>` (antilinear in the first slot).
pub fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn normalize(a: &mut [Complex64], what: &'static str) -> Result<f64> {
    let n = norm(a);
    if n < 1e-300 {
        return Err(Error::ZeroNorm(what));
    }
    a.iter_mut().for_each(|x| *x /= n);
    Ok(n)
}

/// `y += s * x`
pub fn axpy(s: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

/// Squared overlap of two (not necessarily normalised) vectors.
pub fn fidelity(a: &[Complex64], b: &[Complex64]) -> f64 {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot(a, b).norm() / (na * nb)).powi(2)
}

pub fn diff_norm(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Hermitian eigendecomposition, eigenvalues ascending, eigenvectors as
/// columns.
pub fn eigh(m: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let n = m.nrows();
    // symmetrise against round-off before handing to the solver
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let se = herm.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let vals = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (j, &i) in order.iter().enumerate() {
        vecs.set_column(j, &se.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Eigenpairs of a general complex matrix via the complex Schur form
/// followed by back substitution on the triangular factor. Eigenvectors
/// are returned as unit-norm columns.
pub fn eig_general(m: &DMatrix<Complex64>) -> (Vec<Complex64>, DMatrix<Complex64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let (q, t) = m.clone().schur().unpack();
    let scale = t.iter().map(|x| x.norm()).fold(0.0, f64::max).max(1e-300);
    let floor = scale * 1e-14;
    let mut vecs = DMatrix::zeros(n, n);
    let mut vals = Vec::with_capacity(n);
    for i in 0..n {
        let lambda = t[(i, i)];
        vals.push(lambda);
        let mut x = DVector::<Complex64>::zeros(n);
        x[i] = ONE;
        for j in (0..i).rev() {
            let mut s = ZERO;
            for k in (j + 1)..=i {
                s += t[(j, k)] * x[k];
            }
            let mut d = t[(j, j)] - lambda;
            if d.norm() < floor {
                d = Complex64::new(floor, 0.0);
            }
            x[j] = -s / d;
        }
        let v = &q * x;
        let nv = v.norm();
        vecs.set_column(i, &(v / Complex64::new(nv, 0.0)));
    }
    (vals, vecs)
}

/// Dense `exp(-i H t)` for Hermitian `H`.
pub fn expm_hermitian(h: &DMatrix<Complex64>, t: f64) -> DMatrix<Complex64> {
    let (vals, vecs) = eigh(h);
    let n = vals.len();
    let mut d = DMatrix::zeros(n, n);
    for (i, e) in vals.iter().enumerate() {
        d[(i, i)] = Complex64::from_polar(1.0, -e * t);
    }
    &vecs * d * vecs.adjoint()
}

/// Dense `exp(A)` for a general (small) matrix by scaling and squaring with
/// a Taylor core. Used for anti-Hermitian generators in tests.
pub fn expm_general(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = a.nrows();
    let norm1 = (0..n)
        .map(|j| a.column(j).iter().map(|x| x.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0u32;
    let mut s = 1.0;
    while norm1 * s > 0.25 {
        s *= 0.5;
        squarings += 1;
    }
    let x = a * Complex64::new(s, 0.0);
    let mut term = DMatrix::<Complex64>::identity(n, n);
    let mut out = term.clone();
    for k in 1..=20 {
        term = &term * &x * Complex64::new(1.0 / k as f64, 0.0);
        out += &term;
    }
    for _ in 0..squarings {
        out = &out * &out;
    }
    out
}

pub fn unitarity_error(u: &DMatrix<Complex64>) -> f64 {
    let n = u.nrows();
    let d = u.adjoint() * u - DMatrix::<Complex64>::identity(n, n);
    d.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Haar-ish random unitary from the QR factorisation of a complex Gaussian
/// matrix with the diagonal phases of R divided out.
pub fn random_unitary<R: Rng>(n: usize, rng: &mut R) -> DMatrix<Complex64> {
    let g = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(standard_normal(rng), standard_normal(rng))
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        let col = q.column(j) * ph;
        q.set_column(j, &col);
    }
    q
}

pub fn random_state<R: Rng>(n: usize, rng: &mut R) -> Vec<Complex64> {
    let mut v: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(standard_normal(rng), standard_normal(rng)))
        .collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    v
}

mod rand_distr_free {
    use rand::Rng;

    /// Box-Muller normal sample.
    pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
        let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}
