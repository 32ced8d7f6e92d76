//! Fermion operators built directly from Pauli matrices in the
//! computational basis (matter `|1>` = occupied, links in the `Z` basis).

#![allow(dead_code)]

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use z2lgt::lattice::QubitLayout;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Single-qubit factor in the computational basis.
#[derive(Clone, Copy)]
pub enum S {
    /// `|1><0|`
    Raise,
    /// `|0><1|`
    Lower,
    X,
    Y,
    /// computational `Z`
    Z,
}

pub fn act(s: S, bit: bool) -> Option<(bool, Complex64)> {
    match (s, bit) {
        (S::Raise, false) => Some((true, ONE)),
        (S::Raise, true) => None,
        (S::Lower, true) => Some((false, ONE)),
        (S::Lower, false) => None,
        (S::X, b) => Some((!b, ONE)),
        (S::Y, false) => Some((true, I)),
        (S::Y, true) => Some((false, -I)),
        (S::Z, false) => Some((false, ONE)),
        (S::Z, true) => Some((true, -ONE)),
    }
}

/// `coeff * prod factors`, factors written left to right.
#[derive(Clone)]
pub struct Term(pub Complex64, pub Vec<(usize, S)>);

#[derive(Clone, Default)]
pub struct DenseOp(pub Vec<Term>);

impl DenseOp {
    pub fn term(c: Complex64, f: Vec<(usize, S)>) -> Self {
        DenseOp(vec![Term(c, f)])
    }

    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![ZERO; psi.len()];
        for Term(c, f) in &self.0 {
            for (i, x) in psi.iter().enumerate() {
                if x.norm_sqr() == 0.0 {
                    continue;
                }
                let mut j = i;
                let mut amp = *c * x;
                let mut alive = true;
                for &(q, s) in f.iter().rev() {
                    match act(s, j >> q & 1 == 1) {
                        Some((b, a)) => {
                            j = (j & !(1 << q)) | ((b as usize) << q);
                            amp *= a;
                        }
                        None => {
                            alive = false;
                            break;
                        }
                    }
                }
                if alive {
                    out[j] += amp;
                }
            }
        }
        out
    }

    pub fn dagger(&self) -> DenseOp {
        DenseOp(self
            .0
            .iter()
            .map(|Term(c, f)| {
                let g = f
                    .iter()
                    .rev()
                    .map(|&(q, s)| {
                        let d = match s {
                            S::Raise => S::Lower,
                            S::Lower => S::Raise,
                            o => o,
                        };
                        (q, d)
                    })
                    .collect();
                Term(c.conj(), g)
            })
            .collect())
    }

    pub fn scale(mut self, s: Complex64) -> DenseOp {
        self.0.iter_mut().for_each(|t| t.0 *= s);
        self
    }

    pub fn plus(mut self, o: DenseOp) -> DenseOp {
        self.0.extend(o.0);
        self
    }

    pub fn times(&self, o: &DenseOp) -> DenseOp {
        let mut out = Vec::new();
        for Term(a, f) in &self.0 {
            for Term(b, g) in &o.0 {
                let mut h = f.clone();
                h.extend(g.iter().copied());
                out.push(Term(a * b, h));
            }
        }
        DenseOp(out)
    }
}

/// Dressed matter creation `xi~_n^dag = prod_{l<n}(-i sigma^z_l) sigma^+_n prod_{r<n} Z_{g,r}`,
/// `sigma^z = -Z` on matter.
pub fn xi_dag(lay: &QubitLayout, n: usize) -> DenseOp {
    let mut f = Vec::new();
    for l in 1..n {
        f.push((lay.matter_qubit(l), S::Z));
    }
    f.push((lay.matter_qubit(n), S::Raise));
    for r in 1..n {
        f.push((lay.link_qubit(r), S::Z));
    }
    // (-i sigma^z) = (-i)(-Z) = i Z per string site
    DenseOp::term(I.powi((n - 1) as i32), f)
}

/// Ancilla creation on link `n`: `prod_{r<n}(-i Z_{g,r}) |0><1|_{g,n}`.
pub fn psi_dag(lay: &QubitLayout, n: usize) -> DenseOp {
    let mut f: Vec<(usize, S)> = (1..n).map(|r| (lay.link_qubit(r), S::Z)).collect();
    f.push((lay.link_qubit(n), S::Lower));
    DenseOp::term((-I).powi((n - 1) as i32), f)
}

pub fn x_tilde(lay: &QubitLayout, n: usize) -> DenseOp {
    let d = psi_dag(lay, n);
    d.dagger().plus(d).scale(Complex64::new(FRAC_1_SQRT_2, 0.0))
}

/// Physical `P_n`: identity, then `sigma^z = -Z` on matter site `n-1`.
pub fn p_string(lay: &QubitLayout, n: usize) -> DenseOp {
    if n == 1 {
        DenseOp::term(ONE, vec![])
    } else {
        DenseOp::term(-ONE, vec![(lay.matter_qubit(n - 1), S::Z)])
    }
}
