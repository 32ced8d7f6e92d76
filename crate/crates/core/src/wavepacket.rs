//! Gaussian meson wave packets built from QSE solutions.
//!
//! A packet is `B^dag = sum_k phi(k) sum_{nl} a^{(k,-1)}_{nl} M_{nl}` with
//! `phi(k) = e^{-i k xbar} exp(-(k - kbar)^2 / (4 sigma^2)) / N` and the
//! shortest-path mesons `M_{nl}` the QSE solutions are expressed in. Its
//! Hermitian part `A^dag = B^dag + B` has the coefficient matrix
//! `M = Mc + Mc^dag`, whose eigendecomposition feeds the circuit layer.
//!
//! The circuit realises `A^dag` with string-dressed bilinears
//! (links `min(n,l)..max(n,l)-1`). These equal the shortest-path mesons
//! except for pairs whose shortest path crosses link `L`, where the two
//! differ by the global link flip, so packets centred away from link `L`
//! are reproduced best.

use std::f64::consts::PI;
use std::io::{self, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{dressed_bilinear, meson_operator, Model, Monomial, OperatorSum};
use crate::linalg::{eigh, normalize, ZERO};
use crate::qse::{pair_index, select, MesonSolution};
use crate::sparse::SparseOperator;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavePacketSpec {
    /// Mean momentum in units of `2 pi / L`.
    pub kbar: i64,
    /// Mean position in sites.
    pub xbar: f64,
    pub sigma_k: f64,
    /// Momenta (units of `2 pi / L`) the packet is built from.
    pub lambda_star: Vec<i64>,
}

impl WavePacketSpec {
    pub fn new(kbar: i64, xbar: f64, sigma_k: f64, lambda_star: Vec<i64>) -> Result<Self> {
        if !(sigma_k > 0.0) {
            return Err(Error::InvalidParameter {
                field: "sigma_k",
                reason: format!("must be positive, got {sigma_k}"),
            });
        }
        if lambda_star.is_empty() {
            return Err(Error::InvalidParameter {
                field: "lambda_star",
                reason: "empty momentum set".into(),
            });
        }
        if !lambda_star.contains(&kbar) {
            return Err(Error::InvalidParameter {
                field: "kbar",
                reason: format!("no accepted solution at momentum index {kbar}; available {lambda_star:?}"),
            });
        }
        Ok(WavePacketSpec {
            kbar,
            xbar,
            sigma_k,
            lambda_star,
        })
    }
}

pub fn momentum(k_int: i64, sites: usize) -> f64 {
    2.0 * PI * k_int as f64 / sites as f64
}

/// `phi(k)` on `lambda_star`, normalised to unit 2-norm.
pub fn gaussian_profile(spec: &WavePacketSpec, sites: usize) -> Result<Vec<(i64, Complex64)>> {
    if spec.lambda_star.is_empty() {
        return Err(Error::InvalidParameter {
            field: "lambda_star",
            reason: "empty momentum set".into(),
        });
    }
    let kbar = momentum(spec.kbar, sites);
    let mut out: Vec<(i64, Complex64)> = spec
        .lambda_star
        .iter()
        .map(|&ki| {
            let k = momentum(ki, sites);
            let env = (-(k - kbar).powi(2) / (4.0 * spec.sigma_k.powi(2))).exp();
            (ki, Complex64::from_polar(env, -k * spec.xbar))
        })
        .collect();
    let n = out.iter().map(|(_, p)| p.norm_sqr()).sum::<f64>().sqrt();
    if n == 0.0 {
        return Err(Error::ZeroNorm("momentum profile"));
    }
    out.iter_mut().for_each(|(_, p)| *p /= n);
    Ok(out)
}

/// Probability profile `|sum_k phi(k) e^{ikn}|^2` over sites `1..=L`.
pub fn position_profile(spec: &WavePacketSpec, sites: usize) -> Result<Vec<f64>> {
    let phi = gaussian_profile(spec, sites)?;
    let mut p: Vec<f64> = (1..=sites)
        .map(|n| {
            phi.iter()
                .map(|(k, a)| a * Complex64::from_polar(1.0, momentum(*k, sites) * n as f64))
                .sum::<Complex64>()
                .norm_sqr()
        })
        .collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= s);
    Ok(p)
}

/// Circular standard deviation (in sites) of a distribution over the ring.
pub fn ring_width(p: &[f64]) -> f64 {
    let l = p.len() as f64;
    let z: Complex64 = p
        .iter()
        .enumerate()
        .map(|(i, w)| Complex64::from_polar(*w, 2.0 * PI * (i + 1) as f64 / l))
        .sum();
    let r = z.norm().clamp(1e-300, 1.0);
    (-2.0 * r.ln()).sqrt() * l / (2.0 * PI)
}

/// Phase that makes the forward-hop coefficients `a_{n+1,n}` (odd `n`),
/// demodulated by `e^{-ik(n+1/2)}`, sum to a positive real number. With it
/// every momentum component carries the plane-wave phase `e^{ikx}` and
/// packets centre on `xbar`.
pub fn canonical_phase(sol: &MesonSolution, sites: usize) -> Complex64 {
    let k = momentum(sol.k_int, sites);
    let s: Complex64 = (1..sites)
        .step_by(2)
        .map(|n| {
            sol.coeffs[pair_index(sites, n + 1, n)]
                * Complex64::from_polar(1.0, -k * (n as f64 + 0.5))
        })
        .sum();
    if s.norm() == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        s.conj() / s.norm()
    }
}

#[derive(Debug, Clone)]
pub struct PacketOperator {
    pub spec: WavePacketSpec,
    /// `Mc_{nl} = sum_k phi(k) a^{(k,-1)}_{nl}`: coefficients of `B^dag`.
    pub creation: DMatrix<Complex64>,
    /// Hermitian `M = Mc + Mc^dag`: coefficients of `A^dag`.
    pub mcoef: DMatrix<Complex64>,
    /// Ascending eigenvalues of `M`.
    pub eigvals: Vec<f64>,
    /// Unitary whose columns are the eigenvectors of `M`.
    pub eigvecs: DMatrix<Complex64>,
    /// `B^dag` on the sector.
    pub b_dag: SparseOperator,
    /// `A^dag = B^dag + B` on the sector.
    pub a_dag: SparseOperator,
}

impl PacketOperator {
    /// `max |u diag(lambda) u^dag - M|`.
    /// `A^dag` assembled with string-dressed bilinears, the form realised
    /// by the preparation circuit.
    pub fn a_dag_dressed(&self, model: &Model) -> Result<SparseOperator> {
        bilinear_sum(model, &self.mcoef, |n, l| Ok(dressed_bilinear(n, l)))
    }

    pub fn reconstruction_error(&self) -> f64 {
        let n = self.eigvals.len();
        let mut d = DMatrix::zeros(n, n);
        for (i, v) in self.eigvals.iter().enumerate() {
            d[(i, i)] = Complex64::new(*v, 0.0);
        }
        let r = &self.eigvecs * d * self.eigvecs.adjoint() - &self.mcoef;
        r.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }
}

fn bilinear_sum<F>(model: &Model, coef: &DMatrix<Complex64>, mono: F) -> Result<SparseOperator>
where
    F: Fn(usize, usize) -> Result<Monomial>,
{
    let l = model.params.sites;
    let mut op = OperatorSum::new();
    for n in 1..=l {
        for m in 1..=l {
            let c = coef[(n - 1, m - 1)];
            if c != ZERO {
                op.terms.push((c, mono(n, m)?));
            }
        }
    }
    op.build(&model.sector)
}

/// Assembles `B^dag`, its Hermitian part and the spectral data of `M` from
/// accepted vector-meson solutions covering `spec.lambda_star`.
pub fn build_packet_operator(
    model: &Model,
    spec: &WavePacketSpec,
    sols: &[MesonSolution],
) -> Result<PacketOperator> {
    let l = model.params.sites;
    let layout = model.layout();
    let phi = gaussian_profile(spec, l)?;
    let mut mc = DMatrix::<Complex64>::zeros(l, l);
    for (k, p) in phi {
        let sol = select(sols, k, -1)?;
        let ph = canonical_phase(sol, l);
        for n in 1..=l {
            for m in 1..=l {
                mc[(n - 1, m - 1)] += p * ph * sol.coeffs[pair_index(l, n, m)];
            }
        }
    }
    let mcoef = &mc + mc.adjoint();
    let (eigvals, eigvecs) = eigh(&mcoef);
    let b_dag = bilinear_sum(model, &mc, |n, m| meson_operator(&layout, n, m))?;
    let a_dag = b_dag.add(&b_dag.adjoint())?;
    Ok(PacketOperator {
        spec: spec.clone(),
        creation: mc,
        mcoef,
        eigvals,
        eigvecs,
        b_dag,
        a_dag,
    })
}

/// Normalised `B1^dag B2^dag |ground>`.
pub fn initial_state(
    p1: &PacketOperator,
    p2: &PacketOperator,
    ground: &[Complex64],
) -> Result<Vec<Complex64>> {
    let mut psi = p1.b_dag.apply(&p2.b_dag.apply(ground));
    normalize(&mut psi, "two-packet state")?;
    Ok(psi)
}

pub fn write_profile_csv<W: Write>(mut w: W, profile: &[(i64, Complex64)]) -> io::Result<()> {
    writeln!(w, "k_int,re,im")?;
    for (k, p) in profile {
        writeln!(w, "{},{:.17e},{:.17e}", k, p.re, p.im)?;
    }
    Ok(())
}

pub fn write_matrix_csv<W: Write>(mut w: W, m: &DMatrix<Complex64>) -> io::Result<()> {
    writeln!(w, "n,l,re,im")?;
    for n in 0..m.nrows() {
        for l in 0..m.ncols() {
            let v = m[(n, l)];
            writeln!(w, "{},{},{:.17e},{:.17e}", n + 1, l + 1, v.re, v.im)?;
        }
    }
    Ok(())
}
