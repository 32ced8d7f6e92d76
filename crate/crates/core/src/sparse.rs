//! Compressed-row sparse complex matrices over a lattice basis.
//!
//! Every operator in the crate (Hamiltonian pieces, symmetry generators,
//! meson bilinears) is carried by [`SparseOperator`]. The triplet text
//! format written by [`SparseOperator::write_triplets`] is
//!
//! ```text
//! # basis=<full|sector> dim=<n> nnz=<k>
//! row col re im
//! ...
//! ```
//!
//! with zero-based indices into the basis ordering and values printed with
//! 17 significant digits.

use std::io::{self, BufRead, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which basis a matrix or state is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisTag {
    Full,
    Sector,
}

impl BasisTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BasisTag::Full => "full",
            BasisTag::Sector => "sector",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    tag: BasisTag,
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl SparseOperator {
    /// Assembles a matrix from unsorted triplets; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(
        tag: BasisTag,
        dim: usize,
        mut triplets: Vec<(usize, usize, Complex64)>,
    ) -> Self {
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut rows = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            debug_assert!(r < dim && c < dim);
            if let (Some(&lr), Some(&lc)) = (rows.last(), cols.last()) {
                if lr == r && lc == c {
                    *vals.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(r);
            cols.push(c);
            vals.push(v);
        }
        // drop cancellations
        let mut keep_rows = Vec::with_capacity(rows.len());
        let mut keep_cols = Vec::with_capacity(rows.len());
        let mut keep_vals = Vec::with_capacity(rows.len());
        for ((r, c), v) in rows.into_iter().zip(cols).zip(vals) {
            if v != Complex64::new(0.0, 0.0) {
                keep_rows.push(r);
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for &r in &keep_rows {
            row_ptr[r + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseOperator {
            tag,
            dim,
            row_ptr,
            cols: keep_cols,
            vals: keep_vals,
        }
    }

    pub fn identity(tag: BasisTag, dim: usize) -> Self {
        let trip = (0..dim).map(|i| (i, i, Complex64::new(1.0, 0.0))).collect();
        Self::from_triplets(tag, dim, trip)
    }

    pub fn zeros(tag: BasisTag, dim: usize) -> Self {
        Self::from_triplets(tag, dim, Vec::new())
    }

    pub fn tag(&self) -> BasisTag {
        self.tag
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Iterates over stored `(row, col, value)` entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.vals[k]))
        })
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.cols[range.clone()].binary_search(&col) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.dim];
        self.apply_into(x, &mut y);
        y
    }

    pub fn apply_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.dim, "operator/vector dimension mismatch");
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *out = acc;
        }
    }

    /// `<x|A|x>` without normalisation.
    pub fn expectation(&self, x: &[Complex64]) -> Complex64 {
        let ax = self.apply(x);
        crate::linalg::dot(x, &ax)
    }

    pub fn adjoint(&self) -> Self {
        let trip = self.triplets().map(|(r, c, v)| (c, r, v.conj())).collect();
        Self::from_triplets(self.tag, self.dim, trip)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let trip = self.triplets().chain(other.triplets()).collect();
        Ok(Self::from_triplets(self.tag, self.dim, trip))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Matrix product `self * other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut trip = Vec::new();
        for (r, k, a) in self.triplets() {
            for j in other.row_ptr[k]..other.row_ptr[k + 1] {
                trip.push((r, other.cols[j], a * other.vals[j]));
            }
        }
        Ok(Self::from_triplets(self.tag, self.dim, trip))
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.max_abs())
    }

    pub fn commutator_max(&self, other: &Self) -> Result<f64> {
        let ab = self.matmul(other)?;
        let ba = other.matmul(self)?;
        ab.max_abs_diff(&ba)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.triplets().all(|(r, c, v)| (v - self.get(c, r).conj()).norm() <= tol)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim || self.tag != other.tag {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(())
    }

    pub fn write_triplets<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "# basis={} dim={} nnz={}",
            self.tag.as_str(),
            self.dim,
            self.nnz()
        )?;
        for (r, c, v) in self.triplets() {
            writeln!(w, "{} {} {:.17e} {:.17e}", r, c, v.re, v.im)?;
        }
        Ok(())
    }

    pub fn read_triplets<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty triplet file".into()))??;
        let mut tag = None;
        let mut dim = None;
        for tok in header.trim_start_matches('#').split_whitespace() {
            match tok.split_once('=') {
                Some(("basis", "full")) => tag = Some(BasisTag::Full),
                Some(("basis", "sector")) => tag = Some(BasisTag::Sector),
                Some(("dim", d)) => dim = d.parse().ok(),
                _ => {}
            }
        }
        let (tag, dim) = match (tag, dim) {
            (Some(t), Some(d)) => (t, d),
            _ => return Err(Error::Parse(format!("bad triplet header: {header}"))),
        };
        let mut trip = Vec::new();
        for line in lines {
            let line = line?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.is_empty() || f[0].starts_with('#') {
                continue;
            }
            if f.len() != 4 {
                return Err(Error::Parse(format!("bad triplet line: {line}")));
            }
            let p = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(e.to_string()));
            let r: usize = f[0].parse().map_err(|_| Error::Parse(line.clone()))?;
            let c: usize = f[1].parse().map_err(|_| Error::Parse(line.clone()))?;
            if r >= dim || c >= dim {
                return Err(Error::Parse(format!("index out of range: {line}")));
            }
            trip.push((r, c, Complex64::new(p(f[2])?, p(f[3])?)));
        }
        Ok(Self::from_triplets(tag, dim, trip))
    }
}

/// Writes a state vector in the same text layout (`index re im`).
pub fn write_state<W: Write>(mut w: W, tag: BasisTag, psi: &[Complex64]) -> io::Result<()> {
    writeln!(w, "# basis={} dim={}", tag.as_str(), psi.len())?;
    for (i, v) in psi.iter().enumerate() {
        writeln!(w, "{} {:.17e} {:.17e}", i, v.re, v.im)?;
    }
    Ok(())
}
