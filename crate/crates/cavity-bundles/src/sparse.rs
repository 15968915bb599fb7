//! Compressed-sparse-row complex matrices sized for operator algebra on
//! truncated Hilbert spaces: Kronecker products, products, linear
//! combinations, adjoints, mat-vec, and dense conversion for spectral work.
//!
//! Entries with magnitude at or below [`PRUNE_TOL`] are dropped on every
//! construction path, so no stored explicit zeros survive.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// Magnitude below which an entry is treated as an explicit zero and dropped.
pub const PRUNE_TOL: f64 = 1e-16;

#[derive(Clone, Debug)]
pub struct CsMat {
    nrows: usize,
    ncols: usize,
    /// Row start offsets, length `nrows + 1`.
    indptr: Vec<usize>,
    /// Column indices, sorted ascending within each row.
    indices: Vec<usize>,
    data: Vec<C64>,
}

impl CsMat {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsMat {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        CsMat {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: vec![C64::new(1.0, 0.0); n],
        }
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let n = diag.len();
        let mut m = CsMat {
            nrows: n,
            ncols: n,
            indptr: Vec::with_capacity(n + 1),
            indices: Vec::new(),
            data: Vec::new(),
        };
        m.indptr.push(0);
        for (i, &v) in diag.iter().enumerate() {
            if v.norm() > PRUNE_TOL {
                m.indices.push(i);
                m.data.push(v);
            }
            m.indptr.push(m.indices.len());
        }
        m
    }

    /// Build from (row, col, value) triplets; duplicate coordinates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, trips: &[(usize, usize, C64)]) -> Result<Self> {
        for &(r, c, _) in trips {
            if r >= nrows || c >= ncols {
                return Err(Error::Dimension(format!(
                    "triplet ({r},{c}) outside {nrows}x{ncols}"
                )));
            }
        }
        // Count per row, prefix-sum, bucket, then sort+merge each row.
        let mut counts = vec![0usize; nrows];
        for &(r, _, _) in trips {
            counts[r] += 1;
        }
        let mut starts = vec![0usize; nrows + 1];
        for i in 0..nrows {
            starts[i + 1] = starts[i] + counts[i];
        }
        let total = starts[nrows];
        let mut cols = vec![0usize; total];
        let mut vals = vec![C64::new(0.0, 0.0); total];
        let mut cursor = starts.clone();
        for &(r, c, v) in trips {
            let k = cursor[r];
            cols[k] = c;
            vals[k] = v;
            cursor[r] += 1;
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(total);
        let mut data = Vec::with_capacity(total);
        indptr.push(0);
        let mut row_buf: Vec<(usize, C64)> = Vec::new();
        for r in 0..nrows {
            row_buf.clear();
            for k in starts[r]..starts[r + 1] {
                row_buf.push((cols[k], vals[k]));
            }
            row_buf.sort_unstable_by_key(|&(c, _)| c);
            let mut i = 0;
            while i < row_buf.len() {
                let c = row_buf[i].0;
                let mut acc = row_buf[i].1;
                let mut j = i + 1;
                while j < row_buf.len() && row_buf[j].0 == c {
                    acc += row_buf[j].1;
                    j += 1;
                }
                if acc.norm() > PRUNE_TOL {
                    indices.push(c);
                    data.push(acc);
                }
                i = j;
            }
            indptr.push(indices.len());
        }
        Ok(CsMat {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[C64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.data[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    /// Iterate all stored entries as (row, col, value).
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals.iter()).map(move |(&c, &v)| (i, c, v))
        })
    }

    pub fn scale(&self, alpha: C64) -> Self {
        let mut out = self.clone();
        if alpha.norm() <= PRUNE_TOL {
            return CsMat::zeros(self.nrows, self.ncols);
        }
        for v in &mut out.data {
            *v *= alpha;
        }
        out
    }

    /// `self + beta * other`, entrywise, pruning tiny results.
    pub fn add_scaled(&self, beta: C64, other: &CsMat) -> Result<Self> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::Dimension(format!(
                "add: {}x{} vs {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        let mut indices = Vec::with_capacity(self.nnz() + other.nnz());
        let mut data = Vec::with_capacity(self.nnz() + other.nnz());
        indptr.push(0);
        for i in 0..self.nrows {
            let (ca, va) = self.row(i);
            let (cb, vb) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ca.len() || q < cb.len() {
                let (col, val) = if q >= cb.len() || (p < ca.len() && ca[p] < cb[q]) {
                    let e = (ca[p], va[p]);
                    p += 1;
                    e
                } else if p >= ca.len() || cb[q] < ca[p] {
                    let e = (cb[q], beta * vb[q]);
                    q += 1;
                    e
                } else {
                    let e = (ca[p], va[p] + beta * vb[q]);
                    p += 1;
                    q += 1;
                    e
                };
                if val.norm() > PRUNE_TOL {
                    indices.push(col);
                    data.push(val);
                }
            }
            indptr.push(indices.len());
        }
        Ok(CsMat {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            data,
        })
    }

    pub fn add(&self, other: &CsMat) -> Result<Self> {
        self.add_scaled(C64::new(1.0, 0.0), other)
    }

    pub fn sub(&self, other: &CsMat) -> Result<Self> {
        self.add_scaled(C64::new(-1.0, 0.0), other)
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols];
        for &c in &self.indices {
            counts[c] += 1;
        }
        let mut indptr = vec![0usize; self.ncols + 1];
        for i in 0..self.ncols {
            indptr[i + 1] = indptr[i] + counts[i];
        }
        let mut indices = vec![0usize; self.nnz()];
        let mut data = vec![C64::new(0.0, 0.0); self.nnz()];
        let mut cursor = indptr.clone();
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let k = cursor[c];
                indices[k] = r;
                data[k] = v;
                cursor[c] += 1;
            }
        }
        CsMat {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr,
            indices,
            data,
        }
    }

    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        for v in &mut out.data {
            *v = v.conj();
        }
        out
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        self.transpose().conj()
    }

    /// Matrix product `self * other` via row-wise dense accumulation.
    pub fn matmul(&self, other: &CsMat) -> Result<Self> {
        if self.ncols != other.nrows {
            return Err(Error::Dimension(format!(
                "matmul: {}x{} * {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let n = other.ncols;
        let mut acc = vec![C64::new(0.0, 0.0); n];
        let mut touched: Vec<usize> = Vec::new();
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for i in 0..self.nrows {
            touched.clear();
            let (ca, va) = self.row(i);
            for (&k, &aik) in ca.iter().zip(va) {
                let (cb, vb) = other.row(k);
                for (&j, &bkj) in cb.iter().zip(vb) {
                    if acc[j] == C64::new(0.0, 0.0) {
                        touched.push(j);
                    }
                    acc[j] += aik * bkj;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                let v = acc[j];
                acc[j] = C64::new(0.0, 0.0);
                if v.norm() > PRUNE_TOL {
                    indices.push(j);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Ok(CsMat {
            nrows: self.nrows,
            ncols: n,
            indptr,
            indices,
            data,
        })
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &CsMat) -> Self {
        let (m, n) = (self.nrows, self.ncols);
        let (p, q) = (other.nrows, other.ncols);
        let mut indptr = Vec::with_capacity(m * p + 1);
        let mut indices = Vec::with_capacity(self.nnz() * other.nnz());
        let mut data = Vec::with_capacity(self.nnz() * other.nnz());
        indptr.push(0);
        for i in 0..m {
            let (ca, va) = self.row(i);
            for k in 0..p {
                let (cb, vb) = other.row(k);
                for (&ja, &a) in ca.iter().zip(va) {
                    for (&jb, &b) in cb.iter().zip(vb) {
                        let v = a * b;
                        if v.norm() > PRUNE_TOL {
                            indices.push(ja * q + jb);
                            data.push(v);
                        }
                    }
                }
                indptr.push(indices.len());
            }
        }
        CsMat {
            nrows: m * p,
            ncols: n * q,
            indptr,
            indices,
            data,
        }
    }

    /// `y = self * x`.
    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let mut s = C64::new(0.0, 0.0);
            for (&c, &v) in cols.iter().zip(vals) {
                s += v * x[c];
            }
            y[i] = s;
        }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::from_element(self.nrows, self.ncols, C64::new(0.0, 0.0));
        for (i, j, v) in self.iter() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn trace(&self) -> C64 {
        let n = self.nrows.min(self.ncols);
        (0..n).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise magnitude of `self − self†` — zero for a hermitian matrix.
    pub fn hermiticity_defect(&self) -> f64 {
        match self.sub(&self.dagger()) {
            Ok(d) => d.max_abs(),
            Err(_) => f64::INFINITY,
        }
    }

    /// Largest entrywise magnitude of `self − other`.
    pub fn max_abs_diff(&self, other: &CsMat) -> Result<f64> {
        Ok(self.sub(other)?.max_abs())
    }
}
