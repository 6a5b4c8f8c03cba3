//! Dense and banded linear algebra kernels.
//!
//! Everything here is plain `Vec<f64>`-backed and deterministic: no BLAS, no
//! threads, no hidden state. Dense matrices are column-major so that snapshot
//! columns are contiguous.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite (failed at pivot {0})")]
    NotPositiveDefinite(usize),
    #[error("matrix is singular (zero pivot at row {0})")]
    Singular(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Column-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Mat {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Build from a closure over (row, col).
    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(nrows, ncols);
        for j in 0..ncols {
            for i in 0..nrows {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Build from columns; all columns must share a length.
    pub fn from_columns(cols: &[Vec<f64>]) -> Self {
        assert!(!cols.is_empty(), "from_columns: no columns");
        let nrows = cols[0].len();
        let mut m = Mat::zeros(nrows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            assert_eq!(c.len(), nrows, "from_columns: ragged columns");
            m.set_column(j, c);
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn set_column(&mut self, j: usize, v: &[f64]) {
        self.column_mut(j).copy_from_slice(v);
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.ncols, self.nrows, |i, j| self[(j, i)])
    }

    /// y = self * x
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        for j in 0..self.ncols {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            let col = self.column(j);
            for i in 0..self.nrows {
                y[i] += col[i] * xj;
            }
        }
        y
    }

    /// y = selfᵀ * x
    pub fn tr_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        (0..self.ncols).map(|j| dot(self.column(j), x)).collect()
    }

    pub fn matmul(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.ncols, rhs.nrows, "matmul dimension mismatch");
        let mut out = Mat::zeros(self.nrows, rhs.ncols);
        for j in 0..rhs.ncols {
            let y = self.matvec(rhs.column(j));
            out.set_column(j, &y);
        }
        out
    }

    /// selfᵀ * rhs without forming the transpose.
    pub fn tr_matmul(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.nrows, rhs.nrows, "tr_matmul dimension mismatch");
        let mut out = Mat::zeros(self.ncols, rhs.ncols);
        for j in 0..rhs.ncols {
            let rj = rhs.column(j);
            for i in 0..self.ncols {
                out[(i, j)] = dot(self.column(i), rj);
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// max |A - Aᵀ| over all entries.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for j in 0..self.ncols {
            for i in 0..j {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[j * self.nrows + i]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[j * self.nrows + i]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Lower-triangular Cholesky factor, A = L Lᵀ.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Mat,
}

impl Cholesky {
    /// Factor a symmetric positive definite matrix. Only the lower triangle
    /// of `a` is read.
    pub fn new(a: &Mat) -> Result<Self, LinalgError> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "cholesky: matrix not square");
        let mut l = Mat::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(LinalgError::NotPositiveDefinite(j));
            }
            let dj = d.sqrt();
            l[(j, j)] = dj;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / dj;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn factor(&self) -> &Mat {
        &self.l
    }

    /// Solve L y = b in place.
    pub fn solve_lower(&self, b: &mut [f64]) {
        let n = self.l.nrows();
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[(i, k)] * b[k];
            }
            b[i] = s / self.l[(i, i)];
        }
    }

    /// Solve Lᵀ y = b in place.
    pub fn solve_lower_transpose(&self, b: &mut [f64]) {
        let n = self.l.nrows();
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * b[k];
            }
            b[i] = s / self.l[(i, i)];
        }
    }

    /// Solve A x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower(&mut x);
        self.solve_lower_transpose(&mut x);
        x
    }

    /// log det A = 2 Σ log L_ii
    pub fn log_det(&self) -> f64 {
        let n = self.l.nrows();
        (0..n).map(|i| self.l[(i, i)].ln()).sum::<f64>() * 2.0
    }
}

/// LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: Mat,
    perm: Vec<usize>,
}

impl Lu {
    pub fn new(a: &Mat) -> Result<Self, LinalgError> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "lu: matrix not square");
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs();
            for i in k + 1..n {
                let v = lu[(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(LinalgError::Singular(k));
            }
            if p != k {
                perm.swap(k, p);
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = t;
                }
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        let v = lu[(k, j)];
                        lu[(i, j)] -= f * v;
                    }
                }
            }
        }
        Ok(Lu { lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.nrows();
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.lu[(i, k)] * x[k];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.lu[(i, k)] * x[k];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }
}

/// Symmetric banded matrix, lower storage: band d holds the d-th
/// subdiagonal, so entry (i, i-d) lives at `bands[d][i-d]` for d ≤ bw.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBand {
    n: usize,
    bw: usize,
    bands: Vec<Vec<f64>>,
}

impl SymBand {
    pub fn zeros(n: usize, bw: usize) -> Self {
        let bw = bw.min(n.saturating_sub(1));
        let bands = (0..=bw).map(|d| vec![0.0; n - d]).collect();
        SymBand { n, bw, bands }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Entry (i, j); zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        if d > self.bw {
            0.0
        } else {
            self.bands[d][lo]
        }
    }

    /// Add `v` to entry (i, j) and, implicitly, (j, i).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        assert!(d <= self.bw, "entry ({i},{j}) outside bandwidth {}", self.bw);
        self.bands[d][lo] += v;
    }

    pub fn scale(&mut self, s: f64) {
        for band in &mut self.bands {
            for v in band {
                *v *= s;
            }
        }
    }

    /// self + s * other; bandwidths must agree in size n.
    pub fn add_scaled(&self, other: &SymBand, s: f64) -> SymBand {
        assert_eq!(self.n, other.n);
        let bw = self.bw.max(other.bw);
        let mut out = SymBand::zeros(self.n, bw);
        for d in 0..=bw {
            for i in 0..self.n - d {
                let a = if d <= self.bw { self.bands[d][i] } else { 0.0 };
                let b = if d <= other.bw { other.bands[d][i] } else { 0.0 };
                out.bands[d][i] = a + s * b;
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            y[i] += self.bands[0][i] * x[i];
        }
        for d in 1..=self.bw {
            let band = &self.bands[d];
            for lo in 0..self.n - d {
                let v = band[lo];
                if v != 0.0 {
                    y[lo + d] += v * x[lo];
                    y[lo] += v * x[lo + d];
                }
            }
        }
        y
    }

    /// xᵀ A y
    pub fn quad_form(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.matvec(y))
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut s = 0.0;
        for (d, band) in self.bands.iter().enumerate() {
            let w = if d == 0 { 1.0 } else { 2.0 };
            s += w * band.iter().map(|v| v * v).sum::<f64>();
        }
        s.sqrt()
    }

    pub fn to_dense(&self) -> Mat {
        Mat::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Banded Cholesky A = L Lᵀ with L in the same band layout.
    pub fn cholesky(&self) -> Result<BandCholesky, LinalgError> {
        let n = self.n;
        let bw = self.bw;
        let mut l = self.bands.clone();
        for j in 0..n {
            let mut d = l[0][j];
            let kmin = j.saturating_sub(bw);
            for k in kmin..j {
                let v = l[j - k][k];
                d -= v * v;
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(LinalgError::NotPositiveDefinite(j));
            }
            let dj = d.sqrt();
            l[0][j] = dj;
            let imax = (j + bw).min(n - 1);
            for i in j + 1..=imax {
                let mut s = if i - j <= bw { l[i - j][j] } else { 0.0 };
                let kmin = i.saturating_sub(bw).max(j.saturating_sub(bw));
                for k in kmin..j {
                    if i - k <= bw {
                        s -= l[i - k][k] * l[j - k][k];
                    }
                }
                l[i - j][j] = s / dj;
            }
        }
        Ok(BandCholesky { n, bw, l })
    }
}

/// Cholesky factor of a banded SPD matrix.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<Vec<f64>>,
}

impl BandCholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let kmin = i.saturating_sub(self.bw);
            let mut s = x[i];
            for k in kmin..i {
                s -= self.l[i - k][k] * x[k];
            }
            x[i] = s / self.l[0][i];
        }
        for i in (0..n).rev() {
            let kmax = (i + self.bw).min(n - 1);
            let mut s = x[i];
            for k in i + 1..=kmax {
                s -= self.l[k - i][i] * x[k];
            }
            x[i] = s / self.l[0][i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::SplitMix64;

    fn random_spd(n: usize, rng: &mut SplitMix64) -> Mat {
        let g = Mat::from_fn(n, n, |_, _| rng.next_f64() - 0.5);
        let mut a = g.tr_matmul(&g);
        for i in 0..n {
            a[(i, i)] += 0.5 * n as f64;
        }
        a
    }

    #[test]
    fn cholesky_reconstructs() {
        let mut rng = SplitMix64::new(7);
        for _ in 0..20 {
            let a = random_spd(8, &mut rng);
            let ch = Cholesky::new(&a).unwrap();
            let l = ch.factor();
            let back = l.matmul(&l.transpose());
            for j in 0..8 {
                for i in 0..8 {
                    assert!((back[(i, j)] - a[(i, j)]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = Mat::identity(3);
        a[(2, 2)] = -1.0;
        assert!(Cholesky::new(&a).is_err());
    }

    #[test]
    fn lu_solves() {
        let mut rng = SplitMix64::new(11);
        for _ in 0..20 {
            let a = Mat::from_fn(6, 6, |_, _| rng.next_f64() - 0.5);
            let x: Vec<f64> = (0..6).map(|_| rng.next_f64()).collect();
            let b = a.matvec(&x);
            let lu = Lu::new(&a).unwrap();
            let got = lu.solve(&b);
            for i in 0..6 {
                assert!((got[i] - x[i]).abs() < 1e-9, "{} vs {}", got[i], x[i]);
            }
        }
    }

    #[test]
    fn lu_rejects_singular() {
        let a = Mat::zeros(3, 3);
        assert!(Lu::new(&a).is_err());
    }

    #[test]
    fn banded_matches_dense() {
        let mut rng = SplitMix64::new(3);
        let n = 12;
        let bw = 3;
        let mut b = SymBand::zeros(n, bw);
        for d in 0..=bw {
            for i in 0..n - d {
                let v = if d == 0 {
                    4.0 + rng.next_f64()
                } else {
                    0.3 * (rng.next_f64() - 0.5)
                };
                b.add(i + d, i, v);
            }
        }
        let dense = b.to_dense();
        assert!(dense.asymmetry() == 0.0);
        let x: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
        let y1 = b.matvec(&x);
        let y2 = dense.matvec(&x);
        for i in 0..n {
            assert!((y1[i] - y2[i]).abs() < 1e-12);
        }
        // banded solve vs dense solve
        let bc = b.cholesky().unwrap();
        let dc = Cholesky::new(&dense).unwrap();
        let s1 = bc.solve(&x);
        let s2 = dc.solve(&x);
        for i in 0..n {
            assert!((s1[i] - s2[i]).abs() < 1e-10);
        }
        assert!((b.frobenius_norm() - dense.frobenius_norm()).abs() < 1e-12);
    }
}
