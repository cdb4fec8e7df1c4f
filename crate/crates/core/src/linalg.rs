//! Small dense linear algebra: a row-major matrix, Householder QR with
//! column pivoting, one-sided Jacobi SVD and triangular solves.
//!
//! Sizes here are node-local (tens of columns at most), so the routines
//! favour accuracy and determinism over blocking.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from row slices. All rows must have the same length.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Shape(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_columns(cols: &[Vec<T>]) -> Result<Self> {
        let rows = cols.first().map_or(0, Vec::len);
        if cols.iter().any(|c| c.len() != rows) {
            return Err(Error::Shape("ragged columns".into()));
        }
        let mut m = Self::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            for (i, &v) in c.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[T]> {
        // chunks_exact(0) panics, so zero-width matrices yield empty rows by hand
        let cols = self.cols;
        (0..self.rows).map(move |i| &self.data[i * cols..(i + 1) * cols])
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let orow = other.row(k);
                let dst = out.row_mut(i);
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d = *d + a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    /// Gathers the given rows restricted to the given columns.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * cols.len());
        for &i in rows {
            let r = self.row(i);
            data.extend(cols.iter().map(|&j| r[j]));
        }
        Self {
            rows: rows.len(),
            cols: cols.len(),
            data,
        }
    }

    pub fn select_cols(&self, cols: &[usize]) -> Self {
        let all: Vec<usize> = (0..self.rows).collect();
        self.select(&all, cols)
    }

    /// Appends `other` below `self`.
    pub fn vstack(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::Shape(format!(
                "cannot stack {} columns onto {}",
                other.cols, self.cols
            )));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn column_means(&self) -> Vec<T> {
        let mut mu = vec![T::zero(); self.cols];
        for r in self.iter_rows() {
            for (m, &v) in mu.iter_mut().zip(r) {
                *m = *m + v;
            }
        }
        let n = T::from_usize_lossy(self.rows.max(1));
        mu.iter_mut().for_each(|m| *m = *m / n);
        mu
    }

    /// Returns the matrix with each column's mean subtracted.
    pub fn centered(&self) -> Self {
        let mu = self.column_means();
        let mut out = self.clone();
        for i in 0..out.rows {
            for (v, &m) in out.row_mut(i).iter_mut().zip(&mu) {
                *v = *v - m;
            }
        }
        out
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn norm_sq<T: Scalar>(a: &[T]) -> T {
    dot(a, a)
}

/// Householder QR with column pivoting, `A P = Q R`.
///
/// At every step the remaining column of largest norm is moved to the front;
/// equal norms go to the lowest original column index. The diagonal of `R` is
/// therefore non-increasing in magnitude.
#[derive(Debug, Clone)]
pub struct PivotedQr<T> {
    m: usize,
    /// Column-major working storage; upper triangle holds `R`.
    cols: Vec<Vec<T>>,
    /// Householder vectors (acting on rows `j..m`) and their scale factors.
    reflectors: Vec<(Vec<T>, T)>,
    perm: Vec<usize>,
}

impl<T: Scalar> PivotedQr<T> {
    pub fn new(a: &Matrix<T>) -> Self {
        let (m, n) = (a.rows(), a.cols());
        let mut cols: Vec<Vec<T>> = (0..n).map(|j| a.column(j)).collect();
        let mut perm: Vec<usize> = (0..n).collect();
        let steps = m.min(n);
        let mut reflectors = Vec::with_capacity(steps);

        for j in 0..steps {
            // Norms are recomputed rather than downdated so that exact ties
            // (e.g. duplicated columns) stay exact.
            let mut best = j;
            let mut best_norm = norm_sq(&cols[j][j..]);
            for k in j + 1..n {
                let nk = norm_sq(&cols[k][j..]);
                if nk > best_norm || (nk == best_norm && perm[k] < perm[best]) {
                    best = k;
                    best_norm = nk;
                }
            }
            cols.swap(j, best);
            perm.swap(j, best);

            let x = &cols[j][j..];
            let norm = best_norm.sqrt();
            if norm == T::zero() {
                reflectors.push((vec![T::zero(); m - j], T::zero()));
                continue;
            }
            let alpha = if x[0] > T::zero() { -norm } else { norm };
            let mut v = x.to_vec();
            v[0] = v[0] - alpha;
            let vnorm = norm_sq(&v);
            let beta = if vnorm == T::zero() {
                T::zero()
            } else {
                T::lit(2.0) / vnorm
            };
            cols[j][j] = alpha;
            for e in cols[j][j + 1..].iter_mut() {
                *e = T::zero();
            }
            if beta != T::zero() {
                for col in cols.iter_mut().skip(j + 1) {
                    let tail = &mut col[j..];
                    let f = beta * dot(&v, tail);
                    for (t, &vi) in tail.iter_mut().zip(&v) {
                        *t = *t - f * vi;
                    }
                }
            }
            reflectors.push((v, beta));
        }

        Self {
            m,
            cols,
            reflectors,
            perm,
        }
    }

    /// `perm[i]` is the original column placed at position `i`.
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn diag_len(&self) -> usize {
        self.reflectors.len()
    }

    /// `R[i][j]` for `i <= j`.
    pub fn r(&self, i: usize, j: usize) -> T {
        if i > j {
            T::zero()
        } else {
            self.cols[j][i]
        }
    }

    /// Number of leading diagonal entries with `|r_ii| > eps * |r_11|`.
    pub fn rank(&self, eps: T) -> usize {
        let steps = self.diag_len();
        if steps == 0 {
            return 0;
        }
        let r11 = self.r(0, 0).abs();
        if r11 == T::zero() {
            return 0;
        }
        let tol = eps * r11;
        (0..steps)
            .take_while(|&i| self.r(i, i).abs() > tol)
            .count()
    }

    /// Leading `k x k` block of `R`.
    pub fn r_block(&self, k: usize) -> Matrix<T> {
        let mut r = Matrix::zeros(k, k);
        for j in 0..k {
            for i in 0..=j {
                r[(i, j)] = self.cols[j][i];
            }
        }
        r
    }

    /// First `k` columns of `Q` (`m x k`, orthonormal).
    pub fn thin_q(&self, k: usize) -> Matrix<T> {
        let m = self.m;
        let mut q: Vec<Vec<T>> = (0..k)
            .map(|c| {
                let mut e = vec![T::zero(); m];
                e[c] = T::one();
                e
            })
            .collect();
        for (j, (v, beta)) in self.reflectors.iter().enumerate().rev() {
            if *beta == T::zero() {
                continue;
            }
            for col in q.iter_mut() {
                let tail = &mut col[j..];
                let f = *beta * dot(v, tail);
                if f == T::zero() {
                    continue;
                }
                for (t, &vi) in tail.iter_mut().zip(v) {
                    *t = *t - f * vi;
                }
            }
        }
        Matrix::from_columns(&q).expect("uniform columns")
    }
}

/// Solves `R X = B` for upper-triangular, non-singular `R`.
pub fn back_substitute<T: Scalar>(r: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    let n = r.rows();
    if r.cols() != n || b.rows() != n {
        return Err(Error::Shape(format!(
            "back substitution with R {}x{} and B {}x{}",
            r.rows(),
            r.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let mut x = Matrix::zeros(n, b.cols());
    for c in 0..b.cols() {
        for i in (0..n).rev() {
            let mut s = b[(i, c)];
            for k in i + 1..n {
                s = s - r[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / r[(i, i)];
        }
    }
    Ok(x)
}

/// Thin singular value decomposition `A = U diag(s) V^T` of a tall matrix.
#[derive(Debug, Clone)]
pub struct Svd<T> {
    /// `m x n`, orthonormal columns.
    pub u: Matrix<T>,
    /// Non-increasing, non-negative.
    pub s: Vec<T>,
    /// `n x n` orthogonal.
    pub v: Matrix<T>,
}

const MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi SVD for `m >= n`.
///
/// Columns of `U` belonging to (numerically) zero singular values are
/// completed to an orthonormal set. Each pair is sign-normalised so the
/// largest-magnitude entry of the `U` column is positive.
pub fn svd_jacobi<T: Scalar>(a: &Matrix<T>) -> Result<Svd<T>> {
    let (m, n) = (a.rows(), a.cols());
    if m < n {
        return Err(Error::Shape(format!(
            "svd_jacobi needs rows >= cols, got {m}x{n}"
        )));
    }
    let mut u: Vec<Vec<T>> = (0..n).map(|j| a.column(j)).collect();
    let mut v: Vec<Vec<T>> = (0..n)
        .map(|j| {
            let mut e = vec![T::zero(); n];
            e[j] = T::one();
            e
        })
        .collect();
    let tol = T::epsilon() * T::from_usize_lossy(m.max(1));

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = norm_sq(&u[p]);
                let beta = norm_sq(&u[q]);
                let gamma = dot(&u[p], &u[q]);
                if gamma == T::zero() || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut u, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let sig: Vec<T> = u.iter().map(|c| norm_sq(c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal singular values keep column order
    order.sort_by(|&i, &j| sig[j].partial_cmp(&sig[i]).unwrap_or(std::cmp::Ordering::Equal));
    let smax = order.first().map_or(T::zero(), |&i| sig[i]);
    let cutoff = smax * T::epsilon() * T::from_usize_lossy(n.max(1));

    let mut uc: Vec<Vec<T>> = Vec::with_capacity(n);
    let mut vc: Vec<Vec<T>> = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    let mut pending = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        s.push(sig[i]);
        vc.push(v[i].clone());
        if sig[i] > cutoff && sig[i] > T::zero() {
            uc.push(u[i].iter().map(|&x| x / sig[i]).collect());
        } else {
            uc.push(vec![T::zero(); m]);
            pending.push(pos);
        }
    }
    complete_orthonormal(&mut uc, &pending);

    for j in 0..n {
        let lead = uc[j]
            .iter()
            .copied()
            .fold((T::zero(), T::zero()), |(best, val), x| {
                if x.abs() > best {
                    (x.abs(), x)
                } else {
                    (best, val)
                }
            })
            .1;
        if lead < T::zero() {
            uc[j].iter_mut().for_each(|x| *x = -*x);
            vc[j].iter_mut().for_each(|x| *x = -*x);
        }
    }

    Ok(Svd {
        u: Matrix::from_columns(&uc)?,
        s,
        v: if n == 0 {
            Matrix::zeros(0, 0)
        } else {
            Matrix::from_columns(&vc)?
        },
    })
}

fn rotate<T: Scalar>(cols: &mut [Vec<T>], p: usize, q: usize, c: T, s: T) {
    let (lo, hi) = cols.split_at_mut(q);
    let (cp, cq) = (&mut lo[p], &mut hi[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Replaces the columns listed in `pending` with unit vectors orthogonal to
/// every other column.
fn complete_orthonormal<T: Scalar>(cols: &mut [Vec<T>], pending: &[usize]) {
    if pending.is_empty() {
        return;
    }
    let m = cols[0].len();
    let mut candidate = 0;
    for &slot in pending {
        while candidate < m {
            let mut e = vec![T::zero(); m];
            e[candidate] = T::one();
            candidate += 1;
            // two passes of Gram-Schmidt against the filled columns
            for _ in 0..2 {
                for (k, c) in cols.iter().enumerate() {
                    if k == slot || c.iter().all(|x| *x == T::zero()) {
                        continue;
                    }
                    let f = dot(&e, c);
                    for (ei, &ci) in e.iter_mut().zip(c) {
                        *ei = *ei - f * ci;
                    }
                }
            }
            let nrm = norm_sq(&e).sqrt();
            if nrm > T::lit(0.5) {
                cols[slot] = e.into_iter().map(|x| x / nrm).collect();
                break;
            }
        }
    }
}
