//! Canonical correlation analysis computed through pivoted QR factorisations
//! of the centred inputs, with rank reduction before any triangular solve.
//!
//! Given `W` (`n x d`) and `V` (`n x k`), both are centred and factorised as
//! `W P = Q R`. Only the leading diagonal entries with
//! `|r_ii| > eps * |r_11|` are kept, which makes the retained triangle
//! invertible. The canonical correlations are the singular values of
//! `Q_w^T Q_v`, and the coefficients follow by back substitution.

pub mod oracle;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{back_substitute, svd_jacobi, Matrix, PivotedQr};
use crate::scalar::Scalar;

pub const DEFAULT_EPSILON: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CcaConfig<T> {
    /// Relative rank tolerance on the pivoted-QR diagonal.
    pub epsilon: T,
}

impl<T: Scalar> Default for CcaConfig<T> {
    fn default() -> Self {
        Self {
            epsilon: T::lit(DEFAULT_EPSILON),
        }
    }
}

impl<T: Scalar> CcaConfig<T> {
    pub fn with_epsilon(epsilon: T) -> Result<Self> {
        if !(epsilon >= T::zero() && epsilon < T::one()) {
            return Err(Error::Config(format!(
                "rank tolerance must lie in [0, 1), got {epsilon}"
            )));
        }
        Ok(Self { epsilon })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcaResult<T> {
    /// `d x nu` coefficients for the first input.
    pub a: Matrix<T>,
    /// `k x nu` coefficients for the second input.
    pub b: Matrix<T>,
    /// Canonical correlations, non-increasing, in `[0, 1]`.
    pub rho: Vec<T>,
    pub rank_w: usize,
    pub rank_v: usize,
}

impl<T: Scalar> CcaResult<T> {
    /// Number of coefficient pairs, `min(rank_w, rank_v)`.
    pub fn n_components(&self) -> usize {
        self.rho.len()
    }

    fn empty(d: usize, k: usize, rank_w: usize, rank_v: usize) -> Self {
        Self {
            a: Matrix::zeros(d, 0),
            b: Matrix::zeros(k, 0),
            rho: Vec::new(),
            rank_w,
            rank_v,
        }
    }
}

/// Numerically stable CCA between the rows of `w` and `v`.
///
/// Rank-deficient or constant inputs are legal: columns pivoted away by the
/// rank reduction get zero coefficient rows, and a fully constant input gives
/// a result with no components.
pub fn cca_stable<T: Scalar>(
    w: &Matrix<T>,
    v: &Matrix<T>,
    cfg: &CcaConfig<T>,
) -> Result<CcaResult<T>> {
    let n = w.rows();
    if v.rows() != n {
        return Err(Error::Shape(format!(
            "CCA inputs have {} and {} rows",
            n,
            v.rows()
        )));
    }
    if n < 2 {
        return Err(Error::TooFewRows { needed: 2, got: n });
    }
    if w.cols() == 0 || v.cols() == 0 {
        return Err(Error::Shape("CCA inputs need at least one column".into()));
    }
    if !w.is_finite() || !v.is_finite() {
        return Err(Error::NonFinite("CCA input"));
    }

    let qr_w = PivotedQr::new(&w.centered());
    let qr_v = PivotedQr::new(&v.centered());
    let rank_w = qr_w.rank(cfg.epsilon);
    let rank_v = qr_v.rank(cfg.epsilon);
    if rank_w == 0 || rank_v == 0 {
        return Ok(CcaResult::empty(w.cols(), v.cols(), rank_w, rank_v));
    }

    let q_w = qr_w.thin_q(rank_w);
    let q_v = qr_v.thin_q(rank_v);
    let nu = rank_w.min(rank_v);

    // Decompose whichever orientation of Q_w^T Q_v is tall.
    let (mut u, mut z, s) = if rank_w >= rank_v {
        let svd = svd_jacobi(&q_w.transpose().matmul(&q_v)?)?;
        (svd.u, svd.v, svd.s)
    } else {
        let svd = svd_jacobi(&q_v.transpose().matmul(&q_w)?)?;
        (svd.v, svd.u, svd.s)
    };
    u = u.select_cols(&(0..nu).collect::<Vec<_>>());
    z = z.select_cols(&(0..nu).collect::<Vec<_>>());
    normalise_signs(&mut u, &mut z);

    let a_red = back_substitute(&qr_w.r_block(rank_w), &u)?;
    let b_red = back_substitute(&qr_v.r_block(rank_v), &z)?;

    let a = scatter_rows(&a_red, qr_w.permutation(), w.cols());
    let b = scatter_rows(&b_red, qr_v.permutation(), v.cols());
    let rho = s
        .into_iter()
        .take(nu)
        .map(|r| r.max(T::zero()).min(T::one()))
        .collect();

    Ok(CcaResult {
        a,
        b,
        rho,
        rank_w,
        rank_v,
    })
}

/// Flips each `(u, z)` column pair so the largest-magnitude entry of the `u`
/// column is positive (first such entry on ties).
fn normalise_signs<T: Scalar>(u: &mut Matrix<T>, z: &mut Matrix<T>) {
    for c in 0..u.cols() {
        let mut lead = T::zero();
        let mut best = T::zero();
        for i in 0..u.rows() {
            let x = u[(i, c)];
            if x.abs() > best {
                best = x.abs();
                lead = x;
            }
        }
        if lead < T::zero() {
            for i in 0..u.rows() {
                u[(i, c)] = -u[(i, c)];
            }
            for i in 0..z.rows() {
                z[(i, c)] = -z[(i, c)];
            }
        }
    }
}

/// Places row `i` of `reduced` at row `perm[i]`; rows beyond the retained rank
/// stay zero.
fn scatter_rows<T: Scalar>(reduced: &Matrix<T>, perm: &[usize], full_rows: usize) -> Matrix<T> {
    let mut out = Matrix::zeros(full_rows, reduced.cols());
    for i in 0..reduced.rows() {
        out.row_mut(perm[i]).copy_from_slice(reduced.row(i));
    }
    out
}
