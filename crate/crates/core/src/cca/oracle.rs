//! Closed-form CCA through the covariance eigenproblem.
//!
//! This is the textbook route that inverts the covariance matrices directly.
//! It exists to cross-check [`super::cca_stable`] on well-conditioned inputs
//! and is never used for training. Its eigen solver (cyclic Jacobi on a
//! symmetric matrix) shares no code with the QR/SVD path.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Covariance matrices above this condition estimate are rejected.
pub const MAX_CONDITION: f64 = 1e12;

struct Covariances<T> {
    ww: Matrix<T>,
    vv: Matrix<T>,
    wv: Matrix<T>,
}

fn covariances<T: Scalar>(w: &Matrix<T>, v: &Matrix<T>) -> Result<Covariances<T>> {
    let n = w.rows();
    if v.rows() != n {
        return Err(Error::Shape("oracle inputs differ in row count".into()));
    }
    if n < 2 {
        return Err(Error::TooFewRows { needed: 2, got: n });
    }
    let (wc, vc) = (w.centered(), v.centered());
    let scale = T::one() / T::from_usize_lossy(n - 1);
    let ww = wc.transpose().matmul(&wc)?.map(|x| x * scale);
    let vv = vc.transpose().matmul(&vc)?.map(|x| x * scale);
    let wv = wc.transpose().matmul(&vc)?.map(|x| x * scale);
    check_condition(&ww)?;
    check_condition(&vv)?;
    Ok(Covariances { ww, vv, wv })
}

fn check_condition<T: Scalar>(cov: &Matrix<T>) -> Result<()> {
    let eig = symmetric_eigenvalues(cov);
    let max = eig.iter().copied().fold(T::zero(), T::max);
    let min = eig.iter().copied().fold(T::infinity(), T::min);
    if min <= T::zero() {
        return Err(Error::IllConditioned(f64::INFINITY));
    }
    let cond = (max / min).to_f64_lossless();
    if cond > MAX_CONDITION {
        return Err(Error::IllConditioned(cond));
    }
    Ok(())
}

/// `Sigma_WW^-1 Sigma_WV Sigma_VV^-1 Sigma_VW`, the `d x d` operator whose
/// eigenvalues are the squared canonical correlations.
fn operator<T: Scalar>(c: &Covariances<T>) -> Result<Matrix<T>> {
    let vw = c.wv.transpose();
    let inner = c.wv.matmul(&invert(&c.vv)?)?.matmul(&vw)?;
    invert(&c.ww)?.matmul(&inner)
}

/// Canonical correlations in descending order, `min(d, k)` of them.
pub fn cca_oracle<T: Scalar>(w: &Matrix<T>, v: &Matrix<T>) -> Result<Vec<T>> {
    let c = covariances(w, v)?;
    // Symmetrise through the Cholesky factor: L^-1 S_wv S_vv^-1 S_vw L^-T has
    // the same eigenvalues as the operator above.
    let l = cholesky(&c.ww)?;
    let l_inv = invert(&l)?;
    let inner = c.wv.matmul(&invert(&c.vv)?)?.matmul(&c.wv.transpose())?;
    let sym = l_inv.matmul(&inner)?.matmul(&l_inv.transpose())?;
    let mut eig = symmetric_eigenvalues(&sym);
    eig.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let count = w.cols().min(v.cols());
    Ok(eig
        .into_iter()
        .take(count)
        .map(|e| e.max(T::zero()).sqrt())
        .collect())
}

/// Relative residual `|M a - rho^2 a| / |a|` of a coefficient vector against
/// the covariance eigenproblem.
pub fn eigen_residual<T: Scalar>(w: &Matrix<T>, v: &Matrix<T>, a: &[T], rho: T) -> Result<T> {
    let c = covariances(w, v)?;
    let op = operator(&c)?;
    if a.len() != op.rows() {
        return Err(Error::Shape("coefficient length".into()));
    }
    let norm = a.iter().map(|&x| x * x).sum::<T>().sqrt();
    let mut res = T::zero();
    for i in 0..op.rows() {
        let mut s = T::zero();
        for j in 0..op.cols() {
            s = s + op[(i, j)] * a[j];
        }
        let r = s - rho * rho * a[i];
        res = res + r * r;
    }
    Ok(res.sqrt() / norm)
}

fn cholesky<T: Scalar>(a: &Matrix<T>) -> Result<Matrix<T>> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d = d - l[(j, k)] * l[(j, k)];
        }
        if d <= T::zero() {
            return Err(Error::IllConditioned(f64::INFINITY));
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Gauss-Jordan inverse with partial pivoting.
fn invert<T: Scalar>(a: &Matrix<T>) -> Result<Matrix<T>> {
    let n = a.rows();
    let mut m = a.clone();
    let mut inv = Matrix::identity(n);
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| {
                m[(i, c)]
                    .abs()
                    .partial_cmp(&m[(j, c)].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("non-empty pivot range");
        if m[(p, c)] == T::zero() {
            return Err(Error::IllConditioned(f64::INFINITY));
        }
        for j in 0..n {
            let (x, y) = (m[(c, j)], m[(p, j)]);
            m[(c, j)] = y;
            m[(p, j)] = x;
            let (x, y) = (inv[(c, j)], inv[(p, j)]);
            inv[(c, j)] = y;
            inv[(p, j)] = x;
        }
        let piv = m[(c, c)];
        for j in 0..n {
            m[(c, j)] = m[(c, j)] / piv;
            inv[(c, j)] = inv[(c, j)] / piv;
        }
        for i in 0..n {
            if i == c {
                continue;
            }
            let f = m[(i, c)];
            if f == T::zero() {
                continue;
            }
            for j in 0..n {
                m[(i, j)] = m[(i, j)] - f * m[(c, j)];
                inv[(i, j)] = inv[(i, j)] - f * inv[(c, j)];
            }
        }
    }
    Ok(inv)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
fn symmetric_eigenvalues<T: Scalar>(a: &Matrix<T>) -> Vec<T> {
    let n = a.rows();
    let mut m = a.clone();
    for _ in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        let diag: T = (0..n).map(|i| m[(i, i)] * m[(i, i)]).sum();
        if off <= T::epsilon() * T::epsilon() * diag || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    (0..n).map(|i| m[(i, i)]).collect()
}
