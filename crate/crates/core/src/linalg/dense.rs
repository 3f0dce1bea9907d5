//! Dense symmetric eigendecomposition (Householder tridiagonalization
//! followed by implicit-shift QL) and Cholesky solves.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::real::{real, Real};

pub struct SymmetricEigen<T> {
    /// Eigenvalues in ascending order.
    pub values: Vec<T>,
    /// Eigenvectors as columns, matching `values`.
    pub vectors: Array2<T>,
}

/// Full eigendecomposition of a symmetric matrix.
///
/// Only the lower triangle is read; asymmetry beyond roundoff is the
/// caller's bug, not detected here.
pub fn symmetric_eigen<T: Real>(a: &Array2<T>) -> Result<SymmetricEigen<T>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch {
            context: "symmetric_eigen expects a square matrix",
            left: a.nrows(),
            right: a.ncols(),
        });
    }
    if n == 0 {
        return Ok(SymmetricEigen {
            values: vec![],
            vectors: Array2::zeros((0, 0)),
        });
    }

    let mut z: Vec<Vec<T>> = (0..n).map(|i| (0..n).map(|j| a[[i, j]]).collect()).collect();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];

    tred2(&mut z, &mut d, &mut e);
    tql2(&mut z, &mut d, &mut e)?;

    // ascending eigenvalue order
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).expect("finite eigenvalues"));

    let values: Vec<T> = order.iter().map(|&i| d[i]).collect();
    let mut vectors = Array2::zeros((n, n));
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            vectors[[row, col]] = z[row][src];
        }
    }
    Ok(SymmetricEigen { values, vectors })
}

/// Householder reduction to tridiagonal form, accumulating the transform in `z`.
fn tred2<T: Real>(z: &mut [Vec<T>], d: &mut [T], e: &mut [T]) {
    let n = d.len();
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = T::zero();
        if l > 0 {
            let mut scale = T::zero();
            for k in 0..=l {
                scale += z[i][k].abs();
            }
            if scale == T::zero() {
                e[i] = z[i][l];
            } else {
                for k in 0..=l {
                    z[i][k] /= scale;
                    h += z[i][k] * z[i][k];
                }
                let mut f = z[i][l];
                let g = if f >= T::zero() { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                z[i][l] = f - g;
                f = T::zero();
                for j in 0..=l {
                    z[j][i] = z[i][j] / h;
                    let mut g = T::zero();
                    for k in 0..=j {
                        g += z[j][k] * z[i][k];
                    }
                    for k in (j + 1)..=l {
                        g += z[k][j] * z[i][k];
                    }
                    e[j] = g / h;
                    f += e[j] * z[i][j];
                }
                let hh = f / (h + h);
                for j in 0..=l {
                    let f = z[i][j];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        let delta = f * e[k] + g * z[i][k];
                        z[j][k] -= delta;
                    }
                }
            }
        } else {
            e[i] = z[i][l];
        }
        d[i] = h;
    }
    d[0] = T::zero();
    e[0] = T::zero();
    for i in 0..n {
        if d[i] != T::zero() {
            for j in 0..i {
                let mut g = T::zero();
                for k in 0..i {
                    g += z[i][k] * z[k][j];
                }
                for k in 0..i {
                    let delta = g * z[k][i];
                    z[k][j] -= delta;
                }
            }
        }
        d[i] = z[i][i];
        z[i][i] = T::one();
        for j in 0..i {
            z[j][i] = T::zero();
            z[i][j] = T::zero();
        }
    }
}

/// Implicit-shift QL on the tridiagonal (d, e), rotating `z` along.
fn tql2<T: Real>(z: &mut [Vec<T>], d: &mut [T], e: &mut [T]) -> Result<()> {
    let n = d.len();
    if n == 1 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();

    for l in 0..n {
        let mut iter = 0usize;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= T::epsilon() * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 64 {
                return Err(Error::ConvergenceFailure {
                    iterations: iter,
                    converged: l,
                    requested: n,
                    worst_residual: e[l].abs().to_f64().unwrap_or(f64::NAN),
                });
            }
            let mut g = (d[l + 1] - d[l]) / (real::<T>(2.0) * e[l]);
            let mut r = g.hypot(T::one());
            let sign_r = if g >= T::zero() { r } else { -r };
            g = d[m] - d[l] + e[l] / (g + sign_r);
            let mut s = T::one();
            let mut c = T::one();
            let mut p = T::zero();
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + real::<T>(2.0) * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for zk in z.iter_mut() {
                    f = zk[i + 1];
                    zk[i + 1] = s * zk[i] + c * f;
                    zk[i] = c * zk[i] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
    Ok(())
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
pub struct Cholesky<T> {
    l: Array2<T>,
}

impl<T: Real> Cholesky<T> {
    /// `None` when a pivot is not strictly positive.
    pub fn new(a: &Array2<T>) -> Option<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return None;
        }
        let mut l = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let mut sum = a[[i, j]];
                for k in 0..j {
                    sum -= l[[i, k]] * l[[j, k]];
                }
                if i == j {
                    if sum <= T::zero() {
                        return None;
                    }
                    l[[i, i]] = sum.sqrt();
                } else {
                    l[[i, j]] = sum / l[[j, j]];
                }
            }
        }
        Some(Self { l })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.l.nrows();
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                let delta = self.l[[i, k]] * y[k];
                y[i] -= delta;
            }
            y[i] /= self.l[[i, i]];
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let delta = self.l[[k, i]] * y[k];
                y[i] -= delta;
            }
            y[i] /= self.l[[i, i]];
        }
        y
    }
}
