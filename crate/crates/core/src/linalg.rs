//! Minimal dense linear algebra for the small (at most 10x10) matrices this
//! crate manipulates. Row-major storage, no panics on the happy path.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Mat<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(n: usize) -> Self {
        Mat {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(n: usize, rows: &[T]) -> Self {
        assert_eq!(rows.len(), n * n, "row data must be n*n long");
        Mat {
            n,
            data: rows.to_vec(),
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn mul(&self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!(self.n, rhs.n);
        let n = self.n;
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self[(i, k)];
                if aik == T::zero() {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += aik * rhs[(k, j)];
                }
            }
        }
        out
    }

    /// M^T * A * M, the congruence used by symplectic transforms.
    pub fn congruence(&self, m: &Mat<T>) -> Mat<T> {
        let am = self.mul(m);
        let n = self.n;
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = T::zero();
                for k in 0..n {
                    acc += m[(k, i)] * am[(k, j)];
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    pub fn max_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let d = (self[(i, j)] - self[(j, i)]).abs();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    /// Force exact symmetry by averaging the off-diagonal pairs.
    pub fn symmetrize(&mut self) {
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let avg = (self[(i, j)] + self[(j, i)]) * crate::scalar::half();
                self[(i, j)] = avg;
                self[(j, i)] = avg;
            }
        }
    }

    /// Submatrix keeping the given row/column indices, in order.
    pub fn select(&self, idx: &[usize]) -> Mat<T> {
        let m = idx.len();
        let mut out = Mat::zeros(m);
        for (oi, &i) in idx.iter().enumerate() {
            for (oj, &j) in idx.iter().enumerate() {
                out[(oi, oj)] = self[(i, j)];
            }
        }
        out
    }

    /// Lower-triangular Cholesky factor, or None if not positive definite.
    pub fn cholesky(&self) -> Option<Mat<T>> {
        let n = self.n;
        let mut l = Mat::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let mut sum = self[(i, j)];
                for k in 0..j {
                    sum -= l[(i, k)] * l[(j, k)];
                }
                if i == j {
                    if sum <= T::zero() {
                        return None;
                    }
                    l[(i, j)] = sum.sqrt();
                } else {
                    l[(i, j)] = sum / l[(j, j)];
                }
            }
        }
        Some(l)
    }

    /// Eigenvalues of a symmetric matrix by the cyclic Jacobi method,
    /// returned in descending order.
    pub fn sym_eigenvalues(&self) -> Result<Vec<T>> {
        let n = self.n;
        let mut a = self.clone();
        a.symmetrize();
        if n == 1 {
            return Ok(vec![a[(0, 0)]]);
        }
        let eps = T::epsilon() * T::of(64.0);
        let max_sweeps = 64;
        for _ in 0..max_sweeps {
            let mut off = T::zero();
            for i in 0..n {
                for j in (i + 1)..n {
                    off += a[(i, j)] * a[(i, j)];
                }
            }
            let scale: T = (0..n).map(|i| a[(i, i)].abs()).sum::<T>() + off.sqrt();
            if off.sqrt() <= eps * scale.max(T::one()) {
                let mut ev: Vec<T> = (0..n).map(|i| a[(i, i)]).collect();
                ev.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
                return Ok(ev);
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq.abs() <= eps * (a[(p, p)].abs() + a[(q, q)].abs()).max(T::min_positive_value()) {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (two_t::<T>() * apq);
                    let t = {
                        let sign = if theta >= T::zero() { T::one() } else { -T::one() };
                        sign / (theta.abs() + (theta * theta + T::one()).sqrt())
                    };
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    // rotate rows/cols p and q
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        Err(Error::NumericalFailure(
            "Jacobi eigensolver did not converge".into(),
        ))
    }
}

fn two_t<T: Scalar>() -> T {
    T::one() + T::one()
}

impl<T> std::ops::Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        let n = self.n;
        &mut self.data[i * n + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // eigenvalues of [[2,1],[1,2]] are 3 and 1
        let m = Mat::from_rows(2, &[2.0_f64, 1.0, 1.0, 2.0]);
        let ev = m.sym_eigenvalues().unwrap();
        assert!((ev[0] - 3.0).abs() < 1e-12);
        assert!((ev[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cholesky_roundtrip() {
        let m = Mat::from_rows(3, &[4.0_f64, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0]);
        let l = m.cholesky().unwrap();
        let mut lt = Mat::zeros(3);
        for i in 0..3 {
            for j in 0..3 {
                lt[(i, j)] = l[(j, i)];
            }
        }
        let back = l.mul(&lt);
        for i in 0..3 {
            for j in 0..3 {
                assert!((back[(i, j)] - m[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = Mat::from_rows(2, &[1.0_f64, 2.0, 2.0, 1.0]);
        assert!(m.cholesky().is_none());
    }
}
