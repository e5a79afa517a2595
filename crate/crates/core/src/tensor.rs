//! Vectorization and the N²×N² operators built on it.
//!
//! `cs` stacks the columns of an N×N matrix, so entry (i, j) (1-based) lands
//! at position i + N(j−1). Internally everything is 0-based; the conversion
//! lives in [`cs_index`] and [`gradient_slot`] and nowhere else.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mat::Mat;

/// 0-based position of entry `(row, col)` of an `n`×`n` matrix inside `cs(A)`.
#[inline]
pub fn cs_index(n: usize, row: usize, col: usize) -> usize {
    row + n * col
}

/// Inverse of [`cs_index`].
#[inline]
pub fn cs_entry(n: usize, index: usize) -> (usize, usize) {
    (index % n, index / n)
}

/// 0-based slot of a gradient vector that holds ∂f/∂Δ_{kl}.
///
/// The derivative with respect to Δ_{kl} is read at 1-based position
/// l + N(k−1), i.e. the gradient vector is `cs` of the transposed gradient
/// matrix.
#[inline]
pub fn gradient_slot(n: usize, k: usize, l: usize) -> usize {
    cs_index(n, l, k)
}

/// A vectorized square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct VecMat {
    dim: usize,
    data: Vec<f64>,
}

impl VecMat {
    /// Wraps a vector whose length must be a perfect square.
    pub fn new(data: Vec<f64>) -> Result<Self> {
        let dim = libm::round(libm::sqrt(data.len() as f64)) as usize;
        if dim * dim != data.len() || dim == 0 {
            return Err(Error::NotPerfectSquare { len: data.len() });
        }
        Ok(VecMat { dim, data })
    }

    pub fn zeros(dim: usize) -> Self {
        VecMat {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|v| v * v).sum())
    }
}

impl core::ops::Index<usize> for VecMat {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

/// Column-stacking vectorization.
pub fn cs(a: &Mat) -> Result<VecMat> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            context: "cs",
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if a.rows() == 0 {
        return Err(Error::ZeroDimension { context: "cs" });
    }
    let n = a.rows();
    let mut data = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            data[cs_index(n, i, j)] = a[(i, j)];
        }
    }
    Ok(VecMat { dim: n, data })
}

/// Inverse of [`cs`].
pub fn cs_inv(v: &VecMat) -> Mat {
    let n = v.dim;
    Mat::from_fn(n, n, |i, j| v.data[cs_index(n, i, j)])
}

/// Convenience: `cs_inv` of a raw slice.
pub fn cs_inv_slice(v: &[f64]) -> Result<Mat> {
    Ok(cs_inv(&VecMat::new(v.to_vec())?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Intertwiner,
    DiagProjection,
    OffDiagSelector,
    General,
}

/// One of the structured operators acting on vectorized N×N matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct BigOperator {
    pub dim: usize,
    pub matrix: Mat,
    pub kind: OperatorKind,
}

fn check_dim(n: usize, context: &'static str) -> Result<()> {
    if n == 0 {
        Err(Error::ZeroDimension { context })
    } else {
        Ok(())
    }
}

/// The intertwiner T with `T cs(A) = cs(Aᵀ)`.
pub fn build_t(n: usize) -> Result<BigOperator> {
    check_dim(n, "build_T")?;
    let mut t = Mat::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            // Aᵀ(i, j) = A(j, i)
            t[(cs_index(n, i, j), cs_index(n, j, i))] = 1.0;
        }
    }
    Ok(BigOperator {
        dim: n,
        matrix: t,
        kind: OperatorKind::Intertwiner,
    })
}

/// Diagonal projection P onto the coordinates of diagonal entries.
pub fn build_p(n: usize) -> Result<BigOperator> {
    check_dim(n, "build_P")?;
    let mut p = Mat::zeros(n * n, n * n);
    for i in 0..n {
        let k = cs_index(n, i, i);
        p[(k, k)] = 1.0;
    }
    Ok(BigOperator {
        dim: n,
        matrix: p,
        kind: OperatorKind::DiagProjection,
    })
}

/// The (N²−N)×N² selector of off-diagonal coordinates: the identity with
/// the rows of the diagonal positions removed.
pub fn build_p_tilde(n: usize) -> Result<BigOperator> {
    check_dim(n, "build_P_tilde")?;
    let kept: Vec<usize> = (0..n * n)
        .filter(|&k| {
            let (i, j) = cs_entry(n, k);
            i != j
        })
        .collect();
    let mut sel = Mat::zeros(kept.len(), n * n);
    for (r, &k) in kept.iter().enumerate() {
        sel[(r, k)] = 1.0;
    }
    Ok(BigOperator {
        dim: n,
        matrix: sel,
        kind: OperatorKind::OffDiagSelector,
    })
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Mat, b: &Mat) -> Mat {
    let (p, q) = (b.rows(), b.cols());
    Mat::from_fn(a.rows() * p, a.cols() * q, |r, c| {
        a[(r / p, c / q)] * b[(r % p, c % q)]
    })
}

/// Block-diagonal direct sum of equally sized square blocks, placed along
/// the diagonal in order. The cost models always pass N blocks of size N.
pub fn direct_sum(blocks: &[Mat]) -> Result<Mat> {
    check_dim(blocks.len(), "direct_sum")?;
    let m = blocks[0].rows();
    for b in blocks {
        if !b.is_square() {
            return Err(Error::NotSquare {
                context: "direct_sum block",
                rows: b.rows(),
                cols: b.cols(),
            });
        }
        if b.rows() != m {
            return Err(Error::DimensionMismatch {
                context: "direct_sum block",
                expected: m,
                found: b.rows(),
            });
        }
    }
    let mut out = Mat::zeros(blocks.len() * m, blocks.len() * m);
    for (i, b) in blocks.iter().enumerate() {
        for p in 0..m {
            for q in 0..m {
                out[(i * m + p, i * m + q)] = b[(p, q)];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cs_stacks_columns() {
        let a = Mat::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(cs(&a).unwrap().as_slice(), &[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(
            cs(&Mat::identity(3)).unwrap().as_slice(),
            &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]
        );
        assert_eq!(cs(&Mat::zeros(4, 4)).unwrap().as_slice(), &[0.0; 16]);
        assert!(matches!(cs(&Mat::zeros(2, 3)), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn cs_inv_examples() {
        let v = VecMat::new(vec![1.0, 3.0, 2.0, 4.0]).unwrap();
        assert_eq!(cs_inv(&v), Mat::from_rows(&[[1.0, 2.0], [3.0, 4.0]]));
        let e1 = VecMat::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(cs_inv(&e1), Mat::from_rows(&[[1.0, 0.0], [0.0, 0.0]]));
        assert_eq!(
            VecMat::new(vec![1.0, 2.0, 3.0]).unwrap_err(),
            Error::NotPerfectSquare { len: 3 }
        );
    }

    #[test]
    fn t_small_cases() {
        assert_eq!(build_t(1).unwrap().matrix, Mat::identity(1));
        // Enumerating the basis matrices for N = 2: positions 2 and 3 swap.
        let t = build_t(2).unwrap().matrix;
        let want = Mat::from_rows(&[
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ]);
        assert_eq!(t, want);
        let a = Mat::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(t.mul_vec(cs(&a).unwrap().as_slice()), vec![1.0, 2.0, 3.0, 4.0]);
        assert!(build_t(0).is_err());
    }

    #[test]
    fn p_examples() {
        assert_eq!(build_p(2).unwrap().matrix, Mat::diag(&[1.0, 0.0, 0.0, 1.0]));
        let p3 = build_p(3).unwrap().matrix;
        let ones: Vec<usize> = (0..9).filter(|&k| p3[(k, k)] == 1.0).collect();
        assert_eq!(ones, vec![0, 4, 8]);
        for n in 1..6 {
            let p = build_p(n).unwrap().matrix;
            let i_p = &Mat::identity(n * n) - &p;
            let v = i_p.mul_vec(cs(&Mat::identity(n)).unwrap().as_slice());
            assert!(v.iter().all(|&x| x == 0.0));
            assert_eq!(&p * &p, p);
            assert_eq!(&i_p * &i_p, i_p);
        }
        assert!(build_p(0).is_err());
    }

    #[test]
    fn p_tilde_examples() {
        let pt = build_p_tilde(2).unwrap().matrix;
        assert_eq!(
            pt,
            Mat::from_rows(&[[0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]])
        );
        for n in 2..=5 {
            let pt = build_p_tilde(n).unwrap().matrix;
            assert_eq!((pt.rows(), pt.cols()), (n * n - n, n * n));
            assert!(pt
                .mul_vec(cs(&Mat::identity(n)).unwrap().as_slice())
                .iter()
                .all(|&x| x == 0.0));
            assert_eq!(&pt * &pt.transpose(), Mat::identity(n * n - n));
            let complement = &Mat::identity(n * n) - &build_p(n).unwrap().matrix;
            assert_eq!(&pt.transpose() * &pt, complement);
        }
        assert!(build_p_tilde(0).is_err());
    }

    #[test]
    fn kron_examples() {
        let b = Mat::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let k = kron(&Mat::identity(2), &b);
        let want = Mat::from_rows(&[
            [1.0, 2.0, 0.0, 0.0],
            [3.0, 4.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 2.0],
            [0.0, 0.0, 3.0, 4.0],
        ]);
        assert_eq!(k, want);
        assert_eq!(kron(&b, &Mat::identity(1)), b);
        let row = Mat::from_rows(&[[1.0, -1.0]]);
        assert_eq!(kron(&row, &Mat::identity(2)).cols(), 4);
    }

    #[test]
    fn direct_sum_examples() {
        let i2 = Mat::identity(2);
        assert_eq!(direct_sum(&[i2.clone(), i2]).unwrap(), Mat::identity(4));
        let blocks = [Mat::from_rows(&[[1.0]]), Mat::from_rows(&[[2.0]])];
        assert_eq!(direct_sum(&blocks).unwrap(), Mat::diag(&[1.0, 2.0]));
        assert!(direct_sum(&[]).is_err());
        assert!(direct_sum(&[Mat::identity(2), Mat::identity(3)]).is_err());
        assert!(direct_sum(&[Mat::zeros(2, 3)]).is_err());
    }

    #[test]
    fn gradient_slot_is_transposed_cs_position() {
        // Derivative w.r.t. Δ_{12} (1-based) lives at position 2 + N(1−1) = 2.
        assert_eq!(gradient_slot(2, 0, 1), 1);
        assert_eq!(gradient_slot(2, 1, 0), 2);
        for n in 1..5 {
            for k in 0..n {
                for l in 0..n {
                    assert_eq!(cs_entry(n, cs_index(n, k, l)), (k, l));
                }
            }
        }
    }
}
