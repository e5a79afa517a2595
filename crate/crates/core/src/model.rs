//! The contract shared by both kurtosis costs, and the saddle-point solve
//! common to them.
//!
//! For either cost the derivative with respect to Δ_{kl}, expanded to first
//! order around Δ = 0, reads
//!
//! ```text
//! ∂f/∂Δ_{kl} = [ −4 cs(Q) + W cs(Δ) ] at slot l + N(k−1)
//! ```
//!
//! and the step is the Δ with zero diagonal that cancels it in every
//! off-diagonal slot.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kurtosis;
use crate::mat::{Lu, Mat};
use crate::moments::MomentSet;
use crate::squared_kurtosis;
use crate::tensor::{build_p, build_t, cs, cs_inv_slice, direct_sum, kron, VecMat};

/// Condition estimates above this make [`solve_newton`] refuse the system.
pub const MAX_SYSTEM_CONDITION: f64 = 1e12;

/// A solved Newton step.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateStep {
    /// N×N with an exactly zero diagonal.
    pub delta: Mat,
    /// ‖M cs(Δ) − 4(I−P) cs(Q)‖ for the system matrix M.
    pub residual_norm: f64,
    /// 1-norm condition estimate of M.
    pub system_condition: f64,
}

/// Which kurtosis cost drives the iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CostCase {
    /// Σ κ_i.
    #[default]
    Kurtosis,
    /// Σ (κ_i − 3)²; also stationary where a component has zero excess.
    SquaredKurtosis,
}

/// Cost value, stationarity matrix, W operator and second-order model of a
/// scale-invariant kurtosis cost.
pub trait CostModel {
    fn value(&self, m: &MomentSet) -> f64;

    /// The matrix Q whose vectorization gives the gradient at Δ = 0 as
    /// −4 cs(Q).
    fn stationarity(&self, m: &MomentSet) -> Mat;

    /// The N²×N² operator W of the first-order gradient expansion.
    fn assemble_w(&self, m: &MomentSet) -> Result<Mat>;

    /// The explicit second-order expansion of the cost at `e^Δ`.
    fn quadratic_model(&self, delta: &Mat, m: &MomentSet) -> f64;

    /// −4 cs(Q), the gradient at Δ = 0 in slot order l + N(k−1).
    fn gradient_vec(&self, m: &MomentSet) -> VecMat {
        gradient_from_q(&self.stationarity(m))
    }

    fn solve_delta(&self, m: &MomentSet) -> Result<UpdateStep> {
        solve_newton(&self.stationarity(m), &self.assemble_w(m)?)
    }
}

impl CostModel for CostCase {
    fn value(&self, m: &MomentSet) -> f64 {
        match self {
            CostCase::Kurtosis => kurtosis::cost(m),
            CostCase::SquaredKurtosis => squared_kurtosis::cost(m),
        }
    }

    fn stationarity(&self, m: &MomentSet) -> Mat {
        match self {
            CostCase::Kurtosis => kurtosis::stats(m).q,
            CostCase::SquaredKurtosis => squared_kurtosis::stats(m).bq,
        }
    }

    fn assemble_w(&self, m: &MomentSet) -> Result<Mat> {
        match self {
            CostCase::Kurtosis => kurtosis::assemble_w(&kurtosis::stats(m), m),
            CostCase::SquaredKurtosis => {
                squared_kurtosis::assemble_w(&squared_kurtosis::stats(m), m)
            }
        }
    }

    fn quadratic_model(&self, delta: &Mat, m: &MomentSet) -> f64 {
        match self {
            CostCase::Kurtosis => kurtosis::quadratic_model(delta, m, &kurtosis::stats(m)),
            CostCase::SquaredKurtosis => {
                squared_kurtosis::quadratic_model(delta, m, &squared_kurtosis::stats(m))
            }
        }
    }
}

pub(crate) fn gradient_from_q(q: &Mat) -> VecMat {
    let v = cs(q).expect("Q is square and non-empty");
    VecMat::new(v.as_slice().iter().map(|x| -4.0 * x).collect()).expect("perfect square")
}

/// The three groups of terms that make up W, kept apart so diagnostics can
/// inspect or perturb one of them.
#[derive(Debug, Clone, PartialEq)]
pub struct WTerms {
    /// −2 (I⊗Q + Qᵀ⊗I)
    pub curvature: Mat,
    /// 4 (⊕ V^(i)) T
    pub block: Mat,
    /// [moment products] T
    pub products: Mat,
}

impl WTerms {
    /// Assembles the terms from their ingredients. `products` is the bracketed
    /// sum of `(I⊗A) P (I⊗B)ᵀ` terms, before the trailing T.
    pub fn assemble(q: &Mat, blocks: &[Mat], products: &Mat) -> Result<WTerms> {
        let n = q.rows();
        if blocks.len() != n {
            return Err(Error::DimensionMismatch {
                context: "number of V blocks",
                expected: n,
                found: blocks.len(),
            });
        }
        if products.rows() != n * n || products.cols() != n * n {
            return Err(Error::DimensionMismatch {
                context: "moment product term",
                expected: n * n,
                found: products.rows(),
            });
        }
        let ident = Mat::identity(n);
        let t = build_t(n)?.matrix;
        let curvature = (&kron(&ident, q) + &kron(&q.transpose(), &ident)).scale(-2.0);
        let block = (&direct_sum(blocks)? * &t).scale(4.0);
        let products = products * &t;
        Ok(WTerms {
            curvature,
            block,
            products,
        })
    }

    pub fn sum(&self) -> Mat {
        &(&self.curvature + &self.block) + &self.products
    }
}

/// `(I ⊗ a) P (I ⊗ b)ᵀ`, the building block of the moment-product terms.
pub fn projected_product(a: &Mat, b: &Mat) -> Result<Mat> {
    let n = a.rows();
    let ident = Mat::identity(n);
    let p = build_p(n)?.matrix;
    Ok(&(&kron(&ident, a) * &p) * &kron(&ident, b).transpose())
}

/// The Newton system matrix `(I−P) W (I−P) + P`.
pub fn system_matrix(w: &Mat) -> Result<Mat> {
    let nn = w.rows();
    let n = libm::round(libm::sqrt(nn as f64)) as usize;
    if n * n != nn || !w.is_square() {
        return Err(Error::NotPerfectSquare { len: nn });
    }
    let p = build_p(n)?.matrix;
    let ip = &Mat::identity(nn) - &p;
    Ok(&(&(&ip * w) * &ip) + &p)
}

/// Solves `[(I−P) W (I−P) + P] cs(Δ) = 4 (I−P) cs(Q)` for Δ.
pub fn solve_newton(q: &Mat, w: &Mat) -> Result<UpdateStep> {
    let n = q.rows();
    if !q.is_square() {
        return Err(Error::NotSquare {
            context: "stationarity matrix",
            rows: q.rows(),
            cols: q.cols(),
        });
    }
    if w.rows() != n * n || w.cols() != n * n {
        return Err(Error::DimensionMismatch {
            context: "W operator",
            expected: n * n,
            found: w.rows(),
        });
    }
    let m = system_matrix(w)?;
    let p = build_p(n)?.matrix;
    let cq = cs(q)?;
    let rhs: Vec<f64> = (0..n * n)
        .map(|k| 4.0 * (1.0 - p[(k, k)]) * cq[k])
        .collect();
    if rhs.iter().all(|&v| v == 0.0) {
        // Δ = 0 solves the system whatever its conditioning; this is the
        // fixed-point case, where the system may be singular (e.g. a channel
        // with exactly Gaussian kurtosis).
        let condition = Lu::factor(&m).map_or(f64::INFINITY, |lu| lu.condition_estimate());
        return Ok(UpdateStep {
            delta: Mat::zeros(n, n),
            residual_norm: 0.0,
            system_condition: condition,
        });
    }
    let lu = Lu::factor(&m).map_err(|e| match e {
        Error::Singular => Error::IllConditioned {
            condition: f64::INFINITY,
        },
        other => other,
    })?;
    let condition = lu.condition_estimate();
    if !(condition <= MAX_SYSTEM_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    let mut x = lu.solve(&rhs);
    for i in 0..n {
        x[crate::tensor::cs_index(n, i, i)] = 0.0;
    }
    let mx = m.mul_vec(&x);
    let residual_norm = libm::sqrt(
        mx.iter()
            .zip(&rhs)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>(),
    );
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite {
            context: "Newton step",
        });
    }
    Ok(UpdateStep {
        delta: cs_inv_slice(&x)?,
        residual_norm,
        system_condition: condition,
    })
}

/// `[A]_{ii}` of the product `A B` without forming it.
#[inline]
pub(crate) fn diag_of_product(a: &Mat, b: &Mat, i: usize) -> f64 {
    (0..a.cols()).map(|p| a[(i, p)] * b[(p, i)]).sum()
}

/// `[Δ B Δᵀ]_{ii}`.
#[inline]
pub(crate) fn row_quadratic_form(delta: &Mat, b: &Mat, i: usize) -> f64 {
    let n = delta.cols();
    let mut s = 0.0;
    for p in 0..n {
        for q in 0..n {
            s += delta[(i, p)] * b[(p, q)] * delta[(i, q)];
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rhs_gives_zero_step() {
        for n in 1..5 {
            let w = Mat::from_fn(n * n, n * n, |i, j| if i == j { 2.0 } else { 0.1 });
            let step = solve_newton(&Mat::zeros(n, n), &w).unwrap();
            assert_eq!(step.delta, Mat::zeros(n, n));
            assert_eq!(step.residual_norm, 0.0);
        }
    }

    #[test]
    fn one_channel_step_is_zero() {
        let step = solve_newton(&Mat::from_rows(&[[0.0]]), &Mat::from_rows(&[[5.0]])).unwrap();
        assert_eq!(step.delta, Mat::zeros(1, 1));
    }

    #[test]
    fn singular_system_is_ill_conditioned() {
        let q = Mat::from_rows(&[[0.0, 1.0], [1.0, 0.0]]);
        let err = solve_newton(&q, &Mat::zeros(4, 4)).unwrap_err();
        assert!(matches!(err, Error::IllConditioned { .. }));
    }

    #[test]
    fn system_matrix_structure() {
        let w = Mat::from_fn(9, 9, |i, j| (i * 9 + j) as f64);
        let m = system_matrix(&w).unwrap();
        for d in [0, 4, 8] {
            for k in 0..9 {
                assert_eq!(m[(d, k)], if k == d { 1.0 } else { 0.0 });
                assert_eq!(m[(k, d)], if k == d { 1.0 } else { 0.0 });
            }
        }
        assert_eq!(m[(1, 2)], w[(1, 2)]);
    }
}
