//! Sum-of-kurtoses cost f = Σ κ_i.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::model::{
    diag_of_product, gradient_from_q, projected_product, row_quadratic_form, solve_newton,
    UpdateStep, WTerms,
};
use crate::moments::MomentSet;
use crate::tensor::VecMat;

/// Statistics of the sum-of-kurtoses cost.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseIStats {
    /// K_{pq} = κ_q R^(1)_{pq}
    pub k: Mat,
    /// V^(i) = 3 U^(2,i) − κ_i U^(0,i), symmetrized.
    pub v: Vec<Mat>,
    /// Q = K − R^(3)
    pub q: Mat,
}

pub fn cost(m: &MomentSet) -> f64 {
    m.kappa.iter().sum()
}

pub fn stats(m: &MomentSet) -> CaseIStats {
    let n = m.dim();
    let k = Mat::from_fn(n, n, |p, q| m.kappa[q] * m.r1[(p, q)]);
    let v = (0..n)
        .map(|i| {
            let raw = Mat::from_fn(n, n, |p, q| {
                3.0 * m.u2[i][(p, q)] - m.kappa[i] * m.u0[i][(p, q)]
            });
            Mat::from_fn(n, n, |p, q| 0.5 * (raw[(p, q)] + raw[(q, p)]))
        })
        .collect();
    let q = &k - &m.r3;
    CaseIStats { k, v, q }
}

/// The separate groups of terms of W.
pub fn w_terms(s: &CaseIStats, m: &MomentSet) -> Result<WTerms> {
    weighted_w_terms(s, m, &vec![1.0; m.dim()])
}

/// W of the weighted sum Σ w_i κ_i: every channel-i contribution is scaled
/// by w_i, i.e. Q, K, R¹, R³ in first position are multiplied on the right by
/// diag(w) and V^(i) by w_i. Unit weights give the plain W.
pub fn weighted_w_terms(s: &CaseIStats, m: &MomentSet, weights: &[f64]) -> Result<WTerms> {
    let n = m.dim();
    if weights.len() != n {
        return Err(Error::DimensionMismatch {
            context: "channel weights",
            expected: n,
            found: weights.len(),
        });
    }
    let d = Mat::diag(weights);
    let products = &(&projected_product(&(&s.k * &d), &m.r1)?.scale(24.0)
        - &projected_product(&(&m.r1 * &d), &m.r3)?.scale(16.0))
        - &projected_product(&(&m.r3 * &d), &m.r1)?.scale(16.0);
    let blocks: Vec<Mat> = s.v.iter().zip(weights).map(|(v, &w)| v.scale(w)).collect();
    WTerms::assemble(&(&s.q * &d), &blocks, &products)
}

/// W = −2(I⊗Q + Qᵀ⊗I) + 4(⊕V^(i))T
///     + [24(I⊗K)P(I⊗R¹)ᵀ − 16(I⊗R¹)P(I⊗R³)ᵀ − 16(I⊗R³)P(I⊗R¹)ᵀ]T
pub fn assemble_w(s: &CaseIStats, m: &MomentSet) -> Result<Mat> {
    Ok(w_terms(s, m)?.sum())
}

/// Gradient at Δ = 0: slot l + N(k−1) holds ∂f/∂Δ_{kl} = −4 Q_{lk}.
pub fn gradient_vec(s: &CaseIStats) -> VecMat {
    gradient_from_q(&s.q)
}

pub fn solve_delta(s: &CaseIStats, m: &MomentSet) -> Result<UpdateStep> {
    solve_newton(&s.q, &assemble_w(s, m)?)
}

/// Second-order expansion of f(e^Δ C) around Δ = 0, summed over channels:
///
/// ```text
/// κ_i − 4[(Δ + Δ²/2)(κ_i R¹ − R³)]_ii + 2[Δ V^(i) Δᵀ]_ii
///     + 12 κ_i [ΔR¹]_ii² − 16 [ΔR¹]_ii [ΔR³]_ii
/// ```
pub fn quadratic_model(delta: &Mat, m: &MomentSet, s: &CaseIStats) -> f64 {
    let n = m.dim();
    let half_sq = (delta * delta).scale(0.5);
    let step = delta + &half_sq;
    let mut total = 0.0;
    for i in 0..n {
        let kappa = m.kappa[i];
        // column i of κ_i R¹ − R³ equals column i of Q
        let linear = diag_of_product(&step, &s.q, i);
        let dr1 = diag_of_product(delta, &m.r1, i);
        let dr3 = diag_of_product(delta, &m.r3, i);
        total += kappa - 4.0 * linear
            + 2.0 * row_quadratic_form(delta, &s.v[i], i)
            + 12.0 * kappa * dr1 * dr1
            - 16.0 * dr1 * dr3;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::independent_oracle_moments;
    use crate::moments::{estimate_moments, SignalMatrix};

    fn sample_moments() -> MomentSet {
        let y = SignalMatrix::from_rows(&[
            [0.3, -1.2, 2.0, 0.7, -0.4, 1.1, -0.9, 0.25],
            [1.0, 0.5, -0.3, -2.2, 0.9, 0.1, 0.6, -1.4],
            [-0.6, 0.8, 1.5, 0.2, -1.7, 0.4, 1.3, -0.1],
        ])
        .unwrap();
        estimate_moments(&y).unwrap()
    }

    #[test]
    fn cost_examples() {
        let y = SignalMatrix::from_rows(&[[1.0, -1.0]]).unwrap();
        assert_eq!(cost(&estimate_moments(&y).unwrap()), 1.0);
    }

    #[test]
    fn oracle_fixed_point() {
        let m = independent_oracle_moments(&[1.8, 3.0, 6.0]).unwrap();
        let s = stats(&m);
        assert_eq!(s.q, Mat::zeros(3, 3));
        assert!(gradient_vec(&s).as_slice().iter().all(|&g| g == 0.0));
        let step = solve_delta(&s, &m).unwrap();
        assert_eq!(step.delta, Mat::zeros(3, 3));
    }

    #[test]
    fn single_channel() {
        let y = SignalMatrix::from_rows(&[[1.0, -2.0, 0.5, 3.0]]).unwrap();
        let m = estimate_moments(&y).unwrap();
        let s = stats(&m);
        assert!(s.q[(0, 0)].abs() < 1e-15);
        assert_eq!(assemble_w(&s, &m).unwrap().rows(), 1);
        assert_eq!(solve_delta(&s, &m).unwrap().delta, Mat::zeros(1, 1));
    }

    #[test]
    fn k_and_q_entrywise() {
        let m = sample_moments();
        let s = stats(&m);
        for p in 0..3 {
            for q in 0..3 {
                let k = m.kappa[q] * m.r1[(p, q)];
                assert_eq!(s.k[(p, q)], k);
                assert_eq!(s.q[(p, q)], k - m.r3[(p, q)]);
            }
        }
        for v in &s.v {
            assert_eq!(v, &v.transpose());
        }
    }

    #[test]
    fn gradient_slots() {
        let s = CaseIStats {
            k: Mat::zeros(2, 2),
            v: Vec::new(),
            q: Mat::from_rows(&[[0.0, 1.0], [2.0, 0.0]]),
        };
        assert_eq!(gradient_vec(&s).as_slice(), &[0.0, -8.0, -4.0, 0.0]);
    }

    #[test]
    fn zero_statistics_give_zero_w() {
        let n = 3;
        let z = Mat::zeros(n, n);
        let m = MomentSet {
            second: alloc::vec![1.0; n],
            sigma2: alloc::vec![1.0; n],
            fourth: alloc::vec![0.0; n],
            sigma4: alloc::vec![0.0; n],
            r1: z.clone(),
            r3: z.clone(),
            u0: alloc::vec![z.clone(); n],
            u2: alloc::vec![z.clone(); n],
            kappa: alloc::vec![0.0; n],
        };
        let w = assemble_w(&stats(&m), &m).unwrap();
        assert_eq!(w, Mat::zeros(9, 9));
    }

    #[test]
    fn step_has_zero_diagonal_and_small_residual() {
        let m = sample_moments();
        let s = stats(&m);
        let step = solve_delta(&s, &m).unwrap();
        for i in 0..3 {
            assert_eq!(step.delta[(i, i)], 0.0);
        }
        let qn = s.q.frobenius_norm();
        assert!(step.residual_norm < 1e-10 * qn, "{} vs {}", step.residual_norm, qn);
    }

    #[test]
    fn model_at_zero_is_cost() {
        let m = sample_moments();
        let s = stats(&m);
        assert!((quadratic_model(&Mat::zeros(3, 3), &m, &s) - cost(&m)).abs() < 1e-14);
    }

    #[test]
    fn squared_cost_is_weighted_sum_plus_outer_term() {
        use crate::squared_kurtosis as sq;
        let m = sample_moments();
        let weights: Vec<f64> = m.kappa.iter().map(|k| 2.0 * (k - 3.0)).collect();
        let weighted = weighted_w_terms(&stats(&m), &m, &weights).unwrap().sum();
        let s2 = sq::stats(&m);
        let t = crate::tensor::build_t(3).unwrap().matrix;
        let outer = &projected_product(&s2.q, &s2.q).unwrap().scale(32.0) * &t;
        let expected = sq::assemble_w(&s2, &m).unwrap();
        assert!((&weighted + &outer).max_abs_diff(&expected) < 1e-12 * expected.max_abs());
    }
}
