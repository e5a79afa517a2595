//! Squared-excess cost 𝒇 = Σ (κ_i − 3)², which is also stationary where a
//! recovered component has Gaussian kurtosis.

use alloc::vec::Vec;

use crate::error::Result;
use crate::mat::Mat;
use crate::model::{
    diag_of_product, gradient_from_q, projected_product, row_quadratic_form, solve_newton,
    UpdateStep, WTerms,
};
use crate::moments::MomentSet;
use crate::tensor::VecMat;

/// Kurtosis of a Gaussian.
pub const GAUSSIAN_KURTOSIS: f64 = 3.0;

/// Statistics of the squared-excess cost (the bold quantities).
#[derive(Debug, Clone, PartialEq)]
pub struct CaseIIStats {
    /// 𝑲_{pq} = 2 R¹_{pq} (κ_q − 3) κ_q
    pub bk: Mat,
    /// 𝑽^(i) = 2(κ_i − 3)(3U^(2,i) − κ_i U^(0,i)), symmetrized.
    pub bv: Vec<Mat>,
    /// 𝑺 = diag(2(κ_i − 3))
    pub bs: Mat,
    /// 𝑸_{pq} = 2(κ_q − 3)(R¹_{pq} κ_q − R³_{pq})
    pub bq: Mat,
    /// 𝒒_{pq} = R¹_{pq} κ_q − R³_{pq}
    pub q: Mat,
}

pub fn cost(m: &MomentSet) -> f64 {
    m.kappa
        .iter()
        .map(|k| (k - GAUSSIAN_KURTOSIS) * (k - GAUSSIAN_KURTOSIS))
        .sum()
}

pub fn stats(m: &MomentSet) -> CaseIIStats {
    let n = m.dim();
    let excess: Vec<f64> = m.kappa.iter().map(|k| k - GAUSSIAN_KURTOSIS).collect();
    let bk = Mat::from_fn(n, n, |p, q| 2.0 * m.r1[(p, q)] * excess[q] * m.kappa[q]);
    let bv = (0..n)
        .map(|i| {
            let raw = Mat::from_fn(n, n, |p, q| {
                2.0 * excess[i] * (3.0 * m.u2[i][(p, q)] - m.kappa[i] * m.u0[i][(p, q)])
            });
            Mat::from_fn(n, n, |p, q| 0.5 * (raw[(p, q)] + raw[(q, p)]))
        })
        .collect();
    let bs = Mat::diag(&excess.iter().map(|e| 2.0 * e).collect::<Vec<_>>());
    let q = Mat::from_fn(n, n, |p, c| m.r1[(p, c)] * m.kappa[c] - m.r3[(p, c)]);
    let bq = Mat::from_fn(n, n, |p, c| 2.0 * excess[c] * q[(p, c)]);
    CaseIIStats { bk, bv, bs, bq, q }
}

/// The separate groups of terms of 𝑾.
pub fn w_terms(s: &CaseIIStats, m: &MomentSet) -> Result<WTerms> {
    let r1s = &m.r1 * &s.bs;
    let r3s = &m.r3 * &s.bs;
    let products = &(&(&projected_product(&s.bk, &m.r1)?.scale(24.0)
        + &projected_product(&s.q, &s.q)?.scale(32.0))
        - &projected_product(&r1s, &m.r3)?.scale(16.0))
        - &projected_product(&r3s, &m.r1)?.scale(16.0);
    WTerms::assemble(&s.bq, &s.bv, &products)
}

/// 𝑾 = −2(I⊗𝑸 + 𝑸ᵀ⊗I) + 4(⊕𝑽^(i))T + [24(I⊗𝑲)P(I⊗R¹)ᵀ + 32(I⊗𝒒)P(I⊗𝒒)ᵀ
///     − 16(I⊗R¹𝑺)P(I⊗R³)ᵀ − 16(I⊗R³𝑺)P(I⊗R¹)ᵀ]T
pub fn assemble_w(s: &CaseIIStats, m: &MomentSet) -> Result<Mat> {
    Ok(w_terms(s, m)?.sum())
}

/// Gradient at Δ = 0: slot l + N(k−1) holds −4 𝑸_{lk}.
pub fn gradient_vec(s: &CaseIIStats) -> VecMat {
    gradient_from_q(&s.bq)
}

pub fn solve_delta(s: &CaseIIStats, m: &MomentSet) -> Result<UpdateStep> {
    solve_newton(&s.bq, &assemble_w(s, m)?)
}

/// Second-order expansion of 𝒇(e^Δ C) around Δ = 0, summed over channels:
///
/// ```text
/// (κ_i−3)² − 8[(Δ + Δ²/2)(R¹κ_i − R³)]_ii (κ_i−3) + 4[Δ V^(i) Δᵀ]_ii (κ_i−3)
///     + 16[Δ(R¹κ_i − R³)]_ii² + 24(κ_i−3)κ_i [ΔR¹]_ii² − 32(κ_i−3)[ΔR¹]_ii[ΔR³]_ii
/// ```
///
/// with V^(i) = 3U^(2,i) − κ_i U^(0,i) (not the bold one).
pub fn quadratic_model(delta: &Mat, m: &MomentSet, s: &CaseIIStats) -> f64 {
    let n = m.dim();
    let half_sq = (delta * delta).scale(0.5);
    let step = delta + &half_sq;
    let mut total = 0.0;
    for i in 0..n {
        let kappa = m.kappa[i];
        let excess = kappa - GAUSSIAN_KURTOSIS;
        let v = Mat::from_fn(n, n, |p, q| 3.0 * m.u2[i][(p, q)] - kappa * m.u0[i][(p, q)]);
        let linear = diag_of_product(&step, &s.q, i);
        let dq = diag_of_product(delta, &s.q, i);
        let dr1 = diag_of_product(delta, &m.r1, i);
        let dr3 = diag_of_product(delta, &m.r3, i);
        total += excess * excess - 8.0 * linear * excess
            + 4.0 * row_quadratic_form(delta, &v, i) * excess
            + 16.0 * dq * dq
            + 24.0 * excess * kappa * dr1 * dr1
            - 32.0 * excess * dr1 * dr3;
    }
    total
}
