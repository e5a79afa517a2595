//! The global phase: a merit function ascended while far from a solution and
//! the saddle-free step on its second-order model.
//!
//! The merit is the contrast (the kurtosis sum with every row signed by its
//! excess, or the squared-excess cost itself) plus a weighted barrier
//! ½ log det Corr(Y). Both are invariant under row scaling. The barrier is 0
//! for uncorrelated outputs and −∞ when two rows recover the same signal, so
//! rows cannot collapse onto one source. Its weight is proportional to the
//! current size of the contrast, so a strongly non-Gaussian source cannot
//! buy two rows. It only steers the global phase; it never transforms the
//! data and does not enter the Newton step.

use alloc::vec;
use alloc::vec::Vec;

use crate::engine::{hessian_from_w, relative_gradient};
use crate::error::{Error, Result};
use crate::kurtosis;
use crate::mat::{symmetric_eigen, Lu, Mat};
use crate::model::{CostCase, CostModel};
use crate::moments::MomentSet;
use crate::tensor::cs_entry;

/// Signs that turn the kurtosis sum into a contrast to maximize:
/// +1 where κ ≥ 3, −1 below.
pub fn contrast_signs(kappa: &[f64]) -> Vec<f64> {
    kappa
        .iter()
        .map(|&k| if k >= 3.0 { 1.0 } else { -1.0 })
        .collect()
}

/// Σ σ_k κ_k with the given signs, or the squared-excess cost itself.
pub fn contrast(case: CostCase, kappa: &[f64], signs: &[f64]) -> f64 {
    match case {
        CostCase::Kurtosis => kappa.iter().zip(signs).map(|(k, s)| k * s).sum(),
        CostCase::SquaredKurtosis => kappa.iter().map(|k| (k - 3.0) * (k - 3.0)).sum(),
    }
}

/// Size of the contrast's non-Gaussian part: Σ |κ_k − 3| for the kurtosis
/// sum, Σ (κ_k − 3)² for the squared cost.
pub fn contrast_scale(case: CostCase, kappa: &[f64]) -> f64 {
    match case {
        CostCase::Kurtosis => kappa.iter().map(|k| (k - 3.0).abs()).sum(),
        CostCase::SquaredKurtosis => kappa.iter().map(|k| (k - 3.0) * (k - 3.0)).sum(),
    }
}

/// Gradient and symmetrized Hessian of the contrast at Δ = 0, in the
/// off-diagonal coordinates (column-stacked order).
pub fn contrast_model(m: &MomentSet, case: CostCase) -> Result<(Vec<f64>, Mat)> {
    let w = match case {
        CostCase::Kurtosis => {
            kurtosis::weighted_w_terms(&kurtosis::stats(m), m, &contrast_signs(&m.kappa))?.sum()
        }
        CostCase::SquaredKurtosis => case.assemble_w(m)?,
    };
    let h = symmetrize(&hessian_from_w(&w, m.dim())?);
    Ok((off_diagonal(&relative_gradient(m, case)), h))
}

/// Correlation matrix from a second-moment matrix.
pub fn correlation(m2: &Mat) -> Mat {
    let n = m2.rows();
    Mat::from_fn(n, n, |p, q| {
        m2[(p, q)] / libm::sqrt(m2[(p, p)] * m2[(q, q)])
    })
}

/// ½ log det Corr; −∞ once the correlation matrix is numerically singular.
pub fn half_log_det_correlation(m2: &Mat) -> f64 {
    match Lu::factor(&correlation(m2)) {
        Ok(lu) => {
            let det = lu.determinant();
            if det > 0.0 {
                0.5 * libm::log(det)
            } else {
                f64::NEG_INFINITY
            }
        }
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Quadratic part of the barrier's expansion at Δ = 0, for outputs with
/// correlation `r`:
///
/// ```text
/// −½ Σ_i [Δ R Δᵀ]_ii − ½ Σ_i [Δ² R]_ii + Σ_i [Δ R]_ii²
/// ```
///
/// The linear part is −Σ_i [Δ R]_ii. det e^Δ = 1 keeps log det of the second
/// moments fixed, so only the diagonal normalization contributes.
pub fn barrier_quadratic(delta: &Mat, r: &Mat) -> f64 {
    let dr = delta * r;
    let drd = &dr * &delta.transpose();
    let ddr = &(delta * delta) * r;
    let n = r.rows();
    (0..n)
        .map(|i| -0.5 * drd[(i, i)] - 0.5 * ddr[(i, i)] + dr[(i, i)] * dr[(i, i)])
        .sum()
}

/// Gradient and Hessian of the barrier at Δ = 0 in the off-diagonal
/// coordinates. Expects the unit-variance representative, where the second
/// moments are the correlations.
pub fn barrier_model(r: &Mat) -> (Vec<f64>, Mat) {
    let n = r.rows();
    let grad = Mat::from_fn(n, n, |k, l| if k == l { 0.0 } else { -r[(l, k)] });
    let coords: Vec<(usize, usize)> = off_diagonal_coords(n).collect();
    let unit = |a: usize| {
        let mut e = Mat::zeros(n, n);
        e[coords[a]] = 1.0;
        e
    };
    let d = coords.len();
    let single: Vec<f64> = (0..d).map(|a| barrier_quadratic(&unit(a), r)).collect();
    let mut h = Mat::zeros(d, d);
    for a in 0..d {
        h[(a, a)] = 2.0 * single[a];
        for b in a + 1..d {
            let both = barrier_quadratic(&(&unit(a) + &unit(b)), r);
            let v = both - single[a] - single[b];
            h[(a, b)] = v;
            h[(b, a)] = v;
        }
    }
    (off_diagonal(&grad), h)
}

/// Contrast plus weighted decorrelation barrier, with the contrast signs and
/// the barrier weight frozen at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Merit {
    pub case: CostCase,
    pub signs: Vec<f64>,
    pub weight: f64,
}

impl Merit {
    /// The barrier weight is `decorrelation` times [`contrast_scale`] at
    /// `kappa`.
    pub fn new(case: CostCase, kappa: &[f64], decorrelation: f64) -> Self {
        Merit {
            case,
            signs: contrast_signs(kappa),
            weight: decorrelation * contrast_scale(case, kappa),
        }
    }

    /// Merit from per-channel kurtoses and the second-moment matrix.
    pub fn value(&self, kappa: &[f64], m2: &Mat) -> f64 {
        let c = contrast(self.case, kappa, &self.signs);
        if self.weight == 0.0 {
            return c;
        }
        c + self.weight * half_log_det_correlation(m2)
    }

    /// Gradient and Hessian at Δ = 0 of the unit-variance representative.
    pub fn model(&self, m: &MomentSet) -> Result<(Vec<f64>, Mat)> {
        let (mut g, mut h) = contrast_model(m, self.case)?;
        if self.weight != 0.0 {
            let r = correlation(&m.u0[0].scale(m.second[0]));
            let (gb, hb) = barrier_model(&r);
            for (a, b) in g.iter_mut().zip(&gb) {
                *a += self.weight * b;
            }
            h = &h + &hb.scale(self.weight);
        }
        Ok((g, h))
    }
}

/// Eigenvalues below this fraction of the largest magnitude are lifted to it
/// in the saddle-free step.
const EIGEN_FLOOR: f64 = 1e-8;

/// Ascent step `V |Λ|⁻¹ Vᵀ g` for a model with gradient `grad` and symmetric
/// Hessian `h`. Near a strict local maximum this is the Newton step.
pub fn saddle_free_step(grad: &[f64], h: &Mat) -> Result<Vec<f64>> {
    if h.rows() != grad.len() {
        return Err(Error::DimensionMismatch {
            context: "saddle-free step",
            expected: grad.len(),
            found: h.rows(),
        });
    }
    let (vals, vecs) = symmetric_eigen(h)?;
    let top = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if top == 0.0 {
        return Ok(grad.to_vec());
    }
    let d = grad.len();
    let mut out = vec![0.0; d];
    for (j, &lambda) in vals.iter().enumerate() {
        let proj: f64 = (0..d).map(|i| vecs[(i, j)] * grad[i]).sum();
        let scale = proj / lambda.abs().max(EIGEN_FLOOR * top);
        for (i, o) in out.iter_mut().enumerate() {
            *o += scale * vecs[(i, j)];
        }
    }
    Ok(out)
}

/// Eigenvalues below this fraction of the largest magnitude are dropped by
/// [`truncated_newton`].
const TRUNCATION: f64 = 1e-8;

/// The Newton step restricted to the well-determined eigendirections of the
/// cost's Hessian. Where the Newton system is singular along a set of
/// stationary points (a zero-excess component under the squared cost), this
/// is the minimum-norm step onto that set; otherwise it is the Newton step.
pub fn truncated_newton(m: &MomentSet, case: CostCase) -> Result<Mat> {
    let n = m.dim();
    let h = symmetrize(&hessian_from_w(&case.assemble_w(m)?, n)?);
    // H = P̃ T M P̃ᵀ, so the permuted right-hand side is 4 Qᵀ off the diagonal.
    let rhs = off_diagonal(&case.stationarity(m).transpose().scale(4.0));
    let (vals, vecs) = symmetric_eigen(&h)?;
    let top = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let d = rhs.len();
    let mut out = vec![0.0; d];
    for (j, &lambda) in vals.iter().enumerate() {
        if top == 0.0 || lambda.abs() < TRUNCATION * top {
            continue;
        }
        let proj: f64 = (0..d).map(|i| vecs[(i, j)] * rhs[i]).sum();
        for (i, o) in out.iter_mut().enumerate() {
            *o += proj / lambda * vecs[(i, j)];
        }
    }
    Ok(from_off_diagonal(n, &out))
}

fn symmetrize(h: &Mat) -> Mat {
    Mat::from_fn(h.rows(), h.cols(), |i, j| 0.5 * (h[(i, j)] + h[(j, i)]))
}

fn off_diagonal_coords(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n * n).map(move |k| cs_entry(n, k)).filter(|(i, j)| i != j)
}

/// The off-diagonal entries in column-stacked order.
pub fn off_diagonal(a: &Mat) -> Vec<f64> {
    off_diagonal_coords(a.rows()).map(|ij| a[ij]).collect()
}

/// Inverse of [`off_diagonal`], with a zero diagonal.
pub fn from_off_diagonal(n: usize, v: &[f64]) -> Mat {
    let mut out = Mat::zeros(n, n);
    for (ij, &x) in off_diagonal_coords(n).zip(v) {
        out[ij] = x;
    }
    out
}
