//! Benchmark plumbing and independent oracles: synthetic mixtures, the Amari
//! index, finite-difference derivatives of the exact cost, and the population
//! moments of independent sources.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::mat::{pairwise_sum, Lu, Mat};
use crate::model::CostCase;
use crate::moments::{MomentSet, SignalMatrix};
use crate::tensor::{cs_index, gradient_slot, VecMat};

/// Zero-mean, unit-variance source distributions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    /// Uniform on [−√3, √3]; κ = 9/5.
    Uniform,
    /// Laplace with scale 1/√2; κ = 6.
    Laplacian,
    /// κ = 3.
    Gaussian,
    /// ±1 with equal probability; κ = 1.
    Rademacher,
    /// Two-point law taking its upper value with probability p.
    TwoPoint(f64),
}

impl Distribution {
    /// Population kurtosis E(X⁴)/E(X²)².
    pub fn kurtosis(&self) -> f64 {
        match *self {
            Distribution::Uniform => 1.8,
            Distribution::Laplacian => 6.0,
            Distribution::Gaussian => 3.0,
            Distribution::Rademacher => 1.0,
            Distribution::TwoPoint(p) => {
                let a = (1.0 - p) / p;
                let b = p / (1.0 - p);
                p * a * a + (1.0 - p) * b * b
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Distribution::TwoPoint(p) if !(p > 0.0 && p < 1.0) => Err(Error::InvalidParameter(
                "two-point probability must lie in (0, 1)",
            )),
            _ => Ok(()),
        }
    }
}

/// How the mixing matrix is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum Mixing {
    /// Random Gaussian entries, redrawn until the 2-norm condition number is
    /// at most the target.
    RandomCondition(f64),
    Explicit(Mat),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    pub distributions: Vec<Distribution>,
    pub mixing: Mixing,
    pub samples: usize,
    pub seed: u64,
}

impl MixtureSpec {
    pub fn n_sources(&self) -> usize {
        self.distributions.len()
    }
}

/// A generated benchmark instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    /// X = A S
    pub mixed: SignalMatrix,
    pub mixing: Mat,
    pub sources: SignalMatrix,
}

const MIXING_ATTEMPTS: usize = 100;

/// Stream 0 draws the mixing matrix; stream j + 1 draws source j.
fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Uniform on the open interval (0, 1).
fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = open_unit(rng);
    let u2 = open_unit(rng);
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
}

fn draw(dist: Distribution, rng: &mut ChaCha8Rng) -> f64 {
    match dist {
        Distribution::Uniform => libm::sqrt(3.0) * (2.0 * open_unit(rng) - 1.0),
        Distribution::Laplacian => {
            let u = open_unit(rng) - 0.5;
            let b = core::f64::consts::FRAC_1_SQRT_2;
            let mag = -b * libm::log(1.0 - 2.0 * u.abs());
            if u < 0.0 {
                -mag
            } else {
                mag
            }
        }
        Distribution::Gaussian => standard_normal(rng),
        Distribution::Rademacher => {
            if rng.next_u64() >> 63 == 1 {
                1.0
            } else {
                -1.0
            }
        }
        Distribution::TwoPoint(p) => {
            if open_unit(rng) < p {
                libm::sqrt((1.0 - p) / p)
            } else {
                -libm::sqrt(p / (1.0 - p))
            }
        }
    }
}

/// Singular values by one-sided Jacobi rotations, descending.
pub fn singular_values(a: &Mat) -> Vec<f64> {
    let (m, n) = (a.rows(), a.cols());
    let mut u = a.clone();
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..m {
                    alpha += u[(i, p)] * u[(i, p)];
                    beta += u[(i, q)] * u[(i, q)];
                    gamma += u[(i, p)] * u[(i, q)];
                }
                if gamma == 0.0 {
                    continue;
                }
                off = off.max(gamma.abs() / libm::sqrt(alpha * beta));
                let zeta = (beta - alpha) / (2.0 * gamma);
                let sign = if zeta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                for i in 0..m {
                    let up = u[(i, p)];
                    let uq = u[(i, q)];
                    u[(i, p)] = c * up - s * uq;
                    u[(i, q)] = s * up + c * uq;
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    let mut sv: Vec<f64> = (0..n)
        .map(|j| libm::sqrt((0..m).map(|i| u[(i, j)] * u[(i, j)]).sum()))
        .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    sv
}

/// 2-norm condition number σ_max / σ_min.
pub fn condition_number(a: &Mat) -> f64 {
    let sv = singular_values(a);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Draws sources and mixes them. Deterministic given the seed.
pub fn generate_mixture(spec: &MixtureSpec) -> Result<Mixture> {
    let n = spec.n_sources();
    if n == 0 {
        return Err(Error::ZeroDimension {
            context: "number of sources",
        });
    }
    for d in &spec.distributions {
        d.validate()?;
    }
    let mixing = match &spec.mixing {
        Mixing::Explicit(a) => {
            if a.rows() != n || a.cols() != n {
                return Err(Error::DimensionMismatch {
                    context: "explicit mixing matrix",
                    expected: n,
                    found: a.rows().max(a.cols()),
                });
            }
            a.clone()
        }
        Mixing::RandomCondition(target) => {
            if !(*target >= 1.0) {
                return Err(Error::InvalidParameter("condition target must be >= 1"));
            }
            let mut rng = stream(spec.seed, 0);
            let mut found = None;
            for _ in 0..MIXING_ATTEMPTS {
                let a = Mat::from_fn(n, n, |_, _| standard_normal(&mut rng));
                if condition_number(&a) <= *target {
                    found = Some(a);
                    break;
                }
            }
            found.ok_or(Error::ConditionUnreachable {
                target: *target,
                attempts: MIXING_ATTEMPTS,
            })?
        }
    };
    let s = spec.samples;
    let mut data = Vec::with_capacity(n * s);
    for (j, &dist) in spec.distributions.iter().enumerate() {
        let mut rng = stream(spec.seed, j as u64 + 1);
        data.extend((0..s).map(|_| draw(dist, &mut rng)));
    }
    let sources = SignalMatrix::new(Mat::from_vec(n, s, data)?)?;
    let mixed = sources.transform(&mixing)?;
    Ok(Mixture {
        mixed,
        mixing,
        sources,
    })
}

/// Amari index of G = C A: zero exactly when G is a scaled permutation.
pub fn amari_index(c: &Mat, a: &Mat) -> Result<f64> {
    amari_of(&c.try_mul(a)?)
}

/// Amari index of an already formed global matrix G.
///
/// Rows are first normalized by their largest magnitude, so the score is
/// invariant to the row scaling of C as well as to row order; without that
/// step the column term would depend on the arbitrary scale of each output.
pub fn amari_of(g: &Mat) -> Result<f64> {
    if !g.is_square() {
        return Err(Error::NotSquare {
            context: "amari_index",
            rows: g.rows(),
            cols: g.cols(),
        });
    }
    let n = g.rows();
    if n < 2 {
        return Ok(0.0);
    }
    let mut abs = g.map(f64::abs);
    let mut rows_term = 0.0;
    for i in 0..n {
        let max = abs.row(i).iter().cloned().fold(0.0, f64::max);
        if max == 0.0 {
            return Err(Error::ZeroLine {
                context: "amari_index row",
                index: i,
            });
        }
        for v in abs.row_mut(i) {
            *v /= max;
        }
        rows_term += abs.row(i).iter().sum::<f64>() - 1.0;
    }
    let mut cols_term = 0.0;
    for j in 0..n {
        let max = (0..n).map(|i| abs[(i, j)]).fold(0.0, f64::max);
        if max == 0.0 {
            return Err(Error::ZeroLine {
                context: "amari_index column",
                index: j,
            });
        }
        cols_term += (0..n).map(|i| abs[(i, j)]).sum::<f64>() / max - 1.0;
    }
    Ok((rows_term + cols_term) / (2.0 * n as f64 * (n as f64 - 1.0)))
}

/// Amari-type score restricted to a subset of sources.
///
/// For each source in `subset` the recovered row that carries the largest
/// share of it is selected. The score averages the normalized row leakage of
/// those rows over all sources with the column leakage of each subset source
/// over the selected rows. It is zero exactly when each subset source is
/// recovered, up to scale, by its own row free of every other source.
pub fn partial_amari_index(c: &Mat, a: &Mat, subset: &[usize]) -> Result<f64> {
    let g = c.try_mul(a)?.map(f64::abs);
    let n = g.rows();
    let k = subset.len();
    if k == 0 || subset.iter().any(|&j| j >= n) {
        return Err(Error::InvalidParameter("subset must name existing sources"));
    }
    let row_max: Vec<f64> = (0..n).map(|i| g.row(i).iter().cloned().fold(0.0, f64::max)).collect();
    let mut rows = Vec::with_capacity(k);
    for &j in subset {
        let best = (0..n)
            .filter(|&i| row_max[i] > 0.0)
            .max_by(|&a, &b| {
                (g[(a, j)] / row_max[a])
                    .partial_cmp(&(g[(b, j)] / row_max[b]))
                    .unwrap_or(core::cmp::Ordering::Equal)
            })
            .ok_or(Error::ZeroLine {
                context: "partial_amari_index row",
                index: j,
            })?;
        rows.push(best);
    }
    let row_term: f64 = rows
        .iter()
        .map(|&i| g.row(i).iter().sum::<f64>() / row_max[i] - 1.0)
        .sum::<f64>()
        / (k as f64 * (n as f64 - 1.0));
    let col_term = if k > 1 {
        subset
            .iter()
            .map(|&j| {
                let share = |i: usize| g[(i, j)] / row_max[i];
                let max = rows.iter().map(|&i| share(i)).fold(0.0, f64::max);
                rows.iter().map(|&i| share(i)).sum::<f64>() / max - 1.0
            })
            .sum::<f64>()
            / (k as f64 * (k as f64 - 1.0))
    } else {
        0.0
    };
    Ok(0.5 * (row_term + col_term))
}

/// Population moments of independent, symmetric, unit-variance sources with
/// the given kurtoses: R¹ = U^(0,i) = I, R³ = diag(κ), U^(2,i) = diag with κ_i
/// at (i, i) and 1 elsewhere on the diagonal.
pub fn independent_oracle_moments(kappas: &[f64]) -> Result<MomentSet> {
    let n = kappas.len();
    if n == 0 {
        return Err(Error::ZeroDimension {
            context: "independent_oracle_moments",
        });
    }
    if kappas.iter().any(|&k| !(k > 0.0)) {
        return Err(Error::InvalidParameter("oracle kurtoses must be positive"));
    }
    let u2 = (0..n)
        .map(|i| Mat::diag(&(0..n).map(|j| if j == i { kappas[i] } else { 1.0 }).collect::<Vec<_>>()))
        .collect();
    Ok(MomentSet {
        second: vec![1.0; n],
        sigma2: vec![1.0; n],
        fourth: kappas.to_vec(),
        sigma4: kappas.iter().map(|&k| libm::pow(k, 0.25)).collect(),
        r1: Mat::identity(n),
        r3: Mat::diag(kappas),
        u0: vec![Mat::identity(n); n],
        u2,
        kappa: kappas.to_vec(),
    })
}

/// Exact cost of `Y = C X` evaluated directly from the samples, without the
/// moment tables used by the Newton machinery.
pub fn direct_cost(case: CostCase, c: &Mat, x: &SignalMatrix) -> f64 {
    let y = c.try_mul(x.data()).expect("unmixing matrix matches data");
    let s = y.cols() as f64;
    let mut squares = vec![0.0; y.cols()];
    let mut fourths = vec![0.0; y.cols()];
    (0..y.rows())
        .map(|i| {
            for (t, &v) in y.row(i).iter().enumerate() {
                squares[t] = v * v;
                fourths[t] = squares[t] * squares[t];
            }
            let m2 = pairwise_sum(&squares) / s;
            let m4 = pairwise_sum(&fourths) / s;
            let kappa = m4 / (m2 * m2);
            match case {
                CostCase::Kurtosis => kappa,
                CostCase::SquaredKurtosis => (kappa - 3.0) * (kappa - 3.0),
            }
        })
        .sum()
}

/// e^A by its Taylor series; only used for the tiny arguments of the
/// finite-difference oracles.
fn taylor_exp(a: &Mat) -> Mat {
    let n = a.rows();
    let mut term = Mat::identity(n);
    let mut sum = Mat::identity(n);
    for k in 1..30 {
        term = (&term * a).scale(1.0 / k as f64);
        sum = &sum + &term;
        if term.max_abs() == 0.0 {
            break;
        }
    }
    sum
}

fn unit(n: usize, k: usize, l: usize) -> Mat {
    let mut e = Mat::zeros(n, n);
    e[(k, l)] = 1.0;
    e
}

fn shifted<F: Fn(&Mat, &SignalMatrix) -> f64>(
    costfn: &F,
    c: &Mat,
    x: &SignalMatrix,
    delta: &Mat,
) -> f64 {
    costfn(&(&taylor_exp(delta) * c), x)
}

fn check_step(h: f64) -> Result<()> {
    if (1e-7..=1e-2).contains(&h) {
        Ok(())
    } else {
        Err(Error::InvalidParameter("finite-difference step must lie in [1e-7, 1e-2]"))
    }
}

/// Central differences of t ↦ costfn(e^{t E_kl} C, x), returned in gradient
/// slot order (∂/∂Δ_{kl} at slot l + N(k−1)).
pub fn fd_gradient<F>(costfn: F, c: &Mat, x: &SignalMatrix, h: f64) -> Result<VecMat>
where
    F: Fn(&Mat, &SignalMatrix) -> f64,
{
    check_step(h)?;
    let n = c.rows();
    let mut g = vec![0.0; n * n];
    for k in 0..n {
        for l in 0..n {
            let e = unit(n, k, l);
            let plus = shifted(&costfn, c, x, &e.scale(h));
            let minus = shifted(&costfn, c, x, &e.scale(-h));
            g[gradient_slot(n, k, l)] = (plus - minus) / (2.0 * h);
        }
    }
    VecMat::new(g)
}

/// Second differences over pairs of off-diagonal directions, indexed by
/// `cs` position of Δ (row/column cs_index(k, l) for Δ_{kl}). Rows and
/// columns of diagonal coordinates are left zero.
///
/// The central stencils at `h` and `h/2` are Richardson-combined, which
/// cancels the O(h²) error. Plain second differences leave a truncation
/// error near 10⁻⁶ at h = 10⁻⁴ on entries that are exactly zero, and a
/// smaller step only trades it for rounding noise.
pub fn fd_hessian<F>(costfn: F, c: &Mat, x: &SignalMatrix, h: f64) -> Result<Mat>
where
    F: Fn(&Mat, &SignalMatrix) -> f64,
{
    check_step(h)?;
    let coarse = second_differences(&costfn, c, x, h);
    let fine = second_differences(&costfn, c, x, 0.5 * h);
    Ok((&fine.scale(4.0) - &coarse).scale(1.0 / 3.0))
}

fn second_differences<F>(costfn: &F, c: &Mat, x: &SignalMatrix, h: f64) -> Mat
where
    F: Fn(&Mat, &SignalMatrix) -> f64,
{
    let n = c.rows();
    let coords: Vec<(usize, usize)> = (0..n)
        .flat_map(|l| (0..n).map(move |k| (k, l)))
        .filter(|(k, l)| k != l)
        .collect();
    let mut hess = Mat::zeros(n * n, n * n);
    let f0 = costfn(c, x);
    for (ai, &(k1, l1)) in coords.iter().enumerate() {
        let ea = unit(n, k1, l1);
        let a = cs_index(n, k1, l1);
        let fp = shifted(costfn, c, x, &ea.scale(h));
        let fm = shifted(costfn, c, x, &ea.scale(-h));
        hess[(a, a)] = (fp - 2.0 * f0 + fm) / (h * h);
        for &(k2, l2) in &coords[ai + 1..] {
            let eb = unit(n, k2, l2);
            let b = cs_index(n, k2, l2);
            let pp = shifted(costfn, c, x, &(&ea + &eb).scale(h));
            let pm = shifted(costfn, c, x, &(&ea - &eb).scale(h));
            let mp = shifted(costfn, c, x, &(&eb - &ea).scale(h));
            let mm = shifted(costfn, c, x, &(&ea + &eb).scale(-h));
            let v = (pp - pm - mp + mm) / (4.0 * h * h);
            hess[(a, b)] = v;
            hess[(b, a)] = v;
        }
    }
    hess
}

/// A one-line summary of how well `c` separates a known mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub amari_index: f64,
    pub per_channel_kurtosis: Vec<f64>,
    pub cost_case1: f64,
    pub cost_case2: f64,
}

pub fn score(c: &Mat, mixture: &Mixture) -> Result<ScoreReport> {
    let amari_index = amari_index(c, &mixture.mixing)?;
    let y = mixture.mixed.transform(c)?;
    let m = crate::moments::estimate_moments(&y)?;
    Ok(ScoreReport {
        amari_index,
        per_channel_kurtosis: m.kappa.clone(),
        cost_case1: crate::kurtosis::cost(&m),
        cost_case2: crate::squared_kurtosis::cost(&m),
    })
}

/// Determinant via LU, 0 for singular input.
pub fn determinant(a: &Mat) -> f64 {
    Lu::factor(a).map_or(0.0, |lu| lu.determinant())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn amari_examples() {
        let a = Mat::from_rows(&[[2.0, 1.0], [1.0, 3.0]]);
        let c = Lu::factor(&a).unwrap().inverse();
        assert!(amari_index(&c, &a).unwrap() < 1e-15);
        let g = Mat::from_rows(&[[0.0, 3.0], [-2.0, 0.0]]);
        assert_eq!(amari_of(&g).unwrap(), 0.0);
        let ones = Mat::from_rows(&[[1.0, 1.0], [1.0, 1.0]]);
        assert_eq!(amari_of(&ones).unwrap(), 1.0);
        let zero_row = Mat::from_rows(&[[1.0, 1.0], [0.0, 0.0]]);
        assert!(matches!(amari_of(&zero_row), Err(Error::ZeroLine { .. })));
    }

    #[test]
    fn partial_amari_ignores_gaussian_row() {
        // Sources 0 and 1 cleanly recovered, row 2 is an arbitrary blend.
        let g = Mat::from_rows(&[[2.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.5, 0.7, 1.0]]);
        assert_eq!(partial_amari_index(&g, &Mat::identity(3), &[0, 1]).unwrap(), 0.0);
        assert!(partial_amari_index(&g, &Mat::identity(3), &[0, 1, 2]).unwrap() > 0.0);
    }

    #[test]
    fn oracle_moments_are_consistent() {
        let m = independent_oracle_moments(&[1.8, 3.0, 6.0]).unwrap();
        for i in 0..3 {
            assert_eq!(m.r3[(i, i)], m.kappa[i]);
            assert_eq!(m.u2[i], m.u2[i].transpose());
        }
        assert!(independent_oracle_moments(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn singular_values_of_known_matrix() {
        let a = Mat::from_rows(&[[3.0, 0.0], [4.0, 5.0]]);
        // AᵀA = [[25, 20], [20, 25]] → σ² ∈ {45, 5}
        let sv = singular_values(&a);
        assert!((sv[0] - libm::sqrt(45.0)).abs() < 1e-12);
        assert!((sv[1] - libm::sqrt(5.0)).abs() < 1e-12);
        assert!((condition_number(&a) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn two_point_kurtosis() {
        assert!((Distribution::TwoPoint(0.5).kurtosis() - 1.0).abs() < 1e-15);
        assert!(Distribution::TwoPoint(1.5).validate().is_err());
    }

    #[test]
    fn identity_mixing_keeps_sources() {
        let spec = MixtureSpec {
            distributions: vec![Distribution::Uniform, Distribution::Laplacian],
            mixing: Mixing::Explicit(Mat::identity(2)),
            samples: 100,
            seed: 3,
        };
        let m = generate_mixture(&spec).unwrap();
        assert_eq!(m.mixed, m.sources);
        assert_eq!(generate_mixture(&spec).unwrap(), m);
    }

    #[test]
    fn fd_step_is_range_checked() {
        let x = SignalMatrix::from_rows(&[[1.0, -1.0, 0.5], [0.2, 0.3, -0.9]]).unwrap();
        let f = |c: &Mat, x: &SignalMatrix| direct_cost(CostCase::Kurtosis, c, x);
        assert!(fd_gradient(f, &Mat::identity(2), &x, 1.0).is_err());
        assert!(fd_hessian(f, &Mat::identity(2), &x, 1e-9).is_err());
    }

    #[test]
    fn fd_hessian_of_quadratic_is_exact_to_rounding() {
        // f(C) = Σ_{ij} w_ij C_ij² around C = I; along E_kl with k ≠ l,
        // e^{Σ t E} ≈ I + Σ t E to second order for distinct off-diagonal pairs
        // sharing no index, so the Hessian is 2 w_kl on the diagonal.
        let w = Mat::from_rows(&[[0.0, 1.5], [0.25, 0.0]]);
        let x = SignalMatrix::from_rows(&[[1.0, -1.0], [1.0, 1.0]]).unwrap();
        let f = move |c: &Mat, _: &SignalMatrix| {
            let mut s = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    s += w[(i, j)] * c[(i, j)] * c[(i, j)];
                }
            }
            s
        };
        let h = fd_hessian(f, &Mat::identity(2), &x, 1e-3).unwrap();
        // Δ_{12} sits at cs position 2, Δ_{21} at 1 (0-based).
        assert!((h[(2, 2)] - 3.0).abs() < 1e-6, "{h:?}");
        assert!((h[(1, 1)] - 0.5).abs() < 1e-6);
    }
}
