//! The oracle validation suite: exact tensor identities, finite-difference
//! checks of the assembled derivatives, the quadratic model, scale
//! invariance and the fixed point.

use std::fmt;

use cosetica_core::engine::{hessian_from_w, step, SolverConfig};
use cosetica_core::eval::{
    direct_cost, fd_gradient, fd_hessian, generate_mixture, independent_oracle_moments,
    Distribution, Mixing, MixtureSpec,
};
use cosetica_core::expm::matrix_exp;
use cosetica_core::model::WTerms;
use cosetica_core::tensor::{build_p_tilde, build_t, cs, cs_entry, cs_inv, kron};
use cosetica_core::{estimate_moments, kurtosis, squared_kurtosis};
use cosetica_core::{CostCase, CostModel, Mat, MomentSet, SignalMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

pub const CASES: [CostCase; 2] = [CostCase::Kurtosis, CostCase::SquaredKurtosis];

/// FD step sizes for gradients and Hessians.
pub const FD_GRADIENT_STEP: f64 = 1e-5;
pub const FD_HESSIAN_STEP: f64 = 1e-3;

pub const GRADIENT_RTOL: f64 = 1e-4;
pub const GRADIENT_ATOL: f64 = 1e-8;
pub const HESSIAN_RTOL: f64 = 1e-3;
/// Hessian entries at or below this magnitude (on both sides) are skipped.
pub const HESSIAN_FLOOR: f64 = 1e-6;
pub const MODEL_MIN_SLOPE: f64 = 2.7;
pub const SCALE_RTOL: f64 = 1e-10;

/// Test-only corruption of the W assembly, used to confirm that the
/// Hessian check can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    /// Negates the 4(⊕V)T term.
    FlipWBlock,
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn random_matrix(r: &mut ChaCha8Rng, n: usize, scale: f64) -> Mat {
    Mat::from_fn(n, n, |_, _| scale * r.random_range(-1.0..1.0))
}

fn random_off_diagonal(r: &mut ChaCha8Rng, n: usize, scale: f64) -> Mat {
    let mut d = random_matrix(r, n, scale);
    for i in 0..n {
        d[(i, i)] = 0.0;
    }
    d
}

/// Mixed data with a state C away from any solution.
#[derive(Debug, Clone)]
pub struct CheckData {
    pub x: SignalMatrix,
    pub c: Mat,
}

impl CheckData {
    /// Sources cycle through uniform, Laplacian, two-point and Gaussian laws;
    /// the mixing has condition number 50 and C = I + 0.3·U(−1, 1).
    pub fn generate(n: usize, seed: u64, samples: usize) -> Result<Self> {
        let laws = [
            Distribution::Uniform,
            Distribution::Laplacian,
            Distribution::TwoPoint(0.3),
            Distribution::Gaussian,
        ];
        let x = generate_mixture(&MixtureSpec {
            distributions: (0..n).map(|i| laws[(i + seed as usize) % laws.len()]).collect(),
            mixing: Mixing::RandomCondition(50.0),
            samples,
            seed,
        })?
        .mixed;
        let c = &Mat::identity(n) + &random_matrix(&mut rng(seed, 1), n, 0.3);
        Ok(CheckData { x, c })
    }

    fn moments(&self) -> Result<MomentSet> {
        Ok(estimate_moments(&self.x.transform(&self.c)?)?)
    }
}

/// T(I⊗X)T = X⊗I, compared exactly.
pub fn commutation_identity(n: usize, seed: u64) -> Result<bool> {
    let x = random_matrix(&mut rng(seed, 2), n, 10.0);
    let t = build_t(n)?.matrix;
    let id = Mat::identity(n);
    Ok(&(&t * &kron(&id, &x)) * &t == kron(&x, &id))
}

pub fn cs_round_trip(n: usize, seed: u64) -> Result<bool> {
    let a = random_matrix(&mut rng(seed, 3), n, 10.0);
    Ok(cs_inv(&cs(&a)?) == a)
}

/// T cs(A) = cs(Aᵀ) and T² = I, exactly.
pub fn intertwiner(n: usize, seed: u64) -> Result<bool> {
    let a = random_matrix(&mut rng(seed, 4), n, 10.0);
    let t = build_t(n)?.matrix;
    Ok(t.mul_vec(cs(&a)?.as_slice()) == cs(&a.transpose())?.into_vec()
        && &t * &t == Mat::identity(n * n))
}

/// Largest off-diagonal gradient mismatch against central differences, in
/// units of the tolerance `rtol·max(|a|, |b|) + atol`; at most 1 passes.
pub fn gradient_deviation(case: CostCase, data: &CheckData) -> Result<f64> {
    let n = data.c.rows();
    let g = case.gradient_vec(&data.moments()?);
    let fd = fd_gradient(|c, x| direct_cost(case, c, x), &data.c, &data.x, FD_GRADIENT_STEP)?;
    Ok((0..n * n)
        .filter(|&k| {
            let (i, j) = cs_entry(n, k);
            i != j
        })
        .map(|k| {
            let (a, b) = (g[k], fd[k]);
            (a - b).abs() / (GRADIENT_RTOL * a.abs().max(b.abs()) + GRADIENT_ATOL)
        })
        .fold(0.0, f64::max))
}

fn assemble_w(case: CostCase, m: &MomentSet, fault: Fault) -> Result<Mat> {
    if fault == Fault::None {
        return Ok(case.assemble_w(m)?);
    }
    let mut terms: WTerms = match case {
        CostCase::Kurtosis => kurtosis::w_terms(&kurtosis::stats(m), m)?,
        CostCase::SquaredKurtosis => squared_kurtosis::w_terms(&squared_kurtosis::stats(m), m)?,
    };
    terms.block = terms.block.scale(-1.0);
    Ok(terms.sum())
}

/// Largest Hessian mismatch over entries above [`HESSIAN_FLOOR`], in units
/// of `rtol·max(|a|, |b|)`; at most 1 passes.
pub fn hessian_deviation(case: CostCase, data: &CheckData, fault: Fault) -> Result<f64> {
    let n = data.c.rows();
    let h = hessian_from_w(&assemble_w(case, &data.moments()?, fault)?, n)?;
    let sel = build_p_tilde(n)?.matrix;
    let full = fd_hessian(|c, x| direct_cost(case, c, x), &data.c, &data.x, FD_HESSIAN_STEP)?;
    let fd = &(&sel * &full) * &sel.transpose();
    let mut worst = 0.0f64;
    for i in 0..h.rows() {
        for j in 0..h.cols() {
            let (a, b) = (h[(i, j)], fd[(i, j)]);
            let size = a.abs().max(b.abs());
            if size > HESSIAN_FLOOR {
                worst = worst.max((a - b).abs() / (HESSIAN_RTOL * size));
            }
        }
    }
    Ok(worst)
}

/// The step sizes t at which the quadratic model's remainder is sampled.
pub fn model_steps() -> [f64; 5] {
    [1e-1, 10f64.powf(-1.5), 1e-2, 10f64.powf(-2.5), 1e-3]
}

/// Log–log slope of |f(e^{tΔ} C) − model(tΔ)| against t, for a random
/// zero-diagonal direction Δ.
pub fn model_remainder_slope(case: CostCase, data: &CheckData, seed: u64) -> Result<f64> {
    let n = data.c.rows();
    let delta = random_off_diagonal(&mut rng(seed, 5), n, 0.5);
    let m = data.moments()?;
    let mut pts = Vec::new();
    for t in model_steps() {
        let d = delta.scale(t);
        let exact = direct_cost(case, &(&matrix_exp(&d)? * &data.c), &data.x);
        let rem = (exact - case.quadratic_model(&d, &m)).abs();
        pts.push((t.ln(), rem.ln()));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(sxy / sxx)
}

fn rel(a: &Mat, b: &Mat) -> f64 {
    a.max_abs_diff(b) / a.max_abs().max(b.max_abs()).max(f64::MIN_POSITIVE)
}

/// Largest relative change under a random positive row scaling D of C, with
/// scales log-uniform in [0.1, 10]: the cost literally; Q and the raw solved
/// Δ after transport by D(·)D⁻¹; the engine step's ‖Δ‖ literally and its
/// next iterate as D·C_next.
pub fn scale_deviation(case: CostCase, data: &CheckData, seed: u64) -> Result<f64> {
    let n = data.c.rows();
    let mut r = rng(seed, 6);
    let scales: Vec<f64> = (0..n).map(|_| 10f64.powf(r.random_range(-1.0..1.0))).collect();
    let d = Mat::diag(&scales);
    let d_inv = Mat::diag(&scales.iter().map(|s| 1.0 / s).collect::<Vec<_>>());
    let dc = &d * &data.c;
    let m = data.moments()?;
    let md = estimate_moments(&data.x.transform(&dc)?)?;
    let transport = |a: &Mat| &(&d * a) * &d_inv;

    let (f, fd) = (case.value(&m), case.value(&md));
    let mut worst = (f - fd).abs() / f.abs();
    worst = worst.max(rel(&transport(&case.stationarity(&m)), &case.stationarity(&md)));
    let delta = case.solve_delta(&m)?.delta;
    worst = worst.max(rel(&transport(&delta), &case.solve_delta(&md)?.delta));

    let cfg = SolverConfig {
        cost_case: case,
        ..SolverConfig::default()
    };
    let (next, rec) = step(&data.c, &data.x, &cfg)?;
    let (next_d, rec_d) = step(&dc, &data.x, &cfg)?;
    worst = worst.max((rec.delta_norm - rec_d.delta_norm).abs() / rec.delta_norm);
    worst = worst.max(rel(&(&d * &next), &next_d));
    Ok(worst)
}

/// Exactly independent population moments give Q = 0 and Δ = 0.
pub fn fixed_point(case: CostCase, n: usize) -> Result<bool> {
    let laws = [1.8, 6.0, 1.0, 3.0, 2.2];
    let m = independent_oracle_moments(&(0..n).map(|i| laws[i % laws.len()]).collect::<Vec<_>>())?;
    let q = case.stationarity(&m);
    let delta = case.solve_delta(&m)?.delta;
    Ok(q.max_abs() == 0.0 && delta == Mat::zeros(n, n))
}

#[derive(Debug, Clone)]
pub struct CheckOptions {
    pub dims: Vec<usize>,
    pub seeds: u64,
    pub samples: usize,
    pub fault: Fault,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            dims: vec![2, 3, 4],
            seeds: 3,
            samples: 10_000,
            fault: Fault::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub suite: &'static str,
    pub case: Option<CostCase>,
    pub dim: usize,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let case = match self.case {
            None => "-",
            Some(CostCase::Kurtosis) => "1",
            Some(CostCase::SquaredKurtosis) => "2",
        };
        write!(
            f,
            "{:<4} {:<20} case {case} N={:<2} {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.suite,
            self.dim,
            self.detail
        )
    }
}

fn row(
    suite: &'static str,
    case: Option<CostCase>,
    dim: usize,
    outcome: Result<(bool, String)>,
) -> CheckRow {
    let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    CheckRow {
        suite,
        case,
        dim,
        passed,
        detail,
    }
}

/// Worst value of a per-seed measurement, or the first error.
fn worst_over<F>(seeds: u64, mut f: F) -> Result<f64>
where
    F: FnMut(u64) -> Result<f64>,
{
    let mut worst = f64::NEG_INFINITY;
    for seed in 0..seeds {
        worst = worst.max(f(seed)?);
    }
    Ok(worst)
}

fn all_seeds<F>(seeds: u64, mut f: F) -> Result<(bool, String)>
where
    F: FnMut(u64) -> Result<bool>,
{
    let mut failed = 0;
    for seed in 0..seeds {
        if !f(seed)? {
            failed += 1;
        }
    }
    Ok((failed == 0, format!("{failed}/{seeds} seeds failed")))
}

/// Runs every suite for every dimension in `opts.dims`.
pub fn run_checks(opts: &CheckOptions) -> Vec<CheckRow> {
    let mut rows = Vec::new();
    for &n in &opts.dims {
        let seeds = opts.seeds.max(1);
        rows.push(row("commutation_identity", None, n, all_seeds(seeds, |s| commutation_identity(n, s))));
        rows.push(row("cs_bijective", None, n, all_seeds(seeds, |s| cs_round_trip(n, s))));
        rows.push(row("t_involution", None, n, all_seeds(seeds, |s| intertwiner(n, s))));
        let data: Vec<Result<CheckData>> = (0..seeds)
            .map(|s| CheckData::generate(n, s, opts.samples))
            .collect();
        let get = |s: u64| match &data[s as usize] {
            Ok(d) => Ok(d),
            Err(e) => Err(crate::error::CliError::Usage(e.to_string())),
        };
        for case in CASES {
            let c = Some(case);
            let g = worst_over(seeds, |s| gradient_deviation(case, get(s)?));
            rows.push(row("gradient_fd", c, n, g.map(|w| (w <= 1.0, format!("worst {w:.3} of tolerance")))));
            let h = worst_over(seeds, |s| hessian_deviation(case, get(s)?, opts.fault));
            rows.push(row("hessian_fd", c, n, h.map(|w| (w <= 1.0, format!("worst {w:.3} of tolerance")))));
            let slope = worst_over(seeds, |s| Ok(-model_remainder_slope(case, get(s)?, s)?)).map(|v| -v);
            rows.push(row(
                "quadratic_model",
                c,
                n,
                slope.map(|v| (v >= MODEL_MIN_SLOPE, format!("min remainder slope {v:.3}"))),
            ));
            let sc = worst_over(seeds, |s| scale_deviation(case, get(s)?, s));
            rows.push(row("scale_invariance", c, n, sc.map(|w| (w <= SCALE_RTOL, format!("max rel change {w:.1e}")))));
            rows.push(row("fixed_point", c, n, fixed_point(case, n).map(|ok| (ok, String::new()))));
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn injected_fault_is_caught() {
        let data = CheckData::generate(3, 0, 5_000).unwrap();
        for case in CASES {
            assert!(hessian_deviation(case, &data, Fault::None).unwrap() <= 1.0);
            assert!(hessian_deviation(case, &data, Fault::FlipWBlock).unwrap() > 1.0);
        }
    }
}
