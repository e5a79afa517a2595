//! The outer iteration C_t = e^{Δ_t} C_{t−1} and its diagnostics.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::expm::matrix_exp;
use crate::mat::{symmetric_eigen, Lu, Mat};
use crate::model::{system_matrix, CostCase, CostModel};
use crate::moments::{
    estimate_moments, sample_kurtosis, second_moment_matrix, second_moments, MomentSet,
    SignalMatrix,
};
use crate::safeguard::{from_off_diagonal, saddle_free_step, truncated_newton, Merit};
use crate::tensor::{build_p_tilde, build_t};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Damping {
    None,
    /// Halve Δ until ‖Δ‖ ≤ `max_step_norm`.
    #[default]
    Halving,
}

/// How steps far from a solution are safeguarded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Globalization {
    /// Plain Newton steps; a refused Newton system falls back to a
    /// relative-gradient step.
    None,
    /// The plain Newton step whenever its norm is at most `local_radius` and
    /// the merit of [`crate::safeguard`] is locally concave; if the Newton
    /// system is refused, the truncated Newton step of
    /// [`crate::safeguard::truncated_newton`] under the same conditions.
    /// Otherwise a saddle-free ascent step on the merit of
    /// [`crate::safeguard`] with barrier weight `decorrelation`, halved until
    /// the merit does not decrease.
    Safeguarded {
        local_radius: f64,
        decorrelation: f64,
    },
}

impl Default for Globalization {
    fn default() -> Self {
        Globalization::Safeguarded {
            local_radius: 0.1,
            decorrelation: 10.0,
        }
    }
}

/// Optional first-order phase run before the Newton iterations.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum WarmStart {
    #[default]
    Off,
    /// `steps` relative-gradient steps Δ = rate · G.
    Gradient { steps: usize, rate: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub cost_case: CostCase,
    /// Stop once ‖Δ_t‖_F falls below this.
    pub tol_delta: f64,
    pub max_iters: usize,
    pub damping: Damping,
    pub max_step_norm: f64,
    pub warm_start: WarmStart,
    pub globalization: Globalization,
    /// Recorded with results; the solver itself draws no random numbers.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            cost_case: CostCase::Kurtosis,
            tol_delta: 1e-8,
            max_iters: 200,
            damping: Damping::Halving,
            max_step_norm: 1.0,
            warm_start: WarmStart::Off,
            globalization: Globalization::default(),
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_delta > 0.0) {
            return Err(Error::InvalidParameter("tol_delta must be positive"));
        }
        if !(self.max_step_norm > 0.0) {
            return Err(Error::InvalidParameter("max_step_norm must be positive"));
        }
        if !(self.tol_delta < self.max_step_norm) {
            return Err(Error::InvalidParameter("tol_delta must be below max_step_norm"));
        }
        if let Globalization::Safeguarded {
            local_radius,
            decorrelation,
        } = self.globalization
        {
            if !(local_radius >= 0.0) || !(decorrelation >= 0.0 && decorrelation.is_finite()) {
                return Err(Error::InvalidParameter(
                    "safeguard radius and barrier weight must be non-negative",
                ));
            }
        }
        if let WarmStart::Gradient { rate, .. } = self.warm_start {
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(Error::InvalidParameter("warm-start rate must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Newton,
    /// Relative-gradient step taken because the Newton system was refused.
    GradientFallback,
    /// Newton step over the well-determined directions of a refused system.
    TruncatedNewton,
    /// Global-phase step on the merit function.
    SaddleFree,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// Frobenius norm of the applied Δ.
    pub delta_norm: f64,
    /// Cost at the start of the step.
    pub cost: f64,
    pub system_condition: f64,
    pub residual_norm: f64,
    /// Halvings from the step-norm cap and from backtracking together.
    pub damping_halvings: u32,
    pub kind: StepKind,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IterationTrace {
    pub steps: Vec<StepRecord>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn delta_norms(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.delta_norm).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Converged,
    MaxIterations,
    Failed(Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationResult {
    pub c_final: Mat,
    pub y: SignalMatrix,
    pub trace: IterationTrace,
    pub outcome: Outcome,
    pub warm_start_steps: usize,
    pub convergence_order: Option<f64>,
}

impl SeparationResult {
    pub fn converged(&self) -> bool {
        self.outcome == Outcome::Converged
    }
}

/// Ascent direction of the kurtosis contrast used by the warm start and the
/// fallback step; zero diagonal.
///
/// Row k of Δ only moves component k at first order, and ∂κ_k/∂Δ_{kl} is
/// −4 Q_{lk}. For the squared-excess cost the direction is its gradient; for
/// the plain sum each row is signed by its excess, so both drive every
/// component away from Gaussian kurtosis.
pub fn relative_gradient(m: &MomentSet, case: CostCase) -> Mat {
    let q = case.stationarity(m);
    let n = q.rows();
    Mat::from_fn(n, n, |k, l| {
        if k == l {
            return 0.0;
        }
        let g = -4.0 * q[(l, k)];
        match case {
            CostCase::Kurtosis => {
                if m.kappa[k] >= 3.0 {
                    g
                } else {
                    -g
                }
            }
            CostCase::SquaredKurtosis => g,
        }
    })
}

fn apply_damping(delta: Mat, cfg: &SolverConfig) -> (Mat, u32) {
    let mut delta = delta;
    let mut halvings = 0;
    if cfg.damping == Damping::Halving {
        while delta.frobenius_norm() > cfg.max_step_norm && halvings < 1000 {
            delta = delta.scale(0.5);
            halvings += 1;
        }
    }
    (delta, halvings)
}

/// Solves for the Newton step at the given statistics and applies the
/// damping policy.
pub fn newton_delta(m: &MomentSet, cfg: &SolverConfig) -> Result<(Mat, StepRecord)> {
    let cost = cfg.cost_case.value(m);
    let solved = cfg.cost_case.solve_delta(m)?;
    let (delta, halvings) = apply_damping(solved.delta, cfg);
    let record = StepRecord {
        delta_norm: delta.frobenius_norm(),
        cost,
        system_condition: solved.system_condition,
        residual_norm: solved.residual_norm,
        damping_halvings: halvings,
        kind: StepKind::Newton,
    };
    Ok((delta, record))
}

/// One update: returns `e^Δ C` and the step record.
///
/// With [`Globalization::None`] this is the bare Newton step and a refused
/// system is an error; with [`Globalization::Safeguarded`] the step is
/// chosen and backtracked as described there.
///
/// The step is computed at the representative of C's coset whose outputs
/// have unit second moments, so the recorded ‖Δ‖, the step-norm cap and the
/// stopping rule do not depend on the row scaling of C. With D that
/// rescaling, the applied update is `e^{D⁻¹ Δ D} C`.
pub fn step(c: &Mat, x: &SignalMatrix, cfg: &SolverConfig) -> Result<(Mat, StepRecord)> {
    let scales: Vec<f64> = second_moments(&x.transform(c)?)?
        .iter()
        .map(|m2| 1.0 / libm::sqrt(*m2))
        .collect();
    let c_unit = &Mat::diag(&scales) * c;
    let m = estimate_moments(&x.transform(&c_unit)?)?;
    let (next_unit, record) = match cfg.globalization {
        Globalization::None => {
            let (delta, record) = newton_delta(&m, cfg)?;
            (&matrix_exp(&delta)? * &c_unit, record)
        }
        Globalization::Safeguarded {
            local_radius,
            decorrelation,
        } => safeguarded_step(&c_unit, x, &m, cfg, local_radius, decorrelation)?,
    };
    let unscale: Vec<f64> = scales.iter().map(|s| 1.0 / s).collect();
    Ok((&Mat::diag(&unscale) * &next_unit, record))
}

/// Backtracking gives up after this many halvings and takes the last trial.
const MAX_BACKTRACKS: u32 = 40;

fn safeguarded_step(
    c: &Mat,
    x: &SignalMatrix,
    m: &MomentSet,
    cfg: &SolverConfig,
    local_radius: f64,
    decorrelation: f64,
) -> Result<(Mat, StepRecord)> {
    let case = cfg.cost_case;
    let cost = case.value(m);
    let local = |delta: Mat, condition: f64, residual: f64, kind: StepKind| {
        let (delta, halvings) = apply_damping(delta, cfg);
        let record = StepRecord {
            delta_norm: delta.frobenius_norm(),
            cost,
            system_condition: condition,
            residual_norm: residual,
            damping_halvings: halvings,
            kind,
        };
        Ok((&matrix_exp(&delta)? * c, record))
    };
    // Concavity keeps the pure Newton iteration away from the saddles of
    // the cost, which attract it as strongly as its maxima do.
    let merit = Merit::new(case, &m.kappa, decorrelation);
    let (grad, h) = merit.model(m)?;
    let concave = symmetric_eigen(&h)
        .map(|(vals, _)| vals.last().is_some_and(|&top| top < 0.0))
        .unwrap_or(false);
    let condition = match case.solve_delta(m) {
        Ok(newton) if concave && newton.delta.frobenius_norm() <= local_radius => {
            return local(
                newton.delta,
                newton.system_condition,
                newton.residual_norm,
                StepKind::Newton,
            );
        }
        Ok(newton) => newton.system_condition,
        Err(Error::IllConditioned { condition }) if concave => {
            let delta = truncated_newton(m, case)?;
            if delta.frobenius_norm() <= local_radius {
                return local(delta, condition, f64::NAN, StepKind::TruncatedNewton);
            }
            condition
        }
        Err(Error::IllConditioned { condition }) => condition,
        Err(e) => return Err(e),
    };

    let solved = from_off_diagonal(m.dim(), &saddle_free_step(&grad, &h)?);
    let (mut delta, mut halvings) = apply_damping(solved, cfg);
    let start = merit.value(&m.kappa, &m.u0[0].scale(m.second[0]));
    let slack = 1e-12 * start.abs().max(1.0);
    let mut next = &matrix_exp(&delta)? * c;
    if delta.frobenius_norm() > 0.0 {
        let mut backtracks = 0;
        while backtracks < MAX_BACKTRACKS {
            let y = x.transform(&next)?;
            let value = merit.value(&sample_kurtosis(&y)?, &second_moment_matrix(&y));
            if value >= start - slack {
                break;
            }
            delta = delta.scale(0.5);
            backtracks += 1;
            next = &matrix_exp(&delta)? * c;
        }
        halvings += backtracks;
    }
    let record = StepRecord {
        delta_norm: delta.frobenius_norm(),
        cost,
        system_condition: condition,
        residual_norm: f64::NAN,
        damping_halvings: halvings,
        kind: StepKind::SaddleFree,
    };
    Ok((next, record))
}

fn gradient_step(
    c: &Mat,
    x: &SignalMatrix,
    cfg: &SolverConfig,
    rate: f64,
) -> Result<(Mat, StepRecord)> {
    let y = x.transform(c)?;
    let m = estimate_moments(&y)?;
    let g = relative_gradient(&m, cfg.cost_case).scale(rate);
    let capped = SolverConfig {
        damping: Damping::Halving,
        ..cfg.clone()
    };
    let (delta, halvings) = apply_damping(g, &capped);
    let record = StepRecord {
        delta_norm: delta.frobenius_norm(),
        cost: cfg.cost_case.value(&m),
        system_condition: f64::NAN,
        residual_norm: f64::NAN,
        damping_halvings: halvings,
        kind: StepKind::GradientFallback,
    };
    Ok((&matrix_exp(&delta)? * c, record))
}

/// Rate of the gradient step taken when a Newton system is refused and no
/// warm-start rate is configured.
pub const FALLBACK_RATE: f64 = 0.05;

/// Newton iterations capped at this many consecutive fallback steps before
/// the run is declared failed.
const MAX_CONSECUTIVE_FALLBACKS: usize = 20;

/// Runs the warm start (if any) and then Newton steps until ‖Δ‖ < tol or
/// `max_iters` steps have been taken.
pub fn run(x: &SignalMatrix, c0: &Mat, cfg: &SolverConfig) -> SeparationResult {
    let mut c = c0.clone();
    let mut trace = IterationTrace::default();
    let mut warm_start_steps = 0;

    let finish = |c: Mat, trace: IterationTrace, outcome: Outcome, warm: usize| {
        let y = x.transform(&c).unwrap_or_else(|_| x.clone());
        let convergence_order = convergence_order(&trace).ok();
        SeparationResult {
            c_final: c,
            y,
            trace,
            outcome,
            warm_start_steps: warm,
            convergence_order,
        }
    };

    if let Err(e) = cfg.validate() {
        return finish(c, trace, Outcome::Failed(e), 0);
    }
    if c0.rows() != x.channels() || !c0.is_square() {
        let e = Error::DimensionMismatch {
            context: "initial unmixing matrix",
            expected: x.channels(),
            found: c0.rows(),
        };
        return finish(c, trace, Outcome::Failed(e), 0);
    }

    let fallback_rate = match cfg.warm_start {
        WarmStart::Gradient { steps, rate } => {
            for _ in 0..steps {
                match gradient_step(&c, x, cfg, rate) {
                    Ok((next, _)) => c = next,
                    Err(e) => return finish(c, trace, Outcome::Failed(e), warm_start_steps),
                }
                warm_start_steps += 1;
            }
            rate
        }
        WarmStart::Off => FALLBACK_RATE,
    };

    let mut fallbacks = 0;
    for _ in 0..cfg.max_iters {
        match step(&c, x, cfg) {
            Ok((next, record)) => {
                fallbacks = 0;
                c = next;
                let done = record.delta_norm < cfg.tol_delta;
                trace.steps.push(record);
                if done {
                    return finish(c, trace, Outcome::Converged, warm_start_steps);
                }
            }
            Err(Error::IllConditioned { condition }) if fallbacks < MAX_CONSECUTIVE_FALLBACKS => {
                fallbacks += 1;
                match gradient_step(&c, x, cfg, fallback_rate) {
                    Ok((next, mut record)) => {
                        record.system_condition = condition;
                        c = next;
                        trace.steps.push(record);
                    }
                    Err(e) => return finish(c, trace, Outcome::Failed(e), warm_start_steps),
                }
            }
            Err(e) => return finish(c, trace, Outcome::Failed(e), warm_start_steps),
        }
    }
    finish(c, trace, Outcome::MaxIterations, warm_start_steps)
}

/// Hessian of Δ ↦ f(e^Δ C) in the off-diagonal coordinates, obtained as
/// P̃ T ((I−P) W (I−P) + P) P̃ᵀ.
pub fn hessian_at(c: &Mat, x: &SignalMatrix, case: CostCase) -> Result<Mat> {
    let m = estimate_moments(&x.transform(c)?)?;
    hessian_from_w(&case.assemble_w(&m)?, m.dim())
}

/// The off-diagonal Hessian for an already assembled W.
pub fn hessian_from_w(w: &Mat, n: usize) -> Result<Mat> {
    let t = build_t(n)?.matrix;
    let sel = build_p_tilde(n)?.matrix;
    let h = &t * &system_matrix(w)?;
    Ok(&(&sel * &h) * &sel.transpose())
}

/// Window of step norms treated as the asymptotic regime.
pub const ORDER_WINDOW: (f64, f64) = (1e-13, 1e-2);

/// Empirical convergence order: least-squares slope of log‖Δ_{t+1}‖ against
/// log‖Δ_t‖ over consecutive pairs whose first norm lies strictly inside
/// [`ORDER_WINDOW`]. Needs at least two such pairs; a quadratically
/// converging run typically leaves only two or three norms in the window.
pub fn convergence_order(trace: &IterationTrace) -> Result<f64> {
    convergence_order_of(&trace.delta_norms())
}

pub fn convergence_order_of(norms: &[f64]) -> Result<f64> {
    let (lo, hi) = ORDER_WINDOW;
    let pairs: Vec<(f64, f64)> = norms
        .windows(2)
        .filter(|w| w[0] > lo && w[0] < hi && w[1] > 0.0)
        .map(|w| (libm::log(w[0]), libm::log(w[1])))
        .collect();
    if pairs.len() < 2 {
        return Err(Error::NotEstimable {
            pairs: pairs.len(),
            required: 2,
        });
    }
    let k = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::NotEstimable {
            pairs: pairs.len(),
            required: 2,
        });
    }
    Ok(sxy / sxx)
}

/// Checks the invariant on final unmixing matrices: finite entries and a
/// determinant that has not collapsed relative to the entry scale.
pub fn is_nondegenerate(c: &Mat) -> bool {
    if !c.is_finite() {
        return false;
    }
    let n = c.rows() as i32;
    let scale = c.max_abs();
    match Lu::factor(c) {
        Ok(lu) => lu.determinant().abs() > 1e-30 * libm::pow(scale, n as f64),
        Err(_) => false,
    }
}
