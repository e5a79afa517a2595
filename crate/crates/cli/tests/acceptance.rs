//! Acceptance run: one PASS/FAIL line per criterion; any failure makes the
//! exit status nonzero.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use cosetica::commands::bench::{median, separate_and_score, solution_agreement, RunMetrics};
use cosetica::commands::check::{
    commutation_identity, gradient_deviation, hessian_deviation, model_remainder_slope, scale_deviation,
    CheckData, Fault, CASES, MODEL_MIN_SLOPE, SCALE_RTOL,
};
use cosetica_core::engine::{run, Outcome, SolverConfig, WarmStart};
use cosetica_core::eval::{generate_mixture, partial_amari_index, Distribution, Mixing, MixtureSpec};
use cosetica_core::moments::second_moments;
use cosetica_core::{center, estimate_moments, CostCase, CostModel, Mat, SignalMatrix};

const SEEDS: u64 = 10;
const FD_SEEDS: u64 = 20;
const FD_DIMS: [usize; 3] = [2, 3, 4];
const FD_SAMPLES: usize = 10_000;

struct Verdict {
    id: u32,
    passed: bool,
    detail: String,
}

fn verdict(id: u32, passed: bool, detail: impl Into<String>) -> Verdict {
    let v = Verdict {
        id,
        passed,
        detail: detail.into(),
    };
    println!(
        "{} criterion {}: {}",
        if v.passed { "PASS" } else { "FAIL" },
        v.id,
        v.detail
    );
    v
}

fn errored(id: u32, e: impl std::fmt::Display) -> Verdict {
    verdict(id, false, format!("error: {e}"))
}

fn mixture(distributions: Vec<Distribution>, seed: u64) -> MixtureSpec {
    MixtureSpec {
        distributions,
        mixing: Mixing::RandomCondition(20.0),
        samples: 100_000,
        seed,
    }
}

fn case_config(case: CostCase) -> SolverConfig {
    SolverConfig {
        cost_case: case,
        ..SolverConfig::default()
    }
}

fn commutation() -> Verdict {
    let started = Instant::now();
    let mut failed = 0;
    for n in [2, 3, 5, 8] {
        for seed in 0..100 {
            match commutation_identity(n, seed) {
                Ok(true) => {}
                Ok(false) => failed += 1,
                Err(e) => return errored(1, e),
            }
        }
    }
    let took = started.elapsed();
    verdict(
        1,
        failed == 0 && took < Duration::from_secs(5),
        format!("{failed}/400 mismatches, {:.2} s", took.as_secs_f64()),
    )
}

/// Worst normalized deviation over the FD grid, both cases.
fn fd_grid<F>(id: u32, limit: Duration, mut deviation: F) -> Verdict
where
    F: FnMut(CostCase, &CheckData) -> cosetica::Result<f64>,
{
    let started = Instant::now();
    let mut worst = 0.0f64;
    let mut count = 0;
    for n in FD_DIMS {
        for seed in 0..FD_SEEDS {
            let data = match CheckData::generate(n, seed, FD_SAMPLES) {
                Ok(d) => d,
                Err(e) => return errored(id, e),
            };
            for case in CASES {
                match deviation(case, &data) {
                    Ok(d) => worst = worst.max(d),
                    Err(e) => return errored(id, e),
                }
                count += 1;
            }
        }
    }
    let took = started.elapsed();
    verdict(
        id,
        worst <= 1.0 && took < limit,
        format!(
            "{count} configurations, worst deviation {worst:.3} of tolerance, {:.1} s",
            took.as_secs_f64()
        ),
    )
}

fn model_consistency() -> Verdict {
    let mut slopes = Vec::new();
    for case in CASES {
        for seed in 0..10 {
            let slope = CheckData::generate(3, seed, FD_SAMPLES)
                .and_then(|data| model_remainder_slope(case, &data, seed));
            match slope {
                Ok(s) => slopes.push(s),
                Err(e) => return errored(4, e),
            }
        }
    }
    let min = slopes.iter().copied().fold(f64::INFINITY, f64::min);
    verdict(
        4,
        min >= MODEL_MIN_SLOPE,
        format!("{} pairs, smallest slope {min:.3}", slopes.len()),
    )
}

fn scale_invariance() -> Verdict {
    let mut worst = 0.0f64;
    for seed in 0..50 {
        let n = 2 + (seed % 3) as usize;
        let data = match CheckData::generate(n, seed, FD_SAMPLES) {
            Ok(d) => d,
            Err(e) => return errored(5, e),
        };
        for case in CASES {
            match scale_deviation(case, &data, seed) {
                Ok(d) => worst = worst.max(d),
                Err(e) => return errored(5, e),
            }
        }
    }
    verdict(
        5,
        worst <= SCALE_RTOL,
        format!("50 seeds, largest relative change {worst:.2e}"),
    )
}

fn uniform_runs() -> cosetica::Result<Vec<RunMetrics>> {
    let cfg = SolverConfig::default();
    (0..SEEDS)
        .map(|seed| {
            let mx = generate_mixture(&mixture(vec![Distribution::Uniform; 3], seed))?;
            separate_and_score(&mx, seed, &cfg)
        })
        .collect()
}

fn separation(runs: &[RunMetrics]) -> Verdict {
    let mut amari: Vec<f64> = runs.iter().map(|r| r.amari).collect();
    let med = median(&mut amari).unwrap_or(f64::NAN);
    let max_iters = runs.iter().map(|r| r.iterations).max().unwrap_or(0);
    let slowest = runs.iter().map(|r| r.runtime_s).fold(0.0, f64::max);
    let converged = runs.iter().filter(|r| r.outcome == Outcome::Converged).count();
    verdict(
        6,
        med < 0.05 && max_iters <= 50 && slowest < 10.0,
        format!(
            "median Amari {med:.2e}, {converged}/{} converged, at most {max_iters} steps, slowest {slowest:.2} s",
            runs.len()
        ),
    )
}

fn convergence_order(runs: &[RunMetrics]) -> Verdict {
    let orders: Vec<Option<f64>> = runs.iter().map(|r| r.convergence_order).collect();
    let in_range = orders
        .iter()
        .filter(|o| o.is_some_and(|p| (1.7..=2.3).contains(&p)))
        .count();
    let estimable = orders.iter().filter(|o| o.is_some()).count();
    let shown: Vec<String> = orders
        .iter()
        .map(|o| o.map_or_else(|| "-".into(), |p| format!("{p:.2}")))
        .collect();
    verdict(
        7,
        in_range >= 8,
        format!(
            "{in_range}/{} seeds in [1.7, 2.3], {estimable} estimable; orders [{}]",
            runs.len(),
            shown.join(", ")
        ),
    )
}

fn gaussian_capture() -> Verdict {
    let dists = vec![Distribution::Uniform, Distribution::Uniform, Distribution::Gaussian];
    let (mut captured, mut case1) = (0, 0);
    for seed in 0..SEEDS {
        let scored = generate_mixture(&mixture(dists.clone(), seed)).and_then(|mx| {
            let x = center(&mx.mixed);
            let score = |case| {
                let r = run(&x, &Mat::identity(3), &case_config(case));
                let partial = partial_amari_index(&r.c_final, &mx.mixing, &[0, 1])?;
                Ok::<_, cosetica_core::Error>(r.converged() && partial < 0.1)
            };
            Ok((score(CostCase::SquaredKurtosis)?, score(CostCase::Kurtosis)?))
        });
        match scored {
            Ok((two, one)) => {
                captured += two as usize;
                case1 += one as usize;
            }
            Err(e) => return errored(8, e),
        }
    }
    verdict(
        8,
        captured >= 8,
        format!("squared cost {captured}/{SEEDS} seeds; kurtosis cost (recorded only) {case1}/{SEEDS}"),
    )
}

fn case_agreement() -> Verdict {
    let dists = vec![Distribution::Uniform, Distribution::Uniform, Distribution::Laplacian];
    let mut agreement = Vec::new();
    for seed in 0..SEEDS {
        let pair = generate_mixture(&mixture(dists.clone(), seed)).map_err(cosetica::CliError::from).and_then(|mx| {
            let one = separate_and_score(&mx, seed, &case_config(CostCase::Kurtosis))?;
            let two = separate_and_score(&mx, seed, &case_config(CostCase::SquaredKurtosis))?;
            solution_agreement(&one.c_final, &two.c_final)
        });
        match pair {
            Ok(a) => agreement.push(a),
            Err(e) => return errored(9, e),
        }
    }
    let worst = agreement.iter().copied().fold(0.0, f64::max);
    let med = median(&mut agreement).unwrap_or(f64::NAN);
    verdict(
        9,
        med < 1e-2,
        format!("median agreement {med:.2e}, worst {worst:.2e}"),
    )
}

/// ‖Q‖ at the unit-variance representative of C's coset.
fn stationarity_norm(c: &Mat, x: &SignalMatrix) -> cosetica_core::Result<f64> {
    let scales: Vec<f64> = second_moments(&x.transform(c)?)?
        .iter()
        .map(|m2| 1.0 / m2.sqrt())
        .collect();
    let m = estimate_moments(&x.transform(&(&Mat::diag(&scales) * c))?)?;
    Ok(CostCase::Kurtosis.stationarity(&m).frobenius_norm())
}

fn warm_start_refinement() -> Verdict {
    let warm = SolverConfig {
        warm_start: WarmStart::Gradient {
            steps: 20,
            rate: 0.05,
        },
        max_iters: 0,
        ..SolverConfig::default()
    };
    let mut ratios = Vec::new();
    for seed in 0..SEEDS {
        let ratio = generate_mixture(&mixture(vec![Distribution::Uniform; 3], seed)).and_then(|mx| {
            let x = center(&mx.mixed);
            let start = run(&x, &Mat::identity(3), &warm).c_final;
            let refined = run(&x, &start, &SolverConfig::default()).c_final;
            Ok(stationarity_norm(&start, &x)? / stationarity_norm(&refined, &x)?)
        });
        match ratio {
            Ok(r) => ratios.push(r),
            Err(e) => return errored(10, e),
        }
    }
    let least = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    verdict(
        10,
        least >= 10.0,
        format!("{SEEDS} seeds, smallest ‖Q‖ reduction {least:.2e}x"),
    )
}

fn main() -> ExitCode {
    let mut verdicts = vec![
        commutation(),
        fd_grid(2, Duration::from_secs(60), gradient_deviation),
        fd_grid(3, Duration::from_secs(300), |case, data| {
            hessian_deviation(case, data, Fault::None)
        }),
        model_consistency(),
        scale_invariance(),
    ];
    match uniform_runs() {
        Ok(runs) => {
            verdicts.push(separation(&runs));
            verdicts.push(convergence_order(&runs));
        }
        Err(e) => {
            verdicts.push(errored(6, &e));
            verdicts.push(errored(7, &e));
        }
    }
    verdicts.push(gaussian_capture());
    verdicts.push(case_agreement());
    verdicts.push(warm_start_refinement());

    let passed = verdicts.iter().filter(|v| v.passed).count();
    let failed: Vec<u32> = verdicts.iter().filter(|v| !v.passed).map(|v| v.id).collect();
    println!("{passed}/{} criteria passed", verdicts.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {failed:?}");
        ExitCode::FAILURE
    }
}
