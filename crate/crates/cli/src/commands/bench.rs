//! generate → separate → score over a grid of seeds.

use std::path::Path;
use std::time::Instant;

use cosetica_core::engine::{run, Outcome, SolverConfig};
use cosetica_core::eval::{amari_index, amari_of, generate_mixture, Distribution, Mixture, MixtureSpec, Mixing};
use cosetica_core::mat::Lu;
use cosetica_core::{center, CostCase, Mat};

use crate::commands::synth::parse_distributions;
use crate::error::{CliError, Result};
use crate::io::{format_f64, write_atomic};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchGrid {
    pub sources: usize,
    pub distributions: Vec<Distribution>,
    pub samples: usize,
    pub cond: f64,
    pub seeds: std::ops::Range<u64>,
    pub cases: Vec<CostCase>,
}

impl Default for BenchGrid {
    fn default() -> Self {
        BenchGrid {
            sources: 3,
            distributions: vec![Distribution::Uniform; 3],
            samples: 100_000,
            cond: 20.0,
            seeds: 0..10,
            cases: vec![CostCase::Kurtosis],
        }
    }
}

impl BenchGrid {
    /// `key=value` pairs separated by `;` or whitespace. Keys: `sources`,
    /// `dist` (comma list or one name), `samples`, `cond`, `seeds` (a count
    /// or `a..b`), `case` (`1`, `2` or `both`). Unset keys keep the default
    /// grid: 3 uniform sources, S = 10⁵, condition 20, seeds 0..10, case 1.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut grid = BenchGrid::default();
        let mut dist = None;
        for pair in spec.split(|c: char| c == ';' || c.is_whitespace()).filter(|p| !p.is_empty()) {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("grid entry {pair:?} is not key=value")))?;
            let bad = || CliError::Usage(format!("bad grid value {pair:?}"));
            match key {
                "sources" => grid.sources = value.parse().map_err(|_| bad())?,
                "dist" => dist = Some(value.to_owned()),
                "samples" => grid.samples = value.parse().map_err(|_| bad())?,
                "cond" => grid.cond = value.parse().map_err(|_| bad())?,
                "seeds" => {
                    grid.seeds = match value.split_once("..") {
                        Some((a, b)) => a.parse().map_err(|_| bad())?..b.parse().map_err(|_| bad())?,
                        None => 0..value.parse().map_err(|_| bad())?,
                    }
                }
                "case" => {
                    grid.cases = match value {
                        "1" => vec![CostCase::Kurtosis],
                        "2" => vec![CostCase::SquaredKurtosis],
                        "both" => vec![CostCase::Kurtosis, CostCase::SquaredKurtosis],
                        _ => return Err(bad()),
                    }
                }
                _ => return Err(CliError::Usage(format!("unknown grid key {key:?}"))),
            }
        }
        if grid.sources < 2 {
            return Err(CliError::Usage("need at least 2 sources".into()));
        }
        grid.distributions = parse_distributions(dist.as_deref().unwrap_or("uniform"), grid.sources)?;
        Ok(grid)
    }

    pub fn spec(&self, seed: u64) -> MixtureSpec {
        MixtureSpec {
            distributions: self.distributions.clone(),
            mixing: Mixing::RandomCondition(self.cond),
            samples: self.samples,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunMetrics {
    pub seed: u64,
    pub case: CostCase,
    pub outcome: Outcome,
    pub iterations: usize,
    pub amari: f64,
    pub convergence_order: Option<f64>,
    pub runtime_s: f64,
    pub c_final: Mat,
}

/// Separates a centered mixture from C0 = I and scores it against the
/// true mixing.
pub fn separate_and_score(mixture: &Mixture, seed: u64, cfg: &SolverConfig) -> Result<RunMetrics> {
    let started = Instant::now();
    let x = center(&mixture.mixed);
    let result = run(&x, &Mat::identity(x.channels()), cfg);
    let runtime_s = started.elapsed().as_secs_f64();
    Ok(RunMetrics {
        seed,
        case: cfg.cost_case,
        amari: amari_index(&result.c_final, &mixture.mixing)?,
        iterations: result.trace.len(),
        convergence_order: result.convergence_order,
        outcome: result.outcome,
        runtime_s,
        c_final: result.c_final,
    })
}

/// Amari index of C₁ C₂⁻¹: zero when both unmixing matrices recover the
/// same components up to scale and order.
pub fn solution_agreement(c1: &Mat, c2: &Mat) -> Result<f64> {
    let inv = Lu::factor(c2)?.inverse();
    Ok(amari_of(&c1.try_mul(&inv)?)?)
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub runs: Vec<RunMetrics>,
    /// Per seed, when both cases ran.
    pub agreement: Vec<(u64, f64)>,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let k = values.len();
    Some(if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    })
}

impl BenchReport {
    pub fn median_amari(&self, case: CostCase) -> Option<f64> {
        median(&mut self.runs.iter().filter(|r| r.case == case).map(|r| r.amari).collect::<Vec<_>>())
    }

    pub fn median_agreement(&self) -> Option<f64> {
        median(&mut self.agreement.iter().map(|a| a.1).collect::<Vec<_>>())
    }
}

pub fn bench(grid: &BenchGrid, base: &SolverConfig) -> Result<BenchReport> {
    let mut runs = Vec::new();
    let mut agreement = Vec::new();
    for seed in grid.seeds.clone() {
        let mixture = generate_mixture(&grid.spec(seed))?;
        let mut finals = Vec::new();
        for &case in &grid.cases {
            let cfg = SolverConfig {
                cost_case: case,
                ..base.clone()
            };
            let m = separate_and_score(&mixture, seed, &cfg)?;
            finals.push(m.c_final.clone());
            runs.push(m);
        }
        if finals.len() == 2 {
            agreement.push((seed, solution_agreement(&finals[0], &finals[1])?));
        }
    }
    Ok(BenchReport { runs, agreement })
}

fn outcome_name(o: &Outcome) -> &'static str {
    match o {
        Outcome::Converged => "converged",
        Outcome::MaxIterations => "max_iterations",
        Outcome::Failed(_) => "failed",
    }
}

/// One row per run: seed, case, outcome, iterations, amari,
/// convergence_order (only with `order_fit`), runtime_s, case_agreement.
pub fn write_report(path: &Path, report: &BenchReport, order_fit: bool) -> Result<()> {
    let mut out = String::from("seed,case,outcome,iterations,amari,convergence_order,runtime_s,case_agreement\n");
    for r in &report.runs {
        let order = match (order_fit, r.convergence_order) {
            (true, Some(o)) => format_f64(o),
            (true, None) => "not_estimable".into(),
            (false, _) => String::new(),
        };
        let agree = report
            .agreement
            .iter()
            .find(|a| a.0 == r.seed)
            .map_or(String::new(), |a| format_f64(a.1));
        let case = match r.case {
            CostCase::Kurtosis => 1,
            CostCase::SquaredKurtosis => 2,
        };
        out.push_str(&format!(
            "{},{case},{},{},{},{order},{},{agree}\n",
            r.seed,
            outcome_name(&r.outcome),
            r.iterations,
            format_f64(r.amari),
            format_f64(r.runtime_s)
        ));
    }
    write_atomic(path, out.as_bytes())
}
