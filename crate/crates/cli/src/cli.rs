//! Argument parsing and dispatch. Exit codes: 0 success (converged), 2 not
//! converged, 1 any error, usage errors included.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use cosetica_core::engine::{Globalization, SolverConfig, WarmStart};

use crate::commands::bench::{bench, write_report, BenchGrid};
use crate::commands::check::{run_checks, CheckOptions, Fault};
use crate::commands::separate::{separate, SeparateOptions};
use crate::commands::synth::{mixture_spec, synth, SynthOptions};
use crate::error::{CliError, Result};
use crate::manifest::{parse_case, parse_damping};

#[derive(Debug, Parser)]
#[command(name = "cosetica", version, about = "Prewhitening-free kurtosis ICA by Newton steps on the scaling coset")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Separate the channels of a CSV file (rows = samples).
    Separate(SeparateArgs),
    /// Write a synthetic mixture with known mixing matrix.
    Synth(SynthArgs),
    /// Run the oracle validation suite.
    Check(CheckArgs),
    /// Generate, separate and score over a grid of seeds.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SeparateArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// 1: sum of kurtoses; 2: sum of squared excess kurtoses.
    #[arg(long, default_value_t = 1)]
    pub case: u8,
    #[arg(long, default_value_t = SolverConfig::default().tol_delta)]
    pub tol: f64,
    #[arg(long, default_value_t = SolverConfig::default().max_iters)]
    pub max_iters: usize,
    #[arg(long, default_value = "halving", value_parser = ["none", "halving"])]
    pub damping: String,
    #[arg(long, default_value_t = SolverConfig::default().max_step_norm)]
    pub max_step_norm: f64,
    /// Relative-gradient steps before Newton, as `<steps>:<rate>`.
    #[arg(long)]
    pub warm_start: Option<String>,
    /// Use the data as given instead of removing channel means.
    #[arg(long)]
    pub no_center: bool,
    /// Plain Newton steps with no global safeguard.
    #[arg(long)]
    pub no_safeguard: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub sources: usize,
    /// Comma list of uniform, laplacian, gaussian, rademacher, two_point:<p>;
    /// a single name applies to every source.
    #[arg(long, default_value = "uniform")]
    pub dist: String,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    /// Condition number of the random mixing matrix.
    #[arg(long, default_value_t = 10.0)]
    pub cond: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [2, 3, 4])]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    pub seeds: u64,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Print passing rows too.
    #[arg(long)]
    pub verbose: bool,
    #[arg(long, hide = true)]
    pub inject_w_fault: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// e.g. "sources=3;dist=uniform;samples=100000;cond=20;seeds=10;case=both"
    #[arg(long, default_value = "")]
    pub grid: String,
    /// Fill the convergence_order column.
    #[arg(long)]
    pub order_fit: bool,
    #[arg(long, default_value = "bench.csv")]
    pub out: PathBuf,
}

fn parse_warm_start(s: &str) -> Result<WarmStart> {
    let bad = || CliError::Usage(format!("warm start must be <steps>:<rate>, got {s:?}"));
    let (n, rate) = s.split_once(':').ok_or_else(bad)?;
    Ok(WarmStart::Gradient {
        steps: n.parse().map_err(|_| bad())?,
        rate: rate.parse().map_err(|_| bad())?,
    })
}

impl SeparateArgs {
    pub fn config(&self) -> Result<SolverConfig> {
        let cfg = SolverConfig {
            cost_case: parse_case(self.case)?,
            tol_delta: self.tol,
            max_iters: self.max_iters,
            damping: parse_damping(&self.damping)?,
            max_step_norm: self.max_step_norm,
            warm_start: match &self.warm_start {
                Some(s) => parse_warm_start(s)?,
                None => WarmStart::Off,
            },
            globalization: if self.no_safeguard {
                Globalization::None
            } else {
                Globalization::default()
            },
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Separate(args) => {
            let opts = SeparateOptions {
                config: args.config()?,
                input: args.input,
                center: !args.no_center,
                out_dir: args.out_dir,
            };
            let report = separate(&opts)?;
            let t = &report.manifest.trace;
            println!(
                "{}: {} Newton steps, final |Delta| {}",
                t.outcome,
                t.newton_steps,
                t.final_delta_norm.map_or("-".into(), |v| format!("{v:.3e}"))
            );
            Ok(report.exit_code())
        }
        Command::Synth(args) => {
            let spec = mixture_spec(args.sources, &args.dist, args.samples, args.cond, args.seed)?;
            synth(&SynthOptions {
                spec,
                out_dir: args.out_dir,
            })?;
            Ok(0)
        }
        Command::Check(args) => {
            let opts = CheckOptions {
                dims: args.dims,
                seeds: args.seeds,
                samples: args.samples,
                fault: if args.inject_w_fault {
                    Fault::FlipWBlock
                } else {
                    Fault::None
                },
            };
            let rows = run_checks(&opts);
            let failed = rows.iter().filter(|r| !r.passed).count();
            for r in rows.iter().filter(|r| args.verbose || !r.passed) {
                println!("{r}");
            }
            println!("{} checks, {failed} failed", rows.len());
            Ok(if failed == 0 { 0 } else { 1 })
        }
        Command::Bench(args) => {
            let grid = BenchGrid::parse(&args.grid)?;
            let report = bench(&grid, &SolverConfig::default())?;
            write_report(&args.out, &report, args.order_fit)?;
            for &case in &grid.cases {
                if let Some(m) = report.median_amari(case) {
                    println!("case {case:?}: median Amari {m:.4}");
                }
            }
            if let Some(m) = report.median_agreement() {
                println!("median agreement between cases {m:.2e}");
            }
            Ok(0)
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
