use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cosetica_core::engine::{run, Outcome, SeparationResult, SolverConfig};
use cosetica_core::{center, Mat};

use crate::error::{CliError, Result};
use crate::io::{read_signals, write_matrix, write_signals, write_trace};
use crate::manifest::{sha256_hex, ConfigRecord, OutputPaths, RunManifest, TraceSummary};

pub const MIN_CHANNELS: usize = 2;
pub const MIN_SAMPLES: usize = 100;

#[derive(Debug, Clone)]
pub struct SeparateOptions {
    pub input: PathBuf,
    pub config: SolverConfig,
    pub center: bool,
    pub out_dir: PathBuf,
}

#[derive(Debug)]
pub struct SeparateReport {
    pub result: SeparationResult,
    pub manifest: RunManifest,
}

impl SeparateReport {
    /// 0 converged, 2 stopped at the iteration cap, 1 failed.
    pub fn exit_code(&self) -> i32 {
        match self.result.outcome {
            Outcome::Converged => 0,
            Outcome::MaxIterations => 2,
            Outcome::Failed(_) => 1,
        }
    }
}

/// Runs the separation from C0 = I and writes `C.csv`, `sources.csv`,
/// `trace.csv` and `manifest.json` into the output directory. Outputs are
/// written for every outcome, including failed runs.
pub fn separate(opts: &SeparateOptions) -> Result<SeparateReport> {
    let started = Instant::now();
    let bytes = fs::read(&opts.input).map_err(CliError::io(&opts.input))?;
    let x = read_signals(&opts.input)?;
    if x.channels() < MIN_CHANNELS || x.samples() < MIN_SAMPLES {
        return Err(CliError::Csv {
            path: opts.input.clone(),
            message: format!(
                "need at least {MIN_CHANNELS} channels and {MIN_SAMPLES} samples, found {} and {}",
                x.channels(),
                x.samples()
            ),
        });
    }
    let x = if opts.center { center(&x) } else { x };
    let result = run(&x, &Mat::identity(x.channels()), &opts.config);

    fs::create_dir_all(&opts.out_dir).map_err(CliError::io(&opts.out_dir))?;
    let path = |name: &str| opts.out_dir.join(name);
    write_matrix(&path("C.csv"), &result.c_final)?;
    write_signals(&path("sources.csv"), &result.y)?;
    write_trace(&path("trace.csv"), &result.trace)?;
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        input: display(&opts.input),
        input_sha256: sha256_hex(&bytes),
        centered: opts.center,
        config: ConfigRecord::from(&opts.config),
        outputs: OutputPaths {
            unmixing: display(&path("C.csv")),
            sources: display(&path("sources.csv")),
            trace: display(&path("trace.csv")),
        },
        wall_time_s: started.elapsed().as_secs_f64(),
        trace: TraceSummary::of(&result),
    };
    manifest.write(&path("manifest.json"))?;
    Ok(SeparateReport { result, manifest })
}

fn display(p: &Path) -> String {
    p.display().to_string()
}
