//! The record written next to every separation run.

use std::fs;
use std::path::Path;

use cosetica_core::engine::{Damping, Globalization, Outcome, SeparationResult, SolverConfig, WarmStart};
use cosetica_core::CostCase;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::io::write_atomic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub input: String,
    /// SHA-256 of the input file's bytes, lowercase hex.
    pub input_sha256: String,
    pub centered: bool,
    pub config: ConfigRecord,
    pub outputs: OutputPaths,
    pub wall_time_s: f64,
    pub trace: TraceSummary,
}

/// Every solver setting, defaults included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigRecord {
    /// 1 = sum of kurtoses, 2 = sum of squared excess kurtoses.
    pub case: u8,
    pub tol_delta: f64,
    pub max_iters: usize,
    pub damping: String,
    pub max_step_norm: f64,
    pub warm_start: Option<WarmStartRecord>,
    /// Absent when the bare Newton iteration was requested.
    pub safeguard: Option<SafeguardRecord>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarmStartRecord {
    pub steps: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafeguardRecord {
    pub local_radius: f64,
    pub decorrelation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    pub unmixing: String,
    pub sources: String,
    pub trace: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    /// "converged", "max_iterations" or "failed: <reason>".
    pub outcome: String,
    pub newton_steps: usize,
    pub warm_start_steps: usize,
    pub final_delta_norm: Option<f64>,
    pub final_cost: Option<f64>,
    pub convergence_order: Option<f64>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl From<&SolverConfig> for ConfigRecord {
    fn from(cfg: &SolverConfig) -> Self {
        ConfigRecord {
            case: match cfg.cost_case {
                CostCase::Kurtosis => 1,
                CostCase::SquaredKurtosis => 2,
            },
            tol_delta: cfg.tol_delta,
            max_iters: cfg.max_iters,
            damping: match cfg.damping {
                Damping::None => "none",
                Damping::Halving => "halving",
            }
            .into(),
            max_step_norm: cfg.max_step_norm,
            warm_start: match cfg.warm_start {
                WarmStart::Off => None,
                WarmStart::Gradient { steps, rate } => Some(WarmStartRecord { steps, rate }),
            },
            safeguard: match cfg.globalization {
                Globalization::None => None,
                Globalization::Safeguarded {
                    local_radius,
                    decorrelation,
                } => Some(SafeguardRecord {
                    local_radius,
                    decorrelation,
                }),
            },
            seed: cfg.seed,
        }
    }
}

impl TryFrom<&ConfigRecord> for SolverConfig {
    type Error = CliError;

    fn try_from(r: &ConfigRecord) -> Result<Self> {
        Ok(SolverConfig {
            cost_case: parse_case(r.case)?,
            tol_delta: r.tol_delta,
            max_iters: r.max_iters,
            damping: parse_damping(&r.damping)?,
            max_step_norm: r.max_step_norm,
            warm_start: r.warm_start.map_or(WarmStart::Off, |w| WarmStart::Gradient {
                steps: w.steps,
                rate: w.rate,
            }),
            globalization: r.safeguard.map_or(Globalization::None, |s| Globalization::Safeguarded {
                local_radius: s.local_radius,
                decorrelation: s.decorrelation,
            }),
            seed: r.seed,
        })
    }
}

pub fn parse_case(case: u8) -> Result<CostCase> {
    match case {
        1 => Ok(CostCase::Kurtosis),
        2 => Ok(CostCase::SquaredKurtosis),
        other => Err(CliError::Usage(format!("case must be 1 or 2, got {other}"))),
    }
}

pub fn parse_damping(s: &str) -> Result<Damping> {
    match s {
        "none" => Ok(Damping::None),
        "halving" => Ok(Damping::Halving),
        other => Err(CliError::Usage(format!("damping must be none or halving, got {other:?}"))),
    }
}

impl TraceSummary {
    pub fn of(result: &SeparationResult) -> Self {
        let last = result.trace.steps.last();
        TraceSummary {
            outcome: match &result.outcome {
                Outcome::Converged => "converged".into(),
                Outcome::MaxIterations => "max_iterations".into(),
                Outcome::Failed(e) => format!("failed: {e}"),
            },
            newton_steps: result.trace.len(),
            warm_start_steps: result.warm_start_steps,
            final_delta_norm: last.and_then(|s| finite(s.delta_norm)),
            final_cost: last.and_then(|s| finite(s.cost)),
            convergence_order: result.convergence_order.and_then(finite),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl RunManifest {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        Self::from_json(&text)
    }
}
