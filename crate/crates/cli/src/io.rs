//! CSV in and out. Files hold one row per sample (or matrix row) and one
//! column per channel, under a header row; SignalMatrix is the transpose.

use std::fs;
use std::path::Path;

use cosetica_core::engine::{IterationTrace, StepKind};
use cosetica_core::{Mat, SignalMatrix};

use crate::error::{CliError, Result};

/// Shortest decimal that parses back to the same f64. Plain notation in the
/// usual range, exponent notation outside it.
pub fn format_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e16).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn channel_header(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("c{i}")).collect()
}

/// Reads a table of finite reals under a header row; returns the rows.
fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut rows = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { len, .. } => CliError::Parse {
                path: path.to_owned(),
                row: line,
                column: (*len as usize).min(header.len()) + 1,
                message: format!("expected {} fields, found {len}", header.len()),
            },
            _ => csv_error(path, e),
        })?;
        let mut row = Vec::with_capacity(record.len());
        for (j, field) in record.iter().enumerate() {
            let parse_err = |message: String| CliError::Parse {
                path: path.to_owned(),
                row: line,
                column: j + 1,
                message,
            };
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("not a number: {field:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(format!("non-finite value {field:?}")));
            }
            row.push(v);
        }
        rows.push(row);
    }
    Ok((header, rows))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let message = e.to_string();
    match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::Io {
            path: path.to_owned(),
            source,
        },
        _ => CliError::Csv {
            path: path.to_owned(),
            message,
        },
    }
}

/// Samples-by-channels CSV into a channels-by-samples SignalMatrix.
pub fn read_signals(path: &Path) -> Result<SignalMatrix> {
    let (header, rows) = read_table(path)?;
    let n = header.len();
    let s = rows.len();
    if s == 0 {
        return Err(CliError::Csv {
            path: path.to_owned(),
            message: "no samples".into(),
        });
    }
    let data = Mat::from_fn(n, s, |i, t| rows[t][i]);
    Ok(SignalMatrix::new(data)?)
}

pub fn read_matrix(path: &Path) -> Result<Mat> {
    let (header, rows) = read_table(path)?;
    Ok(Mat::from_fn(rows.len(), header.len(), |i, j| rows[i][j]))
}

fn write_rows<I>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let werr = |e: csv::Error| csv_error(path, e);
    writer.write_record(header).map_err(werr)?;
    for row in rows {
        writer.write_record(&row).map_err(werr)?;
    }
    let bytes = writer.into_inner().map_err(|e| CliError::Csv {
        path: path.to_owned(),
        message: e.to_string(),
    })?;
    write_atomic(path, &bytes)
}

/// Writes via a sibling temporary file and a rename, so readers never see
/// a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes).map_err(CliError::io(&tmp))?;
    fs::rename(&tmp, path).map_err(CliError::io(path))
}

/// Channels as columns, one row per sample.
pub fn write_signals(path: &Path, y: &SignalMatrix) -> Result<()> {
    let d = y.data();
    let rows = (0..y.samples()).map(|t| (0..y.channels()).map(|i| format_f64(d[(i, t)])).collect());
    write_rows(path, &channel_header(y.channels()), rows)
}

/// Row-major, header `c1..cN`.
pub fn write_matrix(path: &Path, m: &Mat) -> Result<()> {
    let rows = (0..m.rows()).map(|i| m.row(i).iter().map(|&v| format_f64(v)).collect());
    write_rows(path, &channel_header(m.cols()), rows)
}

pub fn step_kind_name(kind: StepKind) -> &'static str {
    match kind {
        StepKind::Newton => "newton",
        StepKind::TruncatedNewton => "truncated_newton",
        StepKind::GradientFallback => "gradient",
        StepKind::SaddleFree => "saddle_free",
    }
}

pub fn write_trace(path: &Path, trace: &IterationTrace) -> Result<()> {
    let header: Vec<String> = [
        "t",
        "delta_norm",
        "cost",
        "system_condition",
        "residual_norm",
        "damping_halvings",
        "kind",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let rows = trace.steps.iter().enumerate().map(|(t, s)| {
        vec![
            (t + 1).to_string(),
            format_f64(s.delta_norm),
            format_f64(s.cost),
            format_f64(s.system_condition),
            format_f64(s.residual_norm),
            s.damping_halvings.to_string(),
            step_kind_name(s.kind).to_string(),
        ]
    });
    write_rows(path, &header, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatting_round_trips() {
        for v in [0.0, -0.0, 1.0, 0.1, 1.0 / 3.0, 1e-300, -2.5e-7, 6.02e23, f64::MAX, f64::MIN_POSITIVE] {
            let s = format_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(format_f64(0.25), "0.25");
        assert_eq!(format_f64(1e-20), "1e-20");
    }
}
