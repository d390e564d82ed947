//! CSV persistence. Numbers are written with 17 significant digits so every
//! `f64` reads back bit for bit.
//!
//! Matrix files start with a `rows=R,cols=C` line followed by `R` rows of
//! `C` comma-separated values.

use std::fmt::Write as _;
use std::path::Path;

use lcid_core::IterationRecord;
use nalgebra::{DMatrix, DVector};

use crate::bench::{MetricsRecord, SummaryRow};
use crate::error::{LcidError, Result};

/// Round-trip exact decimal form.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = format!("rows={},cols={}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_f64(m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn parse_header(path: &Path, line: &str) -> Result<(usize, usize)> {
    let bad = || LcidError::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: format!("expected header `rows=R,cols=C`, found {line:?}"),
    };
    let mut rows = None;
    let mut cols = None;
    for part in line.trim().split(',') {
        let (key, value) = part.split_once('=').ok_or_else(bad)?;
        let value: usize = value.trim().parse().map_err(|_| bad())?;
        match key.trim() {
            "rows" => rows = Some(value),
            "cols" => cols = Some(value),
            _ => return Err(bad()),
        }
    }
    match (rows, cols) {
        (Some(r), Some(c)) if r > 0 && c > 0 => Ok((r, c)),
        _ => Err(bad()),
    }
}

pub fn parse_matrix(path: &Path, text: &str) -> Result<DMatrix<f64>> {
    let (header, body) = text.split_once('\n').unwrap_or((text, ""));
    let (rows, cols) = parse_header(path, header)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(body.as_bytes());
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for record in reader.records() {
        let record = record.map_err(|e| LcidError::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line() + 1),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() + 1);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        seen += 1;
        if seen > rows {
            return Err(LcidError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("more than the declared {rows} rows"),
            });
        }
        if record.len() != cols {
            return Err(LcidError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected {cols} values, found {}", record.len()),
            });
        }
        for field in record.iter() {
            let value: f64 = field.parse().map_err(|_| LcidError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("not a number: {field:?}"),
            })?;
            data.push(value);
        }
    }
    if seen != rows {
        return Err(LcidError::Parse {
            path: path.to_path_buf(),
            line: seen as u64 + 1,
            message: format!("declared {rows} rows, found {seen}"),
        });
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| LcidError::io(path, e))?;
    parse_matrix(path, &text)
}

/// Column vector stored as an `R×1` matrix file.
pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    let m = read_matrix(path)?;
    if m.ncols() != 1 {
        return Err(LcidError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected a single column, found {}", m.ncols()),
        });
    }
    Ok(m.column(0).into_owned())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| LcidError::io(path, e))
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    write_text(path, &matrix_to_csv(m))
}

pub fn write_vector(path: &Path, v: &DVector<f64>) -> Result<()> {
    write_matrix(path, &DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
}

pub const TRACE_HEADER: &str = "iter,objective,mu_h,mu_phi,fim_fit_error,constraint_residual";

pub fn trace_to_csv(trace: &[IterationRecord]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in trace {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.iter,
            fmt_f64(r.objective),
            fmt_f64(r.mu_h),
            fmt_f64(r.mu_phi),
            fmt_f64(r.fim_fit_error),
            fmt_f64(r.constraint_residual)
        );
    }
    out
}

pub const RECORDS_HEADER: &str =
    "method,snr,run,nrmse,v_app,mu_phi,mu_h,fim_fit_error,wall_time_s,status";

pub fn records_to_csv(records: &[MetricsRecord]) -> String {
    let mut out = String::from(RECORDS_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.method,
            r.snr,
            r.run,
            fmt_f64(r.nrmse),
            fmt_f64(r.v_app),
            fmt_f64(r.mu_phi),
            r.mu_h.map(fmt_f64).unwrap_or_default(),
            fmt_f64(r.fim_fit_error),
            fmt_f64(r.wall_time_s),
            r.status
        );
    }
    out
}

pub const SUMMARY_HEADER: &str = "method,snr,mean_nrmse,se_nrmse,mean_vapp,se_vapp,failures";

pub fn summary_to_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.method,
            r.snr,
            fmt_f64(r.mean_nrmse),
            fmt_f64(r.se_nrmse),
            fmt_f64(r.mean_vapp),
            fmt_f64(r.se_vapp),
            r.failures
        );
    }
    out
}
