//! Dataset loading and result serialization.
//!
//! The input format is a plain numeric CSV with the exact header
//! `y,x1,...,xp` (at least two covariates). No quoting or escaping is
//! involved, so parsing is a straight split; malformed content is reported
//! with its data row number and column name. Study results are written
//! back out as CSV with floats in shortest round-trip form.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::dataset::Dataset;
use crate::error::{Result, SimCheckError};
use crate::experiments::MonteCarloReport;

/// Load a dataset from `path`.
///
/// Structural validation only: the header must be exactly `y,x1,...,xp`
/// with `p >= 2`, every row must have `p + 1` finite numeric fields, and at
/// least two data rows must be present. Statistical minimums (test
/// entry points require more data than this) are enforced by the caller,
/// so a three-row file loads fine.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    parse_dataset(&text)
}

fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut lines = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l));
    let header = lines.next().ok_or_else(|| SimCheckError::DataFormat {
        reason: "empty file".to_string(),
    })?;
    let fields: Vec<&str> = header.split(',').collect();
    if fields.len() < 3 || fields[0] != "y" {
        return Err(SimCheckError::DataFormat {
            reason: format!("header must be y,x1,...,xp with at least two covariates; got `{header}`"),
        });
    }
    let p = fields.len() - 1;
    for (j, field) in fields.iter().enumerate().skip(1) {
        let expected = format!("x{j}");
        if *field != expected {
            return Err(SimCheckError::DataFormat {
                reason: format!(
                    "header column {} must be `{expected}`, got `{field}`",
                    j + 1
                ),
            });
        }
    }

    let mut y = Vec::new();
    let mut x = Vec::new();
    let mut row = 0usize;
    let mut blank_seen = false;
    for line in lines {
        if line.is_empty() {
            // Tolerated only as padding at the end of the file.
            blank_seen = true;
            continue;
        }
        if blank_seen {
            return Err(SimCheckError::DataFormat {
                reason: format!("row {} is empty", row + 1),
            });
        }
        row += 1;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != p + 1 {
            return Err(SimCheckError::DataFormat {
                reason: format!(
                    "row {row} has {} fields, expected {}",
                    cells.len(),
                    p + 1
                ),
            });
        }
        for (j, cell) in cells.iter().enumerate() {
            let column = if j == 0 {
                "y".to_string()
            } else {
                format!("x{j}")
            };
            let value: f64 = cell.trim().parse().map_err(|_| SimCheckError::DataFormat {
                reason: format!("row {row}, column {column}: cannot parse `{cell}` as a number"),
            })?;
            if !value.is_finite() {
                return Err(SimCheckError::DataFormat {
                    reason: format!("row {row}, column {column}: value is not finite"),
                });
            }
            if j == 0 {
                y.push(value);
            } else {
                x.push(value);
            }
        }
    }
    let n = y.len();
    if n < 2 {
        return Err(SimCheckError::DataFormat {
            reason: format!("need at least two data rows, got {n}"),
        });
    }
    let x = Array2::from_shape_vec((n, p), x).expect("row-major cells");
    Dataset::new(Array1::from_vec(y), x)
}

/// Serialize a study report as CSV: one row per (departure, bandwidth,
/// method) cell, floats in shortest round-trip form.
pub fn report_to_csv(report: &MonteCarloReport) -> String {
    let mut out = String::from(
        "model,n,p,delta,c,method,rejections,replications,rate,seed,h,failures,mean_t,mean_p,alpha,b\n",
    );
    for row in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            row.model,
            row.n,
            row.p,
            row.delta,
            row.c,
            row.method,
            row.rejections,
            row.replications,
            row.rate,
            row.seed,
            row.h,
            row.failures,
            row.mean_t,
            row.mean_p,
            report.alpha,
            report.b
        )
        .expect("string write");
    }
    out
}

/// Which study variable a plot file puts on the x axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotAxis {
    /// Bandwidth factor `c` — level studies.
    BandwidthFactor,
    /// Departure size `delta` — power curves.
    Departure,
}

/// Serialize the plot-ready view of a report: the chosen x variable,
/// the decision method (one series per method), and the rejection rate.
pub fn plot_csv(report: &MonteCarloReport, axis: PlotAxis) -> String {
    let mut out = String::from(match axis {
        PlotAxis::BandwidthFactor => "c,method,rate\n",
        PlotAxis::Departure => "delta,method,rate\n",
    });
    for row in &report.rows {
        let x = match axis {
            PlotAxis::BandwidthFactor => row.c,
            PlotAxis::Departure => row.delta,
        };
        writeln!(out, "{},{},{}", x, row.method, row.rate).expect("string write");
    }
    out
}

/// Write [`report_to_csv`] to a file.
pub fn write_report_csv(report: &MonteCarloReport, path: &Path) -> Result<()> {
    std::fs::write(path, report_to_csv(report))?;
    Ok(())
}

/// Write [`plot_csv`] to a file.
pub fn write_plot_csv(report: &MonteCarloReport, axis: PlotAxis, path: &Path) -> Result<()> {
    std::fs::write(path, plot_csv(report, axis))?;
    Ok(())
}
