//! CSV renderings of trajectories and reports.
//!
//! Numbers are written in the shortest decimal form that parses back to the
//! same double; absent values are empty cells.

use std::fmt::Write;

use crate::diagnostics::DiagnosticsReport;
use crate::error::{Error, Result};
use crate::fixed::Trajectory;
use crate::moving::ResidualRecord;

/// Shortest round-trip representation of `x`.
pub fn format_number(x: f64) -> String {
    if x.is_finite() {
        ryu::Buffer::new().format_finite(x).to_owned()
    } else if x.is_nan() {
        "NaN".to_owned()
    } else if x > 0.0 {
        "inf".to_owned()
    } else {
        "-inf".to_owned()
    }
}

fn cell(x: Option<f64>) -> String {
    x.map(format_number).unwrap_or_default()
}

fn push_row(out: &mut String, cells: impl IntoIterator<Item = String>) {
    let mut first = true;
    for c in cells {
        if !first {
            out.push(',');
        }
        out.push_str(&c);
        first = false;
    }
    out.push('\n');
}

/// `t`, then `k_re_i_j`, `k_im_i_j` for each entry in row-major order, then
/// `kk_drift` and `trace_khk_drift` when a matching report is given.
pub fn trajectory_csv(traj: &Trajectory, report: Option<&DiagnosticsReport>) -> Result<String> {
    if let Some(r) = report {
        if r.records.len() != traj.states.len() {
            return Err(Error::ShapeMismatch(format!(
                "report has {} records for {} states",
                r.records.len(),
                traj.states.len()
            )));
        }
    }
    let (rows, cols) = traj.first().k.shape();
    let mut header = vec!["t".to_owned()];
    for i in 0..rows {
        for j in 0..cols {
            header.push(format!("k_re_{i}_{j}"));
            header.push(format!("k_im_{i}_{j}"));
        }
    }
    if report.is_some() {
        header.push("kk_drift".into());
        header.push("trace_khk_drift".into());
    }
    let mut out = String::new();
    push_row(&mut out, header);
    for (idx, s) in traj.states.iter().enumerate() {
        let mut row = vec![format_number(s.t)];
        for z in s.k.data() {
            row.push(format_number(z.re));
            row.push(format_number(z.im));
        }
        if let Some(r) = report {
            let rec = &r.records[idx];
            row.push(format_number(rec.kk_star_drift));
            row.push(cell(rec.trace_khk_drift));
        }
        push_row(&mut out, row);
    }
    Ok(out)
}

pub fn diagnostics_csv(report: &DiagnosticsReport) -> String {
    let mut out = String::new();
    push_row(
        &mut out,
        [
            "t",
            "xi",
            "xi_rate_pred",
            "xi_rate_obs",
            "kk_drift",
            "trace_khk_drift",
            "unitarity_defect",
        ]
        .map(String::from),
    );
    for r in &report.records {
        push_row(
            &mut out,
            [
                format_number(r.t),
                format_number(r.xi),
                cell(r.xi_rate_predicted),
                cell(r.xi_rate_observed),
                format_number(r.kk_star_drift),
                cell(r.trace_khk_drift),
                format_number(r.unitarity_defect),
            ],
        );
    }
    out
}

pub fn residual_csv(records: &[ResidualRecord]) -> String {
    let mut out = String::new();
    push_row(
        &mut out,
        ["t", "weak_residual", "image_drift", "radial_drift"].map(String::from),
    );
    for r in records {
        push_row(
            &mut out,
            [
                format_number(r.t),
                format_number(r.weak_residual),
                format_number(r.image_drift),
                format_number(r.radial_drift),
            ],
        );
    }
    out
}

/// Two-column table with a header, e.g. per-solver distances.
pub fn key_value_csv(header: [&str; 2], rows: &[(String, f64)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{},{}", header[0], header[1]);
    for (k, v) in rows {
        let _ = writeln!(out, "{k},{}", format_number(*v));
    }
    out
}
