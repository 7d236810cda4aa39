use std::fmt::Write as _;
use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use crate::cell_sim::CellRecord;
use crate::cloud_sched::NetworkRecord;

use super::config::ExperimentKind;
use super::output::{CellOrNetwork, ResultsFile, RESULTS_JSON, RESULTS_SCHEMA_VERSION};
use super::ExperimentError;

pub const PLOT_HEADER: &str = "x,y,ci_low,ci_high,series";

struct Row {
    x: f64,
    y: f64,
    lo: f64,
    hi: f64,
    series: String,
}

fn rate_label(c_max: f64) -> String {
    if c_max.is_infinite() {
        "inf".into()
    } else {
        format!("{}M", c_max / 1e6)
    }
}

/// Reads `in_dir/results.json` and writes `out_dir/<experiment>.csv`.
pub fn emit_plot_data(in_dir: &Path, out_dir: &Path) -> Result<PathBuf, ExperimentError> {
    let path = in_dir.join(RESULTS_JSON);
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == ErrorKind::NotFound => {
            return Err(ExperimentError::Schema(format!(
                "no {RESULTS_JSON} in {}; run an experiment first",
                in_dir.display()
            )))
        }
        Err(e) => return Err(ExperimentError::io(path, e)),
    };
    let file: ResultsFile = serde_json::from_str(&text).map_err(|e| {
        ExperimentError::Schema(format!("{}: not a results file: {e}", path.display()))
    })?;
    if file.schema_version != RESULTS_SCHEMA_VERSION {
        return Err(ExperimentError::Schema(format!(
            "{}: schema_version {} is not supported (expected {RESULTS_SCHEMA_VERSION})",
            path.display(),
            file.schema_version
        )));
    }
    let rows = match file.decode()? {
        CellOrNetwork::Cell(r) => cell_rows(file.experiment, &r),
        CellOrNetwork::Network(r) => network_rows(file.experiment, &r),
        CellOrNetwork::PolicyTables(r) => r
            .iter()
            .map(|p| Row {
                x: p.threshold_db,
                y: p.raw_throughput_bps,
                lo: p.raw_throughput_bps,
                hi: p.raw_throughput_bps,
                series: p.policy.to_string(),
            })
            .collect(),
    };
    let mut body = String::from(PLOT_HEADER);
    body.push('\n');
    for r in rows {
        let _ = writeln!(body, "{},{},{},{},{}", r.x, r.y, r.lo, r.hi, r.series);
    }
    fs::create_dir_all(out_dir).map_err(|e| ExperimentError::io(out_dir, e))?;
    let out = out_dir.join(format!("{}.csv", file.experiment));
    fs::write(&out, body).map_err(|e| ExperimentError::io(&out, e))?;
    Ok(out)
}

fn cell_rows(kind: ExperimentKind, records: &[CellRecord]) -> Vec<Row> {
    records
        .iter()
        .filter_map(|r| {
            let series = format!("{} C_max={}", r.policy, rate_label(r.c_max));
            let (y, lo, hi) = match kind {
                ExperimentKind::CellOutage => (r.outage, r.outage_ci_low, r.outage_ci_high),
                ExperimentKind::CellThroughput => (
                    r.effective_throughput_bps,
                    (1.0 - r.outage_ci_high) * r.raw_throughput_bps,
                    (1.0 - r.outage_ci_low) * r.raw_throughput_bps,
                ),
                _ => (
                    r.effort_per_success?,
                    r.effort_per_success_ci_low?,
                    r.effort_per_success_ci_high?,
                ),
            };
            Some(Row {
                x: r.gamma_db,
                y,
                lo,
                hi,
                series,
            })
        })
        .collect()
}

fn network_rows(kind: ExperimentKind, records: &[NetworkRecord]) -> Vec<Row> {
    let mut lambdas: Vec<f64> = records.iter().map(|r| r.lambda).collect();
    lambdas.dedup();
    let many_lambdas = lambdas.len() > 1;
    let mut rows = Vec::new();
    for r in records {
        let base = format!("{}-{}", r.policy, r.mode);
        let row = |x: f64, series: String| Row {
            x,
            y: r.sum_throughput_bps,
            lo: r.sum_throughput_ci_low,
            hi: r.sum_throughput_ci_high,
            series,
        };
        if kind == ExperimentKind::NetDensitySweep {
            rows.push(row(
                r.lambda,
                format!("{base} C_max={}", rate_label(r.c_max)),
            ));
            continue;
        }
        let suffix = if many_lambdas {
            format!(" lambda={}", r.lambda)
        } else {
            String::new()
        };
        if r.c_max.is_finite() {
            rows.push(row(r.c_max, format!("{base}{suffix}")));
            continue;
        }
        // The unconstrained level, drawn across the finite budgets.
        for x in records
            .iter()
            .filter(|o| {
                o.lambda == r.lambda
                    && o.policy == r.policy
                    && o.mode == r.mode
                    && o.c_max.is_finite()
            })
            .map(|o| o.c_max)
        {
            rows.push(row(x, format!("{base} unconstrained{suffix}")));
        }
    }
    rows
}
