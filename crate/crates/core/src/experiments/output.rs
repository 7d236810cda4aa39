use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cell_sim::{sweep_cell, CellRecord, CellSweepConfig};
use crate::cloud_sched::{sweep_network, NetSweepConfig, NetworkRecord, SweepAxis};
use crate::mcs_policy::{raw_throughput, Policy};

use super::config::{ExperimentConfig, ExperimentKind, Prepared};
use super::ExperimentError;

pub const RESULTS_SCHEMA_VERSION: u32 = 1;
pub const RESULTS_CSV: &str = "results.csv";
pub const RESULTS_JSON: &str = "results.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// One MCS threshold of a policy table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRow {
    pub policy: Policy,
    pub mcs_index: usize,
    pub tb_bits: u32,
    pub raw_throughput_bps: f64,
    pub threshold_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellOrNetwork {
    Cell(Vec<CellRecord>),
    Network(Vec<NetworkRecord>),
    PolicyTables(Vec<PolicyRow>),
}

/// Contents of `results.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub config_sha256: String,
    pub records: serde_json::Value,
}

impl ResultsFile {
    pub fn decode(&self) -> Result<CellOrNetwork, ExperimentError> {
        let v = self.records.clone();
        let err = |e: serde_json::Error| {
            ExperimentError::Schema(format!("{RESULTS_JSON}: malformed records: {e}"))
        };
        Ok(match self.experiment {
            k if k.is_cell() => CellOrNetwork::Cell(serde_json::from_value(v).map_err(err)?),
            k if k.is_network() => CellOrNetwork::Network(serde_json::from_value(v).map_err(err)?),
            _ => CellOrNetwork::PolicyTables(serde_json::from_value(v).map_err(err)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputChecksum {
    pub file: String,
    pub sha256: String,
}

/// Contents of `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub artifact_version: String,
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub config_sha256: String,
    pub calibration_sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout_sha256: Option<String>,
    pub wall_clock_s: f64,
    pub outputs: Vec<OutputChecksum>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub manifest: Manifest,
    pub records: CellOrNetwork,
}

/// Validates `config`, runs it and writes the result files.
pub fn run(config: &ExperimentConfig) -> Result<RunSummary, ExperimentError> {
    run_prepared(&config.prepare()?)
}

pub fn run_prepared(p: &Prepared) -> Result<RunSummary, ExperimentError> {
    let start = Instant::now();
    let cfg = &p.config;
    let records = simulate(p)?;
    let config_sha256 = cfg.sha256();
    let csv = results_csv(&records);
    let json = results_json(cfg, &config_sha256, &records);

    let dir = &cfg.output.dir;
    fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
    let mut outputs = Vec::new();
    for (name, body) in [(RESULTS_CSV, &csv), (RESULTS_JSON, &json)] {
        write_file(&dir.join(name), body.as_bytes())?;
        outputs.push(OutputChecksum {
            file: name.to_string(),
            sha256: hex::encode(Sha256::digest(body.as_bytes())),
        });
    }
    let manifest = Manifest {
        schema_version: RESULTS_SCHEMA_VERSION,
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: cfg.experiment,
        seed: cfg.seed,
        config_sha256,
        calibration_sha256: p.calibration_sha256.clone(),
        layout_sha256: p.layout_sha256.clone(),
        wall_clock_s: start.elapsed().as_secs_f64(),
        outputs,
    };
    let mut body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    body.push('\n');
    write_file(&dir.join(MANIFEST_FILE), body.as_bytes())?;
    Ok(RunSummary {
        output_dir: dir.clone(),
        manifest,
        records,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ExperimentError> {
    fs::write(path, bytes).map_err(|e| ExperimentError::io(path, e))
}

/// Thresholds of both policies, one row per MCS.
pub fn policy_rows(p: &Prepared) -> Vec<PolicyRow> {
    let mut rows = Vec::new();
    for policy in [Policy::Mrs, Policy::Cas] {
        for (m, &t) in p.tables.table(policy).thresholds_db.iter().enumerate() {
            let entry = p.catalog.entry(m);
            rows.push(PolicyRow {
                policy,
                mcs_index: m,
                tb_bits: entry.tb_bits,
                raw_throughput_bps: raw_throughput(Some(entry), p.config.link.subframe_s),
                threshold_db: t,
            });
        }
    }
    rows
}

fn simulate(p: &Prepared) -> Result<CellOrNetwork, ExperimentError> {
    let cfg = &p.config;
    let sim = |e: &dyn std::fmt::Display| ExperimentError::Simulation(e.to_string());
    match cfg.experiment {
        ExperimentKind::PolicyTables => Ok(CellOrNetwork::PolicyTables(policy_rows(p))),
        k if k.is_cell() => {
            let mut records = Vec::new();
            for &policy in &cfg.cell.policies {
                let sweep = CellSweepConfig {
                    gamma_db: p.cell_gamma_db.clone(),
                    policy,
                    c_max: p.cell_c_max.clone(),
                    subframe_s: cfg.link.subframe_s,
                    n_trials: cfg.cell.n_trials,
                    seed: cfg.seed,
                    low_snr: cfg.link.low_snr,
                };
                records.extend(sweep_cell(&p.catalog, &p.tables, &sweep).map_err(|e| sim(&e))?);
            }
            Ok(CellOrNetwork::Cell(records))
        }
        _ => {
            let n = &cfg.network;
            let sweep = NetSweepConfig {
                axis: if cfg.experiment == ExperimentKind::NetDensitySweep {
                    SweepAxis::Lambda
                } else {
                    SweepAxis::CMax
                },
                lambdas: p.lambdas.clone(),
                c_max: p.net_c_max.clone(),
                policies: n.policies.clone(),
                modes: n.modes.clone(),
                n_subframes: n.n_subframes,
                seed: cfg.seed,
                subframe_s: cfg.link.subframe_s,
                low_snr: cfg.link.low_snr,
            };
            let layout = p
                .layout
                .as_ref()
                .expect("network experiments carry a layout");
            let records = sweep_network(layout, &n.channel, &p.catalog, &p.tables, &sweep)
                .map_err(|e| sim(&e))?;
            Ok(CellOrNetwork::Network(records))
        }
    }
}

fn results_json(cfg: &ExperimentConfig, config_sha256: &str, records: &CellOrNetwork) -> String {
    let records = match records {
        CellOrNetwork::Cell(r) => serde_json::to_value(r),
        CellOrNetwork::Network(r) => serde_json::to_value(r),
        CellOrNetwork::PolicyTables(r) => serde_json::to_value(r),
    }
    .expect("records serialize");
    let file = ResultsFile {
        schema_version: RESULTS_SCHEMA_VERSION,
        experiment: cfg.experiment,
        seed: cfg.seed,
        config_sha256: config_sha256.to_string(),
        records,
    };
    let mut s = serde_json::to_string_pretty(&file).expect("results serialize");
    s.push('\n');
    s
}

fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{v}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// The CSV body written to `results.csv`.
pub fn results_csv(records: &CellOrNetwork) -> String {
    let mut out = String::new();
    match records {
        CellOrNetwork::PolicyTables(rows) => {
            out.push_str("policy,mcs_index,tb_bits,raw_throughput_bps,threshold_db\n");
            for r in rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    r.policy,
                    r.mcs_index,
                    r.tb_bits,
                    num(r.raw_throughput_bps),
                    num(r.threshold_db)
                );
            }
        }
        CellOrNetwork::Cell(rows) => {
            out.push_str(
                "gamma_db,policy,c_max,n_trials,outage,outage_ci_low,outage_ci_high,\
                 channel_outage,channel_outage_ci_low,channel_outage_ci_high,\
                 comp_outage,comp_outage_ci_low,comp_outage_ci_high,\
                 raw_throughput_bps,effective_throughput_bps,goodput_bps,goodput_ci_low,goodput_ci_high,\
                 effort_per_success,effort_per_success_ci_low,effort_per_success_ci_high,mean_effort\n",
            );
            for r in rows {
                let fields = [
                    num(r.gamma_db),
                    r.policy.to_string(),
                    num(r.c_max),
                    r.n_trials.to_string(),
                    num(r.outage),
                    num(r.outage_ci_low),
                    num(r.outage_ci_high),
                    num(r.channel_outage),
                    num(r.channel_outage_ci_low),
                    num(r.channel_outage_ci_high),
                    num(r.comp_outage),
                    num(r.comp_outage_ci_low),
                    num(r.comp_outage_ci_high),
                    num(r.raw_throughput_bps),
                    num(r.effective_throughput_bps),
                    num(r.goodput_bps),
                    num(r.goodput_ci_low),
                    num(r.goodput_ci_high),
                    opt(r.effort_per_success),
                    opt(r.effort_per_success_ci_low),
                    opt(r.effort_per_success_ci_high),
                    num(r.mean_effort),
                ];
                out.push_str(&fields.join(","));
                out.push('\n');
            }
        }
        CellOrNetwork::Network(rows) => {
            out.push_str(
                "axis,grid_value,lambda,c_max,mode,policy,n_subframes,sum_throughput_bps,\
                 sum_throughput_ci_low,sum_throughput_ci_high,comp_outage_rate,channel_outage_rate,\
                 mean_active_cells,per_cell_throughput_bps\n",
            );
            for r in rows {
                let axis = match r.axis {
                    SweepAxis::CMax => "c_max",
                    SweepAxis::Lambda => "lambda",
                };
                let per_cell: Vec<String> =
                    r.per_cell_throughput_bps.iter().map(|&v| num(v)).collect();
                let fields = [
                    axis.to_string(),
                    num(r.grid_value),
                    num(r.lambda),
                    num(r.c_max),
                    r.mode.to_string(),
                    r.policy.to_string(),
                    r.n_subframes.to_string(),
                    num(r.sum_throughput_bps),
                    num(r.sum_throughput_ci_low),
                    num(r.sum_throughput_ci_high),
                    num(r.comp_outage_rate),
                    num(r.channel_outage_rate),
                    num(r.mean_active_cells),
                    per_cell.join(";"),
                ];
                out.push_str(&fields.join(","));
                out.push('\n');
            }
        }
    }
    out
}
