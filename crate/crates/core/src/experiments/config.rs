use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cloud_sched::ProcessingMode;
use crate::link_model::McsCatalog;
use crate::mcs_policy::{LowSnrMode, Policy, PolicySet, SearchGrid, DEFAULT_EPS_HAT, SUBFRAME_S};
use crate::net_geometry::{
    load_layout_csv, synthesize_layout, ChannelParams, NetworkLayout, Rect, SyntheticLayout,
};
use crate::num::serde_rate;

use super::{ExperimentError, FieldProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    CellOutage,
    CellThroughput,
    CellComplexity,
    NetBudgetSweep,
    NetDensitySweep,
    PolicyTables,
}

impl ExperimentKind {
    pub fn is_cell(self) -> bool {
        matches!(
            self,
            Self::CellOutage | Self::CellThroughput | Self::CellComplexity
        )
    }

    pub fn is_network(self) -> bool {
        matches!(self, Self::NetBudgetSweep | Self::NetDensitySweep)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::CellOutage => "cell_outage",
            Self::CellThroughput => "cell_throughput",
            Self::CellComplexity => "cell_complexity",
            Self::NetBudgetSweep => "net_budget_sweep",
            Self::NetDensitySweep => "net_density_sweep",
            Self::PolicyTables => "policy_tables",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A number that may also be written `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate(#[serde(with = "serde_rate")] pub f64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

/// A parameter grid: an explicit list, or a range given by `step` (linear
/// only) or by `points` (linear or log spacing, endpoints included).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<Rate>),
    Range(GridRange),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRange {
    pub start: f64,
    pub stop: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default)]
    pub spacing: Spacing,
}

const MAX_GRID_POINTS: usize = 100_000;

impl Grid {
    pub fn list(values: &[f64]) -> Self {
        Self::List(values.iter().map(|&v| Rate(v)).collect())
    }

    pub fn linear(start: f64, stop: f64, step: f64) -> Self {
        Self::Range(GridRange {
            start,
            stop,
            step: Some(step),
            points: None,
            spacing: Spacing::Linear,
        })
    }

    pub fn log(start: f64, stop: f64, points: usize) -> Self {
        Self::Range(GridRange {
            start,
            stop,
            step: None,
            points: Some(points),
            spacing: Spacing::Log,
        })
    }

    /// Expands the grid; the error names what is wrong with it.
    pub fn values(&self) -> Result<Vec<f64>, String> {
        let r = match self {
            Self::List(v) if v.is_empty() => return Err("grid is empty".into()),
            Self::List(v) => return Ok(v.iter().map(|r| r.0).collect()),
            Self::Range(r) => r,
        };
        if !(r.start.is_finite() && r.stop.is_finite()) {
            return Err("start and stop must be finite".into());
        }
        if r.stop < r.start {
            return Err(format!("stop {} is below start {}", r.stop, r.start));
        }
        match (r.step, r.points, r.spacing) {
            (Some(_), Some(_), _) => Err("give either step or points, not both".into()),
            (None, None, _) => Err("a range needs step or points".into()),
            (Some(_), None, Spacing::Log) => Err("log spacing takes points, not step".into()),
            (Some(step), None, Spacing::Linear) => {
                if !(step > 0.0 && step.is_finite()) {
                    return Err(format!("step {step} must be positive"));
                }
                let span = (r.stop - r.start) / step;
                let n = if (span - span.round()).abs() <= 1e-9 * span.abs().max(1.0) {
                    span.round()
                } else {
                    span.floor()
                };
                if n >= MAX_GRID_POINTS as f64 {
                    return Err(format!("range has more than {MAX_GRID_POINTS} points"));
                }
                Ok((0..=n as u64).map(|k| r.start + k as f64 * step).collect())
            }
            (None, Some(points), spacing) => {
                if points == 0 || points > MAX_GRID_POINTS {
                    return Err(format!("points must lie in 1..={MAX_GRID_POINTS}"));
                }
                if points == 1 {
                    return if r.start == r.stop {
                        Ok(vec![r.start])
                    } else {
                        Err("a single point needs start == stop".into())
                    };
                }
                let (a, b) = match spacing {
                    Spacing::Linear => (r.start, r.stop),
                    Spacing::Log if r.start > 0.0 => (r.start.log10(), r.stop.log10()),
                    Spacing::Log => return Err("log spacing needs a positive start".into()),
                };
                let last = (points - 1) as f64;
                Ok((0..points)
                    .map(|k| {
                        let x = if k == points - 1 {
                            b
                        } else {
                            a + (b - a) * k as f64 / last
                        };
                        match spacing {
                            Spacing::Linear => x,
                            Spacing::Log if k == 0 => r.start,
                            Spacing::Log if k == points - 1 => r.stop,
                            Spacing::Log => 10f64.powf(x),
                        }
                    })
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("results"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkConfig {
    /// Calibration JSON; the shipped LTE file when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<PathBuf>,
    pub eps_hat: f64,
    pub low_snr: LowSnrMode,
    pub subframe_s: f64,
    pub search_grid: SearchGrid,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            calibration: None,
            eps_hat: DEFAULT_EPS_HAT,
            low_snr: LowSnrMode::default(),
            subframe_s: SUBFRAME_S,
            search_grid: SearchGrid::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CellConfig {
    /// Average SNR Γ in dB.
    pub gamma_db: Grid,
    pub policies: Vec<Policy>,
    /// Bit-iterations per second.
    pub c_max: Grid,
    pub n_trials: u64,
}

impl Default for CellConfig {
    fn default() -> Self {
        Self {
            gamma_db: Grid::linear(-20.0, 40.0, 2.0),
            policies: vec![Policy::Mrs, Policy::Cas],
            c_max: Grid::list(&[f64::INFINITY, 50e6]),
            n_trials: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    /// RAP positions in the `id,x_km,y_km,in_cloud_group` format; a
    /// synthetic layout is used when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layout_csv: Option<PathBuf>,
    /// `[x_min, y_min, x_max, y_max]` in km; required with `layout_csv`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region_km: Option<[f64; 4]>,
    pub synthetic: SyntheticLayout,
    pub channel: ChannelParams,
    /// Users per km²; defaults to `channel.lambda` for budget sweeps and to
    /// a log grid over `[0.01, 1]` for density sweeps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Grid>,
    /// Bit-iterations per second per RAP; defaults to 10..100 Mbit-iter/s
    /// plus unlimited for budget sweeps and `[30e6, inf]` for density sweeps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_max: Option<Grid>,
    pub policies: Vec<Policy>,
    pub modes: Vec<ProcessingMode>,
    pub n_subframes: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            layout_csv: None,
            region_km: None,
            synthetic: SyntheticLayout::default(),
            channel: ChannelParams::default(),
            lambda: None,
            c_max: None,
            policies: vec![Policy::Mrs, Policy::Cas],
            modes: vec![ProcessingMode::Lp, ProcessingMode::Cp],
            n_subframes: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub link: LinkConfig,
    #[serde(default)]
    pub cell: CellConfig,
    #[serde(default)]
    pub network: NetworkConfig,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            seed: 0,
            output: OutputConfig::default(),
            link: LinkConfig::default(),
            cell: CellConfig::default(),
            network: NetworkConfig::default(),
        }
    }

    /// Parses TOML; relative input paths are resolved against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, ExperimentError> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| {
            let span = e
                .span()
                .map(|s| format!(" (bytes {}..{})", s.start, s.end))
                .unwrap_or_default();
            ExperimentError::field("<document>", format!("{}{span}", e.message()))
        })?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        if let Some(p) = cfg.link.calibration.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.network.layout_csv.as_mut() {
            resolve(p);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn lambda_grid(&self) -> Grid {
        self.network
            .lambda
            .clone()
            .unwrap_or_else(|| match self.experiment {
                ExperimentKind::NetDensitySweep => Grid::log(0.01, 1.0, 9),
                _ => Grid::list(&[self.network.channel.lambda]),
            })
    }

    pub fn network_c_max_grid(&self) -> Grid {
        self.network
            .c_max
            .clone()
            .unwrap_or_else(|| match self.experiment {
                ExperimentKind::NetDensitySweep => Grid::list(&[30e6, f64::INFINITY]),
                _ => {
                    let mut v: Vec<f64> = (1..=10).map(|k| k as f64 * 10e6).collect();
                    v.push(f64::INFINITY);
                    Grid::list(&v)
                }
            })
    }

    /// SHA-256 of the canonical JSON form, ignoring the output directory.
    pub fn sha256(&self) -> String {
        let mut canon = self.clone();
        canon.output = OutputConfig::default();
        let json = serde_json::to_vec(&canon).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }

    /// Checks every field the experiment uses and loads the referenced files.
    pub fn prepare(&self) -> Result<Prepared, ExperimentError> {
        let mut problems = Vec::new();
        let mut bad = |field: &str, message: String| {
            problems.push(FieldProblem {
                field: field.to_string(),
                message,
            })
        };
        let link = &self.link;
        if !(link.eps_hat > 0.0 && link.eps_hat < 1.0) {
            bad(
                "link.eps_hat",
                format!("{} must lie in (0, 1)", link.eps_hat),
            );
        }
        if !(link.subframe_s > 0.0 && link.subframe_s.is_finite()) {
            bad(
                "link.subframe_s",
                format!("{} must be positive", link.subframe_s),
            );
        }
        let g = link.search_grid;
        if g.steps_per_db == 0 || !(g.lo_db.is_finite() && g.hi_db.is_finite() && g.hi_db > g.lo_db)
        {
            bad("link.search_grid", format!("{g:?} is not a valid grid"));
        }
        let calibration_json = match &link.calibration {
            None => Some(McsCatalog::default_json().to_string()),
            Some(p) => match std::fs::read_to_string(p) {
                Ok(s) => Some(s),
                Err(e) => {
                    bad("link.calibration", format!("{}: {e}", p.display()));
                    None
                }
            },
        };
        let catalog = calibration_json
            .as_deref()
            .and_then(|s| match McsCatalog::from_json(s) {
                Ok(c) => Some(c),
                Err(e) => {
                    bad("link.calibration", e.to_string());
                    None
                }
            });

        let mut cell_grids = None;
        if self.experiment.is_cell() {
            let c = &self.cell;
            let gamma = grid_field(&mut bad, "cell.gamma_db", &c.gamma_db, |v| {
                v.is_finite().then_some(()).ok_or("must be finite")
            });
            let c_max = grid_field(&mut bad, "cell.c_max", &c.c_max, positive_rate);
            check_unique(&mut bad, "cell.policies", &c.policies);
            if c.n_trials == 0 {
                bad("cell.n_trials", "must be at least 1".into());
            }
            cell_grids = gamma.zip(c_max);
        }

        let mut net = None;
        if self.experiment.is_network() {
            let n = &self.network;
            if let Err(e) = n.channel.validate() {
                bad("network.channel", e.to_string());
            }
            let lambda = grid_field(&mut bad, "network.lambda", &self.lambda_grid(), |v| {
                (v >= 0.0 && v.is_finite())
                    .then_some(())
                    .ok_or("must be finite and nonnegative")
            });
            let c_max = grid_field(
                &mut bad,
                "network.c_max",
                &self.network_c_max_grid(),
                positive_rate,
            );
            check_unique(&mut bad, "network.policies", &n.policies);
            check_unique(&mut bad, "network.modes", &n.modes);
            if n.n_subframes == 0 {
                bad("network.n_subframes", "must be at least 1".into());
            }
            let layout = match (&n.layout_csv, n.region_km) {
                (Some(_), None) => {
                    bad("network.region_km", "required with layout_csv".into());
                    None
                }
                (Some(p), Some([x0, y0, x1, y1])) => match std::fs::read(p) {
                    Err(e) => {
                        bad("network.layout_csv", format!("{}: {e}", p.display()));
                        None
                    }
                    Ok(bytes) => match load_layout_csv(p, Rect::new(x0, y0, x1, y1)) {
                        Ok(l) => Some((l, Some(hex::encode(Sha256::digest(&bytes))))),
                        Err(e) => {
                            bad("network.layout_csv", e.to_string());
                            None
                        }
                    },
                },
                (None, Some(_)) => {
                    bad("network.region_km", "only used with layout_csv".into());
                    None
                }
                (None, None) => match synthesize_layout(&n.synthetic) {
                    Ok(l) => Some((l, None)),
                    Err(e) => {
                        bad("network.synthetic", e.to_string());
                        None
                    }
                },
            };
            net = match (lambda, c_max, layout) {
                (Some(l), Some(c), Some(layout)) => Some((l, c, layout)),
                _ => None,
            };
        }

        let tables = catalog.as_ref().and_then(|c| {
            match PolicySet::build(c, link.eps_hat, link.search_grid) {
                Ok(t) => Some(t),
                Err(e) if link.eps_hat > 0.0 && link.eps_hat < 1.0 => {
                    bad("link", e.to_string());
                    None
                }
                Err(_) => None,
            }
        });

        if !problems.is_empty() {
            return Err(ExperimentError::Config(problems));
        }
        let catalog = catalog.expect("checked above");
        let calibration_json = calibration_json.expect("checked above");
        let (cell_gamma_db, cell_c_max) = cell_grids.unwrap_or_default();
        let (lambdas, net_c_max, layout, layout_sha256) = match net {
            Some((l, c, (layout, h))) => (l, c, Some(layout), h),
            None => (Vec::new(), Vec::new(), None, None),
        };
        Ok(Prepared {
            config: self.clone(),
            calibration_sha256: hex::encode(Sha256::digest(calibration_json.as_bytes())),
            catalog,
            tables: tables.expect("checked above"),
            cell_gamma_db,
            cell_c_max,
            lambdas,
            net_c_max,
            layout,
            layout_sha256,
        })
    }
}

fn positive_rate(v: f64) -> Result<(), &'static str> {
    (v > 0.0)
        .then_some(())
        .ok_or("must be positive (\"inf\" for unlimited)")
}

fn grid_field(
    bad: &mut impl FnMut(&str, String),
    field: &str,
    grid: &Grid,
    check: impl Fn(f64) -> Result<(), &'static str>,
) -> Option<Vec<f64>> {
    match grid.values() {
        Err(e) => {
            bad(field, e);
            None
        }
        Ok(v) => match v.iter().find_map(|&x| check(x).err().map(|m| (x, m))) {
            Some((x, m)) => {
                bad(field, format!("value {x} {m}"));
                None
            }
            None => Some(v),
        },
    }
}

fn check_unique<T: Ord + fmt::Debug>(bad: &mut impl FnMut(&str, String), field: &str, items: &[T]) {
    if items.is_empty() {
        bad(field, "must not be empty".into());
    } else if items.iter().collect::<BTreeSet<_>>().len() != items.len() {
        bad(field, format!("{items:?} lists an entry twice"));
    }
}

/// A validated configuration with its inputs loaded.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: ExperimentConfig,
    pub calibration_sha256: String,
    pub catalog: McsCatalog<f64>,
    pub tables: PolicySet,
    pub cell_gamma_db: Vec<f64>,
    pub cell_c_max: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub net_c_max: Vec<f64>,
    pub layout: Option<NetworkLayout<f64>>,
    pub layout_sha256: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<ExperimentConfig, ExperimentError> {
        ExperimentConfig::from_toml(s, Path::new("."))
    }

    fn problems(cfg: &ExperimentConfig) -> Vec<String> {
        match cfg.prepare() {
            Err(ExperimentError::Config(p)) => p.into_iter().map(|p| p.field).collect(),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn grids_expand() {
        assert_eq!(Grid::linear(-20.0, 40.0, 2.0).values().unwrap().len(), 31);
        assert_eq!(Grid::linear(0.0, 1.0, 0.1).values().unwrap().len(), 11);
        let log = Grid::log(0.01, 1.0, 9).values().unwrap();
        assert_eq!((log[0], log[8]), (0.01, 1.0));
        assert!((log[4] - 0.1).abs() < 1e-15);
        assert!(Grid::List(vec![]).values().is_err());
        assert!(Grid::log(0.0, 1.0, 3).values().is_err());
        assert!(Grid::linear(1.0, 0.0, 0.5).values().is_err());
    }

    #[test]
    fn toml_accepts_inf_and_ranges() {
        let cfg = parse(
            r#"
            experiment = "cell_outage"
            seed = 7
            [cell]
            gamma_db = { start = 0, stop = 10, step = 5 }
            c_max = ["inf", 50e6]
            n_trials = 10
            "#,
        )
        .unwrap();
        assert_eq!(cfg.cell.c_max.values().unwrap(), vec![f64::INFINITY, 50e6]);
        let p = cfg.prepare().unwrap();
        assert_eq!(p.cell_gamma_db, vec![0.0, 5.0, 10.0]);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = parse("experiment = \"cell_outage\"\n[cell]\nn_trails = 5\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("n_trails"), "{err}");
    }

    #[test]
    fn field_level_diagnostics() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::CellOutage);
        cfg.cell.n_trials = 0;
        cfg.cell.c_max = Grid::list(&[0.0]);
        cfg.link.eps_hat = 1.5;
        let fields = problems(&cfg);
        assert!(fields.contains(&"cell.n_trials".to_string()));
        assert!(fields.contains(&"cell.c_max".to_string()));
        assert!(fields.contains(&"link.eps_hat".to_string()));

        let mut cfg = ExperimentConfig::new(ExperimentKind::NetDensitySweep);
        cfg.network.layout_csv = Some(PathBuf::from("/nonexistent/layout.csv"));
        cfg.network.region_km = Some([0.0, 0.0, 1.0, 1.0]);
        cfg.network.modes = vec![];
        let fields = problems(&cfg);
        assert_eq!(fields, vec!["network.modes", "network.layout_csv"]);
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = ExperimentConfig::new(ExperimentKind::PolicyTables);
        let mut b = a.clone();
        b.output.dir = PathBuf::from("elsewhere");
        assert_eq!(a.sha256(), b.sha256());
        b.seed = 1;
        assert_ne!(a.sha256(), b.sha256());
    }
}
