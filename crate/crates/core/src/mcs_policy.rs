//! MCS selection under a TB outage target.
//!
//! `R_i(γ)` picks the highest MCS whose TB outage after `i` decoder iterations
//! stays at or below `eps_hat`. Max-rate selection (MRS) uses the full
//! iteration budget, computationally aware selection (CAS) only two
//! iterations, which costs SNR margin but caps decoding effort.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::link_model::{McsCatalog, McsEntry};

/// Duration of one LTE subframe in seconds.
pub const SUBFRAME_S: f64 = 1e-3;
/// Default TB outage target.
pub const DEFAULT_EPS_HAT: f64 = 0.1;
/// Iteration budget assumed by CAS.
pub const CAS_ITERATIONS: usize = 2;

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("MCS {mcs} never reaches TB outage {eps_hat} within [{lo_db}, {hi_db}] dB after {iterations} iterations")]
    Unreachable {
        mcs: usize,
        iterations: usize,
        eps_hat: f64,
        lo_db: f64,
        hi_db: f64,
    },
    #[error(
        "threshold of MCS {mcs} lies below that of MCS {prev}; the calibration is not rate-ordered"
    )]
    NonMonotone { mcs: usize, prev: usize },
    #[error("iteration budget {0} outside 1..={1}")]
    IterationBudget(usize, usize),
    #[error("outage target {0} outside (0, 1]")]
    EpsHat(f64),
    #[error("invalid search grid: {0}")]
    Grid(String),
    #[error("policy tables cover {0} and {1} MCSs")]
    Mismatch(usize, usize),
}

/// MCS selection policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Policy {
    Mrs,
    Cas,
}

impl Policy {
    pub fn iteration_budget(self, max_iterations: usize) -> usize {
        match self {
            Self::Mrs => max_iterations,
            Self::Cas => CAS_ITERATIONS.min(max_iterations),
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Mrs => "MRS",
            Self::Cas => "CAS",
        })
    }
}

/// What happens when the SNR is below every threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowSnrMode {
    /// Send MCS 0 anyway; the TB is most likely lost but still decoded.
    #[default]
    TransmitLowest,
    /// Stay silent: no TB, no effort, counted as an outage.
    Skip,
}

/// SNR grid scanned for thresholds: `lo_db + k / steps_per_db`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchGrid {
    pub lo_db: f64,
    pub hi_db: f64,
    pub steps_per_db: u32,
}

impl Default for SearchGrid {
    fn default() -> Self {
        Self {
            lo_db: -20.0,
            hi_db: 60.0,
            steps_per_db: 100,
        }
    }
}

impl SearchGrid {
    fn bounds(&self) -> Result<(i64, usize), PolicyError> {
        let scale = f64::from(self.steps_per_db);
        let lo = (self.lo_db * scale).round();
        let hi = (self.hi_db * scale).round();
        if self.steps_per_db == 0 || !lo.is_finite() || !hi.is_finite() || hi <= lo {
            return Err(PolicyError::Grid(format!("{self:?}")));
        }
        Ok((lo as i64, (hi - lo) as usize + 1))
    }

    fn point(&self, lo_idx: i64, k: usize) -> f64 {
        (lo_idx + k as i64) as f64 / f64::from(self.steps_per_db)
    }
}

/// Per-MCS minimum SNR meeting the outage target for one iteration budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTable {
    pub iteration_budget: usize,
    pub eps_hat: f64,
    /// `thresholds_db[m]`, nondecreasing in `m`.
    pub thresholds_db: Vec<f64>,
    pub grid: SearchGrid,
}

/// Scans `grid` for the lowest SNR where each MCS meets `eps_hat` after
/// `iterations` decoder iterations.
pub fn build_policy_table(
    catalog: &McsCatalog<f64>,
    iterations: usize,
    eps_hat: f64,
    grid: SearchGrid,
) -> Result<PolicyTable, PolicyError> {
    let max_it = catalog.max_iterations();
    if iterations == 0 || iterations > max_it {
        return Err(PolicyError::IterationBudget(iterations, max_it));
    }
    if !(eps_hat > 0.0 && eps_hat <= 1.0) {
        return Err(PolicyError::EpsHat(eps_hat));
    }
    let (lo_idx, n) = grid.bounds()?;
    let points: Vec<usize> = (0..n).collect();
    let mut thresholds_db = Vec::with_capacity(catalog.len());
    for entry in catalog.entries() {
        // TB outage is nonincreasing in SNR, so the feasible set is a suffix.
        let k = points
            .partition_point(|&k| entry.tb_outage(grid.point(lo_idx, k), iterations) > eps_hat);
        if k == n {
            return Err(PolicyError::Unreachable {
                mcs: entry.index,
                iterations,
                eps_hat,
                lo_db: grid.lo_db,
                hi_db: grid.hi_db,
            });
        }
        thresholds_db.push(grid.point(lo_idx, k));
    }
    if let Some(m) = (1..thresholds_db.len()).find(|&m| thresholds_db[m] < thresholds_db[m - 1]) {
        return Err(PolicyError::NonMonotone {
            mcs: m,
            prev: m - 1,
        });
    }
    Ok(PolicyTable {
        iteration_budget: iterations,
        eps_hat,
        thresholds_db,
        grid,
    })
}

impl PolicyTable {
    pub fn for_policy(
        catalog: &McsCatalog<f64>,
        policy: Policy,
        eps_hat: f64,
        grid: SearchGrid,
    ) -> Result<Self, PolicyError> {
        build_policy_table(
            catalog,
            policy.iteration_budget(catalog.max_iterations()),
            eps_hat,
            grid,
        )
    }

    /// Highest MCS whose threshold is at or below `snr_db`, if any.
    pub fn select(&self, snr_db: f64) -> Option<usize> {
        self.thresholds_db
            .partition_point(|&t| t <= snr_db)
            .checked_sub(1)
    }

    /// [`select`](Self::select) with the low-SNR fallback applied.
    pub fn choose(&self, snr_db: f64, low_snr: LowSnrMode) -> Option<usize> {
        match (self.select(snr_db), low_snr) {
            (None, LowSnrMode::TransmitLowest) if !snr_db.is_nan() => Some(0),
            (sel, _) => sel,
        }
    }

    /// `mcs_index,threshold_db` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mcs_index,threshold_db\n");
        for (m, t) in self.thresholds_db.iter().enumerate() {
            out.push_str(&format!("{m},{t}\n"));
        }
        out
    }
}

/// Raw rate of a selection in bit/s: one TB per subframe, zero when silent.
pub fn raw_throughput<T>(mcs: Option<&McsEntry<T>>, subframe_s: f64) -> f64 {
    mcs.map_or(0.0, |e| f64::from(e.tb_bits) / subframe_s)
}

/// SNR margin `Δγ[m]` that a reduced iteration budget costs per MCS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub margins_db: Vec<f64>,
}

impl MarginReport {
    pub fn max(&self) -> f64 {
        self.margins_db
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.margins_db
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// `Δγ[m] = threshold_reduced[m] - threshold_full[m]`.
pub fn snr_margin(reduced: &PolicyTable, full: &PolicyTable) -> Result<MarginReport, PolicyError> {
    if reduced.thresholds_db.len() != full.thresholds_db.len() {
        return Err(PolicyError::Mismatch(
            reduced.thresholds_db.len(),
            full.thresholds_db.len(),
        ));
    }
    Ok(MarginReport {
        margins_db: reduced
            .thresholds_db
            .iter()
            .zip(&full.thresholds_db)
            .map(|(r, f)| r - f)
            .collect(),
    })
}

/// Both policy tables built from one catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySet {
    pub mrs: PolicyTable,
    pub cas: PolicyTable,
}

impl PolicySet {
    pub fn build(
        catalog: &McsCatalog<f64>,
        eps_hat: f64,
        grid: SearchGrid,
    ) -> Result<Self, PolicyError> {
        Ok(Self {
            mrs: PolicyTable::for_policy(catalog, Policy::Mrs, eps_hat, grid)?,
            cas: PolicyTable::for_policy(catalog, Policy::Cas, eps_hat, grid)?,
        })
    }

    pub fn table(&self, policy: Policy) -> &PolicyTable {
        match policy {
            Policy::Mrs => &self.mrs,
            Policy::Cas => &self.cas,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tables() -> (McsCatalog<f64>, PolicySet) {
        let cat = McsCatalog::lte_default();
        let set = PolicySet::build(&cat, DEFAULT_EPS_HAT, SearchGrid::default()).unwrap();
        (cat, set)
    }

    #[test]
    fn thresholds_verified_at_grid_neighbours() {
        let (cat, set) = tables();
        for table in [&set.mrs, &set.cas] {
            for (m, &t) in table.thresholds_db.iter().enumerate() {
                let e = cat.entry(m);
                assert!(
                    e.tb_outage(t, table.iteration_budget) <= 0.1,
                    "MCS {m} at {t}"
                );
                assert!(
                    e.tb_outage(t - 0.02, table.iteration_budget) > 0.1,
                    "MCS {m} below {t}"
                );
                // Threshold sits on the 0.01 dB grid.
                assert!(((t * 100.0).round() - t * 100.0).abs() < 1e-6);
            }
            assert!(table.thresholds_db.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn more_iterations_never_raise_thresholds() {
        let (_, set) = tables();
        for (f, r) in set.mrs.thresholds_db.iter().zip(&set.cas.thresholds_db) {
            assert!(f <= r);
        }
    }

    #[test]
    fn loose_target_collapses_to_floor() {
        let cat = McsCatalog::lte_default();
        let t = build_policy_table(&cat, 8, 1.0, SearchGrid::default()).unwrap();
        assert!(t.thresholds_db.iter().all(|&x| x == -20.0));
        assert_eq!(t.select(-20.0), Some(26));
    }

    #[test]
    fn unreachable_target_is_reported() {
        let cat = McsCatalog::lte_default();
        let grid = SearchGrid {
            lo_db: -20.0,
            hi_db: 5.0,
            steps_per_db: 100,
        };
        match build_policy_table(&cat, 8, 0.1, grid) {
            Err(PolicyError::Unreachable { mcs, .. }) => assert_eq!(mcs, 13),
            other => panic!("{other:?}"),
        }
        assert_eq!(
            build_policy_table(&cat, 9, 0.1, SearchGrid::default()),
            Err(PolicyError::IterationBudget(9, 8))
        );
        assert_eq!(
            build_policy_table(&cat, 8, 0.0, SearchGrid::default()),
            Err(PolicyError::EpsHat(0.0))
        );
    }

    #[test]
    fn selection_examples() {
        let (_, set) = tables();
        let t = &set.mrs;
        assert_eq!(t.select(-100.0), None);
        assert_eq!(t.select(100.0), Some(26));
        assert_eq!(t.choose(-100.0, LowSnrMode::TransmitLowest), Some(0));
        assert_eq!(t.choose(-100.0, LowSnrMode::Skip), None);
        assert_eq!(t.select(f64::NAN), None);
        assert_eq!(t.choose(f64::NAN, LowSnrMode::TransmitLowest), None);
        // Linear-scan oracle at the midpoint between MCS 10 and 11.
        let mid = 0.5 * (t.thresholds_db[10] + t.thresholds_db[11]);
        let oracle = (0..27).filter(|&m| t.thresholds_db[m] <= mid).max();
        assert_eq!(oracle, Some(10));
        assert_eq!(t.select(mid), oracle);
        assert_eq!(t.select(t.thresholds_db[11]), Some(11));
    }

    #[test]
    fn raw_rates() {
        let cat = McsCatalog::lte_default();
        assert!((raw_throughput(Some(cat.entry(11)), SUBFRAME_S) - 9.216e6).abs() < 1e-6);
        assert!((raw_throughput(Some(cat.entry(26)), SUBFRAME_S) - 33.024e6).abs() < 1e-6);
        assert_eq!(raw_throughput::<f64>(None, SUBFRAME_S), 0.0);
    }

    #[test]
    fn margins() {
        let (_, set) = tables();
        let same = snr_margin(&set.mrs, &set.mrs).unwrap();
        assert!(same.margins_db.iter().all(|&d| d == 0.0));
        let report = snr_margin(&set.cas, &set.mrs).unwrap();
        assert!(report.min() >= 0.0);
        assert!(report.max() <= 3.0);
        let mut short = set.mrs.clone();
        short.thresholds_db.pop();
        assert_eq!(
            snr_margin(&set.cas, &short),
            Err(PolicyError::Mismatch(27, 26))
        );
    }

    #[test]
    fn csv_export() {
        let (_, set) = tables();
        let csv = set.mrs.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("mcs_index,threshold_db"));
        assert_eq!(lines.count(), 27);
    }

    proptest! {
        #[test]
        fn selection_is_monotone(a in -30.0f64..70.0, b in -30.0f64..70.0) {
            let (_, set) = tables();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            for t in [&set.mrs, &set.cas] {
                prop_assert!(t.select(lo) <= t.select(hi));
            }
            let rate = |s: Option<usize>| s.map_or(0, |m| McsCatalog::lte_default().entry(m).tb_bits);
            prop_assert!(rate(set.mrs.select(a)) >= rate(set.cas.select(a)));
        }
    }
}
