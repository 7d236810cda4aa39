//! Calibration file format and the default LTE calibration.
//!
//! The default curves are synthesized from two reference rate-selection
//! curves at 45 resource blocks: for every MCS we know the SNR at which a
//! target TB outage is met after 8 iterations (max-rate selection) and after
//! 2 iterations (computationally aware selection). The waterfall midpoints
//! are placed so that both switching points are reproduced exactly; the
//! remaining iterations are interpolated with a geometric profile.

use serde::{Deserialize, Serialize};

use crate::num::Real;

use super::{
    tb_channel_outage_prob, LinkError, McsCatalog, McsEntry, Modulation, Waterfall,
    DEFAULT_MAX_ITERATIONS, MAX_CB_BITS, NUM_MCS,
};

pub const CALIBRATION_SCHEMA_VERSION: u32 = 1;

/// Reference operating points of one MCS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateAnchor {
    pub tb_bits: u32,
    /// Lowest SNR (dB) at which the TB outage target holds after `I_max` iterations.
    pub mrs_switch_db: f64,
    /// Same after the reduced iteration budget.
    pub cas_switch_db: f64,
}

const fn anchor(tb_bits: u32, mrs_switch_db: f64, cas_switch_db: f64) -> RateAnchor {
    RateAnchor {
        tb_bits,
        mrs_switch_db,
        cas_switch_db,
    }
}

/// LTE uplink, 45 RBs, 1 ms subframe, 10% TB outage target.
///
/// Switching SNRs come from rate curves sampled every 0.2 dB and are centred
/// in their sampling bin. The lowest two MRS points and the lowest CAS point
/// lie below the sampled range and are extrapolated with the local spacing.
pub const LTE_45RB_ANCHORS: [RateAnchor; NUM_MCS] = [
    anchor(1280, -5.9, -5.3),
    anchor(1632, -5.3, -4.7),
    anchor(2048, -4.7, -3.5),
    anchor(2624, -3.5, -2.5),
    anchor(3264, -2.5, -1.7),
    anchor(4032, -1.7, -0.9),
    anchor(4800, -0.9, 0.1),
    anchor(5568, 0.1, 0.9),
    anchor(6272, 0.9, 1.5),
    anchor(7040, 1.5, 2.7),
    anchor(8064, 2.7, 3.7),
    anchor(9216, 3.7, 4.7),
    anchor(10368, 4.7, 5.3),
    anchor(11520, 5.3, 6.3),
    anchor(13056, 6.3, 6.7),
    anchor(13632, 6.7, 7.5),
    anchor(14784, 7.5, 8.5),
    anchor(16512, 8.5, 9.3),
    anchor(17664, 9.3, 10.1),
    anchor(19200, 10.1, 11.1),
    anchor(20736, 11.1, 12.5),
    anchor(23040, 12.5, 13.3),
    anchor(24640, 13.3, 13.9),
    anchor(25600, 13.9, 14.7),
    anchor(27520, 14.7, 15.3),
    anchor(28480, 15.3, 17.1),
    anchor(33024, 17.5, 19.1),
];

/// Shape of the per-iteration midpoints around the two anchored iterations.
///
/// With `D = cas_switch - mrs_switch`, the midpoint after `i` iterations sits
/// `D * g(i)` above the `I_max` midpoint, where `g(I_max) = 0`,
/// `g(reduced) = 1`, `g` decays geometrically with ratio `decay` in between
/// and grows by `first_iteration_excess` per iteration below `reduced`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaterfallProfile {
    pub slope_per_db: f64,
    pub max_iterations: usize,
    pub reduced_iterations: usize,
    pub first_iteration_excess: f64,
    pub decay: f64,
    pub eps_hat: f64,
}

impl Default for WaterfallProfile {
    fn default() -> Self {
        Self {
            slope_per_db: 4.0,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            reduced_iterations: 2,
            first_iteration_excess: 0.3,
            decay: 0.55,
            eps_hat: 0.1,
        }
    }
}

impl WaterfallProfile {
    fn offset(&self, iterations: usize) -> f64 {
        let (k, n) = (self.reduced_iterations, self.max_iterations);
        if iterations < k {
            1.0 + self.first_iteration_excess * (k - iterations) as f64
        } else {
            let tail = self.decay.powi((n - k) as i32);
            (self.decay.powi((iterations - k) as i32) - tail) / (1.0 - tail)
        }
    }

    fn validate(&self) -> Result<(), LinkError> {
        let ok = self.slope_per_db > 0.0
            && self.slope_per_db.is_finite()
            && self.reduced_iterations >= 1
            && self.reduced_iterations < self.max_iterations
            && self.max_iterations <= usize::from(u8::MAX)
            && self.first_iteration_excess > 0.0
            && self.decay > 0.0
            && self.decay < 1.0
            && self.eps_hat > 0.0
            && self.eps_hat < 1.0;
        if ok {
            Ok(())
        } else {
            Err(LinkError::calibration(format!(
                "inconsistent waterfall profile {self:?}"
            )))
        }
    }
}

/// Builds the catalog whose TB outage crosses `eps_hat` exactly at each
/// anchor's switching SNRs.
pub fn synthesize(
    anchors: &[RateAnchor],
    profile: &WaterfallProfile,
) -> Result<McsCatalog<f64>, LinkError> {
    profile.validate()?;
    let entries = anchors
        .iter()
        .enumerate()
        .map(|(index, a)| {
            let gap = a.cas_switch_db - a.mrs_switch_db;
            if !(gap > 0.0) {
                return Err(LinkError::calibration(format!(
                    "MCS {index}: reduced-iteration switching point must lie above the full-iteration one"
                )));
            }
            let num_cbs = a.tb_bits.div_ceil(MAX_CB_BITS);
            // Per-CB error rate giving TB outage eps_hat.
            let cb_target = -(((1.0 - profile.eps_hat).ln()) / f64::from(num_cbs)).exp_m1();
            let logit = (1.0 / cb_target - 1.0).ln() / profile.slope_per_db;
            let full_mid = a.mrs_switch_db - logit;
            let waterfall = (1..=profile.max_iterations)
                .map(|i| Waterfall {
                    slope: profile.slope_per_db,
                    midpoint: full_mid + gap * profile.offset(i),
                })
                .collect();
            Ok(McsEntry {
                index,
                modulation: Modulation::for_index(index)
                    .ok_or_else(|| LinkError::calibration(format!("no modulation for MCS {index}")))?,
                tb_bits: a.tb_bits,
                waterfall,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    McsCatalog::new(entries)
}

/// One MCS in the calibration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McsRecord {
    pub index: usize,
    pub modulation: Modulation,
    pub tb_bits: u32,
    /// `[slope, midpoint]` per iteration count, starting at one iteration.
    pub waterfall: Vec<[f64; 2]>,
}

/// Versioned JSON calibration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFile {
    pub schema_version: u32,
    pub max_iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<WaterfallProfile>,
    pub entries: Vec<McsRecord>,
}

impl CalibrationFile {
    pub fn from_catalog(catalog: &McsCatalog<f64>, profile: Option<WaterfallProfile>) -> Self {
        Self {
            schema_version: CALIBRATION_SCHEMA_VERSION,
            max_iterations: catalog.max_iterations(),
            profile,
            entries: catalog
                .entries()
                .iter()
                .map(|e| McsRecord {
                    index: e.index,
                    modulation: e.modulation,
                    tb_bits: e.tb_bits,
                    waterfall: e.waterfall.iter().map(|w| [w.slope, w.midpoint]).collect(),
                })
                .collect(),
        }
    }

    pub fn parse(json: &str) -> Result<Self, LinkError> {
        serde_json::from_str(json)
            .map_err(|e| LinkError::calibration(format!("malformed calibration JSON: {e}")))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("calibration serializes");
        s.push('\n');
        s
    }

    /// Validates the document and converts it into a catalog over `T`.
    pub fn into_catalog<T: Real>(self) -> Result<McsCatalog<T>, LinkError> {
        if self.schema_version != CALIBRATION_SCHEMA_VERSION {
            return Err(LinkError::calibration(format!(
                "unsupported calibration schema_version {} (expected {CALIBRATION_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        for r in &self.entries {
            if r.waterfall.len() != self.max_iterations {
                return Err(LinkError::calibration(format!(
                    "MCS {} lists {} iteration curves, max_iterations is {}",
                    r.index,
                    r.waterfall.len(),
                    self.max_iterations
                )));
            }
        }
        let entries = self
            .entries
            .into_iter()
            .map(|r| McsEntry {
                index: r.index,
                modulation: r.modulation,
                tb_bits: r.tb_bits,
                waterfall: r
                    .waterfall
                    .iter()
                    .map(|&[a, b]| Waterfall {
                        slope: T::lit(a),
                        midpoint: T::lit(b),
                    })
                    .collect(),
            })
            .collect();
        McsCatalog::new(entries)
    }
}

const DEFAULT_CALIBRATION_JSON: &str = include_str!("../../data/calibration_lte_45rb.json");

impl McsCatalog<f64> {
    /// The shipped LTE 45-RB calibration.
    pub fn lte_default() -> Self {
        Self::from_json(DEFAULT_CALIBRATION_JSON).expect("shipped calibration is valid")
    }

    pub fn from_json(json: &str) -> Result<Self, LinkError> {
        CalibrationFile::parse(json)?.into_catalog()
    }

    /// Raw bytes of the shipped calibration file.
    pub fn default_json() -> &'static str {
        DEFAULT_CALIBRATION_JSON
    }
}

impl<T: Real> McsEntry<T> {
    /// SNR at which the TB outage after `iterations` equals `target`.
    pub fn tb_outage_crossing(&self, iterations: usize, target: T) -> T {
        let w = &self.waterfall[iterations.clamp(1, self.waterfall.len()) - 1];
        let c = T::lit(f64::from(self.num_cbs()));
        let cb = -(((T::one() - target).ln()) / c).exp_m1();
        debug_assert!(tb_channel_outage_prob(cb, self.num_cbs()).is_ok());
        w.inverse(cb)
    }
}
