use std::fmt;

use serde::{Deserialize, Serialize};

use crate::num::Real;

use super::{segment_tb, LinkError};

/// Number of uplink MCS indices (0..=26).
pub const NUM_MCS: usize = 27;

/// TB sizes that pin the calibration to the reference link curves.
const TB_ANCHORS: [(usize, u32); 2] = [(10, 8064), (11, 9216)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modulation {
    #[serde(rename = "QPSK")]
    Qpsk,
    #[serde(rename = "16QAM")]
    Qam16,
    #[serde(rename = "64QAM")]
    Qam64,
}

impl Modulation {
    /// Modulation used by uplink MCS `index`.
    pub fn for_index(index: usize) -> Option<Self> {
        match index {
            0..=10 => Some(Self::Qpsk),
            11..=20 => Some(Self::Qam16),
            21..=26 => Some(Self::Qam64),
            _ => None,
        }
    }

    pub fn bits_per_symbol(self) -> u32 {
        match self {
            Self::Qpsk => 2,
            Self::Qam16 => 4,
            Self::Qam64 => 6,
        }
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Qpsk => "QPSK",
            Self::Qam16 => "16QAM",
            Self::Qam64 => "64QAM",
        })
    }
}

/// Code-block error rate as a function of SNR (dB) and of the number of
/// decoder iterations.
///
/// Implementations must be nonincreasing in both arguments and return 1 for
/// zero iterations. Iteration counts above `max_iterations` are clamped.
pub trait LinkCurve<T: Real> {
    fn max_iterations(&self) -> usize;

    fn cbler(&self, snr_db: T, iterations: usize) -> T;
}

/// Logistic waterfall `1 / (1 + exp(slope * (snr_db - midpoint)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waterfall<T> {
    /// Steepness in 1/dB.
    pub slope: T,
    /// SNR in dB where the CBLER crosses one half.
    pub midpoint: T,
}

impl<T: Real> Waterfall<T> {
    #[inline]
    pub fn eval(&self, snr_db: T) -> T {
        T::one() / (T::one() + (self.slope * (snr_db - self.midpoint)).exp())
    }

    /// SNR at which the curve equals `cbler` (0 < cbler < 1).
    pub fn inverse(&self, cbler: T) -> T {
        self.midpoint + (T::one() / cbler - T::one()).ln() / self.slope
    }
}

/// One modulation and coding scheme with its per-iteration link curves.
#[derive(Debug, Clone, PartialEq)]
pub struct McsEntry<T> {
    pub index: usize,
    pub modulation: Modulation,
    /// Information bits per transport block at 45 resource blocks.
    pub tb_bits: u32,
    /// `waterfall[i - 1]` describes the CBLER after `i` iterations.
    pub waterfall: Vec<Waterfall<T>>,
}

impl<T: Real> McsEntry<T> {
    pub fn cb_bits(&self) -> Vec<u32> {
        segment_tb(self.tb_bits)
    }

    pub fn num_cbs(&self) -> u32 {
        self.tb_bits.div_ceil(super::MAX_CB_BITS)
    }

    /// TB channel outage after `iterations` decoder iterations.
    pub fn tb_outage(&self, snr_db: T, iterations: usize) -> T {
        let cb = self.cbler(snr_db, iterations);
        super::tb_channel_outage_prob(cb, self.num_cbs()).expect("cbler is a probability")
    }

    fn validate_curves(&self) -> Result<(), LinkError> {
        if self.waterfall.is_empty() {
            return Err(LinkError::calibration(format!(
                "MCS {} has no waterfall parameters",
                self.index
            )));
        }
        for (i, w) in self.waterfall.iter().enumerate() {
            if !(w.slope.is_finite() && w.slope > T::zero()) {
                return Err(LinkError::calibration(format!(
                    "MCS {} iteration {}: slope must be positive and finite, got {}",
                    self.index,
                    i + 1,
                    w.slope
                )));
            }
            if !w.midpoint.is_finite() {
                return Err(LinkError::calibration(format!(
                    "MCS {} iteration {}: midpoint is not finite",
                    self.index,
                    i + 1
                )));
            }
        }
        for (i, pair) in self.waterfall.windows(2).enumerate() {
            if pair[1].midpoint >= pair[0].midpoint {
                return Err(LinkError::calibration(format!(
                    "MCS {}: midpoint after {} iterations ({}) does not improve on {} iterations ({})",
                    self.index,
                    i + 2,
                    pair[1].midpoint,
                    i + 1,
                    pair[0].midpoint
                )));
            }
            // Distinct slopes would let adjacent curves cross somewhere.
            if pair[1].slope != pair[0].slope {
                return Err(LinkError::calibration(format!(
                    "MCS {}: slopes must be shared across iterations to keep the curves ordered",
                    self.index
                )));
            }
        }
        Ok(())
    }
}

impl<T: Real> LinkCurve<T> for McsEntry<T> {
    fn max_iterations(&self) -> usize {
        self.waterfall.len()
    }

    #[inline]
    fn cbler(&self, snr_db: T, iterations: usize) -> T {
        if iterations == 0 {
            return T::one();
        }
        let i = iterations.min(self.waterfall.len());
        self.waterfall[i - 1].eval(snr_db)
    }
}

/// SNR-independent curve given as a table `cbler[i]` for `i = 0..=I_max`.
/// Handy for hand-traced cases and deterministic stubs.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedCurve<T> {
    values: Vec<T>,
}

impl<T: Real> TabulatedCurve<T> {
    /// `values[0]` must be 1 and the table nonincreasing.
    pub fn new(values: Vec<T>) -> Result<Self, LinkError> {
        if values.len() < 2 {
            return Err(LinkError::calibration(
                "table needs entries for 0 and at least 1 iteration",
            ));
        }
        if values[0] != T::one() {
            return Err(LinkError::calibration(
                "cbler with zero iterations must be 1",
            ));
        }
        if values.iter().any(|v| !(*v >= T::zero() && *v <= T::one())) {
            return Err(LinkError::calibration(
                "table entries must be probabilities",
            ));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(LinkError::calibration(
                "table must be nonincreasing in iterations",
            ));
        }
        Ok(Self { values })
    }

    /// Every code block converges after exactly `iterations` iterations.
    pub fn converges_at(iterations: usize, max_iterations: usize) -> Self {
        assert!(iterations >= 1 && iterations <= max_iterations);
        let values = (0..=max_iterations)
            .map(|i| if i < iterations { T::one() } else { T::zero() })
            .collect();
        Self { values }
    }
}

impl<T: Real> LinkCurve<T> for TabulatedCurve<T> {
    fn max_iterations(&self) -> usize {
        self.values.len() - 1
    }

    fn cbler(&self, _snr_db: T, iterations: usize) -> T {
        self.values[iterations.min(self.values.len() - 1)]
    }
}

/// The 27-entry MCS table with its link curves.
#[derive(Debug, Clone, PartialEq)]
pub struct McsCatalog<T> {
    entries: Vec<McsEntry<T>>,
}

impl<T: Real> McsCatalog<T> {
    /// Builds a catalog, checking every per-MCS invariant.
    pub fn new(entries: Vec<McsEntry<T>>) -> Result<Self, LinkError> {
        if entries.len() != NUM_MCS {
            return Err(LinkError::calibration(format!(
                "expected {NUM_MCS} MCS entries, got {}",
                entries.len()
            )));
        }
        let max_iterations = entries[0].waterfall.len();
        for (pos, e) in entries.iter().enumerate() {
            if e.index != pos {
                return Err(LinkError::calibration(format!(
                    "entry {pos} carries index {}; entries must be listed in index order",
                    e.index
                )));
            }
            let expected = Modulation::for_index(pos).expect("index below NUM_MCS");
            if e.modulation != expected {
                return Err(LinkError::calibration(format!(
                    "MCS {pos} must use {expected}, got {}",
                    e.modulation
                )));
            }
            if e.tb_bits == 0 {
                return Err(LinkError::calibration(format!(
                    "MCS {pos} has an empty transport block"
                )));
            }
            if e.waterfall.len() != max_iterations {
                return Err(LinkError::calibration(format!(
                    "MCS {pos} has {} iteration curves, MCS 0 has {max_iterations}",
                    e.waterfall.len()
                )));
            }
            e.validate_curves()?;
        }
        for pair in entries.windows(2) {
            if pair[1].tb_bits <= pair[0].tb_bits {
                return Err(LinkError::calibration(format!(
                    "TB size must grow with the MCS index: MCS {} has {} bits, MCS {} has {}",
                    pair[0].index, pair[0].tb_bits, pair[1].index, pair[1].tb_bits
                )));
            }
        }
        for (index, bits) in TB_ANCHORS {
            if entries[index].tb_bits != bits {
                return Err(LinkError::calibration(format!(
                    "MCS {index} must carry {bits} bits, got {}",
                    entries[index].tb_bits
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[McsEntry<T>] {
        &self.entries
    }

    pub fn entry(&self, index: usize) -> &McsEntry<T> {
        &self.entries[index]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_iterations(&self) -> usize {
        self.entries[0].waterfall.len()
    }

    /// Largest TB size in the table.
    pub fn peak_tb_bits(&self) -> u32 {
        self.entries.last().map_or(0, |e| e.tb_bits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(index: usize, tb_bits: u32, mids: &[f64]) -> McsEntry<f64> {
        McsEntry {
            index,
            modulation: Modulation::for_index(index).unwrap(),
            tb_bits,
            waterfall: mids
                .iter()
                .map(|&m| Waterfall {
                    slope: 4.0,
                    midpoint: m,
                })
                .collect(),
        }
    }

    #[test]
    fn modulation_mapping() {
        assert_eq!(Modulation::for_index(0), Some(Modulation::Qpsk));
        assert_eq!(Modulation::for_index(10), Some(Modulation::Qpsk));
        assert_eq!(Modulation::for_index(11), Some(Modulation::Qam16));
        assert_eq!(Modulation::for_index(20), Some(Modulation::Qam16));
        assert_eq!(Modulation::for_index(21), Some(Modulation::Qam64));
        assert_eq!(Modulation::for_index(26), Some(Modulation::Qam64));
        assert_eq!(Modulation::for_index(27), None);
    }

    #[test]
    fn waterfall_shape() {
        let w = Waterfall {
            slope: 4.0,
            midpoint: 2.0,
        };
        assert_eq!(w.eval(2.0), 0.5);
        assert_eq!(w.eval(f64::INFINITY), 0.0);
        assert_eq!(w.eval(f64::NEG_INFINITY), 1.0);
        assert!((w.eval(w.inverse(0.25)) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn zero_iterations_is_certain_failure() {
        let e = entry(3, 2624, &[1.0, 0.0]);
        assert_eq!(e.cbler(100.0, 0), 1.0);
        assert!(e.cbler(0.0, 2) < e.cbler(0.0, 1));
        // Clamped beyond the last curve.
        assert_eq!(e.cbler(0.5, 9), e.cbler(0.5, 2));
    }

    #[test]
    fn curve_validation() {
        assert!(entry(0, 1280, &[1.0, 0.5]).validate_curves().is_ok());
        assert!(entry(0, 1280, &[1.0, 1.0]).validate_curves().is_err());
        let mut e = entry(0, 1280, &[1.0, 0.5]);
        e.waterfall[1].slope = 5.0;
        assert!(e.validate_curves().is_err());
        e.waterfall[1].slope = -4.0;
        e.waterfall[0].slope = -4.0;
        assert!(e.validate_curves().is_err());
    }

    #[test]
    fn tabulated_curve() {
        let c = TabulatedCurve::new(vec![1.0, 0.6, 0.3, 0.1]).unwrap();
        assert_eq!(c.max_iterations(), 3);
        assert_eq!(c.cbler(-7.0, 2), 0.3);
        assert!(TabulatedCurve::new(vec![0.9, 0.5]).is_err());
        assert!(TabulatedCurve::new(vec![1.0, 0.2, 0.5]).is_err());
        let stub = TabulatedCurve::<f64>::converges_at(4, 8);
        assert_eq!(stub.cbler(0.0, 3), 1.0);
        assert_eq!(stub.cbler(0.0, 4), 0.0);
    }
}
