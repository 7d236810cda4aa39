//! Link abstraction for the LTE uplink turbo decoder.
//!
//! The decoder itself is replaced by a per-iteration code-block error-rate
//! model: for each of the 27 MCSs and each iteration count `i` the CBLER is a
//! logistic waterfall in dB. From those curves we get the channel outage of a
//! transport block and the distribution of decoder iterations, i.e. the
//! statistics of the error indicator and of the effort in bit-iterations.

mod calibration;
mod effort;
mod mcs;
mod segment;

pub use calibration::{
    synthesize, CalibrationFile, McsRecord, RateAnchor, WaterfallProfile,
    CALIBRATION_SCHEMA_VERSION, LTE_45RB_ANCHORS,
};
pub use effort::{iteration_pmf, simulate_tb, IterationLaw, TbRealization};
pub use mcs::{LinkCurve, McsCatalog, McsEntry, Modulation, TabulatedCurve, Waterfall, NUM_MCS};
pub use segment::{segment_tb, tb_channel_outage_prob, MAX_CB_BITS};

use thiserror::Error;

/// Default maximum number of turbo decoder iterations.
pub const DEFAULT_MAX_ITERATIONS: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum LinkError {
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("a transport block has at least one code block, got {0}")]
    InvalidCbCount(u32),
    #[error("SNR is NaN")]
    NanSnr,
    #[error("invalid calibration: {0}")]
    Calibration(String),
}

impl LinkError {
    pub(crate) fn calibration(msg: impl Into<String>) -> Self {
        Self::Calibration(msg.into())
    }
}
