use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::num::Real;

use super::{segment_tb, LinkCurve, LinkError};

/// Distribution of the decoder iteration count of a single code block.
#[derive(Debug, Clone, PartialEq)]
pub enum IterationLaw<T> {
    /// `pmf[i - 1] = P(I = i | success)` for `i = 1..=I_max`.
    Converging { pmf: Vec<T>, p_fail: T },
    /// The block fails with probability one and runs `I_max` iterations.
    CertainFailure,
}

impl<T: Real> IterationLaw<T> {
    pub fn p_fail(&self) -> T {
        match self {
            Self::Converging { p_fail, .. } => *p_fail,
            Self::CertainFailure => T::one(),
        }
    }
}

/// Iteration-count law of a code block at `snr_db`.
///
/// A block still undecoded after `i - 1` iterations stops at iteration `i`
/// with probability `cbler(i - 1) - cbler(i)`; conditioning on success
/// divides by `1 - cbler(I_max)`.
pub fn iteration_pmf<T: Real, L: LinkCurve<T> + ?Sized>(
    curve: &L,
    snr_db: T,
) -> Result<IterationLaw<T>, LinkError> {
    if snr_db.is_nan() {
        return Err(LinkError::NanSnr);
    }
    let max_it = curve.max_iterations();
    let p_fail = curve.cbler(snr_db, max_it);
    if p_fail >= T::one() {
        return Ok(IterationLaw::CertainFailure);
    }
    let norm = T::one() - p_fail;
    let mut prev = T::one();
    let pmf = (1..=max_it)
        .map(|i| {
            let cur = curve.cbler(snr_db, i);
            let mass = (prev - cur).max(T::zero()) / norm;
            prev = cur;
            mass
        })
        .collect();
    Ok(IterationLaw::Converging { pmf, p_fail })
}

/// One simulated transport block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TbRealization {
    /// Information bits per code block, `K_r`.
    pub cb_bits: Vec<u32>,
    /// Executed decoder iterations per code block, `I_r`.
    pub cb_iters: Vec<u8>,
    pub cb_failed: Vec<bool>,
    /// At least one code block failed.
    pub channel_outage: bool,
    /// Decoding effort `sum_r K_r * I_r` in bit-iterations.
    pub effort: u64,
}

impl TbRealization {
    pub fn num_cbs(&self) -> usize {
        self.cb_bits.len()
    }

    pub fn tb_bits(&self) -> u32 {
        self.cb_bits.iter().sum()
    }
}

/// Simulates the decoding of a `tb_bits` transport block received at
/// `snr_db`: each code block fails independently with probability
/// `cbler(I_max)` and then burns `I_max` iterations; a successful block draws
/// its iteration count from [`iteration_pmf`].
pub fn simulate_tb<T, L, R>(
    tb_bits: u32,
    curve: &L,
    snr_db: T,
    rng: &mut R,
) -> Result<TbRealization, LinkError>
where
    T: Real,
    L: LinkCurve<T> + ?Sized,
    R: Rng + ?Sized,
{
    let law = iteration_pmf(curve, snr_db)?;
    let max_it = u8::try_from(curve.max_iterations()).expect("iteration cap fits in u8");
    let cb_bits = segment_tb(tb_bits);
    let mut cb_iters = Vec::with_capacity(cb_bits.len());
    let mut cb_failed = Vec::with_capacity(cb_bits.len());
    for _ in &cb_bits {
        let (iters, failed) = match &law {
            IterationLaw::CertainFailure => (max_it, true),
            IterationLaw::Converging { pmf, p_fail } => {
                if rng.random::<f64>() < p_fail.as_f64() {
                    (max_it, true)
                } else {
                    (draw_index(pmf, rng.random::<f64>()) as u8 + 1, false)
                }
            }
        };
        cb_iters.push(iters);
        cb_failed.push(failed);
    }
    let effort = cb_bits
        .iter()
        .zip(&cb_iters)
        .map(|(&k, &i)| u64::from(k) * u64::from(i))
        .sum();
    Ok(TbRealization {
        channel_outage: cb_failed.iter().any(|&f| f),
        cb_bits,
        cb_iters,
        cb_failed,
        effort,
    })
}

/// Inverse-CDF lookup; rounding slack falls on the last supported index.
fn draw_index<T: Real>(pmf: &[T], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in pmf.iter().enumerate() {
        let p = p.as_f64();
        if p > 0.0 {
            last = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last
}
