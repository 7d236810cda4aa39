//! Single-cell Rayleigh-fading Monte Carlo.
//!
//! Each trial draws an instantaneous SNR `γ ~ Exp(mean 10^(Γ/10))`, picks the
//! MCS the policy allows at `γ`, simulates the transport block and compares
//! its decoding effort with the per-subframe budget `C_max * subframe`. Blocks
//! lost on the channel still consume their full effort.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud_sched::{Disposition, EffortBudget};
use crate::link_model::{simulate_tb, LinkCurve, LinkError, McsCatalog, TbRealization};
use crate::mcs_policy::{LowSnrMode, Policy, PolicySet, PolicyTable};
use crate::num::{db_to_linear, linear_to_db, serde_rate};
use crate::rng::{Domain, StreamFamily};
use crate::stats::{wilson_interval, IntMoments, Z95};

#[derive(Debug, Error)]
pub enum CellSimError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Link(#[from] LinkError),
}

/// Fate of a decoded block against `budget`: the disposition and the effort
/// actually spent, which stops at the budget when the deadline is missed.
pub fn judge(tb: &TbRealization, budget: EffortBudget) -> (Disposition, u64) {
    let comp = !budget.admits(tb.effort);
    let charged = budget.limit().map_or(tb.effort, |b| tb.effort.min(b));
    (Disposition::from_flags(tb.channel_outage, comp), charged)
}

/// Simulates one block of `tb_bits` on `curve` and judges it.
pub fn decode_with_budget<L, R>(
    tb_bits: u32,
    curve: &L,
    snr_db: f64,
    budget: EffortBudget,
    rng: &mut R,
) -> Result<(TbRealization, Disposition, u64), LinkError>
where
    L: LinkCurve<f64> + ?Sized,
    R: Rng + ?Sized,
{
    let tb = simulate_tb(tb_bits, curve, snr_db, rng)?;
    let (d, charged) = judge(&tb, budget);
    Ok((tb, d, charged))
}

/// One trial of the single-cell experiment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellTrial {
    pub mcs: Option<usize>,
    /// `None` when the policy stays silent.
    pub tb: Option<TbRealization>,
}

impl CellTrial {
    /// Silence counts as a channel outage with no effort.
    pub fn judge(&self, budget: EffortBudget) -> (Disposition, u64) {
        self.tb
            .as_ref()
            .map_or((Disposition::ChannelOutage, 0), |tb| judge(tb, budget))
    }

    pub fn tb_bits(&self) -> u32 {
        self.tb.as_ref().map_or(0, TbRealization::tb_bits)
    }
}

/// Selects an MCS for `gamma_db` and simulates its block.
pub fn run_cell_trial<R: Rng + ?Sized>(
    catalog: &McsCatalog<f64>,
    table: &PolicyTable,
    low_snr: LowSnrMode,
    gamma_db: f64,
    rng: &mut R,
) -> Result<CellTrial, LinkError> {
    if gamma_db.is_nan() {
        return Err(LinkError::NanSnr);
    }
    let mcs = table.choose(gamma_db, low_snr);
    let tb = match mcs {
        Some(m) => {
            let e = catalog.entry(m);
            Some(simulate_tb(e.tb_bits, e, gamma_db, rng)?)
        }
        None => None,
    };
    Ok(CellTrial { mcs, tb })
}

/// Sweep over average SNR for one policy and a set of budgets.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSweepConfig {
    /// Average SNRs Γ in dB.
    pub gamma_db: Vec<f64>,
    pub policy: Policy,
    /// Bit-iterations per second; may contain infinity.
    pub c_max: Vec<f64>,
    pub subframe_s: f64,
    pub n_trials: u64,
    pub seed: u64,
    pub low_snr: LowSnrMode,
}

impl CellSweepConfig {
    pub fn validate(&self) -> Result<(), CellSimError> {
        let bad = |m: String| Err(CellSimError::Invalid(m));
        if self.gamma_db.is_empty() {
            return bad("gamma_db grid is empty".into());
        }
        if let Some(g) = self.gamma_db.iter().find(|g| !g.is_finite()) {
            return bad(format!("gamma_db value {g} is not finite"));
        }
        if self.c_max.is_empty() {
            return bad("c_max list is empty".into());
        }
        if let Some(c) = self.c_max.iter().find(|c| !(**c > 0.0)) {
            return bad(format!("c_max {c} must be positive"));
        }
        if self.n_trials == 0 {
            return bad("n_trials must be at least 1".into());
        }
        if !(self.subframe_s > 0.0 && self.subframe_s.is_finite()) {
            return bad(format!("subframe_s {} must be positive", self.subframe_s));
        }
        Ok(())
    }
}

/// Estimates at one (Γ, policy, C_max) point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub gamma_db: f64,
    pub policy: Policy,
    #[serde(with = "serde_rate")]
    pub c_max: f64,
    pub n_trials: u64,
    /// Overall outage ε.
    pub outage: f64,
    pub outage_ci_low: f64,
    pub outage_ci_high: f64,
    /// Trials lost on the channel, with or without a budget overrun.
    pub channel_outage: f64,
    pub channel_outage_ci_low: f64,
    pub channel_outage_ci_high: f64,
    /// Trials whose effort exceeded the budget.
    pub comp_outage: f64,
    pub comp_outage_ci_low: f64,
    pub comp_outage_ci_high: f64,
    /// Mean selected rate in bit/s.
    pub raw_throughput_bps: f64,
    /// `(1 - ε) T_raw`.
    pub effective_throughput_bps: f64,
    /// Mean delivered rate in bit/s.
    pub goodput_bps: f64,
    pub goodput_ci_low: f64,
    pub goodput_ci_high: f64,
    /// Effort spent per second (including lost blocks) divided by the
    /// success fraction, in bit-iterations per second. Absent without
    /// successes.
    pub effort_per_success: Option<f64>,
    pub effort_per_success_ci_low: Option<f64>,
    pub effort_per_success_ci_high: Option<f64>,
    /// Mean effort per second over all trials.
    pub mean_effort: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Acc {
    n: u64,
    outage: u64,
    channel: u64,
    comp: u64,
    success: u64,
    /// Charged effort per trial.
    effort: IntMoments,
    /// Charged effort summed over successful trials only.
    effort_on_success: u128,
    raw: IntMoments,
    delivered: IntMoments,
}

impl Acc {
    fn push(&mut self, d: Disposition, charged: u64, tb_bits: u32) {
        self.n += 1;
        self.outage += u64::from(!d.is_success());
        self.channel += u64::from(d.channel_failed());
        self.comp += u64::from(d.computational());
        self.success += u64::from(d.is_success());
        self.effort.push(charged);
        if d.is_success() {
            self.effort_on_success += u128::from(charged);
        }
        self.raw.push(u64::from(tb_bits));
        self.delivered.push(if d.is_success() {
            u64::from(tb_bits)
        } else {
            0
        });
    }

    fn merge(self, o: Self) -> Self {
        Self {
            n: self.n + o.n,
            outage: self.outage + o.outage,
            channel: self.channel + o.channel,
            comp: self.comp + o.comp,
            success: self.success + o.success,
            effort: self.effort.merge(o.effort),
            effort_on_success: self.effort_on_success + o.effort_on_success,
            raw: self.raw.merge(o.raw),
            delivered: self.delivered.merge(o.delivered),
        }
    }

    /// Ratio estimator `sum(x) / sum(y)` for effort `x` and success
    /// indicator `y`, with its delta-method interval.
    fn effort_per_success(&self) -> Option<(f64, f64, f64)> {
        if self.success == 0 {
            return None;
        }
        let n = self.n as f64;
        let sx = self.effort.sum as f64;
        let sy = self.success as f64;
        let r = sx / sy;
        if self.n < 2 {
            return Some((r, r, r));
        }
        let sxx = self.effort.sum_sq as f64;
        let sxy = self.effort_on_success as f64;
        let ss = (sxx - 2.0 * r * sxy + r * r * sy).max(0.0);
        let se = (ss / (n * (n - 1.0))).sqrt() / (sy / n);
        Some((r, r - Z95 * se, r + Z95 * se))
    }
}

const CHUNK: u64 = 1024;

/// Runs `cfg.n_trials` trials at every Γ and scores them under every budget.
///
/// Trial `t` at grid index `g` draws from substream `(seed, g, t)`, so every
/// policy and budget sees the same SNR draws and the result does not depend
/// on the number of worker threads.
pub fn sweep_cell(
    catalog: &McsCatalog<f64>,
    tables: &PolicySet,
    cfg: &CellSweepConfig,
) -> Result<Vec<CellRecord>, CellSimError> {
    cfg.validate()?;
    let table = tables.table(cfg.policy);
    let family = StreamFamily::new(cfg.seed, Domain::CellTrial);
    let budgets: Vec<EffortBudget> = cfg
        .c_max
        .iter()
        .map(|&c| EffortBudget::per_subframe(c, cfg.subframe_s))
        .collect();
    let mut records = Vec::with_capacity(cfg.gamma_db.len() * budgets.len());
    for (g, &gamma_db) in cfg.gamma_db.iter().enumerate() {
        let mean = db_to_linear(gamma_db);
        let n_chunks = cfg.n_trials.div_ceil(CHUNK);
        let parts: Vec<Result<Vec<Acc>, LinkError>> = (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let mut accs = vec![Acc::default(); budgets.len()];
                for t in c * CHUNK..((c + 1) * CHUNK).min(cfg.n_trials) {
                    let mut rng = family.stream(g as u64, t);
                    let e: f64 = Exp1.sample(&mut rng);
                    let trial = run_cell_trial(
                        catalog,
                        table,
                        cfg.low_snr,
                        linear_to_db(mean * e),
                        &mut rng,
                    )?;
                    for (acc, &b) in accs.iter_mut().zip(&budgets) {
                        let (d, charged) = trial.judge(b);
                        acc.push(d, charged, trial.tb_bits());
                    }
                }
                Ok(accs)
            })
            .collect();
        let mut totals = vec![Acc::default(); budgets.len()];
        for part in parts {
            totals = totals
                .into_iter()
                .zip(part?)
                .map(|(a, b)| a.merge(b))
                .collect();
        }
        for (acc, &c_max) in totals.iter().zip(&cfg.c_max) {
            records.push(make_record(
                acc,
                gamma_db,
                cfg.policy,
                c_max,
                cfg.subframe_s,
            ));
        }
    }
    Ok(records)
}

fn make_record(
    acc: &Acc,
    gamma_db: f64,
    policy: Policy,
    c_max: f64,
    subframe_s: f64,
) -> CellRecord {
    let n = acc.n;
    let per_s = 1.0 / subframe_s;
    let outage_ci = wilson_interval(acc.outage, n, Z95);
    let channel_ci = wilson_interval(acc.channel, n, Z95);
    let comp_ci = wilson_interval(acc.comp, n, Z95);
    let outage = acc.outage as f64 / n as f64;
    let raw = acc.raw.mean() * per_s;
    let goodput_ci = acc.delivered.mean_interval(Z95);
    let eps = acc.effort_per_success();
    CellRecord {
        gamma_db,
        policy,
        c_max,
        n_trials: n,
        outage,
        outage_ci_low: outage_ci.low,
        outage_ci_high: outage_ci.high,
        channel_outage: acc.channel as f64 / n as f64,
        channel_outage_ci_low: channel_ci.low,
        channel_outage_ci_high: channel_ci.high,
        comp_outage: acc.comp as f64 / n as f64,
        comp_outage_ci_low: comp_ci.low,
        comp_outage_ci_high: comp_ci.high,
        raw_throughput_bps: raw,
        effective_throughput_bps: (1.0 - outage) * raw,
        goodput_bps: acc.delivered.mean() * per_s,
        goodput_ci_low: goodput_ci.low * per_s,
        goodput_ci_high: goodput_ci.high * per_s,
        effort_per_success: eps.map(|e| e.0 * per_s),
        effort_per_success_ci_low: eps.map(|e| e.1 * per_s),
        effort_per_success_ci_high: eps.map(|e| e.2 * per_s),
        mean_effort: acc.effort.mean() * per_s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link_model::TabulatedCurve;
    use crate::mcs_policy::{SearchGrid, DEFAULT_EPS_HAT, SUBFRAME_S};
    use crate::rng::substream;

    #[test]
    fn stub_curve_overruns_thirty_megabit_budget() {
        let curve = TabulatedCurve::<f64>::converges_at(4, 8);
        let mut rng = substream(0, Domain::Validation, 0, 0);
        let budget = EffortBudget::per_subframe(30e6, SUBFRAME_S);
        let (tb, d, charged) = decode_with_budget(8064, &curve, 10.0, budget, &mut rng).unwrap();
        assert_eq!(tb.effort, 32_256);
        assert_eq!(d, Disposition::ComputationalOutage);
        assert_eq!(charged, 30_000);
    }

    #[test]
    fn exact_fit_is_not_an_outage() {
        let curve = TabulatedCurve::<f64>::converges_at(4, 8);
        let mut rng = substream(0, Domain::Validation, 0, 0);
        let (_, d, charged) =
            decode_with_budget(8064, &curve, 10.0, EffortBudget::Limited(32_256), &mut rng)
                .unwrap();
        assert_eq!(d, Disposition::Decoded);
        assert_eq!(charged, 32_256);
        let (_, d, _) =
            decode_with_budget(8064, &curve, 10.0, EffortBudget::Unlimited, &mut rng).unwrap();
        assert_eq!(d, Disposition::Decoded);
    }

    #[test]
    fn small_sweep_is_consistent() {
        let cat = McsCatalog::lte_default();
        let tables = PolicySet::build(&cat, DEFAULT_EPS_HAT, SearchGrid::default()).unwrap();
        let cfg = CellSweepConfig {
            gamma_db: vec![-20.0, 10.0],
            policy: Policy::Mrs,
            c_max: vec![f64::INFINITY, 50e6],
            subframe_s: SUBFRAME_S,
            n_trials: 3000,
            seed: 7,
            low_snr: LowSnrMode::TransmitLowest,
        };
        let recs = sweep_cell(&cat, &tables, &cfg).unwrap();
        assert_eq!(recs.len(), 4);
        assert!(recs[0].outage >= 0.9);
        for r in &recs {
            assert!(r.outage >= r.channel_outage.max(r.comp_outage));
            assert!(
                (r.effective_throughput_bps - (1.0 - r.outage) * r.raw_throughput_bps).abs() < 1e-6
            );
            if r.c_max.is_infinite() {
                assert_eq!(r.comp_outage, 0.0);
                assert_eq!(r.outage, r.channel_outage);
            }
        }
        assert_eq!(sweep_cell(&cat, &tables, &cfg).unwrap(), recs);
    }

    #[test]
    fn invalid_configs_rejected() {
        let cat = McsCatalog::lte_default();
        let tables = PolicySet::build(&cat, DEFAULT_EPS_HAT, SearchGrid::default()).unwrap();
        let base = CellSweepConfig {
            gamma_db: vec![0.0],
            policy: Policy::Cas,
            c_max: vec![1e6],
            subframe_s: SUBFRAME_S,
            n_trials: 1,
            seed: 0,
            low_snr: LowSnrMode::Skip,
        };
        for cfg in [
            CellSweepConfig {
                gamma_db: vec![],
                ..base.clone()
            },
            CellSweepConfig {
                c_max: vec![0.0],
                ..base.clone()
            },
            CellSweepConfig {
                n_trials: 0,
                ..base.clone()
            },
        ] {
            assert!(matches!(
                sweep_cell(&cat, &tables, &cfg),
                Err(CellSimError::Invalid(_))
            ));
        }
        assert!(run_cell_trial(
            &cat,
            tables.table(Policy::Mrs),
            LowSnrMode::Skip,
            f64::NAN,
            &mut substream(0, Domain::Validation, 0, 0)
        )
        .is_err());
    }
}
