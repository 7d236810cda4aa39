//! Decoding budgets and the per-subframe scheduler.
//!
//! Under local processing (LP) each RAP owns `C_max` bit-iterations per
//! second. Under cloud processing (CP) the `N_cloud` RAPs of the cloud group
//! pool theirs, and the subframe's transport blocks are decoded in ascending
//! SINR order until the pooled budget runs out. The first block that does
//! not fit uses up what is left and every later block is dropped unstarted.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::link_model::{simulate_tb, LinkError, McsCatalog, TbRealization};
use crate::mcs_policy::{LowSnrMode, Policy, PolicySet};
use crate::net_geometry::{draw_subframe, ChannelParams, NetworkLayout};
use crate::num::{linear_to_db, serde_rate};
use crate::rng::{Domain, StreamFamily};
use crate::stats::{IntMoments, Z95};

/// Per-subframe effort allowance in bit-iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EffortBudget {
    Limited(u64),
    Unlimited,
}

impl EffortBudget {
    /// `rate` bit-iterations per second sustained over `duration_s`.
    ///
    /// Efforts are integers, so a real budget `b` admits exactly the efforts
    /// `<= floor(b)`. Products within 1e-9 relative of an integer snap to it
    /// so that, say, 30e6 x 1e-3 is 30000 and not 29999.
    pub fn per_subframe(rate: f64, duration_s: f64) -> Self {
        let b = rate * duration_s;
        if !b.is_finite() {
            return Self::Unlimited;
        }
        let r = b.round();
        let v = if (b - r).abs() <= 1e-9 * b.abs().max(1.0) {
            r
        } else {
            b.floor()
        };
        Self::Limited(v.max(0.0) as u64)
    }

    /// Whether a TB of `effort` finishes within the budget. Outage needs the
    /// effort to strictly exceed it, so an exact fit is admitted.
    pub fn admits(self, effort: u64) -> bool {
        match self {
            Self::Limited(b) => effort <= b,
            Self::Unlimited => true,
        }
    }

    pub fn limit(self) -> Option<u64> {
        match self {
            Self::Limited(b) => Some(b),
            Self::Unlimited => None,
        }
    }
}

/// Fate of one transport block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Disposition {
    Decoded,
    ChannelOutage,
    ComputationalOutage,
    ChannelAndComputational,
}

impl Disposition {
    pub fn from_flags(channel: bool, computational: bool) -> Self {
        match (channel, computational) {
            (false, false) => Self::Decoded,
            (true, false) => Self::ChannelOutage,
            (false, true) => Self::ComputationalOutage,
            (true, true) => Self::ChannelAndComputational,
        }
    }

    pub fn is_success(self) -> bool {
        self == Self::Decoded
    }

    pub fn channel_failed(self) -> bool {
        matches!(self, Self::ChannelOutage | Self::ChannelAndComputational)
    }

    pub fn computational(self) -> bool {
        matches!(
            self,
            Self::ComputationalOutage | Self::ChannelAndComputational
        )
    }
}

/// Local or cloud processing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ProcessingMode {
    Lp,
    Cp,
}

impl fmt::Display for ProcessingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Lp => "LP",
            Self::Cp => "CP",
        })
    }
}

/// Decoding capacity of a cloud group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityBudget {
    pub mode: ProcessingMode,
    /// Bit-iterations per second per RAP; may be infinite.
    pub c_max: f64,
    pub n_cloud: usize,
    pub subframe_s: f64,
}

impl ComplexityBudget {
    pub fn per_rap(&self) -> EffortBudget {
        EffortBudget::per_subframe(self.c_max, self.subframe_s)
    }

    pub fn pooled(&self) -> EffortBudget {
        EffortBudget::per_subframe(self.c_max * self.n_cloud as f64, self.subframe_s)
    }
}

/// What the scheduler needs to know about one transport block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TbTask {
    pub rap: usize,
    /// Linear SINR; only its order matters.
    pub sinr: f64,
    pub effort: u64,
    pub channel_outage: bool,
    pub tb_bits: u32,
}

impl TbTask {
    pub fn from_realization(rap: usize, sinr: f64, tb: &TbRealization) -> Self {
        Self {
            rap,
            sinr,
            effort: tb.effort,
            channel_outage: tb.channel_outage,
            tb_bits: tb.tb_bits(),
        }
    }
}

/// Scheduler output, indexed like the input tasks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleOutcome {
    pub dispositions: Vec<Disposition>,
    pub charged: Vec<u64>,
    pub total_charged: u64,
    /// Unused budget summed over the pools that had work; `None` when
    /// unlimited.
    pub remaining: Option<u64>,
}

impl ScheduleOutcome {
    /// Information bits of the decoded blocks.
    pub fn delivered_bits(&self, tasks: &[TbTask]) -> u64 {
        tasks
            .iter()
            .zip(&self.dispositions)
            .filter(|(_, d)| d.is_success())
            .map(|(t, _)| u64::from(t.tb_bits))
            .sum()
    }
}

/// Decodes `tasks` within one subframe.
///
/// CP processes all tasks in ascending SINR order (ties by RAP index) against
/// the pooled budget. LP runs the same procedure separately for each RAP
/// against its own budget, which for one TB per RAP reduces to
/// `effort > C_max * subframe`.
pub fn schedule_subframe(tasks: &[TbTask], budget: &ComplexityBudget) -> ScheduleOutcome {
    let mut order: Vec<usize> = (0..tasks.len()).collect();
    order.sort_by(|&a, &b| {
        tasks[a]
            .sinr
            .total_cmp(&tasks[b].sinr)
            .then(tasks[a].rap.cmp(&tasks[b].rap))
    });
    let mut out = ScheduleOutcome {
        dispositions: vec![Disposition::Decoded; tasks.len()],
        charged: vec![0; tasks.len()],
        total_charged: 0,
        remaining: None,
    };
    match budget.mode {
        ProcessingMode::Cp => {
            out.remaining = run_pool(tasks, &order, budget.pooled(), &mut out);
        }
        ProcessingMode::Lp => {
            let mut raps: Vec<usize> = tasks.iter().map(|t| t.rap).collect();
            raps.sort_unstable();
            raps.dedup();
            let per_rap = budget.per_rap();
            let mut remaining = per_rap.limit().map(|_| 0);
            for rap in raps {
                let group: Vec<usize> = order
                    .iter()
                    .copied()
                    .filter(|&k| tasks[k].rap == rap)
                    .collect();
                let left = run_pool(tasks, &group, per_rap, &mut out);
                remaining = remaining.zip(left).map(|(a, b)| a + b);
            }
            out.remaining = remaining;
        }
    }
    out.total_charged = out.charged.iter().sum();
    out
}

fn run_pool(
    tasks: &[TbTask],
    order: &[usize],
    budget: EffortBudget,
    out: &mut ScheduleOutcome,
) -> Option<u64> {
    let Some(mut left) = budget.limit() else {
        for &k in order {
            out.charged[k] = tasks[k].effort;
            out.dispositions[k] = Disposition::from_flags(tasks[k].channel_outage, false);
        }
        return None;
    };
    let mut overflowed = false;
    for &k in order {
        let t = &tasks[k];
        let comp = if overflowed {
            true
        } else if t.effort <= left {
            out.charged[k] = t.effort;
            left -= t.effort;
            false
        } else {
            out.charged[k] = left;
            left = 0;
            overflowed = true;
            true
        };
        out.dispositions[k] = Disposition::from_flags(t.channel_outage, comp);
    }
    Some(left)
}

/// Probability that independent per-RAP efforts sum to more than `budget`.
///
/// `efforts[r]` lists `(effort, probability)` pairs for RAP `r`. The sum
/// distribution is built by convolution, with every sum beyond the budget
/// merged into one overflow atom. Exact for exact probability types.
pub fn comp_outage_prob<P>(efforts: &[Vec<(u64, P)>], budget: EffortBudget) -> P
where
    P: Clone + Zero + One,
{
    let Some(b) = budget.limit() else {
        return P::zero();
    };
    let cap = b.saturating_add(1);
    let mut dist: BTreeMap<u64, P> = BTreeMap::from([(0, P::one())]);
    for support in efforts {
        let mut next: BTreeMap<u64, P> = BTreeMap::new();
        for (&s, p) in &dist {
            for (e, q) in support {
                let key = s.saturating_add(*e).min(cap);
                let mass = p.clone() * q.clone();
                next.entry(key)
                    .and_modify(|m| *m = m.clone() + mass.clone())
                    .or_insert(mass);
            }
        }
        dist = next;
    }
    dist.range(cap..)
        .fold(P::zero(), |acc, (_, p)| acc + p.clone())
}

/// Which parameter the network sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    CMax,
    Lambda,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetSweepConfig {
    pub axis: SweepAxis,
    /// User densities per km²; a single entry for budget sweeps.
    pub lambdas: Vec<f64>,
    /// Bit-iterations per second per RAP; may contain infinity.
    pub c_max: Vec<f64>,
    pub policies: Vec<Policy>,
    pub modes: Vec<ProcessingMode>,
    pub n_subframes: u64,
    pub seed: u64,
    pub subframe_s: f64,
    pub low_snr: LowSnrMode,
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Link(#[from] LinkError),
}

/// One (λ, C_max, mode, policy) point of a network sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkRecord {
    pub axis: SweepAxis,
    /// λ or C_max, whichever the sweep varies.
    #[serde(with = "serde_rate")]
    pub grid_value: f64,
    pub lambda: f64,
    #[serde(with = "serde_rate")]
    pub c_max: f64,
    pub mode: ProcessingMode,
    pub policy: Policy,
    pub n_subframes: u64,
    pub sum_throughput_bps: f64,
    pub sum_throughput_ci_low: f64,
    pub sum_throughput_ci_high: f64,
    /// Throughput of each cloud-group cell, in cloud-group order.
    pub per_cell_throughput_bps: Vec<f64>,
    /// Fraction of transmitted TBs lost to the budget.
    pub comp_outage_rate: f64,
    /// Fraction of transmitted TBs whose decoding failed on the channel.
    pub channel_outage_rate: f64,
    /// Mean number of active cloud-group cells per subframe.
    pub mean_active_cells: f64,
    /// Delivered bits of every subframe, for paired comparisons.
    #[serde(skip)]
    pub subframe_bits: Vec<u64>,
}

#[derive(Debug, Clone, Default)]
struct ArmAcc {
    cell_bits: Vec<u64>,
    attempts: u64,
    channel: u64,
    comp: u64,
    sum: IntMoments,
    subframe_bits: Vec<u64>,
}

impl ArmAcc {
    fn new(n_cloud: usize) -> Self {
        Self {
            cell_bits: vec![0; n_cloud],
            ..Default::default()
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.cell_bits.iter_mut().zip(&other.cell_bits) {
            *a += b;
        }
        self.attempts += other.attempts;
        self.channel += other.channel;
        self.comp += other.comp;
        self.sum = self.sum.merge(other.sum);
        self.subframe_bits.extend(other.subframe_bits);
        self
    }
}

const CHUNK: u64 = 128;

/// Sweeps the cloud group over `cfg.lambdas x cfg.c_max`.
///
/// Every grid point sees the same subframe drops: drops come from one
/// stream indexed by subframe, and a cell's activity is a fixed uniform
/// compared against its activation probability. TBs are drawn once per
/// (subframe, policy) and scored under every budget and mode, so all arms are
/// compared on common random numbers.
pub fn sweep_network(
    layout: &NetworkLayout<f64>,
    channel: &ChannelParams,
    catalog: &McsCatalog<f64>,
    tables: &PolicySet,
    cfg: &NetSweepConfig,
) -> Result<Vec<NetworkRecord>, SweepError> {
    if cfg.lambdas.is_empty()
        || cfg.c_max.is_empty()
        || cfg.policies.is_empty()
        || cfg.modes.is_empty()
    {
        return Err(SweepError::Invalid("sweep grids must be nonempty".into()));
    }
    if cfg.n_subframes == 0 {
        return Err(SweepError::Invalid("n_subframes must be positive".into()));
    }
    if let Some(c) = cfg.c_max.iter().find(|c| !(**c > 0.0)) {
        return Err(SweepError::Invalid(format!("c_max {c} must be positive")));
    }
    let n_cloud = layout.n_cloud();
    let drops = StreamFamily::new(cfg.seed, Domain::NetworkDrop);
    let tb_streams = StreamFamily::new(cfg.seed, Domain::NetworkTb);
    let arms: Vec<(Policy, ProcessingMode, f64)> = cfg
        .policies
        .iter()
        .flat_map(|&p| {
            cfg.modes
                .iter()
                .flat_map(move |&m| cfg.c_max.iter().map(move |&c| (p, m, c)))
        })
        .collect();
    let mut records = Vec::new();
    for &lambda in &cfg.lambdas {
        let params = ChannelParams { lambda, ..*channel };
        let n_chunks = cfg.n_subframes.div_ceil(CHUNK);
        let chunks: Vec<Result<Vec<ArmAcc>, SweepError>> = (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let mut accs = vec![ArmAcc::new(n_cloud); arms.len()];
                for t in c * CHUNK..((c + 1) * CHUNK).min(cfg.n_subframes) {
                    let drop = draw_subframe(layout, &params, &mut drops.stream(0, t));
                    let mut by_policy: Vec<(Policy, Vec<TbTask>, u64, u64)> = Vec::new();
                    for &policy in &cfg.policies {
                        let table = tables.table(policy);
                        let mut tasks = Vec::new();
                        let mut attempts = 0;
                        let mut silent = 0;
                        for (k, sinr) in drop.sinr.iter().enumerate() {
                            let Some(sinr) = *sinr else { continue };
                            attempts += 1;
                            match table.choose(linear_to_db(sinr), cfg.low_snr) {
                                None => silent += 1,
                                Some(m) => {
                                    let entry = catalog.entry(m);
                                    let mut rng = tb_streams.stream(k as u64, t);
                                    let tb = simulate_tb(
                                        entry.tb_bits,
                                        entry,
                                        linear_to_db(sinr),
                                        &mut rng,
                                    )?;
                                    tasks.push(TbTask::from_realization(k, sinr, &tb));
                                }
                            }
                        }
                        by_policy.push((policy, tasks, attempts, silent));
                    }
                    for (acc, &(policy, mode, c_max)) in accs.iter_mut().zip(&arms) {
                        let (_, tasks, attempts, silent) = by_policy
                            .iter()
                            .find(|b| b.0 == policy)
                            .expect("policy evaluated");
                        let budget = ComplexityBudget {
                            mode,
                            c_max,
                            n_cloud,
                            subframe_s: cfg.subframe_s,
                        };
                        let out = schedule_subframe(tasks, &budget);
                        let mut total = 0;
                        for (task, d) in tasks.iter().zip(&out.dispositions) {
                            if d.is_success() {
                                acc.cell_bits[task.rap] += u64::from(task.tb_bits);
                                total += u64::from(task.tb_bits);
                            }
                            acc.channel += u64::from(d.channel_failed());
                            acc.comp += u64::from(d.computational());
                        }
                        acc.channel += silent;
                        acc.attempts += attempts;
                        acc.sum.push(total);
                        acc.subframe_bits.push(total);
                    }
                }
                Ok(accs)
            })
            .collect();
        let mut totals = vec![ArmAcc::new(n_cloud); arms.len()];
        for chunk in chunks {
            totals = totals
                .into_iter()
                .zip(chunk?)
                .map(|(a, b)| a.merge(b))
                .collect();
        }
        for (acc, &(policy, mode, c_max)) in totals.into_iter().zip(&arms) {
            let per_s = 1.0 / cfg.subframe_s;
            let n = cfg.n_subframes as f64;
            let ci = acc.sum.mean_interval(Z95);
            let rate = |x: u64| {
                if acc.attempts == 0 {
                    0.0
                } else {
                    x as f64 / acc.attempts as f64
                }
            };
            records.push(NetworkRecord {
                axis: cfg.axis,
                grid_value: match cfg.axis {
                    SweepAxis::CMax => c_max,
                    SweepAxis::Lambda => lambda,
                },
                lambda,
                c_max,
                mode,
                policy,
                n_subframes: cfg.n_subframes,
                sum_throughput_bps: acc.sum.mean() * per_s,
                sum_throughput_ci_low: ci.low * per_s,
                sum_throughput_ci_high: ci.high * per_s,
                per_cell_throughput_bps: acc
                    .cell_bits
                    .iter()
                    .map(|&b| b as f64 / n * per_s)
                    .collect(),
                comp_outage_rate: rate(acc.comp),
                channel_outage_rate: rate(acc.channel),
                mean_active_cells: acc.attempts as f64 / n,
                subframe_bits: acc.subframe_bits,
            });
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task(rap: usize, sinr: f64, effort: u64, channel_outage: bool) -> TbTask {
        TbTask {
            rap,
            sinr,
            effort,
            channel_outage,
            tb_bits: 1000,
        }
    }

    fn cp(c_max: f64, n_cloud: usize) -> ComplexityBudget {
        ComplexityBudget {
            mode: ProcessingMode::Cp,
            c_max,
            n_cloud,
            subframe_s: 1e-3,
        }
    }

    #[test]
    fn budget_conversion() {
        assert_eq!(
            EffortBudget::per_subframe(30e6, 1e-3),
            EffortBudget::Limited(30_000)
        );
        assert_eq!(
            EffortBudget::per_subframe(50e6, 1e-3),
            EffortBudget::Limited(50_000)
        );
        assert_eq!(
            EffortBudget::per_subframe(1.5e3, 1e-3),
            EffortBudget::Limited(1)
        );
        assert_eq!(
            EffortBudget::per_subframe(f64::INFINITY, 1e-3),
            EffortBudget::Unlimited
        );
        assert!(EffortBudget::Limited(10).admits(10));
        assert!(!EffortBudget::Limited(10).admits(11));
    }

    #[test]
    fn cp_trace_from_hand_example() {
        // Pooled budget 35k over efforts 10k, 20k, 40k in ascending SINR.
        let tasks = [
            task(0, 1.0, 10_000, false),
            task(1, 2.0, 20_000, false),
            task(2, 3.0, 40_000, false),
        ];
        let out = schedule_subframe(&tasks, &cp(35e6, 1));
        assert_eq!(
            out.dispositions,
            vec![
                Disposition::Decoded,
                Disposition::Decoded,
                Disposition::ComputationalOutage
            ]
        );
        assert_eq!(out.charged, vec![10_000, 20_000, 5_000]);
        assert_eq!(out.remaining, Some(0));
    }

    #[test]
    fn overflow_drops_later_tasks_unstarted() {
        let tasks = [
            task(3, 9.0, 1, false),
            task(0, 1.0, 10, false),
            task(1, 2.0, 50, true),
            task(2, 3.0, 5, false),
        ];
        let out = schedule_subframe(&tasks, &cp(40e3, 1));
        assert_eq!(
            out.dispositions,
            vec![
                Disposition::ComputationalOutage,
                Disposition::Decoded,
                Disposition::ChannelAndComputational,
                Disposition::ComputationalOutage
            ]
        );
        assert_eq!(out.charged, vec![0, 10, 30, 0]);
    }

    #[test]
    fn ties_break_on_rap_index() {
        let tasks = [task(5, 1.0, 30, false), task(2, 1.0, 30, false)];
        let out = schedule_subframe(&tasks, &cp(40e3, 1));
        assert_eq!(out.dispositions[1], Disposition::Decoded);
        assert_eq!(out.dispositions[0], Disposition::ComputationalOutage);
    }

    #[test]
    fn unlimited_budget_follows_channel() {
        let tasks = [task(0, 1.0, 10, true), task(1, 2.0, 1 << 40, false)];
        let out = schedule_subframe(&tasks, &cp(f64::INFINITY, 2));
        assert_eq!(
            out.dispositions,
            vec![Disposition::ChannelOutage, Disposition::Decoded]
        );
        assert_eq!(out.remaining, None);
    }

    #[test]
    fn lp_is_per_rap() {
        let tasks = [task(0, 1.0, 30_001, false), task(1, 2.0, 30_000, false)];
        let lp = ComplexityBudget {
            mode: ProcessingMode::Lp,
            ..cp(30e6, 2)
        };
        let out = schedule_subframe(&tasks, &lp);
        assert_eq!(
            out.dispositions,
            vec![Disposition::ComputationalOutage, Disposition::Decoded]
        );
        assert_eq!(out.charged, vec![30_000, 30_000]);
        assert_eq!(out.remaining, Some(0));
        // Pooling the same budget decodes both.
        let out = schedule_subframe(&tasks, &cp(30.001e6, 2));
        assert!(out.dispositions.iter().all(|d| d.is_success()));
    }

    #[test]
    fn comp_outage_small_cases() {
        let two = vec![(1u64, 0.5f64), (3, 0.5)];
        assert_eq!(
            comp_outage_prob(&[two.clone(), two], EffortBudget::Limited(4)),
            0.25
        );
        let det = vec![(2u64, 1.0f64)];
        assert_eq!(
            comp_outage_prob(&[det.clone(), det], EffortBudget::Limited(4)),
            0.0
        );
        assert_eq!(
            comp_outage_prob::<f64>(&[vec![(9, 1.0)]], EffortBudget::Unlimited),
            0.0
        );
    }
}
