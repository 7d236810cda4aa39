//! Model invariants, checked over random inputs where the input space is
//! cheap to sample and over fixed grids where it is not.

use std::sync::OnceLock;

use proptest::prelude::*;

use cran_outage::cell_sim::{run_cell_trial, sweep_cell, CellRecord, CellSweepConfig};
use cran_outage::cloud_sched::{
    schedule_subframe, ComplexityBudget, EffortBudget, ProcessingMode, TbTask,
};
use cran_outage::link_model::{simulate_tb, LinkCurve, McsCatalog, NUM_MCS};
use cran_outage::mcs_policy::{
    raw_throughput, LowSnrMode, Policy, PolicySet, SearchGrid, DEFAULT_EPS_HAT, SUBFRAME_S,
};
use cran_outage::net_geometry::{sinr_kernel, Interferer};
use cran_outage::num::db_to_linear;
use cran_outage::rng::{substream, Domain};

fn catalog() -> &'static McsCatalog<f64> {
    static CAT: OnceLock<McsCatalog<f64>> = OnceLock::new();
    CAT.get_or_init(McsCatalog::lte_default)
}

fn tables() -> &'static PolicySet {
    static T: OnceLock<PolicySet> = OnceLock::new();
    T.get_or_init(|| PolicySet::build(catalog(), DEFAULT_EPS_HAT, SearchGrid::default()).unwrap())
}

proptest! {
    #[test]
    fn cbler_is_monotone(m in 0..NUM_MCS, g in -20.0f64..40.0, dg in 0.0f64..5.0, i in 1usize..8) {
        let e = catalog().entry(m);
        prop_assert!(e.cbler(g + dg, i) <= e.cbler(g, i));
        prop_assert!(e.cbler(g, i + 1) <= e.cbler(g, i));
        prop_assert_eq!(e.cbler(g, 0), 1.0);
    }

    #[test]
    fn effort_is_bounded_by_full_iterations(m in 0..NUM_MCS, g in -5.0f64..35.0, seed in any::<u64>()) {
        let e = catalog().entry(m);
        let imax = e.max_iterations() as u64;
        let tb = simulate_tb(e.tb_bits, e, g, &mut substream(seed, Domain::Validation, 20, 0)).unwrap();
        let bound = u64::from(e.tb_bits) * imax;
        prop_assert!(tb.effort <= bound);
        let all_full = tb.cb_iters.iter().all(|&i| u64::from(i) == imax);
        prop_assert_eq!(tb.effort == bound, all_full);
        prop_assert_eq!(tb.channel_outage, tb.cb_failed.iter().any(|&f| f));
        for (&failed, &it) in tb.cb_failed.iter().zip(&tb.cb_iters) {
            prop_assert!(!failed || u64::from(it) == imax);
        }
    }

    #[test]
    fn selection_is_monotone_and_mrs_is_faster(g in -20.0f64..60.0, dg in 0.0f64..10.0) {
        for p in [Policy::Mrs, Policy::Cas] {
            let t = tables().table(p);
            prop_assert!(t.select(g) <= t.select(g + dg));
        }
        let rate = |p: Policy| {
            raw_throughput(tables().table(p).select(g).map(|m| catalog().entry(m)), SUBFRAME_S)
        };
        prop_assert!(rate(Policy::Mrs) >= rate(Policy::Cas));
    }

    #[test]
    fn sinr_falls_with_interference(
        gain in 0.01f64..10.0,
        d in 0.01f64..2.0,
        alpha in 2.1f64..5.0,
        s in 0.0f64..=1.0,
        snr_db in -10.0f64..40.0,
        extra in 0.01f64..10.0,
    ) {
        let snr = db_to_linear(snr_db);
        let one = Interferer { gain: 1.0, distance_to_rap: 1.5, own_distance: 0.4 };
        let more = Interferer { gain: one.gain + extra, ..one };
        let base = sinr_kernel(gain, d, [], alpha, s, snr);
        let with = sinr_kernel(gain, d, [one], alpha, s, snr);
        let worse = sinr_kernel(gain, d, [more], alpha, s, snr);
        let nearer = sinr_kernel(gain, d, [Interferer { distance_to_rap: 1.0, ..one }], alpha, s, snr);
        prop_assert!(with < base && worse < with && nearer < with);
    }

    #[test]
    fn power_control_direction(d in 0.05f64..0.95, alpha in 2.1f64..5.0, s0 in 0.0f64..0.9, ds in 0.01f64..0.1) {
        // Closer than unit distance the residual path gain d^(alpha (s - 1))
        // shrinks as compensation grows; at s = 1 it vanishes.
        let sig = |s: f64| sinr_kernel(1.0, d, [], alpha, s, 1.0);
        prop_assert!(sig(s0 + ds) < sig(s0));
        prop_assert!((sig(1.0) - 1.0).abs() < 1e-12);
        prop_assert_eq!(sinr_kernel(1.7, 1.0, [], alpha, s0, 3.0), 1.7 * 3.0);
    }

    #[test]
    fn scheduler_invariants(
        raw in prop::collection::vec((0usize..4, 0.0f64..100.0, 0u64..5000, any::<bool>()), 0..12),
        c_max in 0.0f64..4e6,
        extra in 0.0f64..4e6,
    ) {
        let tasks: Vec<TbTask> = raw
            .iter()
            .map(|&(rap, sinr, effort, ch)| TbTask { rap, sinr, effort, channel_outage: ch, tb_bits: 100 + rap as u32 })
            .collect();
        let budget = |mode, c| ComplexityBudget { mode, c_max: c, n_cloud: 4, subframe_s: SUBFRAME_S };
        let cp = schedule_subframe(&tasks, &budget(ProcessingMode::Cp, c_max));
        let pool = budget(ProcessingMode::Cp, c_max).pooled().limit().unwrap();

        // Computational outages form a suffix of the SINR order.
        let mut order: Vec<usize> = (0..tasks.len()).collect();
        order.sort_by(|&a, &b| tasks[a].sinr.total_cmp(&tasks[b].sinr).then(tasks[a].rap.cmp(&tasks[b].rap)));
        let flags: Vec<bool> = order.iter().map(|&k| cp.dispositions[k].computational()).collect();
        prop_assert!(flags.windows(2).all(|w| w[0] <= w[1]));

        // Charged effort never exceeds the pool and uses it up on overflow.
        prop_assert!(cp.total_charged <= pool);
        prop_assert_eq!(cp.total_charged + cp.remaining.unwrap(), pool);
        if flags.iter().any(|&f| f) {
            prop_assert_eq!(cp.total_charged, pool);
        } else {
            prop_assert_eq!(cp.total_charged, tasks.iter().map(|t| t.effort).sum::<u64>());
        }

        // A larger budget never delivers less.
        let bigger = schedule_subframe(&tasks, &budget(ProcessingMode::Cp, c_max + extra));
        prop_assert!(bigger.delivered_bits(&tasks) >= cp.delivered_bits(&tasks));
        let lp = schedule_subframe(&tasks, &budget(ProcessingMode::Lp, c_max));
        let lp_bigger = schedule_subframe(&tasks, &budget(ProcessingMode::Lp, c_max + extra));
        prop_assert!(lp_bigger.delivered_bits(&tasks) >= lp.delivered_bits(&tasks));

        // With one RAP, LP and CP with an equal-sized pool coincide.
        let single: Vec<TbTask> = tasks.iter().map(|t| TbTask { rap: 0, ..*t }).collect();
        let one = |mode| ComplexityBudget { mode, c_max, n_cloud: 1, subframe_s: SUBFRAME_S };
        let (a, b) = (
            schedule_subframe(&single, &one(ProcessingMode::Lp)),
            schedule_subframe(&single, &one(ProcessingMode::Cp)),
        );
        prop_assert_eq!(a.dispositions, b.dispositions);
        prop_assert_eq!(a.charged, b.charged);

        // Unlimited budgets only lose blocks on the channel.
        let free = schedule_subframe(&tasks, &budget(ProcessingMode::Cp, f64::INFINITY));
        for (t, d) in tasks.iter().zip(&free.dispositions) {
            prop_assert_eq!(d.is_success(), !t.channel_outage);
        }
    }

    #[test]
    fn budget_snapping(rate in 1u64..200, k in 1u64..1000) {
        let c = rate as f64 * 1e6;
        prop_assert_eq!(EffortBudget::per_subframe(c, 1e-3), EffortBudget::Limited(rate * 1000));
        prop_assert!(EffortBudget::Limited(k).admits(k));
        prop_assert!(!EffortBudget::Limited(k).admits(k + 1));
    }
}

#[test]
fn selected_mcs_meets_outage_target() {
    // Analytic check on a dense grid.
    for p in [Policy::Mrs, Policy::Cas] {
        let t = tables().table(p);
        for k in 0..10_000 {
            let g = -20.0 + 80.0 * k as f64 / 9_999.0;
            if let Some(m) = t.select(g) {
                let eps = catalog().entry(m).tb_outage(g, t.iteration_budget);
                assert!(
                    eps <= DEFAULT_EPS_HAT + 1e-12,
                    "{p} MCS {m} at {g} dB: {eps}"
                );
            }
        }
    }
    // Monte Carlo check at a handful of SNRs: unconstrained outage of the
    // selected MCS stays within 3 sigma of the target.
    let n = 20_000u64;
    for (gi, g) in [5.0, 12.3, 18.0, 26.7, 33.0].into_iter().enumerate() {
        for p in [Policy::Mrs, Policy::Cas] {
            let t = tables().table(p);
            let mut fails = 0u64;
            for trial in 0..n {
                let mut rng = substream(7, Domain::Validation, 30 + gi as u64, trial);
                let cell =
                    run_cell_trial(catalog(), t, LowSnrMode::TransmitLowest, g, &mut rng).unwrap();
                let tb = cell.tb.unwrap();
                // CAS targets its 2-iteration outage; count blocks still
                // undecoded after that many iterations.
                let iters = t.iteration_budget as u8;
                fails += u64::from(
                    tb.cb_failed
                        .iter()
                        .zip(&tb.cb_iters)
                        .any(|(&f, &i)| f || i > iters),
                );
            }
            let eps = fails as f64 / n as f64;
            let sd = (DEFAULT_EPS_HAT * (1.0 - DEFAULT_EPS_HAT) / n as f64).sqrt();
            assert!(eps <= DEFAULT_EPS_HAT + 3.0 * sd, "{p} at {g} dB: {eps}");
        }
    }
}

fn sweep(policy: Policy, c_max: Vec<f64>, gammas: Vec<f64>, n_trials: u64) -> Vec<CellRecord> {
    let cfg = CellSweepConfig {
        gamma_db: gammas,
        policy,
        c_max,
        subframe_s: SUBFRAME_S,
        n_trials,
        seed: 11,
        low_snr: LowSnrMode::TransmitLowest,
    };
    sweep_cell(catalog(), tables(), &cfg).unwrap()
}

#[test]
fn huge_budget_matches_unconstrained_and_t_eff_identity() {
    let gammas: Vec<f64> = (0..=12).map(|k| -20.0 + 5.0 * k as f64).collect();
    for p in [Policy::Mrs, Policy::Cas] {
        let r = sweep(p, vec![f64::INFINITY, 1e12], gammas.clone(), 5_000);
        for pair in r.chunks(2) {
            let (u, c) = (&pair[0], &pair[1]);
            assert_eq!(u.outage, c.outage);
            assert_eq!(u.comp_outage, 0.0);
            assert_eq!(u.mean_effort, c.mean_effort);
            for rec in pair {
                let t = (1.0 - rec.outage) * rec.raw_throughput_bps;
                assert!((rec.effective_throughput_bps - t).abs() <= 1e-9 * t.max(1.0));
                assert!(rec.outage >= rec.channel_outage && rec.outage >= rec.comp_outage);
            }
        }
    }
}

#[test]
fn cas_outage_not_above_mrs_under_budget() {
    let gammas: Vec<f64> = (0..=15).map(|k| 10.0 + 2.0 * k as f64).collect();
    let n = 20_000u64;
    let mrs = sweep(Policy::Mrs, vec![50e6], gammas.clone(), n);
    let cas = sweep(Policy::Cas, vec![50e6], gammas, n);
    for (m, c) in mrs.iter().zip(&cas) {
        let var = |p: f64| p * (1.0 - p) / n as f64;
        let slack = 3.0 * (var(m.outage) + var(c.outage)).sqrt();
        assert!(
            c.outage <= m.outage + slack,
            "{} dB: CAS {} vs MRS {}",
            m.gamma_db,
            c.outage,
            m.outage
        );
    }
}

#[test]
fn budget_inflates_effort_where_it_binds() {
    let gammas: Vec<f64> = (0..=15).map(|k| 10.0 + 2.0 * k as f64).collect();
    let r = sweep(Policy::Mrs, vec![f64::INFINITY, 50e6], gammas, 20_000);
    let mut checked = 0;
    for pair in r.chunks(2) {
        let (u, c) = (&pair[0], &pair[1]);
        if c.comp_outage <= 0.01 {
            continue;
        }
        checked += 1;
        let se = |lo: Option<f64>, hi: Option<f64>| (hi.unwrap() - lo.unwrap()) / (2.0 * 1.96);
        let slack = 3.0
            * (se(u.effort_per_success_ci_low, u.effort_per_success_ci_high).powi(2)
                + se(c.effort_per_success_ci_low, c.effort_per_success_ci_high).powi(2))
            .sqrt();
        assert!(
            c.effort_per_success.unwrap() + slack >= u.effort_per_success.unwrap(),
            "{} dB",
            u.gamma_db
        );
    }
    assert!(checked > 0);
}

#[test]
fn skip_mode_stays_silent_below_lowest_threshold() {
    let t = tables().table(Policy::Mrs);
    let g = t.thresholds_db[0] - 1.5;
    let quiet = run_cell_trial(
        catalog(),
        t,
        LowSnrMode::Skip,
        g,
        &mut substream(1, Domain::Validation, 40, 0),
    )
    .unwrap();
    assert!(quiet.mcs.is_none() && quiet.tb.is_none());
    let loud = run_cell_trial(
        catalog(),
        t,
        LowSnrMode::TransmitLowest,
        g,
        &mut substream(1, Domain::Validation, 40, 0),
    )
    .unwrap();
    assert_eq!(loud.mcs, Some(0));
}
