use crnrx::adaptive::{AdaptiveConfig, H};
use crnrx::channel::SymbolKind;
use crnrx::receiver::{assemble_full_rx, IntervalPlan, IntervalRecord, RxRates, RxRun, Timing};
use crnrx::{realization_rng, run_ensemble, Signal, SignalSchedule, Simulator};

fn pilot(x: bool, n_rb: u64, pm: bool) -> IntervalPlan {
    IntervalPlan { kind: SymbolKind::Pilot, x, n_rb, pilot_mode_signal: pm, data_mode_signal: false }
}

fn data(x: bool, n_rb: u64, dm: bool) -> IntervalPlan {
    IntervalPlan { kind: SymbolKind::Data, x, n_rb, pilot_mode_signal: false, data_mode_signal: dm }
}

/// Runs `plans` on a fresh receiver with `n_w_init` weight molecules and one
/// helper molecule for each of `seeds` seeds.
fn runs(n_w_init: u64, plans: &[IntervalPlan], seeds: u64) -> Vec<Vec<IntervalRecord>> {
    let det = AdaptiveConfig { n_w_init, ..AdaptiveConfig::default() };
    let mut asm = assemble_full_rx(&det, &RxRates::default()).unwrap();
    asm.network.set_initial_count(H, 1).unwrap();
    (0..seeds)
        .map(|s| {
            let mut run = RxRun::new(&asm, Timing::default(), realization_rng(s, 0));
            run.check_pools_every_event(true);
            plans.iter().map(|p| run.run_interval(p).unwrap()).collect()
        })
        .collect()
}

#[test]
fn false_positive_pilot_adds_one_weight() {
    let recs = runs(5, &[pilot(false, 30, true)], 20);
    let hits = recs.iter().filter(|r| r[0].n_w_end == 6).count();
    assert!(hits >= 19, "{hits}/20 intervals added exactly one W");
    for r in &recs {
        assert!(!r[0].flipflop_x);
        assert!(r[0].int_xc_on > r[0].int_xc_off, "X_ON_C should dominate");
    }
}

#[test]
fn false_negative_pilot_removes_one_weight() {
    let recs = runs(5, &[pilot(false, 0, true), pilot(true, 0, false)], 20);
    let hits = recs.iter().filter(|r| r[1].n_w_start == 5 && r[1].n_w_end == 4).count();
    assert!(hits >= 19, "{hits}/20");
    assert!(recs.iter().all(|r| r[1].flipflop_x));
}

#[test]
fn correct_pilots_leave_weights_alone() {
    let recs = runs(5, &[pilot(false, 0, true), pilot(true, 30, false)], 10);
    for r in &recs {
        assert_eq!(r[0].n_w_end, 5);
        assert_eq!(r[1].n_w_end, 5);
    }
}

#[test]
fn data_mode_errors_do_not_adapt() {
    let plans = [pilot(false, 0, true), pilot(true, 30, false), data(false, 30, true), data(true, 0, false)];
    for r in runs(5, &plans, 10) {
        assert!(r[2].error_flag() && r[3].error_flag());
        assert_eq!(r[3].n_w_end, 5);
    }
}

#[test]
fn pilot_mode_pulse_realigns_flipflop() {
    // Two pilots leave the flip-flop on 1; a new PM-ES pulse must restart at 0.
    let plans = [pilot(false, 0, true), pilot(true, 30, false), pilot(false, 0, true), pilot(true, 30, false)];
    for r in runs(5, &plans, 10) {
        let seen: Vec<bool> = r.iter().map(|i| i.flipflop_x).collect();
        assert_eq!(seen, [false, true, false, true]);
    }
}

#[test]
fn detection_switch_precedes_reset_switch() {
    let plans: Vec<IntervalPlan> = (0..20).map(|l| pilot(l % 2 == 1, if l % 2 == 1 { 25 } else { 3 }, l == 0)).collect();
    let realizations = runs(10, &plans, 3);
    let recs: Vec<&IntervalRecord> = realizations.iter().flatten().collect();
    let both: Vec<(f64, f64)> = recs.iter().filter_map(|r| Some((r.d_switch_time?, r.r_switch_time?))).collect();
    assert!(both.len() * 10 >= recs.len() * 9, "{} of {} intervals saw both switches", both.len(), recs.len());
    for (d, r) in both {
        assert!(d < r, "D at {d}, R at {r}");
    }
}

#[test]
fn one_weight_step_after_a_completed_reset() {
    // A single helper molecule bounds the change only when the previous
    // interval was reset; a stale D_ON lets each new H act on its own.
    let plans: Vec<IntervalPlan> = (0..30).map(|l| pilot(l % 2 == 1, if l % 2 == 1 { 12 } else { 8 }, l == 0)).collect();
    for recs in runs(10, &plans, 6) {
        assert!(recs[0].n_w_end.abs_diff(recs[0].n_w_start) <= 1);
        for w in recs.windows(2) {
            if w[0].t_on_end < 5 {
                assert!(w[1].n_w_end.abs_diff(w[1].n_w_start) <= 1, "interval {}: {} -> {}", w[1].index, w[1].n_w_start, w[1].n_w_end);
            }
        }
    }
}

#[test]
fn helper_production_per_pulse() {
    // While ST-ES is on, H appears at rate k_H n_P_pilot, so from zero
    // Pr[n_H >= 1 after one pulse] = 1 - exp(-k_H n_P_pilot tau_a).
    let rates = RxRates::default();
    let mut net = crnrx::receiver::build_mode_tracker_and_helper(&rates).unwrap();
    let tau_a = Timing::default().tau_a;
    net.set_schedule(SignalSchedule::new(Signal::SymbolStart, vec![(0.0, tau_a)]).unwrap());
    let h = net.species_id(H).unwrap();
    let n = 20_000;
    let hits = run_ensemble(n, 4, None, |_, rng| {
        let mut sim = Simulator::new(&net, rng);
        sim.advance(tau_a).unwrap();
        (sim.count(h) >= 1) as u32
    })
    .into_iter()
    .sum::<u32>() as f64
        / n as f64;
    let expected = 1.0 - (-rates.k_h * 10.0 * tau_a).exp();
    assert!((hits - expected).abs() < 0.015, "{hits} vs {expected}");
}
