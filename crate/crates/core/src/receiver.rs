//! Fully chemical adaptive receiver: stopwatch, detection and reset switches,
//! pilot/data mode tracking, helper molecules, pilot flip-flop, learning and
//! cleanup, driven symbol interval by symbol interval.

use rand_chacha::ChaCha8Rng;

use crate::adaptive::{self, AdaptiveConfig};
pub use crate::channel::SymbolKind;
use crate::crn::{CrnError, ReactionNetwork, Signal, SignalSchedule, SpeciesId};
use crate::sim::{SimError, Simulator};

/// Rate constants of the timing and control blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RxRates {
    pub k_a: f64,
    pub k_dea: f64,
    pub k_t_on: f64,
    pub k_t_off: f64,
    pub k_d_i: f64,
    pub k_d_e: f64,
    pub k_d_r: f64,
    pub k_r_i: f64,
    pub k_r_e: f64,
    pub k_r_r: f64,
    pub k_pilot: f64,
    pub k_data: f64,
    pub k_h: f64,
    pub k_h_deg: f64,
    pub k_ff1: f64,
    pub k_ff2: f64,
    pub k_ff3: f64,
    pub k_ff4: f64,
    pub k_ff5: f64,
    pub k_ff_r: f64,
    pub k_on_deg: f64,
    pub k_off_deg: f64,
}

impl Default for RxRates {
    fn default() -> Self {
        Self {
            k_a: 10.0,
            k_dea: 0.1,
            k_t_on: 0.01,
            k_t_off: 0.02,
            k_d_i: 1.0,
            k_d_e: 0.8,
            k_d_r: 0.5,
            k_r_i: 1.0,
            k_r_e: 0.1,
            k_r_r: 10.0,
            k_pilot: 100.0,
            k_data: 100.0,
            k_h: 0.1,
            k_h_deg: 500.0,
            k_ff1: 50.0,
            k_ff2: 50.0,
            k_ff3: 10.0,
            k_ff4: 1e5,
            k_ff5: 10.0,
            k_ff_r: 10.0,
            k_on_deg: 0.1,
            k_off_deg: 0.1,
        }
    }
}

impl RxRates {
    pub const KEYS: [&'static str; 22] = [
        "k_a", "k_dea", "k_t_on", "k_t_off", "k_d_i", "k_d_e", "k_d_r", "k_r_i", "k_r_e", "k_r_r", "k_pilot",
        "k_data", "k_h", "k_h_deg", "k_ff1", "k_ff2", "k_ff3", "k_ff4", "k_ff5", "k_ff_r", "k_on_deg", "k_off_deg",
    ];

    fn slot(&mut self, key: &str) -> Option<&mut f64> {
        Some(match key {
            "k_a" => &mut self.k_a,
            "k_dea" => &mut self.k_dea,
            "k_t_on" => &mut self.k_t_on,
            "k_t_off" => &mut self.k_t_off,
            "k_d_i" => &mut self.k_d_i,
            "k_d_e" => &mut self.k_d_e,
            "k_d_r" => &mut self.k_d_r,
            "k_r_i" => &mut self.k_r_i,
            "k_r_e" => &mut self.k_r_e,
            "k_r_r" => &mut self.k_r_r,
            "k_pilot" => &mut self.k_pilot,
            "k_data" => &mut self.k_data,
            "k_h" => &mut self.k_h,
            "k_h_deg" => &mut self.k_h_deg,
            "k_ff1" => &mut self.k_ff1,
            "k_ff2" => &mut self.k_ff2,
            "k_ff3" => &mut self.k_ff3,
            "k_ff4" => &mut self.k_ff4,
            "k_ff5" => &mut self.k_ff5,
            "k_ff_r" => &mut self.k_ff_r,
            "k_on_deg" => &mut self.k_on_deg,
            "k_off_deg" => &mut self.k_off_deg,
            _ => return None,
        })
    }

    /// Overrides one rate by key; returns false for unknown keys.
    pub fn set(&mut self, key: &str, value: f64) -> bool {
        match self.slot(key) {
            Some(v) => {
                *v = value;
                true
            }
            None => false,
        }
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.clone().slot(key).map(|v| *v)
    }
}

/// Initial molecule counts of the timing and control species.
pub fn default_initial_counts() -> Vec<(&'static str, u64)> {
    vec![
        ("A_ON", 0),
        ("A_OFF", 10),
        ("T_ON", 0),
        ("T_OFF", 250),
        ("P_pilot", 10),
        ("P_data", 0),
        ("D_ON", 0),
        ("D_OFF", 50),
        ("D_B", 0),
        ("R_ON", 50),
        ("R_OFF", 0),
        ("R_B", 0),
        ("L_ON", 1),
        ("L_OFF", 0),
        ("I_ON", 1),
        ("I_OFF", 0),
        ("Xtrue_ON", 1),
        ("Xtrue_OFF", 0),
        ("W", 0),
        ("X_ON_C", 0),
        ("X_OFF_C", 0),
        ("H", 0),
    ]
}

fn seeded(names: &[&str]) -> Result<ReactionNetwork, CrnError> {
    let defaults = default_initial_counts();
    let mut net = ReactionNetwork::new();
    for n in names {
        let c = defaults.iter().find(|(d, _)| d == n).map_or(0, |&(_, c)| c);
        net.add_species(n, c)?;
    }
    Ok(net)
}

pub fn build_stopwatch(r: &RxRates) -> Result<ReactionNetwork, CrnError> {
    let mut net = seeded(&["A_ON", "A_OFF", "T_ON", "T_OFF", "R_ON"])?;
    net.add("A_OFF -> A_ON", r.k_a, Some(Signal::SymbolStart), &[])?;
    net.add("T_OFF -> T_ON", r.k_t_on, None, &["A_ON"])?;
    net.add("A_ON -> A_OFF", r.k_dea, None, &["R_ON"])?;
    net.add("T_ON -> T_OFF", r.k_t_off, None, &["R_ON"])?;
    net.declare_pool("A", &["A_ON", "A_OFF"])?;
    net.declare_pool("T", &["T_ON", "T_OFF"])?;
    Ok(net)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchKind {
    Detection,
    Reset,
}

/// Bistable approximate-majority switch over `S_ON`, `S_B`, `S_OFF`, pushed
/// from OFF to ON by `T_ON` through the intermediate state:
///
/// ```text
/// S_ON  + S_OFF -> S_ON  + S_B     k_i
/// S_OFF + S_ON  -> S_OFF + S_B     k_i
/// S_ON  + S_B   -> 2 S_ON          k_i
/// S_OFF + S_B   -> 2 S_OFF         k_i
/// T_ON  + S_OFF -> T_ON  + S_B     k_e
/// T_ON  + S_B   -> T_ON  + S_ON    k_e
/// ```
///
/// The detection switch is reset by `R_ON` (`D_ON -> D_OFF`); the reset
/// switch is reset by the symbol-start signal (`R_ON -> R_OFF`).
pub fn build_switch(kind: SwitchKind, r: &RxRates) -> Result<ReactionNetwork, CrnError> {
    let (p, k_i, k_e) = match kind {
        SwitchKind::Detection => ("D", r.k_d_i, r.k_d_e),
        SwitchKind::Reset => ("R", r.k_r_i, r.k_r_e),
    };
    let on = format!("{p}_ON");
    let off = format!("{p}_OFF");
    let b = format!("{p}_B");
    let mut net = seeded(&[&on, &off, &b, "T_ON", "R_ON"])?;
    net.add(&format!("{off} -> {b}"), k_i, None, &[&on])?;
    net.add(&format!("{on} -> {b}"), k_i, None, &[&off])?;
    net.add(&format!("{b} -> {on}"), k_i, None, &[&on])?;
    net.add(&format!("{b} -> {off}"), k_i, None, &[&off])?;
    net.add(&format!("{off} -> {b}"), k_e, None, &["T_ON"])?;
    net.add(&format!("{b} -> {on}"), k_e, None, &["T_ON"])?;
    match kind {
        SwitchKind::Detection => net.add("D_ON -> D_OFF", r.k_d_r, None, &["R_ON"])?,
        SwitchKind::Reset => net.add("R_ON -> R_OFF", r.k_r_r, Some(Signal::SymbolStart), &[])?,
    };
    net.declare_pool(p, &[&on, &off, &b])?;
    Ok(net)
}

/// Pilot/data mode tracker together with helper-molecule production.
pub fn build_mode_tracker_and_helper(r: &RxRates) -> Result<ReactionNetwork, CrnError> {
    let mut net = seeded(&["P_pilot", "P_data", "H"])?;
    net.add("P_data -> P_pilot", r.k_pilot, Some(Signal::PilotMode), &[])?;
    net.add("P_pilot -> P_data", r.k_data, Some(Signal::DataMode), &[])?;
    net.add("0 -> H", r.k_h, Some(Signal::SymbolStart), &["P_pilot"])?;
    net.add("2 H -> H", r.k_h_deg, None, &[])?;
    net.declare_pool("P", &["P_pilot", "P_data"])?;
    Ok(net)
}

/// Flip-flop holding the current pilot value in `Xtrue_ON` / `Xtrue_OFF`.
pub fn build_flipflop(r: &RxRates) -> Result<ReactionNetwork, CrnError> {
    let mut net = seeded(&["Xtrue_ON", "Xtrue_OFF", "L_ON", "L_OFF", "I_ON", "I_OFF"])?;
    net.add("Xtrue_ON + L_ON -> Xtrue_OFF + L_OFF", r.k_ff1, Some(Signal::SymbolStart), &[])?;
    net.add("Xtrue_OFF + L_ON -> Xtrue_ON + L_OFF", r.k_ff2, Some(Signal::SymbolStart), &[])?;
    net.add("L_OFF -> L_ON", r.k_ff3, None, &["I_OFF"])?;
    net.add("I_OFF -> I_ON", r.k_ff4, Some(Signal::SymbolStart), &[])?;
    net.add("I_ON -> I_OFF", r.k_ff5, None, &[])?;
    net.add("Xtrue_ON -> Xtrue_OFF", r.k_ff_r, Some(Signal::PilotMode), &[])?;
    net.declare_pool("Xtrue", &["Xtrue_ON", "Xtrue_OFF"])?;
    net.declare_pool("L", &["L_ON", "L_OFF"])?;
    net.declare_pool("I", &["I_ON", "I_OFF"])?;
    Ok(net)
}

/// Detection reactions gated by `D_ON`, plus `R_ON` driven cleanup of the
/// counting species.
pub fn build_detection_block(det: &AdaptiveConfig, r: &RxRates) -> Result<ReactionNetwork, CrnError> {
    let mut net = adaptive::build_detector_with(det, &["D_ON"])?;
    net.add("X_ON_C -> 0", r.k_on_deg, None, &["R_ON"])?;
    net.add("X_OFF_C -> 0", r.k_off_deg, None, &["R_ON"])?;
    with_default_counts(net)
}

/// Learning reactions gated by `D_ON` and `P_pilot`.
pub fn build_learning_block(det: &AdaptiveConfig) -> Result<ReactionNetwork, CrnError> {
    with_default_counts(adaptive::build_learning_with(det, &["D_ON", "P_pilot"])?)
}

fn with_default_counts(mut net: ReactionNetwork) -> Result<ReactionNetwork, CrnError> {
    for (name, count) in default_initial_counts() {
        if net.species_id(name).is_ok() && name != adaptive::W {
            net.set_initial_count(name, count)?;
        }
    }
    Ok(net)
}

/// Merged receiver network with handles to the species the driver touches.
#[derive(Debug, Clone)]
pub struct RxAssembly {
    pub network: ReactionNetwork,
    pub rates: RxRates,
    pub detector: AdaptiveConfig,
    pub ids: RxIds,
}

#[derive(Debug, Clone, Copy)]
pub struct RxIds {
    pub y: SpeciesId,
    pub w: SpeciesId,
    pub xc_on: SpeciesId,
    pub xc_off: SpeciesId,
    pub h: SpeciesId,
    pub t_on: SpeciesId,
    pub d_on: SpeciesId,
    pub r_on: SpeciesId,
    pub xtrue_on: SpeciesId,
    pub p_pilot: SpeciesId,
}

pub fn assemble_full_rx(det: &AdaptiveConfig, rates: &RxRates) -> Result<RxAssembly, CrnError> {
    let blocks = [
        build_stopwatch(rates)?,
        build_switch(SwitchKind::Detection, rates)?,
        build_switch(SwitchKind::Reset, rates)?,
        build_mode_tracker_and_helper(rates)?,
        build_detection_block(det, rates)?,
        build_learning_block(det)?,
        build_flipflop(rates)?,
    ];
    let mut network = ReactionNetwork::merge(blocks.iter())?;
    network.set_initial_count(adaptive::W, det.n_w_init)?;
    network.verify_pools_structurally()?;
    log::debug!("species outside conservation pools: {}", network.unpooled_species().join(", "));
    let id = |n: &str| network.species_id(n);
    let ids = RxIds {
        y: id(adaptive::Y)?,
        w: id(adaptive::W)?,
        xc_on: id(adaptive::XC_ON)?,
        xc_off: id(adaptive::XC_OFF)?,
        h: id(adaptive::H)?,
        t_on: id("T_ON")?,
        d_on: id("D_ON")?,
        r_on: id("R_ON")?,
        xtrue_on: id(adaptive::XTRUE_ON)?,
        p_pilot: id("P_pilot")?,
    };
    Ok(RxAssembly { network, rates: *rates, detector: *det, ids })
}

/// One symbol interval as seen by the driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalPlan {
    pub kind: SymbolKind,
    pub x: bool,
    pub n_rb: u64,
    pub pilot_mode_signal: bool,
    pub data_mode_signal: bool,
}

/// Measurements from one simulated symbol interval.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalRecord {
    pub index: usize,
    pub kind: SymbolKind,
    pub x: bool,
    pub n_rb: u64,
    pub int_xc_on: f64,
    pub int_xc_off: f64,
    pub n_w_start: u64,
    pub n_w_end: u64,
    /// Pilot value held by the flip-flop after the symbol-start pulse.
    pub flipflop_x: bool,
    /// Time into the interval at which half of the detection switch is ON.
    pub d_switch_time: Option<f64>,
    /// Time into the interval, after the symbol-start pulse, at which half of
    /// the reset switch is ON.
    pub r_switch_time: Option<f64>,
    pub t_on_end: u64,
    pub events: u64,
}

impl IntervalRecord {
    pub fn p_rel_on(&self) -> f64 {
        p_rel_on(self.int_xc_on, self.int_xc_off)
    }

    pub fn error(&self) -> f64 {
        interval_error(self.x, self.int_xc_on, self.int_xc_off)
    }

    pub fn error_flag(&self) -> bool {
        self.error() > ERROR_FLAG_TOLERANCE
    }
}

pub const ERROR_FLAG_TOLERANCE: f64 = 1e-3;

/// Share of counting-species occupancy on the ON side; ½ without evidence.
pub fn p_rel_on(int_on: f64, int_off: f64) -> f64 {
    let total = int_on + int_off;
    if total > 0.0 {
        int_on / total
    } else {
        0.5
    }
}

/// Soft error of one interval, `|x - p_rel_on|`.
pub fn interval_error(x: bool, int_on: f64, int_off: f64) -> f64 {
    let xv = if x { 1.0 } else { 0.0 };
    (xv - p_rel_on(int_on, int_off)).abs()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub tau_sym: f64,
    pub tau_a: f64,
}

impl Default for Timing {
    fn default() -> Self {
        Self { tau_sym: 15.0, tau_a: 0.5 }
    }
}

/// One realization of the receiver, advanced one symbol interval at a time.
pub struct RxRun<'a> {
    asm: &'a RxAssembly,
    sim: Simulator<'a>,
    timing: Timing,
    index: usize,
    check_pools: bool,
}

impl<'a> RxRun<'a> {
    pub fn new(asm: &'a RxAssembly, timing: Timing, rng: ChaCha8Rng) -> Self {
        let mut sim = Simulator::new(&asm.network, rng);
        for s in Signal::ALL {
            sim.set_schedule(SignalSchedule::off(s));
        }
        Self { asm, sim, timing, index: 0, check_pools: false }
    }

    /// Check every conservation pool after every event (slower).
    pub fn check_pools_every_event(&mut self, on: bool) {
        self.check_pools = on;
    }

    pub fn simulator(&self) -> &Simulator<'a> {
        &self.sim
    }

    pub fn simulator_mut(&mut self) -> &mut Simulator<'a> {
        &mut self.sim
    }

    pub fn n_w(&self) -> u64 {
        self.sim.count(self.asm.ids.w)
    }

    pub fn interval_index(&self) -> usize {
        self.index
    }

    /// Simulates one interval: clamps Y, applies the symbol-start signal
    /// (and mode signals if requested) for `tau_a`, runs to the interval end.
    pub fn run_interval(&mut self, plan: &IntervalPlan) -> Result<IntervalRecord, SimError> {
        let ids = self.asm.ids;
        let t0 = self.sim.time();
        let ta = t0 + self.timing.tau_a;
        let t1 = t0 + self.timing.tau_sym;
        let pulse = |on: bool, s: Signal| {
            if on {
                SignalSchedule::new(s, vec![(t0, ta)])
            } else {
                Ok(SignalSchedule::off(s))
            }
        };
        self.sim.set_schedule(pulse(true, Signal::SymbolStart)?);
        self.sim.set_schedule(pulse(plan.pilot_mode_signal, Signal::PilotMode)?);
        self.sim.set_schedule(pulse(plan.data_mode_signal, Signal::DataMode)?);
        self.sim.set_count(ids.y, plan.n_rb);
        self.sim.reset_integrals();
        let n_w_start = self.sim.count(ids.w);
        let events_start = self.sim.events();

        let d_half = self.asm.network.pools().iter().find(|p| p.name == "D").map_or(25, |p| p.total.div_ceil(2));
        let r_half = self.asm.network.pools().iter().find(|p| p.name == "R").map_or(25, |p| p.total.div_ceil(2));
        let mut d_time = None;
        let mut r_time = None;
        let net = &self.asm.network;
        let check = self.check_pools;
        let mut pool_error = None;
        let mut observe = |e: crate::sim::Event<'_>| {
            if d_time.is_none() && e.counts[ids.d_on.0] >= d_half {
                d_time = Some(e.time - t0);
            }
            if r_time.is_none() && e.time >= ta && e.counts[ids.r_on.0] >= r_half {
                r_time = Some(e.time - t0);
            }
            if check && pool_error.is_none() {
                if let Err(err) = net.check_pools(e.counts) {
                    pool_error = Some(err);
                }
            }
        };
        self.sim.advance_observed(ta, &mut observe)?;
        let flipflop_x = self.sim.count(ids.xtrue_on) == 1;
        self.sim.advance_observed(t1, &mut observe)?;
        if let Some(err) = pool_error {
            return Err(err.into());
        }
        let rec = IntervalRecord {
            index: self.index,
            kind: plan.kind,
            x: plan.x,
            n_rb: plan.n_rb,
            int_xc_on: self.sim.integral(ids.xc_on),
            int_xc_off: self.sim.integral(ids.xc_off),
            n_w_start,
            n_w_end: self.sim.count(ids.w),
            flipflop_x,
            d_switch_time: d_time,
            r_switch_time: r_time,
            t_on_end: self.sim.count(ids.t_on),
            events: self.sim.events() - events_start,
        };
        self.index += 1;
        Ok(rec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assembly_has_all_table_species() {
        let asm = assemble_full_rx(&AdaptiveConfig::default(), &RxRates::default()).unwrap();
        for (name, count) in default_initial_counts() {
            let id = asm.network.species_id(name).unwrap();
            assert_eq!(asm.network.species()[id.0].initial_count, count, "{name}");
        }
        // Y is the only species without a pool besides the free molecules
        let mut free = asm.network.unpooled_species();
        free.sort();
        assert_eq!(free, vec!["H", "W", "X_OFF_C", "X_ON_C", "Y"]);
    }

    #[test]
    fn rate_keys_round_trip() {
        let mut r = RxRates::default();
        for key in RxRates::KEYS {
            assert!(r.get(key).is_some(), "{key}");
            assert!(r.set(key, 1.5));
            assert_eq!(r.get(key), Some(1.5));
        }
        assert!(!r.set("k_nope", 1.0));
    }

    #[test]
    fn p_rel_on_cases() {
        assert_eq!(p_rel_on(0.0, 3.0), 0.0);
        assert_eq!(p_rel_on(2.0, 2.0), 0.5);
        assert_eq!(p_rel_on(0.0, 0.0), 0.5);
        assert!(interval_error(true, 0.0, 0.0) > ERROR_FLAG_TOLERANCE);
    }
}
