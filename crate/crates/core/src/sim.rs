//! Exact stochastic simulation with the modified next reaction method.
//!
//! Every reaction keeps an internal clock `T_k` (integrated propensity) and
//! the internal time `P_k` of its next firing. Propensities are piecewise
//! constant between events and gate flips, so `T_k` is brought up to date
//! only when `a_k` changes. Gate flips are handled as deterministic time
//! points: the engine stops there, switches the gated propensities and
//! re-solves their tentative firing times.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use thiserror::Error;

use crate::crn::{CrnError, ReactionNetwork, Signal, SignalSchedule, SpeciesId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("non-finite simulation time {0}")]
    NonFiniteTime(f64),
    #[error("cannot advance backwards from t={from} to t={to}")]
    Backwards { from: f64, to: f64 },
    #[error("event limit of {0} reached")]
    EventLimit(u64),
    #[error(transparent)]
    Crn(#[from] CrnError),
}

/// Seeded generator for realization `index` of an ensemble: ChaCha8 keyed by
/// the master seed, one stream per realization.
pub fn realization_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// What the simulator keeps of the event history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Recording {
    #[default]
    None,
    /// Every event as (time, reaction).
    Events,
    /// Full count vector after every `stride`-th event.
    Snapshots { stride: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub time: f64,
    pub reaction: usize,
    pub event_id: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub counts: Vec<u64>,
    pub event_id: u64,
}

/// Recorded history. Rows can always be reconstructed as count vectors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub species: Vec<String>,
    pub start_time: f64,
    pub start_counts: Vec<u64>,
    pub events: Vec<EventRecord>,
    pub snapshots: Vec<Snapshot>,
}

impl Trajectory {
    /// (time, counts, event_id) rows, starting with the initial state
    /// (event_id 0).
    pub fn rows(&self, network: &ReactionNetwork) -> Vec<(f64, Vec<u64>, u64)> {
        let mut out = vec![(self.start_time, self.start_counts.clone(), 0)];
        if !self.events.is_empty() {
            let mut c = self.start_counts.clone();
            for e in &self.events {
                network.reactions()[e.reaction].apply(&mut c);
                out.push((e.time, c.clone(), e.event_id));
            }
        } else {
            out.extend(self.snapshots.iter().map(|s| (s.time, s.counts.clone(), s.event_id)));
        }
        out
    }

    /// CSV with columns `time, <species...>, event_id`.
    pub fn write_csv<W: Write>(&self, network: &ReactionNetwork, mut w: W) -> io::Result<()> {
        write!(w, "time")?;
        for s in &self.species {
            write!(w, ",{s}")?;
        }
        writeln!(w, ",event_id")?;
        for (t, counts, id) in self.rows(network) {
            write!(w, "{t}")?;
            for c in counts {
                write!(w, ",{c}")?;
            }
            writeln!(w, ",{id}")?;
        }
        Ok(())
    }
}

/// State passed to observers after each event.
#[derive(Debug, Clone, Copy)]
pub struct Event<'a> {
    pub time: f64,
    pub reaction: usize,
    pub event_id: u64,
    pub counts: &'a [u64],
}

/// Indexed binary min-heap keyed by tentative firing time.
#[derive(Debug, Clone)]
struct TimeHeap {
    keys: Vec<f64>,
    heap: Vec<usize>,
    pos: Vec<usize>,
}

impl TimeHeap {
    fn new(keys: Vec<f64>) -> Self {
        let n = keys.len();
        let mut h = Self { keys, heap: (0..n).collect(), pos: (0..n).collect() };
        for i in (0..n / 2).rev() {
            h.sift_down(i);
        }
        h
    }

    #[inline]
    fn top(&self) -> Option<(usize, f64)> {
        self.heap.first().map(|&r| (r, self.keys[r]))
    }

    #[inline]
    fn update(&mut self, r: usize, key: f64) {
        let old = self.keys[r];
        self.keys[r] = key;
        let i = self.pos[r];
        if key < old {
            self.sift_up(i);
        } else if key > old {
            self.sift_down(i);
        }
    }

    #[inline]
    fn swap(&mut self, i: usize, j: usize) {
        self.heap.swap(i, j);
        self.pos[self.heap[i]] = i;
        self.pos[self.heap[j]] = j;
    }

    fn sift_up(&mut self, mut i: usize) {
        while i > 0 {
            let p = (i - 1) / 2;
            if self.keys[self.heap[i]] < self.keys[self.heap[p]] {
                self.swap(i, p);
                i = p;
            } else {
                break;
            }
        }
    }

    fn sift_down(&mut self, mut i: usize) {
        let n = self.heap.len();
        loop {
            let l = 2 * i + 1;
            if l >= n {
                break;
            }
            let r = l + 1;
            let mut m = l;
            if r < n && self.keys[self.heap[r]] < self.keys[self.heap[l]] {
                m = r;
            }
            if self.keys[self.heap[m]] < self.keys[self.heap[i]] {
                self.swap(i, m);
                i = m;
            } else {
                break;
            }
        }
    }
}

/// Flat, cache-friendly copy of the reaction data used in the inner loop.
#[derive(Debug, Clone)]
struct Compiled {
    rate: Vec<f64>,
    gate: Vec<u8>,
    reactant_off: Vec<u32>,
    reactant: Vec<(u32, u32)>,
    delta_off: Vec<u32>,
    delta: Vec<(u32, i64)>,
    dep_off: Vec<u32>,
    dep: Vec<u32>,
    species_dep_off: Vec<u32>,
    species_dep: Vec<u32>,
}

const NO_GATE: u8 = u8::MAX;

fn flatten<T: Copy>(lists: impl Iterator<Item = Vec<T>>) -> (Vec<u32>, Vec<T>) {
    let mut off = vec![0u32];
    let mut flat = Vec::new();
    for l in lists {
        flat.extend_from_slice(&l);
        off.push(flat.len() as u32);
    }
    (off, flat)
}

impl Compiled {
    fn new(net: &ReactionNetwork) -> Self {
        let ns = net.num_species();
        let mut species_deps = vec![Vec::new(); ns];
        for (k, r) in net.reactions().iter().enumerate() {
            for &(s, _) in r.reactants() {
                species_deps[s.0].push(k as u32);
            }
        }
        let deps: Vec<Vec<u32>> = net
            .reactions()
            .iter()
            .enumerate()
            .map(|(r, reaction)| {
                let mut d: Vec<u32> = reaction.delta().iter().flat_map(|(s, _)| species_deps[s.0].iter().copied()).collect();
                d.sort_unstable();
                d.dedup();
                d.retain(|&k| k as usize != r);
                d
            })
            .collect();
        let (reactant_off, reactant) =
            flatten(net.reactions().iter().map(|r| r.reactants().iter().map(|&(s, m)| (s.0 as u32, m)).collect()));
        let (delta_off, delta) =
            flatten(net.reactions().iter().map(|r| r.delta().iter().map(|&(s, d)| (s.0 as u32, d)).collect()));
        let (dep_off, dep) = flatten(deps.into_iter());
        let (species_dep_off, species_dep) = flatten(species_deps.into_iter());
        Self {
            rate: net.reactions().iter().map(|r| r.rate()).collect(),
            gate: net.reactions().iter().map(|r| r.gate().map_or(NO_GATE, |g| g.index() as u8)).collect(),
            reactant_off,
            reactant,
            delta_off,
            delta,
            dep_off,
            dep,
            species_dep_off,
            species_dep,
        }
    }

    #[inline]
    fn mass_action(&self, k: usize, counts: &[u64]) -> f64 {
        let mut a = self.rate[k];
        for &(s, m) in &self.reactant[self.reactant_off[k] as usize..self.reactant_off[k + 1] as usize] {
            let n = counts[s as usize];
            if n == 0 {
                return 0.0;
            }
            match m {
                1 => a *= n as f64,
                _ => {
                    if n < m as u64 {
                        return 0.0;
                    }
                    for j in 0..m as u64 {
                        a *= (n - j) as f64;
                    }
                }
            }
        }
        a
    }
}

/// One running realization of a network.
#[derive(Debug, Clone)]
pub struct Simulator<'n> {
    net: &'n ReactionNetwork,
    t: f64,
    counts: Vec<u64>,
    rng: ChaCha8Rng,
    // per reaction
    a: Vec<f64>,
    internal: Vec<f64>,
    next_internal: Vec<f64>,
    last_update: Vec<f64>,
    firings: Vec<u64>,
    heap: TimeHeap,
    plan: Compiled,
    // gates
    schedules: [SignalSchedule; 3],
    gate_on: [bool; 3],
    gated: [Vec<usize>; 3],
    next_gate_change: f64,
    // exact time integrals of every species since the last reset
    integral: Vec<f64>,
    integral_mark: Vec<f64>,
    events: u64,
    event_limit: Option<u64>,
    recording: Recording,
    trajectory: Trajectory,
}

impl<'n> Simulator<'n> {
    pub fn new(net: &'n ReactionNetwork, rng: ChaCha8Rng) -> Self {
        Self::with_state(net, net.initial_counts(), 0.0, rng).expect("initial counts match the network")
    }

    pub fn with_state(net: &'n ReactionNetwork, counts: Vec<u64>, t0: f64, rng: ChaCha8Rng) -> Result<Self, SimError> {
        if counts.len() != net.num_species() {
            return Err(CrnError::StateLength { expected: net.num_species(), got: counts.len() }.into());
        }
        if !t0.is_finite() {
            return Err(SimError::NonFiniteTime(t0));
        }
        let nr = net.reactions().len();
        let ns = net.num_species();
        let mut gated: [Vec<usize>; 3] = Default::default();
        for (k, r) in net.reactions().iter().enumerate() {
            if let Some(g) = r.gate() {
                gated[g.index()].push(k);
            }
        }
        let schedules = Signal::ALL.map(|s| net.schedule(s).cloned().unwrap_or_else(|| SignalSchedule::off(s)));
        let mut sim = Self {
            net,
            t: t0,
            counts,
            rng,
            a: vec![0.0; nr],
            internal: vec![0.0; nr],
            next_internal: vec![0.0; nr],
            last_update: vec![t0; nr],
            firings: vec![0; nr],
            heap: TimeHeap::new(vec![f64::INFINITY; nr]),
            plan: Compiled::new(net),
            schedules,
            gate_on: [false; 3],
            gated,
            next_gate_change: f64::INFINITY,
            integral: vec![0.0; ns],
            integral_mark: vec![t0; ns],
            events: 0,
            event_limit: None,
            recording: Recording::None,
            trajectory: Trajectory::default(),
        };
        for k in 0..nr {
            sim.next_internal[k] = sim.rng.sample(Exp1);
        }
        sim.sync_gates();
        for k in 0..nr {
            sim.refresh(k);
        }
        sim.reset_trajectory();
        Ok(sim)
    }

    pub fn network(&self) -> &ReactionNetwork {
        self.net
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, s: SpeciesId) -> u64 {
        self.counts[s.0]
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    /// Number of times each reaction fired.
    pub fn firings(&self) -> &[u64] {
        &self.firings
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn set_event_limit(&mut self, limit: Option<u64>) {
        self.event_limit = limit;
    }

    pub fn is_gate_on(&self, signal: Signal) -> bool {
        self.gate_on[signal.index()]
    }

    pub fn set_recording(&mut self, recording: Recording) {
        self.recording = recording;
        self.reset_trajectory();
    }

    /// Returns the recorded history and starts a new one at the current state.
    pub fn take_trajectory(&mut self) -> Trajectory {
        let tr = std::mem::take(&mut self.trajectory);
        self.reset_trajectory();
        tr
    }

    fn reset_trajectory(&mut self) {
        self.trajectory = Trajectory {
            species: self.net.species().iter().map(|s| s.name.clone()).collect(),
            start_time: self.t,
            start_counts: self.counts.clone(),
            events: Vec::new(),
            snapshots: Vec::new(),
        };
    }

    /// Replaces the schedule of one signal from the current time on.
    pub fn set_schedule(&mut self, schedule: SignalSchedule) {
        let i = schedule.signal().index();
        self.schedules[i] = schedule;
        let before = self.gate_on;
        self.sync_gates();
        if before[i] != self.gate_on[i] {
            for j in 0..self.gated[i].len() {
                let k = self.gated[i][j];
                self.refresh(k);
            }
        }
    }

    /// Overwrites the count of one species at the current time, e.g. to clamp
    /// receptor occupancy at the start of a symbol interval.
    pub fn set_count(&mut self, s: SpeciesId, n: u64) {
        if self.counts[s.0] == n {
            return;
        }
        self.flush_integral(s.0);
        self.counts[s.0] = n;
        for j in self.plan.species_dep_off[s.0]..self.plan.species_dep_off[s.0 + 1] {
            let k = self.plan.species_dep[j as usize] as usize;
            self.refresh(k);
        }
    }

    /// ∫ n_s dt since the last [`reset_integrals`](Self::reset_integrals).
    pub fn integral(&self, s: SpeciesId) -> f64 {
        self.integral[s.0] + self.counts[s.0] as f64 * (self.t - self.integral_mark[s.0])
    }

    pub fn reset_integrals(&mut self) {
        self.integral.iter_mut().for_each(|v| *v = 0.0);
        self.integral_mark.iter_mut().for_each(|v| *v = self.t);
    }

    /// Current propensity of reaction `k`, gate included.
    pub fn propensity(&self, k: usize) -> f64 {
        self.a[k]
    }

    #[inline]
    fn flush_integral(&mut self, s: usize) {
        self.integral[s] += self.counts[s] as f64 * (self.t - self.integral_mark[s]);
        self.integral_mark[s] = self.t;
    }

    fn sync_gates(&mut self) {
        let t = self.t;
        let mut next = f64::INFINITY;
        for (i, sched) in self.schedules.iter().enumerate() {
            self.gate_on[i] = sched.is_on(t);
            if let Some(c) = sched.next_change_after(t) {
                next = next.min(c);
            }
        }
        self.next_gate_change = next;
    }

    #[inline]
    fn current_propensity(&self, k: usize) -> f64 {
        let g = self.plan.gate[k];
        let open = g == NO_GATE || self.gate_on[g as usize];
        let a = if open { self.plan.mass_action(k, &self.counts) } else { 0.0 };
        debug_assert!(a >= 0.0 && a.is_finite());
        a
    }

    /// Brings the internal clock of `k` to the current time, then recomputes
    /// its propensity and tentative firing time.
    #[inline]
    fn refresh(&mut self, k: usize) {
        let t = self.t;
        let a = self.current_propensity(k);
        if a == self.a[k] {
            // tentative time is still exact
            return;
        }
        self.internal[k] += self.a[k] * (t - self.last_update[k]);
        self.last_update[k] = t;
        self.a[k] = a;
        let tau = if a > 0.0 { t + (self.next_internal[k] - self.internal[k]).max(0.0) / a } else { f64::INFINITY };
        self.heap.update(k, tau);
    }

    fn fire(&mut self, mu: usize) {
        let (lo, hi) = (self.plan.delta_off[mu] as usize, self.plan.delta_off[mu + 1] as usize);
        for &(s, d) in &self.plan.delta[lo..hi] {
            let s = s as usize;
            self.integral[s] += self.counts[s] as f64 * (self.t - self.integral_mark[s]);
            self.integral_mark[s] = self.t;
            self.counts[s] = self.counts[s].checked_add_signed(d).expect("fired infeasible reaction");
        }
        self.events += 1;
        self.firings[mu] += 1;
        // the fired clock has reached its threshold exactly
        self.internal[mu] = self.next_internal[mu];
        self.last_update[mu] = self.t;
        let e: f64 = self.rng.sample(Exp1);
        self.next_internal[mu] += e;
        let a = self.current_propensity(mu);
        self.a[mu] = a;
        let tau = if a > 0.0 { self.t + e / a } else { f64::INFINITY };
        self.heap.update(mu, tau);
        for j in self.plan.dep_off[mu]..self.plan.dep_off[mu + 1] {
            let k = self.plan.dep[j as usize] as usize;
            self.refresh(k);
        }
        match self.recording {
            Recording::None => {}
            Recording::Events => {
                self.trajectory.events.push(EventRecord { time: self.t, reaction: mu, event_id: self.events })
            }
            Recording::Snapshots { stride } => {
                if self.events % stride.max(1) == 0 {
                    self.trajectory.snapshots.push(Snapshot {
                        time: self.t,
                        counts: self.counts.clone(),
                        event_id: self.events,
                    });
                }
            }
        }
    }

    fn cross_gate_boundary(&mut self) {
        self.t = self.next_gate_change;
        let before = self.gate_on;
        self.sync_gates();
        for i in 0..3 {
            if before[i] != self.gate_on[i] {
                for j in 0..self.gated[i].len() {
                    let k = self.gated[i][j];
                    self.refresh(k);
                }
            }
        }
    }

    /// Executes all firings in `(t, t_end]` and sets the clock to `t_end`.
    pub fn advance(&mut self, t_end: f64) -> Result<(), SimError> {
        self.advance_observed(t_end, |_| {})
    }

    /// Like [`advance`](Self::advance), calling `observer` after every event.
    pub fn advance_observed<F: FnMut(Event<'_>)>(&mut self, t_end: f64, mut observer: F) -> Result<(), SimError> {
        if !t_end.is_finite() {
            return Err(SimError::NonFiniteTime(t_end));
        }
        if t_end < self.t {
            return Err(SimError::Backwards { from: self.t, to: t_end });
        }
        loop {
            let (mu, tau) = self.heap.top().unwrap_or((usize::MAX, f64::INFINITY));
            let gate = self.next_gate_change;
            if gate <= tau && gate <= t_end {
                self.cross_gate_boundary();
                continue;
            }
            if tau > t_end {
                break;
            }
            if let Some(limit) = self.event_limit {
                if self.events >= limit {
                    return Err(SimError::EventLimit(limit));
                }
            }
            self.t = tau;
            self.fire(mu);
            observer(Event { time: self.t, reaction: mu, event_id: self.events, counts: &self.counts });
        }
        self.t = t_end;
        Ok(())
    }
}

/// Runs `n` independent realizations, realization `i` seeded with
/// [`realization_rng`]`(master_seed, i)`. Results are in realization order
/// whatever the worker count.
pub fn run_ensemble<R, F>(n: usize, master_seed: u64, workers: Option<usize>, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize, ChaCha8Rng) -> R + Sync,
{
    let job = || (0..n).into_par_iter().map(|i| f(i, realization_rng(master_seed, i as u64))).collect();
    match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map(|pool| pool.install(job))
            .unwrap_or_else(|_| job()),
        None => job(),
    }
}
