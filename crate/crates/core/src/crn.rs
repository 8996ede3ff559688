//! Chemical reaction network model: species, mass-action reactions with
//! catalysts and external-signal gates, and signal schedules.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CrnError {
    #[error("unknown species `{0}`")]
    UnknownSpecies(String),
    #[error("species id {0} out of range")]
    SpeciesOutOfRange(usize),
    #[error("duplicate species `{0}`")]
    DuplicateSpecies(String),
    #[error("species `{name}` declared with conflicting initial counts {first} and {second}")]
    ConflictingInitialCount { name: String, first: u64, second: u64 },
    #[error("invalid rate constant {rate} in reaction `{reaction}`")]
    InvalidRate { reaction: String, rate: f64 },
    #[error("invalid schedule for {signal}: {reason}")]
    InvalidSchedule { signal: Signal, reason: String },
    #[error("unknown external signal `{0}`")]
    UnknownSignal(String),
    #[error("state has {got} entries, network has {expected} species")]
    StateLength { expected: usize, got: usize },
    #[error("conservation pool `{pool}` violated: expected {expected}, found {found}")]
    PoolViolation { pool: String, expected: u64, found: u64 },
    #[error("conservation pool `{pool}` is not conserved by reaction `{reaction}`")]
    PoolNotConserved { pool: String, reaction: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Index of a species inside one [`ReactionNetwork`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpeciesId(pub usize);

impl SpeciesId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Species {
    pub name: String,
    pub initial_count: u64,
}

/// External signals that synchronize transmitter and receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Signal {
    /// ST-ES: marks the start of every symbol interval.
    SymbolStart,
    /// PM-ES: switches into pilot mode.
    PilotMode,
    /// DM-ES: switches into data mode.
    DataMode,
}

impl Signal {
    pub const ALL: [Signal; 3] = [Signal::SymbolStart, Signal::PilotMode, Signal::DataMode];

    pub fn index(self) -> usize {
        match self {
            Signal::SymbolStart => 0,
            Signal::PilotMode => 1,
            Signal::DataMode => 2,
        }
    }
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Signal::SymbolStart => "ST-ES",
            Signal::PilotMode => "PM-ES",
            Signal::DataMode => "DM-ES",
        })
    }
}

impl FromStr for Signal {
    type Err = CrnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "ST-ES" => Ok(Signal::SymbolStart),
            "PM-ES" => Ok(Signal::PilotMode),
            "DM-ES" => Ok(Signal::DataMode),
            other => Err(CrnError::UnknownSignal(other.to_string())),
        }
    }
}

/// ON intervals `[start, end)` of one external signal. Sorted and disjoint.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSchedule {
    signal: Signal,
    intervals: Vec<(f64, f64)>,
}

impl SignalSchedule {
    pub fn new(signal: Signal, intervals: Vec<(f64, f64)>) -> Result<Self, CrnError> {
        let invalid = |reason: String| CrnError::InvalidSchedule { signal, reason };
        for (i, &(s, e)) in intervals.iter().enumerate() {
            if !s.is_finite() || !e.is_finite() {
                return Err(invalid(format!("non-finite interval [{s}, {e})")));
            }
            if s >= e {
                return Err(invalid(format!("empty interval [{s}, {e})")));
            }
            if i > 0 && intervals[i - 1].1 > s {
                return Err(invalid(format!("interval [{s}, {e}) overlaps or is out of order")));
            }
        }
        Ok(Self { signal, intervals })
    }

    pub fn off(signal: Signal) -> Self {
        Self { signal, intervals: Vec::new() }
    }

    pub fn signal(&self) -> Signal {
        self.signal
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    /// Appends an interval that starts at or after the end of the last one.
    pub fn push(&mut self, start: f64, end: f64) -> Result<(), CrnError> {
        let mut v = std::mem::take(&mut self.intervals);
        v.push((start, end));
        match Self::new(self.signal, v) {
            Ok(s) => {
                *self = s;
                Ok(())
            }
            Err(e) => {
                // restore
                self.intervals = Vec::new();
                Err(e)
            }
        }
    }

    pub fn is_on(&self, t: f64) -> bool {
        // first interval whose end is > t
        let i = self.intervals.partition_point(|&(_, e)| e <= t);
        self.intervals.get(i).is_some_and(|&(s, _)| s <= t)
    }

    /// Earliest time strictly after `t` at which the signal state changes.
    pub fn next_change_after(&self, t: f64) -> Option<f64> {
        let i = self.intervals.partition_point(|&(_, e)| e <= t);
        let &(s, e) = self.intervals.get(i)?;
        if s > t {
            Some(s)
        } else {
            Some(e)
        }
    }

    fn union(&self, other: &SignalSchedule) -> SignalSchedule {
        let mut all: Vec<(f64, f64)> = self.intervals.iter().chain(&other.intervals).copied().collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(all.len());
        for (s, e) in all {
            match merged.last_mut() {
                Some(last) if s <= last.1 => last.1 = last.1.max(e),
                _ => merged.push((s, e)),
            }
        }
        SignalSchedule { signal: self.signal, intervals: merged }
    }
}

/// A mass-action reaction. Catalysts are folded into reactants and products.
#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    reactants: Vec<(SpeciesId, u32)>,
    products: Vec<(SpeciesId, u32)>,
    delta: Vec<(SpeciesId, i64)>,
    rate: f64,
    gate: Option<Signal>,
    label: String,
}

fn accumulate(list: &mut Vec<(SpeciesId, u32)>, id: SpeciesId, n: u32) {
    if n == 0 {
        return;
    }
    match list.iter_mut().find(|(s, _)| *s == id) {
        Some(entry) => entry.1 += n,
        None => list.push((id, n)),
    }
}

impl Reaction {
    pub fn new(
        reactants: &[(SpeciesId, u32)],
        products: &[(SpeciesId, u32)],
        catalysts: &[(SpeciesId, u32)],
        rate: f64,
        gate: Option<Signal>,
        label: impl Into<String>,
    ) -> Result<Self, CrnError> {
        let label = label.into();
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(CrnError::InvalidRate { reaction: label, rate });
        }
        let mut r = Vec::new();
        let mut p = Vec::new();
        for &(s, n) in reactants.iter().chain(catalysts) {
            accumulate(&mut r, s, n);
        }
        for &(s, n) in products.iter().chain(catalysts) {
            accumulate(&mut p, s, n);
        }
        r.sort();
        p.sort();
        let mut delta: Vec<(SpeciesId, i64)> = Vec::new();
        for &(s, n) in &r {
            delta.push((s, -(n as i64)));
        }
        for &(s, n) in &p {
            match delta.iter_mut().find(|(d, _)| *d == s) {
                Some(entry) => entry.1 += n as i64,
                None => delta.push((s, n as i64)),
            }
        }
        delta.retain(|&(_, d)| d != 0);
        delta.sort();
        Ok(Self { reactants: r, products: p, delta, rate, gate, label })
    }

    pub fn reactants(&self) -> &[(SpeciesId, u32)] {
        &self.reactants
    }

    pub fn products(&self) -> &[(SpeciesId, u32)] {
        &self.products
    }

    /// Net stoichiometric change, zero entries removed.
    pub fn delta(&self) -> &[(SpeciesId, i64)] {
        &self.delta
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn gate(&self) -> Option<Signal> {
        self.gate
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_rate(&self, rate: f64) -> Result<Self, CrnError> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(CrnError::InvalidRate { reaction: self.label.clone(), rate });
        }
        Ok(Self { rate, ..self.clone() })
    }

    /// Mass-action propensity with the gate assumed ON.
    ///
    /// `rate * prod_s n_s (n_s - 1) ... (n_s - m_s + 1)` over reactant species.
    #[inline]
    pub fn mass_action(&self, counts: &[u64]) -> f64 {
        let mut a = self.rate;
        for &(s, m) in &self.reactants {
            let n = counts[s.0];
            if n < m as u64 {
                return 0.0;
            }
            for j in 0..m as u64 {
                a *= (n - j) as f64;
            }
        }
        a
    }

    pub fn is_feasible(&self, counts: &[u64]) -> bool {
        self.reactants.iter().all(|&(s, m)| counts[s.0] >= m as u64)
    }

    /// Fires the reaction in place.
    ///
    /// Panics if a reactant count is below its multiplicity; the simulator
    /// never fires a reaction with zero propensity.
    #[inline]
    pub fn apply(&self, counts: &mut [u64]) {
        assert!(self.is_feasible(counts), "fired infeasible reaction `{}`", self.label);
        for &(s, d) in &self.delta {
            let c = &mut counts[s.0];
            *c = c.checked_add_signed(d).expect("molecule count underflow");
        }
    }

    fn remap(&self, map: &[SpeciesId]) -> Self {
        let m = |v: &[(SpeciesId, u32)]| {
            let mut out: Vec<_> = v.iter().map(|&(s, n)| (map[s.0], n)).collect();
            out.sort();
            out
        };
        let mut delta: Vec<_> = self.delta.iter().map(|&(s, d)| (map[s.0], d)).collect();
        delta.sort();
        Self {
            reactants: m(&self.reactants),
            products: m(&self.products),
            delta,
            rate: self.rate,
            gate: self.gate,
            label: self.label.clone(),
        }
    }
}

/// Named set of species whose total count every reaction must preserve.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConservationPool {
    pub name: String,
    pub members: Vec<SpeciesId>,
    pub total: u64,
}

impl ConservationPool {
    pub fn sum(&self, counts: &[u64]) -> u64 {
        self.members.iter().map(|s| counts[s.0]).sum()
    }
}

/// Species catalog, reactions, signal schedules and declared pools.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReactionNetwork {
    species: Vec<Species>,
    index: HashMap<String, SpeciesId>,
    reactions: Vec<Reaction>,
    schedules: Vec<SignalSchedule>,
    pools: Vec<ConservationPool>,
}

impl ReactionNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn species(&self) -> &[Species] {
        &self.species
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn pools(&self) -> &[ConservationPool] {
        &self.pools
    }

    pub fn schedules(&self) -> &[SignalSchedule] {
        &self.schedules
    }

    pub fn schedule(&self, signal: Signal) -> Option<&SignalSchedule> {
        self.schedules.iter().find(|s| s.signal == signal)
    }

    pub fn num_species(&self) -> usize {
        self.species.len()
    }

    /// Adds a species, or returns the existing id if the name is known with
    /// the same initial count.
    pub fn add_species(&mut self, name: &str, initial_count: u64) -> Result<SpeciesId, CrnError> {
        if let Some(&id) = self.index.get(name) {
            let first = self.species[id.0].initial_count;
            if first != initial_count {
                return Err(CrnError::ConflictingInitialCount {
                    name: name.to_string(),
                    first,
                    second: initial_count,
                });
            }
            return Ok(id);
        }
        let id = SpeciesId(self.species.len());
        self.species.push(Species { name: name.to_string(), initial_count });
        self.index.insert(name.to_string(), id);
        Ok(id)
    }

    /// Id of a species, created with zero initial count if missing.
    pub fn species_or_zero(&mut self, name: &str) -> SpeciesId {
        match self.index.get(name) {
            Some(&id) => id,
            None => self.add_species(name, 0).expect("fresh species"),
        }
    }

    pub fn species_id(&self, name: &str) -> Result<SpeciesId, CrnError> {
        self.index.get(name).copied().ok_or_else(|| CrnError::UnknownSpecies(name.to_string()))
    }

    pub fn species_name(&self, id: SpeciesId) -> &str {
        &self.species[id.0].name
    }

    pub fn set_initial_count(&mut self, name: &str, count: u64) -> Result<(), CrnError> {
        let id = self.species_id(name)?;
        self.species[id.0].initial_count = count;
        let species = &self.species;
        for pool in &mut self.pools {
            pool.total = pool.members.iter().map(|s| species[s.0].initial_count).sum();
        }
        Ok(())
    }

    pub fn initial_counts(&self) -> Vec<u64> {
        self.species.iter().map(|s| s.initial_count).collect()
    }

    pub fn add_reaction(&mut self, reaction: Reaction) -> Result<usize, CrnError> {
        for &(s, _) in reaction.reactants.iter().chain(&reaction.products) {
            if s.0 >= self.species.len() {
                return Err(CrnError::SpeciesOutOfRange(s.0));
            }
        }
        self.reactions.push(reaction);
        Ok(self.reactions.len() - 1)
    }

    /// Adds a reaction written as `A + 2 B -> C`, creating unknown species
    /// with zero initial count.
    pub fn add(
        &mut self,
        equation: &str,
        rate: f64,
        gate: Option<Signal>,
        catalysts: &[&str],
    ) -> Result<usize, CrnError> {
        let (lhs, rhs) = equation
            .split_once("->")
            .ok_or_else(|| CrnError::Parse { line: 0, message: format!("missing `->` in `{equation}`") })?;
        let reactants = self.parse_side(lhs, 0)?;
        let products = self.parse_side(rhs, 0)?;
        let cats: Vec<(SpeciesId, u32)> = catalysts.iter().map(|c| (self.species_or_zero(c.trim()), 1)).collect();
        let mut label = equation.trim().to_string();
        if !cats.is_empty() {
            label.push_str(&format!(" [cat {}]", catalysts.join(",")));
        }
        if let Some(g) = gate {
            label.push_str(&format!(" [{g}]"));
        }
        let r = Reaction::new(&reactants, &products, &cats, rate, gate, label)?;
        self.add_reaction(r)
    }

    pub(crate) fn parse_side(&mut self, side: &str, line: usize) -> Result<Vec<(SpeciesId, u32)>, CrnError> {
        let side = side.trim();
        if side.is_empty() || side == "0" || side == "∅" {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for term in side.split('+') {
            let term = term.trim();
            let split = term.find(|c: char| !c.is_ascii_digit()).unwrap_or(term.len());
            let (coef, name) = term.split_at(split);
            let name = name.trim();
            if name.is_empty() || name.contains(char::is_whitespace) {
                return Err(CrnError::Parse { line, message: format!("bad term `{term}`") });
            }
            let n: u32 = if coef.is_empty() {
                1
            } else {
                coef.parse().map_err(|_| CrnError::Parse { line, message: format!("bad coefficient in `{term}`") })?
            };
            out.push((self.species_or_zero(name), n));
        }
        Ok(out)
    }

    pub fn set_schedule(&mut self, schedule: SignalSchedule) {
        self.schedules.retain(|s| s.signal != schedule.signal);
        self.schedules.push(schedule);
        self.schedules.sort_by_key(|s| s.signal);
    }

    pub fn is_signal_on(&self, signal: Signal, t: f64) -> bool {
        self.schedule(signal).is_some_and(|s| s.is_on(t))
    }

    /// Time-dependent propensity of reaction `r` including its gate.
    pub fn propensity(&self, r: usize, counts: &[u64], t: f64) -> Result<f64, CrnError> {
        if counts.len() != self.species.len() {
            return Err(CrnError::StateLength { expected: self.species.len(), got: counts.len() });
        }
        let reaction = &self.reactions[r];
        if let Some(g) = reaction.gate {
            if !self.is_signal_on(g, t) {
                return Ok(0.0);
            }
        }
        Ok(reaction.mass_action(counts))
    }

    /// Declares a conservation pool over named species; total is taken from
    /// the current initial counts.
    pub fn declare_pool(&mut self, name: &str, members: &[&str]) -> Result<(), CrnError> {
        let ids = members.iter().map(|m| self.species_id(m)).collect::<Result<Vec<_>, _>>()?;
        let total = ids.iter().map(|s| self.species[s.0].initial_count).sum();
        self.pools.retain(|p| p.name != name);
        self.pools.push(ConservationPool { name: name.to_string(), members: ids, total });
        Ok(())
    }

    /// Checks that every declared pool is preserved by every reaction.
    pub fn verify_pools_structurally(&self) -> Result<(), CrnError> {
        for pool in &self.pools {
            for r in &self.reactions {
                let net: i64 = r.delta.iter().filter(|(s, _)| pool.members.contains(s)).map(|&(_, d)| d).sum();
                if net != 0 {
                    return Err(CrnError::PoolNotConserved { pool: pool.name.clone(), reaction: r.label.clone() });
                }
            }
        }
        Ok(())
    }

    pub fn check_pools(&self, counts: &[u64]) -> Result<(), CrnError> {
        for pool in &self.pools {
            let found = pool.sum(counts);
            if found != pool.total {
                return Err(CrnError::PoolViolation { pool: pool.name.clone(), expected: pool.total, found });
            }
        }
        Ok(())
    }

    /// Species that appear in reactions but in no declared pool.
    pub fn unpooled_species(&self) -> Vec<&str> {
        self.species
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.pools.iter().any(|p| p.members.contains(&SpeciesId(*i))))
            .map(|(_, s)| s.name.as_str())
            .collect()
    }

    /// Union of species (by name), concatenation of reactions, union of
    /// schedules and pools.
    pub fn merge<'a, I>(networks: I) -> Result<ReactionNetwork, CrnError>
    where
        I: IntoIterator<Item = &'a ReactionNetwork>,
    {
        let mut out = ReactionNetwork::new();
        for net in networks {
            let map = net
                .species
                .iter()
                .map(|s| out.add_species(&s.name, s.initial_count))
                .collect::<Result<Vec<_>, _>>()?;
            for r in &net.reactions {
                out.reactions.push(r.remap(&map));
            }
            for sched in &net.schedules {
                let merged = match out.schedule(sched.signal) {
                    Some(existing) => existing.union(sched),
                    None => sched.clone(),
                };
                out.set_schedule(merged);
            }
            for pool in &net.pools {
                if !out.pools.iter().any(|p| p.name == pool.name) {
                    out.pools.push(ConservationPool {
                        name: pool.name.clone(),
                        members: pool.members.iter().map(|s| map[s.0]).collect(),
                        total: pool.total,
                    });
                }
            }
        }
        Ok(out)
    }

    /// Copy with the rate constant of every reaction whose label starts with
    /// `label_prefix` replaced.
    pub fn with_rate(&self, label_prefix: &str, rate: f64) -> Result<ReactionNetwork, CrnError> {
        let mut out = self.clone();
        let mut hit = false;
        for r in &mut out.reactions {
            if r.label.starts_with(label_prefix) {
                *r = r.with_rate(rate)?;
                hit = true;
            }
        }
        if !hit {
            return Err(CrnError::Parse { line: 0, message: format!("no reaction labelled `{label_prefix}`") });
        }
        Ok(out)
    }
}

impl fmt::Display for Reaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(net: &ReactionNetwork, pairs: &[(&str, u64)]) -> Vec<u64> {
        let mut c = vec![0; net.num_species()];
        for (n, v) in pairs {
            c[net.species_id(n).unwrap().0] = *v;
        }
        c
    }

    #[test]
    fn bimolecular_propensity() {
        let mut net = ReactionNetwork::new();
        net.add("A + B_ON -> A + B_OFF", 2.0, None, &[]).unwrap();
        let c = counts(&net, &[("A", 3), ("B_ON", 1)]);
        assert_eq!(net.propensity(0, &c, 0.0).unwrap(), 6.0);
    }

    #[test]
    fn gated_reaction_is_zero_when_signal_off() {
        let mut net = ReactionNetwork::new();
        net.add("A_OFF -> A_ON", 10.0, Some(Signal::SymbolStart), &[]).unwrap();
        net.set_schedule(SignalSchedule::new(Signal::SymbolStart, vec![(1.0, 1.5)]).unwrap());
        let c = counts(&net, &[("A_OFF", 4)]);
        assert_eq!(net.propensity(0, &c, 0.5).unwrap(), 0.0);
        assert_eq!(net.propensity(0, &c, 1.0).unwrap(), 40.0);
        assert_eq!(net.propensity(0, &c, 1.5).unwrap(), 0.0);
    }

    #[test]
    fn insufficient_copies_give_zero() {
        let mut net = ReactionNetwork::new();
        net.add("2 H -> H", 1.0, None, &[]).unwrap();
        let c = counts(&net, &[("H", 1)]);
        assert_eq!(net.propensity(0, &c, 0.0).unwrap(), 0.0);
        let c = counts(&net, &[("H", 3)]);
        assert_eq!(net.propensity(0, &c, 0.0).unwrap(), 6.0);
    }

    #[test]
    fn wrong_state_length_is_config_error() {
        let mut net = ReactionNetwork::new();
        net.add("A -> B", 1.0, None, &[]).unwrap();
        assert!(matches!(net.propensity(0, &[1], 0.0), Err(CrnError::StateLength { .. })));
    }

    #[test]
    fn apply_consumes_and_produces() {
        let mut net = ReactionNetwork::new();
        net.add("H -> W", 1.0, None, &[]).unwrap();
        let mut c = counts(&net, &[("H", 1)]);
        net.reactions()[0].apply(&mut c);
        assert_eq!(c, counts(&net, &[("W", 1)]));
    }

    #[test]
    fn annihilation_removes_both() {
        let mut net = ReactionNetwork::new();
        net.add("X_ON_C + X_OFF_C -> 0", 5e4, None, &[]).unwrap();
        let mut c = counts(&net, &[("X_ON_C", 1), ("X_OFF_C", 1)]);
        net.reactions()[0].apply(&mut c);
        assert_eq!(c, vec![0, 0]);
    }

    #[test]
    fn catalyst_is_preserved() {
        let mut net = ReactionNetwork::new();
        net.add_species("A_ON", 1).unwrap();
        net.add("T_OFF -> T_ON", 0.01, None, &["A_ON"]).unwrap();
        let mut c = counts(&net, &[("A_ON", 1), ("T_OFF", 5)]);
        let r = &net.reactions()[0];
        assert_eq!(r.mass_action(&c), 0.05);
        r.apply(&mut c);
        assert_eq!(c, counts(&net, &[("A_ON", 1), ("T_OFF", 4), ("T_ON", 1)]));
        assert!(r.delta().iter().all(|(s, _)| net.species_name(*s) != "A_ON"));
    }

    #[test]
    #[should_panic(expected = "infeasible")]
    fn firing_infeasible_reaction_aborts() {
        let mut net = ReactionNetwork::new();
        net.add("H -> W", 1.0, None, &[]).unwrap();
        let mut c = vec![0, 0];
        net.reactions()[0].apply(&mut c);
    }

    #[test]
    fn negative_rate_rejected() {
        let mut net = ReactionNetwork::new();
        assert!(matches!(net.add("A -> B", -1.0, None, &[]), Err(CrnError::InvalidRate { .. })));
    }

    #[test]
    fn merge_shares_species_by_name() {
        let mut a = ReactionNetwork::new();
        a.add_species("T_OFF", 250).unwrap();
        a.add("T_OFF -> T_ON", 0.01, None, &["A_ON"]).unwrap();
        let mut b = ReactionNetwork::new();
        b.add("D_OFF -> D_ON", 0.8, None, &["T_ON"]).unwrap();
        let m = ReactionNetwork::merge([&a, &b]).unwrap();
        assert_eq!(m.reactions().len(), 2);
        assert_eq!(m.num_species(), 5);
        let t_on = m.species_id("T_ON").unwrap();
        assert!(m.reactions()[0].delta().iter().any(|(s, _)| *s == t_on));
        assert!(m.reactions()[1].reactants().iter().any(|(s, _)| *s == t_on));
    }

    #[test]
    fn merge_with_empty_is_identity() {
        let mut a = ReactionNetwork::new();
        a.add_species("X", 3).unwrap();
        a.add("X -> Y", 1.0, Some(Signal::PilotMode), &[]).unwrap();
        a.set_schedule(SignalSchedule::new(Signal::PilotMode, vec![(0.0, 1.0)]).unwrap());
        let m = ReactionNetwork::merge([&ReactionNetwork::new(), &a]).unwrap();
        assert_eq!(m, a);
    }

    #[test]
    fn merge_conflicting_counts_is_error() {
        let mut a = ReactionNetwork::new();
        a.add_species("W", 0).unwrap();
        let mut b = ReactionNetwork::new();
        b.add_species("W", 3).unwrap();
        assert!(matches!(ReactionNetwork::merge([&a, &b]), Err(CrnError::ConflictingInitialCount { .. })));
    }

    #[test]
    fn schedule_lookup_and_changes() {
        let s = SignalSchedule::new(Signal::SymbolStart, vec![(0.0, 0.5), (15.0, 15.5)]).unwrap();
        assert!(s.is_on(0.0));
        assert!(s.is_on(0.49));
        assert!(!s.is_on(0.5));
        assert!(s.is_on(15.2));
        assert_eq!(s.next_change_after(0.0), Some(0.5));
        assert_eq!(s.next_change_after(0.5), Some(15.0));
        assert_eq!(s.next_change_after(15.5), None);
        assert!(SignalSchedule::new(Signal::SymbolStart, vec![(0.0, 1.0), (0.5, 2.0)]).is_err());
        assert!(SignalSchedule::new(Signal::SymbolStart, vec![(1.0, 1.0)]).is_err());
    }

    #[test]
    fn pools_checked_structurally() {
        let mut net = ReactionNetwork::new();
        net.add_species("A_OFF", 10).unwrap();
        net.add("A_OFF -> A_ON", 10.0, None, &[]).unwrap();
        net.declare_pool("A", &["A_ON", "A_OFF"]).unwrap();
        net.verify_pools_structurally().unwrap();
        net.add("A_ON -> 0", 1.0, None, &[]).unwrap();
        assert!(net.verify_pools_structurally().is_err());
    }

    #[test]
    fn signal_names_round_trip() {
        for s in Signal::ALL {
            assert_eq!(s.to_string().parse::<Signal>().unwrap(), s);
        }
    }
}
