//! Boltzmann-machine detector over nodes `(X̂, Y_1..Y_nr)`: Gibbs sampling,
//! moment-matching training, the MAP construction and its CRN realization.

use std::io::{self, BufRead, Write};

use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal};
use thiserror::Error;

use crate::channel::ChannelScenario;
use crate::crn::{CrnError, ReactionNetwork};

#[derive(Debug, Error)]
pub enum BmError {
    #[error("training diverged at step {step}")]
    Diverged { step: usize },
    #[error("weight W[1,{index}] = {value} is negative; no valid rate constant")]
    NegativeWeight { index: usize, value: f64 },
    #[error("bias theta_1 = {0} is positive; the mapping needs a non-positive bias")]
    PositiveBias(f64),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("bad model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Crn(#[from] CrnError),
}

pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Symmetric, zero-diagonal weights and a bias per node. Node 0 is X̂.
#[derive(Debug, Clone, PartialEq)]
pub struct BoltzmannMachine {
    m: usize,
    w: Vec<f64>,
    theta: Vec<f64>,
}

impl BoltzmannMachine {
    pub fn zeros(m: usize) -> Self {
        Self { m, w: vec![0.0; m * m], theta: vec![0.0; m] }
    }

    /// Builds from a row-major weight matrix and bias vector.
    pub fn from_parts(w: Vec<f64>, theta: Vec<f64>) -> Result<Self, BmError> {
        let m = theta.len();
        if w.len() != m * m {
            return Err(BmError::Invalid(format!("weight matrix has {} entries for {m} nodes", w.len())));
        }
        for i in 0..m {
            if w[i * m + i] != 0.0 {
                return Err(BmError::Invalid(format!("non-zero diagonal at {i}")));
            }
            for j in 0..i {
                if w[i * m + j] != w[j * m + i] {
                    return Err(BmError::Invalid(format!("asymmetric weights at ({i},{j})")));
                }
            }
        }
        if w.iter().chain(&theta).any(|v| !v.is_finite()) {
            return Err(BmError::Invalid("non-finite parameter".into()));
        }
        Ok(Self { m, w, theta })
    }

    /// `θ = 0`, `W = ½ (V + Vᵀ)` with `V_ij ~ N(0, 1/m)`, zero diagonal.
    pub fn random_init<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, (1.0 / m as f64).sqrt()).expect("positive variance");
        let v: Vec<f64> = (0..m * m).map(|_| normal.sample(rng)).collect();
        let mut bm = Self::zeros(m);
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    bm.w[i * m + j] = 0.5 * (v[i * m + j] + v[j * m + i]);
                }
            }
        }
        bm
    }

    pub fn nodes(&self) -> usize {
        self.m
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.m + j]
    }

    pub fn bias(&self, i: usize) -> f64 {
        self.theta[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn biases(&self) -> &[f64] {
        &self.theta
    }

    /// `θ_i + Σ_j W_ij z_j`.
    pub fn local_field(&self, i: usize, z: &[bool]) -> f64 {
        let row = &self.w[i * self.m..(i + 1) * self.m];
        self.theta[i] + row.iter().zip(z).filter(|(_, &on)| on).map(|(w, _)| w).sum::<f64>()
    }

    /// `Pr[z_i = 1 | z_-i]`.
    pub fn conditional(&self, i: usize, z: &[bool]) -> f64 {
        sigmoid(self.local_field(i, z))
    }

    /// Resamples node `i` from its conditional.
    pub fn gibbs_step<R: Rng + ?Sized>(&self, z: &mut [bool], i: usize, rng: &mut R) {
        let p = self.conditional(i, z);
        z[i] = rng.random::<f64>() < p;
    }

    /// `½ zᵀ W z + θᵀ z`.
    pub fn log_weight(&self, z: &[bool]) -> f64 {
        let mut e = 0.0;
        for i in 0..self.m {
            if !z[i] {
                continue;
            }
            e += self.theta[i];
            for j in 0..i {
                if z[j] {
                    e += self.w[i * self.m + j];
                }
            }
        }
        e
    }

    /// Exact distribution over all `2^m` states, state bits little-endian.
    pub fn exact_distribution(&self) -> Vec<f64> {
        assert!(self.m <= 20, "enumeration is only for small machines");
        let n = 1usize << self.m;
        let lw: Vec<f64> = (0..n).map(|s| self.log_weight(&bits(s, self.m))).collect();
        let max = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut p: Vec<f64> = lw.iter().map(|v| (v - max).exp()).collect();
        let z: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= z);
        p
    }

    /// `Pr[X̂ = 1 | y]` with the receptor nodes clamped.
    pub fn detection_probability(&self, y: &[bool]) -> f64 {
        let row = &self.w[1..self.m];
        sigmoid(self.theta[0] + row.iter().zip(y).filter(|(_, &on)| on).map(|(w, _)| w).sum::<f64>())
    }

    /// Majority decision over `samples` Gibbs samples of X̂ with Y clamped.
    /// With Y fixed every X̂ update is an independent draw from the same
    /// conditional, so the ON count is binomial.
    pub fn detect<R: Rng + ?Sized>(&self, y: &[bool], samples: u64, rng: &mut R) -> bool {
        let p = self.detection_probability(y);
        let on = Binomial::new(samples, p).expect("probability in [0,1]").sample(rng);
        2 * on >= samples
    }

    pub fn write<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "crnrx-bm 1")?;
        writeln!(w, "nodes {}", self.m)?;
        writeln!(w, "theta {}", join(&self.theta))?;
        for i in 0..self.m {
            writeln!(w, "w {}", join(&self.w[i * self.m..(i + 1) * self.m]))?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self, BmError> {
        let mut lines = r.lines();
        let mut next = || -> Result<String, BmError> {
            lines.next().ok_or_else(|| BmError::Format("unexpected end of file".into()))?.map_err(BmError::from)
        };
        let header = next()?;
        if header.trim() != "crnrx-bm 1" {
            return Err(BmError::Format(format!("unsupported header `{header}`")));
        }
        let nodes_line = next()?;
        let m: usize = nodes_line
            .strip_prefix("nodes ")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| BmError::Format("missing node count".into()))?;
        let parse_row = |line: String, key: &str| -> Result<Vec<f64>, BmError> {
            let rest = line.strip_prefix(key).ok_or_else(|| BmError::Format(format!("expected `{key}` line")))?;
            let v = rest
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| BmError::Format(format!("bad number `{t}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            if v.len() != m {
                return Err(BmError::Format(format!("row has {} values, expected {m}", v.len())));
            }
            Ok(v)
        };
        let theta = parse_row(next()?, "theta ")?;
        let mut w = Vec::with_capacity(m * m);
        for _ in 0..m {
            w.extend(parse_row(next()?, "w ")?);
        }
        Self::from_parts(w, theta)
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ")
}

/// Little-endian bit decomposition of a state index.
pub fn bits(state: usize, m: usize) -> Vec<bool> {
    (0..m).map(|i| state >> i & 1 == 1).collect()
}

pub fn state_index(z: &[bool]) -> usize {
    z.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| 1 << i).sum()
}

/// Labelled samples `(x, y)` with y the receptor occupancy pattern.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingSet {
    pub samples: Vec<(bool, Vec<bool>)>,
}

impl TrainingSet {
    pub fn generate<R: Rng + ?Sized>(scenario: &ChannelScenario, n_t: usize, rng: &mut R) -> Self {
        let samples = (0..n_t)
            .map(|_| {
                let x = rng.random::<bool>();
                let c = scenario.draw_received_concentration(x, rng);
                (x, scenario.draw_receptor_pattern(c, rng))
            })
            .collect();
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// First and second moments of `z = [x, y]`.
    pub fn moments(&self) -> Moments {
        let m = self.samples.first().map_or(0, |s| s.1.len() + 1);
        let mut mo = Moments::zeros(m);
        let mut z = vec![false; m];
        for (x, y) in &self.samples {
            z[0] = *x;
            z[1..].copy_from_slice(y);
            mo.add(&z, 1.0);
        }
        mo.scale(1.0 / self.samples.len().max(1) as f64);
        mo
    }

    /// CSV with columns `x, y_1..y_nr`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let nr = self.samples.first().map_or(0, |s| s.1.len());
        let mut header = vec!["x".to_string()];
        header.extend((1..=nr).map(|i| format!("y_{i}")));
        writeln!(w, "{}", header.join(","))?;
        for (x, y) in &self.samples {
            let mut row = vec![(*x as u8).to_string()];
            row.extend(y.iter().map(|b| (*b as u8).to_string()));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, BmError> {
        let mut samples = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if i == 0 || line.trim().is_empty() {
                continue;
            }
            let vals = line
                .split(',')
                .map(|t| match t.trim() {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    other => Err(BmError::Format(format!("line {}: bad bit `{other}`", i + 1))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            if vals.len() < 2 {
                return Err(BmError::Format(format!("line {}: too few columns", i + 1)));
            }
            samples.push((vals[0], vals[1..].to_vec()));
        }
        Ok(Self { samples })
    }
}

/// First moments `E[z_i]` and second moments `E[z_i z_j]` (full matrix).
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

impl Moments {
    fn zeros(m: usize) -> Self {
        Self { first: vec![0.0; m], second: vec![0.0; m * m] }
    }

    fn add(&mut self, z: &[bool], weight: f64) {
        let m = z.len();
        for i in 0..m {
            if z[i] {
                self.first[i] += weight;
                for j in 0..m {
                    if z[j] {
                        self.second[i * m + j] += weight;
                    }
                }
            }
        }
    }

    fn scale(&mut self, f: f64) {
        self.first.iter_mut().chain(self.second.iter_mut()).for_each(|v| *v *= f);
    }

    /// Max-abs difference over first and off-diagonal second moments.
    pub fn gap(&self, other: &Moments) -> f64 {
        let m = self.first.len();
        let first = self.first.iter().zip(&other.first).map(|(a, b)| (a - b).abs());
        let second = (0..m * m).filter(|k| k / m != k % m).map(|k| (self.second[k] - other.second[k]).abs());
        first.chain(second).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    /// Single-site updates per moment estimate.
    pub gibbs_len: usize,
    pub burn_in: usize,
    pub learning_rate: f64,
    /// Step size at step `t` is `learning_rate / (1 + t / lr_decay)`;
    /// infinite means constant.
    pub lr_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { steps: 100, gibbs_len: 50_000, burn_in: 500, learning_rate: 1.0, lr_decay: 20.0 }
    }
}

impl TrainConfig {
    pub fn step_size(&self, step: usize) -> f64 {
        self.learning_rate / (1.0 + step as f64 / self.lr_decay)
    }
}

/// Persistent random-scan Gibbs chain with incremental local fields.
struct Chain {
    z: Vec<bool>,
    field: Vec<f64>,
}

impl Chain {
    fn new<R: Rng + ?Sized>(bm: &BoltzmannMachine, rng: &mut R) -> Self {
        let z: Vec<bool> = (0..bm.m).map(|_| rng.random()).collect();
        let field = (0..bm.m).map(|i| bm.local_field(i, &z)).collect();
        Self { z, field }
    }

    fn resync(&mut self, bm: &BoltzmannMachine) {
        self.field = (0..bm.m).map(|i| bm.local_field(i, &self.z)).collect();
    }

    /// One update at a random site; returns the site if it flipped.
    #[inline]
    fn update<R: Rng + ?Sized>(&mut self, bm: &BoltzmannMachine, rng: &mut R) -> Option<usize> {
        let i = rng.random_range(0..bm.m);
        let on = rng.random::<f64>() < sigmoid(self.field[i]);
        if on == self.z[i] {
            return None;
        }
        self.z[i] = on;
        let s = if on { 1.0 } else { -1.0 };
        let row = &bm.w[i * bm.m..(i + 1) * bm.m];
        for (f, w) in self.field.iter_mut().zip(row) {
            *f += s * w;
        }
        Some(i)
    }

    /// Model moments over `len` consecutive states. Pair occupancy is
    /// accumulated lazily: only pairs touching the flipped node change.
    fn moments<R: Rng + ?Sized>(&mut self, bm: &BoltzmannMachine, len: usize, rng: &mut R) -> Moments {
        let m = bm.m;
        let mut first = vec![0u64; m];
        let mut since1 = vec![0u64; m];
        let mut pair = vec![0u64; m * m];
        let mut since2 = vec![0u64; m * m];
        for s in 0..len as u64 {
            if let Some(k) = self.update(bm, rng) {
                if self.z[k] {
                    since1[k] = s;
                    for j in (0..m).filter(|&j| j != k && self.z[j]) {
                        since2[k * m + j] = s;
                        since2[j * m + k] = s;
                    }
                } else {
                    first[k] += s - since1[k];
                    for j in (0..m).filter(|&j| j != k && self.z[j]) {
                        let d = s - since2[k * m + j];
                        pair[k * m + j] += d;
                        pair[j * m + k] += d;
                    }
                }
            }
        }
        let end = len as u64;
        for i in 0..m {
            if self.z[i] {
                first[i] += end - since1[i];
                for j in (0..m).filter(|&j| j != i && self.z[j]) {
                    pair[i * m + j] += end - since2[i * m + j];
                }
            }
        }
        let n = len.max(1) as f64;
        let mut mo = Moments::zeros(m);
        for i in 0..m {
            mo.first[i] = first[i] as f64 / n;
            mo.second[i * m + i] = mo.first[i];
            for j in (0..m).filter(|&j| j != i) {
                mo.second[i * m + j] = pair[i * m + j] as f64 / n;
            }
        }
        mo
    }
}

/// Moment gap (max-abs) before each training step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub gaps: Vec<f64>,
}

/// Moment matching: `θ += η (E_data[z] - E_model[z])`,
/// `W_ij += η (E_data[z_i z_j] - E_model[z_i z_j])`, model moments from a
/// persistent Gibbs chain.
pub fn train<R: Rng + ?Sized>(
    bm: &mut BoltzmannMachine,
    data: &TrainingSet,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<TrainReport, BmError> {
    if data.is_empty() {
        return Err(BmError::Invalid("empty training set".into()));
    }
    let target = data.moments();
    if target.first.len() != bm.m {
        return Err(BmError::Invalid(format!("training set has {} nodes, model {}", target.first.len(), bm.m)));
    }
    let m = bm.m;
    let mut chain = Chain::new(bm, rng);
    let mut gaps = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        chain.resync(bm);
        for _ in 0..cfg.burn_in {
            chain.update(bm, rng);
        }
        let model = chain.moments(bm, cfg.gibbs_len, rng);
        gaps.push(target.gap(&model));
        let eta = cfg.step_size(step);
        for i in 0..m {
            bm.theta[i] += eta * (target.first[i] - model.first[i]);
            for j in 0..m {
                if i != j {
                    bm.w[i * m + j] += eta * (target.second[i * m + j] - model.second[i * m + j]);
                }
            }
        }
        if bm.w.iter().chain(&bm.theta).any(|v| !v.is_finite()) {
            return Err(BmError::Diverged { step });
        }
    }
    Ok(TrainReport { gaps })
}

/// Empirical joint distribution after `sweeps` systematic sweeps.
pub fn sample_distribution<R: Rng + ?Sized>(bm: &BoltzmannMachine, sweeps: usize, rng: &mut R) -> Vec<f64> {
    let m = bm.m;
    let mut z = vec![false; m];
    let mut hist = vec![0u64; 1 << m];
    for _ in 0..100 {
        for i in 0..m {
            bm.gibbs_step(&mut z, i, rng);
        }
    }
    for _ in 0..sweeps {
        for i in 0..m {
            bm.gibbs_step(&mut z, i, rng);
        }
        hist[state_index(&z)] += 1;
    }
    hist.iter().map(|&c| c as f64 / sweeps as f64).collect()
}

/// Machine with the MAP property for threshold `nu`: all couplings `w`,
/// all biases `-(nu - ½) w`.
pub fn construct_map_bm(n_r: usize, nu: u32, w: f64) -> BoltzmannMachine {
    let m = n_r + 1;
    let mut bm = BoltzmannMachine::zeros(m);
    for i in 0..m {
        bm.theta[i] = -(nu as f64 - 0.5) * w;
        for j in 0..m {
            if i != j {
                bm.w[i * m + j] = w;
            }
        }
    }
    bm
}

pub const XHAT_ON: &str = "Xhat_ON";
pub const XHAT_OFF: &str = "Xhat_OFF";

pub fn receptor_species(i: usize) -> (String, String) {
    (format!("Y{i}_ON"), format!("Y{i}_OFF"))
}

/// Reactions that move the single X̂ molecule:
/// `X̂_OFF -> X̂_ON` at `k`, `X̂_ON -> X̂_OFF` at `k (1 + |θ_1|)` and
/// `Y_i_ON + X̂_OFF -> Y_i_ON + X̂_ON` at `k W_{1,i+1}`. Receptor species have
/// no consuming reactions, so their counts stay clamped.
pub fn bm_to_crn(bm: &BoltzmannMachine, k: f64) -> Result<ReactionNetwork, BmError> {
    let theta = bm.theta[0];
    if theta > 0.0 {
        return Err(BmError::PositiveBias(theta));
    }
    let mut net = ReactionNetwork::new();
    net.add_species(XHAT_OFF, 1)?;
    net.add_species(XHAT_ON, 0)?;
    for i in 1..bm.m {
        let (on, off) = receptor_species(i);
        net.add_species(&on, 0)?;
        net.add_species(&off, 1)?;
    }
    net.add(&format!("{XHAT_OFF} -> {XHAT_ON}"), k, None, &[])?;
    net.add(&format!("{XHAT_ON} -> {XHAT_OFF}"), k * (1.0 + theta.abs()), None, &[])?;
    for i in 1..bm.m {
        let w = bm.weight(0, i);
        if w < 0.0 {
            return Err(BmError::NegativeWeight { index: i + 1, value: w });
        }
        let (on, _) = receptor_species(i);
        net.add(&format!("{XHAT_OFF} -> {XHAT_ON}"), k * w, None, &[&on])?;
    }
    net.declare_pool("Xhat", &[XHAT_ON, XHAT_OFF])?;
    Ok(net)
}

/// Stationary `Pr[X̂_ON]` of the mapped network with receptors clamped to `y`:
/// `(1 + Σ W_{1,i+1} y_i) / (2 + Σ W_{1,i+1} y_i + |θ_1|)`.
pub fn crn_on_probability(bm: &BoltzmannMachine, y: &[bool]) -> f64 {
    let s: f64 = y.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| bm.weight(0, i + 1)).sum();
    (1.0 + s) / (2.0 + s + bm.theta[0].abs())
}

/// Counting species `X_ON_C`/`X_OFF_C` produced from X̂ at `k_c` and
/// annihilated pairwise at `k_a`.
pub fn attach_decision_layer(net: &ReactionNetwork, k_c: f64, k_a: f64) -> Result<ReactionNetwork, BmError> {
    let mut out = net.clone();
    out.species_id(XHAT_ON)?;
    out.species_id(XHAT_OFF)?;
    out.add("0 -> X_ON_C", k_c, None, &[XHAT_ON])?;
    out.add("0 -> X_OFF_C", k_c, None, &[XHAT_OFF])?;
    out.add("X_ON_C + X_OFF_C -> 0", k_a, None, &[])?;
    Ok(out)
}

/// Sets the receptor species of a mapped network to the pattern `y`.
pub fn clamp_receptors(net: &mut ReactionNetwork, y: &[bool]) -> Result<(), BmError> {
    for (i, &b) in y.iter().enumerate() {
        let (on, off) = receptor_species(i + 1);
        net.set_initial_count(&on, b as u64)?;
        net.set_initial_count(&off, !b as u64)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::realization_rng;

    #[test]
    fn zero_machine_is_fair() {
        let bm = BoltzmannMachine::zeros(4);
        assert_eq!(bm.conditional(2, &[true, false, true, true]), 0.5);
    }

    #[test]
    fn large_bias_saturates() {
        let mut bm = BoltzmannMachine::zeros(3);
        bm.theta[1] = 50.0;
        assert!(bm.conditional(1, &[false; 3]) > 1.0 - 1e-12);
    }

    #[test]
    fn random_init_is_symmetric_zero_diagonal() {
        let bm = BoltzmannMachine::random_init(31, &mut realization_rng(3, 0));
        assert!(BoltzmannMachine::from_parts(bm.w.clone(), bm.theta.clone()).is_ok());
        assert!(bm.theta.iter().all(|&t| t == 0.0));
        let var = bm.w.iter().map(|v| v * v).sum::<f64>() / (31.0 * 30.0);
        // off-diagonal variance of ½(V + Vᵀ) is 1/(2m)
        assert!((var - 1.0 / 62.0).abs() < 0.004, "{var}");
    }

    #[test]
    fn map_construction_decisions() {
        let bm = construct_map_bm(30, 1, 10.0);
        assert!(bm.detection_probability(&[false; 30]) < 0.5);
        let bm = construct_map_bm(30, 9, 2.0);
        for s in 0..=30usize {
            let y: Vec<bool> = (0..30).map(|i| i < s).collect();
            let p = bm.detection_probability(&y);
            assert_eq!(p >= 0.5, s >= 9, "s={s}");
            assert_eq!(crn_on_probability(&bm, &y) >= 0.5, s >= 9, "s={s}");
        }
    }

    #[test]
    fn mapped_network_size_is_linear() {
        for n_r in [1, 5, 30] {
            let net = bm_to_crn(&construct_map_bm(n_r, 1, 1.0), 1.0).unwrap();
            assert_eq!(net.num_species(), 2 + 2 * n_r);
        }
    }

    #[test]
    fn negative_weights_rejected() {
        let mut bm = construct_map_bm(3, 1, 1.0);
        bm.w[2] = -0.5;
        bm.w[2 * 4] = -0.5;
        assert!(matches!(bm_to_crn(&bm, 1.0), Err(BmError::NegativeWeight { .. })));
    }

    #[test]
    fn model_file_round_trip() {
        let bm = BoltzmannMachine::random_init(5, &mut realization_rng(5, 5));
        let mut buf = Vec::new();
        bm.write(&mut buf).unwrap();
        let back = BoltzmannMachine::read(&buf[..]).unwrap();
        assert_eq!(back, bm);
        assert!(BoltzmannMachine::read(&b"nope\n"[..]).is_err());
    }

    #[test]
    fn training_set_csv_round_trip() {
        let ts = TrainingSet::generate(&ChannelScenario::s1(), 20, &mut realization_rng(1, 2));
        let mut buf = Vec::new();
        ts.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("x,y_1,y_2"));
        assert_eq!(TrainingSet::read_csv(&buf[..]).unwrap(), ts);
    }

    #[test]
    fn lazy_moments_match_direct_accumulation() {
        let bm = BoltzmannMachine::random_init(5, &mut realization_rng(8, 0));
        let mut rng_a = realization_rng(8, 1);
        let mut rng_b = realization_rng(8, 1);
        let mut chain = Chain::new(&bm, &mut rng_a);
        let lazy = chain.moments(&bm, 2000, &mut rng_a);
        let mut direct_chain = Chain::new(&bm, &mut rng_b);
        let mut direct = Moments::zeros(5);
        for _ in 0..2000 {
            direct_chain.update(&bm, &mut rng_b);
            direct.add(&direct_chain.z, 1.0 / 2000.0);
        }
        assert!(lazy.gap(&direct) < 1e-12);
        for i in 0..5 {
            assert!((lazy.first[i] - direct.first[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn fixed_point_has_small_updates() {
        // data drawn from the model itself: moment gap is sampling noise only
        let bm = BoltzmannMachine::zeros(4);
        let mut rng = realization_rng(2, 2);
        let samples = (0..20_000).map(|_| (rng.random(), (0..3).map(|_| rng.random()).collect())).collect();
        let data = TrainingSet { samples };
        let mut trained = bm.clone();
        let cfg = TrainConfig { steps: 5, learning_rate: 0.1, lr_decay: f64::INFINITY, ..Default::default() };
        let report = train(&mut trained, &data, &cfg, &mut rng).unwrap();
        assert!(report.gaps.iter().all(|&g| g < 0.03), "{:?}", report.gaps);
        let max_step = trained.theta.iter().chain(&trained.w).map(|v| v.abs()).fold(0.0, f64::max);
        assert!(max_step < 5.0 * 0.1 * 0.03, "{max_step}");
    }
}
