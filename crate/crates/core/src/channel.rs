//! Channel model: received concentration `C = Δ·x + N`, receptor binding
//! `N_rb ~ Binom(n_r, c / (c + K_D))`, likelihoods and the MAP threshold.

use std::fmt;

use rand::Rng;
use rand_distr::{Binomial, Distribution, LogNormal};
use thiserror::Error;

use crate::quadrature::NormalRule;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("quadrature did not converge: {nodes} vs {refined} nodes differ by {diff:e}")]
    NotConverged { nodes: usize, refined: usize, diff: f64 },
}

/// Binding rate constant as printed in the source parameter set (m³/s).
pub const K_PLUS_PRINTED: f64 = 2e19;
/// Default binding rate constant, giving `K_D = 1e20` molecules/m³.
pub const K_PLUS_DEFAULT: f64 = 2e-19;
pub const K_MINUS_DEFAULT: f64 = 20.0;
pub const MU_DELTA: f64 = 1e20;
pub const MU_N: f64 = 1.5e19;
pub const SIGMA_DELTA: f64 = 5e19;
pub const SIGMA_N: f64 = 7.5e18;
pub const N_R: u32 = 30;
pub const DEFAULT_QUADRATURE_NODES: usize = 64;
pub const QUADRATURE_TOLERANCE: f64 = 1e-9;

/// Distribution of a non-negative concentration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Law {
    Constant(f64),
    /// Parameterized by its mean and variance (not the log-space values).
    LogNormal { mean: f64, var: f64 },
}

/// `(μ̃, σ̃²)` of a lognormal with the given mean and variance.
pub fn lognormal_params(mean: f64, var: f64) -> (f64, f64) {
    let s2 = (var / (mean * mean)).ln_1p();
    (mean.ln() - s2 / 2.0, s2)
}

/// Mean and variance of a lognormal with log-space parameters `(μ̃, σ̃²)`.
pub fn lognormal_moments(mu: f64, s2: f64) -> (f64, f64) {
    let mean = (mu + s2 / 2.0).exp();
    (mean, s2.exp_m1() * (2.0 * mu + s2).exp())
}

impl Law {
    pub fn mean(&self) -> f64 {
        match *self {
            Law::Constant(v) => v,
            Law::LogNormal { mean, .. } => mean,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        match *self {
            Law::Constant(v) if v.is_finite() && v >= 0.0 => Ok(()),
            Law::LogNormal { mean, var } if mean.is_finite() && var.is_finite() && mean > 0.0 && var > 0.0 => Ok(()),
            other => Err(ChannelError::Invalid(format!("bad law {other:?}"))),
        }
    }

    /// Same shape with every draw multiplied by `f`.
    pub fn scaled(&self, f: f64) -> Law {
        match *self {
            Law::Constant(v) => Law::Constant(v * f),
            Law::LogNormal { mean, var } => Law::LogNormal { mean: mean * f, var: var * f * f },
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Law::Constant(v) => v,
            Law::LogNormal { mean, var } => {
                let (mu, s2) = lognormal_params(mean, var);
                LogNormal::new(mu, s2.sqrt()).expect("validated lognormal").sample(rng)
            }
        }
    }

    /// Quadrature points `(value, weight)` representing the law.
    fn points(&self, rule: &NormalRule) -> Vec<(f64, f64)> {
        match *self {
            Law::Constant(v) => vec![(v, 1.0)],
            Law::LogNormal { mean, var } => {
                let (mu, s2) = lognormal_params(mean, var);
                let s = s2.sqrt();
                rule.nodes.iter().zip(&rule.weights).map(|(&z, &w)| ((mu + s * z).exp(), w)).collect()
            }
        }
    }
}

impl fmt::Display for Law {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Law::Constant(v) => write!(f, "constant({v:e})"),
            Law::LogNormal { mean, var } => write!(f, "lognormal(mean={mean:e}, sd={:e})", var.sqrt()),
        }
    }
}

/// Kind of a transmitted symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SymbolKind {
    Pilot,
    Data,
}

impl fmt::Display for SymbolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SymbolKind::Pilot => "pilot",
            SymbolKind::Data => "data",
        })
    }
}

/// Ordered symbols with their kinds. Pilot runs alternate 0,1,0,1,...
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SymbolFrame {
    pub symbols: Vec<(SymbolKind, bool)>,
}

impl SymbolFrame {
    pub fn pilots(n: usize) -> Self {
        Self { symbols: (0..n).map(|i| (SymbolKind::Pilot, i % 2 == 1)).collect() }
    }

    /// `pilots` alternating pilots followed by `data` equiprobable symbols.
    pub fn frame<R: Rng + ?Sized>(pilots: usize, data: usize, rng: &mut R) -> Self {
        let mut f = Self::pilots(pilots);
        f.symbols.extend((0..data).map(|_| (SymbolKind::Data, rng.random::<bool>())));
        f
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelScenario {
    pub name: String,
    pub delta: Law,
    pub noise: Law,
    pub n_r: u32,
    pub k_plus: f64,
    pub k_minus: f64,
    pub quadrature_nodes: usize,
}

/// Problems noticed while computing a MAP threshold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ThresholdWarning {
    /// Posterior of x=1 is not non-decreasing in the bound-receptor count.
    NonMonotonePosterior,
    /// The likelihood of the given symbol has more than one local maximum.
    NonUnimodalLikelihood(bool),
    /// Both hypotheses give the same likelihood for every count.
    FlatPosterior,
    /// Posterior never reaches ½; the threshold lies above `n_r`.
    NeverCrosses,
}

impl fmt::Display for ThresholdWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdWarning::NonMonotonePosterior => f.write_str("posterior is not monotone in N_rb"),
            ThresholdWarning::NonUnimodalLikelihood(x) => write!(f, "likelihood for x={} is not unimodal", *x as u8),
            ThresholdWarning::FlatPosterior => f.write_str("hypotheses are indistinguishable; posterior is 1/2"),
            ThresholdWarning::NeverCrosses => f.write_str("posterior never reaches 1/2"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapThreshold {
    pub nu: u32,
    pub warnings: Vec<ThresholdWarning>,
}

/// Binomial pmf over `0..=n` for success probability `p`.
pub fn binomial_pmf(n: u32, p: f64) -> Vec<f64> {
    let mut out = vec![0.0; n as usize + 1];
    if p <= 0.0 {
        out[0] = 1.0;
        return out;
    }
    if p >= 1.0 {
        out[n as usize] = 1.0;
        return out;
    }
    let lp = p.ln();
    let lq = (-p).ln_1p();
    let mut log_c = 0.0f64;
    for k in 0..=n {
        if k > 0 {
            log_c += ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        out[k as usize] = (log_c + k as f64 * lp + (n - k) as f64 * lq).exp();
    }
    out
}

impl ChannelScenario {
    fn base(name: &str, delta: Law, noise: Law) -> Self {
        Self {
            name: name.to_string(),
            delta,
            noise,
            n_r: N_R,
            k_plus: K_PLUS_DEFAULT,
            k_minus: K_MINUS_DEFAULT,
            quadrature_nodes: DEFAULT_QUADRATURE_NODES,
        }
    }

    /// Constant signal and constant noise.
    pub fn s1() -> Self {
        Self::base("S1", Law::Constant(MU_DELTA), Law::Constant(MU_N))
    }

    /// Constant signal, lognormal noise.
    pub fn s2() -> Self {
        Self::base("S2", Law::Constant(MU_DELTA), Law::LogNormal { mean: MU_N, var: SIGMA_N * SIGMA_N })
    }

    /// Lognormal signal and lognormal noise.
    pub fn s3() -> Self {
        Self::base(
            "S3",
            Law::LogNormal { mean: MU_DELTA, var: SIGMA_DELTA * SIGMA_DELTA },
            Law::LogNormal { mean: MU_N, var: SIGMA_N * SIGMA_N },
        )
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name.to_ascii_uppercase().as_str() {
            "S1" => Some(Self::s1()),
            "S2" => Some(Self::s2()),
            "S3" => Some(Self::s3()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        self.delta.validate()?;
        self.noise.validate()?;
        if self.n_r == 0 {
            return Err(ChannelError::Invalid("n_r must be at least 1".into()));
        }
        if !(self.k_plus > 0.0 && self.k_minus > 0.0 && self.k_plus.is_finite() && self.k_minus.is_finite()) {
            return Err(ChannelError::Invalid("binding rate constants must be positive".into()));
        }
        if self.quadrature_nodes == 0 {
            return Err(ChannelError::Invalid("need at least one quadrature node".into()));
        }
        Ok(())
    }

    /// Dissociation constant `k_- / k_+` in molecules/m³.
    pub fn k_d(&self) -> f64 {
        self.k_minus / self.k_plus
    }

    pub fn with_noise_scale(&self, f: f64) -> Self {
        Self { noise: self.noise.scaled(f), ..self.clone() }
    }

    pub fn binding_probability(&self, c: f64) -> f64 {
        if c <= 0.0 {
            return 0.0;
        }
        c / (c + self.k_d())
    }

    pub fn draw_received_concentration<R: Rng + ?Sized>(&self, x: bool, rng: &mut R) -> f64 {
        let delta = self.delta.sample(rng);
        let noise = self.noise.sample(rng);
        if x {
            delta + noise
        } else {
            noise
        }
    }

    pub fn draw_bound_receptors<R: Rng + ?Sized>(&self, c: f64, rng: &mut R) -> u64 {
        let p = self.binding_probability(c);
        Binomial::new(self.n_r as u64, p).expect("probability in [0,1]").sample(rng)
    }

    /// Bound/unbound state of each receptor for concentration `c`.
    pub fn draw_receptor_pattern<R: Rng + ?Sized>(&self, c: f64, rng: &mut R) -> Vec<bool> {
        let p = self.binding_probability(c);
        (0..self.n_r).map(|_| rng.random::<f64>() < p).collect()
    }

    /// Draws a fresh channel realization for symbol `x` and returns `N_rb`.
    pub fn draw_symbol<R: Rng + ?Sized>(&self, x: bool, rng: &mut R) -> u64 {
        let c = self.draw_received_concentration(x, rng);
        self.draw_bound_receptors(c, rng)
    }

    fn likelihood_nodes(&self, x: bool, nodes: usize) -> Vec<f64> {
        let rule = NormalRule::new(nodes);
        let noise = self.noise.points(&rule);
        let delta = if x { self.delta.points(&rule) } else { vec![(0.0, 1.0)] };
        let mut pmf = vec![0.0; self.n_r as usize + 1];
        for &(d, wd) in &delta {
            for &(n, wn) in &noise {
                let p = self.binding_probability(d + n);
                for (acc, v) in pmf.iter_mut().zip(binomial_pmf(self.n_r, p)) {
                    *acc += wd * wn * v;
                }
            }
        }
        let total: f64 = pmf.iter().sum();
        pmf.iter_mut().for_each(|v| *v /= total);
        pmf
    }

    /// `Pr[N_rb = n | X = x]` for `n = 0..=n_r`. Lognormal laws are
    /// integrated with Gauss–Hermite quadrature in log space; the result is
    /// checked against a rule with twice the nodes.
    pub fn likelihood(&self, x: bool) -> Result<Vec<f64>, ChannelError> {
        self.validate()?;
        let n = self.quadrature_nodes;
        let pmf = self.likelihood_nodes(x, n);
        let random = matches!(self.noise, Law::LogNormal { .. }) || (x && matches!(self.delta, Law::LogNormal { .. }));
        if random {
            let refined = self.likelihood_nodes(x, 2 * n);
            let diff = pmf.iter().zip(&refined).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if diff > QUADRATURE_TOLERANCE {
                return Err(ChannelError::NotConverged { nodes: n, refined: 2 * n, diff });
            }
        }
        Ok(pmf)
    }

    pub fn likelihoods(&self) -> Result<[Vec<f64>; 2], ChannelError> {
        Ok([self.likelihood(false)?, self.likelihood(true)?])
    }

    /// Smallest `n` with `Pr[X=1 | N_rb=n] >= ½` under equiprobable symbols.
    pub fn map_threshold(&self) -> Result<MapThreshold, ChannelError> {
        let [l0, l1] = self.likelihoods()?;
        let t = threshold_from_likelihoods(&l0, &l1);
        for w in &t.warnings {
            log::warn!("{}: {w}", self.name);
        }
        Ok(t)
    }

    /// Error probability of the threshold rule `x̂ = [N_rb >= nu]`.
    pub fn threshold_ber(&self, nu: u32) -> Result<f64, ChannelError> {
        let [l0, l1] = self.likelihoods()?;
        Ok(threshold_ber(&l0, &l1, nu))
    }

    pub fn map_ber(&self) -> Result<f64, ChannelError> {
        let [l0, l1] = self.likelihoods()?;
        let t = threshold_from_likelihoods(&l0, &l1);
        Ok(threshold_ber(&l0, &l1, t.nu))
    }
}

/// `½ [Pr(N >= nu | 0) + Pr(N < nu | 1)]`.
pub fn threshold_ber(l0: &[f64], l1: &[f64], nu: u32) -> f64 {
    let nu = (nu as usize).min(l0.len());
    let false_pos: f64 = l0[nu..].iter().sum();
    let false_neg: f64 = l1[..nu].iter().sum();
    0.5 * (false_pos + false_neg)
}

fn local_maxima(l: &[f64]) -> usize {
    // plateaus count once
    let mut count = 0;
    let mut i = 0;
    while i < l.len() {
        let mut j = i;
        while j + 1 < l.len() && l[j + 1] == l[i] {
            j += 1;
        }
        let left_lower = i == 0 || l[i - 1] < l[i];
        let right_lower = j + 1 == l.len() || l[j + 1] < l[j];
        if left_lower && right_lower && l[i] > 0.0 {
            count += 1;
        }
        i = j + 1;
    }
    count
}

pub fn threshold_from_likelihoods(l0: &[f64], l1: &[f64]) -> MapThreshold {
    let mut warnings = Vec::new();
    if l0 == l1 {
        warnings.push(ThresholdWarning::FlatPosterior);
        return MapThreshold { nu: 0, warnings };
    }
    for (x, l) in [(false, l0), (true, l1)] {
        if local_maxima(l) > 1 {
            warnings.push(ThresholdWarning::NonUnimodalLikelihood(x));
        }
    }
    let posterior: Vec<Option<f64>> =
        l0.iter().zip(l1).map(|(&a, &b)| if a + b > 0.0 { Some(b / (a + b)) } else { None }).collect();
    let defined: Vec<f64> = posterior.iter().flatten().copied().collect();
    if defined.windows(2).any(|w| w[1] < w[0] - 1e-12) {
        warnings.push(ThresholdWarning::NonMonotonePosterior);
    }
    let nu = l0.iter().zip(l1).position(|(&a, &b)| b >= a && a + b > 0.0);
    let nu = match nu {
        Some(n) => n as u32,
        None => {
            warnings.push(ThresholdWarning::NeverCrosses);
            l0.len() as u32
        }
    };
    MapThreshold { nu, warnings }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::realization_rng;

    #[test]
    fn s1_concentrations_are_exact() {
        let s = ChannelScenario::s1();
        let mut rng = realization_rng(0, 0);
        assert_eq!(s.draw_received_concentration(false, &mut rng), 1.5e19);
        assert_eq!(s.draw_received_concentration(true, &mut rng), 1.15e20);
    }

    #[test]
    fn zero_concentration_binds_nothing() {
        let s = ChannelScenario::s1();
        let mut rng = realization_rng(0, 1);
        for _ in 0..100 {
            assert_eq!(s.draw_bound_receptors(0.0, &mut rng), 0);
        }
    }

    #[test]
    fn dissociation_constant_default() {
        assert!((ChannelScenario::s1().k_d() - 1e20).abs() < 1e6);
        let printed = ChannelScenario { k_plus: K_PLUS_PRINTED, ..ChannelScenario::s1() };
        assert!((printed.k_d() - 1e-18).abs() < 1e-30);
    }

    #[test]
    fn s1_likelihood_is_plain_binomial() {
        let s = ChannelScenario::s1();
        let p1 = 1.15e20 / (1.15e20 + 1e20);
        let l1 = s.likelihood(true).unwrap();
        let direct = binomial_pmf(30, p1);
        for (a, b) in l1.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn likelihoods_normalized() {
        for s in [ChannelScenario::s1(), ChannelScenario::s2(), ChannelScenario::s3()] {
            for x in [false, true] {
                let l = s.likelihood(x).unwrap();
                assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-12, "{} x={x}", s.name);
            }
        }
    }

    #[test]
    fn zero_noise_threshold_is_one() {
        let s = ChannelScenario { noise: Law::Constant(0.0), ..ChannelScenario::s1() };
        let t = s.map_threshold().unwrap();
        assert_eq!(t.nu, 1);
    }

    #[test]
    fn identical_hypotheses_warn() {
        let s = ChannelScenario { delta: Law::Constant(0.0), ..ChannelScenario::s1() };
        let t = s.map_threshold().unwrap();
        assert!(t.warnings.contains(&ThresholdWarning::FlatPosterior));
    }

    #[test]
    fn lognormal_round_trip() {
        let (m, v) = (1.5e19, 7.5e18f64.powi(2));
        let (mu, s2) = lognormal_params(m, v);
        let (m2, v2) = lognormal_moments(mu, s2);
        assert!(((m2 - m) / m).abs() < 1e-12);
        assert!(((v2 - v) / v).abs() < 1e-12);
    }

    #[test]
    fn invalid_laws_rejected() {
        let s = ChannelScenario { noise: Law::LogNormal { mean: 0.0, var: 1.0 }, ..ChannelScenario::s1() };
        assert!(s.likelihood(false).is_err());
        let s = ChannelScenario { n_r: 0, ..ChannelScenario::s1() };
        assert!(s.validate().is_err());
    }

    #[test]
    fn coarse_quadrature_reports_non_convergence() {
        let s = ChannelScenario { quadrature_nodes: 2, ..ChannelScenario::s3() };
        assert!(matches!(s.likelihood(true), Err(ChannelError::NotConverged { .. })));
    }

    #[test]
    fn pilot_frames_alternate_from_zero() {
        let f = SymbolFrame::frame(4, 3, &mut realization_rng(1, 1));
        let bits: Vec<bool> = f.symbols[..4].iter().map(|s| s.1).collect();
        assert_eq!(bits, vec![false, true, false, true]);
        assert!(f.symbols[4..].iter().all(|s| s.0 == SymbolKind::Data));
    }
}
