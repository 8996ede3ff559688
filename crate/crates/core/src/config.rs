//! Experiment configuration: `key = value` lines, `#` comments. Every rate
//! and initial count of the receiver has a default that a key overrides.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::adaptive::AdaptiveConfig;
use crate::bm::TrainConfig;
use crate::channel::{ChannelScenario, DEFAULT_QUADRATURE_NODES};
use crate::markov::DEFAULT_N_W_TOTAL;
use crate::receiver::{RxRates, Timing};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("config line {line}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Algorithmic learning rule against the chain baseline.
    ThresholdLearning,
    /// One chemical symbol interval with a full trajectory.
    SingleInterval,
    /// Long pilot sequence with a noise step.
    TimeVariant,
    /// Pilot/data frames with per-frame BER.
    Frames,
    /// Boltzmann-machine vs adaptive detector comparison.
    BmStudy,
    /// Plain simulation of a network file.
    Network,
}

impl ExperimentKind {
    pub const NAMES: [&'static str; 6] =
        ["threshold-learning", "single-interval", "time-variant", "frames", "bm-study", "network"];
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = match self {
            Self::ThresholdLearning => 0,
            Self::SingleInterval => 1,
            Self::TimeVariant => 2,
            Self::Frames => 3,
            Self::BmStudy => 4,
            Self::Network => 5,
        };
        f.write_str(Self::NAMES[i])
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "threshold-learning" => Self::ThresholdLearning,
            "single-interval" => Self::SingleInterval,
            "time-variant" => Self::TimeVariant,
            "frames" => Self::Frames,
            "bm-study" => Self::BmStudy,
            "network" => Self::Network,
            other => return Err(format!("unknown experiment `{other}` (expected one of {})", Self::NAMES.join(", "))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeVariantPlan {
    pub symbols: usize,
    pub change_start: usize,
    pub change_end: usize,
    pub noise_factor: f64,
    /// PM-ES is applied at every symbol whose index is a multiple of this.
    pub pm_every: usize,
    /// `(k_on, k_off)` settings, one ensemble each.
    pub rate_settings: Vec<(f64, f64)>,
}

impl Default for TimeVariantPlan {
    fn default() -> Self {
        Self { symbols: 750, change_start: 250, change_end: 500, noise_factor: 5.0, pm_every: 2, rate_settings: vec![(5.0, 5.0)] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BmStudyPlan {
    pub n_t: Vec<usize>,
    pub detectors: usize,
    pub eval_symbols: usize,
    pub samples: u64,
    pub train: TrainConfig,
}

impl Default for BmStudyPlan {
    fn default() -> Self {
        Self { n_t: vec![100, 1000, 10_000], detectors: 25, eval_symbols: 100_000, samples: 500, train: TrainConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSpec {
    pub x: bool,
    pub n_rb: u64,
    pub n_w: u64,
}

impl Default for IntervalSpec {
    fn default() -> Self {
        Self { x: false, n_rb: 10, n_w: 2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub scenarios: Vec<String>,
    pub frames: usize,
    pub pilots: usize,
    pub data: usize,
    pub realizations: usize,
    pub seed: u64,
    pub workers: Option<usize>,
    pub out: PathBuf,
    pub detector: AdaptiveConfig,
    pub rates: RxRates,
    pub counts: Vec<(String, u64)>,
    pub timing: Timing,
    pub n_w_total: usize,
    pub k_plus: Option<f64>,
    pub quadrature_nodes: usize,
    pub time_variant: TimeVariantPlan,
    pub bm: BmStudyPlan,
    pub interval: IntervalSpec,
    pub network_file: Option<PathBuf>,
    pub t_end: f64,
    pub check_pools: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Frames,
            scenarios: vec!["S1".into()],
            frames: 20,
            pilots: 10,
            data: 20,
            realizations: 100,
            seed: 1,
            workers: None,
            out: PathBuf::from("out"),
            detector: AdaptiveConfig::default(),
            rates: RxRates::default(),
            counts: Vec::new(),
            timing: Timing::default(),
            n_w_total: DEFAULT_N_W_TOTAL,
            k_plus: None,
            quadrature_nodes: DEFAULT_QUADRATURE_NODES,
            time_variant: TimeVariantPlan::default(),
            bm: BmStudyPlan::default(),
            interval: IntervalSpec::default(),
            network_file: None,
            t_end: 100.0,
            check_pools: false,
        }
    }
}

fn parse_num<T: FromStr>(v: &str, line: usize) -> Result<T, ConfigError> {
    // integers may be written as 1e5
    v.parse::<T>().or_else(|_| {
        let f: f64 = v.parse().map_err(|_| ConfigError { line, message: format!("bad number `{v}`") })?;
        format!("{f}").parse::<T>().map_err(|_| ConfigError { line, message: format!("bad number `{v}`") })
    })
}

fn parse_bool(v: &str, line: usize) -> Result<bool, ConfigError> {
    match v {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(ConfigError { line, message: format!("bad boolean `{v}`") }),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ConfigError { line, message: format!("expected `key = value`, got `{content}`") })?;
            cfg.set(key.trim(), value.trim(), line)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one override. `line` is only used for error messages.
    pub fn set(&mut self, key: &str, v: &str, line: usize) -> Result<(), ConfigError> {
        let bad = |message: String| ConfigError { line, message };
        match key {
            "experiment" => self.kind = v.parse().map_err(bad)?,
            "scenario" | "scenarios" => {
                self.scenarios = v.split(',').map(|s| s.trim().to_ascii_uppercase()).filter(|s| !s.is_empty()).collect()
            }
            "frames" => self.frames = parse_num(v, line)?,
            "pilots" => self.pilots = parse_num(v, line)?,
            "data" => self.data = parse_num(v, line)?,
            "realizations" => self.realizations = parse_num(v, line)?,
            "seed" => self.seed = parse_num(v, line)?,
            "workers" => self.workers = Some(parse_num(v, line)?),
            "out" => self.out = PathBuf::from(v),
            "k_on" => self.detector.k_on = parse_num(v, line)?,
            "k_off" => self.detector.k_off = parse_num(v, line)?,
            "k_deg" => self.detector.k_deg = parse_num(v, line)?,
            "k_l1" => self.detector.k_l1 = parse_num(v, line)?,
            "k_l2" => self.detector.k_l2 = parse_num(v, line)?,
            "n_w_init" => self.detector.n_w_init = parse_num(v, line)?,
            "tau_sym" => self.timing.tau_sym = parse_num(v, line)?,
            "tau_a" => self.timing.tau_a = parse_num(v, line)?,
            "n_w_total" => self.n_w_total = parse_num(v, line)?,
            "k_plus" => self.k_plus = Some(parse_num(v, line)?),
            "quadrature_nodes" => self.quadrature_nodes = parse_num(v, line)?,
            "symbols" => self.time_variant.symbols = parse_num(v, line)?,
            "change_start" => self.time_variant.change_start = parse_num(v, line)?,
            "change_end" => self.time_variant.change_end = parse_num(v, line)?,
            "noise_factor" => self.time_variant.noise_factor = parse_num(v, line)?,
            "pm_every" => self.time_variant.pm_every = parse_num(v, line)?,
            "rate_settings" => {
                self.time_variant.rate_settings = v
                    .split(',')
                    .map(|pair| {
                        let (a, b) = pair.split_once(':').ok_or_else(|| bad(format!("bad rate pair `{pair}`")))?;
                        Ok((parse_num(a.trim(), line)?, parse_num(b.trim(), line)?))
                    })
                    .collect::<Result<_, ConfigError>>()?
            }
            "bm.n_t" => {
                self.bm.n_t = v.split(',').map(|t| parse_num(t.trim(), line)).collect::<Result<_, _>>()?;
            }
            "bm.detectors" => self.bm.detectors = parse_num(v, line)?,
            "bm.eval_symbols" => self.bm.eval_symbols = parse_num(v, line)?,
            "bm.samples" => self.bm.samples = parse_num(v, line)?,
            "bm.steps" => self.bm.train.steps = parse_num(v, line)?,
            "bm.gibbs_len" => self.bm.train.gibbs_len = parse_num(v, line)?,
            "bm.burn_in" => self.bm.train.burn_in = parse_num(v, line)?,
            "bm.learning_rate" => self.bm.train.learning_rate = parse_num(v, line)?,
            "bm.lr_decay" => self.bm.train.lr_decay = parse_num(v, line)?,
            "interval.x" => self.interval.x = parse_bool(v, line)?,
            "interval.n_rb" => self.interval.n_rb = parse_num(v, line)?,
            "interval.n_w" => self.interval.n_w = parse_num(v, line)?,
            "network" => self.network_file = Some(PathBuf::from(v)),
            "t_end" => self.t_end = parse_num(v, line)?,
            "check_pools" => self.check_pools = parse_bool(v, line)?,
            k if k.starts_with("count.") => {
                let name = &k["count.".len()..];
                let n = parse_num(v, line)?;
                self.counts.retain(|(s, _)| s != name);
                self.counts.push((name.to_string(), n));
            }
            k => {
                let value: f64 = parse_num(v, line)?;
                if !self.rates.set(k, value) {
                    return Err(bad(format!("unknown key `{k}`")));
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |message: String| Err(ConfigError { line: 0, message });
        if self.scenarios.is_empty() {
            return bad("no scenario given".into());
        }
        for s in &self.scenarios {
            if ChannelScenario::by_name(s).is_none() {
                return bad(format!("unknown scenario `{s}`"));
            }
        }
        if self.realizations == 0 {
            return bad("realizations must be at least 1".into());
        }
        if let Err(e) = self.detector.validate() {
            return bad(e.to_string());
        }
        for key in RxRates::KEYS {
            let v = self.rates.get(key).unwrap_or(0.0);
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("rate `{key}` must be non-negative, got {v}"));
            }
        }
        if !(self.timing.tau_a > 0.0 && self.timing.tau_sym > self.timing.tau_a) {
            return bad("need 0 < tau_a < tau_sym".into());
        }
        let tv = &self.time_variant;
        if tv.change_start > tv.change_end || tv.pm_every == 0 || !(tv.noise_factor > 0.0) {
            return bad("time-variant plan needs change_start <= change_end, pm_every >= 1, noise_factor > 0".into());
        }
        if tv.rate_settings.iter().any(|&(a, b)| !(a > 0.0 && b > 0.0)) {
            return bad("rate settings must be positive".into());
        }
        if self.bm.n_t.contains(&0) || self.bm.detectors == 0 || self.bm.samples == 0 {
            return bad("bm-study needs n_t >= 1, detectors >= 1, samples >= 1".into());
        }
        if self.kind == ExperimentKind::Network && self.network_file.is_none() {
            return bad("network experiment needs `network = <file>`".into());
        }
        if self.quadrature_nodes == 0 {
            return bad("quadrature_nodes must be at least 1".into());
        }
        if matches!(self.k_plus, Some(k) if !(k > 0.0)) {
            return bad("k_plus must be positive".into());
        }
        Ok(())
    }

    pub fn scenario(&self, name: &str) -> ChannelScenario {
        let mut s = ChannelScenario::by_name(name).expect("validated scenario");
        if let Some(k) = self.k_plus {
            s.k_plus = k;
        }
        s.quadrature_nodes = self.quadrature_nodes;
        s
    }
}
