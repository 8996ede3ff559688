//! Low-complexity adaptive threshold detector: the weight-molecule CRN,
//! its counting-species readout and the pilot-driven learning rule.

use crate::crn::{CrnError, ReactionNetwork};

pub const Y: &str = "Y";
pub const W: &str = "W";
pub const X_ON: &str = "X_ON";
pub const X_OFF: &str = "X_OFF";
pub const XC_ON: &str = "X_ON_C";
pub const XC_OFF: &str = "X_OFF_C";
pub const H: &str = "H";
pub const XTRUE_ON: &str = "Xtrue_ON";
pub const XTRUE_OFF: &str = "Xtrue_OFF";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveConfig {
    pub k_on: f64,
    pub k_off: f64,
    pub k_deg: f64,
    pub k_l1: f64,
    pub k_l2: f64,
    pub n_w_init: u64,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self { k_on: 5.0, k_off: 5.0, k_deg: 5e4, k_l1: 1e-4, k_l2: 1e-4, n_w_init: 0 }
    }
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<(), CrnError> {
        for (name, v) in [
            ("k_on", self.k_on),
            ("k_off", self.k_off),
            ("k_deg", self.k_deg),
            ("k_l1", self.k_l1),
            ("k_l2", self.k_l2),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CrnError::InvalidRate { reaction: name.to_string(), rate: v });
            }
        }
        Ok(())
    }

    /// Effective threshold scale `k_off / k_on`.
    pub fn ratio(&self) -> f64 {
        self.k_off / self.k_on
    }
}

/// Single-molecule detector: `Y + X_OFF -> Y + X_ON`, `W + X_ON -> W + X_OFF`.
/// One X molecule starts in the OFF state.
pub fn build_single_molecule_crn(cfg: &AdaptiveConfig) -> Result<ReactionNetwork, CrnError> {
    cfg.validate()?;
    let mut net = ReactionNetwork::new();
    net.add_species(Y, 0)?;
    net.add_species(W, cfg.n_w_init)?;
    net.add_species(X_OFF, 1)?;
    net.add_species(X_ON, 0)?;
    net.add("X_OFF -> X_ON", cfg.k_on, None, &[Y])?;
    net.add("X_ON -> X_OFF", cfg.k_off, None, &[W])?;
    net.declare_pool("X", &[X_ON, X_OFF])?;
    Ok(net)
}

/// Detector with counting species: Y and W produce ON and OFF counters,
/// which annihilate pairwise.
pub fn build_detector_crn(cfg: &AdaptiveConfig) -> Result<ReactionNetwork, CrnError> {
    build_detector_with(cfg, &[])
}

pub(crate) fn build_detector_with(cfg: &AdaptiveConfig, extra_catalysts: &[&str]) -> Result<ReactionNetwork, CrnError> {
    cfg.validate()?;
    let mut net = ReactionNetwork::new();
    net.add_species(Y, 0)?;
    net.add_species(W, cfg.n_w_init)?;
    net.add_species(XC_ON, 0)?;
    net.add_species(XC_OFF, 0)?;
    let mut on_cat = vec![Y];
    on_cat.extend_from_slice(extra_catalysts);
    let mut off_cat = vec![W];
    off_cat.extend_from_slice(extra_catalysts);
    net.add("0 -> X_ON_C", cfg.k_on, None, &on_cat)?;
    net.add("0 -> X_OFF_C", cfg.k_off, None, &off_cat)?;
    net.add("X_ON_C + X_OFF_C -> 0", cfg.k_deg, None, &[])?;
    Ok(net)
}

/// Pilot learning reactions. A helper molecule H is spent either to create a
/// W (false positive) or to destroy one (false negative).
pub fn build_learning_crn(cfg: &AdaptiveConfig) -> Result<ReactionNetwork, CrnError> {
    build_learning_with(cfg, &[])
}

pub(crate) fn build_learning_with(cfg: &AdaptiveConfig, extra_catalysts: &[&str]) -> Result<ReactionNetwork, CrnError> {
    cfg.validate()?;
    let mut net = ReactionNetwork::new();
    for s in [H, W, XC_ON, XC_OFF, XTRUE_ON, XTRUE_OFF] {
        net.species_or_zero(s);
    }
    net.set_initial_count(W, cfg.n_w_init)?;
    let mut up = vec![XC_ON, XTRUE_OFF];
    up.extend_from_slice(extra_catalysts);
    let mut down = vec![XC_OFF, XTRUE_ON];
    down.extend_from_slice(extra_catalysts);
    net.add("H -> W", cfg.k_l1, None, &up)?;
    net.add("W + H -> 0", cfg.k_l2, None, &down)?;
    Ok(net)
}

/// Stationary probability that the single X molecule is ON:
/// `n_rb / (n_rb + (k_off/k_on) n_w)`, with 0 when both counts are zero.
pub fn stationary_on_probability(n_rb: u64, n_w: u64, k_on: f64, k_off: f64) -> f64 {
    if n_rb == 0 {
        return 0.0;
    }
    let rb = n_rb as f64;
    rb / (rb + (k_off / k_on) * n_w as f64)
}

/// Threshold decision of the detector: 1 iff `n_rb >= (k_off/k_on) n_w`,
/// with the both-zero case decided 0.
pub fn decide(n_rb: u64, n_w: u64, k_on: f64, k_off: f64) -> bool {
    stationary_on_probability(n_rb, n_w, k_on, k_off) >= 0.5
}

/// One step of the learning rule: +1 after a false positive, -1 after a
/// false negative, never below zero.
pub fn update_threshold(n_w: u64, x_hat: bool, x_true: bool) -> u64 {
    match (x_hat, x_true) {
        (true, false) => n_w + 1,
        (false, true) => n_w.saturating_sub(1),
        _ => n_w,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn on_probability_values() {
        assert_eq!(stationary_on_probability(0, 4, 5.0, 5.0), 0.0);
        assert_eq!(stationary_on_probability(0, 0, 5.0, 5.0), 0.0);
        assert_eq!(stationary_on_probability(7, 7, 5.0, 5.0), 0.5);
        assert!((stationary_on_probability(10, 5, 1.0, 1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(stationary_on_probability(3, 0, 5.0, 5.0), 1.0);
    }

    #[test]
    fn update_rule_branches() {
        assert_eq!(update_threshold(5, true, false), 6);
        assert_eq!(update_threshold(5, false, true), 4);
        assert_eq!(update_threshold(0, false, true), 0);
        assert_eq!(update_threshold(5, true, true), 5);
        assert_eq!(update_threshold(5, false, false), 5);
    }

    #[test]
    fn detector_has_four_species() {
        let net = build_detector_crn(&AdaptiveConfig::default()).unwrap();
        assert_eq!(net.num_species(), 4);
        assert_eq!(net.reactions().len(), 3);
    }

    #[test]
    fn decision_matches_threshold() {
        for n_w in 0..12u64 {
            for n_rb in 0..12u64 {
                let expect = n_rb > 0 && n_rb >= n_w;
                assert_eq!(decide(n_rb, n_w, 5.0, 5.0), expect, "n_rb={n_rb} n_w={n_w}");
            }
        }
    }

    #[test]
    fn rejects_nonpositive_rates() {
        let cfg = AdaptiveConfig { k_on: 0.0, ..Default::default() };
        assert!(build_detector_crn(&cfg).is_err());
    }
}
