//! Birth–death chain of the weight-molecule count under pilot learning, with
//! transient and steady-state evaluation of BER and E[N_W].

use thiserror::Error;

use crate::channel::{threshold_ber, ChannelError, ChannelScenario};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarkovError {
    #[error("chain is degenerate: state {state} has no downward transition")]
    DegenerateChain { state: usize },
    #[error("distribution has {got} entries, chain has {expected} states")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

pub const DEFAULT_N_W_TOTAL: usize = 60;

/// Tridiagonal transition matrix over `n_W ∈ {0..=n_w_total}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DtmcModel {
    pub n_w_total: usize,
    /// `P[n][n-1]`, zero at `n = 0`.
    pub down: Vec<f64>,
    /// `P[n][n+1]`, zero at `n = n_w_total`.
    pub up: Vec<f64>,
    pub l0: Vec<f64>,
    pub l1: Vec<f64>,
}

impl DtmcModel {
    /// Builds the chain for equiprobable pilots and the decision rule
    /// `x̂ = [N_rb >= n_W]`. A false positive adds a weight molecule, a false
    /// negative removes one; state 0 reflects and the top state cannot grow.
    pub fn from_likelihoods(l0: &[f64], l1: &[f64], n_w_total: usize) -> Self {
        let states = n_w_total + 1;
        let mut down = vec![0.0; states];
        let mut up = vec![0.0; states];
        for n in 0..states {
            if n > 0 {
                down[n] = 0.5 * l1.iter().take(n).sum::<f64>();
            }
            if n < n_w_total {
                up[n] = 0.5 * l0.iter().skip(n).sum::<f64>();
            }
        }
        Self { n_w_total, down, up, l0: l0.to_vec(), l1: l1.to_vec() }
    }

    pub fn from_scenario(scenario: &ChannelScenario, n_w_total: usize) -> Result<Self, MarkovError> {
        let [l0, l1] = scenario.likelihoods()?;
        let nu = crate::channel::threshold_from_likelihoods(&l0, &l1).nu as usize;
        if n_w_total < nu {
            log::warn!("n_w_total={n_w_total} is below the MAP threshold {nu}; the chain cannot reach it");
        }
        Ok(Self::from_likelihoods(&l0, &l1, n_w_total))
    }

    pub fn states(&self) -> usize {
        self.n_w_total + 1
    }

    pub fn stay(&self, n: usize) -> f64 {
        1.0 - self.down[n] - self.up[n]
    }

    /// Dense copy of the transition matrix.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        let s = self.states();
        let mut m = vec![vec![0.0; s]; s];
        for n in 0..s {
            if n > 0 {
                m[n][n - 1] = self.down[n];
            }
            if n + 1 < s {
                m[n][n + 1] = self.up[n];
            }
            m[n][n] = self.stay(n);
        }
        m
    }

    pub fn point_mass(&self, n: usize) -> Vec<f64> {
        let mut pi = vec![0.0; self.states()];
        pi[n.min(self.n_w_total)] = 1.0;
        pi
    }

    fn check(&self, pi: &[f64]) -> Result<(), MarkovError> {
        if pi.len() != self.states() {
            return Err(MarkovError::Dimension { expected: self.states(), got: pi.len() });
        }
        Ok(())
    }

    /// One step `π P`.
    pub fn step(&self, pi: &[f64]) -> Result<Vec<f64>, MarkovError> {
        self.check(pi)?;
        let s = self.states();
        let mut out = vec![0.0; s];
        for n in 0..s {
            out[n] += pi[n] * self.stay(n);
            if n > 0 {
                out[n - 1] += pi[n] * self.down[n];
            }
            if n + 1 < s {
                out[n + 1] += pi[n] * self.up[n];
            }
        }
        Ok(out)
    }

    /// `π P^l`.
    pub fn evolve(&self, pi: &[f64], l: usize) -> Result<Vec<f64>, MarkovError> {
        let mut cur = pi.to_vec();
        self.check(&cur)?;
        for _ in 0..l {
            cur = self.step(&cur)?;
        }
        Ok(cur)
    }

    /// Stationary distribution from the product of `ρ_n = P[n-1][n] / P[n][n-1]`,
    /// accumulated in log space.
    pub fn steady_state(&self) -> Result<Vec<f64>, MarkovError> {
        let s = self.states();
        let mut log_pi = vec![0.0; s];
        for n in 1..s {
            if self.down[n] <= 0.0 {
                return Err(MarkovError::DegenerateChain { state: n });
            }
            log_pi[n] = log_pi[n - 1] + self.up[n - 1].ln() - self.down[n].ln();
        }
        let max = log_pi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut pi: Vec<f64> = log_pi.iter().map(|v| (v - max).exp()).collect();
        let total: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|v| *v /= total);
        Ok(pi)
    }

    /// Error probability of the detector while sitting in state `n`.
    pub fn state_ber(&self, n: usize) -> f64 {
        threshold_ber(&self.l0, &self.l1, n as u32)
    }

    /// `Σ_n π_n BER(n)`.
    pub fn expected_ber(&self, pi: &[f64]) -> Result<f64, MarkovError> {
        self.check(pi)?;
        Ok(pi.iter().enumerate().map(|(n, p)| p * self.state_ber(n)).sum())
    }

    /// `Σ_n π_n n`.
    pub fn expected_weight_count(&self, pi: &[f64]) -> Result<f64, MarkovError> {
        self.check(pi)?;
        Ok(pi.iter().enumerate().map(|(n, p)| p * n as f64).sum())
    }

    /// Mode of a distribution.
    pub fn mode(pi: &[f64]) -> usize {
        pi.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map_or(0, |(i, _)| i)
    }
}

/// One row of a baseline curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselinePoint {
    pub l: usize,
    pub expected_ber: f64,
    pub expected_n_w: f64,
}

/// Transient curve over pilot count `0..=pilots` from a point mass at
/// `n_w_init`. `segments` lists consecutive `(chain, length)` blocks for
/// time-varying channels; the curve has one point per pilot.
pub fn transient_curve(segments: &[(&DtmcModel, usize)], n_w_init: usize) -> Result<Vec<BaselinePoint>, MarkovError> {
    let first = segments.first().map(|s| s.0);
    let Some(first) = first else { return Ok(Vec::new()) };
    let mut pi = first.point_mass(n_w_init);
    let mut out = vec![BaselinePoint {
        l: 0,
        expected_ber: first.expected_ber(&pi)?,
        expected_n_w: first.expected_weight_count(&pi)?,
    }];
    let mut l = 0;
    for &(chain, len) in segments {
        for _ in 0..len {
            pi = chain.step(&pi)?;
            l += 1;
            out.push(BaselinePoint {
                l,
                expected_ber: chain.expected_ber(&pi)?,
                expected_n_w: chain.expected_weight_count(&pi)?,
            });
        }
    }
    Ok(out)
}
