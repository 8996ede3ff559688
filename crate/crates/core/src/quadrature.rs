//! Gauss–Hermite rules for expectations over a standard normal variable.

use std::f64::consts::{PI, SQRT_2};
use std::num::NonZeroUsize;

use gauss_quad::GaussHermite;

/// Nodes `z_i` and weights `w_i` with `E[f(Z)] ≈ Σ w_i f(z_i)` for
/// `Z ~ N(0, 1)`. Weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl NormalRule {
    pub fn new(n: usize) -> Self {
        let deg = NonZeroUsize::new(n).expect("need at least one node");
        let rule = GaussHermite::new(deg);
        let s = PI.sqrt();
        let (nodes, weights) = rule.iter().map(|&(x, w)| (x * SQRT_2, w / s)).unzip();
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn expect<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&z, &w)| w * f(z)).sum()
    }
}
