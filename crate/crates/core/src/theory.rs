//! Closed-form quantities: the weak-regret bound and its learning rate, the
//! probability of hearing an observation through forwarding, and the
//! replicator field of the probability dynamics.
//!
//! The regret bound is the theorem-statement form
//! `2e sqrt((d+1) ln k T / max(1/k, b0)) + d`. The proof's last display
//! collects the constants as `e/2 + e` instead of `2e`; the statement form is
//! the looser of the two and is what is evaluated here.
//!
//! Nothing in the simulator depends on this module.

use serde::{Deserialize, Serialize};

use crate::bandit::is_simplex;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryInputs {
    pub k: u32,
    pub d: u32,
    pub horizon: u64,
    pub b0: f64,
    pub n: u32,
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegretBound {
    pub eta_star: f64,
    pub bound: f64,
}

fn hearing_floor(k: u32, b0: f64) -> f64 {
    (1.0 / f64::from(k)).max(b0)
}

pub fn regret_bound(inputs: &TheoryInputs) -> Result<RegretBound> {
    let mut violated = Vec::new();
    if inputs.k < 1 {
        violated.push("k >= 1".to_string());
    }
    let b0_max = 1.0 - (-1.0f64).exp();
    if !(0.0..=b0_max).contains(&inputs.b0) {
        violated.push(format!("b0 in [0, 1 - 1/e] (b0 = {})", inputs.b0));
    }
    let k = f64::from(inputs.k.max(1));
    let d1 = f64::from(inputs.d) + 1.0;
    let horizon = inputs.horizon as f64;
    let need = d1 * k * k.ln();
    if !(horizon > need) {
        violated.push(format!("T > (d+1) k ln k (T = {horizon}, (d+1) k ln k = {need})"));
    }
    if !violated.is_empty() {
        return Err(Error::Precondition(violated.join(", ")));
    }
    let floor = hearing_floor(inputs.k, inputs.b0);
    let e = std::f64::consts::E;
    let eta_star = (floor * k.ln() / (e * e * d1 * horizon)).sqrt();
    let bound = 2.0 * e * (d1 * k.ln() * horizon / floor).sqrt() + f64::from(inputs.d);
    Ok(RegretBound { eta_star, bound })
}

/// Probability that an observation made `delay` slots ago has been learned,
/// counting forwarding paths of every length up to `delay + 1`.
///
/// Saturates once `delay >= n - 2`.
pub fn hear_probability(n: u32, b0: f64, delay: u32) -> Result<f64> {
    if n < 2 {
        return Err(Error::Precondition(format!("need n >= 2, got {n}")));
    }
    if !(0.0..=1.0).contains(&b0) {
        return Err(Error::Precondition(format!("b0 must lie in [0, 1], got {b0}")));
    }
    let relays = n - 2;
    let mut miss = 1.0;
    // (n-2)!/(n-2-t')! as a falling product. A path without repeated
    // devices has at most n-2 relays, so longer delays add nothing.
    let mut paths = 1.0;
    for hop in 0..=delay.min(relays) {
        if hop >= 1 {
            paths *= f64::from(relays - hop + 1);
        }
        let p_len = (paths * b0.powi(hop as i32 + 1)).min(1.0);
        miss *= 1.0 - p_len;
    }
    Ok(1.0 - miss)
}

/// `xi_i = p_i * sum_{m != i} p_m (l_m - q_i l_i)`.
pub fn replicator_field(p: &[f64], losses: &[f64], q: &[f64]) -> Result<Vec<f64>> {
    if !is_simplex(p) {
        return Err(Error::InvalidDistribution(format!("{p:?}")));
    }
    if losses.len() != p.len() || q.len() != p.len() {
        return Err(Error::Precondition("p, losses and q must have equal length".into()));
    }
    Ok((0..p.len())
        .map(|i| {
            let s: f64 = (0..p.len())
                .filter(|&m| m != i)
                .map(|m| p[m] * (losses[m] - q[i] * losses[i]))
                .sum();
            p[i] * s
        })
        .collect())
}
