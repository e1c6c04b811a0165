//! Per-device learners: Co-Bandit, EWA and EXP3.
//!
//! Co-Bandit and EWA share [`WeightState`]: max-normalized multiplicative
//! weights whose normalization gives the selection distribution. They differ
//! only in where losses come from; EWA is handed exact losses for every
//! network, Co-Bandit builds importance-weighted estimates from whatever
//! feedback reached it (see [`estimator`]).

pub mod estimator;
pub mod exp3;
pub mod reset;

use std::collections::VecDeque;

use rand::Rng;

use crate::error::{Error, Result};
use crate::ids::{NetworkId, Slot};

pub use estimator::{loss_estimate, EstimatorInputs, HeardReport, LagEvidence};
pub use exp3::Exp3State;
pub use reset::{minimal_reset_check, ResetParams, ResetTrigger};

/// Smallest weight a network can hold. Keeps every probability strictly
/// positive so importance weights stay finite.
pub const WEIGHT_FLOOR: f64 = 1e-250;

/// Tolerance for "sums to one".
pub const SIMPLEX_TOL: f64 = 1e-9;

/// A selection distribution stamped with the slot it was used in.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub slot: Slot,
    pub networks: Vec<NetworkId>,
    pub probs: Vec<f64>,
}

impl Distribution {
    pub fn prob_of(&self, network: NetworkId) -> Option<f64> {
        self.networks.iter().position(|&n| n == network).map(|i| self.probs[i])
    }
}

pub fn is_simplex(p: &[f64]) -> bool {
    !p.is_empty() && p.iter().all(|&x| x >= 0.0 && x.is_finite()) && (p.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL
}

/// Multiplicative-weights state of one device.
#[derive(Debug, Clone)]
pub struct WeightState {
    networks: Vec<NetworkId>,
    weights: Vec<f64>,
    eta: f64,
    history: VecDeque<Distribution>,
    history_len: usize,
}

impl WeightState {
    /// Uniform weights over `networks`; keeps the last `max_delay + 1`
    /// distributions for the estimator.
    pub fn new(networks: Vec<NetworkId>, eta: f64, max_delay: usize) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::Precondition(format!(
                "learning rate must be positive, got {eta}"
            )));
        }
        for (i, n) in networks.iter().enumerate() {
            if networks[..i].contains(n) {
                return Err(Error::DuplicateNetwork(*n));
            }
        }
        let k = networks.len();
        Ok(Self {
            networks,
            weights: vec![1.0; k],
            eta,
            history: VecDeque::with_capacity(max_delay + 1),
            history_len: max_delay + 1,
        })
    }

    pub fn networks(&self) -> &[NetworkId] {
        &self.networks
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn is_empty(&self) -> bool {
        self.networks.is_empty()
    }

    pub fn index_of(&self, network: NetworkId) -> Option<usize> {
        self.networks.iter().position(|&n| n == network)
    }

    /// `p_i = w_i / sum(w)`.
    pub fn probabilities(&self) -> Result<Vec<f64>> {
        if self.weights.is_empty() {
            return Err(Error::NoNetworks);
        }
        let total: f64 = self.weights.iter().sum();
        Ok(self.weights.iter().map(|w| w / total).collect())
    }

    pub fn record_distribution(&mut self, slot: Slot, probs: Vec<f64>) {
        if self.history.len() == self.history_len {
            self.history.pop_front();
        }
        self.history.push_back(Distribution {
            slot,
            networks: self.networks.clone(),
            probs,
        });
    }

    pub fn history(&self) -> impl Iterator<Item = &Distribution> {
        self.history.iter()
    }

    pub fn distribution_at(&self, slot: Slot) -> Option<&Distribution> {
        self.history.iter().rev().find(|d| d.slot == slot)
    }

    pub fn latest_distribution(&self) -> Option<&Distribution> {
        self.history.back()
    }

    /// `w_i <- w_i exp(-eta l_i) / max_m w_m exp(-eta l_m)`.
    pub fn weight_update(&mut self, losses: &[f64]) -> Result<()> {
        if losses.len() != self.weights.len() {
            return Err(Error::Precondition(format!(
                "{} losses for {} networks",
                losses.len(),
                self.weights.len()
            )));
        }
        if let Some(l) = losses.iter().find(|l| !(**l >= 0.0)) {
            return Err(Error::Precondition(format!("loss estimates must be >= 0, got {l}")));
        }
        if self.weights.is_empty() {
            return Ok(());
        }
        let scaled: Vec<f64> = self
            .weights
            .iter()
            .zip(losses)
            .map(|(w, l)| w * (-self.eta * l).exp())
            .collect();
        let max = scaled.iter().copied().fold(0.0, f64::max);
        if max > 0.0 && max.is_finite() {
            for (w, s) in self.weights.iter_mut().zip(&scaled) {
                *w = (s / max).max(WEIGHT_FLOOR);
            }
        } else {
            // Every product underflowed; redo it in the log domain.
            let logs: Vec<f64> = self
                .weights
                .iter()
                .zip(losses)
                .map(|(w, l)| w.ln() - self.eta * l.min(f64::MAX / (2.0 * self.eta)))
                .collect();
            let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for (w, a) in self.weights.iter_mut().zip(&logs) {
                *w = (a - top).exp().max(WEIGHT_FLOOR);
            }
        }
        Ok(())
    }

    /// EWA: the same update driven by full-information losses.
    pub fn ewa_step(&mut self, losses: &[Option<f64>]) -> Result<()> {
        let full = losses
            .iter()
            .enumerate()
            .map(|(i, l)| l.ok_or(Error::MissingLoss(i)))
            .collect::<Result<Vec<_>>>()?;
        self.weight_update(&full)
    }

    /// A newly visible network starts at the maximum weight.
    pub fn on_network_discovered(&mut self, network: NetworkId) -> Result<()> {
        if self.index_of(network).is_some() {
            return Err(Error::DuplicateNetwork(network));
        }
        self.networks.push(network);
        self.weights.push(1.0);
        Ok(())
    }

    /// Drops a network. If it was being selected with probability at least
    /// `threshold`, all remaining weights are reset to 1. Returns whether a
    /// reset happened.
    pub fn on_network_lost(&mut self, network: NetworkId, threshold: f64) -> Result<bool> {
        let idx = self.index_of(network).ok_or(Error::UnknownNetwork(network))?;
        let p_lost = self.probabilities()?[idx];
        self.networks.remove(idx);
        self.weights.remove(idx);
        if self.weights.is_empty() {
            return Ok(false);
        }
        if p_lost >= threshold {
            self.weights.iter_mut().for_each(|w| *w = 1.0);
            return Ok(true);
        }
        let max = self.weights.iter().copied().fold(0.0, f64::max);
        for w in &mut self.weights {
            *w = (*w / max).max(WEIGHT_FLOOR);
        }
        Ok(false)
    }

    pub fn set_weight(&mut self, idx: usize, weight: f64) {
        self.weights[idx] = weight.clamp(WEIGHT_FLOOR, 1.0);
    }

    pub fn reset_all(&mut self) {
        self.weights.iter_mut().for_each(|w| *w = 1.0);
    }
}

/// Outcome of a selection draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub index: usize,
    pub exploring_unheard: bool,
}

/// Index drawn from `p`. Rounding slack at the top end falls to the last
/// network with positive mass.
pub fn sample_index<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    p.iter().rposition(|&x| x > 0.0).unwrap_or(p.len() - 1)
}

/// Co-Bandit selection. With probability `|unheard| / n` a uniformly random
/// unheard network is explored; otherwise the network is drawn from `p`.
///
/// `unheard` holds indices into `p`. No gate draw is made when it is empty.
pub fn select_network<R: Rng + ?Sized>(p: &[f64], unheard: &[usize], n: usize, rng: &mut R) -> Selection {
    if !unheard.is_empty() {
        let gate = (unheard.len() as f64 / n.max(1) as f64).min(1.0);
        if rng.random::<f64>() < gate {
            let pick = rng.random_range(0..unheard.len());
            return Selection {
                index: unheard[pick],
                exploring_unheard: true,
            };
        }
    }
    Selection {
        index: sample_index(p, rng),
        exploring_unheard: false,
    }
}
