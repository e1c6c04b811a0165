//! EXP3 (Auer et al.) with the exploration schedule `gamma_t = min(1, t^(-1/3))`.

use crate::error::{Error, Result};
use crate::ids::NetworkId;

/// Weights are kept as logarithms; they only ever grow.
#[derive(Debug, Clone)]
pub struct Exp3State {
    networks: Vec<NetworkId>,
    log_weights: Vec<f64>,
    t: u64,
}

impl Exp3State {
    pub fn new(networks: Vec<NetworkId>) -> Self {
        let k = networks.len();
        Self {
            networks,
            log_weights: vec![0.0; k],
            t: 1,
        }
    }

    pub fn networks(&self) -> &[NetworkId] {
        &self.networks
    }

    pub fn slot(&self) -> u64 {
        self.t
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|l| l.exp()).collect()
    }

    pub fn gamma(&self) -> f64 {
        gamma_at(self.t)
    }

    /// `p_i = (1 - gamma) w_i / sum(w) + gamma / k`.
    pub fn probabilities(&self) -> Result<Vec<f64>> {
        let k = self.networks.len();
        if k == 0 {
            return Err(Error::NoNetworks);
        }
        let gamma = self.gamma();
        let top = self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let rel: Vec<f64> = self.log_weights.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = rel.iter().sum();
        Ok(rel
            .iter()
            .map(|w| (1.0 - gamma) * w / total + gamma / k as f64)
            .collect())
    }

    /// Importance-weighted update of the chosen network's weight. Advances
    /// the slot counter and returns the next slot's distribution.
    pub fn step(&mut self, chosen: usize, gain: f64) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&gain) {
            return Err(Error::Precondition(format!("EXP3 gain must lie in [0, 1], got {gain}")));
        }
        let k = self.networks.len();
        if chosen >= k {
            return Err(Error::Precondition(format!("chosen index {chosen} out of {k}")));
        }
        let p = self.probabilities()?;
        if p[chosen] <= 0.0 {
            return Err(Error::Precondition("chosen network has zero probability".into()));
        }
        let gamma = self.gamma();
        let estimate = gain / p[chosen];
        self.log_weights[chosen] += gamma * estimate / k as f64;
        self.t += 1;
        self.probabilities()
    }

    pub fn on_network_discovered(&mut self, network: NetworkId) -> Result<()> {
        if self.networks.contains(&network) {
            return Err(Error::DuplicateNetwork(network));
        }
        let top = self.log_weights.iter().copied().fold(0.0, f64::max);
        self.networks.push(network);
        self.log_weights.push(top);
        Ok(())
    }

    pub fn on_network_lost(&mut self, network: NetworkId) -> Result<()> {
        let idx = self
            .networks
            .iter()
            .position(|&n| n == network)
            .ok_or(Error::UnknownNetwork(network))?;
        self.networks.remove(idx);
        self.log_weights.remove(idx);
        Ok(())
    }
}

pub fn gamma_at(t: u64) -> f64 {
    (t.max(1) as f64).powf(-1.0 / 3.0).min(1.0)
}
