//! Minimal reset: restore a promising network's weight to the maximum
//! without unlearning the rest.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::WeightState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResetParams {
    /// Probability at which a network counts as the device's current pick.
    pub threshold: f64,
    /// Relative gain margin another network must beat the pick by.
    pub margin: f64,
    /// Distinct slots of evidence the feedback rule needs.
    pub persistence: u32,
}

impl Default for ResetParams {
    fn default() -> Self {
        Self {
            threshold: 0.75,
            margin: 0.025,
            persistence: 2,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum ResetTrigger<'a> {
    /// The device explored an unheard network this slot.
    ExploredUnheard {
        network: usize,
        gain: f64,
        /// Most recent known gain of the preferred network.
        preferred_gain: Option<f64>,
    },
    /// Gains known for each slot of the feedback window, current slot first.
    Feedback {
        window: &'a [Vec<Option<f64>>],
        /// Estimated client count of the device's own network.
        own_clients: u32,
    },
}

/// The network held with probability at least `threshold`, judged on the
/// distribution the device used this slot.
pub fn preferred_network(state: &WeightState, threshold: f64) -> Option<usize> {
    let dist = state.latest_distribution()?;
    let (idx, &p) = dist.probs.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    if p < threshold {
        return None;
    }
    // Translate to the current network order.
    state.index_of(dist.networks[idx])
}

/// Applies the minimal-reset rules. Returns true when a weight was reset;
/// the caller then discards feedback buffered from other devices.
pub fn minimal_reset_check<R: Rng + ?Sized>(
    state: &mut WeightState,
    trigger: ResetTrigger<'_>,
    params: &ResetParams,
    rng: &mut R,
) -> bool {
    let Some(pref) = preferred_network(state, params.threshold) else {
        return false;
    };
    match trigger {
        ResetTrigger::ExploredUnheard {
            network,
            gain,
            preferred_gain,
        } => {
            if network == pref {
                return false;
            }
            match preferred_gain {
                Some(g) if gain > g => {
                    state.set_weight(network, 1.0);
                    true
                }
                _ => false,
            }
        }
        ResetTrigger::Feedback { window, own_clients } => {
            let Some(gains) = window.first() else {
                return false;
            };
            let Some(current) = gains.get(pref).copied().flatten() else {
                return false;
            };
            let beats = |slot: &Vec<Option<f64>>, i: usize| match (
                slot.get(i).copied().flatten(),
                slot.get(pref).copied().flatten(),
            ) {
                (Some(g), Some(p)) => Some(g > p * (1.0 + params.margin)),
                _ => None,
            };
            // The current slot must show the other network ahead, and every
            // slot in the window that compares the two must agree.
            let persistent = |i: usize| {
                let verdicts: Vec<bool> = window.iter().filter_map(|slot| beats(slot, i)).collect();
                verdicts.iter().all(|&b| b) && verdicts.len() >= params.persistence.max(1) as usize
            };
            let better = gains
                .iter()
                .enumerate()
                .filter(|&(i, g)| i != pref && g.is_some_and(|g| g > current * (1.0 + params.margin)) && persistent(i))
                .max_by(|a, b| a.1.unwrap().total_cmp(&b.1.unwrap()))
                .map(|(i, _)| i);
            let Some(target) = better else {
                return false;
            };
            let coin = 1.0 / f64::from(own_clients.max(1));
            if rng.random::<f64>() < coin {
                state.set_weight(target, 1.0);
                true
            } else {
                false
            }
        }
    }
}
