//! Delay-tolerant, importance-weighted loss estimator.
//!
//! For each lag `s = t - lag` in the window the device knows which devices'
//! slot-`s` observations have reached it (always including itself), what
//! they chose and the distributions they drew from. A network's loss at `s`
//! counts only if somebody heard chose it, and is divided by `q`, the
//! probability that at least one of those devices would have chosen it.
//! Averaging over the `d' + 1` lags gives the estimate.

use crate::error::{Error, Result};
use crate::game::perceived_loss;
use crate::ids::{DeviceId, NetworkId, Slot};

/// One device whose observation for a given slot is known.
#[derive(Debug, Clone, Copy)]
pub struct HeardReport<'a> {
    pub device: DeviceId,
    pub chosen: NetworkId,
    pub networks: &'a [NetworkId],
    pub distribution: &'a [f64],
}

impl HeardReport<'_> {
    fn prob_of(&self, network: NetworkId) -> Option<f64> {
        self.networks
            .iter()
            .position(|&n| n == network)
            .map(|i| self.distribution[i])
    }
}

/// Evidence about one past slot, as known now.
#[derive(Debug, Clone)]
pub struct LagEvidence<'a> {
    pub slot: Slot,
    pub heard: Vec<HeardReport<'a>>,
    /// Scaled gain of each of the device's networks at `slot`, if known.
    pub gains: Vec<Option<f64>>,
}

#[derive(Debug, Clone)]
pub struct EstimatorInputs<'a> {
    pub device: DeviceId,
    pub networks: &'a [NetworkId],
    /// Lags `0..=d'`, most recent first.
    pub lags: Vec<LagEvidence<'a>>,
}

/// Per-network terms of one lag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagTerm {
    pub loss: f64,
    pub chosen_by_heard: bool,
    pub q: f64,
}

/// `1 - prod(1 - p)` without losing tiny probabilities to rounding.
pub fn prob_any(probs: impl IntoIterator<Item = f64>) -> f64 {
    let log_none: f64 = probs.into_iter().map(|p| (-p.min(1.0)).ln_1p()).sum();
    -log_none.exp_m1()
}

pub fn lag_terms(device: DeviceId, networks: &[NetworkId], lag: &LagEvidence<'_>) -> Result<Vec<LagTerm>> {
    if lag.gains.len() != networks.len() {
        return Err(Error::Precondition(format!(
            "{} gains for {} networks at slot {}",
            lag.gains.len(),
            networks.len(),
            lag.slot
        )));
    }
    let own = lag.heard.iter().find(|r| r.device == device).ok_or_else(|| {
        Error::Precondition(format!(
            "device {device} missing from its own window at slot {}",
            lag.slot
        ))
    })?;
    let losses = perceived_loss(&lag.gains);
    networks
        .iter()
        .zip(losses)
        .enumerate()
        .map(|(i, (&net, loss))| {
            let chosen_by_heard = lag.heard.iter().any(|r| r.chosen == net);
            let q = prob_any(lag.heard.iter().filter_map(|r| r.prob_of(net)));
            let own_p = own.prob_of(net).unwrap_or(0.0);
            debug_assert!(q >= own_p * (1.0 - 1e-12), "q {q} < own p {own_p}");
            if chosen_by_heard && q <= 0.0 {
                return Err(Error::ZeroQ {
                    network: i,
                    slot: lag.slot,
                });
            }
            Ok(LagTerm {
                loss,
                chosen_by_heard,
                q,
            })
        })
        .collect()
}

/// `l_i = 1/(d'+1) * sum_lag loss_i / q_i * I_i`.
pub fn loss_estimate(inputs: &EstimatorInputs<'_>) -> Result<Vec<f64>> {
    if inputs.lags.is_empty() {
        return Err(Error::Precondition("estimator window is empty".into()));
    }
    let k = inputs.networks.len();
    let mut total = vec![0.0; k];
    for lag in &inputs.lags {
        for (acc, term) in total.iter_mut().zip(lag_terms(inputs.device, inputs.networks, lag)?) {
            if term.chosen_by_heard {
                *acc += term.loss / term.q;
            }
        }
    }
    let window = inputs.lags.len() as f64;
    Ok(total.into_iter().map(|x| x / window).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const NETS: [NetworkId; 3] = [NetworkId(1), NetworkId(2), NetworkId(3)];
    const ME: DeviceId = DeviceId(0);

    #[test]
    fn single_slot_alone() {
        let dist = [0.2, 0.5, 0.3];
        // Only own gain known: perceived loss is zero everywhere.
        let lag = LagEvidence {
            slot: 1,
            heard: vec![HeardReport {
                device: ME,
                chosen: NETS[0],
                networks: &NETS,
                distribution: &dist,
            }],
            gains: vec![Some(0.4), None, None],
        };
        let est = loss_estimate(&EstimatorInputs {
            device: ME,
            networks: &NETS,
            lags: vec![lag],
        })
        .unwrap();
        assert_eq!(est, vec![0.0; 3]);
    }

    #[test]
    fn single_term_is_loss_over_p() {
        // Chose network 1 with p = 0.2 and learned its perceived loss is 0.2.
        let dist = [0.2, 0.5, 0.3];
        let lag = LagEvidence {
            slot: 1,
            heard: vec![HeardReport {
                device: ME,
                chosen: NETS[0],
                networks: &NETS,
                distribution: &dist,
            }],
            gains: vec![Some(0.4), Some(0.6), None],
        };
        let terms = lag_terms(ME, &NETS, &lag).unwrap();
        assert!((terms[0].loss - 0.2).abs() < 1e-12);
        let est = loss_estimate(&EstimatorInputs {
            device: ME,
            networks: &NETS,
            lags: vec![lag],
        })
        .unwrap();
        assert!((est[0] - 1.0).abs() < 1e-12);
        // Network 2's gain is known but nobody heard chose it.
        assert_eq!(est[1], 0.0);
        assert_eq!(est[2], 0.0);
    }

    #[test]
    fn certain_choices_give_exact_losses() {
        let certain = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let mine = [0.5, 0.25, 0.25];
        let mut heard = vec![HeardReport {
            device: ME,
            chosen: NETS[0],
            networks: &NETS,
            distribution: &mine,
        }];
        for (i, d) in certain.iter().enumerate() {
            heard.push(HeardReport {
                device: DeviceId(i as u32 + 1),
                chosen: NETS[i],
                networks: &NETS,
                distribution: d,
            });
        }
        let gains = vec![Some(0.3), Some(0.5), Some(0.1)];
        let exact = perceived_loss(&gains);
        let lag = LagEvidence { slot: 4, heard, gains };
        let est = loss_estimate(&EstimatorInputs {
            device: ME,
            networks: &NETS,
            lags: vec![lag],
        })
        .unwrap();
        for (a, b) in est.iter().zip(exact) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn window_averages_over_lags() {
        let mine = [0.5, 0.5, 0.0];
        let other = [0.0, 1.0, 0.0];
        let lag = |slot| LagEvidence {
            slot,
            heard: vec![
                HeardReport {
                    device: ME,
                    chosen: NETS[0],
                    networks: &NETS,
                    distribution: &mine,
                },
                HeardReport {
                    device: DeviceId(9),
                    chosen: NETS[1],
                    networks: &NETS,
                    distribution: &other,
                },
            ],
            gains: vec![Some(0.6), Some(0.2), None],
        };
        let quiet = LagEvidence {
            slot: 3,
            heard: vec![HeardReport {
                device: ME,
                chosen: NETS[0],
                networks: &NETS,
                distribution: &mine,
            }],
            gains: vec![Some(0.6), None, None],
        };
        let est = loss_estimate(&EstimatorInputs {
            device: ME,
            networks: &NETS,
            lags: vec![lag(5), lag(4), quiet],
        })
        .unwrap();
        // Network 2: loss 0.4 with q = 1 on two of three lags.
        assert!((est[1] - 0.8 / 3.0).abs() < 1e-12);
        assert_eq!(est[0], 0.0);
    }

    #[test]
    fn sender_without_network_is_skipped_in_q() {
        let mine = [0.5, 0.5];
        let nets2 = [NetworkId(1), NetworkId(2)];
        let theirs_nets = [NetworkId(2), NetworkId(7)];
        let theirs = [0.4, 0.6];
        let lag = LagEvidence {
            slot: 1,
            heard: vec![
                HeardReport {
                    device: ME,
                    chosen: nets2[0],
                    networks: &nets2,
                    distribution: &mine,
                },
                HeardReport {
                    device: DeviceId(3),
                    chosen: NetworkId(2),
                    networks: &theirs_nets,
                    distribution: &theirs,
                },
            ],
            gains: vec![Some(0.2), Some(0.5)],
        };
        let t = lag_terms(ME, &nets2, &lag).unwrap();
        assert!((t[0].q - 0.5).abs() < 1e-12);
        assert!((t[1].q - (1.0 - 0.5 * 0.6)).abs() < 1e-12);
    }

    #[test]
    fn own_report_is_required() {
        let d = [1.0];
        let n = [NetworkId(1)];
        let lag = LagEvidence {
            slot: 1,
            heard: vec![HeardReport {
                device: DeviceId(5),
                chosen: n[0],
                networks: &n,
                distribution: &d,
            }],
            gains: vec![Some(1.0)],
        };
        assert!(lag_terms(ME, &n, &lag).is_err());
    }

    #[test]
    fn prob_any_keeps_tiny_probabilities() {
        assert_eq!(prob_any([1e-300]), 1e-300);
        assert!((prob_any([0.5, 0.5]) - 0.75).abs() < 1e-15);
        assert_eq!(prob_any([1.0, 0.3]), 1.0);
        assert_eq!(prob_any(std::iter::empty()), 0.0);
    }
}
