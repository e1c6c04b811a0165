//! Oracles shared by the integration tests.
#![allow(dead_code)]

use cobandit::bandit::estimator::{loss_estimate, EstimatorInputs, HeardReport, LagEvidence};
use cobandit::bandit::{sample_index, WeightState};
use cobandit::game::perceived_loss;
use cobandit::{DeviceId, NetworkId};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn ids(k: usize) -> Vec<NetworkId> {
    (1..=k as u32).map(NetworkId).collect()
}

/// All allocations of `n` devices over `k` networks.
pub fn compositions(n: u32, k: usize) -> Vec<Vec<u32>> {
    if k == 1 {
        return vec![vec![n]];
    }
    (0..=n)
        .flat_map(|first| {
            compositions(n - first, k - 1).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}

/// No client of an occupied network gains by moving alone.
pub fn stable_by_enumeration(caps: &[f64], counts: &[u32]) -> bool {
    counts.iter().enumerate().filter(|(_, &n)| n > 0).all(|(i, &n)| {
        (0..caps.len())
            .filter(|&m| m != i)
            .all(|m| caps[i] / f64::from(n) >= caps[m] / f64::from(counts[m] + 1))
    })
}

/// Capacity vectors of length `k` with entries in 1..=5.
pub fn capacity_grid(k: usize) -> Vec<Vec<f64>> {
    (0..5usize.pow(k as u32))
        .map(|code| (0..k).map(|j| (code / 5usize.pow(j as u32) % 5 + 1) as f64).collect())
        .collect()
}

/// Monte-Carlo mean of the estimator on a frozen two-network instance:
/// the device always picks network 1 while two neighbours draw from fixed
/// distributions, and every gain is known. Returns `(means, true losses)`.
pub fn estimator_mean(draws: u32, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let nets = ids(2);
    let me = DeviceId(0);
    let own = [1.0, 0.0];
    let others = [[0.4, 0.6], [0.8, 0.2]];
    let gains = vec![Some(0.7), Some(0.3)];
    let truth = perceived_loss(&gains);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = vec![0.0; 2];
    for _ in 0..draws {
        let mut heard = vec![HeardReport {
            device: me,
            chosen: nets[0],
            networks: &nets,
            distribution: &own,
        }];
        for (j, p) in others.iter().enumerate() {
            heard.push(HeardReport {
                device: DeviceId(j as u32 + 1),
                chosen: nets[sample_index(p, &mut rng)],
                networks: &nets,
                distribution: p,
            });
        }
        let lag = LagEvidence {
            slot: 1,
            heard,
            gains: gains.clone(),
        };
        let est = loss_estimate(&EstimatorInputs {
            device: me,
            networks: &nets,
            lags: vec![lag],
        })
        .unwrap();
        for (s, e) in sum.iter_mut().zip(est) {
            *s += e;
        }
    }
    (sum.into_iter().map(|s| s / f64::from(draws)).collect(), truth)
}

/// Drives a Co-Bandit learner that hears one certain reporter per network
/// alongside an EWA learner fed the exact losses. Returns the first slot at
/// which their weights differ.
pub fn ewa_divergence(gains: &[Vec<f64>]) -> Option<usize> {
    let k = gains.first()?.len();
    let nets = ids(k);
    let me = DeviceId(0);
    let own = vec![1.0 / k as f64; k];
    let anchors: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|m| if m == i { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut cob = WeightState::new(nets.clone(), 10.0, 0).unwrap();
    let mut ewa = WeightState::new(nets.clone(), 10.0, 0).unwrap();
    for (t, g) in gains.iter().enumerate() {
        let known: Vec<Option<f64>> = g.iter().map(|&x| Some(x)).collect();
        let mut heard = vec![HeardReport {
            device: me,
            chosen: nets[0],
            networks: &nets,
            distribution: &own,
        }];
        for (i, a) in anchors.iter().enumerate() {
            heard.push(HeardReport {
                device: DeviceId(i as u32 + 1),
                chosen: nets[i],
                networks: &nets,
                distribution: a,
            });
        }
        let lag = LagEvidence {
            slot: t as u32 + 1,
            heard,
            gains: known.clone(),
        };
        let est = loss_estimate(&EstimatorInputs {
            device: me,
            networks: &nets,
            lags: vec![lag],
        })
        .unwrap();
        cob.weight_update(&est).unwrap();
        let exact: Vec<Option<f64>> = perceived_loss(&known).into_iter().map(Some).collect();
        ewa.ewa_step(&exact).unwrap();
        if cob.weights() != ewa.weights() {
            return Some(t);
        }
    }
    None
}
