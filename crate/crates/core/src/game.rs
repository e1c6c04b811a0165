//! The wireless-network-selection congestion game.
//!
//! Each network's capacity is shared equally among the devices associated
//! with it. Gains are scaled to `[0, 1]` by the largest capacity in the
//! scenario, so a sole client on the best network scores exactly 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::NetworkId;

/// Relative slack used when comparing gains for equilibrium checks.
const GAIN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkKind {
    Wifi,
    Cellular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub id: NetworkId,
    pub capacity_mbps: f64,
    pub kind: NetworkKind,
}

impl NetworkSpec {
    pub fn new(id: u32, capacity_mbps: f64, kind: NetworkKind) -> Self {
        Self {
            id: NetworkId(id),
            capacity_mbps,
            kind,
        }
    }
}

/// Per-network client counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub counts: Vec<u32>,
}

impl Allocation {
    pub fn new(counts: Vec<u32>) -> Self {
        Self { counts }
    }

    pub fn zeros(k: usize) -> Self {
        Self { counts: vec![0; k] }
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }

    /// Number of devices that would have to switch to turn `self` into `other`.
    pub fn moves_to(&self, other: &Allocation) -> u32 {
        let diff: u32 = self.counts.iter().zip(&other.counts).map(|(a, b)| a.abs_diff(*b)).sum();
        diff / 2
    }
}

/// Concave per-network utility of `n` clients sharing a capacity.
pub trait Utility {
    fn gain(&self, capacity_mbps: f64, n_clients: u32) -> f64;
}

/// Capacity split equally among clients.
#[derive(Debug, Clone, Copy, Default)]
pub struct EqualShare;

impl Utility for EqualShare {
    fn gain(&self, capacity_mbps: f64, n_clients: u32) -> f64 {
        capacity_mbps / f64::from(n_clients)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainScale {
    pub c_max: f64,
}

impl GainScale {
    pub fn new(c_max: f64) -> Result<Self> {
        if !(c_max > 0.0 && c_max.is_finite()) {
            return Err(Error::Precondition(format!("c_max must be positive, got {c_max}")));
        }
        Ok(Self { c_max })
    }

    pub fn from_capacities(capacities: &[f64]) -> Result<Self> {
        let c_max = capacities.iter().copied().fold(f64::NAN, f64::max);
        if capacities.is_empty() {
            return Err(Error::NoNetworks);
        }
        Self::new(c_max)
    }

    pub fn scale(&self, mbps: f64) -> f64 {
        mbps / self.c_max
    }

    pub fn unscale(&self, gain: f64) -> f64 {
        gain * self.c_max
    }
}

/// Bit rate in Mbps of one of `n_clients` devices sharing `capacity_mbps`.
pub fn raw_gain(capacity_mbps: f64, n_clients: u32) -> Result<f64> {
    if n_clients == 0 {
        return Err(Error::Precondition("raw_gain requires at least one client".into()));
    }
    Ok(EqualShare.gain(capacity_mbps, n_clients))
}

/// Scaled gain of network `network` for a device, given the realized allocation.
///
/// A device associated with the network sees `U(n)`; any other device's
/// hypothetical gain is what it would get by joining, `U(n + 1)`.
pub fn scaled_gain(
    capacity_mbps: f64,
    network: usize,
    allocation: &Allocation,
    chosen: bool,
    scale: &GainScale,
) -> Result<f64> {
    let count = *allocation
        .counts
        .get(network)
        .ok_or_else(|| Error::Precondition(format!("network index {network} out of range")))?;
    let n = if chosen {
        if count == 0 {
            return Err(Error::InconsistentAllocation { network, count });
        }
        count
    } else {
        count + 1
    };
    Ok(scale.scale(raw_gain(capacity_mbps, n)?))
}

/// Perceived loss of each network: best known gain minus its gain, or 0
/// when its gain is unknown.
pub fn perceived_loss(gains_known: &[Option<f64>]) -> Vec<f64> {
    let best = gains_known.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    gains_known
        .iter()
        .map(|g| match g {
            Some(g) => (best - g).max(0.0),
            None => 0.0,
        })
        .collect()
}

fn argmax_join_gain(capacities: &[f64], counts: &[u32], allowed: impl Iterator<Item = usize>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for m in allowed {
        let g = capacities[m] / f64::from(counts[m] + 1);
        match best {
            Some((_, bg)) if g <= bg * (1.0 + GAIN_EPS) => {}
            _ => best = Some((m, g)),
        }
    }
    best.map(|(m, _)| m)
}

/// Pure Nash equilibrium of the equal-share game with `n` identical devices.
///
/// Devices are placed one at a time on the network offering the best
/// joining gain; ties go to the lowest index.
pub fn nash_allocation(capacities: &[f64], n: u32) -> Result<Allocation> {
    if capacities.is_empty() {
        return Err(Error::NoNetworks);
    }
    if let Some(c) = capacities.iter().find(|c| !(**c > 0.0)) {
        return Err(Error::Precondition(format!("capacity must be positive, got {c}")));
    }
    let mut counts = vec![0u32; capacities.len()];
    for _ in 0..n {
        let m = argmax_join_gain(capacities, &counts, 0..capacities.len()).expect("non-empty capacity list");
        counts[m] += 1;
    }
    Ok(Allocation { counts })
}

/// Nash allocation when devices see different subsets of the networks.
///
/// Uses best-response dynamics from a greedy start; the game is a potential
/// game so this terminates. When every device sees the same set this agrees
/// with [`nash_allocation`] on that set.
pub fn nash_allocation_restricted(capacities: &[f64], device_sets: &[Vec<usize>]) -> Result<Allocation> {
    if capacities.is_empty() {
        return Err(Error::NoNetworks);
    }
    if let Some(first) = device_sets.first() {
        if device_sets.iter().all(|s| s == first) {
            let sub: Vec<f64> = first.iter().map(|&i| capacities[i]).collect();
            let mut counts = vec![0u32; capacities.len()];
            if sub.is_empty() {
                return Err(Error::NoNetworks);
            }
            let ne = nash_allocation(&sub, device_sets.len() as u32)?;
            for (pos, &i) in first.iter().enumerate() {
                counts[i] = ne.counts[pos];
            }
            return Ok(Allocation { counts });
        }
    }

    let mut counts = vec![0u32; capacities.len()];
    let mut placed = Vec::with_capacity(device_sets.len());
    for set in device_sets {
        let m = argmax_join_gain(capacities, &counts, set.iter().copied()).ok_or(Error::NoNetworks)?;
        counts[m] += 1;
        placed.push(m);
    }
    // Each improving move strictly increases Rosenthal's potential.
    loop {
        let mut moved = false;
        for (dev, set) in device_sets.iter().enumerate() {
            let cur = placed[dev];
            let here = capacities[cur] / f64::from(counts[cur]);
            let mut best = (cur, here);
            for &m in set {
                if m == cur {
                    continue;
                }
                let g = capacities[m] / f64::from(counts[m] + 1);
                if g > best.1 * (1.0 + GAIN_EPS) {
                    best = (m, g);
                }
            }
            if best.0 != cur {
                counts[cur] -= 1;
                counts[best.0] += 1;
                placed[dev] = best.0;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    Ok(Allocation { counts })
}

/// True when no device on an occupied network gains by moving alone.
pub fn is_nash(capacities: &[f64], allocation: &Allocation) -> bool {
    let counts = &allocation.counts;
    counts.iter().enumerate().filter(|(_, &n)| n > 0).all(|(i, &n)| {
        let here = capacities[i] / f64::from(n);
        (0..capacities.len())
            .filter(|&m| m != i)
            .all(|m| here * (1.0 + GAIN_EPS) >= capacities[m] / f64::from(counts[m] + 1))
    })
}

/// Distance to the Nash equilibrium, in percent.
///
/// A device on a network holding `n_i` clients where equilibrium puts
/// `ne_i` would gain `n_i / ne_i - 1` at equilibrium counts; the distance is
/// the largest such gain over all networks. Devices on a network that is
/// empty at equilibrium are scored by their best unilateral move instead.
pub fn distance_to_ne(capacities: &[f64], current: &Allocation, ne: &Allocation) -> Result<f64> {
    if current.counts.len() != ne.counts.len() || current.counts.len() != capacities.len() {
        return Err(Error::AllocationMismatch(format!(
            "lengths {} / {} / {}",
            current.counts.len(),
            ne.counts.len(),
            capacities.len()
        )));
    }
    if current.total() != ne.total() {
        return Err(Error::AllocationMismatch(format!(
            "device totals {} vs {}",
            current.total(),
            ne.total()
        )));
    }
    let mut worst = 0.0_f64;
    for (i, (&cur, &eq)) in current.counts.iter().zip(&ne.counts).enumerate() {
        if cur == 0 {
            continue;
        }
        let pct = if eq >= 1 {
            100.0 * (f64::from(cur) / f64::from(eq) - 1.0)
        } else {
            let here = capacities[i] / f64::from(cur);
            let best_move = (0..capacities.len())
                .filter(|&m| m != i)
                .map(|m| capacities[m] / f64::from(current.counts[m] + 1))
                .fold(0.0, f64::max);
            100.0 * (best_move / here - 1.0)
        };
        worst = worst.max(pct);
    }
    Ok(worst)
}
