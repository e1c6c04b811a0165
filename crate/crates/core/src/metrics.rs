//! Stability detection, distance to equilibrium and cross-run aggregation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{distance_to_ne, Allocation};
use crate::ids::{DeviceId, Slot};
use crate::sim::SlotRecord;

/// Slots whose distance is at most this are inside the epsilon-equilibrium band.
pub const EPSILON_BAND: f64 = 7.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityParams {
    pub threshold: f64,
    /// Minimum number of trailing slots the condition must span beyond its start.
    pub min_window: u32,
}

impl Default for StabilityParams {
    fn default() -> Self {
        Self {
            threshold: 0.75,
            min_window: 10,
        }
    }
}

/// Per-slot selection distributions of one device over the scenario's
/// networks (global index order), starting at `first_slot`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSeries {
    pub device: DeviceId,
    pub first_slot: Slot,
    pub probs: Vec<Vec<f64>>,
}

impl DeviceSeries {
    pub fn last_slot(&self) -> Slot {
        self.first_slot + self.probs.len() as Slot - 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceStability {
    pub device: DeviceId,
    /// Network index held at the end, when the device is stable.
    pub network: Option<usize>,
    pub since: Option<Slot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub stable: bool,
    pub stabilization_slot: Option<Slot>,
    pub at_nash: bool,
    /// Devices that would have to switch to reach the equilibrium counts.
    pub moves_to_ne: Option<u32>,
    pub devices: Vec<DeviceStability>,
}

fn argmax(p: &[f64]) -> usize {
    p.iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// A device is stable when the network it favours at `horizon` has held
/// probability at least `threshold` from some slot `s <= horizon - min_window`
/// through `horizon`. The run is stable when every device is; it stabilized
/// at the latest of the devices' earliest such `s`.
pub fn detect_stability(
    series: &[DeviceSeries],
    horizon: Slot,
    ne: &Allocation,
    params: &StabilityParams,
) -> Result<StabilityVerdict> {
    if series.is_empty() {
        return Err(Error::Empty("stability series"));
    }
    let mut devices = Vec::with_capacity(series.len());
    let mut counts = vec![0u32; ne.counts.len()];
    let mut all_stable = true;
    let mut latest: Slot = 0;
    for s in series {
        if s.probs.is_empty() || s.last_slot() != horizon {
            return Err(Error::Precondition(format!(
                "series of device {} does not reach slot {horizon}",
                s.device
            )));
        }
        let last = s.probs.last().expect("non-empty");
        let fav = argmax(last);
        let mut since = None;
        for (offset, p) in s.probs.iter().enumerate().rev() {
            if p.get(fav).copied().unwrap_or(0.0) >= params.threshold {
                since = Some(s.first_slot + offset as Slot);
            } else {
                break;
            }
        }
        let since = since.filter(|&slot| slot + params.min_window <= horizon);
        match since {
            Some(slot) => {
                latest = latest.max(slot);
                if let Some(c) = counts.get_mut(fav) {
                    *c += 1;
                }
            }
            None => all_stable = false,
        }
        devices.push(DeviceStability {
            device: s.device,
            network: since.map(|_| fav),
            since,
        });
    }
    let stable_alloc = Allocation::new(counts);
    let moves = all_stable.then(|| stable_alloc.moves_to(ne));
    Ok(StabilityVerdict {
        stable: all_stable,
        stabilization_slot: all_stable.then_some(latest),
        at_nash: all_stable && stable_alloc == *ne,
        moves_to_ne: moves,
        devices,
    })
}

/// Distance to equilibrium of every slot, each against the equilibrium of
/// that slot's active population.
pub fn distance_series(records: &[SlotRecord], capacities: &[f64]) -> Result<Vec<f64>> {
    records
        .iter()
        .map(|r| distance_to_ne(capacities, &r.allocation, &r.ne))
        .collect()
}

pub fn in_epsilon_band(distance: f64) -> bool {
    distance <= EPSILON_BAND
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub verdict: StabilityVerdict,
    pub distance: Vec<f64>,
    /// Bytes per device, in device id order.
    pub downloads: Vec<(DeviceId, f64)>,
    pub switches: Vec<(DeviceId, u32)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub runs: usize,
    pub stable_runs: usize,
    pub stable_at_ne_runs: usize,
    pub pct_stable: f64,
    pub pct_stable_at_ne: f64,
    pub median_stabilization_slot: Option<f64>,
    pub median_download_gb: f64,
    /// For stable runs: devices that must switch to reach equilibrium -> run count.
    pub moves_to_ne: BTreeMap<u32, usize>,
    pub mean_distance: Vec<f64>,
    pub p10_distance: Vec<f64>,
    pub p90_distance: Vec<f64>,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 0 {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    })
}

/// Linear-interpolated percentile, `q` in `[0, 1]`, of sorted input.
fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn aggregate(summaries: &[RunSummary]) -> Result<Report> {
    if summaries.is_empty() {
        return Err(Error::Empty("run summaries"));
    }
    let runs = summaries.len();
    let stable: Vec<&RunSummary> = summaries.iter().filter(|s| s.verdict.stable).collect();
    let at_ne = stable.iter().filter(|s| s.verdict.at_nash).count();
    let slots: Vec<f64> = stable
        .iter()
        .filter_map(|s| s.verdict.stabilization_slot.map(f64::from))
        .collect();
    let downloads: Vec<f64> = summaries
        .iter()
        .flat_map(|s| s.downloads.iter().map(|(_, b)| b / 1e9))
        .collect();
    let mut moves = BTreeMap::new();
    for s in &stable {
        if let Some(m) = s.verdict.moves_to_ne {
            *moves.entry(m).or_insert(0) += 1;
        }
    }

    let len = summaries.iter().map(|s| s.distance.len()).min().unwrap_or(0);
    let mut mean = Vec::with_capacity(len);
    let mut p10 = Vec::with_capacity(len);
    let mut p90 = Vec::with_capacity(len);
    let mut column = Vec::with_capacity(runs);
    for t in 0..len {
        column.clear();
        column.extend(summaries.iter().map(|s| s.distance[t]));
        mean.push(column.iter().sum::<f64>() / runs as f64);
        column.sort_by(f64::total_cmp);
        p10.push(percentile_sorted(&column, 0.1));
        p90.push(percentile_sorted(&column, 0.9));
    }

    Ok(Report {
        runs,
        stable_runs: stable.len(),
        stable_at_ne_runs: at_ne,
        pct_stable: 100.0 * stable.len() as f64 / runs as f64,
        pct_stable_at_ne: 100.0 * at_ne as f64 / runs as f64,
        median_stabilization_slot: median(&slots),
        median_download_gb: median(&downloads).unwrap_or(0.0),
        moves_to_ne: moves,
        mean_distance: mean,
        p10_distance: p10,
        p90_distance: p90,
    })
}
