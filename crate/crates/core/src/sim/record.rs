use serde::{Deserialize, Serialize};

use crate::game::Allocation;
use crate::gossip::{CommMode, FeedbackMessage};
use crate::ids::{DeviceId, NetworkId, Slot};
use crate::metrics::{DeviceSeries, RunSummary, StabilityVerdict};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSlot {
    pub device: DeviceId,
    /// `None` when the device could see no network.
    pub network: Option<NetworkId>,
    pub exploring_unheard: bool,
    pub gain: f64,
    pub comm: CommMode,
    pub max_prob: f64,
    pub switched: bool,
    pub delay_s: f64,
    pub reset: Option<ResetCause>,
}

/// Which minimal-reset rule fired for a device in a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResetCause {
    Explored,
    Feedback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: Slot,
    pub devices: Vec<DeviceSlot>,
    /// Client counts in scenario network order.
    pub allocation: Allocation,
    pub ne: Allocation,
    pub distance: f64,
}

impl SlotRecord {
    pub const CSV_HEADER: [&'static str; 12] = [
        "slot",
        "device",
        "network",
        "exploring_unheard",
        "gain",
        "comm",
        "max_prob",
        "switched",
        "delay_s",
        "reset",
        "allocation",
        "distance",
    ];

    /// One CSV row per device.
    pub fn csv_rows(&self) -> Vec<[String; 12]> {
        let alloc = self
            .allocation
            .counts
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(";");
        self.devices
            .iter()
            .map(|d| {
                [
                    self.slot.to_string(),
                    d.device.to_string(),
                    d.network.map(|n| n.to_string()).unwrap_or_default(),
                    d.exploring_unheard.to_string(),
                    d.gain.to_string(),
                    format!("{:?}", d.comm).to_lowercase(),
                    d.max_prob.to_string(),
                    d.switched.to_string(),
                    d.delay_s.to_string(),
                    d.reset.map(|r| format!("{r:?}").to_lowercase()).unwrap_or_default(),
                    alloc.clone(),
                    self.distance.to_string(),
                ]
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub horizon: Slot,
    pub slots: Vec<SlotRecord>,
    /// Distributions of the devices present at the horizon.
    pub series: Vec<DeviceSeries>,
    /// Cumulative bytes of every device that took part.
    pub downloads: Vec<(DeviceId, f64)>,
    pub switches: Vec<(DeviceId, u32)>,
    pub verdict: StabilityVerdict,
    pub messages: Vec<FeedbackMessage>,
}

impl RunRecord {
    pub fn distance_series(&self) -> Vec<f64> {
        self.slots.iter().map(|s| s.distance).collect()
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            seed: self.seed,
            verdict: self.verdict.clone(),
            distance: self.distance_series(),
            downloads: self.downloads.clone(),
            switches: self.switches.clone(),
        }
    }
}
