//! Scenario description, as read from JSON.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::NetworkSpec;
use crate::gossip::GainMode;
use crate::ids::{AreaId, DeviceId, NetworkId, Slot};

use super::delay::DelayModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceArea {
    pub id: AreaId,
    pub networks: Vec<NetworkId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    CoBandit,
    Ewa,
    Exp3,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::CoBandit => "cobandit",
            Algorithm::Ewa => "ewa",
            Algorithm::Exp3 => "exp3",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "cobandit" | "co-bandit" => Ok(Algorithm::CoBandit),
            "ewa" => Ok(Algorithm::Ewa),
            "exp3" => Ok(Algorithm::Exp3),
            other => Err(format!("unknown algorithm '{other}' (expected cobandit, ewa or exp3)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceConfig {
    pub id: DeviceId,
    pub area: AreaId,
    pub algorithm: Algorithm,
}

/// Scheduled changes. A join, move or network change takes effect at the
/// start of `slot`; a leave takes effect after `slot` has been played.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    Join {
        device: DeviceId,
        area: AreaId,
        slot: Slot,
    },
    Leave {
        device: DeviceId,
        slot: Slot,
    },
    Move {
        device: DeviceId,
        area: AreaId,
        slot: Slot,
    },
    NetworkAdd {
        network: NetworkId,
        area: AreaId,
        slot: Slot,
    },
    NetworkRemove {
        network: NetworkId,
        area: AreaId,
        slot: Slot,
    },
}

impl Event {
    pub fn slot(&self) -> Slot {
        match *self {
            Event::Join { slot, .. }
            | Event::Leave { slot, .. }
            | Event::Move { slot, .. }
            | Event::NetworkAdd { slot, .. }
            | Event::NetworkRemove { slot, .. } => slot,
        }
    }

    /// First slot played under the event's effect.
    pub fn effective_slot(&self) -> Slot {
        match self {
            Event::Leave { slot, .. } => slot + 1,
            other => other.slot(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub eta: f64,
    pub p_t: f64,
    pub p_l: f64,
    pub d: u32,
    pub x: u32,
    pub minimal_reset: bool,
    pub gain_mode: GainMode,
    pub reset_threshold: f64,
    pub reset_margin: f64,
    /// Slots of agreeing evidence before feedback can trigger a reset.
    pub reset_persistence: u32,
    /// Broadcasters also receive that slot's other broadcasts.
    pub listen_while_broadcasting: bool,
    /// When false no device ever sends or receives feedback.
    pub sharing_enabled: bool,
    /// Keep every feedback message produced in the run record.
    pub record_messages: bool,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            eta: 10.0,
            p_t: 0.05,
            p_l: 1.0 / 3.0,
            d: 5,
            x: 32,
            minimal_reset: false,
            gain_mode: GainMode::Reconstruct,
            reset_threshold: 0.75,
            reset_margin: 0.025,
            reset_persistence: 2,
            listen_while_broadcasting: false,
            sharing_enabled: true,
            record_messages: false,
        }
    }
}

fn default_slot_duration() -> f64 {
    15.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub networks: Vec<NetworkSpec>,
    pub areas: Vec<ServiceArea>,
    /// Devices whose first event is a join start outside the simulation.
    pub devices: Vec<DeviceConfig>,
    pub horizon: Slot,
    #[serde(default = "default_slot_duration")]
    pub slot_duration_s: f64,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub events: Vec<Event>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub delay_model: DelayModel,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidScenario(vec![e.to_string()]))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn capacities(&self) -> Vec<f64> {
        self.networks.iter().map(|n| n.capacity_mbps).collect()
    }

    pub fn network_index(&self, id: NetworkId) -> Option<usize> {
        self.networks.iter().position(|n| n.id == id)
    }

    pub fn set_algorithm(&mut self, algorithm: Algorithm) {
        for d in &mut self.devices {
            d.algorithm = algorithm;
        }
    }

    /// Whether the device is present at slot 1.
    pub fn initially_active(&self, device: DeviceId) -> bool {
        !matches!(
            self.events.iter().find(|e| event_device(e) == Some(device)),
            Some(Event::Join { .. })
        )
    }

    /// Every problem with the scenario, or `Ok` when there are none.
    pub fn validate(&self) -> Result<()> {
        let errors = self.problems();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidScenario(errors))
        }
    }

    pub fn problems(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let mut net_ids = BTreeSet::new();
        if self.networks.is_empty() {
            errs.push("no networks".to_string());
        }
        for n in &self.networks {
            if !net_ids.insert(n.id) {
                errs.push(format!("duplicate network id {}", n.id));
            }
            if !(n.capacity_mbps > 0.0 && n.capacity_mbps.is_finite()) {
                errs.push(format!("network {} has capacity {}", n.id, n.capacity_mbps));
            }
        }

        let mut visible: BTreeMap<AreaId, BTreeSet<NetworkId>> = BTreeMap::new();
        for a in &self.areas {
            if visible.contains_key(&a.id) {
                errs.push(format!("duplicate area id {}", a.id));
                continue;
            }
            if a.networks.is_empty() {
                errs.push(format!("area {} lists no networks", a.id));
            }
            let mut set = BTreeSet::new();
            for n in &a.networks {
                if !net_ids.contains(n) {
                    errs.push(format!("area {} lists unknown network {n}", a.id));
                }
                if !set.insert(*n) {
                    errs.push(format!("area {} lists network {n} twice", a.id));
                }
            }
            visible.insert(a.id, set);
        }

        let mut active: BTreeMap<DeviceId, bool> = BTreeMap::new();
        if self.devices.is_empty() {
            errs.push("no devices".to_string());
        }
        for d in &self.devices {
            if active.insert(d.id, self.initially_active(d.id)).is_some() {
                errs.push(format!("duplicate device id {}", d.id));
            }
            if !visible.contains_key(&d.area) {
                errs.push(format!("device {} starts in unknown area {}", d.id, d.area));
            }
        }

        if self.horizon == 0 {
            errs.push("horizon must be at least one slot".to_string());
        }
        if !(self.slot_duration_s > 0.0 && self.slot_duration_s.is_finite()) {
            errs.push(format!(
                "slot_duration_s must be positive, got {}",
                self.slot_duration_s
            ));
        }
        let p = &self.params;
        if !(p.eta > 0.0 && p.eta.is_finite()) {
            errs.push(format!("eta must be positive, got {}", p.eta));
        }
        for (name, v) in [("p_t", p.p_t), ("p_l", p.p_l)] {
            if !(0.0..=1.0).contains(&v) {
                errs.push(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if !(p.reset_threshold > 0.0 && p.reset_threshold <= 1.0) {
            errs.push(format!("reset_threshold must lie in (0, 1], got {}", p.reset_threshold));
        }
        if !(p.reset_margin >= 0.0 && p.reset_margin.is_finite()) {
            errs.push(format!("reset_margin must be >= 0, got {}", p.reset_margin));
        }
        if p.x == 0 {
            errs.push("x must be at least 1".to_string());
        }
        errs.extend(self.delay_model.problems(self.slot_duration_s));

        let mut last_slot = 0;
        for (i, e) in self.events.iter().enumerate() {
            let at = format!("event {i} ({:?})", e);
            if e.slot() < last_slot {
                errs.push(format!("{at}: events are not sorted by slot"));
            }
            last_slot = e.slot();
            if e.slot() == 0 || e.slot() > self.horizon {
                errs.push(format!("{at}: slot outside 1..={}", self.horizon));
            }
            match e {
                Event::Join { device, area, .. } => {
                    match active.get_mut(device) {
                        None => errs.push(format!("{at}: unknown device {device}")),
                        Some(true) => errs.push(format!("{at}: device {device} is already present")),
                        Some(a) => *a = true,
                    }
                    if !visible.contains_key(area) {
                        errs.push(format!("{at}: unknown area {area}"));
                    }
                }
                Event::Leave { device, .. } => match active.get_mut(device) {
                    None => errs.push(format!("{at}: unknown device {device}")),
                    Some(false) => errs.push(format!("{at}: device {device} is not present")),
                    Some(a) => *a = false,
                },
                Event::Move { device, area, .. } => {
                    match active.get(device) {
                        None => errs.push(format!("{at}: unknown device {device}")),
                        Some(false) => errs.push(format!("{at}: device {device} is not present")),
                        Some(true) => {}
                    }
                    if !visible.contains_key(area) {
                        errs.push(format!("{at}: unknown area {area}"));
                    }
                }
                Event::NetworkAdd { network, area, .. } => {
                    if !net_ids.contains(network) {
                        errs.push(format!("{at}: unknown network {network}"));
                    }
                    match visible.get_mut(area) {
                        None => errs.push(format!("{at}: unknown area {area}")),
                        Some(set) => {
                            if !set.insert(*network) {
                                errs.push(format!("{at}: network {network} already visible in area {area}"));
                            }
                        }
                    }
                }
                Event::NetworkRemove { network, area, .. } => match visible.get_mut(area) {
                    None => errs.push(format!("{at}: unknown area {area}")),
                    Some(set) => {
                        if !set.remove(network) {
                            errs.push(format!("{at}: network {network} not visible in area {area}"));
                        }
                    }
                },
            }
        }
        errs
    }
}

fn event_device(e: &Event) -> Option<DeviceId> {
    match *e {
        Event::Join { device, .. } | Event::Leave { device, .. } | Event::Move { device, .. } => Some(device),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::NetworkKind;

    fn tiny() -> ScenarioConfig {
        ScenarioConfig {
            name: "tiny".into(),
            networks: vec![
                NetworkSpec::new(1, 10.0, NetworkKind::Wifi),
                NetworkSpec::new(2, 5.0, NetworkKind::Cellular),
            ],
            areas: vec![ServiceArea {
                id: AreaId(0),
                networks: vec![NetworkId(1), NetworkId(2)],
            }],
            devices: (1..=3)
                .map(|i| DeviceConfig {
                    id: DeviceId(i),
                    area: AreaId(0),
                    algorithm: Algorithm::CoBandit,
                })
                .collect(),
            horizon: 50,
            slot_duration_s: 15.0,
            params: Params::default(),
            events: vec![],
            seed: 1,
            delay_model: DelayModel::default(),
        }
    }

    #[test]
    fn valid_scenario_passes() {
        assert_eq!(tiny().problems(), Vec::<String>::new());
    }

    #[test]
    fn json_round_trip_with_defaults() {
        let cfg = tiny();
        let back = ScenarioConfig::from_json(&cfg.to_json_pretty()).unwrap();
        assert_eq!(back, cfg);
        let minimal = r#"{
            "networks": [{"id": 1, "capacity_mbps": 4, "kind": "wifi"}],
            "areas": [{"id": 0, "networks": [1]}],
            "devices": [{"id": 1, "area": 0, "algorithm": "exp3"}],
            "horizon": 3
        }"#;
        let cfg = ScenarioConfig::from_json(minimal).unwrap();
        assert_eq!(cfg.slot_duration_s, 15.0);
        assert_eq!(cfg.params.d, 5);
        assert!(ScenarioConfig::from_json(r#"{"networks": []"#).is_err());
    }

    #[test]
    fn event_json_shape() {
        let e: Event = serde_json::from_str(r#"{"kind": "leave", "device": 3, "slot": 600}"#).unwrap();
        assert_eq!(
            e,
            Event::Leave {
                device: DeviceId(3),
                slot: 600
            }
        );
        assert_eq!(e.effective_slot(), 601);
    }

    #[test]
    fn reports_every_problem() {
        let mut cfg = tiny();
        cfg.networks.push(NetworkSpec::new(1, -1.0, NetworkKind::Wifi));
        cfg.params.p_t = 1.5;
        cfg.events = vec![
            Event::Leave {
                device: DeviceId(9),
                slot: 10,
            },
            Event::Move {
                device: DeviceId(1),
                area: AreaId(4),
                slot: 5,
            },
        ];
        let errs = cfg.problems();
        for needle in [
            "duplicate network",
            "capacity -1",
            "p_t",
            "unknown device 9",
            "not sorted",
            "unknown area 4",
        ] {
            assert!(
                errs.iter().any(|e| e.contains(needle)),
                "missing '{needle}' in {errs:?}"
            );
        }
        assert!(matches!(cfg.validate(), Err(Error::InvalidScenario(v)) if v.len() == errs.len()));
    }

    #[test]
    fn join_and_leave_bookkeeping() {
        let mut cfg = tiny();
        cfg.events = vec![
            Event::Join {
                device: DeviceId(3),
                area: AreaId(0),
                slot: 10,
            },
            Event::Leave {
                device: DeviceId(3),
                slot: 20,
            },
            Event::Leave {
                device: DeviceId(3),
                slot: 30,
            },
        ];
        assert!(!cfg.initially_active(DeviceId(3)));
        assert!(cfg.initially_active(DeviceId(1)));
        let errs = cfg.problems();
        assert_eq!(errs.len(), 1);
        assert!(errs[0].contains("not present"));
    }

    #[test]
    fn algorithm_names_parse() {
        for a in [Algorithm::CoBandit, Algorithm::Ewa, Algorithm::Exp3] {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("ucb".parse::<Algorithm>().is_err());
    }
}
