//! Built-in scenarios.

use crate::game::{NetworkKind, NetworkSpec};
use crate::ids::{AreaId, DeviceId, NetworkId};
use crate::sim::{Algorithm, DelayModel, DeviceConfig, Event, Params, ScenarioConfig, ServiceArea};

pub const PRESETS: [&str; 6] = ["baseline", "uniform", "skewed", "leave", "join_leave", "mobility"];

/// Networks 1..=k with the given capacities; the listed ids are cellular.
fn networks(caps: &[f64], cellular: &[u32]) -> Vec<NetworkSpec> {
    caps.iter()
        .zip(1u32..)
        .map(|(&c, id)| {
            let kind = if cellular.contains(&id) {
                NetworkKind::Cellular
            } else {
                NetworkKind::Wifi
            };
            NetworkSpec::new(id, c, kind)
        })
        .collect()
}

fn single_area(name: &str, caps: &[f64], cellular: &[u32], n_devices: u32) -> ScenarioConfig {
    let nets = networks(caps, cellular);
    ScenarioConfig {
        name: name.to_string(),
        areas: vec![ServiceArea {
            id: AreaId(0),
            networks: nets.iter().map(|n| n.id).collect(),
        }],
        networks: nets,
        devices: (1..=n_devices)
            .map(|i| DeviceConfig {
                id: DeviceId(i),
                area: AreaId(0),
                algorithm: Algorithm::CoBandit,
            })
            .collect(),
        horizon: 1200,
        slot_duration_s: 15.0,
        params: Params::default(),
        events: Vec::new(),
        seed: 0,
        delay_model: DelayModel::default(),
    }
}

/// 20 devices, five networks of 18, 8, 13, 16 and 10 Mbps.
pub fn baseline() -> ScenarioConfig {
    single_area("baseline", &[18.0, 8.0, 13.0, 16.0, 10.0], &[2, 5], 20)
}

/// Five 13 Mbps networks.
pub fn uniform() -> ScenarioConfig {
    single_area("uniform", &[13.0; 5], &[2, 5], 20)
}

/// 6, 7, 22, 16 and 14 Mbps.
pub fn skewed() -> ScenarioConfig {
    single_area("skewed", &[6.0, 7.0, 22.0, 16.0, 14.0], &[1, 2], 20)
}

/// Baseline where devices 11-20 leave after slot 600.
pub fn leave() -> ScenarioConfig {
    let mut cfg = baseline();
    cfg.name = "leave".into();
    cfg.params.minimal_reset = true;
    cfg.events = (11..=20)
        .map(|i| Event::Leave {
            device: DeviceId(i),
            slot: 600,
        })
        .collect();
    cfg
}

/// Baseline where devices 11-20 are present only for slots 401-800.
pub fn join_leave() -> ScenarioConfig {
    let mut cfg = baseline();
    cfg.name = "join_leave".into();
    cfg.params.minimal_reset = true;
    cfg.events = (11..=20)
        .map(|i| Event::Join {
            device: DeviceId(i),
            area: AreaId(0),
            slot: 401,
        })
        .chain((11..=20).map(|i| Event::Leave {
            device: DeviceId(i),
            slot: 800,
        }))
        .collect();
    cfg
}

/// Three service areas over networks of 16, 14, 22, 7 and 4 Mbps. Devices
/// 1-8 walk from the first area to the second at slot 401 and on to the
/// third at slot 801.
pub fn mobility() -> ScenarioConfig {
    let nets = networks(&[16.0, 14.0, 22.0, 7.0, 4.0], &[4, 5]);
    let area = |id: u32, ns: &[u32]| ServiceArea {
        id: AreaId(id),
        networks: ns.iter().map(|&n| NetworkId(n)).collect(),
    };
    let home = |i: u32| match i {
        1..=10 => AreaId(0),
        11..=15 => AreaId(1),
        _ => AreaId(2),
    };
    let params = Params {
        minimal_reset: true,
        ..Params::default()
    };
    ScenarioConfig {
        name: "mobility".into(),
        networks: nets,
        areas: vec![area(0, &[1, 2]), area(1, &[1, 3, 5]), area(2, &[3, 4, 5])],
        devices: (1..=20)
            .map(|i| DeviceConfig {
                id: DeviceId(i),
                area: home(i),
                algorithm: Algorithm::CoBandit,
            })
            .collect(),
        horizon: 1200,
        slot_duration_s: 15.0,
        params,
        events: (1..=8)
            .map(|i| Event::Move {
                device: DeviceId(i),
                area: AreaId(1),
                slot: 401,
            })
            .chain((1..=8).map(|i| Event::Move {
                device: DeviceId(i),
                area: AreaId(2),
                slot: 801,
            }))
            .collect(),
        seed: 0,
        delay_model: DelayModel::default(),
    }
}

pub fn preset(name: &str) -> Option<ScenarioConfig> {
    Some(match name {
        "baseline" => baseline(),
        "uniform" => uniform(),
        "skewed" => skewed(),
        "leave" => leave(),
        "join_leave" => join_leave(),
        "mobility" => mobility(),
        _ => return None,
    })
}
