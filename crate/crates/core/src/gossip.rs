//! Random broadcast/listen communication with forwarding.
//!
//! Each slot a device broadcasts with probability `p_t` (always when it is
//! exploring an unheard network), otherwise listens with probability `p_l`.
//! A broadcast carries the sender's current observation plus everything in
//! its buffer; listeners in the same service area receive all broadcasts.
//! Buffers keep observations from the last `d + 1` slots, keyed by
//! `(slot, sender)` so forwarded copies are stored once.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bandit::{is_simplex, SIMPLEX_TOL};
use crate::game::GainScale;
use crate::ids::{AreaId, DeviceId, NetworkId, Slot};

/// One device's observation for one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackMessage {
    pub slot: Slot,
    pub sender: DeviceId,
    pub network: NetworkId,
    pub bitrate_mbps: f64,
    pub client_count: u32,
    pub available_networks: Vec<NetworkId>,
    pub distribution: Vec<f64>,
}

impl FeedbackMessage {
    pub fn key(&self) -> (Slot, DeviceId) {
        (self.slot, self.sender)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.available_networks.len() != self.distribution.len() {
            return Err(format!(
                "{} networks but {} probabilities",
                self.available_networks.len(),
                self.distribution.len()
            ));
        }
        if !is_simplex(&self.distribution) {
            return Err(format!("distribution is not a simplex (tol {SIMPLEX_TOL})"));
        }
        if !self.available_networks.contains(&self.network) {
            return Err(format!("network {} not among available networks", self.network));
        }
        if !(self.bitrate_mbps >= 0.0 && self.bitrate_mbps.is_finite()) {
            return Err(format!("bad bit rate {}", self.bitrate_mbps));
        }
        Ok(())
    }

    pub fn prob_of(&self, network: NetworkId) -> Option<f64> {
        self.available_networks
            .iter()
            .position(|&n| n == network)
            .map(|i| self.distribution[i])
    }

    /// CSV trace header matching [`FeedbackMessage::csv_row`].
    pub const CSV_HEADER: [&'static str; 7] = [
        "slot",
        "sender",
        "network",
        "bitrate_mbps",
        "client_count",
        "available_networks",
        "distribution",
    ];

    /// Trace row; list fields are semicolon separated.
    pub fn csv_row(&self) -> [String; 7] {
        let join = |it: &mut dyn Iterator<Item = String>| it.collect::<Vec<_>>().join(";");
        [
            self.slot.to_string(),
            self.sender.to_string(),
            self.network.to_string(),
            self.bitrate_mbps.to_string(),
            self.client_count.to_string(),
            join(&mut self.available_networks.iter().map(|n| n.to_string())),
            join(&mut self.distribution.iter().map(|p| p.to_string())),
        ]
    }
}

pub type SharedMessage = Arc<FeedbackMessage>;

/// Messages from the last `d + 1` slots, one per `(slot, sender)`.
#[derive(Debug, Clone, Default)]
pub struct FeedbackBuffer {
    messages: BTreeMap<(Slot, DeviceId), SharedMessage>,
    horizon: u32,
    rejected: u64,
}

impl FeedbackBuffer {
    pub fn new(horizon: u32) -> Self {
        Self {
            messages: BTreeMap::new(),
            horizon,
            rejected: 0,
        }
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// Count of malformed messages turned away.
    pub fn rejected(&self) -> u64 {
        self.rejected
    }

    pub fn iter(&self) -> impl Iterator<Item = &SharedMessage> {
        self.messages.values()
    }

    pub fn contains(&self, slot: Slot, sender: DeviceId) -> bool {
        self.messages.contains_key(&(slot, sender))
    }

    /// Messages observed at `slot`, ordered by sender.
    pub fn at_slot(&self, slot: Slot) -> impl Iterator<Item = &SharedMessage> {
        self.messages
            .range((slot, DeviceId(0))..=(slot, DeviceId(u32::MAX)))
            .map(|(_, m)| m)
    }

    pub fn oldest_valid(&self, t: Slot) -> Slot {
        t.saturating_sub(self.horizon)
    }

    /// Inserts the device's own observation and everything it received,
    /// keeping the first copy of each `(slot, sender)` and dropping anything
    /// older than `t - d`.
    pub fn absorb<'a>(
        &mut self,
        own: Option<&'a SharedMessage>,
        incoming: impl IntoIterator<Item = &'a SharedMessage>,
        t: Slot,
    ) {
        let oldest = self.oldest_valid(t);
        self.messages.retain(|&(slot, _), _| slot >= oldest);
        for msg in own.into_iter().chain(incoming) {
            if msg.slot < oldest || msg.slot > t {
                continue;
            }
            if msg.validate().is_err() {
                self.rejected += 1;
                continue;
            }
            self.messages.entry(msg.key()).or_insert_with(|| Arc::clone(msg));
        }
    }

    /// Drops everything not sent by `owner`.
    pub fn drop_received(&mut self, owner: DeviceId) {
        self.messages.retain(|&(_, sender), _| sender == owner);
    }

    pub fn clear(&mut self) {
        self.messages.clear();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommMode {
    Broadcast,
    Listen,
    Idle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CommDecision {
    pub mode: CommMode,
    pub forced_broadcast: bool,
}

impl CommDecision {
    pub const IDLE: CommDecision = CommDecision {
        mode: CommMode::Idle,
        forced_broadcast: false,
    };
}

/// Broadcast with probability `p_t`, else listen with probability `p_l`.
/// A device exploring an unheard network always broadcasts.
pub fn decide_comm<R: Rng + ?Sized>(exploring_unheard: bool, p_t: f64, p_l: f64, rng: &mut R) -> CommDecision {
    if exploring_unheard {
        return CommDecision {
            mode: CommMode::Broadcast,
            forced_broadcast: true,
        };
    }
    let mode = if rng.random::<f64>() < p_t {
        CommMode::Broadcast
    } else if rng.random::<f64>() < p_l {
        CommMode::Listen
    } else {
        CommMode::Idle
    };
    CommDecision {
        mode,
        forced_broadcast: false,
    }
}

/// What one participant brings to the exchange.
#[derive(Debug, Clone)]
pub struct Participant<'a> {
    pub device: DeviceId,
    pub area: AreaId,
    pub decision: CommDecision,
    /// Current-slot observation followed by the pre-slot buffer contents.
    pub outgoing: Vec<&'a SharedMessage>,
}

/// Computes what each participant hears this slot, in participant order.
///
/// Listeners receive every same-area broadcaster's outgoing messages.
/// Broadcasters hear nothing unless `listen_while_broadcasting` is set.
pub fn deliver<'a>(participants: &[Participant<'a>], listen_while_broadcasting: bool) -> Vec<Vec<&'a SharedMessage>> {
    participants
        .iter()
        .map(|rx| {
            let listening = match rx.decision.mode {
                CommMode::Listen => true,
                CommMode::Broadcast => listen_while_broadcasting,
                CommMode::Idle => false,
            };
            if !listening {
                return Vec::new();
            }
            participants
                .iter()
                .filter(|tx| tx.device != rx.device && tx.area == rx.area && tx.decision.mode == CommMode::Broadcast)
                .flat_map(|tx| tx.outgoing.iter().copied())
                .collect()
        })
        .collect()
}

/// Last slot each network was heard of; networks silent for `x` slots are
/// unheard.
#[derive(Debug, Clone)]
pub struct UnheardTracker {
    networks: Vec<NetworkId>,
    last_heard: Vec<Slot>,
    x: u32,
}

impl UnheardTracker {
    /// All networks count as heard at `now`.
    pub fn new(networks: Vec<NetworkId>, x: u32, now: Slot) -> Self {
        let k = networks.len();
        Self {
            networks,
            last_heard: vec![now; k],
            x,
        }
    }

    pub fn networks(&self) -> &[NetworkId] {
        &self.networks
    }

    pub fn last_heard(&self, network: NetworkId) -> Option<Slot> {
        self.position(network).map(|i| self.last_heard[i])
    }

    fn position(&self, network: NetworkId) -> Option<usize> {
        self.networks.iter().position(|&n| n == network)
    }

    pub fn add(&mut self, network: NetworkId, now: Slot) {
        if self.position(network).is_none() {
            self.networks.push(network);
            self.last_heard.push(now);
        }
    }

    pub fn remove(&mut self, network: NetworkId) {
        if let Some(i) = self.position(network) {
            self.networks.remove(i);
            self.last_heard.remove(i);
        }
    }

    pub fn mark(&mut self, network: NetworkId, t: Slot) {
        if let Some(i) = self.position(network) {
            self.last_heard[i] = self.last_heard[i].max(t);
        }
    }

    /// Marks the own choice and every network mentioned in the buffer as
    /// heard at `t`.
    pub fn update(&mut self, buffer: &FeedbackBuffer, own_choice: NetworkId, t: Slot) {
        self.mark(own_choice, t);
        let oldest = buffer.oldest_valid(t);
        for msg in buffer.iter() {
            if msg.slot >= oldest {
                self.mark(msg.network, t);
            }
        }
    }

    /// Networks with `t - last_heard >= x`.
    pub fn unheard(&self, t: Slot) -> Vec<NetworkId> {
        self.networks
            .iter()
            .zip(&self.last_heard)
            .filter(|(_, &h)| t.saturating_sub(h) >= self.x)
            .map(|(&n, _)| n)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainMode {
    /// Rebuild capacity from (bit rate x client count) and divide by n + 1.
    #[default]
    Reconstruct,
    /// Sum of reported bit rates divided by n + 1.
    Literal,
}

/// Joining gain of a network, in Mbps, from reports about it for one slot.
/// `None` when nobody reported.
pub fn estimate_network_gain_mbps(reports: &[&FeedbackMessage], mode: GainMode) -> Option<f64> {
    if reports.is_empty() {
        return None;
    }
    let n_hat = reports.iter().map(|m| m.client_count).max().unwrap_or(0);
    let denom = f64::from(n_hat) + 1.0;
    Some(match mode {
        GainMode::Reconstruct => {
            let cap: f64 = reports
                .iter()
                .map(|m| m.bitrate_mbps * f64::from(m.client_count))
                .sum::<f64>()
                / reports.len() as f64;
            cap / denom
        }
        GainMode::Literal => reports.iter().map(|m| m.bitrate_mbps).sum::<f64>() / denom,
    })
}

/// Scaled joining gain, clamped to `[0, 1]`.
pub fn estimate_network_gain(reports: &[&FeedbackMessage], mode: GainMode, scale: &GainScale) -> Option<f64> {
    estimate_network_gain_mbps(reports, mode).map(|g| scale.scale(g).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn msg(slot: Slot, sender: u32, network: u32) -> SharedMessage {
        Arc::new(FeedbackMessage {
            slot,
            sender: DeviceId(sender),
            network: NetworkId(network),
            bitrate_mbps: 3.0,
            client_count: 6,
            available_networks: vec![NetworkId(1), NetworkId(2)],
            distribution: vec![0.5, 0.5],
        })
    }

    #[test]
    fn forced_broadcast_when_exploring() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let d = decide_comm(true, 0.0, 0.0, &mut rng);
            assert_eq!(d.mode, CommMode::Broadcast);
            assert!(d.forced_broadcast);
        }
    }

    #[test]
    fn degenerate_gates() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(decide_comm(false, 0.0, 1.0, &mut rng).mode, CommMode::Listen);
            assert_eq!(decide_comm(false, 1.0, 1.0, &mut rng).mode, CommMode::Broadcast);
            assert_eq!(decide_comm(false, 0.0, 0.0, &mut rng).mode, CommMode::Idle);
        }
    }

    #[test]
    fn comm_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let draws = 50_000;
        let (mut b, mut l) = (0usize, 0usize);
        for _ in 0..draws {
            match decide_comm(false, 0.05, 1.0 / 3.0, &mut rng).mode {
                CommMode::Broadcast => b += 1,
                CommMode::Listen => l += 1,
                CommMode::Idle => {}
            }
        }
        let sigma = |p: f64| 3.0 * (p * (1.0 - p) / draws as f64).sqrt();
        let pl = 0.95 / 3.0;
        assert!((b as f64 / draws as f64 - 0.05).abs() <= sigma(0.05));
        assert!((l as f64 / draws as f64 - pl).abs() <= sigma(pl));
        assert!((pl - 0.31667).abs() < 1e-5);
    }

    fn part<'a>(device: u32, area: u32, mode: CommMode, outgoing: Vec<&'a SharedMessage>) -> Participant<'a> {
        Participant {
            device: DeviceId(device),
            area: AreaId(area),
            decision: CommDecision {
                mode,
                forced_broadcast: false,
            },
            outgoing,
        }
    }

    #[test]
    fn delivery_union_and_area_isolation() {
        let own = msg(10, 1, 1);
        let buf = [msg(9, 1, 1), msg(8, 3, 2), msg(7, 4, 1)];
        let mut out = vec![&own];
        out.extend(buf.iter());
        let ps = vec![
            part(1, 0, CommMode::Broadcast, out.clone()),
            part(2, 0, CommMode::Listen, vec![]),
            part(5, 1, CommMode::Listen, vec![]),
        ];
        let got = deliver(&ps, false);
        assert_eq!(got[1].len(), 4);
        assert!(got[0].is_empty());
        assert!(got[2].is_empty());
    }

    #[test]
    fn broadcasters_without_listeners_deliver_nothing() {
        let a = msg(1, 1, 1);
        let b = msg(1, 2, 1);
        let ps = vec![
            part(1, 0, CommMode::Broadcast, vec![&a]),
            part(2, 0, CommMode::Broadcast, vec![&b]),
        ];
        assert!(deliver(&ps, false).iter().all(Vec::is_empty));
        // With always-listen, broadcasters hear each other.
        let got = deliver(&ps, true);
        assert_eq!(got[0].len(), 1);
        assert_eq!(got[0][0].sender, DeviceId(2));
    }

    #[test]
    fn absorb_dedups_and_expires() {
        let mut buf = FeedbackBuffer::new(5);
        let m = msg(10, 2, 1);
        buf.absorb(None, [&m, &m], 10);
        assert_eq!(buf.len(), 1);
        let stale = msg(4, 3, 1);
        buf.absorb(None, [&stale], 10);
        assert!(!buf.contains(4, DeviceId(3)));
        let edge = msg(5, 3, 1);
        buf.absorb(None, [&edge], 10);
        assert!(buf.contains(5, DeviceId(3)));
        buf.absorb(None, std::iter::empty(), 11);
        assert!(!buf.contains(5, DeviceId(3)));
        assert!(buf.contains(10, DeviceId(2)));
    }

    #[test]
    fn absorb_rejects_malformed() {
        let mut buf = FeedbackBuffer::new(5);
        let mut bad = (*msg(3, 1, 1)).clone();
        bad.distribution = vec![0.7, 0.7];
        let bad = Arc::new(bad);
        buf.absorb(None, [&bad], 3);
        assert!(buf.is_empty());
        assert_eq!(buf.rejected(), 1);
    }

    #[test]
    fn drop_received_keeps_own() {
        let mut buf = FeedbackBuffer::new(5);
        let own = msg(3, 1, 1);
        let other = msg(3, 2, 2);
        buf.absorb(Some(&own), [&other], 3);
        buf.drop_received(DeviceId(1));
        assert_eq!(buf.len(), 1);
        assert!(buf.contains(3, DeviceId(1)));
    }

    #[test]
    fn unheard_tracking() {
        let nets = vec![NetworkId(1), NetworkId(2), NetworkId(3)];
        let mut tr = UnheardTracker::new(nets, 32, 0);
        let mut buf = FeedbackBuffer::new(5);
        let about_b = msg(8, 7, 2);
        buf.absorb(None, [&about_b], 10);
        tr.update(&buf, NetworkId(1), 10);
        assert_eq!(tr.last_heard(NetworkId(1)), Some(10));
        assert_eq!(tr.last_heard(NetworkId(2)), Some(10));
        assert_eq!(tr.last_heard(NetworkId(3)), Some(0));
        assert_eq!(tr.unheard(31), Vec::<NetworkId>::new());
        assert_eq!(tr.unheard(32), vec![NetworkId(3)]);
        assert_eq!(tr.unheard(42), vec![NetworkId(1), NetworkId(2), NetworkId(3)]);
    }

    #[test]
    fn gain_estimates() {
        let scale = GainScale::new(18.0).unwrap();
        let one = msg(1, 1, 1);
        let est = estimate_network_gain(&[&one], GainMode::Reconstruct, &scale).unwrap();
        assert!((est - 1.0 / 7.0).abs() < 1e-12);
        assert!((est - 0.14286).abs() < 1e-5);
        let all: Vec<SharedMessage> = (0..6).map(|s| msg(1, s, 1)).collect();
        let refs: Vec<&FeedbackMessage> = all.iter().map(|m| m.as_ref()).collect();
        let est_all = estimate_network_gain(&refs, GainMode::Reconstruct, &scale).unwrap();
        assert!((est_all - est).abs() < 1e-15);
        let lit = estimate_network_gain_mbps(&[&one], GainMode::Literal).unwrap();
        assert!((lit - 0.42857).abs() < 1e-5);
        assert_eq!(estimate_network_gain(&[], GainMode::Reconstruct, &scale), None);
    }

    #[test]
    fn csv_row_lists_are_semicolon_joined() {
        let row = msg(4, 2, 1).csv_row();
        assert_eq!(row[5], "1;2");
        assert_eq!(row[6], "0.5;0.5");
    }
}
