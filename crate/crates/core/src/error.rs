use thiserror::Error;

use crate::ids::{DeviceId, NetworkId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("inconsistent allocation: network {network} chosen but has {count} clients")]
    InconsistentAllocation { network: usize, count: u32 },

    #[error("no networks available")]
    NoNetworks,

    #[error("unknown network {0}")]
    UnknownNetwork(NetworkId),

    #[error("network {0} is already tracked")]
    DuplicateNetwork(NetworkId),

    #[error("unknown device {0}")]
    UnknownDevice(DeviceId),

    #[error("allocations disagree: {0}")]
    AllocationMismatch(String),

    #[error("full-information update is missing the loss of network index {0}")]
    MissingLoss(usize),

    #[error("estimator consistency: network index {network} observed at slot {slot} with q = 0")]
    ZeroQ { network: usize, slot: u32 },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid scenario: {}", .0.join("; "))]
    InvalidScenario(Vec<String>),

    #[error("empty input: {0}")]
    Empty(&'static str),
}
