//! Simulator for cooperative network selection: devices learn which
//! wireless network to join with Co-Bandit (multiplicative weights fed by
//! occasionally shared, possibly delayed feedback), with EWA and EXP3 as
//! full-information and bandit baselines.
//!
//! ```
//! use cobandit::{scenarios, sim};
//!
//! let mut cfg = scenarios::baseline();
//! cfg.horizon = 50;
//! cfg.seed = 3;
//! let run = sim::run(&cfg).unwrap();
//! assert_eq!(run.slots.len(), 50);
//! assert_eq!(run.slots[0].allocation.total(), 20);
//! ```

pub mod bandit;
pub mod error;
pub mod experiment;
pub mod game;
pub mod gossip;
pub mod ids;
pub mod metrics;
pub mod scenarios;
pub mod sim;
pub mod theory;

pub use error::{Error, Result};
pub use ids::{AreaId, DeviceId, NetworkId, Slot};
