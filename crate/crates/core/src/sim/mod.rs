//! Slot-by-slot simulation of a scenario.
//!
//! Each slot runs in a fixed phase order: scheduled events, selection by
//! every device against the slot-start state, association and gains,
//! communication, unheard tracking, learning updates (with optional minimal
//! reset), then switching delays and download accounting.
//!
//! Every device draws from two private ChaCha8 streams of the run seed, one
//! for decisions and one for switching delays, so the order devices are
//! visited in never changes a run.

pub mod config;
pub mod delay;
mod engine;
mod record;

pub use config::{Algorithm, DeviceConfig, Event, Params, ScenarioConfig, ServiceArea};
pub use delay::{accumulate_download, sample_switch_delay, slot_download_bytes, DelayModel, DelaySpec};
pub use engine::{run, Simulation};
pub use record::{DeviceSlot, ResetCause, RunRecord, SlotRecord};
