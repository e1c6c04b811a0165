//! Batches of seeded runs and parameter sweeps.
//!
//! Run `r` of a batch uses seed `base_seed + r`. Results come back in run
//! order whatever the thread count, so aggregates do not depend on it.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{aggregate, Report, RunSummary};
use crate::sim::{run, RunRecord, ScenarioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Batch {
    pub runs: u32,
    pub base_seed: u64,
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
}

impl Batch {
    pub fn new(runs: u32, base_seed: u64) -> Self {
        Self {
            runs,
            base_seed,
            threads: None,
        }
    }

    pub fn seed(&self, run: u32) -> u64 {
        self.base_seed.wrapping_add(u64::from(run))
    }
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n.max(1));
    }
    builder
        .build()
        .map_err(|e| Error::Precondition(format!("thread pool: {e}")))
}

/// Runs the batch, handing each full record to `inspect` before reducing it
/// to a summary. `inspect` may run concurrently for different runs.
pub fn run_many_with<F>(cfg: &ScenarioConfig, batch: &Batch, inspect: F) -> Result<Vec<RunSummary>>
where
    F: Fn(u32, &RunRecord) -> Result<()> + Sync,
{
    if batch.runs == 0 {
        return Err(Error::Precondition("a batch needs at least one run".into()));
    }
    cfg.validate()?;
    pool(batch.threads)?.install(|| {
        (0..batch.runs)
            .into_par_iter()
            .map(|r| {
                let mut c = cfg.clone();
                c.seed = batch.seed(r);
                let record = run(&c)?;
                inspect(r, &record)?;
                log::debug!("run {r} (seed {}) stable: {}", c.seed, record.verdict.stable);
                Ok(record.summary())
            })
            .collect()
    })
}

pub fn run_many(cfg: &ScenarioConfig, batch: &Batch) -> Result<Vec<RunSummary>> {
    run_many_with(cfg, batch, |_, _| Ok(()))
}

pub fn run_report(cfg: &ScenarioConfig, batch: &Batch) -> Result<Report> {
    aggregate(&run_many(cfg, batch)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    PT,
    PL,
    D,
    X,
    Eta,
    MinimalReset,
    ResetThreshold,
    ResetMargin,
    ResetPersistence,
    ListenWhileBroadcasting,
    SharingEnabled,
}

impl FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "p_t" => SweepParam::PT,
            "p_l" => SweepParam::PL,
            "d" => SweepParam::D,
            "x" => SweepParam::X,
            "eta" => SweepParam::Eta,
            "minimal_reset" => SweepParam::MinimalReset,
            "reset_threshold" => SweepParam::ResetThreshold,
            "reset_margin" => SweepParam::ResetMargin,
            "reset_persistence" => SweepParam::ResetPersistence,
            "listen_while_broadcasting" => SweepParam::ListenWhileBroadcasting,
            "sharing_enabled" => SweepParam::SharingEnabled,
            other => {
                return Err(format!(
                    "unknown parameter '{other}' (expected one of {})",
                    SweepParam::NAMES.join(", ")
                ))
            }
        })
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::PT => "p_t",
            SweepParam::PL => "p_l",
            SweepParam::D => "d",
            SweepParam::X => "x",
            SweepParam::Eta => "eta",
            SweepParam::MinimalReset => "minimal_reset",
            SweepParam::ResetThreshold => "reset_threshold",
            SweepParam::ResetMargin => "reset_margin",
            SweepParam::ResetPersistence => "reset_persistence",
            SweepParam::ListenWhileBroadcasting => "listen_while_broadcasting",
            SweepParam::SharingEnabled => "sharing_enabled",
        })
    }
}

impl SweepParam {
    pub const NAMES: [&'static str; 11] = [
        "p_t",
        "p_l",
        "d",
        "x",
        "eta",
        "minimal_reset",
        "reset_threshold",
        "reset_margin",
        "reset_persistence",
        "listen_while_broadcasting",
        "sharing_enabled",
    ];

    /// Sets the parameter. Flags take any non-zero value as true.
    pub fn apply(self, cfg: &mut ScenarioConfig, value: f64) -> Result<()> {
        let whole = |v: f64| {
            if v >= 0.0 && v.fract() == 0.0 && v <= f64::from(u32::MAX) {
                Ok(v as u32)
            } else {
                Err(Error::Precondition(format!(
                    "{self} needs a non-negative integer, got {v}"
                )))
            }
        };
        let p = &mut cfg.params;
        match self {
            SweepParam::PT => p.p_t = value,
            SweepParam::PL => p.p_l = value,
            SweepParam::D => p.d = whole(value)?,
            SweepParam::X => p.x = whole(value)?,
            SweepParam::Eta => p.eta = value,
            SweepParam::MinimalReset => p.minimal_reset = value != 0.0,
            SweepParam::ResetThreshold => p.reset_threshold = value,
            SweepParam::ResetMargin => p.reset_margin = value,
            SweepParam::ResetPersistence => p.reset_persistence = whole(value)?,
            SweepParam::ListenWhileBroadcasting => p.listen_while_broadcasting = value != 0.0,
            SweepParam::SharingEnabled => p.sharing_enabled = value != 0.0,
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub report: Report,
}

pub fn sweep(cfg: &ScenarioConfig, param: SweepParam, values: &[f64], batch: &Batch) -> Result<Vec<SweepPoint>> {
    values
        .iter()
        .map(|&value| {
            let mut c = cfg.clone();
            param.apply(&mut c, value)?;
            Ok(SweepPoint {
                value,
                report: run_report(&c, batch)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios;

    fn short() -> ScenarioConfig {
        let mut cfg = scenarios::baseline();
        cfg.horizon = 60;
        cfg
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let cfg = short();
        let serial = run_many(
            &cfg,
            &Batch {
                runs: 4,
                base_seed: 9,
                threads: Some(1),
            },
        )
        .unwrap();
        let parallel = run_many(
            &cfg,
            &Batch {
                runs: 4,
                base_seed: 9,
                threads: Some(4),
            },
        )
        .unwrap();
        assert_eq!(serial, parallel);
        let seeds: Vec<u64> = serial.iter().map(|s| s.seed).collect();
        assert_eq!(seeds, vec![9, 10, 11, 12]);
    }

    #[test]
    fn sweep_applies_values() {
        let mut cfg = short();
        SweepParam::D.apply(&mut cfg, 3.0).unwrap();
        assert_eq!(cfg.params.d, 3);
        assert!(SweepParam::D.apply(&mut cfg, 1.5).is_err());
        SweepParam::MinimalReset.apply(&mut cfg, 1.0).unwrap();
        assert!(cfg.params.minimal_reset);
        let points = sweep(&short(), SweepParam::PT, &[0.0, 0.5], &Batch::new(2, 0)).unwrap();
        assert_eq!(points.len(), 2);
        assert_eq!(points[1].value, 0.5);
        for name in SweepParam::NAMES {
            assert_eq!(name.parse::<SweepParam>().unwrap().to_string(), name);
        }
        assert!("q".parse::<SweepParam>().is_err());
        assert!(run_many(&cfg, &Batch::new(0, 0)).is_err());
    }
}
