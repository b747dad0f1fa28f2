//! Preemptive event-driven simulation of the multiclass M/M/1 queue under
//! an index rule.
//!
//! Each class keeps its jobs in arrival order and a service timer that only
//! runs while that class is in service. Decisions happen at arrivals,
//! departures, and on a `decision_quantum` grid whenever two or more
//! classes are waiting. Costs are accrued per job from the accumulated
//! cost curve, clipped to the post-warmup window.

mod engine;
mod path;
mod sweep;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::policy::{default_grid, verify_monotone, ClassConfig, IndexRule};
use crate::stats::Welford;

pub(crate) use engine::{next_tick, Decider, QueueMachine};
pub use path::SamplePath;
pub use sweep::{load_sweep, scale_to_load, SweepRow};

/// System-wide simulation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub classes: Vec<ClassConfig>,
    pub horizon: f64,
    pub warmup: f64,
    pub replications: usize,
    pub seed: u64,
    pub decision_quantum: f64,
}

impl SystemConfig {
    /// Defaults: warmup 10% of the horizon, 10 replications, seed 0 and a
    /// decision quantum of `0.01 / max mu`.
    pub fn new(classes: Vec<ClassConfig>, horizon: f64) -> Self {
        let max_mu = classes.iter().map(|c| c.mu).fold(0.0, f64::max);
        let decision_quantum = if max_mu > 0.0 { 0.01 / max_mu } else { 0.01 };
        Self {
            classes,
            horizon,
            warmup: 0.1 * horizon,
            replications: 10,
            seed: 0,
            decision_quantum,
        }
    }

    pub fn total_load(&self) -> f64 {
        self.classes.iter().map(ClassConfig::load).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::config("classes", "at least one class is required"));
        }
        for (i, c) in self.classes.iter().enumerate() {
            c.validate()
                .map_err(|e| Error::config(format!("classes[{i}]"), e.to_string()))?;
        }
        let rho = self.total_load();
        if !(rho < 1.0) {
            return Err(Error::Unstable(format!("total load {rho} must be < 1")));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::config("system.horizon", "must be positive and finite"));
        }
        if !(self.warmup >= 0.0 && self.warmup < self.horizon) {
            return Err(Error::config("system.warmup", "must lie in [0, horizon)"));
        }
        if self.replications == 0 {
            return Err(Error::config("system.replications", "must be >= 1"));
        }
        if !(self.decision_quantum > 0.0) {
            return Err(Error::config("system.decision_quantum", "must be > 0"));
        }
        Ok(())
    }
}

/// Which job of a class is its service candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WithinClass {
    /// Oldest job first.
    Fcfs,
    /// Youngest job first, preempt-resume.
    Lcfs,
}

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    /// Post-warmup time-average total holding cost.
    pub mean_cost: f64,
    pub class_cost: Vec<f64>,
    pub arrivals: u64,
    pub departures: u64,
    pub in_system: u64,
    pub preemptions: u64,
    pub busy_fraction: f64,
    pub events: u64,
    /// Departures that happened while another job of the same class waited.
    pub contended_departures: u64,
}

/// Replication statistics for one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub policy: String,
    pub mean_cost: f64,
    /// 95% normal-approximation half-width over replication means.
    pub ci_half: f64,
    pub class_cost: Vec<f64>,
    pub arrivals: u64,
    pub departures: u64,
    pub in_system: u64,
    pub preemptions: u64,
    pub busy_fraction: f64,
    pub replications: Vec<ReplicationResult>,
}

impl SimResult {
    pub fn from_replications(policy: &str, reps: Vec<ReplicationResult>) -> Self {
        let w: Welford = reps.iter().map(|r| r.mean_cost).collect();
        let n = reps.len().max(1) as f64;
        let k = reps.first().map_or(0, |r| r.class_cost.len());
        let class_cost = (0..k)
            .map(|i| reps.iter().map(|r| r.class_cost[i]).sum::<f64>() / n)
            .collect();
        SimResult {
            policy: policy.to_string(),
            mean_cost: w.mean(),
            ci_half: w.ci_half(),
            class_cost,
            arrivals: reps.iter().map(|r| r.arrivals).sum(),
            departures: reps.iter().map(|r| r.departures).sum(),
            in_system: reps.iter().map(|r| r.in_system).sum(),
            preemptions: reps.iter().map(|r| r.preemptions).sum(),
            busy_fraction: reps.iter().map(|r| r.busy_fraction).sum::<f64>() / n,
            replications: reps,
        }
    }
}

pub(crate) fn check_rule(cfg: &SystemConfig, rule: &dyn IndexRule) -> Result<()> {
    if rule.num_classes() != cfg.classes.len() {
        return Err(Error::Domain(format!(
            "policy {} covers {} classes, system has {}",
            rule.name(),
            rule.num_classes(),
            cfg.classes.len()
        )));
    }
    verify_monotone(rule, &default_grid(&cfg.classes))
}

/// Simulates `rule` over all replications of `cfg`.
pub fn simulate(cfg: &SystemConfig, rule: &dyn IndexRule) -> Result<SimResult> {
    cfg.validate()?;
    check_rule(cfg, rule)?;
    let reps = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|r| Ok(QueueMachine::new(cfg, Decider::Rule(rule), WithinClass::Fcfs, r).run()?.0))
        .collect::<Result<Vec<_>>>()?;
    Ok(SimResult::from_replications(rule.name(), reps))
}

/// Runs every `(rule, within-class order)` pair on the same sample path of
/// each replication. Returns `[replication][run]`.
pub fn simulate_coupled(
    cfg: &SystemConfig,
    runs: &[(&dyn IndexRule, WithinClass)],
) -> Result<Vec<Vec<ReplicationResult>>> {
    cfg.validate()?;
    for (rule, _) in runs {
        check_rule(cfg, *rule)?;
    }
    (0..cfg.replications as u64)
        .into_par_iter()
        .map(|r| {
            runs.iter()
                .map(|(rule, within)| Ok(QueueMachine::new(cfg, Decider::Rule(*rule), *within, r).run()?.0))
                .collect()
        })
        .collect()
}

/// A leader run and a follower that replays the leader's class choices on
/// the same sample path but picks jobs within a class by its own order.
#[derive(Debug, Clone, PartialEq)]
pub struct MirroredPath {
    pub leader: ReplicationResult,
    pub follower: ReplicationResult,
}

pub fn simulate_mirrored(
    cfg: &SystemConfig,
    leader: &dyn IndexRule,
    leader_within: WithinClass,
    follower_within: WithinClass,
) -> Result<Vec<MirroredPath>> {
    cfg.validate()?;
    check_rule(cfg, leader)?;
    (0..cfg.replications as u64)
        .into_par_iter()
        .map(|r| {
            let (lead, sched) = QueueMachine::new(cfg, Decider::Rule(leader), leader_within, r)
                .recording()
                .run()?;
            let sched = sched.unwrap_or_default();
            let replay = Decider::Replay {
                schedule: &sched,
                cursor: 0,
            };
            let (follow, _) = QueueMachine::new(cfg, replay, follower_within, r).run()?;
            Ok(MirroredPath {
                leader: lead,
                follower: follow,
            })
        })
        .collect()
}
