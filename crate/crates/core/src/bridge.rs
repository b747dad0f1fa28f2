//! The queue as a restless multi-armed bandit. Arm `i` carries a real state
//! `T_i`: the age of the oldest class-`i` job, or minus the time until the
//! next class-`i` arrival. Every arm drifts up at unit rate; the single
//! active arm drops by an `Exp(lambda_i)` gap each time its service timer
//! rings. An arm may only be active while `T_i >= 0`. Arm `i` costs
//! `r_i(T_i)` per unit time.

use rayon::prelude::*;

use crate::cost::reward_r_integral;
use crate::error::{Error, Result};
use crate::policy::{ClassConfig, IndexRule};
use crate::sim::{check_rule, next_tick, Decider, QueueMachine, ReplicationResult, SamplePath, SimResult, SystemConfig, WithinClass};

/// Slack used to merge the two machines' proposals for the same event.
pub const COALESCE_WINDOW: f64 = 1e-9;
/// Largest allowed `|T_i - A_i|` under coupling.
pub const COUPLING_TOLERANCE: f64 = 1e-9;

/// State of one arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmState {
    pub t: f64,
    /// Remaining service-timer time.
    pub timer: f64,
    pub drops: u64,
}

struct ArmMachine<'a> {
    classes: &'a [ClassConfig],
    rule: &'a dyn IndexRule,
    path: SamplePath,
    delta: f64,
    warmup: f64,
    horizon: f64,
    ticks: bool,

    now: f64,
    arms: Vec<ArmState>,
    active: Option<usize>,
    completion_at: f64,

    r_cost: Vec<f64>,
    /// State of each arm when its current drift stretch started being charged.
    charged_from: Vec<f64>,
    busy: f64,
    events: u64,
}

impl<'a> ArmMachine<'a> {
    fn new(cfg: &'a SystemConfig, rule: &'a dyn IndexRule, replication: u64) -> Self {
        let classes = &cfg.classes[..];
        let mut path = SamplePath::new(classes, cfg.seed, replication);
        let starts: Vec<f64> = (0..classes.len()).map(|i| -path.interarrival(i)).collect();
        let arms = starts
            .iter()
            .copied()
            .enumerate()
            .map(|(i, t)| ArmState {
                t,
                timer: path.service(i),
                drops: 0,
            })
            .collect();
        Self {
            classes,
            rule,
            path,
            delta: cfg.decision_quantum,
            warmup: cfg.warmup,
            horizon: cfg.horizon,
            ticks: rule.needs_ticks(),
            now: 0.0,
            arms,
            active: None,
            completion_at: f64::INFINITY,
            r_cost: vec![0.0; classes.len()],
            charged_from: starts,
            busy: 0.0,
            events: 0,
        }
    }

    fn eligible(&self, i: usize) -> bool {
        self.arms[i].t >= -COALESCE_WINDOW
    }

    fn next_event(&self) -> f64 {
        let mut t = self.horizon.min(self.completion_at);
        let mut ready = 0;
        for (i, a) in self.arms.iter().enumerate() {
            if self.eligible(i) {
                ready += 1;
            } else {
                t = t.min(self.now - a.t);
            }
        }
        if self.ticks && ready >= 2 {
            t = t.min(next_tick(self.now, self.delta));
        }
        t
    }

    /// Charges arm `i` for its drift since `charged_from[i]`. States move at
    /// unit rate between drops, so the cost is a difference of `∫ r`.
    fn charge(&mut self, i: usize) {
        let c = &self.classes[i];
        let (from, to) = (self.charged_from[i], self.arms[i].t);
        self.r_cost[i] += reward_r_integral(&c.cost, c.lambda, to) - reward_r_integral(&c.cost, c.lambda, from);
        self.charged_from[i] = to;
    }

    fn advance(&mut self, t: f64) {
        let dt = t - self.now;
        let lo = self.now.max(self.warmup);
        if self.now < self.warmup && t >= self.warmup {
            for (a, from) in self.arms.iter().zip(&mut self.charged_from) {
                *from = a.t + (self.warmup - self.now);
            }
        }
        for a in &mut self.arms {
            a.t += dt;
        }
        if self.active.is_some() && t > lo {
            self.busy += t - lo;
        }
        self.now = t;
    }

    fn fire_due(&mut self, window: f64) {
        self.events += 1;
        if let Some(i) = self.active {
            if self.completion_at <= self.now + window {
                if self.now >= self.warmup {
                    self.charge(i);
                }
                let gap = self.path.interarrival(i);
                let arm = &mut self.arms[i];
                arm.t -= gap;
                self.charged_from[i] = arm.t;
                arm.drops += 1;
                arm.timer = self.path.service(i);
                self.completion_at = self.now + arm.timer;
            }
        }
    }

    fn decide(&mut self) {
        let mut best: Option<(usize, f64, f64)> = None;
        for i in 0..self.arms.len() {
            if !self.eligible(i) {
                continue;
            }
            let t = self.arms[i].t;
            let v = self.rule.index(i, t.max(0.0));
            let better = match best {
                None => true,
                Some((_, bv, bt)) => v > bv || (v == bv && t > bt),
            };
            if better {
                best = Some((i, v, t));
            }
        }
        let choice = best.map(|b| b.0);
        if choice == self.active {
            return;
        }
        if let Some(s) = self.active {
            self.arms[s].timer = (self.completion_at - self.now).max(0.0);
        }
        self.active = choice;
        self.completion_at = match choice {
            Some(c) => self.now + self.arms[c].timer,
            None => f64::INFINITY,
        };
    }

    fn finish(mut self) -> ReplicationResult {
        if self.now >= self.warmup {
            for i in 0..self.arms.len() {
                self.charge(i);
            }
        }
        let span = self.horizon - self.warmup;
        let drops: u64 = self.arms.iter().map(|a| a.drops).sum();
        ReplicationResult {
            mean_cost: self.r_cost.iter().sum::<f64>() / span,
            class_cost: self.r_cost.iter().map(|c| c / span).collect(),
            arrivals: drops + self.arms.iter().filter(|a| a.t >= 0.0).count() as u64,
            departures: drops,
            in_system: self.arms.iter().filter(|a| a.t >= 0.0).count() as u64,
            preemptions: 0,
            busy_fraction: self.busy / span,
            events: self.events,
            contended_departures: 0,
        }
    }
}

/// Time-average `sum_i r_i(T_i)` of the bandit over all replications.
///
/// `arrivals`, `departures` and `in_system` count drops and nonnegative arms;
/// the bandit does not track individual jobs.
pub fn simulate_rmab(cfg: &SystemConfig, rule: &dyn IndexRule) -> Result<SimResult> {
    cfg.validate()?;
    check_rule(cfg, rule)?;
    let reps = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|r| {
            let mut m = ArmMachine::new(cfg, rule, r);
            m.decide();
            loop {
                let t = m.next_event();
                m.advance(t);
                if t >= m.horizon {
                    break;
                }
                m.fire_due(0.0);
                m.decide();
            }
            m.finish()
        })
        .collect();
    Ok(SimResult::from_replications(rule.name(), reps))
}

/// One recorded (queue, bandit) pair at an event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub time: f64,
    pub class: usize,
    /// Oldest age in the queue (negative: time to next arrival).
    pub queue_age: f64,
    pub arm_state: f64,
    pub completions: u64,
    pub drops: u64,
}

/// First point where the two systems disagree.
#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    pub event: u64,
    pub time: f64,
    pub class: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledTrace {
    pub rows: Vec<TraceRow>,
    pub events: u64,
    pub max_gap: f64,
    pub first_divergence: Option<Divergence>,
    pub queue: ReplicationResult,
    pub rmab: ReplicationResult,
}

impl CoupledTrace {
    pub fn pass(&self) -> bool {
        self.first_divergence.is_none() && self.max_gap <= COUPLING_TOLERANCE
    }
}

/// Runs the queue and the bandit in one loop on copies of the same sample
/// path and compares `A_i` with `T_i` and completions with drops after
/// every event. Stops at the horizon or after `max_events` events.
pub fn coupled_equivalence(
    cfg: &SystemConfig,
    rule: &dyn IndexRule,
    replication: u64,
    max_events: u64,
    keep_rows: bool,
) -> Result<CoupledTrace> {
    cfg.validate()?;
    check_rule(cfg, rule)?;
    let k = cfg.classes.len();
    let mut q = QueueMachine::new(cfg, Decider::Rule(rule), WithinClass::Fcfs, replication);
    let mut b = ArmMachine::new(cfg, rule, replication);
    q.decide()?;
    b.decide();
    let mut rows = Vec::new();
    let mut max_gap: f64 = 0.0;
    let mut first: Option<Divergence> = None;
    let mut events = 0u64;
    loop {
        let t = q.next_event().min(b.next_event());
        q.advance(t);
        b.advance(t);
        if t >= cfg.horizon || events >= max_events {
            break;
        }
        events += 1;
        q.fire_due(COALESCE_WINDOW);
        b.fire_due(COALESCE_WINDOW);
        q.decide()?;
        b.decide();
        q.check_invariants()?;
        for i in 0..k {
            let row = TraceRow {
                time: t,
                class: i,
                queue_age: q.oldest_age(i),
                arm_state: b.arms[i].t,
                completions: q.departures_of(i),
                drops: b.arms[i].drops,
            };
            let gap = (row.queue_age - row.arm_state).abs();
            max_gap = max_gap.max(gap);
            if first.is_none() {
                let message = if gap > COUPLING_TOLERANCE {
                    Some(format!("|A - T| = {gap:e}"))
                } else if row.completions != row.drops {
                    Some(format!("{} completions vs {} drops", row.completions, row.drops))
                } else if q.serving() != b.active {
                    Some(format!("queue serves {:?}, bandit activates {:?}", q.serving(), b.active))
                } else {
                    None
                };
                if let Some(message) = message {
                    first = Some(Divergence {
                        event: events,
                        time: t,
                        class: i,
                        message,
                    });
                }
            }
            if keep_rows {
                rows.push(row);
            }
        }
    }
    Ok(CoupledTrace {
        rows,
        events,
        max_gap,
        first_divergence: first,
        queue: q.finish(),
        rmab: b.finish(),
    })
}

/// The queue state of one class observed at a fixed time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassSnapshot {
    pub time: f64,
    pub class: usize,
    pub oldest_age: f64,
    pub jobs: usize,
    /// `sum_j c(age_j)` over the class's jobs.
    pub holding_cost: f64,
}

/// Runs the queue and records every class at each of the (sorted) `times`.
pub fn snapshot_queue(
    cfg: &SystemConfig,
    rule: &dyn IndexRule,
    replication: u64,
    times: &[f64],
) -> Result<Vec<ClassSnapshot>> {
    cfg.validate()?;
    check_rule(cfg, rule)?;
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain("snapshot times must be sorted".into()));
    }
    let mut q = QueueMachine::new(cfg, Decider::Rule(rule), WithinClass::Fcfs, replication);
    q.decide()?;
    let mut out = Vec::new();
    let mut pending = times.iter().copied().filter(|&t| t < cfg.horizon).peekable();
    loop {
        let te = q.next_event();
        if let Some(&ts) = pending.peek() {
            if ts < te {
                q.advance(ts);
                for i in 0..cfg.classes.len() {
                    out.push(ClassSnapshot {
                        time: ts,
                        class: i,
                        oldest_age: q.oldest_age(i),
                        jobs: q.queue_len(i),
                        holding_cost: q.instantaneous_cost(i),
                    });
                }
                pending.next();
                continue;
            }
        }
        q.advance(te);
        if te >= cfg.horizon {
            break;
        }
        q.fire_due(0.0);
        q.decide()?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::CostFunction;
    use crate::policy::{Fcfs, Whittle};

    #[test]
    fn arms_without_arrivals_never_cost() {
        let c = ClassConfig::new(0.0, 1.0, CostFunction::constant(1.0).unwrap()).unwrap();
        let mut cfg = SystemConfig::new(vec![c.clone(), c], 50.0);
        cfg.replications = 2;
        let r = simulate_rmab(&cfg, &Fcfs::new(2)).unwrap();
        assert_eq!(r.mean_cost, 0.0);
    }

    #[test]
    fn small_coupled_run_passes() {
        let cls = vec![
            ClassConfig::new(0.5, 3.0, CostFunction::deadline(5.0, 2.0).unwrap()).unwrap(),
            ClassConfig::new(0.3, 1.0, CostFunction::constant(1.0).unwrap()).unwrap(),
        ];
        let cfg = SystemConfig::new(cls, 200.0);
        let w = Whittle::new(&cfg.classes).unwrap();
        let tr = coupled_equivalence(&cfg, &w, 0, u64::MAX, true).unwrap();
        assert!(tr.pass(), "{:?} gap {}", tr.first_divergence, tr.max_gap);
        assert!(tr.events > 100);
        assert_eq!(tr.rows.len() as u64, 2 * tr.events);
    }
}
