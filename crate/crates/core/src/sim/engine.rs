use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::policy::{ClassConfig, IndexRule};

use super::path::SamplePath;
use super::{ReplicationResult, SystemConfig, WithinClass};

/// Who picks the class to serve at each decision epoch.
pub(crate) enum Decider<'a> {
    Rule(&'a dyn IndexRule),
    /// Replays a recorded class-level schedule.
    Replay { schedule: &'a [(f64, Option<usize>)], cursor: usize },
}

pub(crate) struct QueueMachine<'a> {
    classes: &'a [ClassConfig],
    decider: Decider<'a>,
    within: WithinClass,
    path: SamplePath,
    delta: f64,
    warmup: f64,
    horizon: f64,
    ticks: bool,

    now: f64,
    queues: Vec<VecDeque<f64>>,
    next_arrival: Vec<f64>,
    /// Remaining class timer for classes not in service.
    timer: Vec<f64>,
    serving: Option<usize>,
    completion_at: f64,

    record: Option<Vec<(f64, Option<usize>)>>,
    class_cost: Vec<f64>,
    class_departures: Vec<u64>,
    arrivals: u64,
    departures: u64,
    preemptions: u64,
    contended: u64,
    events: u64,
    busy: f64,
}

impl<'a> QueueMachine<'a> {
    pub(crate) fn new(
        cfg: &'a SystemConfig,
        decider: Decider<'a>,
        within: WithinClass,
        replication: u64,
    ) -> Self {
        let classes = &cfg.classes[..];
        let mut path = SamplePath::new(classes, cfg.seed, replication);
        let k = classes.len();
        let next_arrival = (0..k).map(|i| path.interarrival(i)).collect();
        let timer = (0..k).map(|i| path.service(i)).collect();
        let ticks = match &decider {
            Decider::Rule(r) => r.needs_ticks(),
            Decider::Replay { .. } => true,
        };
        Self {
            classes,
            decider,
            within,
            path,
            delta: cfg.decision_quantum,
            warmup: cfg.warmup,
            horizon: cfg.horizon,
            ticks,
            now: 0.0,
            queues: vec![VecDeque::new(); k],
            next_arrival,
            timer,
            serving: None,
            completion_at: f64::INFINITY,
            record: None,
            class_cost: vec![0.0; k],
            class_departures: vec![0; k],
            arrivals: 0,
            departures: 0,
            preemptions: 0,
            contended: 0,
            events: 0,
            busy: 0.0,
        }
    }

    pub(crate) fn recording(mut self) -> Self {
        self.record = Some(Vec::new());
        self
    }

    pub(crate) fn serving(&self) -> Option<usize> {
        self.serving
    }

    pub(crate) fn departures_of(&self, class: usize) -> u64 {
        self.class_departures[class]
    }

    /// Current total instantaneous holding cost of class `i`.
    pub(crate) fn instantaneous_cost(&self, i: usize) -> f64 {
        self.queues[i].iter().map(|&a| self.classes[i].cost.value(self.now - a)).sum()
    }

    /// Age of the oldest class-`i` job, or minus the time until the next
    /// class-`i` arrival when the class is empty.
    pub(crate) fn oldest_age(&self, i: usize) -> f64 {
        match self.queues[i].front() {
            Some(&a) => self.now - a,
            None => self.now - self.next_arrival[i],
        }
    }

    pub(crate) fn queue_len(&self, i: usize) -> usize {
        self.queues[i].len()
    }

    fn nonempty(&self) -> usize {
        self.queues.iter().filter(|q| !q.is_empty()).count()
    }

    fn candidate(&self, i: usize) -> Option<f64> {
        match self.within {
            WithinClass::Fcfs => self.queues[i].front().copied(),
            WithinClass::Lcfs => self.queues[i].back().copied(),
        }
    }

    /// Time of the next event of this machine (arrival, completion, or
    /// decision tick), capped at the horizon.
    pub(crate) fn next_event(&self) -> f64 {
        let mut t = self.horizon.min(self.completion_at);
        for &a in &self.next_arrival {
            t = t.min(a);
        }
        if self.ticks && self.nonempty() >= 2 {
            t = t.min(next_tick(self.now, self.delta));
        }
        t
    }

    pub(crate) fn advance(&mut self, t: f64) {
        if self.serving.is_some() {
            let lo = self.now.max(self.warmup);
            if t > lo {
                self.busy += t - lo;
            }
        }
        self.now = t;
    }

    /// Processes arrivals and the completion due at the current time, with
    /// `window` slack for events proposed by a coupled machine.
    pub(crate) fn fire_due(&mut self, window: f64) {
        self.events += 1;
        for i in 0..self.queues.len() {
            while self.next_arrival[i] <= self.now + window {
                let a = self.next_arrival[i];
                self.queues[i].push_back(a);
                self.arrivals += 1;
                self.next_arrival[i] = a + self.path.interarrival(i);
            }
        }
        if let Some(s) = self.serving {
            if self.completion_at <= self.now + window {
                let q = &mut self.queues[s];
                if q.len() >= 2 {
                    self.contended += 1;
                }
                let a = match self.within {
                    WithinClass::Fcfs => q.pop_front(),
                    WithinClass::Lcfs => q.pop_back(),
                }
                .expect("served class is nonempty");
                self.class_cost[s] += job_cost(&self.classes[s], a, self.now, self.warmup);
                self.departures += 1;
                self.class_departures[s] += 1;
                self.timer[s] = self.path.service(s);
                self.completion_at = self.now + self.timer[s];
            }
        }
    }

    pub(crate) fn decide(&mut self) -> Result<()> {
        let choice = match &mut self.decider {
            Decider::Rule(rule) => {
                let mut best: Option<(usize, f64, f64)> = None;
                for i in 0..self.queues.len() {
                    let Some(arr) = (match self.within {
                        WithinClass::Fcfs => self.queues[i].front().copied(),
                        WithinClass::Lcfs => self.queues[i].back().copied(),
                    }) else {
                        continue;
                    };
                    let v = rule.index(i, (self.now - arr).max(0.0));
                    let better = match best {
                        None => true,
                        Some((_, bv, ba)) => v > bv || (v == bv && arr < ba),
                    };
                    if better {
                        best = Some((i, v, arr));
                    }
                }
                best.map(|b| b.0)
            }
            Decider::Replay { schedule, cursor } => {
                while *cursor + 1 < schedule.len() && schedule[*cursor + 1].0 <= self.now {
                    *cursor += 1;
                }
                let c = schedule.get(*cursor).and_then(|e| e.1);
                if let Some(c) = c {
                    if self.queues[c].is_empty() {
                        return Err(Error::Invariant {
                            time: self.now,
                            message: format!("replayed schedule serves empty class {c}"),
                        });
                    }
                }
                c
            }
        };
        self.switch_to(choice);
        if let Some(rec) = &mut self.record {
            rec.push((self.now, choice));
        }
        Ok(())
    }

    fn switch_to(&mut self, choice: Option<usize>) {
        if choice == self.serving {
            return;
        }
        if let Some(s) = self.serving {
            self.timer[s] = (self.completion_at - self.now).max(0.0);
            if !self.queues[s].is_empty() {
                self.preemptions += 1;
            }
        }
        self.serving = choice;
        self.completion_at = match choice {
            Some(c) => self.now + self.timer[c],
            None => f64::INFINITY,
        };
    }

    pub(crate) fn check_invariants(&self) -> Result<()> {
        let in_system: usize = self.queues.iter().map(VecDeque::len).sum();
        if self.arrivals != self.departures + in_system as u64 {
            return Err(self.violation("flow balance broken"));
        }
        match self.serving {
            None if in_system > 0 => Err(self.violation("server idle with jobs present")),
            Some(s) if self.queues[s].is_empty() => Err(self.violation("serving an empty class")),
            Some(s) if self.within == WithinClass::Fcfs && self.candidate(s) != self.queues[s].front().copied() => {
                Err(self.violation("served job is not the oldest of its class"))
            }
            _ => Ok(()),
        }
    }

    fn violation(&self, msg: &str) -> Error {
        Error::Invariant {
            time: self.now,
            message: msg.to_string(),
        }
    }

    /// Runs to the horizon.
    pub(crate) fn run(mut self) -> Result<(ReplicationResult, Option<Vec<(f64, Option<usize>)>>)> {
        self.decide()?;
        loop {
            let t = self.next_event();
            self.advance(t);
            if t >= self.horizon {
                break;
            }
            self.fire_due(0.0);
            self.decide()?;
            self.check_invariants()?;
        }
        let rec = self.record.take();
        Ok((self.finish(), rec))
    }

    pub(crate) fn finish(mut self) -> ReplicationResult {
        for (i, q) in self.queues.iter().enumerate() {
            for &a in q {
                self.class_cost[i] += job_cost(&self.classes[i], a, self.now, self.warmup);
            }
        }
        let span = self.horizon - self.warmup;
        let total: f64 = self.class_cost.iter().sum();
        ReplicationResult {
            mean_cost: total / span,
            class_cost: self.class_cost.iter().map(|c| c / span).collect(),
            arrivals: self.arrivals,
            departures: self.departures,
            in_system: self.queues.iter().map(|q| q.len() as u64).sum(),
            preemptions: self.preemptions,
            busy_fraction: self.busy / span,
            events: self.events,
            contended_departures: self.contended,
        }
    }
}

pub(crate) fn next_tick(now: f64, delta: f64) -> f64 {
    let k = (now / delta).floor() + 1.0;
    let t = k * delta;
    if t > now {
        t
    } else {
        (k + 1.0) * delta
    }
}

/// Holding cost of a job arriving at `a`, accrued between the warmup
/// boundary and `end`.
fn job_cost(class: &ClassConfig, a: f64, end: f64, warmup: f64) -> f64 {
    if end <= warmup {
        return 0.0;
    }
    let full = class.cost.accumulated(end - a);
    if a >= warmup {
        full
    } else {
        full - class.cost.accumulated(warmup - a)
    }
}
