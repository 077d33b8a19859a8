//! Streaming hooks into a running simulation, so experiments can summarize
//! paths without storing them.

use serde::Serialize;

use super::path::FlowEvent;

/// Receives the evolution of one path. All methods default to no-ops.
pub trait Observer {
    fn on_start(&mut self, _counts: &[u64]) {}
    /// Called after `event` has been applied; `counts` is the new state.
    fn on_event(&mut self, _event: &FlowEvent, _counts: &[u64]) {}
    fn on_noop(&mut self) {}
    /// Called once with the state at the horizon (or at extinction).
    fn on_finish(&mut self, _horizon: f64, _counts: &[u64]) {}
}

impl Observer for () {}

impl<A: Observer, B: Observer> Observer for (A, B) {
    fn on_start(&mut self, counts: &[u64]) {
        self.0.on_start(counts);
        self.1.on_start(counts);
    }
    fn on_event(&mut self, event: &FlowEvent, counts: &[u64]) {
        self.0.on_event(event, counts);
        self.1.on_event(event, counts);
    }
    fn on_noop(&mut self) {
        self.0.on_noop();
        self.1.on_noop();
    }
    fn on_finish(&mut self, horizon: f64, counts: &[u64]) {
        self.0.on_finish(horizon, counts);
        self.1.on_finish(horizon, counts);
    }
}

/// What every run reports regardless of observers.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub terminal: Vec<u64>,
    pub events: u64,
    pub no_ops: u64,
    /// Time at which the top level hit zero, if it did before the horizon.
    pub extinction_time: Option<f64>,
}

/// Stores every accepted event.
#[derive(Clone, Debug, Default)]
pub struct Recorder {
    pub events: Vec<FlowEvent>,
}

impl Observer for Recorder {
    fn on_event(&mut self, event: &FlowEvent, _counts: &[u64]) {
        self.events.push(*event);
    }
}

/// Records the counts at fixed times (right-continuous: an event at exactly
/// a snapshot time is included), together with the running supremum
/// `sup_{s <= t} X_s` of every level.
#[derive(Clone, Debug)]
pub struct Snapshots {
    times: Vec<f64>,
    last: Vec<u64>,
    sup: Vec<u64>,
    pub values: Vec<Vec<u64>>,
    pub sups: Vec<Vec<u64>>,
}

impl Snapshots {
    /// `times` must be sorted ascending.
    pub fn new(times: Vec<f64>) -> Self {
        debug_assert!(times.windows(2).all(|w| w[0] <= w[1]));
        Snapshots {
            values: Vec::with_capacity(times.len()),
            sups: Vec::with_capacity(times.len()),
            times,
            last: Vec::new(),
            sup: Vec::new(),
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    fn flush_before(&mut self, t: f64) {
        while self.values.len() < self.times.len() && self.times[self.values.len()] < t {
            self.values.push(self.last.clone());
            self.sups.push(self.sup.clone());
        }
    }
}

impl Observer for Snapshots {
    fn on_start(&mut self, counts: &[u64]) {
        self.last = counts.to_vec();
        self.sup = counts.to_vec();
    }
    fn on_event(&mut self, event: &FlowEvent, counts: &[u64]) {
        self.flush_before(event.time);
        self.last.copy_from_slice(counts);
        for (s, &c) in self.sup.iter_mut().zip(counts) {
            *s = (*s).max(c);
        }
    }
    fn on_finish(&mut self, _horizon: f64, counts: &[u64]) {
        self.last.copy_from_slice(counts);
        self.flush_before(f64::INFINITY);
    }
}

/// Running supremum of every level and of every adjacent-level gap.
#[derive(Clone, Debug, Default)]
pub struct SupTracker {
    pub sup: Vec<u64>,
    /// `sup_s [X_s(q_{i+1}) - X_s(q_i)]`.
    pub sup_gap: Vec<u64>,
}

impl SupTracker {
    fn update(&mut self, counts: &[u64]) {
        for (s, &c) in self.sup.iter_mut().zip(counts) {
            *s = (*s).max(c);
        }
        for (g, w) in self.sup_gap.iter_mut().zip(counts.windows(2)) {
            *g = (*g).max(w[1] - w[0]);
        }
    }
}

impl Observer for SupTracker {
    fn on_start(&mut self, counts: &[u64]) {
        self.sup = vec![0; counts.len()];
        self.sup_gap = vec![0; counts.len().saturating_sub(1)];
        self.update(counts);
    }
    fn on_event(&mut self, _event: &FlowEvent, counts: &[u64]) {
        self.update(counts);
    }
}
