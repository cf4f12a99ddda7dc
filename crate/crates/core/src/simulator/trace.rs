//! Event log of a simulation run and the occupancy replay check.

use serde::{Deserialize, Serialize};

use super::{EmissionPolicy, Failure, Strategy};
use crate::scheduler::ScheduleMode;

/// Identity of a broadcast message: the emitting agent and its sequence number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MessageId {
    pub origin: usize,
    pub seq: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Meeting,
    EnterRegion,
    ExitRegion,
    Switch,
    Failure,
    Emit,
    Deliver,
    TourComplete,
    WorkArea,
}

/// One logged event.
///
/// Participants by kind:
/// - meeting, enter/exit region: `agents = [x, y]` on `trajectories = [a, b]`
/// - switch: `agents = [x]`, `trajectories = [from, to]`
/// - failure, tour-complete, emit: `agents = [x]`, `trajectories = [current]`
/// - deliver: `agents = [receiver, sender]`
/// - work-area: `agents = [x]`, `trajectories` = the new work area
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub time: f64,
    pub kind: EventKind,
    pub agents: Vec<usize>,
    #[serde(default)]
    pub trajectories: Vec<usize>,
    /// Link location (angle or arc length) on the first listed trajectory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<MessageId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub horizon: f64,
    pub period: f64,
    pub mode: ScheduleMode,
    pub trajectories: usize,
    /// Starting trajectory of each agent.
    pub initial: Vec<usize>,
    pub seed: u64,
    pub strategy: Strategy,
    pub emission: EmissionPolicy,
    pub failures: Vec<Failure>,
}

impl TraceHeader {
    pub fn agent_count(&self) -> usize {
        self.initial.len()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TraceFooter {
    /// Trajectory of each agent at the horizon (`None` once failed).
    pub final_assignment: Vec<Option<usize>>,
    /// Agents shown to never meet anyone again: the occupancy state at a period
    /// boundary repeated an earlier one after the last failure, and they had no
    /// meeting in between.
    pub proven_starving: Vec<usize>,
    /// `[first, second]` times of the repeated state, when one was found.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeat_window: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub header: TraceHeader,
    pub events: Vec<TraceEvent>,
    pub footer: TraceFooter,
}

impl Trace {
    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &TraceEvent> + '_ {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    /// Agents alive at the horizon.
    pub fn survivors(&self) -> Vec<usize> {
        let mut alive = vec![true; self.header.agent_count()];
        for e in self.events_of(EventKind::Failure) {
            if let Some(&a) = e.agents.first() {
                if a < alive.len() {
                    alive[a] = false;
                }
            }
        }
        (0..alive.len()).filter(|&a| alive[a]).collect()
    }
}

/// Replay the trace and confirm that no trajectory ever holds two agents and
/// that every switch, failure and meeting is consistent with the replayed
/// positions. Event times must be nondecreasing.
pub fn occupancy_check(trace: &Trace) -> bool {
    let n = trace.header.trajectories;
    let mut occupant: Vec<Option<usize>> = vec![None; n];
    let mut slot: Vec<Option<usize>> = Vec::with_capacity(trace.header.initial.len());
    for (agent, &c) in trace.header.initial.iter().enumerate() {
        if c >= n || occupant[c].is_some() {
            return false;
        }
        occupant[c] = Some(agent);
        slot.push(Some(c));
    }
    let on = |slot: &[Option<usize>], a: usize, c: usize| slot.get(a).copied().flatten() == Some(c);
    let mut last = f64::NEG_INFINITY;
    for e in &trace.events {
        if e.time < last {
            return false;
        }
        last = e.time;
        match e.kind {
            EventKind::Switch => {
                let (Some(&a), [from, to]) = (e.agents.first(), e.trajectories.as_slice()) else {
                    return false;
                };
                if *to >= n || !on(&slot, a, *from) || occupant[*to].is_some() {
                    return false;
                }
                occupant[*from] = None;
                occupant[*to] = Some(a);
                slot[a] = Some(*to);
            }
            EventKind::Failure => {
                let (Some(&a), Some(&c)) = (e.agents.first(), e.trajectories.first()) else {
                    return false;
                };
                if !on(&slot, a, c) {
                    return false;
                }
                occupant[c] = None;
                slot[a] = None;
            }
            EventKind::Meeting => {
                let ([x, y], [a, b]) = (e.agents.as_slice(), e.trajectories.as_slice()) else {
                    return false;
                };
                if !on(&slot, *x, *a) || !on(&slot, *y, *b) {
                    return false;
                }
            }
            _ => {}
        }
    }
    true
}
