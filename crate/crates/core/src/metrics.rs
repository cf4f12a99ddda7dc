//! Evaluation measures computed from traces: broadcast time, abandoned time,
//! starvation time and completed tours, plus seed aggregation and tables.
//!
//! Conventions:
//! - Broadcast time averages messages that reached every survivor (agents
//!   alive at the horizon). It is infinite when a survivor's message emitted
//!   more than one censoring window `W = trajectories * T` before the horizon
//!   still misses a survivor. Later incomplete messages are censored.
//! - An agent is potentially starving when its last meeting gap reaches `W`.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::simulator::{EventKind, MessageId, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BroadcastTime {
    /// Mean over fully delivered messages; `None` when infinite.
    pub average: Option<f64>,
    pub infinite: bool,
    pub delivered: usize,
    pub censored: usize,
}

impl BroadcastTime {
    pub fn value(&self) -> f64 {
        self.average.unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Starvation {
    pub max_gap: f64,
    /// Longest meeting gap of each survivor, as `(agent, gap)`.
    pub per_agent: Vec<(usize, f64)>,
    pub potentially_starving: Vec<usize>,
    pub proven_starving: Vec<usize>,
}

impl Starvation {
    pub fn starving(&self) -> bool {
        !self.potentially_starving.is_empty() || !self.proven_starving.is_empty()
    }
}

/// Censoring window of a trace.
pub fn censoring_window(trace: &Trace) -> f64 {
    trace.header.trajectories as f64 * trace.header.period
}

pub fn broadcast_time(trace: &Trace) -> BroadcastTime {
    let survivors = trace.survivors();
    let horizon = trace.header.horizon;
    let window = censoring_window(trace);
    let mut is_survivor = vec![false; trace.header.agent_count()];
    for &a in &survivors {
        is_survivor[a] = true;
    }
    // (emit time, latest delivery to a survivor, survivors reached)
    let mut progress: HashMap<MessageId, (f64, f64, usize)> = HashMap::new();
    let mut order = Vec::new();
    for e in &trace.events {
        let Some(id) = e.message else { continue };
        match e.kind {
            EventKind::Emit => {
                let reached = usize::from(is_survivor[id.origin]);
                progress.insert(id, (e.time, e.time, reached));
                order.push(id);
            }
            EventKind::Deliver => {
                if let (Some(&receiver), Some(p)) = (e.agents.first(), progress.get_mut(&id)) {
                    if is_survivor[receiver] {
                        p.1 = p.1.max(e.time);
                        p.2 += 1;
                    }
                }
            }
            _ => {}
        }
    }
    let mut sum = 0.0;
    let mut delivered = 0;
    let mut censored = 0;
    let mut infinite = false;
    for id in order {
        let (emit, last, reached) = progress[&id];
        if reached == survivors.len() {
            sum += last - emit;
            delivered += 1;
        } else if is_survivor[id.origin] && emit < horizon - window {
            infinite = true;
        } else {
            censored += 1;
        }
    }
    let average = if infinite {
        None
    } else if delivered == 0 {
        Some(0.0)
    } else {
        Some(sum / delivered as f64)
    };
    BroadcastTime {
        average,
        infinite,
        delivered,
        censored,
    }
}

/// Longest interval any trajectory spends without an agent.
pub fn abandoned_time(trace: &Trace) -> f64 {
    let n = trace.header.trajectories;
    let mut count = vec![0usize; n];
    for &c in &trace.header.initial {
        count[c] += 1;
    }
    let mut empty_since: Vec<Option<f64>> =
        count.iter().map(|&k| (k == 0).then_some(0.0)).collect();
    let mut worst: f64 = 0.0;
    let leave = |c: usize, t: f64, count: &mut Vec<usize>, empty_since: &mut Vec<Option<f64>>| {
        count[c] -= 1;
        if count[c] == 0 {
            empty_since[c] = Some(t);
        }
    };
    for e in &trace.events {
        match e.kind {
            EventKind::Failure => {
                if let Some(&c) = e.trajectories.first() {
                    leave(c, e.time, &mut count, &mut empty_since);
                }
            }
            EventKind::Switch => {
                if let [from, to] = e.trajectories[..] {
                    leave(from, e.time, &mut count, &mut empty_since);
                    if let Some(since) = empty_since[to].take() {
                        worst = worst.max(e.time - since);
                    }
                    count[to] += 1;
                }
            }
            _ => {}
        }
    }
    for since in empty_since.into_iter().flatten() {
        worst = worst.max(trace.header.horizon - since);
    }
    worst
}

pub fn starvation_time(trace: &Trace) -> Starvation {
    let survivors = trace.survivors();
    let horizon = trace.header.horizon;
    let window = censoring_window(trace);
    let mut last = vec![0.0; trace.header.agent_count()];
    let mut gap = vec![0.0_f64; trace.header.agent_count()];
    for e in trace.events_of(EventKind::Meeting) {
        for &a in &e.agents {
            gap[a] = gap[a].max(e.time - last[a]);
            last[a] = e.time;
        }
    }
    let mut per_agent = Vec::with_capacity(survivors.len());
    let mut potentially_starving = Vec::new();
    let mut max_gap: f64 = 0.0;
    for &a in &survivors {
        let tail = horizon - last[a];
        let g = gap[a].max(tail);
        if survivors.len() > 1 && tail >= window {
            potentially_starving.push(a);
        }
        per_agent.push((a, g));
        max_gap = max_gap.max(g);
    }
    Starvation {
        max_gap,
        per_agent,
        potentially_starving,
        proven_starving: trace.footer.proven_starving.clone(),
    }
}

/// Completed tours per trajectory, averaged over trajectories.
pub fn completed_tours(trace: &Trace) -> f64 {
    let n = trace.header.trajectories;
    if n == 0 {
        return 0.0;
    }
    trace.events_of(EventKind::TourComplete).count() as f64 / n as f64
}

/// Completed tours of every trajectory.
pub fn tours_per_trajectory(trace: &Trace) -> Vec<usize> {
    let mut out = vec![0; trace.header.trajectories];
    for e in trace.events_of(EventKind::TourComplete) {
        if let Some(&c) = e.trajectories.first() {
            out[c] += 1;
        }
    }
    out
}

/// Measures of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    pub broadcast: BroadcastTime,
    pub max_abandoned: f64,
    pub starvation: Starvation,
    pub avg_completed_tours: f64,
    pub switches: usize,
    pub meetings: usize,
}

impl RunMetrics {
    pub fn of(trace: &Trace) -> Self {
        Self {
            seed: trace.header.seed,
            broadcast: broadcast_time(trace),
            max_abandoned: abandoned_time(trace),
            starvation: starvation_time(trace),
            avg_completed_tours: completed_tours(trace),
            switches: trace.events_of(EventKind::Switch).count(),
            meetings: trace.events_of(EventKind::Meeting).count(),
        }
    }
}

/// Seed-averaged measures. Every field is the arithmetic mean of the per-run
/// value; the broadcast time is infinite if it is infinite in any run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub runs: usize,
    pub avg_broadcast_time: Option<f64>,
    pub broadcast_infinite: bool,
    pub max_abandoned_time: f64,
    pub max_starvation_time: f64,
    pub avg_completed_tours: f64,
    /// Runs with a potentially or provably starving agent.
    pub starving_runs: usize,
    pub per_seed: Vec<RunMetrics>,
}

impl MetricsReport {
    pub fn from_runs(per_seed: Vec<RunMetrics>) -> Self {
        let runs = per_seed.len();
        let mean = |f: &dyn Fn(&RunMetrics) -> f64| {
            if runs == 0 {
                0.0
            } else {
                per_seed.iter().map(f).sum::<f64>() / runs as f64
            }
        };
        let broadcast_infinite = per_seed.iter().any(|r| r.broadcast.infinite);
        let avg_broadcast_time =
            (!broadcast_infinite).then(|| mean(&|r| r.broadcast.average.unwrap_or(0.0)));
        Self {
            runs,
            avg_broadcast_time,
            broadcast_infinite,
            max_abandoned_time: mean(&|r| r.max_abandoned),
            max_starvation_time: mean(&|r| r.starvation.max_gap),
            avg_completed_tours: mean(&|r| r.avg_completed_tours),
            starving_runs: per_seed.iter().filter(|r| r.starvation.starving()).count(),
            per_seed,
        }
    }

    pub fn from_traces<'a>(traces: impl IntoIterator<Item = &'a Trace>) -> Self {
        Self::from_runs(traces.into_iter().map(RunMetrics::of).collect())
    }
}

fn fmt_bt(bt: Option<f64>) -> String {
    bt.map_or_else(|| "inf".to_string(), |v| format!("{v:.2}"))
}

/// Plain-text table with one row per labelled report.
pub fn render_table(rows: &[(String, MetricsReport)]) -> String {
    let width = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max(8);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$} | {:>10} | {:>8} | {:>10} | {:>10}",
        "", "Max. ST(s)", "Avg. CT", "Max. AT(s)", "Avg. BT(s)"
    );
    let _ = writeln!(out, "{}", "-".repeat(width + 52));
    for (label, r) in rows {
        let _ = writeln!(
            out,
            "{:<width$} | {:>10.2} | {:>8.2} | {:>10.2} | {:>10}",
            label,
            r.max_starvation_time,
            r.avg_completed_tours,
            r.max_abandoned_time,
            fmt_bt(r.avg_broadcast_time)
        );
    }
    out
}
