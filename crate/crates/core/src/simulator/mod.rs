//! Deterministic simulation of scheduled agents: meetings at shared links,
//! message gossip, failures, trajectory switching and starvation detection.
//!
//! Every agent on trajectory `c` follows the scheduled motion of `c`; after a
//! switch it adopts the target trajectory's phase and direction. The motion
//! of each trajectory is periodic, so all link arrivals recur at fixed
//! offsets modulo the period.

mod trace;

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generator::{Instance, Layout};
use crate::scalar::residue;
use crate::scheduler::{Schedule, ScheduleMode};
use crate::Graph64;

pub use trace::{
    occupancy_check, EventKind, MessageId, Trace, TraceEvent, TraceFooter, TraceHeader,
};

/// Steps per period of the fixed-step engine unless configured otherwise.
pub const DEFAULT_STEPS_PER_PERIOD: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("schedule does not match instance: {0}")]
    Mismatch(String),
}

/// Reaction of an agent that reaches a link whose neighbor trajectory is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Strategy {
    /// Always switch.
    Alw,
    /// Switch with probability `p`.
    Rand { p: f64 },
    /// Switch only across edges of the depth-first-search tree from `root`.
    Dfs { root: usize },
}

impl Strategy {
    /// Whether decisions depend only on the occupancy state.
    pub fn is_deterministic(&self) -> bool {
        match self {
            Strategy::Rand { p } => *p == 0.0 || *p == 1.0,
            _ => true,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Alw => write!(f, "alw"),
            Strategy::Rand { p } => write!(f, "rand:{p}"),
            Strategy::Dfs { root } => write!(f, "dfs:{root}"),
        }
    }
}

impl FromStr for Strategy {
    type Err = SimError;

    /// `alw`, `rand:<p>` or `dfs:<root>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SimError::InvalidConfig(format!("unknown strategy {s:?}"));
        match s.split_once(':') {
            None if s == "alw" => Ok(Strategy::Alw),
            None if s == "rand" => Ok(Strategy::Rand { p: 0.5 }),
            Some(("rand", p)) => {
                let p: f64 = p.parse().map_err(|_| bad())?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(SimError::InvalidConfig(format!(
                        "probability {p} outside [0, 1]"
                    )));
                }
                Ok(Strategy::Rand { p })
            }
            Some(("dfs", root)) => Ok(Strategy::Dfs {
                root: root.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Switch,
    Stay,
}

/// A strategy bound to the switchable edges of one communication graph.
#[derive(Debug, Clone)]
pub struct SwitchPolicy {
    strategy: Strategy,
    tree: BTreeSet<(usize, usize)>,
}

impl SwitchPolicy {
    pub fn new(strategy: Strategy, links: &Graph64) -> Self {
        let tree = match strategy {
            Strategy::Dfs { root } => links
                .dfs_forest(root)
                .into_iter()
                .map(|(a, b)| (a.min(b), a.max(b)))
                .collect(),
            _ => BTreeSet::new(),
        };
        Self { strategy, tree }
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    /// Called when the neighbor across `edge` is absent. `rand` consumes
    /// exactly one draw per decision.
    pub fn decide<R: Rng>(&self, edge: (usize, usize), rng: &mut R) -> Decision {
        let switch = match self.strategy {
            Strategy::Alw => true,
            Strategy::Rand { p } => rng.gen::<f64>() < p,
            Strategy::Dfs { .. } => self
                .tree
                .contains(&(edge.0.min(edge.1), edge.0.max(edge.1))),
        };
        if switch {
            Decision::Switch
        } else {
            Decision::Stay
        }
    }
}

/// When agents originate broadcast messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmissionPolicy {
    /// Once per emission period at a uniformly random phase, drawn per agent
    /// and period from the seeded emission stream.
    #[default]
    RandomPhase,
    /// At the start of every emission period.
    PeriodStart,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Engine {
    /// Exact event queue over closed-form link arrival times.
    EventDriven,
    /// Clock advanced in steps of `dt`; link crossings inside a step are
    /// detected from the trajectories' phases and processed in time order.
    FixedStep { dt: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub agent: usize,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon: f64,
    pub strategy: Strategy,
    pub seed: u64,
    #[serde(default)]
    pub failures: Vec<Failure>,
    #[serde(default)]
    pub emission: EmissionPolicy,
    /// Defaults to the schedule period.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emission_period: Option<f64>,
    /// Meeting tolerance in seconds; defaults to `T / 1000`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Defaults to event-driven for circles and fixed-step `T / 1000` for
    /// general trajectories.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engine: Option<Engine>,
    #[serde(default = "default_true")]
    pub record_regions: bool,
}

fn default_true() -> bool {
    true
}

impl SimConfig {
    pub fn new(horizon: f64, strategy: Strategy, seed: u64) -> Self {
        Self {
            horizon,
            strategy,
            seed,
            failures: Vec::new(),
            emission: EmissionPolicy::default(),
            emission_period: None,
            tolerance: None,
            engine: None,
            record_regions: true,
        }
    }

    pub fn with_failures(mut self, failures: Vec<Failure>) -> Self {
        self.failures = failures;
        self
    }

    fn validate(&self, agents: usize, period: f64) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        match self.strategy {
            Strategy::Rand { p } if !(0.0..=1.0).contains(&p) => {
                return bad(format!("probability {p} outside [0, 1]"));
            }
            Strategy::Dfs { root } if root >= agents => {
                return bad(format!("dfs root {root} out of range"));
            }
            _ => {}
        }
        for f in &self.failures {
            if f.agent >= agents {
                return bad(format!("failure names unknown agent {}", f.agent));
            }
            if !(f.time >= 0.0 && f.time <= self.horizon) {
                return bad(format!("failure time {} outside [0, horizon]", f.time));
            }
        }
        if let Some(p) = self.emission_period {
            if !(p > 0.0 && p.is_finite()) {
                return bad(format!("emission period must be positive, got {p}"));
            }
        }
        if let Some(tol) = self.tolerance {
            if !(tol >= 0.0 && tol < period / 2.0) {
                return bad(format!("tolerance {tol} outside [0, T/2)"));
            }
        }
        if let Some(Engine::FixedStep { dt }) = self.engine {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad(format!("time step must be positive, got {dt}"));
            }
        }
        Ok(())
    }
}

/// Simulate `config.horizon` seconds of the scheduled team.
pub fn run(
    instance: &Instance,
    schedule: &Schedule,
    config: &SimConfig,
) -> Result<Trace, SimError> {
    Ok(Simulation::new(instance, schedule, config)?.run())
}

#[derive(Debug, Clone, Copy)]
enum SourceKind {
    /// Synchronized link: both ends arrive together.
    Edge {
        a: usize,
        b: usize,
    },
    /// One end of a link whose arrivals do not coincide.
    Arrival {
        slot: usize,
        toward: usize,
    },
    Enter {
        a: usize,
        b: usize,
    },
    Exit {
        a: usize,
        b: usize,
    },
}

/// A recurring event at `offset + k T`.
#[derive(Debug, Clone, Copy)]
struct Source {
    offset: f64,
    kind: SourceKind,
    /// Link location on the first trajectory of the source.
    location: f64,
}

#[derive(Debug, Clone, Copy)]
enum Item {
    Failure { agent: usize },
    Tick { k: u64 },
    EmitTick { k: u64 },
    Emit { agent: usize },
    Tour { agent: usize, epoch: u64, k: u64 },
    Source { index: usize, k: u64 },
}

impl Item {
    fn class(&self) -> u8 {
        match self {
            Item::Failure { .. } => 0,
            Item::Tick { .. } => 1,
            Item::EmitTick { .. } => 2,
            Item::Emit { .. } => 3,
            Item::Tour { .. } => 4,
            Item::Source { .. } => 5,
        }
    }
}

struct Pending {
    time: f64,
    class: u8,
    seq: u64,
    item: Item,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    // reversed so that the max-heap pops the earliest event
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.class.cmp(&self.class))
            .then(other.seq.cmp(&self.seq))
    }
}

/// Growable bit set over message indices.
#[derive(Debug, Clone, Default)]
struct Known(Vec<u64>);

impl Known {
    fn insert(&mut self, i: usize) -> bool {
        let (w, b) = (i / 64, i % 64);
        if self.0.len() <= w {
            self.0.resize(w + 1, 0);
        }
        let fresh = self.0[w] & (1 << b) == 0;
        self.0[w] |= 1 << b;
        fresh
    }

    /// Indices in `self` that are missing from `other`, ascending.
    fn missing_from(&self, other: &Known) -> Vec<usize> {
        let mut out = Vec::new();
        for (w, &bits) in self.0.iter().enumerate() {
            let mut diff = bits & !other.0.get(w).copied().unwrap_or(0);
            while diff != 0 {
                let b = diff.trailing_zeros() as usize;
                out.push(w * 64 + b);
                diff &= diff - 1;
            }
        }
        out
    }
}

/// A configured run. Construction validates the inputs; [`Simulation::run`]
/// cannot fail.
pub struct Simulation {
    period: f64,
    mode: ScheduleMode,
    config: SimConfig,
    emission_period: f64,
    engine: Engine,
    n: usize,
    sources: Vec<Source>,
    policy: SwitchPolicy,
    /// Link location of trajectory `v` towards `u`.
    link_location: HashMap<(usize, usize), f64>,
}

impl Simulation {
    pub fn new(
        instance: &Instance,
        schedule: &Schedule,
        config: &SimConfig,
    ) -> Result<Self, SimError> {
        let n = instance.trajectory_count();
        let period = schedule.period;
        if !(period > 0.0 && period.is_finite()) {
            return Err(SimError::Mismatch(format!("bad period {period}")));
        }
        if schedule.agents.len() != n {
            return Err(SimError::Mismatch(format!(
                "schedule has {} agents, instance has {n} trajectories",
                schedule.agents.len()
            )));
        }
        config.validate(n, period)?;
        let full = instance
            .comm_graph()
            .map_err(|e| SimError::Mismatch(e.to_string()))?;
        let keys: BTreeSet<(usize, usize)> = schedule
            .links
            .iter()
            .map(|&(a, b)| (a.min(b), a.max(b)))
            .collect();
        if let Some(k) = keys.iter().find(|&&(a, b)| !full.has_edge(a, b)) {
            return Err(SimError::Mismatch(format!(
                "scheduled link {k:?} is not an edge"
            )));
        }
        let links = full.with_edge_set(&keys);
        let tolerance = config.tolerance.unwrap_or(period / 1000.0);
        let engine = config.engine.unwrap_or(match schedule.mode {
            ScheduleMode::General => Engine::FixedStep {
                dt: period / DEFAULT_STEPS_PER_PERIOD,
            },
            _ => Engine::EventDriven,
        });

        let mut sources = Vec::new();
        let mut link_location = HashMap::new();
        for e in links.edges() {
            link_location.insert((e.a, e.b), e.link_a);
            link_location.insert((e.b, e.a), e.link_b);
            let ta = schedule.link_time(&links, e.a, e.b);
            let tb = schedule.link_time(&links, e.b, e.a);
            let (Some(ta), Some(tb)) = (ta, tb) else {
                return Err(SimError::Mismatch(format!(
                    "no link time for edge {:?}",
                    e.key()
                )));
            };
            if residue(ta - tb, period) <= tolerance {
                sources.push(Source {
                    offset: ta,
                    kind: SourceKind::Edge { a: e.a, b: e.b },
                    location: e.link_a,
                });
                if config.record_regions {
                    let w = region_half_width(instance, schedule, e.a, e.b, tolerance);
                    let wrap = |x: f64| x.rem_euclid(period);
                    sources.push(Source {
                        offset: wrap(ta - w),
                        kind: SourceKind::Enter { a: e.a, b: e.b },
                        location: e.link_a,
                    });
                    sources.push(Source {
                        offset: wrap(ta + w),
                        kind: SourceKind::Exit { a: e.a, b: e.b },
                        location: e.link_a,
                    });
                }
            } else {
                sources.push(Source {
                    offset: ta,
                    kind: SourceKind::Arrival {
                        slot: e.a,
                        toward: e.b,
                    },
                    location: e.link_a,
                });
                sources.push(Source {
                    offset: tb,
                    kind: SourceKind::Arrival {
                        slot: e.b,
                        toward: e.a,
                    },
                    location: e.link_b,
                });
            }
        }
        Ok(Self {
            period,
            mode: schedule.mode,
            emission_period: config.emission_period.unwrap_or(period),
            engine,
            n,
            sources,
            policy: SwitchPolicy::new(config.strategy, &links),
            link_location,
            config: config.clone(),
        })
    }

    pub fn engine(&self) -> Engine {
        self.engine
    }

    pub fn run(&self) -> Trace {
        let mut world = World::new(self);
        match self.engine {
            Engine::EventDriven => {
                for index in 0..self.sources.len() {
                    world.push_source(index, 0);
                }
                world.drain(f64::INFINITY, true);
            }
            Engine::FixedStep { dt } => {
                let horizon = self.config.horizon;
                let mut step: u64 = 0;
                loop {
                    let t0 = step as f64 * dt;
                    if t0 > horizon {
                        break;
                    }
                    let t1 = (step + 1) as f64 * dt;
                    world.detect_crossings(t0, t1);
                    world.drain(t1, false);
                    step += 1;
                }
            }
        }
        world.finish()
    }
}

/// Half the time two neighbors spend within communication range around a
/// meeting. General trajectories use the meeting tolerance.
fn region_half_width(
    instance: &Instance,
    schedule: &Schedule,
    a: usize,
    b: usize,
    tolerance: f64,
) -> f64 {
    let Layout::Circles { circles, range } = &instance.layout else {
        return tolerance;
    };
    let (ca, cb) = (&circles[a], &circles[b]);
    let d = ca.center.dist(&cb.center);
    let s = ca.radius + cb.radius;
    let cos = match schedule.mode {
        ScheduleMode::SameDirection => (d * d + s * s - range * range) / (2.0 * d * s),
        _ => (d - range) / s,
    };
    let omega = std::f64::consts::TAU / schedule.period;
    cos.clamp(-1.0, 1.0).acos() / omega
}

struct World<'a> {
    sim: &'a Simulation,
    queue: BinaryHeap<Pending>,
    seq: u64,
    events: Vec<TraceEvent>,
    occupant: Vec<Option<usize>>,
    slot: Vec<Option<usize>>,
    epoch: Vec<u64>,
    known: Vec<Known>,
    next_seq: Vec<u32>,
    message_ids: Vec<MessageId>,
    entry: Vec<f64>,
    work_area: Vec<BTreeSet<usize>>,
    meetings: Vec<u64>,
    emit_rng: ChaCha8Rng,
    strategy_rng: ChaCha8Rng,
    last_failure: f64,
    snapshots: HashMap<Vec<Option<usize>>, (f64, Vec<u64>)>,
    footer: TraceFooter,
}

impl<'a> World<'a> {
    fn new(sim: &'a Simulation) -> Self {
        let n = sim.n;
        let mut emit_rng = ChaCha8Rng::seed_from_u64(sim.config.seed);
        emit_rng.set_stream(0);
        let mut strategy_rng = ChaCha8Rng::seed_from_u64(sim.config.seed);
        strategy_rng.set_stream(1);
        let mut world = Self {
            sim,
            queue: BinaryHeap::new(),
            seq: 0,
            events: Vec::new(),
            occupant: (0..n).map(Some).collect(),
            slot: (0..n).map(Some).collect(),
            epoch: vec![0; n],
            known: vec![Known::default(); n],
            next_seq: vec![0; n],
            message_ids: Vec::new(),
            entry: vec![0.0; n],
            work_area: (0..n).map(|c| BTreeSet::from([c])).collect(),
            meetings: vec![0; n],
            emit_rng,
            strategy_rng,
            last_failure: sim
                .config
                .failures
                .iter()
                .map(|f| f.time)
                .fold(0.0, f64::max),
            snapshots: HashMap::new(),
            footer: TraceFooter::default(),
        };
        for f in &sim.config.failures {
            world.push(f.time, Item::Failure { agent: f.agent });
        }
        world.push(0.0, Item::Tick { k: 0 });
        world.push(0.0, Item::EmitTick { k: 0 });
        for agent in 0..n {
            world.push(
                sim.period,
                Item::Tour {
                    agent,
                    epoch: 0,
                    k: 1,
                },
            );
        }
        world
    }

    fn push(&mut self, time: f64, item: Item) {
        if time > self.sim.config.horizon {
            return;
        }
        self.seq += 1;
        self.queue.push(Pending {
            time,
            class: item.class(),
            seq: self.seq,
            item,
        });
    }

    fn source_time(&self, index: usize, k: u64) -> f64 {
        self.sim.sources[index].offset + k as f64 * self.sim.period
    }

    fn push_source(&mut self, index: usize, k: u64) {
        let t = self.source_time(index, k);
        self.push(t, Item::Source { index, k });
    }

    /// Queue every source occurrence in `[t0, t1)`.
    fn detect_crossings(&mut self, t0: f64, t1: f64) {
        let period = self.sim.period;
        for index in 0..self.sim.sources.len() {
            let offset = self.sim.sources[index].offset;
            let first = ((t0 - offset) / period).ceil().max(0.0) as u64;
            let mut k = first;
            // guard against rounding in the ceiling
            if k > 0 && self.source_time(index, k - 1) >= t0 {
                k -= 1;
            }
            while self.source_time(index, k) < t1 {
                if self.source_time(index, k) >= t0 {
                    self.push_source(index, k);
                }
                k += 1;
            }
        }
    }

    /// Process queued events earlier than `until`. Source events reschedule
    /// themselves when `reschedule` is set.
    fn drain(&mut self, until: f64, reschedule: bool) {
        while let Some(top) = self.queue.peek() {
            if top.time >= until {
                break;
            }
            let Pending { time, item, .. } = self.queue.pop().expect("peeked");
            self.handle(time, item, reschedule);
        }
    }

    fn record(
        &mut self,
        time: f64,
        kind: EventKind,
        agents: Vec<usize>,
        trajectories: Vec<usize>,
    ) -> &mut TraceEvent {
        self.events.push(TraceEvent {
            time,
            kind,
            agents,
            trajectories,
            location: None,
            message: None,
        });
        self.events.last_mut().expect("just pushed")
    }

    fn handle(&mut self, time: f64, item: Item, reschedule: bool) {
        match item {
            Item::Failure { agent } => self.fail(time, agent),
            Item::Tick { k } => {
                self.tick(time);
                self.push((k + 1) as f64 * self.sim.period, Item::Tick { k: k + 1 });
            }
            Item::EmitTick { k } => {
                let alive: Vec<usize> = (0..self.sim.n)
                    .filter(|&a| self.slot[a].is_some())
                    .collect();
                let p = self.sim.emission_period;
                for agent in alive {
                    match self.sim.config.emission {
                        EmissionPolicy::PeriodStart => self.emit(time, agent),
                        EmissionPolicy::RandomPhase => {
                            let phase = self.emit_rng.gen_range(0.0..p);
                            self.push(time + phase, Item::Emit { agent });
                        }
                    }
                }
                self.push((k + 1) as f64 * p, Item::EmitTick { k: k + 1 });
            }
            Item::Emit { agent } => self.emit(time, agent),
            Item::Tour { agent, epoch, k } => {
                if self.epoch[agent] == epoch {
                    if let Some(c) = self.slot[agent] {
                        self.record(time, EventKind::TourComplete, vec![agent], vec![c]);
                        let next = self.tour_time(agent, k + 1);
                        self.push(
                            next,
                            Item::Tour {
                                agent,
                                epoch,
                                k: k + 1,
                            },
                        );
                    }
                }
            }
            Item::Source { index, k } => {
                let source = self.sim.sources[index];
                self.source(time, source);
                if reschedule {
                    self.push_source(index, k + 1);
                }
            }
        }
    }

    /// Tour `k` of an agent completes `k` periods after it entered its
    /// current trajectory.
    fn tour_time(&self, agent: usize, k: u64) -> f64 {
        self.entry[agent] + k as f64 * self.sim.period
    }

    fn fail(&mut self, time: f64, agent: usize) {
        if let Some(c) = self.slot[agent].take() {
            self.occupant[c] = None;
            self.epoch[agent] += 1;
            self.record(time, EventKind::Failure, vec![agent], vec![c]);
        }
    }

    fn emit(&mut self, time: f64, agent: usize) {
        let Some(c) = self.slot[agent] else { return };
        let id = MessageId {
            origin: agent,
            seq: self.next_seq[agent],
        };
        self.next_seq[agent] += 1;
        self.known[agent].insert(self.message_ids.len());
        self.message_ids.push(id);
        self.record(time, EventKind::Emit, vec![agent], vec![c])
            .message = Some(id);
    }

    /// Period boundary: look for a repeated occupancy state once no failure is
    /// pending, which proves that the run has become periodic.
    fn tick(&mut self, time: f64) {
        if !self.sim.config.strategy.is_deterministic()
            || time < self.last_failure
            || self.footer.repeat_window.is_some()
        {
            return;
        }
        let state = self.occupant.clone();
        if let Some((t0, counts)) = self.snapshots.get(&state) {
            let t0 = *t0;
            self.footer.proven_starving = (0..self.sim.n)
                .filter(|&a| self.slot[a].is_some() && self.meetings[a] == counts[a])
                .collect();
            self.footer.repeat_window = Some((t0, time));
            self.snapshots.clear();
        } else {
            self.snapshots.insert(state, (time, self.meetings.clone()));
        }
    }

    fn source(&mut self, time: f64, source: Source) {
        match source.kind {
            SourceKind::Edge { a, b } => match (self.occupant[a], self.occupant[b]) {
                (Some(x), Some(y)) => self.meet(time, x, y, a, b, source.location),
                (Some(x), None) => self.absent(time, x, a, b),
                (None, Some(y)) => self.absent(time, y, b, a),
                (None, None) => {}
            },
            SourceKind::Arrival { slot, toward } => {
                if let (Some(x), None) = (self.occupant[slot], self.occupant[toward]) {
                    self.absent(time, x, slot, toward);
                }
            }
            SourceKind::Enter { a, b } | SourceKind::Exit { a, b } => {
                if let (Some(x), Some(y)) = (self.occupant[a], self.occupant[b]) {
                    let kind = match source.kind {
                        SourceKind::Enter { .. } => EventKind::EnterRegion,
                        _ => EventKind::ExitRegion,
                    };
                    self.record(time, kind, vec![x, y], vec![a, b]).location =
                        Some(source.location);
                }
            }
        }
    }

    fn meet(&mut self, time: f64, x: usize, y: usize, a: usize, b: usize, location: f64) {
        self.record(time, EventKind::Meeting, vec![x, y], vec![a, b])
            .location = Some(location);
        self.meetings[x] += 1;
        self.meetings[y] += 1;
        let to_x = self.known[y].missing_from(&self.known[x]);
        let to_y = self.known[x].missing_from(&self.known[y]);
        for (receiver, sender, learned) in [(x, y, to_x), (y, x, to_y)] {
            for index in learned {
                self.known[receiver].insert(index);
                let id = self.message_ids[index];
                self.record(time, EventKind::Deliver, vec![receiver, sender], vec![])
                    .message = Some(id);
            }
        }
        // meeting the agent that now covers part of my work area splits it off
        for (me, other_slot) in [(x, b), (y, a)] {
            if Some(other_slot) != self.slot[me] && self.work_area[me].remove(&other_slot) {
                let area: Vec<usize> = self.work_area[me].iter().copied().collect();
                self.record(time, EventKind::WorkArea, vec![me], area);
            }
        }
    }

    /// Agent `x` on `from` reached its link with the empty trajectory `to`.
    fn absent(&mut self, time: f64, x: usize, from: usize, to: usize) {
        if self.sim.policy.decide((from, to), &mut self.strategy_rng) == Decision::Stay {
            return;
        }
        self.occupant[from] = None;
        self.occupant[to] = Some(x);
        self.slot[x] = Some(to);
        self.entry[x] = time;
        self.epoch[x] += 1;
        let location = self.sim.link_location.get(&(to, from)).copied();
        self.record(time, EventKind::Switch, vec![x], vec![from, to])
            .location = location;
        let epoch = self.epoch[x];
        self.push(
            time + self.sim.period,
            Item::Tour {
                agent: x,
                epoch,
                k: 1,
            },
        );
        if self.work_area[x].insert(to) {
            let area: Vec<usize> = self.work_area[x].iter().copied().collect();
            self.record(time, EventKind::WorkArea, vec![x], area);
        }
    }

    fn finish(self) -> Trace {
        let sim = self.sim;
        let header = TraceHeader {
            horizon: sim.config.horizon,
            period: sim.period,
            mode: sim.mode,
            trajectories: sim.n,
            initial: (0..sim.n).collect(),
            seed: sim.config.seed,
            strategy: sim.config.strategy,
            emission: sim.config.emission,
            failures: sim.config.failures.clone(),
        };
        let mut footer = self.footer;
        footer.final_assignment = self.slot;
        Trace {
            header,
            events: self.events,
            footer,
        }
    }
}
