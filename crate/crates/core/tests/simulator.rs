use std::collections::{BTreeMap, VecDeque};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use synchro::generator::{grid, random_connected};
use synchro::io::trace_to_string;
use synchro::metrics::{abandoned_time, starvation_time, tours_per_trajectory};
use synchro::pipeline::{default_mode, plan, PipelineReport};
use synchro::simulator::{
    occupancy_check, run, Decision, EmissionPolicy, Engine, EventKind, Failure, MessageId,
    SimConfig, Strategy, SwitchPolicy, Trace, TraceEvent, TraceFooter, TraceHeader,
};
use synchro::{Instance, Schedule, ScheduleMode};

fn planned(inst: &Instance, period: f64) -> (Schedule, PipelineReport) {
    plan(inst, default_mode(inst), period).unwrap()
}

fn edge_of(e: &TraceEvent) -> (usize, usize) {
    let (a, b) = (e.trajectories[0], e.trajectories[1]);
    (a.min(b), a.max(b))
}

#[test]
fn strategy_decisions() {
    let inst = grid(2, 2, 2.4, 0.5).unwrap();
    let g = inst.comm_graph().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    let alw = SwitchPolicy::new(Strategy::Alw, &g);
    let never = SwitchPolicy::new(Strategy::Rand { p: 0.0 }, &g);
    let always = SwitchPolicy::new(Strategy::Rand { p: 1.0 }, &g);
    for e in g.edge_keys() {
        assert_eq!(alw.decide(e, &mut rng), Decision::Switch);
        assert_eq!(never.decide(e, &mut rng), Decision::Stay);
        assert_eq!(always.decide(e, &mut rng), Decision::Switch);
    }

    // the square has four edges; a depth-first tree keeps three
    let dfs = SwitchPolicy::new(Strategy::Dfs { root: 0 }, &g);
    let tree: Vec<_> = g.dfs_tree(0).unwrap();
    let mut stays = 0;
    for e in g.edge_keys() {
        let in_tree = tree.iter().any(|&(a, b)| (a.min(b), a.max(b)) == e);
        let d = dfs.decide(e, &mut rng);
        assert_eq!(d == Decision::Switch, in_tree, "{e:?}");
        stays += usize::from(d == Decision::Stay);
    }
    assert_eq!(stays, 1);

    let half = SwitchPolicy::new(Strategy::Rand { p: 0.5 }, &g);
    let switches = (0..4000)
        .filter(|_| half.decide((0, 1), &mut rng) == Decision::Switch)
        .count();
    assert!((1800..2200).contains(&switches), "{switches}");
}

#[test]
fn strategy_parsing() {
    assert_eq!("alw".parse::<Strategy>().unwrap(), Strategy::Alw);
    assert_eq!(
        "rand:0.25".parse::<Strategy>().unwrap(),
        Strategy::Rand { p: 0.25 }
    );
    assert_eq!(
        "dfs:3".parse::<Strategy>().unwrap(),
        Strategy::Dfs { root: 3 }
    );
    assert!("rand:1.5".parse::<Strategy>().is_err());
    assert!("sometimes".parse::<Strategy>().is_err());
    for s in ["alw", "rand:0.5", "dfs:2"] {
        assert_eq!(s.parse::<Strategy>().unwrap().to_string(), s);
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let inst = grid(1, 2, 2.4, 0.5).unwrap();
    let (s, _) = planned(&inst, 10.0);
    let bad = [
        SimConfig::new(0.0, Strategy::Alw, 0),
        SimConfig::new(50.0, Strategy::Rand { p: -0.1 }, 0),
        SimConfig::new(50.0, Strategy::Alw, 0).with_failures(vec![Failure {
            agent: 0,
            time: 60.0,
        }]),
        SimConfig::new(50.0, Strategy::Alw, 0).with_failures(vec![Failure {
            agent: 5,
            time: 1.0,
        }]),
        SimConfig::new(50.0, Strategy::Dfs { root: 9 }, 0),
    ];
    for config in bad {
        assert!(run(&inst, &s, &config).is_err(), "{config:?}");
    }
}

#[test]
fn grid_without_failures_is_conservative() {
    let period = 10.0;
    let inst = grid(3, 3, 2.4, 0.5).unwrap();
    let (s, report) = planned(&inst, period);
    let trace = run(&inst, &s, &SimConfig::new(10.5 * period, Strategy::Alw, 4)).unwrap();
    assert!(occupancy_check(&trace));
    assert_eq!(trace.events_of(EventKind::Switch).count(), 0);
    assert_eq!(tours_per_trajectory(&trace), vec![10; 9]);
    assert_eq!(abandoned_time(&trace), 0.0);

    let mut per_edge: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for e in trace.events_of(EventKind::Meeting) {
        if e.time < 10.0 * period {
            *per_edge.entry(edge_of(e)).or_default() += 1;
        }
    }
    assert_eq!(per_edge.len(), report.retained.len());
    assert!(per_edge.values().all(|&c| c == 10), "{per_edge:?}");

    let st = starvation_time(&trace);
    assert!(st.max_gap <= period + 1e-9, "{}", st.max_gap);
    assert!(!st.starving());
}

#[test]
fn runs_are_deterministic() {
    let inst = random_connected(8, 0.6, 11).unwrap();
    let (s, _) = planned(&inst, 20.0);
    let config = SimConfig::new(600.0, Strategy::Rand { p: 0.5 }, 7).with_failures(vec![
        Failure {
            agent: 1,
            time: 20.0,
        },
        Failure {
            agent: 4,
            time: 20.0,
        },
    ]);
    let a = trace_to_string(&run(&inst, &s, &config).unwrap()).unwrap();
    let b = trace_to_string(&run(&inst, &s, &config).unwrap()).unwrap();
    assert_eq!(a, b);
    let other = SimConfig { seed: 8, ..config };
    let c = trace_to_string(&run(&inst, &s, &other).unwrap()).unwrap();
    assert_ne!(a, c);
}

#[test]
fn lone_failure_without_switching_abandons_its_trajectory() {
    let inst = grid(2, 2, 2.4, 0.5).unwrap();
    let (s, _) = planned(&inst, 10.0);
    let config = SimConfig::new(100.0, Strategy::Rand { p: 0.0 }, 0).with_failures(vec![Failure {
        agent: 2,
        time: 20.0,
    }]);
    let trace = run(&inst, &s, &config).unwrap();
    assert_eq!(abandoned_time(&trace), 80.0);
    assert_eq!(trace.events_of(EventKind::Switch).count(), 0);
    assert_eq!(trace.footer.final_assignment[2], None);
    let tours = tours_per_trajectory(&trace);
    // the failure at t = 20 precedes the tour that would end then
    assert_eq!(tours[2], 1);
    assert_eq!(tours[0], 10);
}

#[test]
fn switching_refills_abandoned_trajectories() {
    let inst = grid(3, 3, 2.4, 0.5).unwrap();
    let (s, _) = planned(&inst, 10.0);
    let failures = [0, 4, 8]
        .map(|agent| Failure { agent, time: 10.0 })
        .to_vec();
    let trace = run(
        &inst,
        &s,
        &SimConfig::new(300.0, Strategy::Alw, 0).with_failures(failures),
    )
    .unwrap();
    assert!(occupancy_check(&trace));
    assert!(trace.events_of(EventKind::Switch).count() > 0);
    assert_eq!(trace.survivors(), vec![1, 2, 3, 5, 6, 7]);
    for e in trace.events_of(EventKind::Switch) {
        assert_eq!(e.trajectories.len(), 2);
        assert!(e.time >= 10.0);
    }
}

fn meeting_times(trace: &Trace) -> Vec<(f64, (usize, usize))> {
    trace
        .events_of(EventKind::Meeting)
        .map(|e| (e.time, edge_of(e)))
        .collect()
}

#[test]
fn engines_agree_on_meetings() {
    let period = 10.0;
    let inst = grid(2, 3, 2.4, 0.5).unwrap();
    let (s, _) = planned(&inst, period);
    let base = SimConfig::new(100.0, Strategy::Alw, 3).with_failures(vec![Failure {
        agent: 1,
        time: 15.0,
    }]);
    let exact = run(
        &inst,
        &s,
        &SimConfig {
            engine: Some(Engine::EventDriven),
            ..base.clone()
        },
    )
    .unwrap();
    let dt = period / 1000.0;
    let stepped = run(
        &inst,
        &s,
        &SimConfig {
            engine: Some(Engine::FixedStep { dt }),
            ..base
        },
    )
    .unwrap();
    let (a, b) = (meeting_times(&exact), meeting_times(&stepped));
    assert_eq!(a.len(), b.len());
    for ((ta, ea), (tb, eb)) in a.iter().zip(&b) {
        assert_eq!(ea, eb);
        assert!((ta - tb).abs() <= dt, "{ta} vs {tb}");
    }
    assert_eq!(
        exact.events_of(EventKind::Switch).count(),
        stepped.events_of(EventKind::Switch).count()
    );
    assert!(occupancy_check(&stepped));
}

#[test]
fn emission_policies() {
    let period = 10.0;
    let inst = grid(1, 3, 2.4, 0.5).unwrap();
    let (s, _) = planned(&inst, period);
    let config = SimConfig {
        emission: EmissionPolicy::PeriodStart,
        ..SimConfig::new(35.0, Strategy::Alw, 0)
    };
    let trace = run(&inst, &s, &config).unwrap();
    let emits: Vec<f64> = trace.events_of(EventKind::Emit).map(|e| e.time).collect();
    assert_eq!(
        emits,
        [0.0, 0.0, 0.0, 10.0, 10.0, 10.0, 20.0, 20.0, 20.0, 30.0, 30.0, 30.0]
    );

    let random = run(&inst, &s, &SimConfig::new(35.0, Strategy::Alw, 0)).unwrap();
    let mut per_agent: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for e in random.events_of(EventKind::Emit) {
        per_agent.entry(e.agents[0]).or_default().push(e.time);
    }
    for times in per_agent.values() {
        assert!(times.len() == 3 || times.len() == 4, "{times:?}");
        for (k, t) in times.iter().enumerate() {
            assert!(*t >= k as f64 * period && *t < (k + 1) as f64 * period);
        }
    }
}

fn header(trajectories: usize, initial: Vec<usize>) -> TraceHeader {
    TraceHeader {
        horizon: 10.0,
        period: 1.0,
        mode: ScheduleMode::OppositeDirections,
        trajectories,
        initial,
        seed: 0,
        strategy: Strategy::Alw,
        emission: EmissionPolicy::default(),
        failures: vec![],
    }
}

fn switch(time: f64, agent: usize, from: usize, to: usize) -> TraceEvent {
    TraceEvent {
        time,
        kind: EventKind::Switch,
        agents: vec![agent],
        trajectories: vec![from, to],
        location: None,
        message: None,
    }
}

#[test]
fn occupancy_check_on_hand_built_traces() {
    let empty = Trace {
        header: header(0, vec![]),
        events: vec![],
        footer: TraceFooter {
            final_assignment: vec![],
            proven_starving: vec![],
            repeat_window: None,
        },
    };
    assert!(occupancy_check(&empty));

    let footer = TraceFooter {
        final_assignment: vec![Some(1), Some(2)],
        proven_starving: vec![],
        repeat_window: None,
    };
    let legal = Trace {
        header: header(3, vec![0, 1]),
        events: vec![switch(1.0, 1, 1, 2), switch(2.0, 0, 0, 1)],
        footer: footer.clone(),
    };
    assert!(occupancy_check(&legal));

    let collision = Trace {
        header: header(3, vec![0, 1]),
        events: vec![switch(1.0, 0, 0, 1)],
        footer: footer.clone(),
    };
    assert!(!occupancy_check(&collision));

    let shared_start = Trace {
        header: header(3, vec![1, 1]),
        events: vec![],
        footer: footer.clone(),
    };
    assert!(!occupancy_check(&shared_start));

    let out_of_order = Trace {
        header: header(3, vec![0, 1]),
        events: vec![switch(2.0, 1, 1, 2), switch(1.0, 0, 0, 1)],
        footer,
    };
    assert!(!occupancy_check(&out_of_order));
}

fn eccentricity(n: usize, edges: &[(usize, usize)], origin: usize) -> Option<usize> {
    let mut adj = vec![vec![]; n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut dist = vec![usize::MAX; n];
    dist[origin] = 0;
    let mut queue = VecDeque::from([origin]);
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    dist.into_iter()
        .try_fold(0, |m, d| (d != usize::MAX).then(|| m.max(d)))
}

/// Earliest time each agent learns `msg`, replaying meetings in trace order.
fn oracle_deliveries(trace: &Trace, msg: MessageId) -> BTreeMap<usize, f64> {
    let mut known = BTreeMap::new();
    for e in &trace.events {
        match e.kind {
            EventKind::Emit if e.message == Some(msg) => {
                known.insert(e.agents[0], e.time);
            }
            EventKind::Meeting if !known.is_empty() => {
                let (x, y) = (e.agents[0], e.agents[1]);
                match (known.contains_key(&x), known.contains_key(&y)) {
                    (true, false) => {
                        known.insert(y, e.time);
                    }
                    (false, true) => {
                        known.insert(x, e.time);
                    }
                    _ => {}
                }
            }
            _ => {}
        }
    }
    known
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gossip_matches_the_meeting_path_oracle(n in 2usize..8, seed in 0u64..1000) {
        let period = 10.0;
        let inst = random_connected(n, 0.6, seed).unwrap();
        let (s, report) = planned(&inst, period);
        let horizon = 12.0 * period;
        let trace = run(&inst, &s, &SimConfig::new(horizon, Strategy::Alw, seed)).unwrap();
        prop_assert!(occupancy_check(&trace));

        let mut delivered: BTreeMap<MessageId, BTreeMap<usize, f64>> = BTreeMap::new();
        for e in trace.events_of(EventKind::Deliver) {
            let m = e.message.unwrap();
            delivered.entry(m).or_default().entry(e.agents[0]).or_insert(e.time);
        }
        for e in trace.events_of(EventKind::Emit) {
            let m = e.message.unwrap();
            let origin = e.agents[0];
            let mut got = delivered.remove(&m).unwrap_or_default();
            got.insert(origin, e.time);
            prop_assert_eq!(&got, &oracle_deliveries(&trace, m));
            prop_assert!(got.values().all(|&t| t >= e.time));

            // each hop waits at most one period
            if let Some(ecc) = eccentricity(n, &report.retained, origin) {
                let bound = ecc as f64 * period;
                if e.time + bound < horizon {
                    prop_assert_eq!(got.len(), n);
                    let last = got.values().fold(0.0f64, |a, &b| a.max(b));
                    prop_assert!(last - e.time <= bound + 1e-9);
                }
            }
        }
    }
}
