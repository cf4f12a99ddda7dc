use std::collections::BTreeSet;

use synchro::generator::{preset, FIG7_LATE_FAILURE, STARVATION_PERIOD};
use synchro::metrics::{starvation_time, RunMetrics};
use synchro::pipeline::{default_mode, plan};
use synchro::simulator::{run, EventKind, Failure, SimConfig, Strategy, Trace};
use synchro::Instance;

const HORIZON: f64 = 4000.0;

fn simulate(inst: &Instance, strategy: Strategy, seed: u64, failures: Vec<Failure>) -> Trace {
    let (schedule, _) = plan(inst, default_mode(inst), STARVATION_PERIOD).unwrap();
    let config = SimConfig::new(HORIZON, strategy, seed).with_failures(failures);
    run(inst, &schedule, &config).unwrap()
}

fn whites_at_zero(inst: &Instance) -> Vec<Failure> {
    inst.annotations
        .white
        .iter()
        .map(|&agent| Failure { agent, time: 0.0 })
        .collect()
}

#[test]
fn starvation_presets_starve_under_always_switch() {
    for name in ["fig9a", "fig9b", "fig11", "fig11b"] {
        let inst = preset(name).unwrap();
        assert_eq!(inst.period, Some(STARVATION_PERIOD));
        let trace = simulate(&inst, Strategy::Alw, 0, whites_at_zero(&inst));
        let m = RunMetrics::of(&trace);
        assert!(m.broadcast.infinite, "{name}: {:?}", m.broadcast);
        assert!(!trace.footer.proven_starving.is_empty(), "{name}");
        assert_eq!(m.starvation.max_gap, HORIZON, "{name}");
        let survivors = &inst.annotations.markers["survivors"];
        assert_eq!(&trace.survivors(), survivors, "{name}");
    }
}

#[test]
fn random_switching_avoids_starvation() {
    for name in ["fig9a", "fig9b", "fig11", "fig11b"] {
        let inst = preset(name).unwrap();
        let starving = (0..10)
            .filter(|&seed| {
                let trace = simulate(
                    &inst,
                    Strategy::Rand { p: 0.5 },
                    seed,
                    whites_at_zero(&inst),
                );
                starvation_time(&trace).starving()
            })
            .count();
        assert!(starving <= 1, "{name}: {starving} starving runs");
    }
}

#[test]
fn depth_first_switching_on_the_cycle_preset() {
    let inst = preset("fig11b").unwrap();
    let root = inst.top_left().unwrap();
    let trace = simulate(&inst, Strategy::Dfs { root }, 0, whites_at_zero(&inst));
    assert!(trace.footer.proven_starving.is_empty());
    assert!(!RunMetrics::of(&trace).starvation.starving());
}

/// Trajectories occupied right after `from` or entered later.
fn visited_after(trace: &Trace, from: f64) -> BTreeSet<usize> {
    let mut slot: Vec<Option<usize>> = trace.header.initial.iter().map(|&c| Some(c)).collect();
    let mut visited = BTreeSet::new();
    let mut started = false;
    for e in &trace.events {
        if e.time > from && !started {
            started = true;
            visited.extend(slot.iter().flatten().copied());
        }
        match e.kind {
            EventKind::Failure => slot[e.agents[0]] = None,
            EventKind::Switch => {
                slot[e.agents[0]] = Some(e.trajectories[1]);
                if started {
                    visited.insert(e.trajectories[1]);
                }
            }
            _ => {}
        }
    }
    visited
}

#[test]
fn fig7_leaves_three_trajectories_abandoned() {
    let inst = preset("fig7-starve").unwrap();
    let mut failures = whites_at_zero(&inst);
    failures.extend(inst.annotations.failing.iter().map(|&agent| Failure {
        agent,
        time: FIG7_LATE_FAILURE,
    }));
    let trace = simulate(&inst, Strategy::Alw, 0, failures);
    let visited = visited_after(&trace, FIG7_LATE_FAILURE);
    let empty: Vec<usize> = (0..inst.trajectory_count())
        .filter(|t| !visited.contains(t))
        .collect();
    let mut marked: Vec<usize> = ["P1", "P2", "P3"]
        .iter()
        .flat_map(|k| inst.annotations.markers[*k].clone())
        .collect();
    marked.sort_unstable();
    assert_eq!(empty, marked);
    let m = RunMetrics::of(&trace);
    assert!(m.max_abandoned >= HORIZON - FIG7_LATE_FAILURE - 1e-9);
}
