//! Time offsets for general trajectories with precomputed section times.

use std::collections::VecDeque;

use super::{
    tree_path_cycle, verify_schedule, AgentPlan, Schedule, ScheduleError, ScheduleMode,
    SectionPlan, SYNC_TOL,
};
use crate::scalar::{residue, wrap};
use crate::Graph64;

/// Propagate time offsets over a BFS forest so that both ends of every tree
/// edge reach their shared link together, then check the remaining edges.
///
/// `s0` is the arc length where `start_node` begins (a phase when the plan
/// has no geometry). Other components are rooted at their smallest node,
/// starting at their first link.
pub fn schedule_general(
    g: &Graph64,
    plan: &SectionPlan,
    start_node: usize,
    s0: f64,
) -> Result<Schedule, ScheduleError> {
    let n = g.node_count();
    if plan.trajectories.len() != n {
        return Err(ScheduleError::InvalidArgument(format!(
            "plan covers {} trajectories, graph has {n}",
            plan.trajectories.len()
        )));
    }
    if n > 0 && start_node >= n {
        return Err(ScheduleError::InvalidArgument(format!(
            "start node {start_node} out of range"
        )));
    }
    let period = plan.period;
    let phase = |v: usize, u: usize| {
        plan.phase_of_link(v, u).ok_or_else(|| {
            ScheduleError::InvalidPlan(format!("trajectory {v} has no link towards {u}"))
        })
    };

    let mut offset = vec![0.0; n];
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut seen = vec![false; n];
    for root in std::iter::once(start_node).chain(0..n) {
        if root >= n || seen[root] {
            continue;
        }
        seen[root] = true;
        if root == start_node {
            let tr = &plan.trajectories[root];
            offset[root] = tr.phase_of_position(s0).unwrap_or(s0);
        }
        let mut queue = VecDeque::from([root]);
        while let Some(w) = queue.pop_front() {
            for a in g.neighbors(w) {
                if seen[a] {
                    continue;
                }
                seen[a] = true;
                parent[a] = Some(w);
                let arrival = wrap(phase(w, a)? - offset[w], period);
                offset[a] = wrap(phase(a, w)? - arrival, period);
                queue.push_back(a);
            }
        }
    }

    for e in g.edges() {
        let ta = phase(e.a, e.b)? - offset[e.a];
        let tb = phase(e.b, e.a)? - offset[e.b];
        let r = residue(ta - tb, period);
        if r > SYNC_TOL * period * (1.0 + g.edge_count() as f64) {
            let cycle = tree_path_cycle(&parent, e.a, e.b);
            return Err(ScheduleError::ClosureViolation {
                edge: e.key(),
                cycle,
                residual: r,
            });
        }
    }

    let agents = plan
        .trajectories
        .iter()
        .zip(&offset)
        .map(|(tr, &time_offset)| AgentPlan {
            start: tr.position_at_phase(time_offset).unwrap_or(0.0),
            direction: tr.direction,
            time_offset,
        })
        .collect();
    let schedule = Schedule {
        mode: ScheduleMode::General,
        period,
        agents,
        links: g.edge_keys(),
        sections: Some(plan.clone()),
    };
    debug_assert!(verify_schedule(g, &schedule, 1e-6).all_synchronized());
    Ok(schedule)
}
