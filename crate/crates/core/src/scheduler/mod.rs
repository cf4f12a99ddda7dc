//! Start positions, directions and section times that synchronize every
//! retained edge of a communication graph.

mod general;
mod sections;

use std::collections::VecDeque;
use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::commgraph::{GraphError, LinkKind, OddCycle, Side};
use crate::scalar::{residue, wrap};
use crate::{Angle64, Graph64};

pub use general::schedule_general;
pub use sections::{
    assign_section_times, check_cycle_opposite, check_cycle_same_direction, validate_plan,
    CycleCheck, SectionPlan, TrajectorySections,
};

/// Relative tolerance (in units of the period) used when checking that two
/// link arrival times coincide.
pub const SYNC_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("graph cannot be synchronized: {0}")]
    NotSynchronizable(OddCycle),
    #[error("closure violated on edge {edge:?} (cycle {cycle:?}), residual {residual}")]
    ClosureViolation {
        edge: (usize, usize),
        cycle: Vec<usize>,
        residual: f64,
    },
    #[error("no feasible section times; binding cycles {cycles:?}")]
    Infeasible { cycles: Vec<Vec<usize>> },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid section plan: {0}")]
    InvalidPlan(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Travel direction. `Ccw` is increasing angle on circles and increasing arc
/// length (vertex order) on closed paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Ccw,
    Cw,
}

impl Direction {
    pub fn reversed(self) -> Self {
        match self {
            Direction::Ccw => Direction::Cw,
            Direction::Cw => Direction::Ccw,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Direction::Ccw => 1.0,
            Direction::Cw => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleMode {
    SameDirection,
    OppositeDirections,
    General,
}

/// Per-agent plan. For circle modes `start` is an angle in `[0, 2pi)`; in
/// general mode it is an arc length and `time_offset` is the agent's phase
/// (time since its reference link) at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentPlan {
    pub start: f64,
    pub direction: Direction,
    #[serde(default)]
    pub time_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub mode: ScheduleMode,
    pub period: f64,
    pub agents: Vec<AgentPlan>,
    /// Edges this schedule synchronizes.
    pub links: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sections: Option<SectionPlan>,
}

impl Schedule {
    /// Time in `[0, T)` at which agent `v` first reaches its link position
    /// towards `u`.
    pub fn link_time(&self, g: &Graph64, v: usize, u: usize) -> Option<f64> {
        let e = g.edge(v, u)?;
        let plan = &self.agents[v];
        match self.mode {
            ScheduleMode::General => {
                let sections = self.sections.as_ref()?;
                let phase = sections.phase_of_link(v, u)?;
                Some(wrap(phase - plan.time_offset, self.period))
            }
            _ => {
                let phi = e.link_at(v);
                let gap = match plan.direction {
                    Direction::Ccw => phi - plan.start,
                    Direction::Cw => plan.start - phi,
                };
                Some(wrap(gap, TAU) * self.period / TAU)
            }
        }
    }

    pub fn start_angle(&self, v: usize) -> Angle64 {
        Angle64::new(self.agents[v].start)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeSync {
    pub a: usize,
    pub b: usize,
    pub synchronized: bool,
    /// Circular difference of the two arrival times, in `[0, T/2]`.
    pub phase_error: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SyncReport {
    pub edges: Vec<EdgeSync>,
}

impl SyncReport {
    pub fn all_synchronized(&self) -> bool {
        self.edges.iter().all(|e| e.synchronized)
    }

    pub fn max_phase_error(&self) -> f64 {
        self.edges.iter().map(|e| e.phase_error).fold(0.0, f64::max)
    }

    pub fn unsynchronized(&self) -> Vec<(usize, usize)> {
        self.edges
            .iter()
            .filter(|e| !e.synchronized)
            .map(|e| (e.a, e.b))
            .collect()
    }
}

/// Check each edge of `g`: both agents must reach their link positions at
/// the same time modulo the period, within `tol * T`.
pub fn verify_schedule(g: &Graph64, s: &Schedule, tol: f64) -> SyncReport {
    let edges = g
        .edges()
        .iter()
        .map(|e| {
            let phase_error = match (s.link_time(g, e.a, e.b), s.link_time(g, e.b, e.a)) {
                (Some(ta), Some(tb)) => residue(ta - tb, s.period),
                _ => s.period / 2.0,
            };
            EdgeSync {
                a: e.a,
                b: e.b,
                synchronized: phase_error <= tol * s.period,
                phase_error,
            }
        })
        .collect();
    SyncReport { edges }
}

fn require_circles(g: &Graph64) -> Result<(), ScheduleError> {
    if g.kind() != LinkKind::Angle {
        return Err(ScheduleError::InvalidArgument(
            "circle-mode scheduling needs an angle-based graph".into(),
        ));
    }
    Ok(())
}

fn check_period(period: f64) -> Result<(), ScheduleError> {
    if !(period > 0.0 && period.is_finite()) {
        return Err(ScheduleError::InvalidArgument(format!(
            "period must be positive, got {period}"
        )));
    }
    Ok(())
}

/// All agents fly counter-clockwise; one color class starts at `base`, the
/// other at the antipode.
pub fn schedule_same_direction(
    g: &Graph64,
    base: Angle64,
    period: f64,
) -> Result<Schedule, ScheduleError> {
    require_circles(g)?;
    check_period(period)?;
    let coloring = g.two_color().map_err(ScheduleError::NotSynchronizable)?;
    let agents = coloring
        .iter()
        .map(|side| AgentPlan {
            start: match side {
                Side::A => base.radians(),
                Side::B => base.antipode().radians(),
            },
            direction: Direction::Ccw,
            time_offset: 0.0,
        })
        .collect();
    Ok(Schedule {
        mode: ScheduleMode::SameDirection,
        period,
        agents,
        links: g.edge_keys(),
        sections: None,
    })
}

/// Neighbors fly in opposite directions. Start angles are propagated by BFS
/// from `start_node` (ascending neighbor order) with
/// `alpha_a = 2 beta - alpha_w - pi`; remaining components are rooted at
/// their smallest node with the same `alpha0`.
pub fn schedule_opposite_directions(
    g: &Graph64,
    start_node: usize,
    alpha0: Angle64,
    period: f64,
) -> Result<Schedule, ScheduleError> {
    require_circles(g)?;
    check_period(period)?;
    if start_node >= g.node_count() && g.node_count() > 0 {
        return Err(ScheduleError::InvalidArgument(format!(
            "start node {start_node} out of range"
        )));
    }
    g.two_color().map_err(ScheduleError::NotSynchronizable)?;

    let n = g.node_count();
    let mut alpha = vec![0.0; n];
    let mut dir = vec![Direction::Ccw; n];
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut seen = vec![false; n];
    for root in std::iter::once(start_node).chain(0..n) {
        if root >= n || seen[root] {
            continue;
        }
        seen[root] = true;
        alpha[root] = alpha0.radians();
        let mut queue = VecDeque::from([root]);
        while let Some(w) = queue.pop_front() {
            for a in g.neighbors(w) {
                if seen[a] {
                    continue;
                }
                seen[a] = true;
                parent[a] = Some(w);
                let beta = g.edge(w, a).expect("neighbor edge").beta;
                alpha[a] = wrap(2.0 * beta - alpha[w] - PI, TAU);
                dir[a] = dir[w].reversed();
                queue.push_back(a);
            }
        }
    }

    // closure on chords: either sign of the pi branch is accepted
    for e in g.edges() {
        let r = residue(alpha[e.a] + alpha[e.b] - 2.0 * e.beta - PI, TAU);
        if r > <f64 as crate::scalar::Scalar>::angle_tol() {
            let cycle = tree_path_cycle(&parent, e.a, e.b);
            return Err(ScheduleError::ClosureViolation {
                edge: e.key(),
                cycle,
                residual: r,
            });
        }
    }

    let agents = alpha
        .iter()
        .zip(&dir)
        .map(|(&start, &direction)| AgentPlan {
            start,
            direction,
            time_offset: 0.0,
        })
        .collect();
    let schedule = Schedule {
        mode: ScheduleMode::OppositeDirections,
        period,
        agents,
        links: g.edge_keys(),
        sections: None,
    };
    debug_assert!(verify_schedule(g, &schedule, SYNC_TOL).all_synchronized());
    Ok(schedule)
}

/// Node cycle closed by the edge `(a, b)` through the BFS parent forest.
pub(crate) fn tree_path_cycle(parent: &[Option<usize>], a: usize, b: usize) -> Vec<usize> {
    let ancestors = |mut v: usize| {
        let mut out = vec![v];
        while let Some(p) = parent[v] {
            out.push(p);
            v = p;
        }
        out
    };
    let left = ancestors(a);
    let right = ancestors(b);
    let meet = left.iter().position(|v| right.contains(v));
    match meet {
        Some(k) => {
            let lca = left[k];
            let mut cycle: Vec<usize> = left[..=k].to_vec();
            let r = right
                .iter()
                .position(|&v| v == lca)
                .expect("common ancestor");
            cycle.extend(right[..r].iter().rev());
            cycle
        }
        None => vec![a, b],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::commgraph::{build_circle_graph, Edge};
    use crate::Circle64;
    use std::f64::consts::FRAC_PI_2;

    fn circles(points: &[(f64, f64)]) -> Vec<Circle64> {
        points.iter().map(|&(x, y)| Circle64::unit(x, y)).collect()
    }

    fn close(a: f64, b: f64) -> bool {
        residue(a - b, TAU) < 1e-12
    }

    #[test]
    fn same_direction_path() {
        let g = build_circle_graph(&circles(&[(0.0, 0.0), (2.4, 0.0), (4.8, 0.0)]), 0.5).unwrap();
        let s = schedule_same_direction(&g, Angle64::new(0.0), 1.0).unwrap();
        let a: Vec<f64> = s.agents.iter().map(|p| p.start).collect();
        assert!(close(a[0], 0.0) && close(a[1], PI) && close(a[2], 0.0));
        assert!(verify_schedule(&g, &s, SYNC_TOL).all_synchronized());
    }

    #[test]
    fn same_direction_single_node() {
        let g = build_circle_graph(&circles(&[(0.0, 0.0)]), 0.5).unwrap();
        let s = schedule_same_direction(&g, Angle64::new(1.0), 1.0).unwrap();
        assert_eq!(s.agents.len(), 1);
        assert!(close(s.agents[0].start, 1.0));
    }

    #[test]
    fn same_direction_triangle_fails_with_witness() {
        let h = 2.4 * 3f64.sqrt() / 2.0;
        let g = build_circle_graph(&circles(&[(0.0, 0.0), (2.4, 0.0), (1.2, h)]), 0.5).unwrap();
        match schedule_same_direction(&g, Angle64::new(0.0), 1.0) {
            Err(ScheduleError::NotSynchronizable(w)) => assert_eq!(w.nodes.len(), 3),
            other => panic!("expected odd cycle, got {other:?}"),
        }
    }

    #[test]
    fn opposite_two_circles() {
        let g = build_circle_graph(&circles(&[(0.0, 0.0), (2.4, 0.0)]), 0.5).unwrap();
        let s = schedule_opposite_directions(&g, 0, Angle64::new(0.0), 1.0).unwrap();
        assert!(close(s.agents[1].start, PI));
        assert_eq!(s.agents[0].direction, Direction::Ccw);
        assert_eq!(s.agents[1].direction, Direction::Cw);

        let g = build_circle_graph(&circles(&[(0.0, 0.0), (0.0, 2.4)]), 0.5).unwrap();
        let s = schedule_opposite_directions(&g, 0, Angle64::new(0.0), 1.0).unwrap();
        assert!(close(s.agents[1].start, 0.0));
        assert!(verify_schedule(&g, &s, SYNC_TOL).all_synchronized());
    }

    #[test]
    fn opposite_square_closes() {
        // 1=(0,0) 2=(3,0) 3=(3,3) 4=(0,3)
        let g = build_circle_graph(
            &circles(&[(0.0, 0.0), (2.4, 0.0), (2.4, 2.4), (0.0, 2.4)]),
            0.5,
        )
        .unwrap();
        assert_eq!(g.edge_count(), 4);
        let s = schedule_opposite_directions(&g, 0, Angle64::new(0.0), 1.0).unwrap();
        let a: Vec<f64> = s.agents.iter().map(|p| p.start).collect();
        assert!(close(a[0], 0.0) && close(a[1], PI) && close(a[2], PI) && close(a[3], 0.0));
        let report = verify_schedule(&g, &s, SYNC_TOL);
        assert_eq!(report.edges.len(), 4);
        assert!(report.all_synchronized());
    }

    #[test]
    fn opposite_rejects_infeasible_cycle() {
        let beta = |i: usize, j: usize| {
            if (i, j) == (0, 1) || (i, j) == (2, 3) {
                0.0
            } else {
                FRAC_PI_2 * 2.0 / 3.0
            }
        };
        let edges = [(0, 1), (1, 2), (2, 3), (0, 3)]
            .iter()
            .map(|&(i, j)| Edge::new(i, j, beta(i, j), 0.0, PI, 0.1))
            .collect();
        let g = Graph64::new(4, LinkKind::Angle, edges).unwrap();
        match schedule_opposite_directions(&g, 0, Angle64::new(0.0), 1.0) {
            Err(ScheduleError::ClosureViolation { cycle, .. }) => assert_eq!(cycle.len(), 4),
            other => panic!("expected closure violation, got {other:?}"),
        }
    }

    #[test]
    fn perturbation_flags_incident_edges() {
        let g = build_circle_graph(
            &circles(&[(0.0, 0.0), (2.4, 0.0), (4.8, 0.0), (4.8, 2.4)]),
            0.5,
        )
        .unwrap();
        let mut s = schedule_opposite_directions(&g, 0, Angle64::new(0.0), 10.0).unwrap();
        s.agents[2].start = wrap(s.agents[2].start + TAU / 10.0, TAU);
        let report = verify_schedule(&g, &s, SYNC_TOL);
        let mut bad = report.unsynchronized();
        bad.sort();
        assert_eq!(bad, vec![(1, 2), (2, 3)]);
        for e in report.edges.iter().filter(|e| !e.synchronized) {
            assert!((e.phase_error - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn tree_path_cycle_walks_to_common_ancestor() {
        // 0 - 1 - 2, 0 - 3 - 4
        let parent = vec![None, Some(0), Some(1), Some(0), Some(3)];
        assert_eq!(tree_path_cycle(&parent, 2, 4), vec![2, 1, 0, 3, 4]);
    }
}
