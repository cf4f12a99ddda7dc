//! Preprocessing from an instance to a deployable schedule: build the
//! communication graph, reduce it to a maximum bipartite subgraph, keep only
//! edges whose cycles can be synchronized, then schedule.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::generator::Instance;
use crate::scalar::Scalar;
use crate::scheduler::{
    assign_section_times, schedule_general, schedule_opposite_directions, schedule_same_direction,
    Schedule, ScheduleError, ScheduleMode,
};
use crate::{Angle64, Graph64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropReason {
    /// Removed to break odd cycles.
    OddCycle,
    /// Its cycle violates the line-angle condition for opposite directions.
    CycleCondition,
    /// No section times close its cycle.
    SectionTimes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedEdge {
    pub edge: (usize, usize),
    pub reason: DropReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub mode: ScheduleMode,
    pub nodes: usize,
    pub edges: usize,
    pub retained: Vec<(usize, usize)>,
    pub dropped: Vec<DroppedEdge>,
    /// The retained graph has no cycles.
    pub forest: bool,
}

impl PipelineReport {
    pub fn summary(&self) -> String {
        let mut out = format!(
            "{} nodes, {} edges, {} retained, {} dropped",
            self.nodes,
            self.edges,
            self.retained.len(),
            self.dropped.len()
        );
        for reason in [
            DropReason::OddCycle,
            DropReason::CycleCondition,
            DropReason::SectionTimes,
        ] {
            let count = self.dropped.iter().filter(|d| d.reason == reason).count();
            if count > 0 {
                let label = match reason {
                    DropReason::OddCycle => "odd cycle",
                    DropReason::CycleCondition => "cycle condition",
                    DropReason::SectionTimes => "section times",
                };
                let noun = if count == 1 { "edge" } else { "edges" };
                out.push_str(&format!("\n{count} {noun} dropped ({label})"));
            }
        }
        if self.forest {
            out.push_str("\nretained graph is a tree or forest");
        }
        out
    }
}

fn dropped(before: &Graph64, after: &Graph64, reason: DropReason) -> Vec<DroppedEdge> {
    let kept: BTreeSet<_> = after.edge_keys().into_iter().collect();
    before
        .edge_keys()
        .into_iter()
        .filter(|k| !kept.contains(k))
        .map(|edge| DroppedEdge { edge, reason })
        .collect()
}

/// Mode used when none is requested: opposite directions on circles,
/// section times on general paths.
pub fn default_mode(instance: &Instance) -> ScheduleMode {
    if instance.is_circles() {
        ScheduleMode::OppositeDirections
    } else {
        ScheduleMode::General
    }
}

/// Run the full preprocessing pipeline.
pub fn plan(
    instance: &Instance,
    mode: ScheduleMode,
    period: f64,
) -> Result<(Schedule, PipelineReport), ScheduleError> {
    let full = instance.comm_graph()?;
    let bip = full.max_bipartite_subgraph();
    let mut drops = dropped(&full, &bip, DropReason::OddCycle);
    let (schedule, retained) = match (mode, instance.is_circles()) {
        (ScheduleMode::SameDirection, true) => (
            schedule_same_direction(&bip, Angle64::new(0.0), period)?,
            bip,
        ),
        (ScheduleMode::OppositeDirections, true) => {
            let synch = bip.max_synch_subgraph(<f64 as Scalar>::angle_tol())?;
            drops.extend(dropped(&bip, &synch, DropReason::CycleCondition));
            let s = schedule_opposite_directions(&synch, 0, Angle64::new(0.0), period)?;
            (s, synch)
        }
        (ScheduleMode::General, _) => {
            let lengths = instance.lengths();
            let mut g = bip;
            let plan = loop {
                let basis = g.cycle_basis(0);
                match assign_section_times(&g, &basis, period, &lengths) {
                    Ok(plan) => break plan,
                    Err(ScheduleError::Infeasible { cycles }) => {
                        // drop the chord of the first binding basis cycle
                        let Some(k) = basis.cycles.iter().position(|c| cycles.contains(c)) else {
                            return Err(ScheduleError::Infeasible { cycles });
                        };
                        let chord = basis.chords[k];
                        g = g.filter_edges(|e| e.key() != chord);
                        drops.push(DroppedEdge {
                            edge: chord,
                            reason: DropReason::SectionTimes,
                        });
                    }
                    Err(e) => return Err(e),
                }
            };
            (schedule_general(&g, &plan, 0, 0.0)?, g)
        }
        (m, false) => {
            return Err(ScheduleError::InvalidArgument(format!(
                "mode {m:?} needs circular trajectories"
            )))
        }
    };
    let forest = retained.cycle_basis(0).cycles.is_empty();
    let report = PipelineReport {
        mode,
        nodes: full.node_count(),
        edges: full.edge_count(),
        retained: retained.edge_keys(),
        dropped: drops,
        forest,
    };
    Ok((schedule, report))
}
