//! Benchmark instances: lattice grids, random connected circle layouts and
//! hard-coded presets.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::commgraph::{build_circle_graph, build_path_graph, GraphError};
use crate::geometry::GeometryError;
use crate::{Circle64, Graph64, Path64, Point64};

/// Placement attempts allowed per new circle in [`random_connected`].
pub const MAX_PLACEMENT_RETRIES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeneratorError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("could not place circle {index} after {retries} attempts; try another seed")]
    GenerationFailure { index: usize, retries: usize },
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// The trajectories of an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Layout {
    /// Circles sharing one communication range (gap between circles).
    Circles { circles: Vec<Circle64>, range: f64 },
    /// Closed paths, each with its own range.
    Paths {
        paths: Vec<Path64>,
        ranges: Vec<f64>,
    },
}

/// Labels attached to presets.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Annotations {
    /// Agents removed before the run starts in starvation scenarios.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub white: Vec<usize>,
    /// Agents that fail later in the scenario.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failing: Vec<usize>,
    /// Named trajectory or agent groups.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub markers: BTreeMap<String, Vec<usize>>,
}

impl Annotations {
    fn is_empty(&self) -> bool {
        self.white.is_empty() && self.failing.is_empty() && self.markers.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub layout: Layout,
    /// System period in seconds, when the instance fixes one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    #[serde(default, skip_serializing_if = "Annotations::is_empty")]
    pub annotations: Annotations,
}

impl Instance {
    pub fn circles(circles: Vec<Circle64>, range: f64) -> Self {
        Self {
            label: None,
            layout: Layout::Circles { circles, range },
            period: None,
            annotations: Annotations::default(),
        }
    }

    pub fn paths(paths: Vec<Path64>, ranges: Vec<f64>) -> Self {
        Self {
            label: None,
            layout: Layout::Paths { paths, ranges },
            period: None,
            annotations: Annotations::default(),
        }
    }

    pub fn trajectory_count(&self) -> usize {
        match &self.layout {
            Layout::Circles { circles, .. } => circles.len(),
            Layout::Paths { paths, .. } => paths.len(),
        }
    }

    pub fn is_circles(&self) -> bool {
        matches!(self.layout, Layout::Circles { .. })
    }

    /// Full communication graph. Fails on overlapping trajectories.
    pub fn comm_graph(&self) -> Result<Graph64, GraphError> {
        match &self.layout {
            Layout::Circles { circles, range } => build_circle_graph(circles, *range),
            Layout::Paths { paths, ranges } => build_path_graph(paths, ranges),
        }
    }

    /// Tour length of every trajectory.
    pub fn lengths(&self) -> Vec<f64> {
        match &self.layout {
            Layout::Circles { circles, .. } => circles.iter().map(|c| TAU * c.radius).collect(),
            Layout::Paths { paths, .. } => paths.iter().map(Path64::length).collect(),
        }
    }

    /// A representative point of each trajectory (center or first vertex).
    pub fn anchors(&self) -> Vec<Point64> {
        match &self.layout {
            Layout::Circles { circles, .. } => circles.iter().map(|c| c.center).collect(),
            Layout::Paths { paths, .. } => paths.iter().map(|p| p.vertices()[0]).collect(),
        }
    }

    /// Trajectory whose anchor is highest, ties broken by the smallest x.
    pub fn top_left(&self) -> Option<usize> {
        let anchors = self.anchors();
        (0..anchors.len()).min_by(|&a, &b| {
            let (pa, pb) = (anchors[a], anchors[b]);
            pb.y.total_cmp(&pa.y)
                .then(pa.x.total_cmp(&pb.x))
                .then(a.cmp(&b))
        })
    }

    /// Disjointness (via graph construction) and, when `connected` is set,
    /// connectivity of the communication graph.
    pub fn validate(&self, connected: bool) -> Result<Graph64, GeneratorError> {
        if let Layout::Paths { paths, ranges } = &self.layout {
            if paths.len() != ranges.len() {
                return Err(GeneratorError::InvalidParameters(format!(
                    "{} paths but {} ranges",
                    paths.len(),
                    ranges.len()
                )));
            }
        }
        let g = self.comm_graph()?;
        if connected && !g.is_connected() {
            return Err(GraphError::Disconnected {
                components: g.components(),
            }
            .into());
        }
        Ok(g)
    }
}

/// Unit circles on a `rows x cols` lattice. Row 0 is the top row and nodes are
/// numbered row by row, so node 0 is the top-left circle.
pub fn grid(rows: usize, cols: usize, spacing: f64, r: f64) -> Result<Instance, GeneratorError> {
    if rows == 0 || cols == 0 {
        return Err(GeneratorError::InvalidParameters(format!(
            "grid dimensions must be positive, got {rows}x{cols}"
        )));
    }
    if !(spacing > 2.0 && spacing <= 2.0 + r) {
        return Err(GeneratorError::InvalidParameters(format!(
            "spacing must lie in (2, 2 + r] = (2, {}], got {spacing}",
            2.0 + r
        )));
    }
    let mut circles = Vec::with_capacity(rows * cols);
    for row in 0..rows {
        for col in 0..cols {
            circles.push(Circle64::unit(
                col as f64 * spacing,
                -(row as f64) * spacing,
            ));
        }
    }
    let mut inst = Instance::circles(circles, r);
    inst.label = Some(format!("grid-{rows}x{cols}"));
    Ok(inst)
}

/// Incremental random layout of `n` unit circles. Each new circle sits on a
/// random ray from a random existing circle, at a center distance drawn
/// uniformly from `(2, 2 + r]`; placements that touch a third circle are
/// redrawn.
pub fn random_connected(n: usize, r: f64, seed: u64) -> Result<Instance, GeneratorError> {
    if n == 0 {
        return Err(GeneratorError::InvalidParameters(
            "n must be at least 1".into(),
        ));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(GeneratorError::InvalidParameters(format!(
            "range must be positive, got {r}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut circles = vec![Circle64::unit(0.0, 0.0)];
    while circles.len() < n {
        let mut placed = false;
        for _ in 0..MAX_PLACEMENT_RETRIES {
            let anchor = circles[rng.gen_range(0..circles.len())].center;
            let theta = rng.gen_range(0.0..TAU);
            let dist = 2.0 + r * (1.0 - rng.gen::<f64>());
            let c = Circle64::unit(anchor.x + dist * theta.cos(), anchor.y + dist * theta.sin());
            if circles.iter().all(|o| o.disjoint(&c)) {
                circles.push(c);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(GeneratorError::GenerationFailure {
                index: circles.len(),
                retries: MAX_PLACEMENT_RETRIES,
            });
        }
    }
    let mut inst = Instance::circles(circles, r);
    inst.label = Some(format!("random-{n}-seed{seed}"));
    Ok(inst)
}

/// Constants of the surveillance scenario: square cells patrolled with
/// back-and-forth sweeps, modelled as a grid of circles with the same period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurveillanceConstants {
    pub cell_side_m: f64,
    pub speed_m_s: f64,
    pub tour_length_m: f64,
    pub sweep_period_s: f64,
    pub link_gap_m: f64,
    pub region_m: f64,
    pub period_s: f64,
}

pub const SURVEILLANCE: SurveillanceConstants = SurveillanceConstants {
    cell_side_m: 300.0,
    speed_m_s: 12.0,
    tour_length_m: 3609.79,
    sweep_period_s: 300.82,
    link_gap_m: 25.0,
    region_m: 100.0,
    period_s: 300.0,
};

/// Period used by the starvation presets.
pub const STARVATION_PERIOD: f64 = 80.0;

pub const PRESET_NAMES: &[&str] = &[
    "surveillance-3x3",
    "fig7-starve",
    "fig9a",
    "fig9b",
    "fig11",
    "fig11b",
    "case-study",
];

/// Range shared by the starvation presets.
const STARVE_RANGE: f64 = 0.5;

struct StarvationLayout {
    centers: &'static [(f64, f64)],
    white: &'static [usize],
    failing: &'static [usize],
    markers: &'static [(&'static str, &'static [usize])],
}

// Layouts found by exhaustive simulation over small trees and grids: under
// the always-switch strategy the solid agents provably never meet once the
// white agents are gone.
const FIG9A: StarvationLayout = StarvationLayout {
    centers: &[(0.0, 0.0), (2.4, 0.0), (4.8, 0.0), (2.4, -2.4)],
    white: &[0, 3],
    failing: &[],
    markers: &[("survivors", &[1, 2])],
};
const FIG9B: StarvationLayout = StarvationLayout {
    centers: &[
        (2.4, 0.0),
        (0.0, -2.4),
        (2.4, -2.4),
        (4.8, -2.4),
        (2.4, -4.8),
    ],
    white: &[1, 2, 4],
    failing: &[],
    markers: &[("survivors", &[0, 3])],
};
const FIG11: StarvationLayout = StarvationLayout {
    centers: &[
        (0.0, 0.0),
        (2.4, 0.0),
        (4.8, 0.0),
        (7.2, 0.0),
        (9.6, 0.0),
        (4.8, -2.4),
    ],
    white: &[0, 1, 2, 4],
    failing: &[],
    markers: &[("survivors", &[3, 5])],
};
// A single cycle: always-switch starves, the depth-first strategy does not.
const FIG11B: StarvationLayout = StarvationLayout {
    centers: &[
        (0.0, 0.0),
        (2.4, 0.0),
        (0.0, -2.4),
        (2.4, -2.4),
        (0.0, -4.8),
    ],
    white: &[0, 3, 4],
    failing: &[],
    markers: &[("survivors", &[1, 2])],
};
// After the white agents and then `a` and `b` fail, trajectories P1, P2 and
// P3 stay empty until the horizon.
const FIG7: StarvationLayout = StarvationLayout {
    centers: &[
        (0.0, 0.0),
        (2.4, 0.0),
        (0.0, -2.4),
        (2.4, -2.4),
        (4.8, -2.4),
        (2.4, -4.8),
        (4.8, -4.8),
        (2.4, -7.2),
    ],
    white: &[1, 2, 6],
    failing: &[0, 3],
    markers: &[
        ("P1", &[0]),
        ("P2", &[1]),
        ("P3", &[2]),
        ("a", &[0]),
        ("b", &[3]),
    ],
};

/// Failure time of the marked agents `a` and `b` in the fig7-starve preset.
pub const FIG7_LATE_FAILURE: f64 = 400.0;

fn starvation_instance(name: &str, layout: &StarvationLayout) -> Instance {
    let circles = layout
        .centers
        .iter()
        .map(|&(x, y)| Circle64::unit(x, y))
        .collect();
    let mut inst = Instance::circles(circles, STARVE_RANGE);
    inst.label = Some(name.to_string());
    inst.period = Some(STARVATION_PERIOD);
    inst.annotations.white = layout.white.to_vec();
    inst.annotations.failing = layout.failing.to_vec();
    inst.annotations.markers = layout
        .markers
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_vec()))
        .collect();
    inst
}

fn diamond(cx: f64, cy: f64, half: f64) -> Path64 {
    Path64::new(vec![
        Point64::new(cx, cy - half),
        Point64::new(cx + half, cy),
        Point64::new(cx, cy + half),
        Point64::new(cx - half, cy),
    ])
    .expect("diamond is a simple polygon")
}

/// Eight trajectories where the retained graph holds two independent cycles,
/// `2-7-8-5` and `2-5-8-6-4-3` (trajectory `k` is index `k - 1`), with
/// trajectory 1 isolated.
fn case_study() -> Instance {
    let paths = vec![
        diamond(50.0, 50.0, 4.0),
        diamond(0.0, 30.0, 4.0),
        diamond(-10.0, 30.0, 4.0),
        Path64::new(vec![
            Point64::new(-10.0, 24.0),
            Point64::new(-14.0, 20.0),
            Point64::new(-12.0, 4.0),
            Point64::new(4.0, 10.0),
            Point64::new(-9.0, 12.0),
        ])
        .expect("concave polygon is simple"),
        diamond(0.0, 20.0, 4.0),
        diamond(10.0, 10.0, 4.0),
        diamond(10.0, 30.0, 4.0),
        diamond(10.0, 20.0, 4.0),
    ];
    let mut inst = Instance::paths(paths, vec![2.5; 8]);
    inst.label = Some("case-study".into());
    inst.period = Some(1.0);
    inst
}

pub fn preset(name: &str) -> Result<Instance, GeneratorError> {
    let inst = match name {
        "surveillance-3x3" => {
            let mut inst = grid(3, 3, 2.4, 0.5)?;
            inst.label = Some(name.into());
            inst.period = Some(SURVEILLANCE.period_s);
            inst
        }
        "fig7-starve" => starvation_instance(name, &FIG7),
        "fig9a" => starvation_instance(name, &FIG9A),
        "fig9b" => starvation_instance(name, &FIG9B),
        "fig11" => starvation_instance(name, &FIG11),
        "fig11b" => starvation_instance(name, &FIG11B),
        "case-study" => case_study(),
        other => return Err(GeneratorError::UnknownPreset(other.into())),
    };
    Ok(inst)
}
