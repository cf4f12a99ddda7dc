//! Scheduling and simulation of agents that patrol disjoint closed
//! trajectories and exchange information only when neighbors meet at their
//! shared link positions.

pub mod commgraph;
pub mod generator;
pub mod geometry;
pub mod io;
mod lp;
pub mod metrics;
pub mod pipeline;
pub mod scalar;
pub mod scheduler;
pub mod simulator;

pub use commgraph::{CommGraph, CycleBasis, Edge, GraphError, LinkKind, OddCycle, Side};
pub use generator::{Instance, Layout};
pub use geometry::{AngularPosition, Circle, ClosedPath, GeometryError, Point2};
pub use scalar::Scalar;
pub use scheduler::{
    AgentPlan, Direction, Schedule, ScheduleError, ScheduleMode, SectionPlan, SyncReport,
};

pub type Point64 = Point2<f64>;
pub type Circle64 = Circle<f64>;
pub type Path64 = ClosedPath<f64>;
pub type Angle64 = AngularPosition<f64>;
pub type Graph64 = CommGraph<f64>;

pub type Point32 = Point2<f32>;
pub type Circle32 = Circle<f32>;
pub type Path32 = ClosedPath<f32>;
pub type Graph32 = CommGraph<f32>;
