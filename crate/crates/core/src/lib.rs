//! Kinodynamic motion planning by interleaving an edge-parallel graph search in
//! a low-dimensional space with B-spline trajectory optimization.
//!
//! The crate is organized bottom-up:
//!
//! * [`bspline`] exact clamped B-spline machinery,
//! * [`world`] collision worlds (2D point robot, planar arm, tunnels),
//! * [`trajopt`] the trajectory optimizer, its convex relaxation and the
//!   minimum spline degree computation,
//! * [`graph`] low-dimensional states, action primitives and heuristics,
//! * [`planner`] the parallel edge-expansion planner,
//! * [`baselines`] comparison planners,
//! * [`bench`] suite generation, execution, aggregation and file formats.

pub mod baselines;
pub mod bench;
pub mod bspline;
pub mod graph;
pub mod planner;
pub mod trajopt;
pub mod world;

pub use bspline::{BSplineCurve, BoundingBox, KnotVector};
pub use graph::{ActionPrimitive, GoalRegion, LowDState, ProblemInstance};
pub use planner::{plan, PlanResult, PlanStatus, PlannerConfig};
pub use trajopt::{Limits, OptimizerConfig, SolveStatus, TrajectorySolution, Tunnel};
pub use world::CollisionWorld;
