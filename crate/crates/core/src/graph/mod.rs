//! Low-dimensional graph: states on a primitive lattice, action primitives,
//! successor generation, the goal region and problem instances.

mod domains;
mod heuristic;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trajopt::{Limits, Tunnel};
use crate::world::CollisionWorld;

pub use domains::{arm_actions, axis_actions, Domain, DomainKind};
pub use heuristic::{bfs_heuristic, GridHeuristic, Heuristic, HeuristicError};

/// Canonical identity of a state for OPEN/CLOSED bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StateKey {
    Lattice(Vec<i64>),
    Goal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowDState {
    pub coords: Vec<f64>,
    pub key: StateKey,
}

impl LowDState {
    /// State keyed by rounding each coordinate to the lattice `resolution`.
    pub fn on_lattice(coords: Vec<f64>, resolution: f64) -> Self {
        let key = StateKey::Lattice(coords.iter().map(|c| (c / resolution).round() as i64).collect());
        Self { coords, key }
    }

    /// The representative goal state.
    pub fn goal(coords: Vec<f64>) -> Self {
        Self {
            coords,
            key: StateKey::Goal,
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    UnitMove,
    LineOfSightGoal,
    /// Placeholder for all not-yet-generated edges of a state.
    Dummy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionPrimitive {
    pub delta: Vec<f64>,
    pub kind: ActionKind,
}

impl ActionPrimitive {
    pub fn unit(delta: Vec<f64>) -> Self {
        Self {
            delta,
            kind: ActionKind::UnitMove,
        }
    }

    pub fn length(&self) -> f64 {
        self.delta.iter().map(|d| d * d).sum::<f64>().sqrt()
    }

    /// Tunnel of this primitive applied at the origin.
    pub fn tunnel(&self, half_width: f64) -> Tunnel {
        let zero = vec![0.0; self.delta.len()];
        Tunnel::around_edge(&zero, &self.delta, half_width)
    }
}

/// Ball of radius `tolerance` around `center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalRegion {
    pub center: Vec<f64>,
    pub tolerance: f64,
}

impl GoalRegion {
    pub fn new(center: Vec<f64>, tolerance: f64) -> Self {
        Self { center, tolerance }
    }

    pub fn contains(&self, coords: &[f64]) -> bool {
        distance(coords, &self.center) <= self.tolerance
    }

    pub fn representative(&self) -> LowDState {
        LowDState::goal(self.center.clone())
    }
}

/// A generated edge `from -> to`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: LowDState,
    pub to: LowDState,
    pub action: ActionPrimitive,
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// One edge per primitive whose straight segment is free, plus an edge to
/// the goal representative when it is in line of sight.
pub fn successors(
    state: &LowDState,
    actions: &[ActionPrimitive],
    world: &dyn CollisionWorld,
    goal: &GoalRegion,
    resolution: f64,
) -> Vec<Edge> {
    let mut out = Vec::with_capacity(actions.len() + 1);
    for a in actions.iter().filter(|a| a.kind == ActionKind::UnitMove) {
        let coords: Vec<f64> = state.coords.iter().zip(&a.delta).map(|(c, d)| c + d).collect();
        if world.point_free(&coords) && world.segment_free(&state.coords, &coords) {
            out.push(Edge {
                from: state.clone(),
                to: LowDState::on_lattice(coords, resolution),
                action: a.clone(),
            });
        }
    }
    if state.key != StateKey::Goal
        && distance(&state.coords, &goal.center) > 0.0
        && world.segment_free(&state.coords, &goal.center)
    {
        out.push(Edge {
            from: state.clone(),
            to: goal.representative(),
            action: ActionPrimitive {
                delta: goal.center.iter().zip(&state.coords).map(|(g, c)| g - c).collect(),
                kind: ActionKind::LineOfSightGoal,
            },
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("start state is in collision")]
    StartInCollision,
    #[error("goal state is in collision")]
    GoalInCollision,
    #[error("dimension mismatch: world {world}, start {start}, goal {goal}, limits {limits}")]
    DimensionMismatch {
        world: usize,
        start: usize,
        goal: usize,
        limits: usize,
    },
    #[error("goal tolerance must be nonnegative")]
    NegativeTolerance,
}

/// A planning query. The full state adds derivatives of the low-D
/// coordinates, so both share the low-D dimension.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub start: LowDState,
    pub goal: GoalRegion,
    pub world: Arc<dyn CollisionWorld>,
    pub limits: Limits,
    pub domain: Domain,
}

impl ProblemInstance {
    pub fn new(
        start: Vec<f64>,
        goal: GoalRegion,
        world: Arc<dyn CollisionWorld>,
        limits: Limits,
        domain: Domain,
    ) -> Result<Self, ProblemError> {
        let dim = world.dim();
        if start.len() != dim || goal.center.len() != dim || limits.dim() != dim {
            return Err(ProblemError::DimensionMismatch {
                world: dim,
                start: start.len(),
                goal: goal.center.len(),
                limits: limits.dim(),
            });
        }
        if goal.tolerance < 0.0 {
            return Err(ProblemError::NegativeTolerance);
        }
        if !world.point_free(&start) {
            return Err(ProblemError::StartInCollision);
        }
        if !world.point_free(&goal.center) {
            return Err(ProblemError::GoalInCollision);
        }
        Ok(Self {
            start: LowDState::on_lattice(start, domain.resolution),
            goal,
            world,
            limits,
            domain,
        })
    }

    pub fn dim(&self) -> usize {
        self.world.dim()
    }

    pub fn successors(&self, state: &LowDState) -> Vec<Edge> {
        successors(
            state,
            &self.domain.actions,
            self.world.as_ref(),
            &self.goal,
            self.domain.resolution,
        )
    }
}
