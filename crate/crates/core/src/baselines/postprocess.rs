use serde::{Deserialize, Serialize};

use crate::graph::distance;
use crate::trajopt::{optimize_with_waypoints, FailureReason, Limits, OptError, OptimizerConfig, TrajectorySolution, Waypoint};
use crate::world::CollisionWorld;

use super::KinematicPath;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostprocessOutcome {
    pub trajectory: Option<TrajectorySolution>,
    /// Indices of the path waypoints constrained, in the order added.
    pub added: Vec<usize>,
    pub optimizer_calls: usize,
}

/// Trajectory parameter of every path waypoint: its arc-length fraction.
pub fn arc_length_parameters(points: &[Vec<f64>]) -> Vec<f64> {
    let mut acc = vec![0.0; points.len()];
    for i in 1..points.len() {
        acc[i] = acc[i - 1] + distance(&points[i - 1], &points[i]);
    }
    let total = acc.last().copied().unwrap_or(0.0);
    if total > 0.0 {
        acc.iter_mut().for_each(|a| *a /= total);
    }
    acc
}

/// Optimizes from the first to the last path point, starting with no
/// interior constraints and then, while the result collides, constraining
/// the unconstrained interior waypoint closest to the deepest collision.
pub fn postprocess_iterative_waypoints(
    path: &KinematicPath,
    limits: &Limits,
    world: &dyn CollisionWorld,
    cfg: &OptimizerConfig,
    deadline: Option<std::time::Instant>,
) -> Result<PostprocessOutcome, OptError> {
    let pts = &path.waypoints;
    let mut out = PostprocessOutcome {
        trajectory: None,
        added: Vec::new(),
        optimizer_calls: 0,
    };
    if pts.is_empty() {
        return Ok(out);
    }
    let (x1, x2) = (&pts[0], &pts[pts.len() - 1]);
    let params = arc_length_parameters(pts);
    // Interior points with parameters strictly inside (0, 1).
    let candidates: Vec<usize> = (1..pts.len().saturating_sub(1))
        .filter(|&i| params[i] > 1e-9 && params[i] < 1.0 - 1e-9)
        .collect();
    loop {
        if deadline.is_some_and(|d| std::time::Instant::now() >= d) {
            return Ok(out);
        }
        let mut chosen = out.added.clone();
        chosen.sort_unstable();
        let wps: Vec<Waypoint> = chosen
            .iter()
            .map(|&i| Waypoint {
                u: params[i],
                point: pts[i].clone(),
            })
            .collect();
        out.optimizer_calls += 1;
        let sol = optimize_with_waypoints(x1, x2, &wps, limits, world, cfg, None)?;
        if sol.is_feasible() {
            out.trajectory = Some(sol);
            return Ok(out);
        }
        if sol.failure != Some(FailureReason::Collision) {
            return Ok(out);
        }
        let Some(hit) = sol.collision_point.as_ref() else {
            return Ok(out);
        };
        let next = candidates
            .iter()
            .filter(|i| !out.added.contains(i))
            .min_by(|&&a, &&b| distance(&pts[a], hit).total_cmp(&distance(&pts[b], hit)));
        match next {
            Some(&i) => out.added.push(i),
            None => return Ok(out),
        }
    }
}
