//! Comparison planners: the sequential planner, graph search followed by a
//! single post-optimization, and parallel bidirectional RRT followed by the
//! same post-optimization.

mod postprocess;
mod rrt;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::graph::{distance, Edge, ProblemInstance};
use crate::planner::{
    default_heuristic, plan, search, Ancestor, EdgeEvaluator, PlanError, PlanResult, PlanStats, PlannerConfig,
    SearchConfig, SearchStatus,
};

pub use postprocess::{arc_length_parameters, postprocess_iterative_waypoints, PostprocessOutcome};
pub use rrt::{pbirrt, RrtConfig, RrtStats};

/// Collision-free polyline from the start into the goal region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinematicPath {
    pub waypoints: Vec<Vec<f64>>,
}

impl KinematicPath {
    /// Drops consecutive duplicate points.
    pub fn new(points: Vec<Vec<f64>>) -> Self {
        let mut waypoints: Vec<Vec<f64>> = Vec::with_capacity(points.len());
        for p in points {
            if waypoints.last().map_or(true, |q| distance(q, &p) > 0.0) {
                waypoints.push(p);
            }
        }
        Self { waypoints }
    }

    pub fn length(&self) -> f64 {
        self.waypoints.windows(2).map(|w| distance(&w[0], &w[1])).sum()
    }
}

/// The sequential planner: the parallel planner with a single thread.
pub fn insat_sequential(problem: &ProblemInstance, cfg: &PlannerConfig) -> Result<PlanResult, PlanError> {
    plan(problem, &cfg.with_threads(1))
}

/// Edge evaluator with Euclidean edge costs and no trajectories.
struct KinematicEvaluator;

impl EdgeEvaluator for KinematicEvaluator {
    /// Path length from the start.
    type Payload = f64;

    fn root(&self, _problem: &ProblemInstance) -> (f64, f64) {
        (0.0, 0.0)
    }

    fn evaluate(&self, _problem: &ProblemInstance, chain: &[Ancestor<f64>], edge: &Edge) -> Option<(f64, f64)> {
        let g = *chain.last()?.payload + distance(&edge.from.coords, &edge.to.coords);
        Some((g, g))
    }
}

fn remaining(started: Instant, timeout_s: f64) -> Duration {
    Duration::from_secs_f64(timeout_s.min(1e9)).saturating_sub(started.elapsed())
}

fn postprocess_result(
    problem: &ProblemInstance,
    cfg: &PlannerConfig,
    path: KinematicPath,
    started: Instant,
    mut stats: PlanStats,
) -> Result<PlanResult, PlanError> {
    let world = if cfg.safety_margin > 0.0 {
        problem.world.inflated(cfg.safety_margin)
    } else {
        problem.world.clone()
    };
    let deadline = started + remaining(started, cfg.timeout_s);
    let out = postprocess_iterative_waypoints(&path, &problem.limits, world.as_ref(), &cfg.optimizer, Some(deadline))?;
    stats.optimizer_calls += out.optimizer_calls;
    stats.wall_time_s = started.elapsed().as_secs_f64();
    let timed_out = Instant::now() >= deadline;
    let status = match (&out.trajectory, timed_out) {
        (Some(_), _) => SearchStatus::Solved,
        (None, true) => SearchStatus::Timeout,
        (None, false) => SearchStatus::Exhausted,
    };
    Ok(PlanResult {
        status,
        trajectory: out.trajectory,
        path: path.waypoints,
        stats,
    })
}

/// Parallel graph search with Euclidean edge costs, then iterative-waypoint
/// post-optimization of the resulting path.
pub fn search_then_optimize(problem: &ProblemInstance, cfg: &PlannerConfig) -> Result<PlanResult, PlanError> {
    cfg.validate()?;
    let t0 = Instant::now();
    let heuristic = default_heuristic(problem, &cfg.optimizer)?;
    let heuristic_time = t0.elapsed().as_secs_f64();
    let started = Instant::now();
    let outcome = search(
        problem,
        heuristic.as_ref(),
        &KinematicEvaluator,
        &SearchConfig {
            threads: cfg.threads,
            heuristic_weight: cfg.heuristic_weight,
            timeout: Duration::from_secs_f64(cfg.timeout_s.min(1e9)),
        },
    );
    let mut stats = PlanStats::from_search(&outcome.stats);
    stats.heuristic_time_s = heuristic_time;
    if outcome.status != SearchStatus::Solved {
        stats.wall_time_s = started.elapsed().as_secs_f64();
        return Ok(PlanResult {
            status: outcome.status,
            trajectory: None,
            path: Vec::new(),
            stats,
        });
    }
    let path = KinematicPath::new(outcome.path.into_iter().map(|s| s.coords).collect());
    postprocess_result(problem, cfg, path, started, stats)
}

/// Parallel bidirectional RRT to the goal center, then iterative-waypoint
/// post-optimization.
pub fn pbirrt_postprocess(problem: &ProblemInstance, cfg: &PlannerConfig, rrt: &RrtConfig) -> Result<PlanResult, PlanError> {
    cfg.validate()?;
    rrt.validate().map_err(PlanError::InvalidConfig)?;
    let started = Instant::now();
    let deadline = started + remaining(started, cfg.timeout_s);
    let (path, rrt_stats) = pbirrt(
        &problem.start.coords,
        &problem.goal.center,
        problem.world.as_ref(),
        rrt,
        cfg.threads,
        Some(deadline),
    );
    let stats = PlanStats {
        expansions: rrt_stats.samples,
        threads_spawned: cfg.threads,
        ..PlanStats::default()
    };
    match path {
        Some(p) => postprocess_result(problem, cfg, KinematicPath::new(p.waypoints), started, stats),
        None => Ok(PlanResult {
            status: if Instant::now() >= deadline {
                SearchStatus::Timeout
            } else {
                SearchStatus::Exhausted
            },
            trajectory: None,
            path: Vec::new(),
            stats: PlanStats {
                wall_time_s: started.elapsed().as_secs_f64(),
                ..stats
            },
        }),
    }
}
