//! Parallel edge-based planner that lifts every graph edge to a full-D
//! trajectory from the start. With one thread it reduces to the sequential
//! interleaved search-and-optimize planner.

mod engine;
mod trajectory;

use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{bfs_heuristic, Heuristic, HeuristicError, ProblemInstance};
use crate::trajopt::{compute_kmin, KminConfig, KminError, OptError, OptimizerConfig, TrajectorySolution};

pub use engine::{search, Ancestor, EdgeEvaluator, SearchConfig, SearchOutcome, SearchStats, SearchStatus, G_SLACK};
pub use trajectory::{chain_of, repair_schedule, RepairAttempt, TrajectoryEvaluator};

/// Outcome class of a planning run.
pub type PlanStatus = SearchStatus;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Maximum number of expansion workers.
    pub threads: usize,
    pub heuristic_weight: f64,
    pub timeout_s: f64,
    pub optimizer: OptimizerConfig,
    /// Degree of the fallback edge solve; computed from the action
    /// primitives when absent.
    pub kmin_degree: Option<usize>,
    pub repair_retries: usize,
    /// Obstacles are grown by this margin for planning.
    pub safety_margin: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            threads: 1,
            heuristic_weight: 2.0,
            timeout_s: 30.0,
            optimizer: OptimizerConfig::default(),
            kmin_degree: None,
            repair_retries: 1,
            safety_margin: 0.01,
        }
    }
}

impl PlannerConfig {
    pub fn with_threads(&self, threads: usize) -> Self {
        Self {
            threads,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        if self.threads == 0 {
            return Err(PlanError::InvalidConfig("threads must be at least 1".into()));
        }
        if !(self.heuristic_weight >= 1.0) {
            return Err(PlanError::InvalidConfig("heuristic weight must be at least 1".into()));
        }
        if !(self.timeout_s >= 0.0) {
            return Err(PlanError::InvalidConfig("timeout must be nonnegative".into()));
        }
        if !(self.safety_margin >= 0.0) {
            return Err(PlanError::InvalidConfig("safety margin must be nonnegative".into()));
        }
        self.optimizer.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("invalid planner configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Optimizer(#[from] OptError),
    #[error(transparent)]
    Heuristic(#[from] HeuristicError),
    #[error(transparent)]
    Degree(#[from] KminError),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanStats {
    pub expansions: usize,
    pub evaluations: usize,
    pub optimizer_calls: usize,
    pub repairs: usize,
    /// Search time, excluding heuristic construction.
    pub wall_time_s: f64,
    pub heuristic_time_s: f64,
    pub threads_spawned: usize,
    pub closed_states: usize,
    pub audit_violations: usize,
    pub trace_hash: u64,
    pub kmin_degree: usize,
}

impl PlanStats {
    pub(crate) fn from_search(s: &SearchStats) -> Self {
        Self {
            expansions: s.expansions,
            evaluations: s.evaluations,
            wall_time_s: s.wall_time_s,
            threads_spawned: s.threads_spawned,
            closed_states: s.closed_states,
            audit_violations: s.audit_violations,
            trace_hash: s.trace_hash,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub status: PlanStatus,
    pub trajectory: Option<TrajectorySolution>,
    /// Low-D states from the start to the goal state.
    pub path: Vec<Vec<f64>>,
    pub stats: PlanStats,
}

impl PlanResult {
    pub fn solved(&self) -> bool {
        self.status == SearchStatus::Solved && self.trajectory.is_some()
    }

    pub fn cost(&self) -> f64 {
        self.trajectory.as_ref().map_or(f64::INFINITY, |t| t.cost)
    }
}

/// Smallest spline degree for which every action primitive admits an
/// in-tunnel, limit-saturating spline.
pub fn kmin_degree(problem: &ProblemInstance) -> Result<usize, KminError> {
    let tunnels: Vec<_> = problem
        .domain
        .actions
        .iter()
        .map(|a| a.tunnel(problem.domain.tunnel_half_width))
        .collect();
    Ok(compute_kmin(&tunnels, &problem.limits, &KminConfig::default())?.k_min)
}

/// Grid heuristic in cost units: hops scaled by the length weight plus the
/// time weight over the fastest axis speed.
pub fn default_heuristic(problem: &ProblemInstance, optimizer: &OptimizerConfig) -> Result<Arc<dyn Heuristic>, HeuristicError> {
    let vmax = problem.limits.deriv_limits[0].iter().cloned().fold(0.0, f64::max);
    let scale = optimizer.w2 + if vmax > 0.0 { optimizer.w1 / vmax } else { 0.0 };
    Ok(Arc::new(bfs_heuristic(
        &problem.goal,
        problem.world.as_ref(),
        problem.domain.heuristic_resolution,
        scale,
    )?))
}

/// Builds the heuristic and plans.
pub fn plan(problem: &ProblemInstance, cfg: &PlannerConfig) -> Result<PlanResult, PlanError> {
    cfg.validate()?;
    let started = Instant::now();
    let heuristic = default_heuristic(problem, &cfg.optimizer)?;
    let heuristic_time = started.elapsed().as_secs_f64();
    let mut result = plan_with_heuristic(problem, cfg, heuristic.as_ref())?;
    result.stats.heuristic_time_s = heuristic_time;
    Ok(result)
}

/// Plans with a precomputed heuristic.
pub fn plan_with_heuristic(problem: &ProblemInstance, cfg: &PlannerConfig, heuristic: &dyn Heuristic) -> Result<PlanResult, PlanError> {
    cfg.validate()?;
    let degree = match cfg.kmin_degree {
        Some(d) => d,
        None => kmin_degree(problem)?,
    };
    let world = if cfg.safety_margin > 0.0 {
        problem.world.inflated(cfg.safety_margin)
    } else {
        problem.world.clone()
    };
    let evaluator = TrajectoryEvaluator::new(
        world,
        problem.limits.clone(),
        cfg.optimizer.clone(),
        degree,
        problem.domain.tunnel_half_width,
        cfg.repair_retries,
    );
    let outcome = search(problem, heuristic, &evaluator, &search_config(cfg));
    let mut stats = PlanStats::from_search(&outcome.stats);
    stats.optimizer_calls = evaluator.optimizer_calls();
    stats.repairs = evaluator.repairs();
    stats.kmin_degree = degree;
    Ok(PlanResult {
        status: outcome.status,
        trajectory: outcome.payload.map(|p| (*p).clone()),
        path: outcome.path.into_iter().map(|s| s.coords).collect(),
        stats,
    })
}

pub(crate) fn search_config(cfg: &PlannerConfig) -> SearchConfig {
    SearchConfig {
        threads: cfg.threads,
        heuristic_weight: cfg.heuristic_weight,
        timeout: Duration::from_secs_f64(cfg.timeout_s.min(1e9)),
    }
}
