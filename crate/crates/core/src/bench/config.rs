use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::RrtConfig;
use crate::graph::Domain;
use crate::planner::PlannerConfig;
use crate::trajopt::{Limits, OptimizerConfig};
use crate::world::Obstacle;

use super::BenchError;

/// Derivative limits and duration window of the benchmark robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsConfig {
    pub velocity: f64,
    pub acceleration: f64,
    pub jerk: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl LimitsConfig {
    pub fn to_limits(&self, dim: usize) -> Result<Limits, BenchError> {
        Ok(Limits::uniform(
            dim,
            &[self.velocity, self.acceleration, self.jerk],
            self.t_min,
            self.t_max,
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    /// Step lengths of the axis-aligned primitives.
    pub primitive_steps: Vec<f64>,
    pub lattice_resolution: f64,
    pub tunnel_half_width: f64,
    pub heuristic_resolution: f64,
}

impl DomainConfig {
    pub fn to_domain(&self) -> Domain {
        Domain::point2d(
            &self.primitive_steps,
            self.lattice_resolution,
            self.tunnel_half_width,
            self.heuristic_resolution,
        )
    }
}

/// Square world split into chambers by vertical bars, each bar leaving a
/// passage at one end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    pub size: f64,
    pub bars: Vec<Obstacle>,
    /// Extra obstacles placed inside the chambers.
    #[serde(default)]
    pub clutter: Vec<Obstacle>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub seed: u64,
    pub problems: usize,
    /// Minimum start-goal distance.
    pub min_separation: f64,
    /// Minimum distance of start and goal to any obstacle.
    pub clearance: f64,
    pub goal_tolerance: f64,
    /// Start and goal coordinates are multiples of this spacing.
    pub sample_spacing: f64,
    pub max_attempts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub budgets: Vec<usize>,
    pub planners: Vec<String>,
    pub timeout_s: f64,
}

/// Search parameters shared by the graph-based planners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerSection {
    pub heuristic_weight: f64,
    pub repair_retries: usize,
    pub safety_margin: f64,
    /// Fallback edge-solve degree; computed from the primitives when absent.
    #[serde(default)]
    pub kmin_degree: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstrainedConfig {
    /// Duration cap as a multiple of the free-space kinematic minimum.
    pub t_max_factor: f64,
}

/// Every numeric parameter of the benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub limits: LimitsConfig,
    pub domain: DomainConfig,
    pub world: WorldConfig,
    pub suite: SuiteConfig,
    pub run: RunConfig,
    pub constrained: ConstrainedConfig,
    pub planner: PlannerSection,
    pub optimizer: OptimizerConfig,
    pub rrt: RrtConfig,
}

/// The shipped default configuration.
pub const DEFAULT_CONFIG: &str = include_str!("default.toml");

impl Default for BenchConfig {
    fn default() -> Self {
        Self::from_toml(DEFAULT_CONFIG).expect("bundled default config parses")
    }
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        let cfg: Self = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        self.limits.to_limits(2)?;
        self.optimizer.validate()?;
        let d = &self.domain;
        if d.primitive_steps.is_empty() || d.primitive_steps.iter().any(|s| !(*s > 0.0)) {
            return Err(BenchError::Config("primitive steps must be positive".into()));
        }
        for (name, v) in [
            ("lattice_resolution", d.lattice_resolution),
            ("tunnel_half_width", d.tunnel_half_width),
            ("heuristic_resolution", d.heuristic_resolution),
            ("world.size", self.world.size),
            ("suite.sample_spacing", self.suite.sample_spacing),
            ("constrained.t_max_factor", self.constrained.t_max_factor),
        ] {
            if !(v > 0.0) {
                return Err(BenchError::Config(format!("{name} must be positive")));
            }
        }
        if self.run.budgets.iter().any(|&b| b == 0) {
            return Err(BenchError::Config("thread budgets must be at least 1".into()));
        }
        for p in &self.run.planners {
            super::PlannerId::parse(p)?;
        }
        if !(self.run.timeout_s >= 0.0) {
            return Err(BenchError::Config("timeout must be nonnegative".into()));
        }
        self.planner_config(1).validate()?;
        self.rrt.validate().map_err(BenchError::Config)?;
        Ok(())
    }

    /// Planner configuration at the given thread budget, with the shared
    /// optimizer and run timeout.
    pub fn planner_config(&self, threads: usize) -> PlannerConfig {
        PlannerConfig {
            threads,
            heuristic_weight: self.planner.heuristic_weight,
            timeout_s: self.run.timeout_s,
            optimizer: self.optimizer.clone(),
            kmin_degree: self.planner.kmin_degree,
            repair_retries: self.planner.repair_retries,
            safety_margin: self.planner.safety_margin,
        }
    }
}
