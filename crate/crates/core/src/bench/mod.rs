//! Benchmark harness: suite generation on the bar world, planner runs across
//! thread budgets, aggregation and the on-disk formats.
//!
//! Files:
//! * suite: pretty JSON, `format = "pinsat-suite"`, with the environment
//!   (bounds, bars, obstacles), limits, graph domain and problems.
//! * records: JSON lines; the first line is a header with
//!   `format = "pinsat-records"`, then one record per run.
//! * summary: pretty JSON, `format = "pinsat-summary"`.
//! * plot data: pretty JSON, `format = "pinsat-plot-data"`, with scaling
//!   series and densely sampled trajectories.

mod aggregate;
mod config;
mod run;
mod suite;
mod validate;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GoalRegion, ProblemError};
use crate::planner::PlanError;
use crate::trajopt::{time_scaled_derivative, KminError, OptError};

pub use aggregate::{aggregate, scaling_series, MeanStd, ScalingSeries, StatsFilter, Summary, SummaryRow, SUMMARY_FORMAT};
pub use config::{
    BenchConfig, ConstrainedConfig, DomainConfig, LimitsConfig, PlannerSection, RunConfig, SuiteConfig, WorldConfig,
    DEFAULT_CONFIG,
};
pub use run::{read_records, run_one, run_suite, write_records, BenchmarkRecord, RecordsHeader, StoredTrajectory, RECORDS_FORMAT};
pub use suite::{duration_constrained, free_space_min_duration, sample_suite, EnvironmentSpec, ProblemSpec, Suite, SUITE_FORMAT};
pub use validate::{validate_trajectory, ValidationReport, BOUNDARY_SLACK, DERIVATIVE_SLACK};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error("could not sample problem {problem} within {attempts} attempts")]
    SamplingExhausted { problem: usize, attempts: usize },
    #[error("no records to aggregate")]
    EmptyRecords,
    #[error("unknown planner `{0}`")]
    UnknownPlanner(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Optimizer(#[from] OptError),
    #[error(transparent)]
    Kmin(#[from] KminError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerId {
    Pinsat,
    Insat,
    SearchThenOptimize,
    Pbirrt,
}

impl PlannerId {
    pub const ALL: [PlannerId; 4] = [Self::Pinsat, Self::Insat, Self::SearchThenOptimize, Self::Pbirrt];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pinsat => "pinsat",
            Self::Insat => "insat",
            Self::SearchThenOptimize => "search_then_optimize",
            Self::Pbirrt => "pbirrt",
        }
    }

    pub fn parse(s: &str) -> Result<Self, BenchError> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| BenchError::UnknownPlanner(s.into()))
    }
}

/// Validation of every successful record against its problem, on the true
/// world with `samples` sample intervals.
pub fn validate_records(suite: &Suite, records: &[BenchmarkRecord], samples: usize) -> Result<Vec<(usize, ValidationReport)>, BenchError> {
    let world = suite.world();
    let mut out = Vec::new();
    for (i, r) in records.iter().enumerate() {
        if !r.success {
            continue;
        }
        let spec = suite
            .problem(r.problem_id)
            .ok_or_else(|| BenchError::Format(format!("record {i} names unknown problem {}", r.problem_id)))?;
        let traj = r
            .trajectory
            .as_ref()
            .ok_or_else(|| BenchError::Format(format!("successful record {i} has no trajectory")))?;
        let report = validate_trajectory(
            &traj.curve()?,
            traj.duration,
            &spec.start,
            &GoalRegion::new(spec.goal.clone(), spec.goal_tolerance),
            &suite.limits_for(spec)?,
            world.as_ref(),
            samples,
        )?;
        out.push((i, report));
    }
    Ok(out)
}

/// Densely sampled trajectory for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPlot {
    pub problem_id: usize,
    pub planner: String,
    pub threads: usize,
    pub duration: f64,
    pub control_points: Vec<Vec<f64>>,
    pub time: Vec<f64>,
    pub position: Vec<Vec<f64>>,
    /// `derivatives[j][i]` is the (j+1)-th time derivative at `time[i]`.
    pub derivatives: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub format: String,
    pub version: u32,
    pub environment: EnvironmentSpec,
    pub limits: LimitsConfig,
    pub scaling: Vec<ScalingSeries>,
    pub trajectories: Vec<TrajectoryPlot>,
}

pub const PLOT_FORMAT: &str = "pinsat-plot-data";

/// Scaling series plus the trajectories of up to `max_trajectories`
/// successful records.
pub fn plot_data(suite: &Suite, records: &[BenchmarkRecord], summary: &Summary, max_trajectories: usize) -> Result<PlotData, BenchError> {
    let mut trajectories = Vec::new();
    for r in records.iter().filter(|r| r.success).take(max_trajectories) {
        let Some(st) = &r.trajectory else { continue };
        let curve = st.curve()?;
        let samples = 200;
        let mut time = Vec::with_capacity(samples + 1);
        let mut position = Vec::with_capacity(samples + 1);
        let orders = curve.degree().min(3);
        let mut derivatives = vec![Vec::with_capacity(samples + 1); orders];
        for i in 0..=samples {
            let u = i as f64 / samples as f64;
            time.push(u * st.duration);
            position.push(curve.evaluate(u).map_err(|e| BenchError::Format(e.to_string()))?);
            for (j, d) in derivatives.iter_mut().enumerate() {
                d.push(time_scaled_derivative(&curve, st.duration, j + 1, u)?);
            }
        }
        trajectories.push(TrajectoryPlot {
            problem_id: r.problem_id,
            planner: r.planner.clone(),
            threads: r.threads,
            duration: st.duration,
            control_points: st.control_points.clone(),
            time,
            position,
            derivatives,
        });
    }
    Ok(PlotData {
        format: PLOT_FORMAT.into(),
        version: 1,
        environment: suite.environment.clone(),
        limits: suite.limits.clone(),
        scaling: scaling_series(summary),
        trajectories,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planner_ids_roundtrip() {
        for p in PlannerId::ALL {
            assert_eq!(PlannerId::parse(p.as_str()).unwrap(), p);
        }
        assert!(PlannerId::parse("astar").is_err());
    }

    #[test]
    fn default_config_is_valid() {
        let c = BenchConfig::default();
        assert_eq!(c.run.budgets, vec![1, 2, 4, 8]);
        assert_eq!(c.suite.problems, 100);
    }

    #[test]
    fn malformed_config_is_rejected() {
        assert!(matches!(BenchConfig::from_toml("[limits]\nvelocity = 'fast'"), Err(BenchError::Config(_))));
        let bad = DEFAULT_CONFIG.replace("tunnel_half_width = 0.3", "tunnel_half_width = -1.0");
        assert!(BenchConfig::from_toml(&bad).is_err());
    }
}
