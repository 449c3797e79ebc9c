use std::io::{BufRead, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};

use serde::{Deserialize, Serialize};

use crate::baselines::{insat_sequential, pbirrt_postprocess, search_then_optimize, RrtConfig};
use crate::bspline::{BSplineCurve, KnotVector};
use crate::planner::{plan, PlanResult, PlannerConfig};
use crate::trajopt::{SolveStatus, TrajectorySolution};

use super::config::BenchConfig;
use super::suite::Suite;
use super::{BenchError, PlannerId};

pub const RECORDS_FORMAT: &str = "pinsat-records";
pub const RECORDS_VERSION: u32 = 1;

/// Serializable form of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredTrajectory {
    pub degree: usize,
    pub knots: Vec<f64>,
    pub control_points: Vec<Vec<f64>>,
    pub duration: f64,
    pub cost: f64,
}

impl StoredTrajectory {
    pub fn from_solution(sol: &TrajectorySolution) -> Self {
        Self {
            degree: sol.curve.degree(),
            knots: sol.curve.knots().as_slice().to_vec(),
            control_points: sol.curve.control_points(),
            duration: sol.duration,
            cost: sol.cost,
        }
    }

    pub fn curve(&self) -> Result<BSplineCurve, BenchError> {
        let dim = self.control_points.first().map_or(0, Vec::len);
        let knots = KnotVector::new(self.knots.clone(), self.degree).map_err(|e| BenchError::Format(e.to_string()))?;
        BSplineCurve::new(knots, self.control_points.concat(), dim).map_err(|e| BenchError::Format(e.to_string()))
    }

    pub fn to_solution(&self) -> Result<TrajectorySolution, BenchError> {
        let curve = self.curve()?;
        let start = curve.point(0).to_vec();
        let goal = curve.point(curve.num_ctrl() - 1).to_vec();
        Ok(TrajectorySolution {
            curve,
            duration: self.duration,
            cost: self.cost,
            status: SolveStatus::Converged,
            start,
            goal,
            iterations: 0,
            failure: None,
            collision_point: None,
        })
    }
}

/// One planner run on one problem at one thread budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub problem_id: usize,
    pub planner: String,
    pub threads: usize,
    pub success: bool,
    pub status: String,
    pub wall_time_s: f64,
    pub heuristic_time_s: f64,
    /// Present exactly when `success` is set.
    pub cost: Option<f64>,
    pub optimizer_calls: usize,
    pub expansions: usize,
    pub evaluations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<StoredTrajectory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl BenchmarkRecord {
    fn failure(problem_id: usize, planner: PlannerId, threads: usize, status: &str, error: String) -> Self {
        Self {
            problem_id,
            planner: planner.as_str().into(),
            threads,
            success: false,
            status: status.into(),
            wall_time_s: 0.0,
            heuristic_time_s: 0.0,
            cost: None,
            optimizer_calls: 0,
            expansions: 0,
            evaluations: 0,
            trajectory: None,
            error: Some(error),
        }
    }

    fn from_result(problem_id: usize, planner: PlannerId, threads: usize, r: &PlanResult) -> Self {
        let success = r.solved() && r.cost().is_finite();
        Self {
            problem_id,
            planner: planner.as_str().into(),
            threads,
            success,
            status: serde_json::to_value(r.status)
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_default(),
            wall_time_s: r.stats.wall_time_s,
            heuristic_time_s: r.stats.heuristic_time_s,
            cost: success.then(|| r.cost()),
            optimizer_calls: r.stats.optimizer_calls,
            expansions: r.stats.expansions,
            evaluations: r.stats.evaluations,
            trajectory: if success {
                r.trajectory.as_ref().map(StoredTrajectory::from_solution)
            } else {
                None
            },
            error: None,
        }
    }
}

/// First line of a records file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordsHeader {
    pub format: String,
    pub version: u32,
    pub suite_seed: u64,
    pub problems: usize,
}

impl RecordsHeader {
    pub fn for_suite(suite: &Suite) -> Self {
        Self {
            format: RECORDS_FORMAT.into(),
            version: RECORDS_VERSION,
            suite_seed: suite.seed,
            problems: suite.problems.len(),
        }
    }
}

pub fn write_records<W: Write>(out: &mut W, header: &RecordsHeader, records: &[BenchmarkRecord]) -> Result<(), BenchError> {
    let io = |e: std::io::Error| BenchError::Io(e.to_string());
    writeln!(out, "{}", serde_json::to_string(header).expect("header serializes")).map_err(io)?;
    for r in records {
        writeln!(out, "{}", serde_json::to_string(r).expect("record serializes")).map_err(io)?;
    }
    Ok(())
}

pub fn read_records<R: BufRead>(input: R) -> Result<(RecordsHeader, Vec<BenchmarkRecord>), BenchError> {
    let mut lines = input.lines().enumerate().filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
    let (_, first) = lines.next().ok_or_else(|| BenchError::Format("records file is empty".into()))?;
    let first = first.map_err(|e| BenchError::Io(e.to_string()))?;
    let header: RecordsHeader =
        serde_json::from_str(&first).map_err(|e| BenchError::Format(format!("records header: {e}")))?;
    if header.format != RECORDS_FORMAT || header.version != RECORDS_VERSION {
        return Err(BenchError::Format(format!(
            "unsupported records format {} v{}",
            header.format, header.version
        )));
    }
    let mut records = Vec::new();
    for (n, line) in lines {
        let line = line.map_err(|e| BenchError::Io(e.to_string()))?;
        records.push(serde_json::from_str(&line).map_err(|e| BenchError::Format(format!("record on line {}: {e}", n + 1)))?);
    }
    Ok((header, records))
}

/// Runs one planner on one problem.
pub fn run_one(
    suite: &Suite,
    problem_id: usize,
    planner: PlannerId,
    threads: usize,
    cfg: &PlannerConfig,
    rrt: &RrtConfig,
) -> BenchmarkRecord {
    let Some(spec) = suite.problem(problem_id) else {
        return BenchmarkRecord::failure(problem_id, planner, threads, "error", "unknown problem".into());
    };
    let instance = match suite.instance(spec) {
        Ok(p) => p,
        Err(e) => return BenchmarkRecord::failure(problem_id, planner, threads, "error", e.to_string()),
    };
    let cfg = cfg.with_threads(threads);
    let rrt = RrtConfig {
        seed: rrt.seed.wrapping_add(problem_id as u64 * 1_000_003),
        ..rrt.clone()
    };
    let outcome = catch_unwind(AssertUnwindSafe(|| match planner {
        PlannerId::Pinsat => plan(&instance, &cfg),
        PlannerId::Insat => insat_sequential(&instance, &cfg),
        PlannerId::SearchThenOptimize => search_then_optimize(&instance, &cfg),
        PlannerId::Pbirrt => pbirrt_postprocess(&instance, &cfg, &rrt),
    }));
    match outcome {
        Ok(Ok(r)) => BenchmarkRecord::from_result(problem_id, planner, threads, &r),
        Ok(Err(e)) => BenchmarkRecord::failure(problem_id, planner, threads, "error", e.to_string()),
        Err(_) => BenchmarkRecord::failure(problem_id, planner, threads, "crashed", "planner panicked".into()),
    }
}

/// One record per (problem, planner, budget), in that nesting order. The
/// sequential planner ignores the budget.
pub fn run_suite(
    suite: &Suite,
    cfg: &BenchConfig,
    planners: &[PlannerId],
    budgets: &[usize],
    mut progress: impl FnMut(&BenchmarkRecord),
) -> Result<Vec<BenchmarkRecord>, BenchError> {
    let mut pcfg = cfg.planner_config(1);
    if pcfg.kmin_degree.is_none() && planners.iter().any(|p| matches!(p, PlannerId::Pinsat | PlannerId::Insat)) {
        if let Some(first) = suite.problems.first() {
            pcfg.kmin_degree = Some(crate::planner::kmin_degree(&suite.instance(first)?)?);
        }
    }
    let mut out = Vec::with_capacity(suite.problems.len() * planners.len() * budgets.len());
    for p in &suite.problems {
        for &planner in planners {
            for &b in budgets {
                let r = run_one(suite, p.id, planner, b, &pcfg, &cfg.rrt);
                progress(&r);
                out.push(r);
            }
        }
    }
    Ok(out)
}
