//! Python bindings: spline evaluation, single trajectory solves, k_min,
//! suite generation, planning on suite problems and aggregation.

use pinsat::bench::{aggregate as aggregate_records, read_records, run_one, sample_suite, BenchConfig, BenchError, PlannerId, StatsFilter, Suite};
use pinsat::trajopt::{compute_kmin, optimize as optimize_core, KminConfig, Limits, TrajectorySolution};
use pinsat::world::{point2d_world, Obstacle};
use pinsat::{BSplineCurve, BoundingBox};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn bench_err(e: BenchError) -> PyErr {
    match e {
        BenchError::Config(_) | BenchError::UnknownPlanner(_) | BenchError::Format(_) => value_err(e),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn load_config(config_toml: Option<&str>) -> PyResult<BenchConfig> {
    match config_toml {
        Some(t) => BenchConfig::from_toml(t).map_err(bench_err),
        None => Ok(BenchConfig::default()),
    }
}

/// Clamped B-spline curve.
#[pyclass(name = "BSpline", module = "pinsat_py")]
#[derive(Clone)]
struct PyBSpline {
    inner: BSplineCurve,
}

#[pymethods]
impl PyBSpline {
    /// Uniform clamped spline on `[t0, tf]` through the given control points.
    #[new]
    #[pyo3(signature = (degree, control_points, t0 = 0.0, tf = 1.0))]
    fn new(degree: usize, control_points: Vec<Vec<f64>>, t0: f64, tf: f64) -> PyResult<Self> {
        BSplineCurve::from_points(degree, &control_points, t0, tf)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[getter]
    fn degree(&self) -> usize {
        self.inner.degree()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn knots(&self) -> Vec<f64> {
        self.inner.knots().as_slice().to_vec()
    }

    #[getter]
    fn control_points(&self) -> Vec<Vec<f64>> {
        self.inner.control_points()
    }

    fn evaluate(&self, t: f64) -> PyResult<Vec<f64>> {
        self.inner.evaluate(t).map_err(value_err)
    }

    /// Parametric derivative of order `j` as a new spline.
    fn derivative(&self, j: usize) -> PyResult<Self> {
        self.inner.derivative_curve(j).map(|inner| Self { inner }).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("BSpline(degree={}, num_ctrl={}, dim={})", self.inner.degree(), self.inner.num_ctrl(), self.inner.dim())
    }
}

/// Optimized trajectory: a spline on `[0, 1]` stretched over `duration`.
#[pyclass(name = "Trajectory", module = "pinsat_py")]
#[derive(Clone)]
struct PyTrajectory {
    inner: TrajectorySolution,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn duration(&self) -> f64 {
        self.inner.duration
    }

    #[getter]
    fn cost(&self) -> f64 {
        self.inner.cost
    }

    #[getter]
    fn status(&self) -> String {
        format!("{:?}", self.inner.status)
    }

    #[getter]
    fn feasible(&self) -> bool {
        self.inner.is_feasible()
    }

    #[getter]
    fn curve(&self) -> PyBSpline {
        PyBSpline {
            inner: self.inner.curve.clone(),
        }
    }

    /// Positions at `n + 1` evenly spaced times.
    fn sample(&self, n: usize) -> PyResult<Vec<Vec<f64>>> {
        let n = n.max(1);
        (0..=n)
            .map(|i| self.inner.curve.evaluate(i as f64 / n as f64).map_err(value_err))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Trajectory(status={:?}, duration={:.4}, cost={:.4})",
            self.inner.status, self.inner.duration, self.inner.cost
        )
    }
}

/// Outcome of one planner run.
#[pyclass(name = "PlanRecord", module = "pinsat_py", get_all)]
struct PyPlanRecord {
    problem_id: usize,
    planner: String,
    threads: usize,
    success: bool,
    status: String,
    wall_time_s: f64,
    cost: Option<f64>,
    optimizer_calls: usize,
    expansions: usize,
    trajectory: Option<PyTrajectory>,
    json: String,
}

#[pymethods]
impl PyPlanRecord {
    fn __repr__(&self) -> String {
        format!(
            "PlanRecord(problem_id={}, planner={:?}, threads={}, status={:?}, cost={:?})",
            self.problem_id, self.planner, self.threads, self.status, self.cost
        )
    }
}

/// Single trajectory solve between two points of a 2D world.
///
/// `rects` are `(xmin, ymin, xmax, ymax)` and `discs` are `(cx, cy, r)`.
#[pyfunction]
#[pyo3(signature = (start, goal, limits, t_min, t_max, rects = vec![], discs = vec![], bounds = (0.0, 0.0, 10.0, 10.0), config_toml = None))]
#[allow(clippy::too_many_arguments)]
fn optimize(
    start: Vec<f64>,
    goal: Vec<f64>,
    limits: Vec<f64>,
    t_min: f64,
    t_max: f64,
    rects: Vec<(f64, f64, f64, f64)>,
    discs: Vec<(f64, f64, f64)>,
    bounds: (f64, f64, f64, f64),
    config_toml: Option<&str>,
) -> PyResult<PyTrajectory> {
    let cfg = load_config(config_toml)?;
    let lim = Limits::uniform(2, &limits, t_min, t_max).map_err(value_err)?;
    let mut obstacles: Vec<Obstacle> = rects
        .into_iter()
        .map(|(a, b, c, d)| Obstacle::Rect { min: [a, b], max: [c, d] })
        .collect();
    obstacles.extend(discs.into_iter().map(|(x, y, r)| Obstacle::Disc { center: [x, y], radius: r }));
    let bb = BoundingBox::new(vec![bounds.0, bounds.1], vec![bounds.2, bounds.3]).ok_or_else(|| value_err("empty bounds"))?;
    let world = point2d_world(obstacles, bb);
    optimize_core(&start, &goal, &lim, &world, &cfg.optimizer, None)
        .map(|inner| PyTrajectory { inner })
        .map_err(value_err)
}

/// Minimum spline degree over the configured action primitives.
#[pyfunction]
#[pyo3(signature = (config_toml = None))]
fn kmin(config_toml: Option<&str>) -> PyResult<usize> {
    let cfg = load_config(config_toml)?;
    let domain = cfg.domain.to_domain();
    let limits = cfg.limits.to_limits(2).map_err(bench_err)?;
    let tunnels: Vec<_> = domain.actions.iter().map(|a| a.tunnel(domain.tunnel_half_width)).collect();
    compute_kmin(&tunnels, &limits, &KminConfig::default())
        .map(|r| r.k_min)
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// The bundled benchmark configuration as TOML.
#[pyfunction]
fn default_config() -> &'static str {
    pinsat::bench::DEFAULT_CONFIG
}

/// Samples a suite and returns it as JSON.
#[pyfunction]
#[pyo3(signature = (seed = None, problems = None, constrained = false, config_toml = None))]
fn generate_suite(seed: Option<u64>, problems: Option<usize>, constrained: bool, config_toml: Option<&str>) -> PyResult<String> {
    let mut cfg = load_config(config_toml)?;
    if let Some(s) = seed {
        cfg.suite.seed = s;
    }
    if let Some(n) = problems {
        cfg.suite.problems = n;
    }
    let mut suite = sample_suite(&cfg).map_err(bench_err)?;
    if constrained {
        suite = pinsat::bench::duration_constrained(&suite, cfg.constrained.t_max_factor).map_err(bench_err)?;
    }
    Ok(suite.to_json())
}

/// Runs one planner on one problem of a JSON suite.
#[pyfunction]
#[pyo3(signature = (suite_json, problem_id, planner = "pinsat", threads = 1, timeout_s = None, config_toml = None))]
fn plan(
    py: Python<'_>,
    suite_json: &str,
    problem_id: usize,
    planner: &str,
    threads: usize,
    timeout_s: Option<f64>,
    config_toml: Option<&str>,
) -> PyResult<PyPlanRecord> {
    let mut cfg = load_config(config_toml)?;
    if let Some(t) = timeout_s {
        cfg.run.timeout_s = t;
    }
    let suite = Suite::from_json(suite_json).map_err(bench_err)?;
    let id = PlannerId::parse(planner).map_err(bench_err)?;
    if suite.problem(problem_id).is_none() {
        return Err(value_err(format!("suite has no problem {problem_id}")));
    }
    let pcfg = cfg.planner_config(threads);
    let rec = py.allow_threads(|| run_one(&suite, problem_id, id, threads, &pcfg, &cfg.rrt));
    let trajectory = match &rec.trajectory {
        Some(t) => Some(PyTrajectory {
            inner: t.to_solution().map_err(bench_err)?,
        }),
        None => None,
    };
    Ok(PyPlanRecord {
        json: serde_json::to_string(&rec).map_err(value_err)?,
        problem_id: rec.problem_id,
        planner: rec.planner,
        threads: rec.threads,
        success: rec.success,
        status: rec.status,
        wall_time_s: rec.wall_time_s,
        cost: rec.cost,
        optimizer_calls: rec.optimizer_calls,
        expansions: rec.expansions,
        trajectory,
    })
}

/// Aggregates a JSON-lines records document (header line first) into a
/// JSON summary. `filter` is "common" or "own".
#[pyfunction]
#[pyo3(signature = (records_jsonl, filter = "common"))]
fn aggregate(records_jsonl: &str, filter: &str) -> PyResult<String> {
    let filter = match filter {
        "common" => StatsFilter::CommonSolved,
        "own" => StatsFilter::OwnSolved,
        other => return Err(value_err(format!("unknown filter `{other}`"))),
    };
    let (_, records) = read_records(records_jsonl.as_bytes()).map_err(bench_err)?;
    aggregate_records(&records, filter).map(|s| s.to_json()).map_err(bench_err)
}

#[pymodule]
fn pinsat_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBSpline>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PyPlanRecord>()?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(kmin, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(generate_suite, m)?)?;
    m.add_function(wrap_pyfunction!(plan, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate, m)?)?;
    Ok(())
}
