use crate::bspline::{clamped_knots, nonzero_basis, BSplineCurve, BoundingBox};
use crate::world::CollisionWorld;

use super::solver::{solve_al, AlSettings, AlStatus, Duration, Objective, SplineNlp, Verdict};
use super::{
    polyline_length, sample_positions, FailureReason, Limits, OptError, OptimizerConfig,
    SolveStatus, TrajectorySolution, Tunnel, TunnelWorld,
};

/// Interior point the trajectory must pass through at parameter `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waypoint {
    pub u: f64,
    pub point: Vec<f64>,
}

/// Region the relaxed trajectory must stay inside.
#[derive(Debug, Clone, Copy)]
pub enum Containment<'a> {
    /// A convex tunnel is imposed on the control points; a path tunnel is
    /// checked on the sampled curve.
    Tunnel(&'a Tunnel),
    World(&'a dyn CollisionWorld),
}

#[derive(Debug, Clone, PartialEq)]
pub enum RelaxationOutcome {
    Solved(TrajectorySolution),
    Infeasible { violation: f64 },
    IterationLimit { violation: f64 },
}

impl RelaxationOutcome {
    pub fn solution(&self) -> Option<&TrajectorySolution> {
        match self {
            Self::Solved(s) => Some(s),
            _ => None,
        }
    }
}

fn check_inputs(
    x1: &[f64],
    x2: &[f64],
    limits: &Limits,
    cfg: &OptimizerConfig,
    world_dim: usize,
) -> Result<(), OptError> {
    cfg.validate()?;
    limits.validate()?;
    let dim = x1.len();
    for got in [x2.len(), limits.dim(), world_dim] {
        if got != dim {
            return Err(OptError::DimensionMismatch { expected: dim, got });
        }
    }
    if x1.iter().chain(x2).any(|v| !v.is_finite()) {
        return Err(OptError::NonFinite);
    }
    Ok(())
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn greville(knots: &[f64], degree: usize, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| knots[i + 1..=i + degree].iter().sum::<f64>() / degree as f64)
        .collect()
}

/// Control points reproducing the piecewise-linear map through `nodes` at
/// parameters `params` (increasing, from 0 to 1).
fn polyline_points(nodes: &[Vec<f64>], params: &[f64], n: usize, degree: usize) -> Vec<f64> {
    let knots = clamped_knots(degree, n, 0.0, 1.0).expect("n > degree");
    let dim = nodes[0].len();
    let mut out = Vec::with_capacity(n * dim);
    for xi in greville(knots.as_slice(), degree, n) {
        let seg = params
            .windows(2)
            .position(|w| xi <= w[1])
            .unwrap_or(params.len() - 2);
        let (a, b) = (params[seg], params[seg + 1]);
        let f = if b > a { ((xi - a) / (b - a)).clamp(0.0, 1.0) } else { 0.0 };
        for d in 0..dim {
            out.push(nodes[seg][d] + f * (nodes[seg + 1][d] - nodes[seg][d]));
        }
    }
    out
}

fn initial_duration(x1: &[f64], x2: &[f64], limits: &Limits) -> f64 {
    let t = (0..x1.len())
        .map(|d| (x2[d] - x1[d]).abs() / limits.limit(1, d))
        .fold(0.0, f64::max);
    t.clamp(limits.t_min, limits.t_max)
}

/// Collision check of the sampled curve; `Err` carries the deepest sample.
fn validate_curve(
    points: &[f64],
    dim: usize,
    degree: usize,
    world: &dyn CollisionWorld,
    samples: usize,
) -> Result<(), Vec<f64>> {
    let curve = BSplineCurve::uniform(degree, points.to_vec(), dim, 0.0, 1.0).expect("valid");
    let pos = sample_positions(&curve, samples);
    let pts: Vec<&[f64]> = pos.chunks(dim).collect();
    let first_bad = pts
        .windows(2)
        .position(|w| !world.segment_free(w[0], w[1]))
        .or_else(|| (!world.point_free(pts[0])).then_some(0));
    let Some(bad) = first_bad else {
        return Ok(());
    };
    let (mut best, mut depth) = (None, 0.0);
    for p in &pts {
        let pen = world.penetration(p);
        if pen > depth {
            depth = pen;
            best = Some(p.to_vec());
        }
    }
    Err(best.unwrap_or_else(|| {
        let (a, b) = (pts[bad], pts[(bad + 1).min(pts.len() - 1)]);
        a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect()
    }))
}

struct Snapshot {
    points: Vec<f64>,
    duration: f64,
}

struct FreeProblem<'a> {
    x1: &'a [f64],
    x2: &'a [f64],
    limits: &'a Limits,
    world: &'a dyn CollisionWorld,
    cfg: &'a OptimizerConfig,
    n: usize,
    init_points: Option<Vec<f64>>,
    init_duration: Option<f64>,
    waypoints: &'a [Waypoint],
}

fn solution(
    x1: &[f64],
    x2: &[f64],
    points: Vec<f64>,
    degree: usize,
    duration: f64,
    cfg: &OptimizerConfig,
    status: SolveStatus,
    iterations: usize,
) -> TrajectorySolution {
    let dim = x1.len();
    let cost = cfg.w1 * duration + cfg.w2 * polyline_length(&points, dim);
    TrajectorySolution {
        curve: BSplineCurve::uniform(degree, points, dim, 0.0, 1.0).expect("valid"),
        duration,
        cost,
        status,
        start: x1.to_vec(),
        goal: x2.to_vec(),
        iterations,
        failure: None,
        collision_point: None,
    }
}

fn solve_free(p: FreeProblem<'_>) -> TrajectorySolution {
    let cfg = p.cfg;
    let dim = p.x1.len();
    let degree = cfg.degree;
    let limits = p.limits;
    if !p.world.point_free(p.x1) || !p.world.point_free(p.x2) {
        let pts = polyline_points(&[p.x1.to_vec(), p.x2.to_vec()], &[0.0, 1.0], p.n, degree);
        let mut sol = solution(p.x1, p.x2, pts, degree, limits.t_max, cfg, SolveStatus::Infeasible, 0);
        sol.failure = Some(FailureReason::Collision);
        sol.collision_point = Some(if p.world.point_free(p.x1) { p.x2 } else { p.x1 }.to_vec());
        return sol;
    }
    if p.waypoints.is_empty() && distance(p.x1, p.x2) <= 1e-12 {
        let mut sol = TrajectorySolution::stationary(p.x1, degree, limits, cfg.w1);
        sol.goal = p.x2.to_vec();
        return sol;
    }
    let scale = 1.0 + distance(p.x1, p.x2);
    let mut nlp = SplineNlp::new(
        p.n,
        degree,
        p.x1,
        p.x2,
        Objective::TimeLength {
            w1: cfg.w1,
            w2: cfg.w2,
            eps: 1e-6 * scale,
        },
        Duration::Free {
            t_min: limits.t_min,
            t_max: limits.t_max,
        },
        limits,
        None,
        cfg.feasibility_tol,
    );
    for w in p.waypoints {
        nlp.add_waypoint(w.u, w.point.clone());
    }
    let points0 = p.init_points.unwrap_or_else(|| {
        polyline_points(&[p.x1.to_vec(), p.x2.to_vec()], &[0.0, 1.0], p.n, degree)
    });
    let t0 = p
        .init_duration
        .unwrap_or_else(|| initial_duration(p.x1, p.x2, limits))
        .max(nlp.required_duration(&points0) * (1.0 + 1e-9))
        .clamp(limits.t_min, limits.t_max);
    let x0 = nlp.encode(&points0, t0);

    let mut last_feasible: Option<Snapshot> = None;
    let mut collided: Option<(Vec<f64>, Vec<f64>, f64)> = None;
    let mut last_points = Vec::new();
    let mut last_req = 0.0;
    let result = {
        let mut monitor = |x: &[f64]| {
            let mut pts = Vec::with_capacity(p.n * dim);
            nlp.points(x, &mut pts);
            let t = nlp.duration_of(x);
            if let Err(deep) = validate_curve(&pts, dim, degree, p.world, cfg.validation_samples) {
                collided = Some((pts, deep, t));
                return Verdict::Stop;
            }
            let t_req = nlp.required_duration(&pts);
            let t_feas = t.max(limits.t_min).max(t_req * (1.0 + 1e-12));
            let ok = t_feas <= limits.t_max && nlp.waypoint_error(&pts) <= cfg.waypoint_tol;
            if ok {
                last_feasible = Some(Snapshot {
                    points: pts.clone(),
                    duration: t_feas,
                });
            }
            last_req = t_req;
            last_points = pts;
            Verdict::Continue
        };
        solve_al(&nlp, x0, &AlSettings::from_config(cfg), &mut monitor)
    };

    let finish = |snap: Snapshot, status| {
        solution(p.x1, p.x2, snap.points, degree, snap.duration, cfg, status, result.iterations)
    };
    match result.status {
        AlStatus::Stopped => match last_feasible {
            Some(snap) => finish(snap, SolveStatus::CollisionTruncated),
            None => {
                let (pts, deep, t) = collided.expect("stop only on collision");
                let mut sol = solution(p.x1, p.x2, pts, degree, t, cfg, SolveStatus::Infeasible, result.iterations);
                sol.failure = Some(FailureReason::Collision);
                sol.collision_point = Some(deep);
                sol
            }
        },
        AlStatus::Converged | AlStatus::IterationLimit => match last_feasible {
            Some(snap) => finish(snap, SolveStatus::Converged),
            None => {
                let t = nlp.duration_of(&result.x);
                let mut sol = solution(
                    p.x1,
                    p.x2,
                    last_points,
                    degree,
                    t,
                    cfg,
                    SolveStatus::Infeasible,
                    result.iterations,
                );
                sol.failure = Some(if last_req > limits.t_max {
                    FailureReason::DurationExceeded
                } else {
                    FailureReason::IterationLimit
                });
                sol
            }
        },
    }
}

/// Minimizes `w1 T + w2 * polygon length` between `x1` and `x2` under the
/// derivative limits, checking collisions of every iterate against `world`.
/// `init` (same control-point count) seeds the solve when given.
pub fn optimize(
    x1: &[f64],
    x2: &[f64],
    limits: &Limits,
    world: &dyn CollisionWorld,
    cfg: &OptimizerConfig,
    init: Option<&TrajectorySolution>,
) -> Result<TrajectorySolution, OptError> {
    check_inputs(x1, x2, limits, cfg, world.dim())?;
    let (n, init_points, init_duration) = match init {
        Some(s) if s.curve.degree() == cfg.degree && s.curve.dim() == x1.len() => {
            let mut pts = s.curve.points_flat().to_vec();
            let dim = x1.len();
            let last = pts.len() - dim;
            pts[..dim].copy_from_slice(x1);
            pts[last..].copy_from_slice(x2);
            (s.curve.num_ctrl(), Some(pts), Some(s.duration))
        }
        _ => (cfg.num_ctrl, None, None),
    };
    Ok(solve_free(FreeProblem {
        x1,
        x2,
        limits,
        world,
        cfg,
        n,
        init_points,
        init_duration,
        waypoints: &[],
    }))
}

/// Concatenated control polygon (junction point kept once) on fresh uniform
/// clamped knots, with the summed duration. Polygons longer than
/// `cfg.max_ctrl` are refit by least squares.
pub fn concatenate_for_warm_start(
    prefix: &TrajectorySolution,
    suffix: &TrajectorySolution,
    cfg: &OptimizerConfig,
) -> Result<(BSplineCurve, f64), OptError> {
    let dim = prefix.curve.dim();
    if suffix.curve.dim() != dim {
        return Err(OptError::DimensionMismatch {
            expected: dim,
            got: suffix.curve.dim(),
        });
    }
    let end = prefix.curve.point(prefix.curve.num_ctrl() - 1);
    let begin = suffix.curve.point(0);
    let gap = distance(end, begin);
    if gap > 1e-6 {
        return Err(OptError::EndpointMismatch { gap });
    }
    let mut pts = prefix.curve.points_flat().to_vec();
    pts.extend_from_slice(&suffix.curve.points_flat()[dim..]);
    let degree = cfg.degree;
    let n = pts.len() / dim;
    let joined = BSplineCurve::uniform(degree.min(n - 1), pts, dim, 0.0, 1.0)?;
    let duration = prefix.duration + suffix.duration;
    if n <= cfg.max_ctrl && joined.degree() == degree {
        return Ok((joined, duration));
    }
    Ok((refit(&joined, cfg.max_ctrl.max(degree + 1), degree)?, duration))
}

/// Least-squares fit with pinned endpoints onto `m` control points.
fn refit(curve: &BSplineCurve, m: usize, degree: usize) -> Result<BSplineCurve, OptError> {
    let dim = curve.dim();
    let knots = clamped_knots(degree, m, 0.0, 1.0)?;
    let u = knots.as_slice();
    let samples = 4 * m;
    let first = curve.point(0).to_vec();
    let last = curve.point(curve.num_ctrl() - 1).to_vec();
    let free = m - 2;
    let mut ata = vec![0.0; free * free];
    let mut atb = vec![0.0; free * dim];
    let mut vals = [0.0; 32];
    for s_idx in 0..=samples {
        let t = s_idx as f64 / samples as f64;
        let target = curve.evaluate(t)?;
        let span = knots.find_span(t)?;
        nonzero_basis(span, t, degree, u, &mut vals);
        let cols: Vec<(usize, f64)> = (0..=degree).map(|r| (span - degree + r, vals[r])).collect();
        let mut rhs = target.clone();
        for &(c, b) in &cols {
            if c == 0 {
                (0..dim).for_each(|d| rhs[d] -= b * first[d]);
            } else if c == m - 1 {
                (0..dim).for_each(|d| rhs[d] -= b * last[d]);
            }
        }
        for &(ci, bi) in cols.iter().filter(|(c, _)| *c > 0 && *c < m - 1) {
            for &(cj, bj) in cols.iter().filter(|(c, _)| *c > 0 && *c < m - 1) {
                ata[(ci - 1) * free + cj - 1] += bi * bj;
            }
            for d in 0..dim {
                atb[(ci - 1) * dim + d] += bi * rhs[d];
            }
        }
    }
    let interior = cholesky_solve(&mut ata, free, &atb, dim)
        .ok_or_else(|| OptError::InvalidConfig("refit system is singular".into()))?;
    let mut pts = first;
    pts.extend(interior);
    pts.extend(last);
    Ok(BSplineCurve::uniform(degree, pts, dim, 0.0, 1.0)?)
}

fn cholesky_solve(a: &mut [f64], n: usize, b: &[f64], cols: usize) -> Option<Vec<f64>> {
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= a[j * n + k] * a[j * n + k];
        }
        if diag <= 1e-14 {
            return None;
        }
        let diag = diag.sqrt();
        a[j * n + j] = diag;
        for i in j + 1..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / diag;
        }
    }
    let mut x = b.to_vec();
    for c in 0..cols {
        for i in 0..n {
            let mut v = x[i * cols + c];
            for k in 0..i {
                v -= a[i * n + k] * x[k * cols + c];
            }
            x[i * cols + c] = v / a[i * n + i];
        }
        for i in (0..n).rev() {
            let mut v = x[i * cols + c];
            for k in i + 1..n {
                v -= a[k * n + i] * x[k * cols + c];
            }
            x[i * cols + c] = v / a[i * n + i];
        }
    }
    Some(x)
}

/// Re-optimizes the concatenation of `prefix` and `suffix` as one trajectory
/// from `prefix.start` to `suffix.goal`. When the concatenation is itself
/// feasible the result never costs more than it.
pub fn warm_optimize(
    prefix: &TrajectorySolution,
    suffix: &TrajectorySolution,
    limits: &Limits,
    world: &dyn CollisionWorld,
    cfg: &OptimizerConfig,
) -> Result<TrajectorySolution, OptError> {
    let x1 = prefix.start.as_slice();
    let x2 = suffix.goal.as_slice();
    check_inputs(x1, x2, limits, cfg, world.dim())?;
    let (joined, duration) = concatenate_for_warm_start(prefix, suffix, cfg)?;
    let dim = x1.len();
    let mut pts = joined.points_flat().to_vec();
    let last = pts.len() - dim;
    pts[..dim].copy_from_slice(x1);
    pts[last..].copy_from_slice(x2);
    let n = joined.num_ctrl();

    let init_sol = {
        let nlp = SplineNlp::new(
            n,
            cfg.degree,
            x1,
            x2,
            Objective::Spread { w: 1.0 },
            Duration::Fixed(duration),
            limits,
            None,
            cfg.feasibility_tol,
        );
        let t_feas = duration
            .max(limits.t_min)
            .max(nlp.required_duration(&pts) * (1.0 + 1e-12));
        let ok = t_feas <= limits.t_max
            && validate_curve(&pts, dim, cfg.degree, world, cfg.validation_samples).is_ok();
        ok.then(|| solution(x1, x2, pts.clone(), cfg.degree, t_feas, cfg, SolveStatus::Converged, 0))
    };

    let result = solve_free(FreeProblem {
        x1,
        x2,
        limits,
        world,
        cfg,
        n,
        init_points: Some(pts),
        init_duration: Some(duration.clamp(limits.t_min, limits.t_max)),
        waypoints: &[],
    });
    Ok(match init_sol {
        Some(mut init) if !result.is_feasible() || result.cost > init.cost => {
            init.iterations = result.iterations;
            init
        }
        _ => result,
    })
}

/// Like [`optimize`] with equality constraints `psi(u_w) = w` for each
/// waypoint. The default initial guess is the polyline through the waypoints.
pub fn optimize_with_waypoints(
    x1: &[f64],
    x2: &[f64],
    waypoints: &[Waypoint],
    limits: &Limits,
    world: &dyn CollisionWorld,
    cfg: &OptimizerConfig,
    init: Option<&TrajectorySolution>,
) -> Result<TrajectorySolution, OptError> {
    check_inputs(x1, x2, limits, cfg, world.dim())?;
    let mut wps = waypoints.to_vec();
    for w in &wps {
        if w.point.len() != x1.len() {
            return Err(OptError::DimensionMismatch {
                expected: x1.len(),
                got: w.point.len(),
            });
        }
        if !(w.u > 0.0 && w.u < 1.0) {
            return Err(OptError::InvalidConfig(format!("waypoint parameter {} outside (0, 1)", w.u)));
        }
    }
    wps.sort_by(|a, b| a.u.total_cmp(&b.u));
    let n = (cfg.num_ctrl + 2 * wps.len()).max(cfg.degree + 1);
    let (init_points, init_duration) = match init {
        Some(s) if s.curve.num_ctrl() == n && s.curve.degree() == cfg.degree => {
            (s.curve.points_flat().to_vec(), Some(s.duration))
        }
        _ => {
            let mut nodes = vec![x1.to_vec()];
            let mut params = vec![0.0];
            for w in &wps {
                nodes.push(w.point.clone());
                params.push(w.u);
            }
            nodes.push(x2.to_vec());
            params.push(1.0);
            (polyline_points(&nodes, &params, n, cfg.degree), None)
        }
    };
    Ok(solve_free(FreeProblem {
        x1,
        x2,
        limits,
        world,
        cfg,
        n,
        init_points: Some(init_points),
        init_duration,
        waypoints: &wps,
    }))
}

/// Convex relaxation: fixed duration `t_max`, squared-spread objective, and
/// containment in `region`.
pub fn solve_relaxation(
    x1: &[f64],
    x2: &[f64],
    limits: &Limits,
    region: Containment<'_>,
    cfg: &OptimizerConfig,
) -> Result<RelaxationOutcome, OptError> {
    solve_relaxation_from(x1, x2, limits, region, cfg, None)
}

/// [`solve_relaxation`] started from the interior control points `init`
/// (flattened, `cfg.num_ctrl - 2` points).
pub fn solve_relaxation_from(
    x1: &[f64],
    x2: &[f64],
    limits: &Limits,
    region: Containment<'_>,
    cfg: &OptimizerConfig,
    init: Option<&[f64]>,
) -> Result<RelaxationOutcome, OptError> {
    let dim = x1.len();
    let (bbox, world_owned, world): (Option<BoundingBox>, Option<TunnelWorld>, Option<&dyn CollisionWorld>) =
        match region {
            Containment::Tunnel(t) if t.is_convex() => (Some(t.segments[0].clone()), None, None),
            Containment::Tunnel(t) => (None, Some(TunnelWorld::new(t.clone())), None),
            Containment::World(w) => (None, None, Some(w)),
        };
    let world: Option<&dyn CollisionWorld> = match &world_owned {
        Some(w) => Some(w),
        None => world,
    };
    check_inputs(x1, x2, limits, cfg, world.map_or(dim, |w| w.dim()))?;
    if let Some(bb) = &bbox {
        if bb.dim() != dim {
            return Err(OptError::DimensionMismatch {
                expected: dim,
                got: bb.dim(),
            });
        }
        if !bb.contains(x1) || !bb.contains(x2) {
            return Ok(RelaxationOutcome::Infeasible { violation: f64::INFINITY });
        }
    }
    if let Some(w) = world {
        if !w.point_free(x1) || !w.point_free(x2) {
            return Ok(RelaxationOutcome::Infeasible { violation: f64::INFINITY });
        }
    }
    let n = cfg.num_ctrl;
    let w = if cfg.w2 > 0.0 { cfg.w2 } else { 1.0 };
    let feas_tol = cfg.feasibility_tol.min(1e-9);
    let nlp = SplineNlp::new(
        n,
        cfg.degree,
        x1,
        x2,
        Objective::Spread { w },
        Duration::Fixed(limits.t_max),
        limits,
        bbox,
        feas_tol,
    );
    let x0 = match init {
        Some(v) if v.len() == (n - 2) * dim => v.to_vec(),
        Some(v) => {
            return Err(OptError::DimensionMismatch {
                expected: (n - 2) * dim,
                got: v.len(),
            })
        }
        None => {
            let pts = polyline_points(&[x1.to_vec(), x2.to_vec()], &[0.0, 1.0], n, cfg.degree);
            nlp.encode(&pts, limits.t_max)
        }
    };
    let settings = AlSettings {
        max_iters: cfg.max_iters.max(4000),
        max_outer: cfg.max_outer_iters.max(40),
        grad_tol: 1e-11,
        feas_tol,
        rho0: cfg.penalty_init,
        rho_growth: cfg.penalty_growth,
        rho_max: cfg.penalty_max,
    };
    let result = solve_al(&nlp, x0, &settings, &mut |_| Verdict::Continue);
    let mut pts = Vec::new();
    nlp.points(&result.x, &mut pts);
    let limits_ok = nlp.required_duration(&pts) <= limits.t_max && nlp.inside_containment(&pts);
    match result.status {
        AlStatus::Converged | AlStatus::Stopped if limits_ok => {
            if let Some(w) = world {
                if validate_curve(&pts, dim, cfg.degree, w, 10 * cfg.validation_samples).is_err() {
                    return Ok(RelaxationOutcome::Infeasible {
                        violation: result.violation,
                    });
                }
            }
            let mut sol = solution(
                x1,
                x2,
                pts,
                cfg.degree,
                limits.t_max,
                cfg,
                SolveStatus::Converged,
                result.iterations,
            );
            sol.cost = nlp.objective_value(sol.curve.points_flat(), limits.t_max);
            Ok(RelaxationOutcome::Solved(sol))
        }
        _ if result.violation > 1e-4 => Ok(RelaxationOutcome::Infeasible {
            violation: result.violation,
        }),
        _ => Ok(RelaxationOutcome::IterationLimit {
            violation: result.violation,
        }),
    }
}
