//! Full-dimensional B-spline trajectory optimization.
//!
//! Trajectories are clamped B-splines `psi(u)` in the trajectory coordinate
//! `u in [0, 1]`, executed over a duration `T` via `phi(t) = psi(t / T)`, so
//! the `j`-th time derivative is `psi^(j)(u) / T^j`. Derivative limits are
//! enforced on the derivative control points, which bounds the whole curve.

mod feasibility;
mod kmin;
mod optimize;
mod solver;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bspline::{BSplineCurve, BoundingBox, Reconstruction, SplineError};
use crate::world::CollisionWorld;

pub use feasibility::{check_feasibility, FeasibilityReport, FeasibilityTolerance};
pub use kmin::{
    compute_kmin, kmin_feasible, kmin_lp, kmin_witness, KminConfig, KminError, KminResult, KminWitness, SignPattern,
};
pub use optimize::{
    concatenate_for_warm_start, optimize, optimize_with_waypoints, solve_relaxation,
    solve_relaxation_from, warm_optimize, Containment, RelaxationOutcome, Waypoint,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite boundary state")]
    NonFinite,
    #[error("{0} boundary state is in collision")]
    BoundaryInCollision(&'static str),
    #[error("prefix ends {gap} away from where the suffix starts")]
    EndpointMismatch { gap: f64 },
    #[error("invalid limits: {0}")]
    InvalidLimits(String),
    #[error("invalid optimizer config: {0}")]
    InvalidConfig(String),
    #[error("derivative order {0} not supported (1..=3)")]
    UnsupportedOrder(usize),
    #[error(transparent)]
    Spline(#[from] SplineError),
}

/// Componentwise derivative limits and the duration window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    /// `deriv_limits[j - 1][d]` bounds `|d^j phi_d / dt^j|`, for `j = 1..=gamma`.
    pub deriv_limits: Vec<Vec<f64>>,
    pub t_min: f64,
    pub t_max: f64,
}

impl Limits {
    pub fn new(deriv_limits: Vec<Vec<f64>>, t_min: f64, t_max: f64) -> Result<Self, OptError> {
        let limits = Self {
            deriv_limits,
            t_min,
            t_max,
        };
        limits.validate()?;
        Ok(limits)
    }

    /// Same bound in every dimension for each order.
    pub fn uniform(dim: usize, per_order: &[f64], t_min: f64, t_max: f64) -> Result<Self, OptError> {
        Self::new(
            per_order.iter().map(|&l| vec![l; dim]).collect(),
            t_min,
            t_max,
        )
    }

    pub fn validate(&self) -> Result<(), OptError> {
        if self.deriv_limits.is_empty() || self.deriv_limits.len() > 3 {
            return Err(OptError::InvalidLimits(format!(
                "gamma must be in 1..=3, got {}",
                self.deriv_limits.len()
            )));
        }
        let dim = self.deriv_limits[0].len();
        if dim == 0 {
            return Err(OptError::InvalidLimits("empty limit vector".into()));
        }
        for (j, row) in self.deriv_limits.iter().enumerate() {
            if row.len() != dim {
                return Err(OptError::InvalidLimits(format!(
                    "order {} has {} entries, expected {dim}",
                    j + 1,
                    row.len()
                )));
            }
            if row.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
                return Err(OptError::InvalidLimits(format!(
                    "order {} limits must be positive and finite",
                    j + 1
                )));
            }
        }
        if !(self.t_min > 0.0 && self.t_min <= self.t_max && self.t_max.is_finite()) {
            return Err(OptError::InvalidLimits(format!(
                "need 0 < t_min <= t_max, got [{}, {}]",
                self.t_min, self.t_max
            )));
        }
        Ok(())
    }

    pub fn gamma(&self) -> usize {
        self.deriv_limits.len()
    }

    pub fn dim(&self) -> usize {
        self.deriv_limits[0].len()
    }

    pub fn limit(&self, order: usize, d: usize) -> f64 {
        self.deriv_limits[order - 1][d]
    }
}

/// Convex corridor around a low-dimensional edge (or the union of corridors
/// along a path). Each segment is an axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tunnel {
    pub edge: (Vec<f64>, Vec<f64>),
    pub half_width: f64,
    pub segments: Vec<BoundingBox>,
}

impl Tunnel {
    /// Box enclosing the straight segment `from -> to`, grown by `half_width`.
    pub fn around_edge(from: &[f64], to: &[f64], half_width: f64) -> Self {
        let bb = BoundingBox::around([from, to]).expect("two points").expanded(half_width);
        Self {
            edge: (from.to_vec(), to.to_vec()),
            half_width,
            segments: vec![bb],
        }
    }

    /// Union of edge tunnels along a waypoint path.
    pub fn around_path(points: &[Vec<f64>], half_width: f64) -> Self {
        let segments = points
            .windows(2)
            .map(|w| {
                BoundingBox::around([w[0].as_slice(), w[1].as_slice()])
                    .expect("two points")
                    .expanded(half_width)
            })
            .collect();
        Self {
            edge: (
                points.first().cloned().unwrap_or_default(),
                points.last().cloned().unwrap_or_default(),
            ),
            half_width,
            segments,
        }
    }

    /// The same tunnel shape moved so its edge starts at `origin`.
    pub fn translated_to(&self, origin: &[f64]) -> Self {
        let shift: Vec<f64> = origin.iter().zip(&self.edge.0).map(|(o, e)| o - e).collect();
        let mv = |p: &[f64]| p.iter().zip(&shift).map(|(x, s)| x + s).collect::<Vec<_>>();
        Self {
            edge: (mv(&self.edge.0), mv(&self.edge.1)),
            half_width: self.half_width,
            segments: self
                .segments
                .iter()
                .map(|b| BoundingBox {
                    lower: mv(&b.lower),
                    upper: mv(&b.upper),
                })
                .collect(),
        }
    }

    pub fn is_convex(&self) -> bool {
        self.segments.len() == 1
    }

    fn hull(&self) -> BoundingBox {
        let mut bb = self.segments[0].clone();
        for s in &self.segments[1..] {
            for d in 0..bb.dim() {
                bb.lower[d] = bb.lower[d].min(s.lower[d]);
                bb.upper[d] = bb.upper[d].max(s.upper[d]);
            }
        }
        bb
    }
}

/// A tunnel used as the free space of a collision query.
#[derive(Debug, Clone)]
pub struct TunnelWorld {
    tunnel: Tunnel,
    hull: BoundingBox,
}

impl TunnelWorld {
    pub fn new(tunnel: Tunnel) -> Self {
        let hull = tunnel.hull();
        Self { tunnel, hull }
    }

    pub fn tunnel(&self) -> &Tunnel {
        &self.tunnel
    }
}

impl CollisionWorld for TunnelWorld {
    fn dim(&self) -> usize {
        self.hull.dim()
    }

    fn bounds(&self) -> &BoundingBox {
        &self.hull
    }

    fn point_free(&self, p: &[f64]) -> bool {
        self.tunnel.segments.iter().any(|b| b.contains(p))
    }

    fn segment_free(&self, a: &[f64], b: &[f64]) -> bool {
        if self
            .tunnel
            .segments
            .iter()
            .any(|bb| bb.contains(a) && bb.contains(b))
        {
            return true;
        }
        let len = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let steps = ((len / 1e-3).ceil() as usize).max(1);
        let mut p = vec![0.0; a.len()];
        (0..=steps).all(|s| {
            let f = s as f64 / steps as f64;
            for d in 0..a.len() {
                p[d] = a[d] + f * (b[d] - a[d]);
            }
            self.point_free(&p)
        })
    }

    fn penetration(&self, p: &[f64]) -> f64 {
        if self.point_free(p) {
            return 0.0;
        }
        let outside = |b: &BoundingBox| {
            (0..p.len())
                .map(|d| (b.lower[d] - p[d]).max(p[d] - b.upper[d]).max(0.0))
                .fold(0.0, f64::max)
        };
        self.tunnel
            .segments
            .iter()
            .map(outside)
            .fold(f64::INFINITY, f64::min)
            .max(f64::MIN_POSITIVE)
    }

    fn inflated(&self, margin: f64) -> std::sync::Arc<dyn CollisionWorld> {
        let mut t = self.tunnel.clone();
        t.segments = t.segments.iter().map(|b| b.expanded(-margin)).collect();
        std::sync::Arc::new(TunnelWorld::new(t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    CollisionTruncated,
    Infeasible,
}

/// Why an optimization produced no feasible trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    /// Collision met before any iterate satisfied every constraint.
    Collision,
    /// Iteration budget spent without reaching a feasible iterate.
    IterationLimit,
    /// The derivative limits need a duration above `t_max`.
    DurationExceeded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySolution {
    /// Spline in the trajectory coordinate, knots on `[0, 1]`.
    pub curve: BSplineCurve,
    pub duration: f64,
    pub cost: f64,
    pub status: SolveStatus,
    /// Requested boundary states.
    pub start: Vec<f64>,
    pub goal: Vec<f64>,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<FailureReason>,
    /// Deepest colliding sample of the iterate that stopped the solve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collision_point: Option<Vec<f64>>,
}

impl TrajectorySolution {
    /// Zero-length trajectory resting at `state` for `t_min`.
    pub fn stationary(state: &[f64], degree: usize, limits: &Limits, w1: f64) -> Self {
        let points = state.repeat(degree + 1);
        let curve = BSplineCurve::uniform(degree, points, state.len(), 0.0, 1.0)
            .expect("degree + 1 points always form a valid curve");
        Self {
            curve,
            duration: limits.t_min,
            cost: w1 * limits.t_min,
            status: SolveStatus::Converged,
            start: state.to_vec(),
            goal: state.to_vec(),
            iterations: 0,
            failure: None,
            collision_point: None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.status != SolveStatus::Infeasible
    }

    pub fn path_length(&self) -> f64 {
        polyline_length(self.curve.points_flat(), self.curve.dim())
    }

    /// Position at time `t in [0, T]`.
    pub fn position_at(&self, t: f64) -> Vec<f64> {
        self.curve
            .evaluate((t / self.duration).clamp(0.0, 1.0))
            .expect("u clamped into the span")
    }
}

/// Optimizer parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// Weight on duration.
    pub w1: f64,
    /// Weight on control-polygon length.
    pub w2: f64,
    /// Control points of a cold-started edge trajectory.
    pub num_ctrl: usize,
    pub degree: usize,
    /// Reconstruction intervals checked for collision at every iterate.
    pub validation_samples: usize,
    /// Inner iteration budget shared by all penalty rounds.
    pub max_iters: usize,
    /// Projected-gradient tolerance of the inner solves.
    pub convergence_tol: f64,
    /// Normalized constraint violation accepted at convergence.
    pub feasibility_tol: f64,
    pub penalty_init: f64,
    pub penalty_growth: f64,
    pub penalty_max: f64,
    pub max_outer_iters: usize,
    /// Control-point cap for warm-start concatenations; longer ones are refit.
    pub max_ctrl: usize,
    /// Allowed distance between the curve and an interior waypoint.
    pub waypoint_tol: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            w1: 1.0,
            w2: 1.0,
            num_ctrl: 10,
            degree: 3,
            validation_samples: 64,
            max_iters: 400,
            convergence_tol: 1e-6,
            feasibility_tol: 1e-7,
            penalty_init: 10.0,
            penalty_growth: 10.0,
            penalty_max: 1e9,
            max_outer_iters: 25,
            max_ctrl: 48,
            waypoint_tol: 1e-3,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), OptError> {
        let bad = |m: &str| Err(OptError::InvalidConfig(m.to_string()));
        if !(self.w1 >= 0.0 && self.w2 >= 0.0) || (self.w1 == 0.0 && self.w2 == 0.0) {
            return bad("weights must be nonnegative and not both zero");
        }
        if self.degree == 0 || self.degree > 20 {
            return bad("degree must be in 1..=20");
        }
        if self.num_ctrl < self.degree + 1 {
            return bad("num_ctrl must exceed the degree");
        }
        if self.max_ctrl < self.num_ctrl {
            return bad("max_ctrl must be at least num_ctrl");
        }
        if self.validation_samples == 0 || self.max_iters == 0 {
            return bad("validation_samples and max_iters must be positive");
        }
        if !(self.convergence_tol > 0.0 && self.feasibility_tol > 0.0 && self.feasibility_tol < 0.1) {
            return bad("tolerances must be positive (feasibility_tol < 0.1)");
        }
        if !(self.penalty_init > 0.0 && self.penalty_growth > 1.0 && self.penalty_max >= self.penalty_init) {
            return bad("penalty schedule must start positive and grow");
        }
        Ok(())
    }

    pub fn with_degree(&self, degree: usize) -> Self {
        let mut cfg = self.clone();
        cfg.degree = degree;
        cfg.num_ctrl = cfg.num_ctrl.max(degree + 1);
        cfg.max_ctrl = cfg.max_ctrl.max(cfg.num_ctrl);
        cfg
    }
}

pub(crate) fn polyline_length(flat: &[f64], dim: usize) -> f64 {
    flat.chunks(dim)
        .collect::<Vec<_>>()
        .windows(2)
        .map(|w| {
            w[0].iter()
                .zip(w[1])
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .sum()
}

/// `w1 * T + w2 * sum_i |p_{i+1} - p_i|`.
pub fn trajectory_cost(sol: &TrajectorySolution, w1: f64, w2: f64) -> f64 {
    w1 * sol.duration + w2 * sol.path_length()
}

/// `(1 / T^j) * d^j psi / du^j` at `u`, for `j in 1..=3`.
pub fn time_scaled_derivative(
    curve: &BSplineCurve,
    duration: f64,
    j: usize,
    u: f64,
) -> Result<Vec<f64>, OptError> {
    if !(1..=3).contains(&j) {
        return Err(OptError::UnsupportedOrder(j));
    }
    if !(duration > 0.0) {
        return Err(OptError::InvalidConfig("duration must be positive".into()));
    }
    let mut out = vec![0.0; curve.dim()];
    if j <= curve.degree() {
        curve.derivative_curve(j)?.evaluate_into(u, &mut out)?;
    }
    let scale = duration.powi(j as i32);
    out.iter_mut().for_each(|x| *x /= scale);
    Ok(out)
}

/// Time-domain samples used when validating a trajectory.
pub(crate) fn sample_positions(curve: &BSplineCurve, samples: usize) -> Vec<f64> {
    let dim = curve.dim();
    let mut out = vec![0.0; (samples + 1) * dim];
    for i in 0..=samples {
        curve
            .evaluate_into(i as f64 / samples as f64, &mut out[i * dim..(i + 1) * dim])
            .expect("grid lies in [0, 1]");
    }
    out
}

pub(crate) fn reconstruction(curve: &BSplineCurve) -> Reconstruction {
    Reconstruction::new(curve).expect("valid curve")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(a: &[f64], b: &[f64], n: usize, k: usize) -> BSplineCurve {
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let f = i as f64 / (n - 1) as f64;
                a.iter().zip(b).map(|(x, y)| x + f * (y - x)).collect()
            })
            .collect();
        BSplineCurve::from_points(k, &pts, 0.0, 1.0).unwrap()
    }

    #[test]
    fn limits_validation() {
        assert!(Limits::uniform(2, &[1.0, 2.0], 0.5, 1.0).is_ok());
        assert!(Limits::uniform(2, &[1.0, 0.0], 0.5, 1.0).is_err());
        assert!(Limits::uniform(2, &[1.0], 1.5, 1.0).is_err());
        assert!(Limits::uniform(2, &[1.0, 1.0, 1.0, 1.0], 0.5, 1.0).is_err());
        assert!(Limits::uniform(2, &[1.0], 0.0, 1.0).is_err());
    }

    #[test]
    fn stationary_curve_has_zero_scaled_derivatives() {
        let c = BSplineCurve::from_points(3, &vec![vec![1.0, 2.0]; 5], 0.0, 1.0).unwrap();
        for j in 1..=3 {
            for t in [0.5, 1.0, 7.0] {
                assert!(time_scaled_derivative(&c, t, j, 0.3)
                    .unwrap()
                    .iter()
                    .all(|&x| x == 0.0));
            }
        }
        assert!(matches!(
            time_scaled_derivative(&c, 1.0, 4, 0.3),
            Err(OptError::UnsupportedOrder(4))
        ));
    }

    #[test]
    fn scaled_derivative_halves_per_order() {
        let pts = vec![vec![0.0], vec![0.4], vec![1.5], vec![0.2], vec![2.0]];
        let c = BSplineCurve::from_points(3, &pts, 0.0, 1.0).unwrap();
        for j in 1..=3 {
            let a = time_scaled_derivative(&c, 1.0, j, 0.37).unwrap()[0];
            let b = time_scaled_derivative(&c, 2.0, j, 0.37).unwrap()[0];
            assert_eq!(b, a / 2f64.powi(j as i32));
        }
    }

    #[test]
    fn line_velocity_is_displacement_over_duration() {
        let c = line(&[1.0], &[3.5], 4, 3);
        for step in 0..=20 {
            let u = step as f64 / 20.0;
            let v = time_scaled_derivative(&c, 2.0, 1, u).unwrap()[0];
            assert!((v - 1.25).abs() < 1e-12, "u={u} v={v}");
            // central finite difference of the position in time
            let h = 1e-6;
            let lo = (u * 2.0 - h).max(0.0);
            let hi = (u * 2.0 + h).min(2.0);
            let fd = (c.evaluate(hi / 2.0).unwrap()[0] - c.evaluate(lo / 2.0).unwrap()[0]) / (hi - lo);
            assert!((fd - 1.25).abs() < 1e-6);
        }
    }

    #[test]
    fn cost_of_unit_segment() {
        let curve = BSplineCurve::from_points(1, &[vec![0.0, 0.0], vec![1.0, 0.0]], 0.0, 1.0).unwrap();
        let sol = TrajectorySolution {
            curve,
            duration: 1.0,
            cost: 0.0,
            status: SolveStatus::Converged,
            start: vec![0.0, 0.0],
            goal: vec![1.0, 0.0],
            iterations: 0,
            failure: None,
            collision_point: None,
        };
        assert_eq!(trajectory_cost(&sol, 1.0, 1.0), 2.0);
        assert_eq!(trajectory_cost(&sol, 0.0, 1.0), 1.0);
    }

    #[test]
    fn tunnel_world_queries() {
        let t = Tunnel::around_edge(&[0.0, 0.0], &[1.0, 0.0], 0.2);
        let w = TunnelWorld::new(t);
        assert!(w.point_free(&[0.5, 0.1]));
        assert!(!w.point_free(&[0.5, 0.3]));
        assert!(w.segment_free(&[-0.1, -0.1], &[1.1, 0.1]));
        let path = Tunnel::around_path(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]], 0.1);
        let pw = TunnelWorld::new(path);
        assert!(pw.segment_free(&[0.85, 0.0], &[1.0, 0.2]));
        assert!(!pw.segment_free(&[0.0, 0.0], &[1.0, 1.0]));
    }
}
