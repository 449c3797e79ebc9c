use serde::{Deserialize, Serialize};

use crate::world::CollisionWorld;

use super::{reconstruction, Limits, TrajectorySolution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityTolerance {
    /// Relative slack on sampled derivative magnitudes.
    pub derivative_rel: f64,
    /// Distance allowed between curve endpoints and requested states.
    pub boundary: f64,
}

impl Default for FeasibilityTolerance {
    fn default() -> Self {
        Self {
            derivative_rel: 1e-6,
            boundary: 1e-9,
        }
    }
}

/// Outcome of an independent check of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub boundary_ok: bool,
    pub duration_ok: bool,
    /// Sufficient condition on derivative control points.
    pub control_points_ok: bool,
    /// Sampled `|phi^(j)| / L_j` maxima for `j = 1..=gamma`.
    pub max_ratio: Vec<f64>,
    pub derivatives_ok: bool,
    pub collision_free: bool,
    /// Time of the first colliding sample.
    pub first_collision: Option<f64>,
    pub samples: usize,
}

impl FeasibilityReport {
    pub fn passed(&self) -> bool {
        self.boundary_ok
            && self.duration_ok
            && self.control_points_ok
            && self.derivatives_ok
            && self.collision_free
    }
}

/// Samples `samples + 1` evenly spaced times and checks positions against
/// `world` with point queries and derivatives against `limits`.
pub fn check_feasibility(
    sol: &TrajectorySolution,
    limits: &Limits,
    world: &dyn CollisionWorld,
    samples: usize,
    tol: FeasibilityTolerance,
) -> FeasibilityReport {
    let curve = &sol.curve;
    let dim = curve.dim();
    let t = sol.duration;
    let samples = samples.max(1);
    let dist = |a: &[f64], b: &[f64]| {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    };
    let start = curve.evaluate(0.0).expect("u = 0 in span");
    let end = curve.evaluate(1.0).expect("u = 1 in span");
    let boundary_ok = sol.start.len() == dim
        && sol.goal.len() == dim
        && dist(&start, &sol.start) <= tol.boundary
        && dist(&end, &sol.goal) <= tol.boundary;
    let duration_ok = t >= limits.t_min * (1.0 - 1e-12) && t <= limits.t_max * (1.0 + 1e-12);

    let gamma = limits.gamma();
    let mut control_points_ok = true;
    for j in 1..=gamma.min(curve.degree()) {
        let q = curve.derivative_control_points(j).expect("order within degree");
        let tj = t.powi(j as i32);
        control_points_ok &= q.iter().all(|p| {
            p.iter()
                .enumerate()
                .all(|(d, v)| v.abs() <= tj * limits.limit(j, d) * (1.0 + 1e-9))
        });
    }

    let rec = reconstruction(curve);
    let mut max_ratio = vec![0.0f64; gamma];
    let mut collision_free = true;
    let mut first_collision = None;
    let mut buf = vec![0.0; dim];
    for i in 0..=samples {
        let u = i as f64 / samples as f64;
        rec.parametric(0, u, &mut buf).expect("u in span");
        if collision_free && !world.point_free(&buf) {
            collision_free = false;
            first_collision = Some(u * t);
        }
        for (jm1, ratio) in max_ratio.iter_mut().enumerate() {
            let j = jm1 + 1;
            rec.parametric(j, u, &mut buf).expect("u in span");
            let tj = t.powi(j as i32);
            for (d, v) in buf.iter().enumerate() {
                *ratio = ratio.max(v.abs() / tj / limits.limit(j, d));
            }
        }
    }
    let derivatives_ok = max_ratio.iter().all(|&r| r <= 1.0 + tol.derivative_rel);
    FeasibilityReport {
        boundary_ok,
        duration_ok,
        control_points_ok,
        max_ratio,
        derivatives_ok,
        collision_free,
        first_collision,
        samples,
    }
}
