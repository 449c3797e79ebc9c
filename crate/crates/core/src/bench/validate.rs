use serde::{Deserialize, Serialize};

use crate::bspline::BSplineCurve;
use crate::graph::{distance, GoalRegion};
use crate::trajopt::Limits;
use crate::world::CollisionWorld;

use super::BenchError;

/// Relative slack on the sampled derivative limits.
pub const DERIVATIVE_SLACK: f64 = 1e-6;
/// Absolute slack on the start position.
pub const BOUNDARY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub start_ok: bool,
    pub goal_ok: bool,
    pub duration_ok: bool,
    /// Largest `|phi^(j)| / limit` over samples and axes, per order.
    pub max_ratio: Vec<f64>,
    pub derivatives_ok: bool,
    pub collision_free: bool,
    pub first_collision_u: Option<f64>,
    pub samples: usize,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.start_ok && self.goal_ok && self.duration_ok && self.derivatives_ok && self.collision_free
    }
}

/// Re-checks a trajectory from scratch: endpoints, duration window, sampled
/// derivatives up to the limit order and point collisions at `samples + 1`
/// uniformly spaced parameters.
pub fn validate_trajectory(
    curve: &BSplineCurve,
    duration: f64,
    start: &[f64],
    goal: &GoalRegion,
    limits: &Limits,
    world: &dyn CollisionWorld,
    samples: usize,
) -> Result<ValidationReport, BenchError> {
    let err = |e: crate::bspline::SplineError| BenchError::Format(e.to_string());
    let samples = samples.max(1);
    let first = curve.evaluate(0.0).map_err(err)?;
    let last = curve.evaluate(1.0).map_err(err)?;
    let gamma = limits.gamma();
    let derivs: Vec<Option<BSplineCurve>> = (1..=gamma)
        .map(|j| (j <= curve.degree()).then(|| curve.derivative_curve(j)).transpose())
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let mut max_ratio = vec![0.0f64; gamma];
    let mut first_collision_u = None;
    for i in 0..=samples {
        let u = i as f64 / samples as f64;
        let p = curve.evaluate(u).map_err(err)?;
        if first_collision_u.is_none() && !world.point_free(&p) {
            first_collision_u = Some(u);
        }
        for (j, dc) in derivs.iter().enumerate() {
            let Some(dc) = dc else { continue };
            let v = dc.evaluate(u).map_err(err)?;
            let scale = duration.powi(j as i32 + 1);
            for (d, x) in v.iter().enumerate() {
                let ratio = (x / scale).abs() / limits.limit(j + 1, d);
                max_ratio[j] = max_ratio[j].max(ratio);
            }
        }
    }
    Ok(ValidationReport {
        start_ok: distance(&first, start) <= BOUNDARY_SLACK,
        goal_ok: distance(&last, &goal.center) <= goal.tolerance + BOUNDARY_SLACK,
        duration_ok: duration >= limits.t_min && duration <= limits.t_max,
        derivatives_ok: max_ratio.iter().all(|r| *r <= 1.0 + DERIVATIVE_SLACK),
        max_ratio,
        collision_free: first_collision_u.is_none(),
        first_collision_u,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bspline::BoundingBox;
    use crate::world::{point2d_world, Obstacle};

    fn line(t: f64) -> (BSplineCurve, f64) {
        let pts = vec![1.0, 1.0, 2.0, 1.0, 3.0, 1.0];
        (BSplineCurve::uniform(1, pts, 2, 0.0, 1.0).unwrap(), t)
    }

    #[test]
    fn straight_line_validates() {
        let w = point2d_world(vec![], BoundingBox::new(vec![0.0, 0.0], vec![10.0, 10.0]).unwrap());
        let lim = Limits::uniform(2, &[1.0], 1.0, 5.0).unwrap();
        let (c, t) = line(2.0);
        let r = validate_trajectory(&c, t, &[1.0, 1.0], &GoalRegion::new(vec![3.0, 1.0], 0.0), &lim, &w, 100).unwrap();
        assert!(r.passed(), "{r:?}");
        assert!((r.max_ratio[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_fast_and_colliding_fail() {
        let w = point2d_world(
            vec![Obstacle::Disc { center: [2.0, 1.0], radius: 0.1 }],
            BoundingBox::new(vec![0.0, 0.0], vec![10.0, 10.0]).unwrap(),
        );
        let lim = Limits::uniform(2, &[1.0], 1.0, 5.0).unwrap();
        let (c, t) = line(1.5);
        let r = validate_trajectory(&c, t, &[1.0, 1.0], &GoalRegion::new(vec![3.0, 1.0], 0.0), &lim, &w, 100).unwrap();
        assert!(!r.derivatives_ok);
        assert!(!r.collision_free);
        let u = r.first_collision_u.unwrap();
        assert!((0.44..=0.46).contains(&u));
    }
}
