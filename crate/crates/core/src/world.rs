//! Collision worlds over the low-dimensional space.
//!
//! Every query is pure; worlds are shared between planner threads behind an
//! `Arc<dyn CollisionWorld>`.

use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bspline::BoundingBox;

pub trait CollisionWorld: Send + Sync + Debug {
    fn dim(&self) -> usize;

    /// Region the planner may sample from and outside of which every point is
    /// in collision.
    fn bounds(&self) -> &BoundingBox;

    fn point_free(&self, p: &[f64]) -> bool;

    /// Whether the straight segment `a -> b` lies in free space.
    fn segment_free(&self, a: &[f64], b: &[f64]) -> bool;

    /// Nonnegative penetration measure; zero iff `p` is free.
    fn penetration(&self, p: &[f64]) -> f64 {
        if self.point_free(p) {
            0.0
        } else {
            1.0
        }
    }

    /// A copy whose obstacles are grown by `margin`.
    fn inflated(&self, margin: f64) -> Arc<dyn CollisionWorld>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Obstacle {
    Rect { min: [f64; 2], max: [f64; 2] },
    Disc { center: [f64; 2], radius: f64 },
}

impl Obstacle {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        match *self {
            Obstacle::Rect { min, max } => {
                p[0] >= min[0] && p[0] <= max[0] && p[1] >= min[1] && p[1] <= max[1]
            }
            Obstacle::Disc { center, radius } => {
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                dx * dx + dy * dy <= radius * radius
            }
        }
    }

    /// Whether the closed segment `a -> b` touches the obstacle.
    pub fn intersects_segment(&self, a: [f64; 2], b: [f64; 2]) -> bool {
        match *self {
            Obstacle::Rect { min, max } => segment_hits_rect(a, b, min, max),
            Obstacle::Disc { center, radius } => {
                segment_point_distance_sq(a, b, center) <= radius * radius
            }
        }
    }

    /// Depth of `p` inside the obstacle (zero outside).
    pub fn depth(&self, p: [f64; 2]) -> f64 {
        match *self {
            Obstacle::Rect { min, max } => {
                if !self.contains(p) {
                    return 0.0;
                }
                (p[0] - min[0])
                    .min(max[0] - p[0])
                    .min(p[1] - min[1])
                    .min(max[1] - p[1])
                    .max(0.0)
            }
            Obstacle::Disc { center, radius } => {
                let d = ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)).sqrt();
                (radius - d).max(0.0)
            }
        }
    }

    pub fn grown(&self, margin: f64) -> Self {
        match *self {
            Obstacle::Rect { min, max } => Obstacle::Rect {
                min: [min[0] - margin, min[1] - margin],
                max: [max[0] + margin, max[1] + margin],
            },
            Obstacle::Disc { center, radius } => Obstacle::Disc {
                center,
                radius: radius + margin,
            },
        }
    }
}

fn segment_point_distance_sq(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len_sq = ab[0] * ab[0] + ab[1] * ab[1];
    let s = if len_sq > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len_sq).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let dx = a[0] + s * ab[0] - p[0];
    let dy = a[1] + s * ab[1] - p[1];
    dx * dx + dy * dy
}

/// Slab test for a closed segment against a closed axis-aligned rectangle.
fn segment_hits_rect(a: [f64; 2], b: [f64; 2], min: [f64; 2], max: [f64; 2]) -> bool {
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    for d in 0..2 {
        let delta = b[d] - a[d];
        if delta == 0.0 {
            if a[d] < min[d] || a[d] > max[d] {
                return false;
            }
        } else {
            let inv = 1.0 / delta;
            let (mut lo, mut hi) = ((min[d] - a[d]) * inv, (max[d] - a[d]) * inv);
            if lo > hi {
                std::mem::swap(&mut lo, &mut hi);
            }
            t0 = t0.max(lo);
            t1 = t1.min(hi);
            if t0 > t1 {
                return false;
            }
        }
    }
    true
}

fn as2(p: &[f64]) -> [f64; 2] {
    [p[0], p[1]]
}

/// Point robot in the plane among rectangles and discs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointWorld {
    pub bounds: BoundingBox,
    pub obstacles: Vec<Obstacle>,
}

impl PointWorld {
    pub fn new(obstacles: Vec<Obstacle>, bounds: BoundingBox) -> Self {
        assert_eq!(bounds.dim(), 2, "point world bounds must be 2D");
        Self { bounds, obstacles }
    }
}

/// Builds a 2D point-robot world with exact point and segment queries.
pub fn point2d_world(obstacles: Vec<Obstacle>, bounds: BoundingBox) -> PointWorld {
    PointWorld::new(obstacles, bounds)
}

impl CollisionWorld for PointWorld {
    fn dim(&self) -> usize {
        2
    }

    fn bounds(&self) -> &BoundingBox {
        &self.bounds
    }

    fn point_free(&self, p: &[f64]) -> bool {
        self.bounds.contains(p) && !self.obstacles.iter().any(|o| o.contains(as2(p)))
    }

    fn segment_free(&self, a: &[f64], b: &[f64]) -> bool {
        // bounds are convex, so endpoint containment suffices
        self.bounds.contains(a)
            && self.bounds.contains(b)
            && !self
                .obstacles
                .iter()
                .any(|o| o.intersects_segment(as2(a), as2(b)))
    }

    fn penetration(&self, p: &[f64]) -> f64 {
        let mut depth: f64 = 0.0;
        for d in 0..2 {
            depth = depth
                .max(self.bounds.lower[d] - p[d])
                .max(p[d] - self.bounds.upper[d]);
        }
        let inside = self
            .obstacles
            .iter()
            .map(|o| o.depth(as2(p)))
            .fold(0.0, f64::max);
        let depth = depth.max(inside);
        if depth == 0.0 && !self.point_free(p) {
            // on a boundary
            f64::MIN_POSITIVE
        } else {
            depth
        }
    }

    fn inflated(&self, margin: f64) -> Arc<dyn CollisionWorld> {
        Arc::new(PointWorld {
            bounds: self.bounds.expanded(-margin),
            obstacles: self.obstacles.iter().map(|o| o.grown(margin)).collect(),
        })
    }
}

/// Planar serial arm rooted at `base`; the configuration space is the vector
/// of joint angles (each relative to the previous link).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarArmWorld {
    pub base: [f64; 2],
    pub link_lengths: Vec<f64>,
    pub joint_limits: BoundingBox,
    pub obstacles: Vec<Obstacle>,
    /// Joint-space step used when sweeping a configuration segment.
    pub sweep_resolution: f64,
    /// Workspace clearance added to obstacles during sweeps so the motion
    /// between swept configurations is covered.
    pub sweep_margin: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ArmError {
    #[error("kinematic chain has no links")]
    EmptyChain,
    #[error("joint limits have {got} dimensions, chain has {links} links")]
    LimitDimension { got: usize, links: usize },
    #[error("negative link length {0}")]
    NegativeLength(f64),
}

/// Builds a planar arm world over joint space.
pub fn planar_arm_world(
    link_lengths: Vec<f64>,
    joint_limits: BoundingBox,
    obstacles: Vec<Obstacle>,
) -> Result<PlanarArmWorld, ArmError> {
    if link_lengths.is_empty() {
        return Err(ArmError::EmptyChain);
    }
    if joint_limits.dim() != link_lengths.len() {
        return Err(ArmError::LimitDimension {
            got: joint_limits.dim(),
            links: link_lengths.len(),
        });
    }
    if let Some(&l) = link_lengths.iter().find(|&&l| l < 0.0) {
        return Err(ArmError::NegativeLength(l));
    }
    let reach: f64 = link_lengths.iter().sum();
    let sweep_resolution = 0.01;
    Ok(PlanarArmWorld {
        base: [0.0, 0.0],
        link_lengths,
        joint_limits,
        obstacles,
        sweep_resolution,
        // a joint step of `res` moves any arm point by at most reach * res
        sweep_margin: 0.5 * reach * sweep_resolution,
    })
}

impl PlanarArmWorld {
    /// Joint positions `base, j1, ..., tip` for configuration `q`.
    pub fn forward_kinematics(&self, q: &[f64]) -> Vec<[f64; 2]> {
        let mut pts = Vec::with_capacity(q.len() + 1);
        let mut p = self.base;
        let mut angle = 0.0;
        pts.push(p);
        for (theta, len) in q.iter().zip(&self.link_lengths) {
            angle += theta;
            p = [p[0] + len * angle.cos(), p[1] + len * angle.sin()];
            pts.push(p);
        }
        pts
    }

    fn config_free_with(&self, q: &[f64], margin: f64) -> bool {
        if !self.joint_limits.contains(q) {
            return false;
        }
        let pts = self.forward_kinematics(q);
        for w in pts.windows(2) {
            for o in &self.obstacles {
                let o = if margin > 0.0 { o.grown(margin) } else { o.clone() };
                if o.intersects_segment(w[0], w[1]) {
                    return false;
                }
            }
        }
        true
    }
}

impl CollisionWorld for PlanarArmWorld {
    fn dim(&self) -> usize {
        self.link_lengths.len()
    }

    fn bounds(&self) -> &BoundingBox {
        &self.joint_limits
    }

    fn point_free(&self, q: &[f64]) -> bool {
        self.config_free_with(q, 0.0)
    }

    fn segment_free(&self, a: &[f64], b: &[f64]) -> bool {
        let dist = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        let steps = ((dist / self.sweep_resolution).ceil() as usize).max(1);
        let mut q = vec![0.0; a.len()];
        (0..=steps).all(|s| {
            let f = s as f64 / steps as f64;
            for d in 0..a.len() {
                q[d] = a[d] + f * (b[d] - a[d]);
            }
            self.config_free_with(&q, self.sweep_margin)
        })
    }

    fn penetration(&self, q: &[f64]) -> f64 {
        if self.point_free(q) {
            return 0.0;
        }
        let mut depth = 0.0f64;
        for d in 0..q.len() {
            depth = depth
                .max(self.joint_limits.lower[d] - q[d])
                .max(q[d] - self.joint_limits.upper[d]);
        }
        let pts = self.forward_kinematics(q);
        for w in pts.windows(2) {
            for s in 0..=20 {
                let f = s as f64 / 20.0;
                let p = [w[0][0] + f * (w[1][0] - w[0][0]), w[0][1] + f * (w[1][1] - w[0][1])];
                for o in &self.obstacles {
                    depth = depth.max(o.depth(p));
                }
            }
        }
        depth.max(f64::MIN_POSITIVE)
    }

    fn inflated(&self, margin: f64) -> Arc<dyn CollisionWorld> {
        let reach: f64 = self.link_lengths.iter().sum();
        let mut w = self.clone();
        w.joint_limits = self.joint_limits.expanded(-margin);
        // joint-space margin mapped to workspace through the arm's reach
        let grow = margin * reach.max(1e-9);
        w.obstacles = self.obstacles.iter().map(|o| o.grown(grow)).collect();
        Arc::new(w)
    }
}

/// World with no obstacles inside an axis-aligned box, any dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeSpace {
    pub bounds: BoundingBox,
}

impl CollisionWorld for FreeSpace {
    fn dim(&self) -> usize {
        self.bounds.dim()
    }

    fn bounds(&self) -> &BoundingBox {
        &self.bounds
    }

    fn point_free(&self, p: &[f64]) -> bool {
        self.bounds.contains(p)
    }

    fn segment_free(&self, a: &[f64], b: &[f64]) -> bool {
        self.bounds.contains(a) && self.bounds.contains(b)
    }

    fn penetration(&self, p: &[f64]) -> f64 {
        let mut depth = 0.0f64;
        for d in 0..p.len() {
            depth = depth
                .max(self.bounds.lower[d] - p[d])
                .max(p[d] - self.bounds.upper[d]);
        }
        if depth == 0.0 && !self.point_free(p) {
            f64::MIN_POSITIVE
        } else {
            depth
        }
    }

    fn inflated(&self, margin: f64) -> Arc<dyn CollisionWorld> {
        Arc::new(FreeSpace {
            bounds: self.bounds.expanded(-margin),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square_bounds(lo: f64, hi: f64) -> BoundingBox {
        BoundingBox::new(vec![lo, lo], vec![hi, hi]).unwrap()
    }

    #[test]
    fn point_inside_rect_collides() {
        let w = point2d_world(
            vec![Obstacle::Rect {
                min: [1.0, 1.0],
                max: [2.0, 2.0],
            }],
            square_bounds(0.0, 5.0),
        );
        assert!(!w.point_free(&[1.5, 1.5]));
        assert!(w.point_free(&[2.5, 1.5]));
        assert!(!w.point_free(&[6.0, 1.0]));
        assert!(w.penetration(&[1.5, 1.2]) > 0.19);
    }

    #[test]
    fn segment_crossing_disc_collides() {
        let w = point2d_world(
            vec![Obstacle::Disc {
                center: [2.0, 2.0],
                radius: 0.5,
            }],
            square_bounds(0.0, 5.0),
        );
        assert!(!w.segment_free(&[0.0, 2.0], &[4.0, 2.0]));
        assert!(w.segment_free(&[0.0, 3.0], &[4.0, 3.0]));
    }

    #[test]
    fn segment_queries_match_dense_sampling() {
        let w = point2d_world(
            vec![
                Obstacle::Rect {
                    min: [1.0, 1.0],
                    max: [2.0, 3.0],
                },
                Obstacle::Disc {
                    center: [3.5, 3.5],
                    radius: 0.7,
                },
                Obstacle::Rect {
                    min: [3.0, 0.5],
                    max: [4.5, 0.9],
                },
            ],
            square_bounds(0.0, 5.0),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut disagreements = 0;
        for _ in 0..1000 {
            let a: [f64; 2] = [rng.gen_range(0.0..5.0), rng.gen_range(0.0..5.0)];
            let b: [f64; 2] = [rng.gen_range(0.0..5.0), rng.gen_range(0.0..5.0)];
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            let n = ((len / 1e-3).ceil() as usize).max(1);
            let sampled = (0..=n).all(|s| {
                let f = s as f64 / n as f64;
                w.point_free(&[a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])])
            });
            let exact = w.segment_free(&a, &b);
            // sampling can only miss grazing contacts shallower than the step
            if sampled != exact {
                let inflated = w.inflated(-1e-3);
                assert!(
                    exact || inflated.segment_free(&a, &b),
                    "segment {a:?} -> {b:?}: exact free = {exact}, sampled = {sampled}"
                );
                disagreements += 1;
            }
        }
        assert!(disagreements <= 5);
    }

    #[test]
    fn zero_length_arm_never_collides_far_away() {
        let limits = BoundingBox::new(vec![-3.2, -3.2], vec![3.2, 3.2]).unwrap();
        let w = planar_arm_world(
            vec![0.0, 0.0],
            limits,
            vec![Obstacle::Disc {
                center: [3.0, 0.0],
                radius: 0.5,
            }],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let q = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            assert!(w.point_free(&q));
        }
    }

    #[test]
    fn arm_pointing_at_obstacle_collides() {
        let limits = BoundingBox::new(vec![-3.2, -3.2], vec![3.2, 3.2]).unwrap();
        let w = planar_arm_world(
            vec![1.0, 1.0],
            limits,
            vec![Obstacle::Rect {
                min: [1.5, -0.1],
                max: [1.7, 0.1],
            }],
        )
        .unwrap();
        assert!(!w.point_free(&[0.0, 0.0]));
        assert!(w.point_free(&[std::f64::consts::FRAC_PI_2, 0.0]));
        assert!(!w.segment_free(&[std::f64::consts::FRAC_PI_2, 0.0], &[-1.0, 0.0]));
    }

    #[test]
    fn arm_matches_dense_workspace_sampling() {
        let limits = BoundingBox::new(vec![-3.2, -3.2], vec![3.2, 3.2]).unwrap();
        let obstacles = vec![
            Obstacle::Rect {
                min: [0.8, 0.3],
                max: [1.2, 1.5],
            },
            Obstacle::Disc {
                center: [-1.0, -1.0],
                radius: 0.4,
            },
        ];
        let w = planar_arm_world(vec![1.0, 0.8], limits, obstacles.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut grazing = 0;
        for _ in 0..500 {
            let q = [rng.gen_range(-3.1..3.1), rng.gen_range(-3.1..3.1)];
            let pts = w.forward_kinematics(&q);
            let mut hit = false;
            for seg in pts.windows(2) {
                for s in 0..=2000 {
                    let f = s as f64 / 2000.0;
                    let p = [
                        seg[0][0] + f * (seg[1][0] - seg[0][0]),
                        seg[0][1] + f * (seg[1][1] - seg[0][1]),
                    ];
                    hit |= obstacles.iter().any(|o| o.contains(p));
                }
            }
            let exact_hit = !w.point_free(&q);
            if hit {
                assert!(exact_hit, "q = {q:?}");
            } else if exact_hit {
                grazing += 1;
            }
        }
        assert!(grazing <= 2);
    }

    #[test]
    fn empty_chain_rejected() {
        let limits = BoundingBox::new(vec![], vec![]).unwrap();
        assert_eq!(
            planar_arm_world(vec![], limits, vec![]).unwrap_err(),
            ArmError::EmptyChain
        );
    }
}
