use serde::{Deserialize, Serialize};

use super::ActionPrimitive;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Point2d,
    PlanarArm,
}

/// Per-domain graph parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub kind: DomainKind,
    /// Lattice spacing used to canonicalize states.
    pub resolution: f64,
    pub actions: Vec<ActionPrimitive>,
    /// Half-width of the box tunnel around each edge.
    pub tunnel_half_width: f64,
    /// Cell size of the heuristic grid.
    pub heuristic_resolution: f64,
}

/// `+-m` along every axis for every magnitude `m`.
pub fn axis_actions(dim: usize, magnitudes: &[f64]) -> Vec<ActionPrimitive> {
    let mut out = Vec::with_capacity(2 * dim * magnitudes.len());
    for axis in 0..dim {
        for &m in magnitudes {
            for sign in [1.0, -1.0] {
                let mut delta = vec![0.0; dim];
                delta[axis] = sign * m;
                out.push(ActionPrimitive::unit(delta));
            }
        }
    }
    out
}

/// Joint-space primitives given in degrees.
pub fn arm_actions(joints: usize, degrees: &[f64]) -> Vec<ActionPrimitive> {
    let radians: Vec<f64> = degrees.iter().map(|d| d.to_radians()).collect();
    axis_actions(joints, &radians)
}

impl Domain {
    /// 2D point robot: two step sizes per axis on a 0.25 lattice.
    pub fn point2d_default() -> Self {
        Self::point2d(&[0.5, 1.0], 0.25, 0.3, 0.25)
    }

    pub fn point2d(magnitudes: &[f64], resolution: f64, tunnel_half_width: f64, heuristic_resolution: f64) -> Self {
        Self {
            kind: DomainKind::Point2d,
            resolution,
            actions: axis_actions(2, magnitudes),
            tunnel_half_width,
            heuristic_resolution,
        }
    }

    /// Planar arm with 4 and 7 degree joint steps on a 1 degree lattice.
    pub fn arm_default(joints: usize) -> Self {
        Self {
            kind: DomainKind::PlanarArm,
            resolution: 1f64.to_radians(),
            actions: arm_actions(joints, &[4.0, 7.0]),
            tunnel_half_width: 4f64.to_radians(),
            heuristic_resolution: 7f64.to_radians(),
        }
    }
}
