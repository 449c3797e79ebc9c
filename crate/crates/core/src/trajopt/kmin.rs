//! Minimum spline degree for which every action primitive admits a
//! trajectory that starts and ends with saturated derivatives.
//!
//! For a candidate degree `k` each action is modelled as a single Bezier
//! segment (`k + 1` control points, `u in [0, 1]`, duration `t_min`). The
//! linear program asks for control points inside the action's tunnel whose
//! derivative control points stay within `t_min^j L_j` and whose first and
//! last order-`j` derivative points equal `+-t_min^j L_j`. A degree is
//! feasible when some choice of signs admits a solution. Requiring every sign
//! choice is never satisfiable for `gamma >= 2`: a velocity point at `+L_1`
//! followed by an acceleration point at `+L_2` pushes the next velocity point
//! past `L_1`. The box and the limits are axis-aligned, so each dimension is
//! an independent LP with its own signs.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Limits, Tunnel};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KminError {
    #[error("no actions given")]
    NoActions,
    #[error("action {action} has no feasible degree up to {cap}")]
    NoFeasibleDegree { action: usize, cap: usize },
    #[error("action {action} has dimension {got}, limits have {expected}")]
    DimensionMismatch {
        action: usize,
        expected: usize,
        got: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KminConfig {
    /// Largest degree tried.
    pub max_degree: usize,
    /// Floor applied to the planning degree.
    pub min_planning_degree: usize,
}

impl Default for KminConfig {
    fn default() -> Self {
        Self {
            max_degree: 15,
            min_planning_degree: 3,
        }
    }
}

/// Signs of the saturated boundary derivatives, index `j - 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignPattern {
    pub start: Vec<i8>,
    pub end: Vec<i8>,
}

impl SignPattern {
    /// All `4^gamma` patterns.
    pub fn all(gamma: usize) -> Vec<SignPattern> {
        let bits = 2 * gamma;
        (0u32..1 << bits)
            .map(|m| {
                let sign = |b: usize| if m >> b & 1 == 1 { -1 } else { 1 };
                SignPattern {
                    start: (0..gamma).map(sign).collect(),
                    end: (0..gamma).map(|j| sign(gamma + j)).collect(),
                }
            })
            .collect()
    }
}

/// Feasible control points together with the signs used per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KminWitness {
    pub degree: usize,
    pub control_points: Vec<Vec<f64>>,
    pub signs: Vec<SignPattern>,
}

/// Result of the degree sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KminResult {
    pub k_min: usize,
    /// `max(k_min, min_planning_degree)`.
    pub planning_degree: usize,
}

/// Rows of the map from Bezier control points to order-`j` derivative
/// control points (in `u`).
fn derivative_rows(k: usize, j: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = (0..=k)
        .map(|i| {
            let mut r = vec![0.0; k + 1];
            r[i] = 1.0;
            r
        })
        .collect();
    for r in 1..=j {
        let scale = (k - r + 1) as f64;
        rows = rows
            .windows(2)
            .map(|w| w[1].iter().zip(&w[0]).map(|(b, a)| scale * (b - a)).collect())
            .collect();
    }
    rows
}

fn solve_dimension(
    k: usize,
    delta: f64,
    lo: f64,
    hi: f64,
    bounds: &[f64],
    signs: &SignPattern,
) -> Option<Vec<f64>> {
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = (0..=k).map(|_| lp.add_var(0.0, (lo, hi))).collect();
    lp.add_constraint([(vars[0], 1.0)], ComparisonOp::Eq, 0.0);
    lp.add_constraint([(vars[k], 1.0)], ComparisonOp::Eq, delta);
    for (jm1, &c) in bounds.iter().enumerate() {
        let j = jm1 + 1;
        let rows = derivative_rows(k, j);
        let expr = |row: &Vec<f64>| {
            row.iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (vars[i], *v))
                .collect::<Vec<_>>()
        };
        let last = rows.len() - 1;
        for (i, row) in rows.iter().enumerate() {
            lp.add_constraint(expr(row), ComparisonOp::Le, c);
            lp.add_constraint(expr(row), ComparisonOp::Ge, -c);
            if i == 0 {
                lp.add_constraint(expr(row), ComparisonOp::Eq, f64::from(signs.start[jm1]) * c);
            }
            if i == last {
                lp.add_constraint(expr(row), ComparisonOp::Eq, f64::from(signs.end[jm1]) * c);
            }
        }
    }
    let outcome = lp.solve().ok()?;
    let sol = outcome.solution()?;
    Some(vars.iter().map(|&v| sol.var_value(v)).collect())
}

/// Solves the LP for one sign pattern. Control points are returned in
/// absolute coordinates (the action starts at the tunnel's edge origin).
pub fn kmin_lp(tunnel: &Tunnel, limits: &Limits, degree: usize, signs: &SignPattern) -> Option<KminWitness> {
    let gamma = limits.gamma();
    if degree < gamma || signs.start.len() != gamma || signs.end.len() != gamma {
        return None;
    }
    let (origin, target) = (&tunnel.edge.0, &tunnel.edge.1);
    let dim = origin.len();
    let bb = &tunnel.segments[0];
    let mut points = vec![vec![0.0; dim]; degree + 1];
    for d in 0..dim {
        let bounds: Vec<f64> = (1..=gamma)
            .map(|j| limits.t_min.powi(j as i32) * limits.limit(j, d))
            .collect();
        let col = solve_dimension(
            degree,
            target[d] - origin[d],
            bb.lower[d] - origin[d],
            bb.upper[d] - origin[d],
            &bounds,
            signs,
        )?;
        for (i, v) in col.into_iter().enumerate() {
            points[i][d] = origin[d] + v;
        }
    }
    Some(KminWitness {
        degree,
        control_points: points,
        signs: vec![signs.clone(); dim],
    })
}

/// First feasible sign pattern in each dimension, with the resulting
/// control points.
pub fn kmin_witness(tunnel: &Tunnel, limits: &Limits, degree: usize) -> Option<KminWitness> {
    let gamma = limits.gamma();
    if degree < gamma {
        return None;
    }
    let dim = tunnel.edge.0.len();
    let bb = &tunnel.segments[0];
    let patterns = SignPattern::all(gamma);
    let mut points = vec![tunnel.edge.0.clone(); degree + 1];
    let mut signs = Vec::with_capacity(dim);
    for d in 0..dim {
        let bounds: Vec<f64> = (1..=gamma)
            .map(|j| limits.t_min.powi(j as i32) * limits.limit(j, d))
            .collect();
        let origin = tunnel.edge.0[d];
        let (pattern, col) = patterns.iter().find_map(|s| {
            solve_dimension(
                degree,
                tunnel.edge.1[d] - origin,
                bb.lower[d] - origin,
                bb.upper[d] - origin,
                &bounds,
                s,
            )
            .map(|c| (s.clone(), c))
        })?;
        for (i, v) in col.into_iter().enumerate() {
            points[i][d] = origin + v;
        }
        signs.push(pattern);
    }
    Some(KminWitness {
        degree,
        control_points: points,
        signs,
    })
}

/// True when every dimension admits some saturating sign pattern.
pub fn kmin_feasible(tunnel: &Tunnel, limits: &Limits, degree: usize) -> bool {
    kmin_witness(tunnel, limits, degree).is_some()
}

/// Sweeps the degree upward and returns the smallest one feasible for every
/// action. Feasibility is monotone in the degree (degree elevation keeps
/// control points inside the convex hull of the originals).
pub fn compute_kmin(tunnels: &[Tunnel], limits: &Limits, cfg: &KminConfig) -> Result<KminResult, KminError> {
    if tunnels.is_empty() {
        return Err(KminError::NoActions);
    }
    let mut k_min = 1;
    for (action, tunnel) in tunnels.iter().enumerate() {
        if tunnel.edge.0.len() != limits.dim() {
            return Err(KminError::DimensionMismatch {
                action,
                expected: limits.dim(),
                got: tunnel.edge.0.len(),
            });
        }
        while !kmin_feasible(tunnel, limits, k_min) {
            k_min += 1;
            if k_min > cfg.max_degree {
                return Err(KminError::NoFeasibleDegree {
                    action,
                    cap: cfg.max_degree,
                });
            }
        }
    }
    Ok(KminResult {
        k_min,
        planning_degree: k_min.max(cfg.min_planning_degree),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_rows_of_cubic() {
        let rows = derivative_rows(3, 1);
        assert_eq!(rows, vec![vec![-3.0, 3.0, 0.0, 0.0], vec![0.0, -3.0, 3.0, 0.0], vec![0.0, 0.0, -3.0, 3.0]]);
        let rows = derivative_rows(3, 3);
        assert_eq!(rows, vec![vec![-6.0, 18.0, -18.0, 6.0]]);
    }

    #[test]
    fn sign_patterns_enumerate() {
        let all = SignPattern::all(2);
        assert_eq!(all.len(), 16);
        let mut uniq = all.clone();
        uniq.dedup();
        assert_eq!(uniq.len(), 16);
    }

    #[test]
    fn stationary_velocity_saturation_needs_degree_two() {
        // Zero net displacement with saturated end velocities: degree 1 has a
        // single velocity point, which cannot vanish; degree 2 reverses.
        let limits = Limits::uniform(1, &[1.0], 1.0, 2.0).unwrap();
        let t = Tunnel::around_edge(&[0.0], &[0.0], 1.0);
        assert!(!kmin_feasible(&t, &limits, 1));
        assert!(kmin_feasible(&t, &limits, 2));
        let w = kmin_witness(&t, &limits, 2).unwrap();
        assert_ne!(w.signs[0].start, w.signs[0].end);
        let r = compute_kmin(&[t], &limits, &KminConfig::default()).unwrap();
        assert_eq!(r.k_min, 2);
        assert_eq!(r.planning_degree, 3);
    }

    #[test]
    fn same_sign_velocity_and_acceleration_is_never_feasible() {
        let limits = Limits::uniform(1, &[1.0, 1.0], 1.0, 2.0).unwrap();
        let t = Tunnel::around_edge(&[0.0], &[1.0], 5.0);
        let s = SignPattern {
            start: vec![1, 1],
            end: vec![1, -1],
        };
        for k in 3..10 {
            assert!(kmin_lp(&t, &limits, k, &s).is_none());
        }
    }

    #[test]
    fn witness_meets_constraints() {
        let limits = Limits::uniform(2, &[1.0, 4.0], 1.5, 3.0).unwrap();
        let t = Tunnel::around_edge(&[1.0, 1.0], &[1.3, 1.0], 0.5);
        let k = compute_kmin(std::slice::from_ref(&t), &limits, &KminConfig::default())
            .unwrap()
            .k_min;
        assert!(kmin_witness(&t, &limits, k - 1).is_none());
        let w = kmin_witness(&t, &limits, k).expect("feasible");
        for dim_signs in &w.signs {
            let w = kmin_lp(&t, &limits, k, dim_signs);
            let w = w.map(|w| w.control_points[0].clone());
            assert!(w.is_none() || w == Some(vec![1.0, 1.0]));
        }
        {
            assert_eq!(w.control_points[0], vec![1.0, 1.0]);
            let last = &w.control_points[k];
            assert!((last[0] - 1.3).abs() < 1e-9 && (last[1] - 1.0).abs() < 1e-9);
            for p in &w.control_points {
                assert!(t.segments[0].contains_with_tol(p, 1e-9));
            }
        }
    }

    #[test]
    fn empty_action_set_errors() {
        let limits = Limits::uniform(1, &[1.0], 1.0, 2.0).unwrap();
        assert_eq!(compute_kmin(&[], &limits, &KminConfig::default()), Err(KminError::NoActions));
    }
}
