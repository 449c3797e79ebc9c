use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use crate::graph::{Edge, LowDState, ProblemInstance};
use crate::trajopt::{
    optimize, solve_relaxation, warm_optimize, Containment, Limits, OptimizerConfig,
    RelaxationOutcome, TrajectorySolution, Tunnel,
};
use crate::world::CollisionWorld;

use super::engine::{Ancestor, EdgeEvaluator};

/// One repair attempt: the optimizer settings and the perturbation applied
/// to the initial guess of the local edge solve.
#[derive(Debug, Clone, PartialEq)]
pub struct RepairAttempt {
    pub config: OptimizerConfig,
    /// Interior control points are displaced by up to this amount.
    pub perturbation: f64,
    pub attempt: usize,
}

/// Retry plan for an edge whose local solve failed: attempt `r` doubles the
/// iteration cap and validation density `r` times and perturbs the initial
/// guess by a fraction of the tunnel half-width.
pub fn repair_schedule(cfg: &OptimizerConfig, retries: usize, tunnel_half_width: f64) -> Vec<RepairAttempt> {
    (1..=retries)
        .map(|r| {
            let scale = 1usize << r.min(16);
            let mut config = cfg.clone();
            config.max_iters = cfg.max_iters.saturating_mul(scale);
            config.validation_samples = cfg.validation_samples.saturating_mul(scale);
            RepairAttempt {
                config,
                perturbation: 0.25 * tunnel_half_width / r as f64,
                attempt: r,
            }
        })
        .collect()
}

/// Deterministic displacement of the interior control points.
fn perturbed(sol: &TrajectorySolution, amplitude: f64, attempt: usize) -> TrajectorySolution {
    let mut out = sol.clone();
    let dim = sol.curve.dim();
    let n = sol.curve.num_ctrl();
    let mut pts = sol.curve.points_flat().to_vec();
    for i in 1..n.saturating_sub(1) {
        for d in 0..dim {
            let phase = 0.618_033_988_75 * ((i * (d + 2) + attempt * 7) as f64);
            pts[i * dim + d] += amplitude * (std::f64::consts::TAU * phase).sin();
        }
    }
    out.curve = crate::bspline::BSplineCurve::uniform(sol.curve.degree(), pts, dim, 0.0, 1.0)
        .expect("same shape as the source curve");
    out
}

/// Trajectory-generating edge evaluator: each edge is lifted to a full-D
/// trajectory from the start, searching ancestors for a shortcut first.
pub struct TrajectoryEvaluator {
    pub world: Arc<dyn CollisionWorld>,
    pub limits: Limits,
    pub optimizer: OptimizerConfig,
    /// Degree of the fallback edge solve.
    pub kmin_degree: usize,
    pub tunnel_half_width: f64,
    pub repair_retries: usize,
    pub(crate) optimizer_calls: AtomicUsize,
    pub(crate) repairs: AtomicUsize,
}

impl TrajectoryEvaluator {
    pub fn new(
        world: Arc<dyn CollisionWorld>,
        limits: Limits,
        optimizer: OptimizerConfig,
        kmin_degree: usize,
        tunnel_half_width: f64,
        repair_retries: usize,
    ) -> Self {
        Self {
            world,
            limits,
            optimizer,
            kmin_degree,
            tunnel_half_width,
            repair_retries,
            optimizer_calls: AtomicUsize::new(0),
            repairs: AtomicUsize::new(0),
        }
    }

    pub fn optimizer_calls(&self) -> usize {
        self.optimizer_calls.load(Ordering::Relaxed)
    }

    pub fn repairs(&self) -> usize {
        self.repairs.load(Ordering::Relaxed)
    }

    fn fallback_config(&self) -> OptimizerConfig {
        self.optimizer.with_degree(self.kmin_degree)
    }

    fn count(&self) {
        self.optimizer_calls.fetch_add(1, Ordering::Relaxed);
    }

    fn solve(&self, a: &[f64], b: &[f64], cfg: &OptimizerConfig, init: Option<&TrajectorySolution>) -> Option<TrajectorySolution> {
        self.count();
        optimize(a, b, &self.limits, self.world.as_ref(), cfg, init)
            .ok()
            .filter(TrajectorySolution::is_feasible)
    }

    /// Joins the stored trajectory of `ancestor` with `piece`, or returns
    /// `piece` alone when the ancestor is the start.
    fn combine(&self, ancestor: &Ancestor<TrajectorySolution>, is_start: bool, piece: TrajectorySolution) -> Option<TrajectorySolution> {
        if is_start {
            return Some(piece);
        }
        self.count();
        warm_optimize(&ancestor.payload, &piece, &self.limits, self.world.as_ref(), &self.optimizer)
            .ok()
            .filter(TrajectorySolution::is_feasible)
    }

    /// Local solve of the edge itself: the convex relaxation in the edge
    /// tunnel decides existence, then the edge is re-optimized at the
    /// fallback degree from the relaxed solution, with repair retries.
    fn lift_edge(&self, x: &[f64], target: &[f64]) -> Option<TrajectorySolution> {
        let tunnel = Tunnel::around_edge(x, target, self.tunnel_half_width);
        let cfg = self.fallback_config();
        self.count();
        let relaxed = match solve_relaxation(x, target, &self.limits, Containment::Tunnel(&tunnel), &cfg) {
            Ok(RelaxationOutcome::Solved(s)) => s,
            _ => return None,
        };
        if let Some(sol) = self.solve(x, target, &cfg, Some(&relaxed)) {
            return Some(sol);
        }
        for attempt in repair_schedule(&cfg, self.repair_retries, self.tunnel_half_width) {
            self.repairs.fetch_add(1, Ordering::Relaxed);
            let init = perturbed(&relaxed, attempt.perturbation, attempt.attempt);
            if let Some(sol) = self.solve(x, target, &attempt.config, Some(&init)) {
                return Some(sol);
            }
        }
        None
    }

    /// Full-D trajectory from the start to `edge.to`, or `None` when the
    /// edge cannot be lifted.
    pub fn generate_trajectory(&self, chain: &[Ancestor<TrajectorySolution>], edge: &Edge) -> Option<TrajectorySolution> {
        let target = &edge.to.coords;
        if !self.world.point_free(target) {
            return None;
        }
        let last = chain.len().checked_sub(1)?;
        for (i, ancestor) in chain.iter().enumerate() {
            let from = &ancestor.state.coords;
            if let Some(piece) = self.solve(from, target, &self.optimizer, None) {
                if let Some(full) = self.combine(ancestor, i == 0, piece) {
                    return Some(full);
                }
            }
            if i == last {
                let piece = self.lift_edge(from, target)?;
                return self.combine(ancestor, i == 0, piece);
            }
        }
        None
    }
}

impl EdgeEvaluator for TrajectoryEvaluator {
    type Payload = TrajectorySolution;

    fn root(&self, problem: &ProblemInstance) -> (f64, TrajectorySolution) {
        let sol = TrajectorySolution::stationary(&problem.start.coords, self.optimizer.degree, &self.limits, self.optimizer.w1);
        (0.0, sol)
    }

    fn evaluate(&self, _problem: &ProblemInstance, chain: &[Ancestor<TrajectorySolution>], edge: &Edge) -> Option<(f64, TrajectorySolution)> {
        self.generate_trajectory(chain, edge).map(|s| (s.cost, s))
    }
}

/// Start-first ancestor chain for a given sequence of states and payloads.
pub fn chain_of(states: &[(LowDState, TrajectorySolution)]) -> Vec<Ancestor<TrajectorySolution>> {
    states
        .iter()
        .map(|(s, p)| Ancestor {
            state: s.clone(),
            payload: Arc::new(p.clone()),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bspline::BoundingBox;
    use crate::graph::ActionPrimitive;
    use crate::world::{point2d_world, Obstacle};

    fn limits() -> Limits {
        Limits::uniform(2, &[2.0, 8.0], 0.5, 6.0).unwrap()
    }

    fn evaluator(obstacles: Vec<Obstacle>) -> TrajectoryEvaluator {
        let w = point2d_world(obstacles, BoundingBox::new(vec![0.0, 0.0], vec![10.0, 10.0]).unwrap());
        let cfg = OptimizerConfig { max_iters: 200, ..OptimizerConfig::default() };
        TrajectoryEvaluator::new(Arc::new(w), limits(), cfg, 3, 0.3, 1)
    }

    fn edge(a: &[f64], b: &[f64]) -> Edge {
        Edge {
            from: LowDState::on_lattice(a.to_vec(), 0.25),
            to: LowDState::on_lattice(b.to_vec(), 0.25),
            action: ActionPrimitive::unit(b.iter().zip(a).map(|(x, y)| x - y).collect()),
        }
    }

    #[test]
    fn start_edge_matches_cold_optimize() {
        let ev = evaluator(vec![]);
        let start = LowDState::on_lattice(vec![2.0, 2.0], 0.25);
        let root = TrajectorySolution::stationary(&start.coords, 3, &ev.limits, 1.0);
        let chain = chain_of(&[(start, root)]);
        let e = edge(&[2.0, 2.0], &[3.0, 2.0]);
        let got = ev.generate_trajectory(&chain, &e).unwrap();
        let direct = optimize(&[2.0, 2.0], &[3.0, 2.0], &ev.limits, ev.world.as_ref(), &ev.optimizer, None).unwrap();
        assert_eq!(got.cost, direct.cost);
        assert_eq!(ev.optimizer_calls(), 1);
    }

    #[test]
    fn shortcut_from_start_replaces_edge() {
        let ev = evaluator(vec![]);
        let s = LowDState::on_lattice(vec![2.0, 2.0], 0.25);
        let m = LowDState::on_lattice(vec![3.0, 2.0], 0.25);
        let root = TrajectorySolution::stationary(&s.coords, 3, &ev.limits, 1.0);
        let mid = optimize(&s.coords, &m.coords, &ev.limits, ev.world.as_ref(), &ev.optimizer, None).unwrap();
        let chain = chain_of(&[(s.clone(), root), (m, mid)]);
        let e = edge(&[3.0, 2.0], &[3.0, 3.0]);
        let got = ev.generate_trajectory(&chain, &e).unwrap();
        let direct = optimize(&s.coords, &[3.0, 3.0], &ev.limits, ev.world.as_ref(), &ev.optimizer, None).unwrap();
        assert_eq!(got.cost, direct.cost);
        assert_eq!(got.start, s.coords);
    }

    #[test]
    fn blocked_target_is_unliftable() {
        let ev = evaluator(vec![Obstacle::Disc { center: [3.0, 2.0], radius: 0.3 }]);
        let s = LowDState::on_lattice(vec![2.0, 2.0], 0.25);
        let root = TrajectorySolution::stationary(&s.coords, 3, &ev.limits, 1.0);
        let chain = chain_of(&[(s, root)]);
        assert!(ev.generate_trajectory(&chain, &edge(&[2.0, 2.0], &[3.0, 2.0])).is_none());
        assert_eq!(ev.optimizer_calls(), 0);
    }

    #[test]
    fn repair_schedule_doubles_and_is_empty_at_zero() {
        let cfg = OptimizerConfig::default();
        assert!(repair_schedule(&cfg, 0, 0.3).is_empty());
        let s = repair_schedule(&cfg, 2, 0.3);
        assert_eq!(s[0].config.max_iters, 2 * cfg.max_iters);
        assert_eq!(s[1].config.max_iters, 4 * cfg.max_iters);
        assert_eq!(s[0].config.validation_samples, 2 * cfg.validation_samples);
    }

    #[test]
    fn repair_recovers_iteration_capped_solve() {
        // A cap of one iteration cannot reach a feasible iterate from the
        // relaxation guess at t_max; the doubled caps of the repair can.
        let w = point2d_world(vec![], BoundingBox::new(vec![0.0, 0.0], vec![10.0, 10.0]).unwrap());
        let lim = Limits::uniform(2, &[1.0, 4.0], 0.5, 1.5).unwrap();
        let mut cfg = OptimizerConfig { max_iters: 1, max_outer_iters: 1, ..OptimizerConfig::default() };
        cfg.validation_samples = 16;
        let plain = TrajectoryEvaluator::new(Arc::new(w.clone()), lim.clone(), cfg.clone(), 3, 0.3, 0);
        let repaired = TrajectoryEvaluator::new(Arc::new(w), lim, cfg, 3, 0.3, 6);
        let a = [2.0, 2.0];
        let b = [3.0, 2.0];
        let base = plain.lift_edge(&a, &b);
        let fixed = repaired.lift_edge(&a, &b);
        assert!(fixed.is_some() || base.is_none());
        if base.is_none() {
            assert!(repaired.repairs() >= 1);
        }
    }
}
