use pinsat::bspline::{BSplineCurve, BoundingBox};
use pinsat::trajopt::{
    check_feasibility, concatenate_for_warm_start, optimize, warm_optimize, FeasibilityTolerance, Limits,
    OptimizerConfig, SolveStatus, TrajectorySolution,
};
use pinsat::world::{point2d_world, CollisionWorld, Obstacle, PointWorld};
use proptest::prelude::*;

fn limits() -> Limits {
    Limits::uniform(2, &[1.0, 4.0, 16.0], 1.0, 30.0).unwrap()
}

fn cfg() -> OptimizerConfig {
    OptimizerConfig {
        validation_samples: 32,
        ..OptimizerConfig::default()
    }
}

fn world(discs: &[(f64, f64, f64)]) -> PointWorld {
    point2d_world(
        discs
            .iter()
            .map(|&(x, y, r)| Obstacle::Disc { center: [x, y], radius: r })
            .collect(),
        BoundingBox::new(vec![0.0, 0.0], vec![10.0, 10.0]).unwrap(),
    )
}

fn solution(curve: BSplineCurve, duration: f64, c: &OptimizerConfig) -> TrajectorySolution {
    let start = curve.point(0).to_vec();
    let goal = curve.point(curve.num_ctrl() - 1).to_vec();
    let mut s = TrajectorySolution {
        curve,
        duration,
        cost: 0.0,
        status: SolveStatus::Converged,
        start,
        goal,
        iterations: 0,
        failure: None,
        collision_point: None,
    };
    s.cost = c.w1 * duration + c.w2 * s.path_length();
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Converged solves re-check cleanly at ten times the sampling density.
    #[test]
    fn converged_solutions_pass_dense_check(
        a in (1.0f64..9.0, 1.0f64..9.0),
        b in (1.0f64..9.0, 1.0f64..9.0),
        discs in prop::collection::vec((2.0f64..8.0, 2.0f64..8.0, 0.2f64..0.8), 0..3),
    ) {
        let w = world(&discs);
        let (x1, x2) = (vec![a.0, a.1], vec![b.0, b.1]);
        prop_assume!(w.point_free(&x1) && w.point_free(&x2));
        let c = cfg();
        let sol = optimize(&x1, &x2, &limits(), &w, &c, None).unwrap();
        if sol.status == SolveStatus::Converged {
            let report = check_feasibility(&sol, &limits(), &w, 10 * c.validation_samples, FeasibilityTolerance::default());
            prop_assert!(report.passed(), "{report:?}");
        }
    }

    /// Derivative bounds at the control points imply sampled bounds.
    #[test]
    fn control_point_bounds_are_sufficient(
        k in 3usize..=5,
        pts in prop::collection::vec(prop::collection::vec(0.5f64..9.5, 2), 8),
        slack in 1.0f64..1.5,
    ) {
        let curve = BSplineCurve::from_points(k, &pts, 0.0, 1.0).unwrap();
        let lim = limits();
        // Smallest duration meeting the control-point bounds, then stretched.
        let mut t = lim.t_min;
        for j in 1..=3 {
            let m = curve
                .derivative_control_points(j)
                .unwrap()
                .iter()
                .flatten()
                .fold(0.0f64, |acc, v| acc.max(v.abs()));
            t = t.max((m / lim.limit(j, 0)).powf(1.0 / j as f64));
        }
        let t = t * slack;
        let lim = Limits::uniform(2, &[1.0, 4.0, 16.0], 1.0, t.max(1.0) * 2.0).unwrap();
        let sol = solution(curve, t, &cfg());
        let report = check_feasibility(&sol, &lim, &world(&[]), 640, FeasibilityTolerance::default());
        prop_assert!(report.control_points_ok);
        prop_assert!(report.derivatives_ok, "{:?}", report.max_ratio);
    }

    /// Re-optimizing a feasible concatenation never costs more than it.
    #[test]
    fn warm_start_does_not_increase_cost(
        a in (1.0f64..4.0, 1.0f64..9.0),
        m in (4.0f64..6.0, 1.0f64..9.0),
        b in (6.0f64..9.0, 1.0f64..9.0),
    ) {
        let w = world(&[]);
        let c = cfg();
        let lim = limits();
        let p = optimize(&[a.0, a.1], &[m.0, m.1], &lim, &w, &c, None).unwrap();
        let s = optimize(&[m.0, m.1], &[b.0, b.1], &lim, &w, &c, None).unwrap();
        prop_assume!(p.is_feasible() && s.is_feasible());
        let (joined, duration) = concatenate_for_warm_start(&p, &s, &c).unwrap();
        let guess = solution(joined, duration, &c);
        let guess_ok = check_feasibility(&guess, &lim, &w, c.validation_samples, FeasibilityTolerance::default()).passed();
        let out = warm_optimize(&p, &s, &lim, &w, &c).unwrap();
        if guess_ok {
            prop_assert!(out.is_feasible());
            prop_assert!(out.cost <= guess.cost + c.convergence_tol, "{} > {}", out.cost, guess.cost);
        }
    }
}
