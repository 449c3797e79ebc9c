use pinsat::baselines::{
    insat_sequential, pbirrt, pbirrt_postprocess, postprocess_iterative_waypoints, search_then_optimize, KinematicPath,
    RrtConfig,
};
use pinsat::bench::{sample_suite, BenchConfig, Suite};
use pinsat::graph::distance;
use pinsat::planner::kmin_degree;
use pinsat::trajopt::{check_feasibility, FeasibilityTolerance};
use pinsat::{plan, PlanResult, PlannerConfig, ProblemInstance};

fn setup(problems: usize) -> (Suite, BenchConfig, PlannerConfig) {
    let mut cfg = BenchConfig::default();
    cfg.suite.problems = problems;
    let suite = sample_suite(&cfg).unwrap();
    let mut pcfg = cfg.planner_config(1);
    pcfg.kmin_degree = Some(kmin_degree(&suite.instance(&suite.problems[0]).unwrap()).unwrap());
    (suite, cfg, pcfg)
}

fn assert_safe(inst: &ProblemInstance, r: &PlanResult, samples: usize, what: &str) {
    if !r.solved() {
        return;
    }
    let t = r.trajectory.as_ref().unwrap();
    let report = check_feasibility(t, &inst.limits, inst.world.as_ref(), samples, FeasibilityTolerance::default());
    assert!(report.passed(), "{what}: {report:?}");
}

#[test]
fn sequential_entry_point_matches_single_thread_plan() {
    let (suite, _, pcfg) = setup(3);
    for spec in &suite.problems {
        let inst = suite.instance(spec).unwrap();
        let a = plan(&inst, &pcfg).unwrap();
        let b = insat_sequential(&inst, &pcfg.with_threads(4)).unwrap();
        assert_eq!(a.status, b.status);
        assert_eq!(a.stats.trace_hash, b.stats.trace_hash);
        assert_eq!(a.cost().to_bits(), b.cost().to_bits());
    }
}

#[test]
fn baseline_successes_are_feasible() {
    let (suite, cfg, pcfg) = setup(5);
    let samples = 10 * pcfg.optimizer.validation_samples;
    for spec in &suite.problems {
        let inst = suite.instance(spec).unwrap();
        for threads in [1, 4] {
            let c = pcfg.with_threads(threads);
            let sto = search_then_optimize(&inst, &c).unwrap();
            assert_safe(&inst, &sto, samples, "search_then_optimize");
            let rrt = RrtConfig {
                seed: cfg.rrt.seed + spec.id as u64,
                ..cfg.rrt.clone()
            };
            let birrt = pbirrt_postprocess(&inst, &c, &rrt).unwrap();
            assert_safe(&inst, &birrt, samples, "pbirrt");
        }
    }
}

#[test]
fn rrt_paths_are_collision_free_and_connect_the_endpoints() {
    let (suite, cfg, _) = setup(5);
    for spec in &suite.problems {
        let inst = suite.instance(spec).unwrap();
        for threads in [1, 3] {
            let (path, stats) = pbirrt(&inst.start.coords, &inst.goal.center, inst.world.as_ref(), &cfg.rrt, threads, None);
            let Some(path) = path else {
                assert!(stats.samples >= cfg.rrt.max_samples);
                continue;
            };
            let w = &path.waypoints;
            assert_eq!(w.first().unwrap(), &inst.start.coords);
            assert_eq!(w.last().unwrap(), &inst.goal.center);
            for seg in w.windows(2) {
                assert!(inst.world.segment_free(&seg[0], &seg[1]));
            }
        }
    }
}

#[test]
fn postprocess_adds_each_waypoint_at_most_once() {
    let (suite, cfg, pcfg) = setup(5);
    for spec in &suite.problems {
        let inst = suite.instance(spec).unwrap();
        let (Some(path), _) = pbirrt(&inst.start.coords, &inst.goal.center, inst.world.as_ref(), &cfg.rrt, 1, None) else {
            continue;
        };
        let interior = path.waypoints.len().saturating_sub(2);
        let out = postprocess_iterative_waypoints(&path, &inst.limits, inst.world.as_ref(), &pcfg.optimizer, None).unwrap();
        let mut seen = out.added.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), out.added.len());
        assert!(out.added.len() <= interior);
        assert!(out.added.iter().all(|&i| i >= 1 && i + 1 < path.waypoints.len()));
        assert_eq!(out.optimizer_calls, out.added.len() + 1);
        if let Some(t) = &out.trajectory {
            assert!(distance(&t.curve.evaluate(t.curve.span().0).unwrap(), &path.waypoints[0]) < 1e-9);
        }
    }
}

#[test]
fn duplicate_points_are_dropped_from_kinematic_paths() {
    let p = KinematicPath::new(vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![3.0, 4.0], vec![3.0, 4.0]]);
    assert_eq!(p.waypoints.len(), 2);
    assert_eq!(p.length(), 5.0);
}
