use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bspline::BoundingBox;
use crate::graph::{distance, Domain, GoalRegion, ProblemInstance};
use crate::trajopt::Limits;
use crate::world::{point2d_world, CollisionWorld, Obstacle, PointWorld};

use super::config::{BenchConfig, LimitsConfig, WorldConfig};
use super::BenchError;

pub const SUITE_FORMAT: &str = "pinsat-suite";
pub const SUITE_VERSION: u32 = 1;

/// Obstacle layout of a 2D world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub bounds: BoundingBox,
    /// Chamber separators, ordered by x.
    pub bars: Vec<Obstacle>,
    pub obstacles: Vec<Obstacle>,
}

impl EnvironmentSpec {
    pub fn from_config(cfg: &WorldConfig) -> Result<Self, BenchError> {
        let mut bars = cfg.bars.clone();
        for b in &bars {
            if !matches!(b, Obstacle::Rect { .. }) {
                return Err(BenchError::Config("bars must be rectangles".into()));
            }
        }
        bars.sort_by(|a, b| bar_x(a).total_cmp(&bar_x(b)));
        let bounds = BoundingBox::new(vec![0.0, 0.0], vec![cfg.size, cfg.size])
            .ok_or_else(|| BenchError::Config("world size must be positive".into()))?;
        Ok(Self {
            bounds,
            bars,
            obstacles: cfg.clutter.clone(),
        })
    }

    pub fn world(&self) -> PointWorld {
        let mut all = self.bars.clone();
        all.extend(self.obstacles.iter().cloned());
        point2d_world(all, self.bounds.clone())
    }

    /// Index of the chamber containing `p`: the number of bars entirely to
    /// its left.
    pub fn chamber(&self, p: &[f64]) -> usize {
        self.bars.iter().filter(|b| bar_right(b) <= p[0]).count()
    }
}

fn bar_x(o: &Obstacle) -> f64 {
    match o {
        Obstacle::Rect { min, .. } => min[0],
        Obstacle::Disc { center, .. } => center[0],
    }
}

fn bar_right(o: &Obstacle) -> f64 {
    match o {
        Obstacle::Rect { max, .. } => max[0],
        Obstacle::Disc { center, radius } => center[0] + radius,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub id: usize,
    pub start: Vec<f64>,
    pub goal: Vec<f64>,
    pub goal_tolerance: f64,
    /// Per-problem duration cap overriding the suite limits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    pub start_chamber: usize,
    pub goal_chamber: usize,
}

/// A complete, self-describing problem suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suite {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub environment: EnvironmentSpec,
    pub limits: LimitsConfig,
    pub domain: Domain,
    pub problems: Vec<ProblemSpec>,
}

impl Suite {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("suite serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        let suite: Self = serde_json::from_str(text).map_err(|e| BenchError::Format(format!("suite: {e}")))?;
        if suite.format != SUITE_FORMAT || suite.version != SUITE_VERSION {
            return Err(BenchError::Format(format!(
                "unsupported suite format {} v{}",
                suite.format, suite.version
            )));
        }
        Ok(suite)
    }

    pub fn world(&self) -> Arc<dyn CollisionWorld> {
        Arc::new(self.environment.world())
    }

    pub fn limits_for(&self, p: &ProblemSpec) -> Result<Limits, BenchError> {
        let mut lc = self.limits.clone();
        if let Some(t) = p.t_max {
            lc.t_max = t;
        }
        lc.to_limits(2)
    }

    pub fn instance(&self, p: &ProblemSpec) -> Result<ProblemInstance, BenchError> {
        self.instance_in(p, self.world())
    }

    /// Builds the problem against an already constructed world.
    pub fn instance_in(&self, p: &ProblemSpec, world: Arc<dyn CollisionWorld>) -> Result<ProblemInstance, BenchError> {
        Ok(ProblemInstance::new(
            p.start.clone(),
            GoalRegion::new(p.goal.clone(), p.goal_tolerance),
            world,
            self.limits_for(p)?,
            self.domain.clone(),
        )?)
    }

    pub fn problem(&self, id: usize) -> Option<&ProblemSpec> {
        self.problems.iter().find(|p| p.id == id)
    }
}

/// Samples start-goal pairs on a grid with the given clearance, in
/// different chambers and at least `min_separation` apart.
pub fn sample_suite(cfg: &BenchConfig) -> Result<Suite, BenchError> {
    let env = EnvironmentSpec::from_config(&cfg.world)?;
    let sc = &cfg.suite;
    let clear = env.world().inflated(sc.clearance);
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let cells = (cfg.world.size / sc.sample_spacing).floor() as i64;
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..2)
            .map(|_| rng.gen_range(0..=cells) as f64 * sc.sample_spacing)
            .collect()
    };
    let mut problems = Vec::with_capacity(sc.problems);
    for id in 0..sc.problems {
        let mut found = None;
        for _ in 0..sc.max_attempts.max(1) {
            let s = draw(&mut rng);
            let g = draw(&mut rng);
            if !clear.point_free(&s) || !clear.point_free(&g) {
                continue;
            }
            let (cs, cg) = (env.chamber(&s), env.chamber(&g));
            if cs == cg || distance(&s, &g) < sc.min_separation {
                continue;
            }
            found = Some((s, g, cs, cg));
            break;
        }
        let (start, goal, start_chamber, goal_chamber) = found.ok_or(BenchError::SamplingExhausted {
            problem: id,
            attempts: sc.max_attempts,
        })?;
        problems.push(ProblemSpec {
            id,
            start,
            goal,
            goal_tolerance: sc.goal_tolerance,
            t_max: None,
            start_chamber,
            goal_chamber,
        });
    }
    Ok(Suite {
        format: SUITE_FORMAT.into(),
        version: SUITE_VERSION,
        seed: sc.seed,
        environment: env,
        limits: cfg.limits.clone(),
        domain: cfg.domain.to_domain(),
        problems,
    })
}

/// Shortest duration of a start-goal move in free space under the velocity
/// limit: boundary derivatives are free, so the straight line at full speed
/// on the slowest axis is optimal.
pub fn free_space_min_duration(start: &[f64], goal: &[f64], limits: &Limits) -> f64 {
    let t = start
        .iter()
        .zip(goal)
        .enumerate()
        .map(|(d, (a, b))| (b - a).abs() / limits.limit(1, d))
        .fold(0.0, f64::max);
    t.max(limits.t_min)
}

/// Copy of `suite` where each problem's duration cap is `factor` times its
/// free-space minimum duration.
pub fn duration_constrained(suite: &Suite, factor: f64) -> Result<Suite, BenchError> {
    let mut out = suite.clone();
    for p in &mut out.problems {
        let limits = suite.limits_for(p)?;
        p.t_max = Some(factor * free_space_min_duration(&p.start, &p.goal, &limits));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chambers_follow_bars() {
        let env = EnvironmentSpec::from_config(&BenchConfig::default().world).unwrap();
        assert_eq!(env.chamber(&[0.5, 5.0]), 0);
        assert!(env.chamber(&[9.5, 5.0]) >= 1);
    }

    #[test]
    fn seed_repeat_is_identical_and_pairs_straddle() {
        let cfg = BenchConfig::default();
        let a = sample_suite(&cfg).unwrap();
        let b = sample_suite(&cfg).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        for p in &a.problems {
            assert_ne!(env_chamber(&a, &p.start), env_chamber(&a, &p.goal));
            assert_eq!(p.start_chamber, env_chamber(&a, &p.start));
        }
    }

    fn env_chamber(s: &Suite, p: &[f64]) -> usize {
        s.environment.chamber(p)
    }

    #[test]
    fn empty_suite() {
        let mut cfg = BenchConfig::default();
        cfg.suite.problems = 0;
        assert!(sample_suite(&cfg).unwrap().problems.is_empty());
    }

    #[test]
    fn roundtrip_and_constrained_caps() {
        let mut cfg = BenchConfig::default();
        cfg.suite.problems = 3;
        let s = sample_suite(&cfg).unwrap();
        assert_eq!(Suite::from_json(&s.to_json()).unwrap(), s);
        let c = duration_constrained(&s, 1.2).unwrap();
        for p in &c.problems {
            let lim = s.limits_for(p).unwrap();
            let t = p.t_max.unwrap();
            assert!((t - 1.2 * free_space_min_duration(&p.start, &p.goal, &lim)).abs() < 1e-12);
            assert!(c.instance(p).is_ok());
        }
    }

    #[test]
    fn over_constrained_sampling_errors() {
        let mut cfg = BenchConfig::default();
        cfg.suite.min_separation = 1e3;
        cfg.suite.max_attempts = 50;
        assert!(matches!(sample_suite(&cfg), Err(BenchError::SamplingExhausted { .. })));
    }
}
