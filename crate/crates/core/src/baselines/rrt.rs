use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::distance;
use crate::world::CollisionWorld;

use super::KinematicPath;

/// Bidirectional RRT parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RrtConfig {
    /// Maximum extension length.
    pub step: f64,
    /// Probability of sampling the other tree's root.
    pub goal_bias: f64,
    /// Total samples over all workers before giving up.
    pub max_samples: usize,
    pub seed: u64,
}

impl Default for RrtConfig {
    fn default() -> Self {
        Self {
            step: 0.5,
            goal_bias: 0.1,
            max_samples: 20_000,
            seed: 0,
        }
    }
}

impl RrtConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.step > 0.0) {
            return Err("rrt step must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.goal_bias) {
            return Err("rrt goal bias must lie in [0, 1]".into());
        }
        Ok(())
    }
}

#[derive(Debug, Default)]
struct Tree {
    points: Vec<Vec<f64>>,
    parents: Vec<usize>,
}

impl Tree {
    fn rooted(p: &[f64]) -> Self {
        Self {
            points: vec![p.to_vec()],
            parents: vec![0],
        }
    }

    fn nearest(&self, q: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, p) in self.points.iter().enumerate() {
            let d = distance(p, q);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    fn push(&mut self, p: Vec<f64>, parent: usize) -> usize {
        self.points.push(p);
        self.parents.push(parent);
        self.points.len() - 1
    }

    /// Root-to-node chain.
    fn branch(&self, mut i: usize) -> Vec<Vec<f64>> {
        let mut out = vec![self.points[i].clone()];
        while i != 0 {
            i = self.parents[i];
            out.push(self.points[i].clone());
        }
        out.reverse();
        out
    }
}

struct Shared {
    trees: [Tree; 2],
    samples: usize,
    path: Option<Vec<Vec<f64>>>,
    done: bool,
}

fn steer(from: &[f64], to: &[f64], step: f64) -> Vec<f64> {
    let d = distance(from, to);
    if d <= step {
        return to.to_vec();
    }
    from.iter().zip(to).map(|(a, b)| a + (b - a) * step / d).collect()
}

/// Statistics of a bidirectional RRT run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RrtStats {
    pub samples: usize,
    pub nodes: usize,
}

/// Parallel bidirectional RRT: `threads` workers grow a start tree and a
/// goal tree shared under one lock. Nearest-neighbor lookups and inserts
/// happen under the lock; steering and collision checks happen outside it.
pub fn pbirrt(
    start: &[f64],
    goal: &[f64],
    world: &dyn CollisionWorld,
    cfg: &RrtConfig,
    threads: usize,
    deadline: Option<Instant>,
) -> (Option<KinematicPath>, RrtStats) {
    if !world.point_free(start) || !world.point_free(goal) {
        return (None, RrtStats::default());
    }
    if deadline.is_some_and(|d| Instant::now() >= d) {
        return (None, RrtStats::default());
    }
    if world.segment_free(start, goal) {
        let path = KinematicPath {
            waypoints: vec![start.to_vec(), goal.to_vec()],
        };
        return (Some(path), RrtStats { samples: 0, nodes: 2 });
    }
    let shared = Mutex::new(Shared {
        trees: [Tree::rooted(start), Tree::rooted(goal)],
        samples: 0,
        path: None,
        done: false,
    });
    let bounds = world.bounds().clone();
    std::thread::scope(|scope| {
        for worker in 0..threads.max(1) {
            let shared = &shared;
            let bounds = &bounds;
            scope.spawn(move || {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(worker as u64));
                let mut side = worker % 2;
                loop {
                    let other = 1 - side;
                    // Sample and find the nearest node of the growing tree.
                    let (near_idx, near, sample) = {
                        let mut s = shared.lock().expect("rrt lock");
                        if s.done || s.samples >= cfg.max_samples || deadline.is_some_and(|d| Instant::now() >= d) {
                            s.done = true;
                            return;
                        }
                        s.samples += 1;
                        let q: Vec<f64> = if rng.gen::<f64>() < cfg.goal_bias {
                            s.trees[other].points[0].clone()
                        } else {
                            (0..bounds.dim())
                                .map(|d| rng.gen_range(bounds.lower[d]..=bounds.upper[d]))
                                .collect()
                        };
                        let i = s.trees[side].nearest(&q);
                        let near = s.trees[side].points[i].clone();
                        (i, near, q)
                    };
                    let new = steer(&near, &sample, cfg.step);
                    if !world.point_free(&new) || !world.segment_free(&near, &new) {
                        side = other;
                        continue;
                    }
                    let (new_idx, target_idx, target) = {
                        let mut s = shared.lock().expect("rrt lock");
                        if s.done {
                            return;
                        }
                        let k = s.trees[side].push(new.clone(), near_idx);
                        let j = s.trees[other].nearest(&new);
                        (k, j, s.trees[other].points[j].clone())
                    };
                    // Greedy connect of the other tree toward the new node.
                    let mut chain = Vec::new();
                    let mut cur = target.clone();
                    let mut reached = false;
                    loop {
                        let next = steer(&cur, &new, cfg.step);
                        if !world.segment_free(&cur, &next) {
                            break;
                        }
                        reached = distance(&next, &new) == 0.0;
                        chain.push(next.clone());
                        cur = next;
                        if reached {
                            break;
                        }
                    }
                    let mut s = shared.lock().expect("rrt lock");
                    if s.done {
                        return;
                    }
                    let mut parent = target_idx;
                    let last = chain.len();
                    for (n, p) in chain.into_iter().enumerate() {
                        if reached && n + 1 == last {
                            break;
                        }
                        parent = s.trees[other].push(p, parent);
                    }
                    if reached {
                        let mut a = s.trees[side].branch(new_idx);
                        let mut b = s.trees[other].branch(parent);
                        b.reverse();
                        a.extend(b);
                        if side == 1 {
                            a.reverse();
                        }
                        s.path = Some(a);
                        s.done = true;
                        return;
                    }
                    drop(s);
                    side = other;
                }
            });
        }
    });
    let s = shared.into_inner().expect("rrt lock");
    let stats = RrtStats {
        samples: s.samples,
        nodes: s.trees[0].points.len() + s.trees[1].points.len(),
    };
    (s.path.map(|waypoints| KinematicPath { waypoints }), stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bspline::BoundingBox;
    use crate::world::{point2d_world, Obstacle};

    fn wall_world() -> crate::world::PointWorld {
        point2d_world(
            vec![Obstacle::Rect { min: [4.5, 0.0], max: [5.5, 8.0] }],
            BoundingBox::new(vec![0.0, 0.0], vec![10.0, 10.0]).unwrap(),
        )
    }

    #[test]
    fn finds_valid_path_around_wall() {
        let w = wall_world();
        for threads in [1, 3] {
            let (path, _) = pbirrt(&[1.0, 1.0], &[9.0, 1.0], &w, &RrtConfig::default(), threads, None);
            let path = path.expect("wall leaves a passage");
            assert_eq!(path.waypoints.first().unwrap(), &vec![1.0, 1.0]);
            assert_eq!(path.waypoints.last().unwrap(), &vec![9.0, 1.0]);
            for s in path.waypoints.windows(2) {
                assert!(w.segment_free(&s[0], &s[1]));
            }
        }
    }

    #[test]
    fn sealed_start_fails() {
        let w = point2d_world(
            vec![Obstacle::Rect { min: [0.0, 2.0], max: [10.0, 2.5] }],
            BoundingBox::new(vec![0.0, 0.0], vec![10.0, 10.0]).unwrap(),
        );
        let cfg = RrtConfig {
            max_samples: 2000,
            ..RrtConfig::default()
        };
        let (path, stats) = pbirrt(&[1.0, 1.0], &[9.0, 9.0], &w, &cfg, 2, None);
        assert!(path.is_none());
        assert!(stats.samples >= cfg.max_samples);
    }

    #[test]
    fn single_thread_is_reproducible() {
        let w = wall_world();
        let a = pbirrt(&[1.0, 1.0], &[9.0, 1.0], &w, &RrtConfig::default(), 1, None);
        let b = pbirrt(&[1.0, 1.0], &[9.0, 1.0], &w, &RrtConfig::default(), 1, None);
        assert_eq!(a, b);
    }
}
