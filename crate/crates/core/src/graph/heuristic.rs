use std::collections::VecDeque;

use thiserror::Error;

use crate::world::CollisionWorld;

use super::GoalRegion;

pub trait Heuristic: Send + Sync {
    /// Nonnegative cost-to-go estimate; `f64::INFINITY` when unreachable.
    fn h(&self, coords: &[f64]) -> f64;
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HeuristicError {
    #[error("goal cell is in collision")]
    GoalBlocked,
    #[error("resolution must be positive")]
    BadResolution,
    #[error("grid would have {0} cells")]
    TooLarge(usize),
}

/// Backward breadth-first search over a uniform grid with full
/// `3^n - 1` connectivity. Blocked cells have no distance.
#[derive(Debug, Clone)]
pub struct GridHeuristic {
    lower: Vec<f64>,
    cell: f64,
    shape: Vec<usize>,
    hops: Vec<u32>,
    goal: GoalRegion,
    scale: f64,
}

const UNREACHED: u32 = u32::MAX;
const MAX_CELLS: usize = 4_000_000;

impl GridHeuristic {
    fn index(&self, cell: &[usize]) -> usize {
        cell.iter()
            .zip(&self.shape)
            .fold(0, |acc, (&c, &s)| acc * s + c)
    }

    fn cell_of(&self, coords: &[f64]) -> Vec<usize> {
        coords
            .iter()
            .zip(&self.lower)
            .zip(&self.shape)
            .map(|((c, lo), &s)| (((c - lo) / self.cell).floor().max(0.0) as usize).min(s - 1))
            .collect()
    }

    fn neighbors(&self, cell: &[usize]) -> Vec<Vec<usize>> {
        let n = cell.len();
        let mut out = Vec::with_capacity(3usize.pow(n as u32) - 1);
        for code in 0..3usize.pow(n as u32) {
            let mut c = code;
            let mut nb = Vec::with_capacity(n);
            let mut same = true;
            let mut valid = true;
            for d in 0..n {
                let off = (c % 3) as i64 - 1;
                c /= 3;
                same &= off == 0;
                let v = cell[d] as i64 + off;
                valid &= v >= 0 && (v as usize) < self.shape[d];
                nb.push(v.max(0) as usize);
            }
            if valid && !same {
                out.push(nb);
            }
        }
        out
    }

    fn center(&self, cell: &[usize]) -> Vec<f64> {
        cell.iter()
            .zip(&self.lower)
            .map(|(&c, lo)| lo + (c as f64 + 0.5) * self.cell)
            .collect()
    }

    /// BFS hop count of the cell containing `coords`, if reached.
    pub fn hops_at(&self, coords: &[f64]) -> Option<u32> {
        let h = self.hops[self.index(&self.cell_of(coords))];
        (h != UNREACHED).then_some(h)
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }
}

impl Heuristic for GridHeuristic {
    fn h(&self, coords: &[f64]) -> f64 {
        if self.goal.contains(coords) {
            return 0.0;
        }
        let cell = self.cell_of(coords);
        let mut hops = self.hops[self.index(&cell)];
        if hops == UNREACHED {
            // States hugging an obstacle may fall in a blocked cell.
            hops = self
                .neighbors(&cell)
                .iter()
                .map(|nb| self.hops[self.index(nb)])
                .filter(|&h| h != UNREACHED)
                .min()
                .map_or(UNREACHED, |h| h + 1);
        }
        if hops == UNREACHED {
            f64::INFINITY
        } else {
            hops as f64 * self.cell * self.scale
        }
    }
}

/// Grid BFS from the goal's cell. A cell is free when its center is free;
/// a move between neighbors also needs the midpoint free.
pub fn bfs_heuristic(
    goal: &GoalRegion,
    world: &dyn CollisionWorld,
    resolution: f64,
    scale: f64,
) -> Result<GridHeuristic, HeuristicError> {
    if !(resolution > 0.0) {
        return Err(HeuristicError::BadResolution);
    }
    let bounds = world.bounds();
    let shape: Vec<usize> = (0..bounds.dim())
        .map(|d| (((bounds.upper[d] - bounds.lower[d]) / resolution).ceil() as usize).max(1))
        .collect();
    let total = shape.iter().try_fold(1usize, |acc, &s| acc.checked_mul(s)).unwrap_or(usize::MAX);
    if total > MAX_CELLS {
        return Err(HeuristicError::TooLarge(total));
    }
    let mut grid = GridHeuristic {
        lower: bounds.lower.clone(),
        cell: resolution,
        shape,
        hops: vec![UNREACHED; total],
        goal: goal.clone(),
        scale,
    };
    let mut free = vec![None::<bool>; total];
    let mut is_free = |g: &GridHeuristic, cell: &[usize]| -> bool {
        let idx = g.index(cell);
        *free[idx].get_or_insert_with(|| world.point_free(&g.center(cell)))
    };
    let start = grid.cell_of(&goal.center);
    if !world.point_free(&goal.center) {
        return Err(HeuristicError::GoalBlocked);
    }
    let start_idx = grid.index(&start);
    grid.hops[start_idx] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(cell) = queue.pop_front() {
        let h = grid.hops[grid.index(&cell)];
        let here = grid.center(&cell);
        for nb in grid.neighbors(&cell) {
            let idx = grid.index(&nb);
            if grid.hops[idx] != UNREACHED || !is_free(&grid, &nb) {
                continue;
            }
            let there = grid.center(&nb);
            let mid: Vec<f64> = here.iter().zip(&there).map(|(a, b)| 0.5 * (a + b)).collect();
            if !world.point_free(&mid) {
                continue;
            }
            grid.hops[idx] = h + 1;
            queue.push_back(nb);
        }
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bspline::BoundingBox;
    use crate::world::{point2d_world, Obstacle};

    #[test]
    fn empty_world_is_chebyshev() {
        let w = point2d_world(vec![], BoundingBox::new(vec![0.0, 0.0], vec![10.0, 10.0]).unwrap());
        let goal = GoalRegion::new(vec![5.25, 5.25], 0.01);
        let h = bfs_heuristic(&goal, &w, 0.5, 1.0).unwrap();
        assert_eq!(h.h(&[5.25, 5.25]), 0.0);
        assert_eq!(h.h(&[7.25, 6.25]), 2.0);
        assert_eq!(h.h(&[0.25, 5.25]), 5.0);
        assert_eq!(h.h(&[9.75, 9.75]), 4.5);
    }

    #[test]
    fn blocked_goal_errors() {
        let w = point2d_world(
            vec![Obstacle::Disc { center: [5.0, 5.0], radius: 1.0 }],
            BoundingBox::new(vec![0.0, 0.0], vec![10.0, 10.0]).unwrap(),
        );
        let goal = GoalRegion::new(vec![5.0, 5.0], 0.1);
        assert_eq!(bfs_heuristic(&goal, &w, 0.5, 1.0).err(), Some(HeuristicError::GoalBlocked));
    }

    #[test]
    fn wall_forces_detour() {
        let w = point2d_world(
            vec![Obstacle::Rect { min: [4.0, 0.0], max: [5.0, 8.0] }],
            BoundingBox::new(vec![0.0, 0.0], vec![10.0, 10.0]).unwrap(),
        );
        let goal = GoalRegion::new(vec![2.25, 2.25], 0.01);
        let h = bfs_heuristic(&goal, &w, 0.5, 1.0).unwrap();
        // Around the top of the wall: the straight-line value would be 3.5.
        assert!(h.h(&[7.25, 2.25]) > 5.0);
    }
}
