//! Unit-cost 4-connected path planning over the occupancy grid.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use super::grid::{CellState, OccupancyGrid};

const NEIGHBOURS: [(isize, isize); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// Traversal rule: free cells, the start, and the goal are passable.
fn passable(
    grid: &OccupancyGrid,
    x: isize,
    y: isize,
    start: (usize, usize),
    goal: (usize, usize),
) -> bool {
    if !grid.in_bounds(x, y) {
        return false;
    }
    let c = (x as usize, y as usize);
    c == start || c == goal || grid.get(c.0, c.1) == CellState::Free
}

/// A* with the Manhattan heuristic. Returns the cell path including both
/// endpoints, or `None` when the goal is unreachable.
pub fn plan_path(
    grid: &OccupancyGrid,
    start: (usize, usize),
    goal: (usize, usize),
) -> Option<Vec<(usize, usize)>> {
    let w = grid.width();
    let n = w * grid.height();
    if start.0 >= w || goal.0 >= w || start.1 >= grid.height() || goal.1 >= grid.height() {
        return None;
    }
    let idx = |(x, y): (usize, usize)| y * w + x;
    let h = |(x, y): (usize, usize)| x.abs_diff(goal.0) + y.abs_diff(goal.1);
    let mut g = vec![usize::MAX; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    g[idx(start)] = 0;
    // Ties on f broken toward larger g (deeper nodes), then lower index.
    open.push(Reverse((h(start), Reverse(0usize), idx(start))));
    while let Some(Reverse((_, _, i))) = open.pop() {
        if closed[i] {
            continue;
        }
        closed[i] = true;
        let cur = (i % w, i / w);
        if cur == goal {
            let mut path = vec![cur];
            let mut j = i;
            while parent[j] != usize::MAX {
                j = parent[j];
                path.push((j % w, j / w));
            }
            path.reverse();
            return Some(path);
        }
        for (dx, dy) in NEIGHBOURS {
            let (nx, ny) = (cur.0 as isize + dx, cur.1 as isize + dy);
            if !passable(grid, nx, ny, start, goal) {
                continue;
            }
            let nc = (nx as usize, ny as usize);
            let j = idx(nc);
            let ng = g[i] + 1;
            if ng < g[j] {
                g[j] = ng;
                parent[j] = i;
                open.push(Reverse((ng + h(nc), Reverse(ng), j)));
            }
        }
    }
    None
}

/// Number of steps in a path returned by [`plan_path`].
pub fn path_length(path: &[(usize, usize)]) -> usize {
    path.len().saturating_sub(1)
}

/// Breadth-first step distances from `start` over free cells (plus `start`).
/// Unreachable cells hold `None`. Cells that are not free are reported when
/// adjacent to a reached cell, matching [`plan_path`]'s goal exemption.
pub fn bfs_distances(grid: &OccupancyGrid, start: (usize, usize)) -> Vec<Option<usize>> {
    let w = grid.width();
    let n = w * grid.height();
    let mut dist = vec![None; n];
    if start.0 >= w || start.1 >= grid.height() {
        return dist;
    }
    let s = start.1 * w + start.0;
    dist[s] = Some(0);
    let mut q = VecDeque::from([s]);
    while let Some(i) = q.pop_front() {
        let d = dist[i].unwrap_or(0);
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for (dx, dy) in NEIGHBOURS {
            let (nx, ny) = (x + dx, y + dy);
            if !grid.in_bounds(nx, ny) {
                continue;
            }
            let j = ny as usize * w + nx as usize;
            if dist[j].is_some() {
                continue;
            }
            dist[j] = Some(d + 1);
            if grid.get(nx as usize, ny as usize) == CellState::Free {
                q.push_back(j);
            }
        }
    }
    dist
}
