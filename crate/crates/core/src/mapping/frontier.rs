//! Frontier extraction: 8-connected clusters of free cells that touch unknown space.

use std::collections::VecDeque;

use super::grid::{CellState, OccupancyGrid};

pub const DEFAULT_MIN_FRONTIER: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Frontier {
    /// Member cells sorted by grid index.
    pub cells: Vec<(usize, usize)>,
    /// Mean member position in world coordinates.
    pub centroid: (f64, f64),
}

impl Frontier {
    pub fn size(&self) -> usize {
        self.cells.len()
    }

    /// Smallest grid index among the members.
    pub fn min_index(&self, width: usize) -> usize {
        self.cells
            .iter()
            .map(|&(x, y)| y * width + x)
            .min()
            .unwrap_or(usize::MAX)
    }

    /// The member closest to the centroid; the navigation target for the frontier.
    pub fn goal_cell(&self, grid: &OccupancyGrid) -> (usize, usize) {
        let mut best = self.cells[0];
        let mut best_d = f64::INFINITY;
        for &(x, y) in &self.cells {
            let (cx, cy) = grid.cell_center(x, y);
            let d = (cx - self.centroid.0).powi(2) + (cy - self.centroid.1).powi(2);
            if d < best_d {
                best_d = d;
                best = (x, y);
            }
        }
        best
    }
}

/// A free cell with at least one 4-neighbour that is unknown (out of bounds counts as unknown).
pub fn is_frontier_cell(grid: &OccupancyGrid, x: usize, y: usize) -> bool {
    if grid.get(x, y) != CellState::Free {
        return false;
    }
    let (x, y) = (x as isize, y as isize);
    [(1, 0), (-1, 0), (0, 1), (0, -1)]
        .iter()
        .any(|&(dx, dy)| grid.get_i(x + dx, y + dy) == CellState::Unknown)
}

/// Connected components of frontier cells under 8-adjacency, keeping those
/// with at least `min_size` members. Ordered by smallest member index.
pub fn extract_frontiers(grid: &OccupancyGrid, min_size: usize) -> Vec<Frontier> {
    let (w, h) = (grid.width(), grid.height());
    let mask: Vec<bool> = (0..w * h)
        .map(|i| is_frontier_cell(grid, i % w, i / w))
        .collect();
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    for start in 0..w * h {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut members = Vec::new();
        while let Some(i) = queue.pop_front() {
            members.push(i);
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if (dx, dy) == (0, 0) || !grid.in_bounds(nx, ny) {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if mask[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        if members.len() < min_size.max(1) {
            continue;
        }
        members.sort_unstable();
        let cells: Vec<(usize, usize)> = members.iter().map(|&i| (i % w, i / w)).collect();
        let n = cells.len() as f64;
        let (sx, sy) = cells.iter().fold((0.0, 0.0), |(sx, sy), &(x, y)| {
            let (cx, cy) = grid.cell_center(x, y);
            (sx + cx, sy + cy)
        });
        out.push(Frontier {
            cells,
            centroid: (sx / n, sy / n),
        });
    }
    out
}
