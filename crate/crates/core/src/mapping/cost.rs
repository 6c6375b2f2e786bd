//! Frontier costing and greedy goal selection.

use super::frontier::Frontier;
use super::grid::OccupancyGrid;
use super::planner::bfs_distances;
use crate::world::Pose;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostWeights {
    /// Per metre of path.
    pub distance: f64,
    /// Per frontier cell.
    pub size: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            distance: 1.0,
            size: 0.2,
        }
    }
}

/// Robot cell clamped into the grid.
pub fn robot_cell(grid: &OccupancyGrid, pose: Pose) -> (usize, usize) {
    let (x, y) = grid.world_to_cell(pose.x, pose.y);
    (
        x.clamp(0, grid.width() as isize - 1) as usize,
        y.clamp(0, grid.height() as isize - 1) as usize,
    )
}

/// `w_d · path distance − w_s · size`, with path distance measured to the
/// frontier's goal cell. Unreachable frontiers cost `+∞`.
pub fn base_cost(
    frontier: &Frontier,
    pose: Pose,
    grid: &OccupancyGrid,
    weights: &CostWeights,
) -> f64 {
    base_costs(std::slice::from_ref(frontier), pose, grid, weights)[0]
}

/// [`base_cost`] for many frontiers sharing one distance field.
pub fn base_costs(
    frontiers: &[Frontier],
    pose: Pose,
    grid: &OccupancyGrid,
    weights: &CostWeights,
) -> Vec<f64> {
    let dist = bfs_distances(grid, robot_cell(grid, pose));
    frontiers
        .iter()
        .map(|f| {
            let (gx, gy) = f.goal_cell(grid);
            match dist[grid.index(gx, gy)] {
                Some(d) => {
                    weights.distance * d as f64 * grid.resolution() - weights.size * f.size() as f64
                }
                None => f64::INFINITY,
            }
        })
        .collect()
}

/// Index of the cheapest finite-cost frontier; ties go to the larger
/// frontier, then to the smaller minimum cell index.
pub fn select_goal(frontiers: &[Frontier], costs: &[f64], grid_width: usize) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, (f, &c)) in frontiers.iter().zip(costs).enumerate() {
        if !c.is_finite() {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) => {
                let (bf, bc) = (&frontiers[b], costs[b]);
                let better = c < bc
                    || (c == bc
                        && (f.size() > bf.size()
                            || (f.size() == bf.size()
                                && f.min_index(grid_width) < bf.min_index(grid_width))));
                Some(if better { i } else { b })
            }
        };
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::grid::CellState;

    fn frontier(cells: Vec<(usize, usize)>) -> Frontier {
        let n = cells.len() as f64;
        let cx = cells.iter().map(|c| c.0 as f64 + 0.5).sum::<f64>() / n;
        let cy = cells.iter().map(|c| c.1 as f64 + 0.5).sum::<f64>() / n;
        Frontier {
            cells,
            centroid: (cx, cy),
        }
    }

    fn open_grid() -> OccupancyGrid {
        OccupancyGrid::from_cells(10, 10, 1.0, vec![CellState::Free; 100])
    }

    #[test]
    fn nearer_and_larger_are_cheaper() {
        let g = open_grid();
        let pose = Pose::new(0.5, 0.5, 0.0);
        let w = CostWeights::default();
        let near = base_cost(&frontier(vec![(2, 0)]), pose, &g, &w);
        let far = base_cost(&frontier(vec![(6, 0)]), pose, &g, &w);
        assert!(near < far);
        let small = base_cost(&frontier(vec![(5, 0)]), pose, &g, &w);
        let large = base_cost(&frontier(vec![(0, 5), (0, 6), (0, 4)]), pose, &g, &w);
        assert!(large < small);
    }

    #[test]
    fn unreachable_is_infinite_and_never_selected() {
        let mut g = open_grid();
        for y in 0..10 {
            g.set(5, y, CellState::Occupied);
        }
        let fs = vec![frontier(vec![(8, 8)]), frontier(vec![(2, 2)])];
        let c = base_costs(&fs, Pose::new(0.5, 0.5, 0.0), &g, &CostWeights::default());
        assert!(c[0].is_infinite());
        assert_eq!(select_goal(&fs, &c, 10), Some(1));
        assert_eq!(select_goal(&fs[..1], &c[..1], 10), None);
    }

    #[test]
    fn tie_break_prefers_larger_then_lower_index() {
        let fs = vec![
            frontier(vec![(3, 3)]),
            frontier(vec![(1, 1), (1, 2)]),
            frontier(vec![(0, 0), (0, 1)]),
        ];
        assert_eq!(select_goal(&fs, &[1.0, 1.0, 1.0], 10), Some(2));
        assert_eq!(select_goal(&fs[..2], &[1.0, 1.0], 10), Some(1));
        assert_eq!(select_goal(&[], &[], 10), None);
    }
}
