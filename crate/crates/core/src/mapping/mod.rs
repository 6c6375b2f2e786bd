//! Occupancy mapping, frontier exploration and novelty-weighted goal choice.

pub mod control;
pub mod cost;
pub mod frontier;
pub mod grid;
pub mod novelty;
pub mod planner;

pub use control::{FollowerConfig, PathFollower};
pub use cost::{base_cost, base_costs, robot_cell, select_goal, CostWeights};
pub use frontier::{extract_frontiers, is_frontier_cell, Frontier, DEFAULT_MIN_FRONTIER};
pub use grid::{integrate_scan, ray_cells, CellState, OccupancyGrid};
pub use novelty::{apply_novelty, NoveltyConfig, NoveltyLedger, NoveltyRecord, ViewSample};
pub use planner::{bfs_distances, path_length, plan_path};
