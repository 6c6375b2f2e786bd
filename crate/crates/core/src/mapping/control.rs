//! Pure-pursuit style tracking of a planned cell path.

use super::grid::{ray_cells, CellState, OccupancyGrid};
use crate::world::{KinematicLimits, Pose};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FollowerConfig {
    /// Waypoints closer than this are considered passed, metres.
    pub reach: f64,
    /// How many waypoints ahead the follower may aim at.
    pub lookahead: usize,
    pub heading_gain: f64,
    /// Heading errors above this turn in place.
    pub turn_in_place: f64,
}

impl Default for FollowerConfig {
    fn default() -> Self {
        Self {
            reach: 0.15,
            lookahead: 3,
            heading_gain: 2.5,
            turn_in_place: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathFollower {
    waypoints: Vec<(f64, f64)>,
    next: usize,
    pub config: FollowerConfig,
}

fn clear_line(grid: &OccupancyGrid, from: (f64, f64), to: (f64, f64)) -> bool {
    let (dx, dy) = (to.0 - from.0, to.1 - from.1);
    let len = dx.hypot(dy);
    if len < 1e-9 {
        return true;
    }
    ray_cells(grid, from.0, from.1, dy.atan2(dx), len)
        .iter()
        .all(|&((x, y), _)| grid.get_i(x, y) == CellState::Free)
}

impl PathFollower {
    pub fn new(grid: &OccupancyGrid, path: &[(usize, usize)], config: FollowerConfig) -> Self {
        Self {
            waypoints: path.iter().map(|&(x, y)| grid.cell_center(x, y)).collect(),
            next: 0,
            config,
        }
    }

    pub fn is_done(&self) -> bool {
        self.next >= self.waypoints.len()
    }

    pub fn remaining(&self) -> usize {
        self.waypoints.len() - self.next.min(self.waypoints.len())
    }

    /// Velocity command toward the path; `None` once the last waypoint is reached.
    pub fn command(
        &mut self,
        pose: Pose,
        grid: &OccupancyGrid,
        limits: &KinematicLimits,
    ) -> Option<(f64, f64)> {
        let here = (pose.x, pose.y);
        let dist = |p: (f64, f64)| (p.0 - here.0).hypot(p.1 - here.1);
        while self.next < self.waypoints.len()
            && dist(self.waypoints[self.next]) < self.config.reach
        {
            self.next += 1;
        }
        if self.is_done() {
            return None;
        }
        let last = (self.next + self.config.lookahead).min(self.waypoints.len() - 1);
        let target = (self.next..=last)
            .rev()
            .map(|i| self.waypoints[i])
            .find(|&p| clear_line(grid, here, p))
            .unwrap_or(self.waypoints[self.next]);
        let bearing = (target.1 - pose.y).atan2(target.0 - pose.x);
        let err = (bearing - pose.theta + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU)
            - std::f64::consts::PI;
        let omega = (self.config.heading_gain * err).clamp(-limits.omega_max, limits.omega_max);
        let v = if err.abs() > self.config.turn_in_place {
            0.0
        } else {
            limits.v_max * err.cos().max(0.0)
        };
        Some((v, omega))
    }
}
