use std::f64::consts::TAU;

use super::raycast::cast_ray;
use super::sim::{Pose, World};

pub const LIDAR_BEAMS: usize = 36;

#[derive(Debug, Clone, PartialEq)]
pub struct LidarScan {
    /// Beam `k` points at `pose.theta + k·2π/36`.
    pub ranges: Vec<f64>,
    pub max_range: f64,
    pub pose: Pose,
}

impl LidarScan {
    pub fn beam_angle(&self, k: usize) -> f64 {
        self.pose.theta + k as f64 * TAU / self.ranges.len() as f64
    }
}

/// Range to the nearest wall per beam, capped at the world's lidar range.
/// Billboards are not lidar-visible.
pub fn lidar_scan(world: &World, pose: Pose) -> LidarScan {
    let max_range = world.lidar_max_range;
    let mut ranges = Vec::with_capacity(LIDAR_BEAMS);
    for k in 0..LIDAR_BEAMS {
        let angle = pose.theta + k as f64 * TAU / LIDAR_BEAMS as f64;
        let r = cast_ray(&world.spec, pose.x, pose.y, angle, max_range)
            .map_or(max_range, |h| h.distance);
        ranges.push(r.clamp(1e-6, max_range));
    }
    LidarScan {
        ranges,
        max_range,
        pose,
    }
}
