//! Deterministic 2-D multi-room world with a raycast camera and a planar lidar.

pub mod entity;
pub mod lidar;
pub mod raycast;
pub mod render;
pub mod sim;
pub mod spec;
pub mod texture;

pub use entity::{DynamicEntity, EntityKind};
pub use lidar::{lidar_scan, LidarScan, LIDAR_BEAMS};
pub use render::{render_camera, render_view, CameraConfig, CameraView};
pub use sim::{KinematicLimits, Pose, RobotState, SensorNoise, World, DT};
pub use spec::{Cell, RoomTag, WorldSpec, ROOM_COUNT};

impl World {
    /// Camera frame and lidar scan at the robot pose, with sensor noise applied when enabled.
    pub fn observe(&mut self, cam: &CameraConfig) -> (CameraView, LidarScan) {
        let pose = self.robot.pose;
        let mut view = render_view(self, pose, cam);
        let mut scan = lidar_scan(self, pose);
        if let Some(noise) = self.noise.as_mut() {
            let (ps, rs) = (noise.pixel_sigma, noise.range_sigma);
            if ps > 0.0 {
                let data: Vec<f64> = view
                    .frame
                    .data()
                    .iter()
                    .map(|&v| v + noise.sample(ps))
                    .collect();
                view.frame = crate::memory::Frame::from_clamped(
                    view.frame.height(),
                    view.frame.width(),
                    data,
                )
                .expect("same dimensions");
            }
            if rs > 0.0 {
                for r in &mut scan.ranges {
                    *r = (*r + noise.sample(rs)).clamp(1e-6, scan.max_range);
                }
            }
        }
        (view, scan)
    }
}
