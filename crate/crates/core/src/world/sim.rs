use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::entity::{populate, DynamicEntity};
use super::raycast::segment_clear;
use super::spec::WorldSpec;
use crate::error::{Error, Result};

/// Simulation step, seconds.
pub const DT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    /// Heading in radians, `[0, 2π)`, measured from +x towards +y (map rows grow downwards).
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: theta.rem_euclid(TAU),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub pose: Pose,
    pub linear_velocity: f64,
    pub angular_velocity: f64,
}

impl RobotState {
    pub fn at(pose: Pose) -> Self {
        Self {
            pose,
            linear_velocity: 0.0,
            angular_velocity: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicLimits {
    pub v_max: f64,
    pub omega_max: f64,
}

impl Default for KinematicLimits {
    fn default() -> Self {
        Self {
            v_max: 0.5,
            omega_max: 1.5,
        }
    }
}

/// Optional zero-mean Gaussian sensor noise.
#[derive(Debug, Clone)]
pub struct SensorNoise {
    pub pixel_sigma: f64,
    pub range_sigma: f64,
    rng: ChaCha8Rng,
}

impl SensorNoise {
    pub fn new(pixel_sigma: f64, range_sigma: f64, seed: u64) -> Self {
        Self {
            pixel_sigma,
            range_sigma,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub(crate) fn sample(&mut self, sigma: f64) -> f64 {
        if sigma <= 0.0 {
            return 0.0;
        }
        Normal::new(0.0, sigma)
            .map(|n| n.sample(&mut self.rng))
            .unwrap_or(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct World {
    pub spec: WorldSpec,
    pub entities: Vec<DynamicEntity>,
    pub robot: RobotState,
    pub limits: KinematicLimits,
    pub lidar_max_range: f64,
    pub noise: Option<SensorNoise>,
    tick: u64,
    time: f64,
}

pub const DEFAULT_LIDAR_RANGE: f64 = 2.5;

impl World {
    /// Deterministic world: entity layouts and phases come from `seed`; the
    /// robot starts at the centre of the start zone facing +x.
    pub fn build(spec: WorldSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entities = populate(&spec, &mut rng);
        let start = spec.start_cells();
        let n = start.len() as f64;
        let cx = start.iter().map(|&(x, _)| x as f64 + 0.5).sum::<f64>() / n * spec.cell_size;
        let cy = start.iter().map(|&(_, y)| y as f64 + 0.5).sum::<f64>() / n * spec.cell_size;
        Ok(Self {
            spec,
            entities,
            robot: RobotState::at(Pose::new(cx, cy, 0.0)),
            limits: KinematicLimits::default(),
            lidar_max_range: DEFAULT_LIDAR_RANGE,
            noise: None,
            tick: 0,
            time: 0.0,
        })
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn entity_positions(&self) -> Vec<(f64, f64)> {
        self.entities
            .iter()
            .map(|e| e.position_at(self.time))
            .collect()
    }

    /// Uniform over the start-zone cells (and uniformly within the chosen
    /// cell), heading uniform in `[0, 2π)`.
    pub fn sample_start_pose(&self, rng: &mut impl Rng) -> RobotState {
        let cells = self.spec.start_cells();
        let (cx, cy) = cells[rng.gen_range(0..cells.len())];
        let s = self.spec.cell_size;
        let x = (cx as f64 + rng.gen_range(0.0..1.0)) * s;
        let y = (cy as f64 + rng.gen_range(0.0..1.0)) * s;
        RobotState::at(Pose::new(x, y, rng.gen_range(0.0..TAU)))
    }

    pub fn set_robot(&mut self, state: RobotState) -> Result<()> {
        if self.spec.is_wall_at(state.pose.x, state.pose.y) {
            return Err(Error::Config("robot pose inside a wall".into()));
        }
        self.robot = state;
        Ok(())
    }

    /// Unicycle Euler step with velocity clamping. Translation that would
    /// enter a wall cell is dropped; rotation always integrates.
    pub fn step(&mut self, v: f64, omega: f64, dt: f64) {
        assert!(dt > 0.0, "dt must be positive");
        let v = v.clamp(-self.limits.v_max, self.limits.v_max);
        let omega = omega.clamp(-self.limits.omega_max, self.limits.omega_max);
        let p = self.robot.pose;
        let nx = p.x + v * p.theta.cos() * dt;
        let ny = p.y + v * p.theta.sin() * dt;
        let (x, y) = if segment_clear(&self.spec, p.x, p.y, nx, ny) {
            (nx, ny)
        } else {
            (p.x, p.y)
        };
        self.robot = RobotState {
            pose: Pose::new(x, y, p.theta + omega * dt),
            linear_velocity: v,
            angular_velocity: omega,
        };
        self.tick += 1;
        self.time += dt;
    }
}
