//! Baseline training data: camera frames from a random walk through an
//! anomaly-free copy of the world.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::trial::interior_rooms;
use crate::error::{Error, Result};
use crate::mapping::{
    plan_path, robot_cell, CellState, FollowerConfig, OccupancyGrid, PathFollower,
};
use crate::memory::{Frame, SequenceWindow, WINDOW_LEN};
use crate::world::{render_camera, Pose, RobotState, World, WorldSpec, DT, ROOM_COUNT};

/// Fully known grid from the world layout.
pub fn ground_truth_grid(spec: &WorldSpec) -> OccupancyGrid {
    let cells = (0..spec.height())
        .flat_map(|y| (0..spec.width()).map(move |x| (x, y)))
        .map(|(x, y)| {
            if spec.cell(x, y).is_wall() {
                CellState::Occupied
            } else {
                CellState::Free
            }
        })
        .collect();
    OccupancyGrid::from_cells(spec.width(), spec.height(), spec.cell_size, cells)
}

/// Random walk from a start-zone pose: piecewise-constant velocity commands,
/// turning in place after bumping into a wall. Records the camera every tick.
pub fn tour_frames(spec: &WorldSpec, seed: u64, ticks: usize) -> Result<Vec<Frame>> {
    let mut world = World::build(spec.clone(), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_7041);
    let start = world.sample_start_pose(&mut rng);
    world.set_robot(start)?;
    let (v_max, w_max) = (world.limits.v_max, world.limits.omega_max);
    let mut frames = Vec::with_capacity(ticks);
    let (mut v, mut w, mut hold) = (0.0, 0.0, 0usize);
    while frames.len() < ticks {
        if hold == 0 {
            v = rng.gen_range(0.0..v_max);
            w = rng.gen_range(-w_max..w_max);
            hold = rng.gen_range(5..30);
        }
        hold -= 1;
        let before = world.robot.pose;
        world.step(v, w, DT);
        let moved = (world.robot.pose.x - before.x).abs() + (world.robot.pose.y - before.y).abs();
        if v > 0.0 && moved < 1e-9 {
            v = 0.0;
            w = w_max;
            hold = 10;
        }
        frames.push(render_camera(&world, world.robot.pose));
    }
    Ok(frames)
}

/// Tour confined to the interior of `room`, starting at a random interior
/// cell. `world` keeps its entities, so anomaly rooms show their contents.
pub fn room_tour_frames(
    world: &mut World,
    room: usize,
    seed: u64,
    ticks: usize,
) -> Result<Vec<Frame>> {
    let spec = world.spec.clone();
    let rooms = interior_rooms(&spec);
    let cells: Vec<(usize, usize)> = (0..spec.height())
        .flat_map(|y| (0..spec.width()).map(move |x| (x, y)))
        .filter(|&(x, y)| rooms[y * spec.width() + x] == Some(room))
        .collect();
    if cells.is_empty() {
        return Err(Error::Config(format!("room {room} has no interior cells")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0500_7041 ^ room as u64);
    let (cx, cy) = cells[rng.gen_range(0..cells.len())];
    let (x, y) = spec.cell_center(cx, cy);
    world.set_robot(RobotState::at(Pose::new(
        x,
        y,
        rng.gen_range(0.0..std::f64::consts::TAU),
    )))?;
    let grid = ground_truth_grid(&spec);
    Ok(drive_tour(world, &grid, &cells, &mut rng, ticks))
}

/// [`room_tour_frames`] in a fresh world built from `(spec, seed)`.
pub fn room_tour_frames_for(
    spec: &WorldSpec,
    seed: u64,
    room: usize,
    ticks: usize,
) -> Result<Vec<Frame>> {
    let mut world = World::build(spec.clone(), seed)?;
    room_tour_frames(&mut world, room, seed, ticks)
}

fn drive_tour(
    world: &mut World,
    grid: &OccupancyGrid,
    targets: &[(usize, usize)],
    rng: &mut ChaCha8Rng,
    ticks: usize,
) -> Vec<Frame> {
    let mut frames = Vec::with_capacity(ticks);
    let mut follower: Option<PathFollower> = None;
    let mut spin_left = 0usize;
    let mut spin_dir = 1.0;
    let mut stuck = 0usize;
    while frames.len() < ticks {
        frames.push(render_camera(world, world.robot.pose));
        let pose = world.robot.pose;
        let cmd = if spin_left > 0 {
            spin_left -= 1;
            Some((0.0, spin_dir * world.limits.omega_max))
        } else {
            follower
                .as_mut()
                .and_then(|f| f.command(pose, grid, &world.limits))
        };
        let (v, w) = match cmd {
            Some(c) => c,
            None => {
                if rng.gen_bool(0.35) {
                    spin_left = rng.gen_range(10..42);
                    spin_dir = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                }
                let goal = targets[rng.gen_range(0..targets.len())];
                follower = plan_path(grid, robot_cell(grid, pose), goal)
                    .map(|p| PathFollower::new(grid, &p, FollowerConfig::default()));
                (0.0, 0.0)
            }
        };
        world.step(v, w, DT);
        let moved = (world.robot.pose.x - pose.x).abs() + (world.robot.pose.y - pose.y).abs();
        stuck = if v > 0.0 && moved == 0.0 {
            stuck + 1
        } else {
            0
        };
        if stuck > 20 {
            follower = None;
            stuck = 0;
        }
    }
    frames
}

/// Frames plus the start offsets of the windows drawn from them.
#[derive(Debug, Clone)]
pub struct WindowSet {
    pub frames: Vec<Frame>,
    pub starts: Vec<usize>,
}

impl WindowSet {
    pub fn from_frames(frames: Vec<Frame>, stride: usize) -> Self {
        let n = frames.len().saturating_sub(WINDOW_LEN - 1);
        let starts = (0..n).step_by(stride.max(1)).collect();
        Self { frames, starts }
    }

    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn window(&self, i: usize) -> SequenceWindow {
        let s = self.starts[i];
        SequenceWindow::new(self.frames[s..s + WINDOW_LEN].to_vec(), s as u64)
            .expect("window within frames")
    }

    pub fn windows(&self) -> impl Iterator<Item = SequenceWindow> + '_ {
        (0..self.len()).map(|i| self.window(i))
    }
}

pub const HELD_OUT_WINDOWS: usize = 32;
pub const HELD_OUT_STRIDE: usize = 40;

/// Training windows (every tick) from one tour and held-out windows from
/// independent tours inside each room of the anomaly-free world.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub train: WindowSet,
    pub held_out: Vec<SequenceWindow>,
}

impl Corpus {
    pub fn build(spec: &WorldSpec, seed: u64, train_ticks: usize) -> Result<Self> {
        let spec = spec.without_anomalies();
        let train = WindowSet::from_frames(tour_frames(&spec, seed, train_ticks)?, 1);
        let per_room = HELD_OUT_WINDOWS / ROOM_COUNT;
        let held_ticks = per_room * HELD_OUT_STRIDE + WINDOW_LEN;
        let held_seed = seed.wrapping_add(0x0123_4567_89ab);
        let mut held_out = Vec::with_capacity(HELD_OUT_WINDOWS);
        for room in 0..ROOM_COUNT {
            let frames = room_tour_frames_for(&spec, held_seed, room, held_ticks)?;
            held_out.extend(
                WindowSet::from_frames(frames, HELD_OUT_STRIDE)
                    .windows()
                    .take(per_room),
            );
        }
        if train.is_empty() || held_out.len() < HELD_OUT_WINDOWS {
            return Err(Error::InsufficientData(
                "tour too short for a corpus".into(),
            ));
        }
        Ok(Self { train, held_out })
    }
}
