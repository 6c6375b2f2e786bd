//! One exploration trial: sense → score → credit novelty → cost → goal → plan → step.

use std::collections::VecDeque;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{Condition, ExperimentConfig};
use crate::baselines::{window_bonus, VaeModel};
use crate::error::{Error, Result};
use crate::mapping::{
    apply_novelty, base_costs, extract_frontiers, integrate_scan, plan_path, robot_cell,
    CostWeights, FollowerConfig, NoveltyConfig, NoveltyLedger, OccupancyGrid, PathFollower,
    ViewSample,
};
use crate::memory::{
    param_checksum, AutoencoderModel, Frame, InferenceTwin, SequenceWindow, SnapshotChannel,
    WINDOW_LEN,
};
use crate::nn::AdamState;
use crate::ssim::{ssim_sequence, SsimConfig};
use crate::world::{CameraConfig, RoomTag, SensorNoise, World, WorldSpec, DT};

/// Everything a trial needs besides its index.
#[derive(Debug, Clone)]
pub struct TrialSetup {
    pub config: ExperimentConfig,
    pub spec: WorldSpec,
    pub autoencoder: Option<AutoencoderModel>,
    pub vae: Option<VaeModel>,
}

impl TrialSetup {
    /// Resolves the world file and loads whichever weights the condition needs.
    pub fn load(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let spec = match &config.world {
            Some(p) => WorldSpec::parse(&std::fs::read_to_string(p)?)?,
            None => WorldSpec::default_map(),
        };
        let autoencoder = match (&config.baseline_weights, config.condition.uses_lstm()) {
            (Some(p), true) => Some(crate::memory::load_weights::<AutoencoderModel>(p)?),
            _ => None,
        };
        let vae = match (&config.vae_weights, config.condition) {
            (Some(p), Condition::Vae) => Some(crate::memory::load_weights::<VaeModel>(p)?),
            _ => None,
        };
        Ok(Self {
            config: config.clone(),
            spec,
            autoencoder,
            vae,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickRow {
    pub tick: u64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub room: Option<usize>,
    /// Similarity of the window ending this tick, when one was scored.
    pub score: Option<f64>,
    pub goal: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoomEntry {
    pub room: usize,
    pub tag: RoomTag,
    pub tick: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowScore {
    pub tick: u64,
    pub room: Option<usize>,
    pub tag: Option<RoomTag>,
    pub score: f64,
    pub model_version: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub condition: Condition,
    pub seed: u64,
    pub ticks: Vec<TickRow>,
    pub entries: Vec<RoomEntry>,
    pub windows: Vec<WindowScore>,
    /// Goals chosen, in order, with the tick of choice.
    pub decisions: Vec<(u64, (usize, usize))>,
    pub anomaly_rooms: usize,
    pub non_anomaly_rooms: usize,
    pub ledger_records: usize,
    pub map_complete: bool,
    pub aborted: Option<String>,
    pub weights_before: Option<u32>,
    pub weights_after: Option<u32>,
}

impl TrialRecord {
    /// Distinct rooms entered, in first-entry order.
    pub fn rooms_explored(&self) -> Vec<(usize, RoomTag)> {
        let mut seen: Vec<(usize, RoomTag)> = Vec::new();
        for e in &self.entries {
            if !seen.iter().any(|&(r, _)| r == e.room) {
                seen.push((e.room, e.tag));
            }
        }
        seen
    }

    fn summarize(&mut self) {
        let rooms = self.rooms_explored();
        self.anomaly_rooms = rooms.iter().filter(|(_, t)| t.is_anomaly()).count();
        self.non_anomaly_rooms = rooms.len() - self.anomaly_rooms;
    }
}

/// Deterministic per-trial seed.
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    let mut z = master ^ (trial as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

enum Scorer {
    Off,
    Lstm {
        twin: InferenceTwin<AutoencoderModel>,
        trainer: Option<(AutoencoderModel, AdamState, SnapshotChannel)>,
    },
    Vae(VaeModel),
}

/// Room of each interior cell; doorway cells sit in the wall line and belong to none.
pub fn interior_rooms(spec: &WorldSpec) -> Vec<Option<usize>> {
    let mut doors = Vec::new();
    for r in 0..crate::world::ROOM_COUNT {
        doors.extend(spec.doorway_cells(r));
    }
    (0..spec.height())
        .flat_map(|y| (0..spec.width()).map(move |x| (x, y)))
        .map(|(x, y)| spec.cell(x, y).room().filter(|_| !doors.contains(&(x, y))))
        .collect()
}

fn room_of(spec: &WorldSpec, rooms: &[Option<usize>], x: f64, y: f64) -> Option<usize> {
    let (cx, cy) = spec.world_to_cell(x, y);
    if cx < 0 || cy < 0 || cx as usize >= spec.width() || cy as usize >= spec.height() {
        return None;
    }
    rooms[cy as usize * spec.width() + cx as usize]
}

/// A finished trial plus the map and novelty ledger it ended with.
#[derive(Debug, Clone)]
pub struct TrialRun {
    pub record: TrialRecord,
    pub grid: OccupancyGrid,
    pub ledger: NoveltyLedger,
}

pub fn run_trial(setup: &TrialSetup, trial: usize) -> Result<TrialRecord> {
    run_trial_detailed(setup, trial).map(|r| r.record)
}

pub fn run_trial_detailed(setup: &TrialSetup, trial: usize) -> Result<TrialRun> {
    let cfg = &setup.config;
    let seed = trial_seed(cfg.seed, trial);
    let mut world = World::build(setup.spec.clone(), cfg.seed)?;
    if cfg.sensor_noise {
        world.noise = Some(SensorNoise::new(0.01, 0.01, seed));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = world.sample_start_pose(&mut rng);
    world.set_robot(start)?;

    let mut scorer = match cfg.condition {
        Condition::Frontier => Scorer::Off,
        Condition::Vae => Scorer::Vae(
            setup
                .vae
                .clone()
                .ok_or_else(|| Error::Config("vae condition without VAE weights".into()))?,
        ),
        c => {
            let model = setup
                .autoencoder
                .clone()
                .ok_or_else(|| Error::Config("LSTM condition without baseline weights".into()))?;
            let trainer = (c == Condition::LstmLearning).then(|| {
                let adam = model.new_optimizer(cfg.learning_rate);
                (model.clone(), adam, SnapshotChannel::new())
            });
            Scorer::Lstm {
                twin: InferenceTwin::new(model),
                trainer,
            }
        }
    };
    let weights_before = match &scorer {
        Scorer::Lstm { twin, .. } => Some(param_checksum(&twin.model.flat_params())),
        _ => None,
    };

    let cam = CameraConfig::default();
    let ssim_cfg = SsimConfig::default();
    let mut ledger = NoveltyLedger::new(NoveltyConfig {
        threshold: cfg.ssim_threshold,
        gamma: if cfg.condition == Condition::Frontier {
            0.0
        } else {
            cfg.gamma
        },
        horizon: cfg.novelty_horizon,
        fov: cam.fov,
        ..NoveltyConfig::default()
    });
    let weights = CostWeights {
        distance: cfg.distance_weight,
        size: cfg.size_weight,
    };
    let mut grid = OccupancyGrid::for_world(&world.spec);
    let mut buffer: VecDeque<(Frame, ViewSample)> = VecDeque::with_capacity(WINDOW_LEN);
    let mut record = TrialRecord {
        trial,
        condition: cfg.condition,
        seed,
        ticks: Vec::with_capacity(cfg.tick_budget as usize),
        entries: Vec::new(),
        windows: Vec::new(),
        decisions: Vec::new(),
        anomaly_rooms: 0,
        non_anomaly_rooms: 0,
        ledger_records: 0,
        map_complete: false,
        aborted: None,
        weights_before,
        weights_after: None,
    };
    let frame_dir: Option<PathBuf> = cfg.dump_frames.then(|| {
        cfg.output_dir
            .join("frames")
            .join(format!("{}_trial{trial:02}", cfg.condition))
    });
    if let Some(d) = &frame_dir {
        std::fs::create_dir_all(d)?;
    }

    let rooms = interior_rooms(&world.spec);
    let mut follower: Option<PathFollower> = None;
    let mut goal: Option<(usize, usize)> = None;
    let mut last_plan: u64 = 0;
    let mut blacklist: Vec<(usize, usize)> = Vec::new();
    let mut progress_anchor = (start.pose.x, start.pose.y, 0u64);
    let mut windows_scored: u64 = 0;
    let mut current_room: Option<usize> = None;
    let mut last_exit: Vec<Option<u64>> = vec![None; crate::world::ROOM_COUNT];

    for tick in 0..cfg.tick_budget {
        let pose = world.robot.pose;
        let (view, scan) = world.observe(&cam);
        integrate_scan(&mut grid, pose, &scan);
        if buffer.len() == WINDOW_LEN {
            buffer.pop_front();
        }
        buffer.push_back((
            view.frame,
            ViewSample {
                pose,
                depths: view.depths,
            },
        ));

        let room_now = room_of(&world.spec, &rooms, pose.x, pose.y);
        let mut score = None;
        if buffer.len() == WINDOW_LEN
            && (tick + 1) % cfg.score_stride == 0
            && !matches!(scorer, Scorer::Off)
        {
            let window = SequenceWindow::new(
                buffer.iter().map(|(f, _)| f.clone()).collect(),
                tick + 1 - WINDOW_LEN as u64,
            )?;
            let views: Vec<ViewSample> = buffer.iter().map(|(_, v)| v.clone()).collect();
            let outcome: Result<(f64, u64)> = (|| match &mut scorer {
                Scorer::Lstm { twin, trainer } => {
                    let recon = twin.model.reconstruct(&window)?;
                    let s = ssim_sequence(&window, &recon, &ssim_cfg)?;
                    windows_scored += 1;
                    if let Some((model, adam, channel)) = trainer {
                        if windows_scored.is_multiple_of(cfg.train_every) {
                            for _ in 0..cfg.train_steps {
                                model.train_step(&window, adam)?;
                            }
                            channel.publish(model);
                            twin.sync(channel)?;
                        }
                    }
                    Ok((s, twin.version()))
                }
                Scorer::Vae(vae) => Ok((1.0 - window_bonus(vae, &window)?, 0)),
                Scorer::Off => unreachable!(),
            })();
            match outcome {
                Ok((s, version)) => {
                    if ledger.credit_novelty(tick, &views, s) {
                        record.ledger_records += 1;
                    }
                    score = Some(s);
                    record.windows.push(WindowScore {
                        tick,
                        room: room_now,
                        tag: room_now.map(|r| world.spec.room_tags[r]),
                        score: s,
                        model_version: version,
                    });
                    if let Some(d) = &frame_dir {
                        window.dump_pgm(d)?;
                    }
                }
                Err(e) => {
                    record.aborted = Some(e.to_string());
                    break;
                }
            }
        }
        ledger.expire(tick);

        // Goal selection and motion.
        let mut command = (0.0, 0.0);
        if tick < cfg.spin_ticks {
            command = (0.0, world.limits.omega_max);
        } else {
            let moved = (pose.x - progress_anchor.0).hypot(pose.y - progress_anchor.1);
            if moved > 0.1 {
                progress_anchor = (pose.x, pose.y, tick);
            }
            let stuck = follower.is_some() && tick - progress_anchor.2 > 30;
            if stuck {
                if let Some(g) = goal {
                    blacklist.push(g);
                }
                progress_anchor = (pose.x, pose.y, tick);
            }
            let due = follower.as_ref().is_none_or(|f| f.is_done())
                || tick - last_plan >= cfg.replan_interval
                || stuck;
            if due {
                let frontiers = extract_frontiers(&grid, cfg.min_frontier);
                if frontiers.is_empty() {
                    record.map_complete = true;
                    break;
                }
                let mut costs = apply_novelty(
                    &frontiers,
                    &base_costs(&frontiers, pose, &grid, &weights),
                    &ledger,
                    tick,
                );
                for (f, c) in frontiers.iter().zip(costs.iter_mut()) {
                    let g = f.goal_cell(&grid);
                    if blacklist
                        .iter()
                        .any(|b| b.0.abs_diff(g.0) + b.1.abs_diff(g.1) <= 2)
                    {
                        *c = f64::INFINITY;
                    }
                }
                last_plan = tick;
                follower = None;
                goal = None;
                if let Some(i) = crate::mapping::select_goal(&frontiers, &costs, grid.width()) {
                    let g = frontiers[i].goal_cell(&grid);
                    if let Some(path) = plan_path(&grid, robot_cell(&grid, pose), g) {
                        record.decisions.push((tick, g));
                        follower = Some(PathFollower::new(&grid, &path, FollowerConfig::default()));
                        goal = Some(g);
                    } else {
                        blacklist.push(g);
                    }
                } else if costs.iter().all(|c| c.is_infinite()) {
                    record.map_complete = true;
                    break;
                }
            }
            if let Some(f) = follower.as_mut() {
                if let Some(c) = f.command(pose, &grid, &world.limits) {
                    command = c;
                }
            }
        }
        world.step(command.0, command.1, DT);

        // Room entry bookkeeping on the post-step pose.
        let after = world.robot.pose;
        let room_after = room_of(&world.spec, &rooms, after.x, after.y);
        if room_after != current_room {
            if let Some(r) = current_room {
                last_exit[r] = Some(tick);
            }
            if let Some(r) = room_after {
                let recent = last_exit[r].is_some_and(|t| tick - t < cfg.room_debounce);
                if !recent {
                    record.entries.push(RoomEntry {
                        room: r,
                        tag: world.spec.room_tags[r],
                        tick,
                    });
                }
            }
            current_room = room_after;
        }
        record.ticks.push(TickRow {
            tick,
            x: pose.x,
            y: pose.y,
            theta: pose.theta,
            room: room_now,
            score,
            goal: goal.map(|(gx, gy)| grid.cell_center(gx, gy)),
        });
    }

    if let Scorer::Lstm { twin, .. } = &scorer {
        record.weights_after = Some(param_checksum(&twin.model.flat_params()));
    }
    record.summarize();
    Ok(TrialRun {
        record,
        grid,
        ledger,
    })
}
