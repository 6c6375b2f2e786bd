//! Experiment configuration: plain `key = value` files overridable by flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    LstmInference,
    LstmLearning,
    Vae,
    Frontier,
}

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition::LstmInference,
        Condition::LstmLearning,
        Condition::Vae,
        Condition::Frontier,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::LstmInference => "lstm_inference",
            Condition::LstmLearning => "lstm_learning",
            Condition::Vae => "vae",
            Condition::Frontier => "frontier",
        }
    }

    pub fn uses_lstm(self) -> bool {
        matches!(self, Condition::LstmInference | Condition::LstmLearning)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Condition::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown condition {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub condition: Condition,
    pub trials: usize,
    pub tick_budget: u64,
    /// `None` uses the built-in map.
    pub world: Option<PathBuf>,
    pub baseline_weights: Option<PathBuf>,
    pub vae_weights: Option<PathBuf>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub ssim_threshold: f64,
    pub gamma: f64,
    pub novelty_horizon: u64,
    pub distance_weight: f64,
    pub size_weight: f64,
    pub min_frontier: usize,
    pub replan_interval: u64,
    /// Ticks between successive scored windows.
    pub score_stride: u64,
    /// Scored windows per training update in the learning condition.
    pub train_every: u64,
    /// Adam steps per training update.
    pub train_steps: usize,
    pub learning_rate: f64,
    /// Initial in-place turn, ticks.
    pub spin_ticks: u64,
    pub room_debounce: u64,
    pub sensor_noise: bool,
    pub dump_frames: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            condition: Condition::LstmInference,
            trials: 10,
            tick_budget: DEFAULT_TICK_BUDGET,
            world: None,
            baseline_weights: None,
            vae_weights: None,
            seed: 42,
            output_dir: PathBuf::from("out"),
            ssim_threshold: 0.90,
            gamma: 0.8,
            novelty_horizon: 300,
            distance_weight: 1.0,
            size_weight: 0.2,
            min_frontier: 3,
            replan_interval: 20,
            score_stride: 5,
            train_every: 6,
            train_steps: 1,
            learning_rate: 1e-4,
            spin_ticks: 42,
            room_debounce: 50,
            sensor_noise: false,
            dump_frames: false,
        }
    }
}

pub const DEFAULT_TICK_BUDGET: u64 = 600;

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("bad boolean {value:?} for {key}"))),
    }
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty() && value != "none").then(|| PathBuf::from(value))
}

impl ExperimentConfig {
    /// Applies one setting; keys match the field names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "condition" => self.condition = v.parse()?,
            "trials" => self.trials = parse(key, v)?,
            "tick_budget" => self.tick_budget = parse(key, v)?,
            "world" => self.world = opt_path(v),
            "baseline_weights" => self.baseline_weights = opt_path(v),
            "vae_weights" => self.vae_weights = opt_path(v),
            "seed" => self.seed = parse(key, v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "ssim_threshold" => self.ssim_threshold = parse(key, v)?,
            "gamma" => self.gamma = parse(key, v)?,
            "novelty_horizon" => self.novelty_horizon = parse(key, v)?,
            "distance_weight" => self.distance_weight = parse(key, v)?,
            "size_weight" => self.size_weight = parse(key, v)?,
            "min_frontier" => self.min_frontier = parse(key, v)?,
            "replan_interval" => self.replan_interval = parse(key, v)?,
            "score_stride" => self.score_stride = parse(key, v)?,
            "train_every" => self.train_every = parse(key, v)?,
            "train_steps" => self.train_steps = parse(key, v)?,
            "learning_rate" => self.learning_rate = parse(key, v)?,
            "spin_ticks" => self.spin_ticks = parse(key, v)?,
            "room_debounce" => self.room_debounce = parse(key, v)?,
            "sensor_noise" => self.sensor_noise = parse_bool(key, v)?,
            "dump_frames" => self.dump_frames = parse_bool(key, v)?,
            other => return Err(Error::Config(format!("unknown setting {other:?}"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` and `;` start comments.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse_text(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let p = |o: &Option<PathBuf>| {
            o.as_ref()
                .map_or("none".to_string(), |p| p.display().to_string())
        };
        format!(
            "condition = {}\ntrials = {}\ntick_budget = {}\nworld = {}\nbaseline_weights = {}\nvae_weights = {}\n\
             seed = {}\noutput_dir = {}\nssim_threshold = {}\ngamma = {}\nnovelty_horizon = {}\n\
             distance_weight = {}\nsize_weight = {}\nmin_frontier = {}\nreplan_interval = {}\nscore_stride = {}\n\
             train_every = {}\ntrain_steps = {}\nlearning_rate = {}\nspin_ticks = {}\nroom_debounce = {}\n\
             sensor_noise = {}\ndump_frames = {}\n",
            self.condition,
            self.trials,
            self.tick_budget,
            p(&self.world),
            p(&self.baseline_weights),
            p(&self.vae_weights),
            self.seed,
            self.output_dir.display(),
            self.ssim_threshold,
            self.gamma,
            self.novelty_horizon,
            self.distance_weight,
            self.size_weight,
            self.min_frontier,
            self.replan_interval,
            self.score_stride,
            self.train_every,
            self.train_steps,
            self.learning_rate,
            self.spin_ticks,
            self.room_debounce,
            self.sensor_noise,
            self.dump_frames,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.trials == 0 {
            return fail("trials must be at least 1");
        }
        if self.tick_budget == 0 {
            return fail("tick budget must be positive");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return fail("gamma must lie in [0, 1)");
        }
        if self.score_stride == 0 || self.train_every == 0 || self.replan_interval == 0 {
            return fail("strides and intervals must be positive");
        }
        if self.condition.uses_lstm() && self.baseline_weights.is_none() {
            return fail("LSTM conditions need baseline_weights");
        }
        if self.condition == Condition::Vae && self.vae_weights.is_none() {
            return fail("the vae condition needs vae_weights");
        }
        Ok(())
    }
}
