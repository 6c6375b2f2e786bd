//! Offline training of the anomaly-free baselines.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::corpus::Corpus;
use crate::baselines::VaeModel;
use crate::error::{Error, Result};
use crate::memory::{
    save_weights, ArchDescriptor, AutoencoderModel, Parameterized, SequenceWindow, FRAME_SIZE,
};
use crate::nn::AdamState;
use crate::ssim::{ssim_sequence, SsimConfig};
use crate::world::WorldSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Lstm,
    Vae,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Lstm => "lstm",
            ModelKind::Vae => "vae",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lstm" => Ok(ModelKind::Lstm),
            "vae" => Ok(ModelKind::Vae),
            _ => Err(Error::Config(format!(
                "unknown model kind {s:?} (expected lstm or vae)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub seed: u64,
    /// Length of the training tour in ticks.
    pub corpus_ticks: usize,
    pub max_steps: usize,
    pub eval_every: usize,
    pub target: f64,
    pub floor: f64,
    pub learning_rate: f64,
    pub vae_latent: usize,
    pub bonus_quantile: f64,
    pub bonus_gate: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            seed: 42,
            corpus_ticks: 20_000,
            max_steps: 20_000,
            eval_every: 200,
            target: 0.95,
            floor: 0.90,
            learning_rate: 1e-4,
            vae_latent: 32,
            bonus_quantile: 0.95,
            bonus_gate: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub kind: ModelKind,
    pub steps: usize,
    /// Median held-out sequence SSIM after the final step.
    pub held_out_median: f64,
    pub held_out_min: f64,
    /// `(step, median)` at every evaluation.
    pub history: Vec<(usize, f64)>,
    pub reached_target: bool,
    pub floor: f64,
    pub seconds: f64,
    /// VAE only: the calibrated MSE-to-bonus scale.
    pub bonus_scale: Option<f64>,
}

impl TrainReport {
    pub fn passed_floor(&self) -> bool {
        self.held_out_median >= self.floor
    }

    /// Error carrying the training history when the autoencoder missed the
    /// floor. The VAE gate is calibrated on reconstruction error instead.
    pub fn check(&self) -> Result<()> {
        if self.kind == ModelKind::Vae || self.passed_floor() {
            return Ok(());
        }
        let tail: Vec<String> = self
            .history
            .iter()
            .rev()
            .take(5)
            .rev()
            .map(|(s, m)| format!("{s}:{m:.4}"))
            .collect();
        Err(Error::Numeric(format!(
            "{} baseline stopped at {} steps with held-out median SSIM {:.4} < {:.2} (last evaluations {})",
            self.kind,
            self.steps,
            self.held_out_median,
            self.floor,
            tail.join(" ")
        )))
    }
}

enum Learner {
    Lstm(AutoencoderModel, AdamState),
    Vae(VaeModel, AdamState),
}

impl Learner {
    fn step(&mut self, window: &SequenceWindow, rng: &mut ChaCha8Rng) -> Result<f64> {
        match self {
            Learner::Lstm(m, adam) => m.train_step(window, adam),
            Learner::Vae(m, adam) => m.train_step(window, adam, rng),
        }
    }

    fn reconstruct(&self, window: &SequenceWindow) -> Result<SequenceWindow> {
        match self {
            Learner::Lstm(m, _) => m.reconstruct(window),
            Learner::Vae(m, _) => m.reconstruct(window),
        }
    }
}

/// Sorted held-out sequence SSIM scores.
fn held_out_scores(model: &Learner, held_out: &[SequenceWindow]) -> Result<Vec<f64>> {
    let cfg = SsimConfig::default();
    let mut v = held_out
        .iter()
        .map(|w| ssim_sequence(w, &model.reconstruct(w)?, &cfg))
        .collect::<Result<Vec<_>>>()?;
    v.sort_by(f64::total_cmp);
    Ok(v)
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Trains on one random window per Adam step until the held-out median SSIM
/// reaches the target or the step cap, then writes the weights to `out`.
/// `progress` sees `(step, median)` at every evaluation.
pub fn train_baseline(
    spec: &WorldSpec,
    kind: ModelKind,
    opts: &TrainOptions,
    out: &Path,
    progress: &mut dyn FnMut(usize, f64),
) -> Result<TrainReport> {
    if opts.max_steps == 0 || opts.eval_every == 0 {
        return Err(Error::Config(
            "max_steps and eval_every must be positive".into(),
        ));
    }
    let started = Instant::now();
    let corpus = Corpus::build(spec, opts.seed, opts.corpus_ticks)?;
    let held_out = &corpus.held_out;
    let mut model = match kind {
        ModelKind::Lstm => {
            let m = AutoencoderModel::build(ArchDescriptor::default(), opts.seed)?;
            let adam = m.new_optimizer(opts.learning_rate);
            Learner::Lstm(m, adam)
        }
        ModelKind::Vae => {
            let m = VaeModel::build(FRAME_SIZE, opts.vae_latent, opts.seed)?;
            let adam = m.new_optimizer(opts.learning_rate);
            Learner::Vae(m, adam)
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x7a11_5eed);
    let mut history = Vec::new();
    let mut steps = 0;
    let mut scores = held_out_scores(&model, held_out)?;
    while steps < opts.max_steps {
        let i = rng.gen_range(0..corpus.train.len());
        let loss = model.step(&corpus.train.window(i), &mut rng)?;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite training loss at step {}",
                steps + 1
            )));
        }
        steps += 1;
        if steps % opts.eval_every == 0 || steps == opts.max_steps {
            scores = held_out_scores(&model, held_out)?;
            let m = median(&scores);
            history.push((steps, m));
            progress(steps, m);
            if m >= opts.target {
                break;
            }
        }
    }
    let median_score = median(&scores);

    let report = TrainReport {
        kind,
        steps,
        held_out_median: median_score,
        held_out_min: scores[0],
        history,
        reached_target: median_score >= opts.target,
        floor: opts.floor,
        seconds: started.elapsed().as_secs_f64(),
        bonus_scale: None,
    };
    match model {
        Learner::Lstm(mut m, _) => {
            m.quantize_f32();
            save_weights(&m, out)?;
            Ok(report)
        }
        Learner::Vae(mut m, _) => {
            m.quantize_f32();
            let frames = corpus.train.frames.iter().step_by(7);
            m.calibrate_bonus(frames, opts.bonus_quantile, opts.bonus_gate)?;
            save_weights(&m, out)?;
            Ok(TrainReport {
                bonus_scale: Some(m.bonus_scale),
                ..report
            })
        }
    }
}
