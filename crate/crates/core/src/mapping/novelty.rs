//! Spatially attributed novelty: low-similarity windows credit the camera
//! cones they were seen through, and frontiers inside those cones get cheaper.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use crate::world::{CameraConfig, Pose};
use crate::Result;

use super::frontier::Frontier;

/// One camera frame's footprint: where it was taken and how far each column saw.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewSample {
    pub pose: Pose,
    pub depths: Vec<f64>,
}

impl ViewSample {
    /// Whether `(px, py)` lies inside this view's field of view and no
    /// farther than the column's visible depth plus `margin`.
    pub fn sees(&self, px: f64, py: f64, fov: f64, margin: f64) -> bool {
        let (dx, dy) = (px - self.pose.x, py - self.pose.y);
        let dist = dx.hypot(dy);
        if dist < 1e-9 {
            return true;
        }
        let bearing = wrap(dy.atan2(dx) - self.pose.theta);
        if bearing.abs() > fov / 2.0 {
            return false;
        }
        let cols = self.depths.len();
        if cols == 0 {
            return false;
        }
        let focal = cols as f64 / 2.0 / (fov / 2.0).tan();
        let col = (cols as f64 / 2.0 + focal * bearing.tan())
            .floor()
            .clamp(0.0, cols as f64 - 1.0) as usize;
        dist <= self.depths[col] + margin
    }
}

fn wrap(a: f64) -> f64 {
    let t = a.rem_euclid(std::f64::consts::TAU);
    if t > std::f64::consts::PI {
        t - std::f64::consts::TAU
    } else {
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoveltyConfig {
    /// Similarity gate: windows scoring at or above it leave no record.
    pub threshold: f64,
    /// Discount strength, in `[0, 1)`.
    pub gamma: f64,
    /// Ticks a record stays live.
    pub horizon: u64,
    pub fov: f64,
    /// Metres past the visible depth that still count as inside the cone.
    pub depth_margin: f64,
}

impl Default for NoveltyConfig {
    fn default() -> Self {
        Self {
            threshold: 0.90,
            gamma: 0.8,
            horizon: 300,
            fov: FRAC_PI_2,
            depth_margin: 0.5,
        }
    }
}

impl NoveltyConfig {
    pub fn for_camera(cam: &CameraConfig) -> Self {
        Self {
            fov: cam.fov,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoveltyRecord {
    pub tick: u64,
    /// Similarity score (or `1 − bonus`) that triggered the record.
    pub score: f64,
    pub novelty: f64,
    pub views: Vec<ViewSample>,
}

impl NoveltyRecord {
    pub fn contains(&self, px: f64, py: f64, cfg: &NoveltyConfig) -> bool {
        self.views
            .iter()
            .any(|v| v.sees(px, py, cfg.fov, cfg.depth_margin))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoveltyLedger {
    pub config: NoveltyConfig,
    records: Vec<NoveltyRecord>,
}

impl NoveltyLedger {
    pub fn new(config: NoveltyConfig) -> Self {
        Self {
            config,
            records: Vec::new(),
        }
    }

    pub fn records(&self) -> &[NoveltyRecord] {
        &self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records `n = clamp(1 − ssim, 0, 1)` over the window's views when
    /// `ssim` is below the threshold. Returns whether a record was added.
    pub fn credit_novelty(&mut self, tick: u64, views: &[ViewSample], ssim: f64) -> bool {
        if !(ssim < self.config.threshold) || views.is_empty() {
            return false;
        }
        self.records.push(NoveltyRecord {
            tick,
            score: ssim,
            novelty: (1.0 - ssim).clamp(0.0, 1.0),
            views: views.to_vec(),
        });
        true
    }

    /// Same gate for a bonus already expressed as novelty in `[0, 1]`.
    pub fn credit_bonus(&mut self, tick: u64, views: &[ViewSample], bonus: f64) -> bool {
        self.credit_novelty(tick, views, 1.0 - bonus.clamp(0.0, 1.0))
    }

    /// Drops records older than the horizon relative to `tick`.
    pub fn expire(&mut self, tick: u64) {
        let h = self.config.horizon;
        self.records.retain(|r| r.tick + h >= tick);
    }

    /// Max novelty over live records whose cone contains the point.
    pub fn novelty_at(&self, px: f64, py: f64, tick: u64) -> f64 {
        self.records
            .iter()
            .filter(|r| r.tick + self.config.horizon >= tick && r.tick <= tick)
            .filter(|r| r.contains(px, py, &self.config))
            .map(|r| r.novelty)
            .fold(0.0, f64::max)
    }

    /// CSV dump: one row per record with the newest view's pose.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["tick", "score", "novelty", "views", "x", "y", "theta"])?;
        for r in &self.records {
            let p = r
                .views
                .last()
                .map(|v| v.pose)
                .unwrap_or(Pose::new(0.0, 0.0, 0.0));
            w.write_record([
                r.tick.to_string(),
                format!("{:.17e}", r.score),
                format!("{:.17e}", r.novelty),
                r.views.len().to_string(),
                format!("{:.17e}", p.x),
                format!("{:.17e}", p.y),
                format!("{:.17e}", p.theta),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Discounts each base cost by its frontier's novelty. Positive costs scale
/// by `1 − γ·n`; negative costs move down by the same fraction of their
/// magnitude so that novelty always makes a frontier more attractive.
pub fn apply_novelty(
    frontiers: &[Frontier],
    base: &[f64],
    ledger: &NoveltyLedger,
    tick: u64,
) -> Vec<f64> {
    let gamma = ledger.config.gamma;
    frontiers
        .iter()
        .zip(base)
        .map(|(f, &c)| {
            if !c.is_finite() || gamma == 0.0 {
                return c;
            }
            let n = ledger.novelty_at(f.centroid.0, f.centroid.1, tick);
            if n == 0.0 {
                c
            } else {
                c - gamma * n * c.abs()
            }
        })
        .collect()
}
