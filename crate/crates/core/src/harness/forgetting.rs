//! Per-room SSIM means in visit order and the dip/recovery pattern that marks
//! forgetting after training on an anomaly room.

use super::trial::{TrialRecord, WindowScore};
use crate::error::{Error, Result};
use crate::world::RoomTag;

/// A maximal run of scored windows inside one room.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomVisit {
    pub room: usize,
    pub tag: RoomTag,
    pub first_tick: u64,
    pub last_tick: u64,
    pub mean: f64,
    pub windows: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForgettingCriteria {
    /// Required drop of the first empty room below the reference mean.
    pub min_dip: f64,
    /// Fraction of the dip the second empty room must win back.
    pub min_recovery: f64,
    /// Visits with fewer scored windows are ignored.
    pub min_windows: usize,
}

impl Default for ForgettingCriteria {
    fn default() -> Self {
        Self {
            min_dip: 0.05,
            min_recovery: 0.5,
            min_windows: 2,
        }
    }
}

/// An anomaly visit followed directly by two empty-room visits.
#[derive(Debug, Clone, PartialEq)]
pub struct ForgettingSequence {
    /// Indices into [`ForgettingSummary::visits`].
    pub anomaly: usize,
    pub first_empty: usize,
    pub second_empty: usize,
    /// `reference − first_empty.mean`.
    pub dip: f64,
    /// `(second − first) / dip`; `None` when the dip is not positive.
    pub recovery: Option<f64>,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForgettingSummary {
    pub reference: f64,
    pub visits: Vec<RoomVisit>,
    pub sequences: Vec<ForgettingSequence>,
}

impl ForgettingSummary {
    /// True when any anomaly → empty → empty sequence shows the dip and recovery.
    pub fn flagged(&self) -> bool {
        self.sequences.iter().any(|s| s.flagged)
    }

    /// The first qualifying sequence, which is the one the acceptance check grades.
    pub fn first_sequence(&self) -> Option<&ForgettingSequence> {
        self.sequences.first()
    }
}

/// Splits window scores into room visits. Windows outside any room end the
/// current visit.
pub fn room_visits(windows: &[WindowScore]) -> Vec<RoomVisit> {
    let mut out: Vec<RoomVisit> = Vec::new();
    let mut open = false;
    for w in windows {
        let (Some(room), Some(tag)) = (w.room, w.tag) else {
            open = false;
            continue;
        };
        match out.last_mut() {
            Some(v) if open && v.room == room => {
                v.mean += w.score;
                v.windows += 1;
                v.last_tick = w.tick;
            }
            _ => out.push(RoomVisit {
                room,
                tag,
                first_tick: w.tick,
                last_tick: w.tick,
                mean: w.score,
                windows: 1,
            }),
        }
        open = true;
    }
    for v in &mut out {
        v.mean /= v.windows as f64;
    }
    out
}

/// Visit-order analysis of a learning trial against `reference`, the mean
/// empty-room score of an inference-only model.
pub fn analyze_forgetting(
    record: &TrialRecord,
    reference: f64,
    criteria: &ForgettingCriteria,
) -> Result<ForgettingSummary> {
    let visits: Vec<RoomVisit> = room_visits(&record.windows)
        .into_iter()
        .filter(|v| v.windows >= criteria.min_windows)
        .collect();
    if visits.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "trial {} has {} room visits, need at least 3",
            record.trial,
            visits.len()
        )));
    }
    let mut sequences = Vec::new();
    for i in 0..visits.len() - 2 {
        let (a, b, c) = (&visits[i], &visits[i + 1], &visits[i + 2]);
        if !a.tag.is_anomaly() || b.tag.is_anomaly() || c.tag.is_anomaly() {
            continue;
        }
        let dip = reference - b.mean;
        let recovery = (dip > 0.0).then(|| (c.mean - b.mean) / dip);
        let flagged =
            dip >= criteria.min_dip && recovery.is_some_and(|r| r >= criteria.min_recovery);
        sequences.push(ForgettingSequence {
            anomaly: i,
            first_empty: i + 1,
            second_empty: i + 2,
            dip,
            recovery,
            flagged,
        });
    }
    Ok(ForgettingSummary {
        reference,
        visits,
        sequences,
    })
}
