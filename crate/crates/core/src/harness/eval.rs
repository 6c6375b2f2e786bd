//! Per-room-type score distributions from tours inside each room.

use super::corpus::{room_tour_frames_for, WindowSet};
use super::experiment::Summary;
use crate::error::Result;
use crate::memory::{SequenceWindow, WINDOW_LEN};
use crate::world::{RoomTag, WorldSpec, ROOM_COUNT};

#[derive(Debug, Clone, PartialEq)]
pub struct RoomScores {
    pub room: usize,
    pub tag: RoomTag,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoomEvaluation {
    pub rooms: Vec<RoomScores>,
}

impl RoomEvaluation {
    /// All scores of rooms whose tag satisfies `pred`.
    pub fn pooled(&self, pred: impl Fn(RoomTag) -> bool) -> Vec<f64> {
        self.rooms
            .iter()
            .filter(|r| pred(r.tag))
            .flat_map(|r| r.scores.iter().copied())
            .collect()
    }

    pub fn summary(&self, pred: impl Fn(RoomTag) -> bool) -> Option<Summary> {
        Summary::of(&self.pooled(pred))
    }

    /// One summary per tag present, in tag order.
    pub fn per_tag(&self) -> Vec<(RoomTag, Summary)> {
        RoomTag::ALL
            .iter()
            .filter_map(|&t| self.summary(|x| x == t).map(|s| (t, s)))
            .collect()
    }
}

/// Scores `windows_per_room` windows (stride `stride` ticks) from a tour
/// inside every room of the world built from `(spec, seed)`.
pub fn evaluate_rooms(
    spec: &WorldSpec,
    seed: u64,
    windows_per_room: usize,
    stride: usize,
    score: &(dyn Fn(&SequenceWindow) -> Result<f64> + Sync),
) -> Result<RoomEvaluation> {
    let ticks = windows_per_room.saturating_sub(1) * stride.max(1) + WINDOW_LEN;
    let mut rooms = Vec::with_capacity(ROOM_COUNT);
    for room in 0..ROOM_COUNT {
        let frames = room_tour_frames_for(spec, seed, room, ticks)?;
        let set = WindowSet::from_frames(frames, stride);
        let scores = set
            .windows()
            .take(windows_per_room)
            .map(|w| score(&w))
            .collect::<Result<Vec<_>>>()?;
        rooms.push(RoomScores {
            room,
            tag: spec.room_tags[room],
            scores,
        });
    }
    Ok(RoomEvaluation { rooms })
}
