use rand::Rng;

use super::spec::{RoomRect, RoomTag, WorldSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntityKind {
    Person,
    Box,
}

/// Billboard placed in a room; static entities have a single waypoint and zero speed.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicEntity {
    pub id: usize,
    pub room: usize,
    pub kind: EntityKind,
    pub anchor: (f64, f64),
    /// Closed loop travelled at constant speed, starting at `anchor`.
    pub waypoints: Vec<(f64, f64)>,
    pub speed: f64,
    pub texture: u64,
    /// Footprint radius, metres; also half the billboard width.
    pub radius: f64,
    pub height: f64,
    /// Arc-length offset into the loop at time zero.
    pub phase: f64,
}

impl DynamicEntity {
    fn loop_length(&self) -> f64 {
        let n = self.waypoints.len();
        (0..n)
            .map(|i| {
                let (a, b) = (self.waypoints[i], self.waypoints[(i + 1) % n]);
                ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt()
            })
            .sum()
    }

    /// Position after `time` seconds.
    pub fn position_at(&self, time: f64) -> (f64, f64) {
        let total = self.loop_length();
        if self.speed == 0.0 || total == 0.0 {
            return self.anchor;
        }
        let mut s = (self.phase + self.speed * time).rem_euclid(total);
        let n = self.waypoints.len();
        for i in 0..n {
            let (a, b) = (self.waypoints[i], self.waypoints[(i + 1) % n]);
            let seg = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
            if s <= seg && seg > 0.0 {
                let f = s / seg;
                return (a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1));
            }
            s -= seg;
        }
        self.waypoints[0]
    }
}

/// Interior bounds of a room in metres, shrunk by `margin`.
pub fn room_bounds(spec: &WorldSpec, rect: RoomRect, margin: f64) -> (f64, f64, f64, f64) {
    let s = spec.cell_size;
    (
        rect.min_x as f64 * s + margin,
        rect.min_y as f64 * s + margin,
        (rect.max_x + 1) as f64 * s - margin,
        (rect.max_y + 1) as f64 * s - margin,
    )
}

/// Seeded entities for every room according to its tag.
pub fn populate(spec: &WorldSpec, rng: &mut impl Rng) -> Vec<DynamicEntity> {
    let mut out = Vec::new();
    for (room, tag) in spec.room_tags.iter().enumerate() {
        let rect = spec.room_rect(room);
        match tag {
            RoomTag::Empty | RoomTag::Vegetation => {}
            RoomTag::StaticObjects => {
                let count = rng.gen_range(3..=6);
                let (x0, y0, x1, y1) = room_bounds(spec, rect, 0.35);
                for _ in 0..count {
                    let p = (rng.gen_range(x0..x1), rng.gen_range(y0..y1));
                    out.push(DynamicEntity {
                        id: out.len(),
                        room,
                        kind: EntityKind::Box,
                        anchor: p,
                        waypoints: vec![p],
                        speed: 0.0,
                        texture: rng.gen(),
                        radius: rng.gen_range(0.15..0.25),
                        height: rng.gen_range(0.3..0.6),
                        phase: 0.0,
                    });
                }
            }
            RoomTag::Dynamic | RoomTag::MultiDynamic => {
                let count = if *tag == RoomTag::Dynamic { 1 } else { 3 };
                let (x0, y0, x1, y1) = room_bounds(spec, rect, 0.4);
                for _ in 0..count {
                    let waypoints: Vec<(f64, f64)> = (0..rng.gen_range(3..=4))
                        .map(|_| (rng.gen_range(x0..x1), rng.gen_range(y0..y1)))
                        .collect();
                    let mut e = DynamicEntity {
                        id: out.len(),
                        room,
                        kind: EntityKind::Person,
                        anchor: waypoints[0],
                        waypoints,
                        speed: rng.gen_range(0.5..0.8),
                        texture: rng.gen(),
                        radius: 0.35,
                        height: 0.95,
                        phase: 0.0,
                    };
                    e.phase = rng.gen_range(0.0..e.loop_length().max(1e-9));
                    out.push(e);
                }
            }
        }
    }
    out
}
