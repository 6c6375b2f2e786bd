//! Procedural grayscale textures for walls and billboards.

use super::spec::RoomTag;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic value in `[0, 1)` for a lattice point.
#[inline]
pub fn lattice(seed: u64, a: i64, b: i64) -> f64 {
    let h = mix(seed ^ mix((a as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (b as u64)));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

pub const PLAIN_WALL: f64 = 0.62;

/// Wall surface brightness before lighting, `u` along the face and `v` down from the top.
pub fn wall(tag: RoomTag, u: f64, v: f64) -> f64 {
    match tag {
        RoomTag::Vegetation => {
            // Foliage: blocky high-frequency speckle over a darker band.
            let a = lattice(11, (u * 9.0).floor() as i64, (v * 7.0).floor() as i64);
            let b = lattice(12, (u * 23.0).floor() as i64, (v * 17.0).floor() as i64);
            (0.3 + 0.32 * a + 0.24 * b).min(1.0)
        }
        _ => PLAIN_WALL,
    }
}

/// Opaque box surface, pattern chosen by `seed`.
pub fn crate_box(seed: u64, u: f64, v: f64) -> f64 {
    let base = 0.2 + 0.5 * lattice(seed, 0, 0);
    let contrast = 0.25 + 0.3 * lattice(seed, 1, 0);
    let period = 2.0 + (lattice(seed, 2, 0) * 4.0).floor();
    let on = match (lattice(seed, 3, 0) * 3.0) as u32 {
        0 => ((u * period).floor() + (v * period).floor()) as i64 % 2 == 0,
        1 => (u * period * 1.5).floor() as i64 % 2 == 0,
        _ => (v * period * 1.5).floor() as i64 % 2 == 0,
    };
    (base + if on { contrast } else { 0.0 }).min(1.0)
}

/// Person-like silhouette; `None` is transparent.
pub fn person(seed: u64, u: f64, v: f64) -> Option<f64> {
    let dx = u - 0.5;
    if v < 0.2 {
        let dy = v - 0.1;
        return (dx * dx + dy * dy < 0.012).then_some(0.9);
    }
    if v < 0.62 {
        if dx.abs() > 0.42 {
            return None;
        }
        let shirt = 0.15 + 0.35 * lattice(seed, 5, 0);
        let stripe = ((v * 18.0).floor() as i64 + seed as i64) % 2 == 0;
        return Some(if stripe {
            (shirt + 0.55).min(1.0)
        } else {
            shirt
        });
    }
    let leg_gap = dx.abs() < 0.06;
    (!leg_gap && dx.abs() < 0.3).then_some(0.08 + 0.1 * lattice(seed, 6, 0))
}
