//! Column raycaster producing the robot's grayscale camera frame.

use std::f64::consts::FRAC_PI_2;

use super::entity::EntityKind;
use super::raycast::cast_ray;
use super::sim::{Pose, World};
use super::spec::RoomTag;
use super::texture;
use crate::memory::{Frame, FRAME_SIZE};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraConfig {
    pub width: usize,
    pub height: usize,
    pub fov: f64,
    /// Wall height in metres; the camera sits at half this height.
    pub wall_height: f64,
    pub max_depth: f64,
    /// Sub-samples per pixel along each axis; the frame is the box average.
    pub supersample: usize,
    /// Standard deviation, in output pixels, of the Gaussian lens blur (0 disables it).
    pub blur_sigma: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            width: FRAME_SIZE,
            height: FRAME_SIZE,
            fov: FRAC_PI_2,
            wall_height: 1.0,
            max_depth: 30.0,
            supersample: 3,
            blur_sigma: 0.6,
        }
    }
}

impl CameraConfig {
    /// Focal length in pixels.
    pub fn focal(&self) -> f64 {
        self.width as f64 / 2.0 / (self.fov / 2.0).tan()
    }

    /// Bearing offset of column `col` from the optical axis (positive = right).
    pub fn column_offset(&self, col: usize) -> f64 {
        ((col as f64 + 0.5 - self.width as f64 / 2.0) / self.focal()).atan()
    }
}

/// A rendered frame plus the per-column wall distance (metres, along the ray).
#[derive(Debug, Clone, PartialEq)]
pub struct CameraView {
    pub frame: Frame,
    pub depths: Vec<f64>,
}

#[inline]
fn attenuate(d: f64) -> f64 {
    1.0 / (1.0 + 0.12 * d)
}

/// Renders the view from `pose`. Pure in the world state. Each column's
/// depth is the nearest wall distance among its sub-columns.
pub fn render_view(world: &World, pose: Pose, cam: &CameraConfig) -> CameraView {
    let mut view = downsample(world, pose, cam);
    if cam.blur_sigma > 0.0 {
        let data = gaussian_blur(view.frame.data(), cam.height, cam.width, cam.blur_sigma);
        view.frame =
            Frame::from_clamped(cam.height, cam.width, data).expect("render buffer sized to frame");
    }
    view
}

/// Separable Gaussian filter with edge clamping; the kernel is truncated at 3σ.
fn gaussian_blur(data: &[f64], h: usize, w: usize, sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(j, kv)| kv * data[y * w + clamp(x as isize + j as isize - r, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(j, kv)| kv * tmp[clamp(y as isize + j as isize - r, h) * w + x])
                .sum();
        }
    }
    out
}

fn downsample(world: &World, pose: Pose, cam: &CameraConfig) -> CameraView {
    let s = cam.supersample.max(1);
    if s == 1 {
        return render_raw(world, pose, cam);
    }
    let fine = CameraConfig {
        width: cam.width * s,
        height: cam.height * s,
        supersample: 1,
        ..*cam
    };
    let raw = render_raw(world, pose, &fine);
    let (w, h) = (cam.width, cam.height);
    let norm = 1.0 / (s * s) as f64;
    let mut pixels = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for sy in 0..s {
                for sx in 0..s {
                    acc += raw.frame.get(y * s + sy, x * s + sx);
                }
            }
            pixels[y * w + x] = acc * norm;
        }
    }
    let depths = raw
        .depths
        .chunks(s)
        .map(|c| c.iter().copied().fold(f64::INFINITY, f64::min))
        .collect();
    let frame = Frame::from_clamped(h, w, pixels).expect("render buffer sized to frame");
    CameraView { frame, depths }
}

fn render_raw(world: &World, pose: Pose, cam: &CameraConfig) -> CameraView {
    let (w, h) = (cam.width, cam.height);
    let focal = cam.focal();
    let horizon = h as f64 / 2.0;
    let cam_height = cam.wall_height / 2.0;
    let mut pixels = vec![0.0; w * h];
    let mut zbuf = vec![cam.max_depth; w];
    let mut depths = vec![cam.max_depth; w];

    // Floor and ceiling depend only on the row.
    for y in 0..h {
        let dy = y as f64 + 0.5 - horizon;
        let dist = cam_height * focal / dy.abs();
        let shade = if dy > 0.0 {
            0.3 * attenuate(dist) + 0.05
        } else {
            0.85 * attenuate(dist) + 0.05
        };
        pixels[y * w..(y + 1) * w].fill(shade);
    }

    for col in 0..w {
        let offset = cam.column_offset(col);
        let angle = pose.theta + offset;
        let Some(hit) = cast_ray(&world.spec, pose.x, pose.y, angle, cam.max_depth) else {
            continue;
        };
        depths[col] = hit.distance;
        let perp = (hit.distance * offset.cos()).max(1e-3);
        zbuf[col] = perp;
        let (lx, ly) = hit.last_open;
        let tag = world
            .spec
            .cell_i(lx, ly)
            .room()
            .map_or(RoomTag::Empty, |r| world.spec.room_tags[r]);
        let line = focal * cam.wall_height / perp;
        let top = horizon - line / 2.0;
        let side = if hit.vertical_face { 1.0 } else { 0.8 };
        let light = side * attenuate(perp);
        let y0 = top.max(0.0).floor() as usize;
        let y1 = ((horizon + line / 2.0).ceil() as usize).min(h);
        for y in y0..y1 {
            let v = (y as f64 + 0.5 - top) / line;
            if (0.0..1.0).contains(&v) {
                pixels[y * w + col] = texture::wall(tag, hit.u, v) * light;
            }
        }
    }

    // Billboards, far to near.
    let time = world.time();
    let (ct, st) = (pose.theta.cos(), pose.theta.sin());
    let mut sprites: Vec<(f64, f64, usize)> = world
        .entities
        .iter()
        .enumerate()
        .filter_map(|(i, e)| {
            let (ex, ey) = e.position_at(time);
            let (dx, dy) = (ex - pose.x, ey - pose.y);
            let depth = dx * ct + dy * st;
            let lateral = -dx * st + dy * ct;
            (depth > 0.05).then_some((depth, lateral, i))
        })
        .collect();
    sprites.sort_by(|a, b| b.0.total_cmp(&a.0));
    for (depth, lateral, i) in sprites {
        let e = &world.entities[i];
        let center = w as f64 / 2.0 + focal * lateral / depth;
        let half_w = focal * e.radius / depth;
        let bottom = horizon + focal * cam_height / depth;
        let top = bottom - focal * e.height / depth;
        let x0 = (center - half_w).floor().max(0.0) as usize;
        let x1 = ((center + half_w).ceil().max(0.0) as usize).min(w);
        let y0 = top.floor().max(0.0) as usize;
        let y1 = (bottom.ceil().max(0.0) as usize).min(h);
        let light = attenuate(depth);
        for col in x0..x1 {
            if depth >= zbuf[col] {
                continue;
            }
            let u = (col as f64 + 0.5 - (center - half_w)) / (2.0 * half_w);
            if !(0.0..1.0).contains(&u) {
                continue;
            }
            for y in y0..y1 {
                let v = (y as f64 + 0.5 - top) / (bottom - top);
                if !(0.0..1.0).contains(&v) {
                    continue;
                }
                let texel = match e.kind {
                    EntityKind::Box => Some(texture::crate_box(e.texture, u, v)),
                    EntityKind::Person => texture::person(e.texture, u, v),
                };
                if let Some(t) = texel {
                    pixels[y * w + col] = t * light;
                }
            }
        }
    }

    let frame = Frame::from_clamped(h, w, pixels).expect("render buffer sized to frame");
    CameraView { frame, depths }
}

pub fn render_camera(world: &World, pose: Pose) -> Frame {
    render_view(world, pose, &CameraConfig::default()).frame
}
