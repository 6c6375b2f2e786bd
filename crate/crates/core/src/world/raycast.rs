use super::spec::WorldSpec;

/// First wall boundary crossed by a ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    /// Euclidean distance from the origin, metres.
    pub distance: f64,
    pub cell: (isize, isize),
    /// Last non-wall cell the ray passed through.
    pub last_open: (isize, isize),
    /// True when the ray crossed a vertical grid line (an east/west face).
    pub vertical_face: bool,
    /// Position along the face in `[0, 1)`.
    pub u: f64,
}

/// Grid DDA against wall cells. Returns `None` when nothing is hit within `max_dist`.
pub fn cast_ray(spec: &WorldSpec, ox: f64, oy: f64, angle: f64, max_dist: f64) -> Option<RayHit> {
    let s = spec.cell_size;
    let (px, py) = (ox / s, oy / s);
    let (dx, dy) = (angle.cos(), angle.sin());
    let mut cx = px.floor() as isize;
    let mut cy = py.floor() as isize;
    if spec.cell_i(cx, cy).is_wall() {
        return Some(RayHit {
            distance: 0.0,
            cell: (cx, cy),
            last_open: (cx, cy),
            vertical_face: true,
            u: 0.0,
        });
    }
    let step_x: isize = if dx < 0.0 { -1 } else { 1 };
    let step_y: isize = if dy < 0.0 { -1 } else { 1 };
    let delta_x = if dx == 0.0 {
        f64::INFINITY
    } else {
        (1.0 / dx).abs()
    };
    let delta_y = if dy == 0.0 {
        f64::INFINITY
    } else {
        (1.0 / dy).abs()
    };
    let mut side_x = if dx < 0.0 {
        (px - cx as f64) * delta_x
    } else {
        (cx as f64 + 1.0 - px) * delta_x
    };
    let mut side_y = if dy < 0.0 {
        (py - cy as f64) * delta_y
    } else {
        (cy as f64 + 1.0 - py) * delta_y
    };
    let max_cells = max_dist / s;
    loop {
        let prev = (cx, cy);
        let (t, vertical) = if side_x < side_y {
            let t = side_x;
            side_x += delta_x;
            cx += step_x;
            (t, true)
        } else {
            let t = side_y;
            side_y += delta_y;
            cy += step_y;
            (t, false)
        };
        if t > max_cells {
            return None;
        }
        if spec.cell_i(cx, cy).is_wall() {
            let (hx, hy) = (px + t * dx, py + t * dy);
            let u = if vertical {
                hy - hy.floor()
            } else {
                hx - hx.floor()
            };
            return Some(RayHit {
                distance: t * s,
                cell: (cx, cy),
                last_open: prev,
                vertical_face: vertical,
                u,
            });
        }
    }
}

/// Whether the straight segment between two points stays out of wall cells.
pub fn segment_clear(spec: &WorldSpec, ax: f64, ay: f64, bx: f64, by: f64) -> bool {
    let len = ((bx - ax).powi(2) + (by - ay).powi(2)).sqrt();
    if spec.is_wall_at(ax, ay) || spec.is_wall_at(bx, by) {
        return false;
    }
    if len == 0.0 {
        return true;
    }
    let angle = (by - ay).atan2(bx - ax);
    cast_ray(spec, ax, ay, angle, len).is_none()
}
