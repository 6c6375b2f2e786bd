//! Ternary occupancy grid carved from lidar beams.

use std::fmt::Write as _;

use crate::world::{LidarScan, Pose, WorldSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellState {
    Unknown,
    Free,
    Occupied,
}

impl CellState {
    pub fn as_char(self) -> char {
        match self {
            CellState::Unknown => '?',
            CellState::Free => '.',
            CellState::Occupied => '#',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    origin: (f64, f64),
    cells: Vec<CellState>,
}

impl OccupancyGrid {
    pub fn new(width: usize, height: usize, resolution: f64) -> Self {
        Self {
            width,
            height,
            resolution,
            origin: (0.0, 0.0),
            cells: vec![CellState::Unknown; width * height],
        }
    }

    /// Unknown grid aligned with the world's cell lattice.
    pub fn for_world(spec: &WorldSpec) -> Self {
        Self::new(spec.width(), spec.height(), spec.cell_size)
    }

    pub fn from_cells(width: usize, height: usize, resolution: f64, cells: Vec<CellState>) -> Self {
        assert_eq!(
            cells.len(),
            width * height,
            "cell buffer does not match dimensions"
        );
        Self {
            width,
            height,
            resolution,
            origin: (0.0, 0.0),
            cells,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn in_bounds(&self, x: isize, y: isize) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> CellState {
        self.cells[self.index(x, y)]
    }

    /// Out-of-bounds reads as unknown.
    #[inline]
    pub fn get_i(&self, x: isize, y: isize) -> CellState {
        if self.in_bounds(x, y) {
            self.get(x as usize, y as usize)
        } else {
            CellState::Unknown
        }
    }

    pub fn set(&mut self, x: usize, y: usize, s: CellState) {
        let i = self.index(x, y);
        self.cells[i] = s;
    }

    pub fn known_count(&self) -> usize {
        self.cells
            .iter()
            .filter(|&&c| c != CellState::Unknown)
            .count()
    }

    pub fn world_to_cell(&self, wx: f64, wy: f64) -> (isize, isize) {
        (
            ((wx - self.origin.0) / self.resolution).floor() as isize,
            ((wy - self.origin.1) / self.resolution).floor() as isize,
        )
    }

    pub fn cell_center(&self, x: usize, y: usize) -> (f64, f64) {
        (
            self.origin.0 + (x as f64 + 0.5) * self.resolution,
            self.origin.1 + (y as f64 + 0.5) * self.resolution,
        )
    }

    /// Marks a cell free unless it is already occupied.
    fn mark_free(&mut self, x: usize, y: usize) {
        let i = self.index(x, y);
        if self.cells[i] == CellState::Unknown {
            self.cells[i] = CellState::Free;
        }
    }

    fn mark_occupied(&mut self, x: usize, y: usize) {
        let i = self.index(x, y);
        self.cells[i] = CellState::Occupied;
    }

    /// One character per cell, rows separated by newlines.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity((self.width + 1) * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                s.push(self.get(x, y).as_char());
            }
            s.push('\n');
        }
        s
    }

    /// Like [`to_text`](Self::to_text) with `R` at the robot cell and `*` on the supplied cells.
    pub fn to_text_annotated(
        &self,
        robot: Option<(isize, isize)>,
        marks: &[(usize, usize)],
    ) -> String {
        let mut s = String::new();
        for y in 0..self.height {
            for x in 0..self.width {
                let c = if robot == Some((x as isize, y as isize)) {
                    'R'
                } else if marks.contains(&(x, y)) {
                    '*'
                } else {
                    self.get(x, y).as_char()
                };
                let _ = write!(s, "{c}");
            }
            s.push('\n');
        }
        s
    }
}

/// Grid cells crossed by the segment from `(ox, oy)` along `angle` for
/// `length` metres, in traversal order, each with its entry distance.
pub fn ray_cells(
    grid: &OccupancyGrid,
    ox: f64,
    oy: f64,
    angle: f64,
    length: f64,
) -> Vec<((isize, isize), f64)> {
    let res = grid.resolution;
    let (gx, gy) = ((ox - grid.origin.0) / res, (oy - grid.origin.1) / res);
    let (dx, dy) = (angle.cos(), angle.sin());
    let (mut cx, mut cy) = (gx.floor() as isize, gy.floor() as isize);
    let step_x: isize = if dx > 0.0 { 1 } else { -1 };
    let step_y: isize = if dy > 0.0 { 1 } else { -1 };
    let t_dx = if dx != 0.0 {
        res / dx.abs()
    } else {
        f64::INFINITY
    };
    let t_dy = if dy != 0.0 {
        res / dy.abs()
    } else {
        f64::INFINITY
    };
    let mut t_x = if dx > 0.0 {
        ((cx + 1) as f64 - gx) * res / dx
    } else if dx < 0.0 {
        (gx - cx as f64) * res / -dx
    } else {
        f64::INFINITY
    };
    let mut t_y = if dy > 0.0 {
        ((cy + 1) as f64 - gy) * res / dy
    } else if dy < 0.0 {
        (gy - cy as f64) * res / -dy
    } else {
        f64::INFINITY
    };
    let mut out = vec![((cx, cy), 0.0)];
    loop {
        let t = t_x.min(t_y);
        if t > length {
            break;
        }
        if t_x < t_y {
            cx += step_x;
            t_x += t_dx;
        } else {
            cy += step_y;
            t_y += t_dy;
        }
        out.push(((cx, cy), t));
    }
    out
}

/// Slack in metres that lets a beam ending exactly on a cell boundary claim
/// the cell beyond it, where the wall is.
pub const HIT_SLACK: f64 = 1e-6;

/// Carves every beam of `scan` into `grid`: traversed cells become free, the
/// terminal cell of a beam that hit something becomes occupied. Known cells
/// never revert to unknown and occupied cells are never freed.
pub fn integrate_scan(grid: &mut OccupancyGrid, pose: Pose, scan: &LidarScan) {
    for (k, &r) in scan.ranges.iter().enumerate() {
        let angle = scan.beam_angle(k);
        let hit = r < scan.max_range;
        let reach = if hit { r + HIT_SLACK } else { r };
        let cells = ray_cells(grid, pose.x, pose.y, angle, reach);
        let last = cells.len() - 1;
        for (i, &((x, y), _)) in cells.iter().enumerate() {
            if !grid.in_bounds(x, y) {
                break;
            }
            let (x, y) = (x as usize, y as usize);
            if i == last && hit {
                grid.mark_occupied(x, y);
            } else {
                grid.mark_free(x, y);
            }
        }
    }
}
