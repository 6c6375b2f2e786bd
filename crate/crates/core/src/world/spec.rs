//! Static world description and its plain-text map format.
//!
//! A map file holds `key=value` lines (`cell_size`, `room.<id>=<tag>`),
//! `;` comments, and grid rows made of `#` (wall), `.` (free), `S` (start
//! zone) and digits `0`–`7` (room cells; doorway cells carry the room digit
//! too and are the room cells 4-adjacent to hall space).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const ROOM_COUNT: usize = 8;

pub const DEFAULT_MAP: &str = include_str!("../../maps/default.map");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RoomTag {
    Empty,
    Vegetation,
    StaticObjects,
    Dynamic,
    MultiDynamic,
}

impl RoomTag {
    pub const ALL: [RoomTag; 5] = [
        RoomTag::Empty,
        RoomTag::Vegetation,
        RoomTag::StaticObjects,
        RoomTag::Dynamic,
        RoomTag::MultiDynamic,
    ];

    pub fn is_anomaly(self) -> bool {
        self != RoomTag::Empty
    }

    pub fn is_dynamic(self) -> bool {
        matches!(self, RoomTag::Dynamic | RoomTag::MultiDynamic)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RoomTag::Empty => "empty",
            RoomTag::Vegetation => "vegetation",
            RoomTag::StaticObjects => "static_objects",
            RoomTag::Dynamic => "dynamic",
            RoomTag::MultiDynamic => "multi_dynamic",
        }
    }
}

impl fmt::Display for RoomTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RoomTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RoomTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown room tag {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    Wall,
    Free,
    Start,
    Room(u8),
}

impl Cell {
    #[inline]
    pub fn is_wall(self) -> bool {
        self == Cell::Wall
    }

    #[inline]
    pub fn room(self) -> Option<usize> {
        match self {
            Cell::Room(r) => Some(r as usize),
            _ => None,
        }
    }

    fn to_char(self) -> char {
        match self {
            Cell::Wall => '#',
            Cell::Free => '.',
            Cell::Start => 'S',
            Cell::Room(r) => (b'0' + r) as char,
        }
    }
}

/// Inclusive cell bounds of a room's interior (doorway excluded).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoomRect {
    pub min_x: usize,
    pub min_y: usize,
    pub max_x: usize,
    pub max_y: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldSpec {
    pub cell_size: f64,
    width: usize,
    height: usize,
    cells: Vec<Cell>,
    pub room_tags: [RoomTag; ROOM_COUNT],
}

impl WorldSpec {
    pub fn default_map() -> Self {
        Self::parse(DEFAULT_MAP).expect("bundled map is valid")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cell_size = 0.25;
        let mut tags: [Option<RoomTag>; ROOM_COUNT] = [None; ROOM_COUNT];
        let mut rows: Vec<Vec<Cell>> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with(';') {
                continue;
            }
            if let Some((k, v)) = line.split_once('=') {
                let (k, v) = (k.trim(), v.trim());
                if k == "cell_size" {
                    cell_size = v.parse().map_err(|_| {
                        Error::Config(format!("line {}: bad cell_size {v:?}", lineno + 1))
                    })?;
                } else if let Some(id) = k.strip_prefix("room.") {
                    let id: usize =
                        id.parse().ok().filter(|&i| i < ROOM_COUNT).ok_or_else(|| {
                            Error::Config(format!("line {}: bad room id {id:?}", lineno + 1))
                        })?;
                    tags[id] = Some(v.parse()?);
                } else {
                    return Err(Error::Config(format!(
                        "line {}: unknown key {k:?}",
                        lineno + 1
                    )));
                }
                continue;
            }
            let row = line
                .chars()
                .map(|c| match c {
                    '#' => Ok(Cell::Wall),
                    '.' => Ok(Cell::Free),
                    'S' => Ok(Cell::Start),
                    '0'..='7' => Ok(Cell::Room(c as u8 - b'0')),
                    _ => Err(Error::Config(format!(
                        "line {}: unexpected map character {c:?}",
                        lineno + 1
                    ))),
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if height == 0 || rows.iter().any(|r| r.len() != width) {
            return Err(Error::Config(
                "map grid must be a non-empty rectangle".into(),
            ));
        }
        let mut room_tags = [RoomTag::Empty; ROOM_COUNT];
        for (i, t) in tags.iter().enumerate() {
            room_tags[i] = t.ok_or_else(|| Error::Config(format!("room.{i} has no tag")))?;
        }
        let spec = Self {
            cell_size,
            width,
            height,
            cells: rows.into_iter().flatten().collect(),
            room_tags,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks the structural invariants of an evaluation world.
    pub fn validate(&self) -> Result<()> {
        if !(self.cell_size > 0.0) {
            return Err(Error::Config("cell_size must be positive".into()));
        }
        for r in 0..ROOM_COUNT {
            if !self.cells.iter().any(|c| c.room() == Some(r)) {
                return Err(Error::Config(format!("room {r} has no cells")));
            }
        }
        for (r, tag) in self.room_tags.iter().enumerate() {
            if r % 2 == 1 && tag.is_anomaly() {
                return Err(Error::Config(format!(
                    "room {r} is tagged {tag}; anomalies may only occupy alternating (even) rooms"
                )));
            }
        }
        let start: Vec<(usize, usize)> = self.start_cells();
        if start.is_empty() {
            return Err(Error::Config("map has no start zone".into()));
        }
        let (xs, ys): (Vec<usize>, Vec<usize>) = start.iter().copied().unzip();
        let span_x = xs.iter().max().unwrap() - xs.iter().min().unwrap() + 1;
        let span_y = ys.iter().max().unwrap() - ys.iter().min().unwrap() + 1;
        if span_x != 4 || span_y != 4 || start.len() != 16 {
            return Err(Error::Config(
                "start zone must be a fully free 4x4 block".into(),
            ));
        }
        for y in 0..self.height {
            for x in 0..self.width {
                let edge = x == 0 || y == 0 || x + 1 == self.width || y + 1 == self.height;
                if edge && !self.cell(x, y).is_wall() {
                    return Err(Error::Config("map border must be wall".into()));
                }
            }
        }
        Ok(())
    }

    /// Copy with every room tagged empty; used for the anomaly-free baseline corpus.
    pub fn without_anomalies(&self) -> Self {
        Self {
            room_tags: [RoomTag::Empty; ROOM_COUNT],
            ..self.clone()
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn cell(&self, x: usize, y: usize) -> Cell {
        self.cells[y * self.width + x]
    }

    /// Cell at signed coordinates; outside the map counts as wall.
    #[inline]
    pub fn cell_i(&self, x: isize, y: isize) -> Cell {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            Cell::Wall
        } else {
            self.cell(x as usize, y as usize)
        }
    }

    pub fn is_wall_at(&self, wx: f64, wy: f64) -> bool {
        let (cx, cy) = self.world_to_cell(wx, wy);
        self.cell_i(cx, cy).is_wall()
    }

    #[inline]
    pub fn world_to_cell(&self, wx: f64, wy: f64) -> (isize, isize) {
        (
            (wx / self.cell_size).floor() as isize,
            (wy / self.cell_size).floor() as isize,
        )
    }

    #[inline]
    pub fn cell_center(&self, x: usize, y: usize) -> (f64, f64) {
        (
            (x as f64 + 0.5) * self.cell_size,
            (y as f64 + 0.5) * self.cell_size,
        )
    }

    /// Room containing the world point, if any.
    pub fn room_at(&self, wx: f64, wy: f64) -> Option<usize> {
        let (cx, cy) = self.world_to_cell(wx, wy);
        self.cell_i(cx, cy).room()
    }

    pub fn start_cells(&self) -> Vec<(usize, usize)> {
        (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| (x, y)))
            .filter(|&(x, y)| self.cell(x, y) == Cell::Start)
            .collect()
    }

    fn is_hall(&self, x: isize, y: isize) -> bool {
        matches!(self.cell_i(x, y), Cell::Free | Cell::Start)
    }

    /// Room cells 4-adjacent to hall space.
    pub fn doorway_cells(&self, room: usize) -> Vec<(usize, usize)> {
        (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| (x, y)))
            .filter(|&(x, y)| {
                self.cell(x, y).room() == Some(room) && {
                    let (xi, yi) = (x as isize, y as isize);
                    [(1, 0), (-1, 0), (0, 1), (0, -1)]
                        .iter()
                        .any(|(dx, dy)| self.is_hall(xi + dx, yi + dy))
                }
            })
            .collect()
    }

    /// Bounding rectangle of a room's interior cells.
    pub fn room_rect(&self, room: usize) -> RoomRect {
        let doors = self.doorway_cells(room);
        let mut rect = RoomRect {
            min_x: usize::MAX,
            min_y: usize::MAX,
            max_x: 0,
            max_y: 0,
        };
        for y in 0..self.height {
            for x in 0..self.width {
                if self.cell(x, y).room() == Some(room) && !doors.contains(&(x, y)) {
                    rect.min_x = rect.min_x.min(x);
                    rect.min_y = rect.min_y.min(y);
                    rect.max_x = rect.max_x.max(x);
                    rect.max_y = rect.max_y.max(y);
                }
            }
        }
        rect
    }

    pub fn to_map_text(&self) -> String {
        let mut out = format!("cell_size={}\n", self.cell_size);
        for (i, t) in self.room_tags.iter().enumerate() {
            out.push_str(&format!("room.{i}={t}\n"));
        }
        for y in 0..self.height {
            out.extend((0..self.width).map(|x| self.cell(x, y).to_char()));
            out.push('\n');
        }
        out
    }
}
