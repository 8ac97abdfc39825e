//! Occupancy grids in the MovingAI `.map` format.
//!
//! Cell `(col, row)` is a unit square centered at the point `(col, row)`.
//! Row 0 is the first map line.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{point_segment_dist_sq, Point2};

/// Agent disk radius used for line-of-sight clearance.
pub const LOS_CLEARANCE: f64 = 0.5;
const LOS_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub col: i32,
    pub row: i32,
}

impl Cell {
    pub const fn new(col: i32, row: i32) -> Self {
        Cell { col, row }
    }

    pub fn center(self) -> Point2 {
        Point2::new(self.col as f64, self.row as f64)
    }

    pub fn manhattan(self, other: Cell) -> i32 {
        (self.col - other.col).abs() + (self.row - other.row).abs()
    }

    pub fn euclidean(self, other: Cell) -> f64 {
        self.center().distance(other.center())
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.col, self.row)
    }
}

/// Up, left, down, right. Neighbor order is part of the planners'
/// tie-breaking contract.
pub const CARDINAL_STEPS: [(i32, i32); 4] = [(0, -1), (-1, 0), (0, 1), (1, 0)];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    width: i32,
    height: i32,
    blocked: Vec<bool>,
}

impl GridMap {
    /// Obstacle-free map.
    pub fn empty(width: i32, height: i32) -> Self {
        assert!(width >= 1 && height >= 1, "map must be at least 1x1");
        GridMap {
            width,
            height,
            blocked: vec![false; (width * height) as usize],
        }
    }

    pub fn with_blocked(width: i32, height: i32, blocked: impl IntoIterator<Item = Cell>) -> Self {
        let mut map = Self::empty(width, height);
        for c in blocked {
            map.set_blocked(c, true);
        }
        map
    }

    pub fn width(&self) -> i32 {
        self.width
    }

    pub fn height(&self) -> i32 {
        self.height
    }

    pub fn num_cells(&self) -> usize {
        self.blocked.len()
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.col >= 0 && c.row >= 0 && c.col < self.width && c.row < self.height
    }

    /// Dense index of an in-bounds cell.
    pub fn index(&self, c: Cell) -> usize {
        debug_assert!(self.in_bounds(c));
        (c.row * self.width + c.col) as usize
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        let i = index as i32;
        Cell::new(i % self.width, i / self.width)
    }

    pub fn is_blocked(&self, c: Cell) -> bool {
        self.blocked[self.index(c)]
    }

    /// In bounds and not an obstacle.
    pub fn is_passable(&self, c: Cell) -> bool {
        self.in_bounds(c) && !self.is_blocked(c)
    }

    pub fn set_blocked(&mut self, c: Cell, blocked: bool) {
        let i = self.index(c);
        self.blocked[i] = blocked;
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.num_cells()).map(|i| self.cell_at(i))
    }

    pub fn blocked_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells().filter(|&c| self.is_blocked(c))
    }

    pub fn passable_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells().filter(|&c| !self.is_blocked(c))
    }

    /// Cardinal neighbors of `c` that are in bounds and free, in the order
    /// up, left, down, right.
    pub fn neighbors4(&self, c: Cell) -> Vec<Cell> {
        self.neighbors4_iter(c).collect()
    }

    pub fn neighbors4_iter(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        CARDINAL_STEPS
            .iter()
            .map(move |&(dc, dr)| Cell::new(c.col + dc, c.row + dr))
            .filter(|&n| self.is_passable(n))
    }

    /// Whether a disk of radius 0.5 can slide from the center of `a` to the
    /// center of `b` without overlapping any blocked cell or any cell in
    /// `extra_blocked`. Touching a cell's boundary is allowed.
    pub fn line_of_sight(&self, a: Cell, b: Cell, extra_blocked: &CellSet) -> bool {
        self.corridor_cells(a, b)
            .into_iter()
            .all(|c| !self.is_blocked(c) && !extra_blocked.contains(c))
    }

    /// In-bounds cells whose closed square lies strictly closer than the
    /// clearance radius to the segment between the centers of `a` and `b`.
    ///
    /// Columns are swept one at a time; for each column only the rows
    /// spanned by the segment's slab (widened by one) are tested exactly.
    pub fn corridor_cells(&self, a: Cell, b: Cell) -> Vec<Cell> {
        let (pa, pb) = (a.center(), b.center());
        let reach = LOS_CLEARANCE + 0.5;
        let mut out = Vec::new();
        let col_lo = a.col.min(b.col) - 1;
        let col_hi = a.col.max(b.col) + 1;
        for col in col_lo.max(0)..=col_hi.min(self.width - 1) {
            // part of the segment with x within `reach` of this column's center
            let x_lo = col as f64 - reach;
            let x_hi = col as f64 + reach;
            let (y_min, y_max) = match clip_segment_x(pa, pb, x_lo, x_hi) {
                Some(r) => r,
                None => continue,
            };
            let row_lo = ((y_min - reach).floor() as i32).max(0);
            let row_hi = ((y_max + reach).ceil() as i32).min(self.height - 1);
            for row in row_lo..=row_hi {
                let c = Cell::new(col, row);
                if segment_square_dist_sq(pa, pb, c) < LOS_CLEARANCE * LOS_CLEARANCE - LOS_SLACK {
                    out.push(c);
                }
            }
        }
        out
    }

    /// MovingAI text form; blocked cells are written as `@`.
    pub fn to_map_string(&self) -> String {
        let mut s = format!(
            "type octile\nheight {}\nwidth {}\nmap\n",
            self.height, self.width
        );
        for row in 0..self.height {
            for col in 0..self.width {
                s.push(if self.is_blocked(Cell::new(col, row)) {
                    '@'
                } else {
                    '.'
                });
            }
            s.push('\n');
        }
        s
    }
}

impl FromStr for GridMap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_map(s)
    }
}

/// Parses a MovingAI `.map` file: `type`, `height`, `width` and `map` header
/// lines followed by `height` rows of `width` characters. `.` and `G` are
/// free; `@`, `O` and `T` are obstacles.
pub fn parse_map(text: &str) -> Result<GridMap> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let mut next_header = |what: &str| -> Result<(usize, String)> {
        loop {
            match lines.next() {
                Some((_, l)) if l.trim().is_empty() => continue,
                Some((n, l)) => return Ok((n, l.trim().to_string())),
                None => return Err(Error::parse(0, format!("missing `{what}` header"))),
            }
        }
    };

    let (n, line) = next_header("type")?;
    if !line.starts_with("type") {
        return Err(Error::parse(
            n,
            format!("expected `type <name>`, found `{line}`"),
        ));
    }

    let mut height = None;
    let mut width = None;
    for _ in 0..2 {
        let (n, line) = next_header("height/width")?;
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap_or_default();
        let value = parts
            .next()
            .and_then(|v| v.parse::<i32>().ok())
            .filter(|&v| v >= 1)
            .ok_or_else(|| Error::parse(n, format!("bad dimension line `{line}`")))?;
        if parts.next().is_some() {
            return Err(Error::parse(n, format!("trailing tokens in `{line}`")));
        }
        let slot = match key {
            "height" => &mut height,
            "width" => &mut width,
            _ => {
                return Err(Error::parse(
                    n,
                    format!("expected height or width, found `{key}`"),
                ))
            }
        };
        if slot.replace(value).is_some() {
            return Err(Error::parse(n, format!("duplicate `{key}` line")));
        }
    }
    let (height, width) = match (height, width) {
        (Some(h), Some(w)) => (h, w),
        _ => return Err(Error::parse(0, "both height and width are required")),
    };

    let (n, line) = next_header("map")?;
    if line != "map" {
        return Err(Error::parse(n, format!("expected `map`, found `{line}`")));
    }

    let mut map = GridMap::empty(width, height);
    let mut row = 0;
    for (n, line) in lines {
        if row == height {
            if line.trim().is_empty() {
                continue;
            }
            return Err(Error::parse(n, format!("more than {height} map rows")));
        }
        let chars: Vec<char> = line.chars().collect();
        if chars.len() != width as usize {
            return Err(Error::parse(
                n,
                format!("row has {} cells, expected {width}", chars.len()),
            ));
        }
        for (col, ch) in chars.into_iter().enumerate() {
            let blocked = match ch {
                '.' | 'G' => false,
                '@' | 'O' | 'T' => true,
                other => return Err(Error::parse(n, format!("unknown map character `{other}`"))),
            };
            map.set_blocked(Cell::new(col as i32, row), blocked);
        }
        row += 1;
    }
    if row != height {
        return Err(Error::parse(
            0,
            format!("found {row} map rows, expected {height}"),
        ));
    }
    Ok(map)
}

/// Dense cell set sized to one map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellSet {
    width: i32,
    height: i32,
    bits: Vec<bool>,
    len: usize,
}

impl CellSet {
    pub fn new(map: &GridMap) -> Self {
        Self::with_dims(map.width, map.height)
    }

    pub fn with_dims(width: i32, height: i32) -> Self {
        CellSet {
            width,
            height,
            bits: vec![false; (width * height).max(0) as usize],
            len: 0,
        }
    }

    pub fn from_cells(map: &GridMap, cells: impl IntoIterator<Item = Cell>) -> Self {
        let mut set = Self::new(map);
        for c in cells {
            set.insert(c);
        }
        set
    }

    fn slot(&self, c: Cell) -> Option<usize> {
        (c.col >= 0 && c.row >= 0 && c.col < self.width && c.row < self.height)
            .then(|| (c.row * self.width + c.col) as usize)
    }

    pub fn contains(&self, c: Cell) -> bool {
        self.slot(c).is_some_and(|i| self.bits[i])
    }

    /// Returns whether the cell was newly inserted. Out-of-bounds cells are
    /// ignored.
    pub fn insert(&mut self, c: Cell) -> bool {
        match self.slot(c) {
            Some(i) if !self.bits[i] => {
                self.bits[i] = true;
                self.len += 1;
                true
            }
            _ => false,
        }
    }

    pub fn remove(&mut self, c: Cell) -> bool {
        match self.slot(c) {
            Some(i) if self.bits[i] => {
                self.bits[i] = false;
                self.len -= 1;
                true
            }
            _ => false,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = Cell> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| Cell::new(i as i32 % self.width, i as i32 / self.width))
    }
}

/// y-range of the part of segment `[a, b]` with `x` in `[x_lo, x_hi]`.
fn clip_segment_x(a: Point2, b: Point2, x_lo: f64, x_hi: f64) -> Option<(f64, f64)> {
    let dx = b.x - a.x;
    let (t0, t1) = if dx == 0.0 {
        if a.x < x_lo || a.x > x_hi {
            return None;
        }
        (0.0, 1.0)
    } else {
        let ta = (x_lo - a.x) / dx;
        let tb = (x_hi - a.x) / dx;
        let (lo, hi) = if ta < tb { (ta, tb) } else { (tb, ta) };
        let (lo, hi) = (lo.max(0.0), hi.min(1.0));
        if lo > hi {
            return None;
        }
        (lo, hi)
    };
    let y0 = a.y + (b.y - a.y) * t0;
    let y1 = a.y + (b.y - a.y) * t1;
    Some((y0.min(y1), y0.max(y1)))
}

/// Squared distance between segment `[a, b]` and the closed unit square of
/// cell `c`.
pub(crate) fn segment_square_dist_sq(a: Point2, b: Point2, c: Cell) -> f64 {
    let (cx, cy) = (c.col as f64, c.row as f64);
    let (x0, x1, y0, y1) = (cx - 0.5, cx + 0.5, cy - 0.5, cy + 0.5);
    if segment_hits_box(a, b, x0, x1, y0, y1) {
        return 0.0;
    }
    let point_box = |p: Point2| {
        let dx = (x0 - p.x).max(0.0).max(p.x - x1);
        let dy = (y0 - p.y).max(0.0).max(p.y - y1);
        dx * dx + dy * dy
    };
    let corners = [
        Point2::new(x0, y0),
        Point2::new(x0, y1),
        Point2::new(x1, y0),
        Point2::new(x1, y1),
    ];
    corners
        .iter()
        .map(|&k| point_segment_dist_sq(k, a, b))
        .chain([point_box(a), point_box(b)])
        .fold(f64::INFINITY, f64::min)
}

/// Liang-Barsky clip of `[a, b]` against an axis-aligned box.
fn segment_hits_box(a: Point2, b: Point2, x0: f64, x1: f64, y0: f64, y1: f64) -> bool {
    let d = b - a;
    let mut t0: f64 = 0.0;
    let mut t1: f64 = 1.0;
    for (p, q) in [
        (-d.x, a.x - x0),
        (d.x, x1 - a.x),
        (-d.y, a.y - y0),
        (d.y, y1 - a.y),
    ] {
        if p == 0.0 {
            if q < 0.0 {
                return false;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
            if t0 > t1 {
                return false;
            }
        }
    }
    true
}
