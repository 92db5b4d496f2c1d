//! Occupancy-grid worlds: cellular-automata generation, obstacle inflation,
//! footprint collision queries and simulated planar laser scans.
//!
//! Cell `(ix, iy)` covers `[origin.x + ix*res, origin.x + (ix+1)*res)` and the
//! matching interval in y; `iy = 0` is the bottom row. The text format stores
//! rows top-first.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Point2, Pose2D};

/// Cost value of cells the planner must never enter.
pub const LETHAL: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid file parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("no traversable map found; last seed tried {last_seed}")]
    GenerationFailed { last_seed: u64 },
    #[error("invalid pose ({x:.3}, {y:.3}): {reason}")]
    InvalidPose { x: f64, y: f64, reason: &'static str },
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    origin: Point2,
    cells: Vec<bool>,
}

impl OccupancyGrid {
    /// An all-free grid with its origin at (0, 0).
    pub fn new(width: usize, height: usize, resolution: f64) -> Result<Self, WorldError> {
        Self::from_cells(width, height, resolution, vec![false; width * height])
    }

    pub fn from_cells(
        width: usize,
        height: usize,
        resolution: f64,
        cells: Vec<bool>,
    ) -> Result<Self, WorldError> {
        if width == 0 || height == 0 {
            return Err(WorldError::InvalidGrid("zero-sized grid".into()));
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(WorldError::InvalidGrid(format!("resolution {resolution}")));
        }
        if cells.len() != width * height {
            return Err(WorldError::InvalidGrid(format!(
                "{} cells for {}x{}",
                cells.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            resolution,
            origin: Point2::default(),
            cells,
        })
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

    pub fn origin(&self) -> Point2 {
        self.origin
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    /// World-frame extent `(max_x, max_y)` of the grid.
    pub fn extent(&self) -> Point2 {
        Point2::new(
            self.origin.x + self.width as f64 * self.resolution,
            self.origin.y + self.height as f64 * self.resolution,
        )
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.width + ix
    }

    pub fn occupied(&self, ix: usize, iy: usize) -> bool {
        self.cells[self.index(ix, iy)]
    }

    /// Occupancy lookup treating everything off the grid as occupied.
    pub fn occupied_or_outside(&self, ix: i64, iy: i64) -> bool {
        if ix < 0 || iy < 0 || ix >= self.width as i64 || iy >= self.height as i64 {
            return true;
        }
        self.occupied(ix as usize, iy as usize)
    }

    pub fn set(&mut self, ix: usize, iy: usize, occupied: bool) {
        let i = self.index(ix, iy);
        self.cells[i] = occupied;
    }

    pub fn fill_rect(&mut self, ix0: usize, iy0: usize, ix1: usize, iy1: usize, occupied: bool) {
        for iy in iy0..=iy1.min(self.height - 1) {
            for ix in ix0..=ix1.min(self.width - 1) {
                self.set(ix, iy, occupied);
            }
        }
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    pub fn contains(&self, p: Point2) -> bool {
        let e = self.extent();
        p.x >= self.origin.x && p.y >= self.origin.y && p.x < e.x && p.y < e.y
    }

    /// Cell containing `p`, or `None` off the grid.
    pub fn cell_of(&self, p: Point2) -> Option<(usize, usize)> {
        if !self.contains(p) {
            return None;
        }
        let ix = ((p.x - self.origin.x) / self.resolution).floor() as usize;
        let iy = ((p.y - self.origin.y) / self.resolution).floor() as usize;
        Some((ix.min(self.width - 1), iy.min(self.height - 1)))
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Point2 {
        Point2::new(
            self.origin.x + (ix as f64 + 0.5) * self.resolution,
            self.origin.y + (iy as f64 + 0.5) * self.resolution,
        )
    }

    /// Mirror about the vertical axis through the grid center.
    pub fn mirrored_x(&self) -> Self {
        let mut out = self.clone();
        for iy in 0..self.height {
            for ix in 0..self.width {
                out.set(self.width - 1 - ix, iy, self.occupied(ix, iy));
            }
        }
        out
    }

    /// Serializes to the text grid format: `grid <w> <h> <res>` then rows
    /// of `.`/`#`, top row first.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity((self.width + 1) * self.height + 32);
        let _ = writeln!(s, "grid {} {} {}", self.width, self.height, self.resolution);
        for iy in (0..self.height).rev() {
            for ix in 0..self.width {
                s.push(if self.occupied(ix, iy) { '#' } else { '.' });
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, WorldError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(WorldError::Parse {
            line: 1,
            msg: "empty file".into(),
        })?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        let perr = |msg: &str| WorldError::Parse {
            line: 1,
            msg: msg.to_string(),
        };
        if parts.len() != 4 || parts[0] != "grid" {
            return Err(perr("expected `grid <width> <height> <resolution>`"));
        }
        let width: usize = parts[1].parse().map_err(|_| perr("bad width"))?;
        let height: usize = parts[2].parse().map_err(|_| perr("bad height"))?;
        let resolution: f64 = parts[3].parse().map_err(|_| perr("bad resolution"))?;
        let mut cells = vec![false; width * height];
        for row in 0..height {
            let line_no = row + 2;
            let line = lines.next().ok_or(WorldError::Parse {
                line: line_no,
                msg: "missing row".into(),
            })?;
            if line.chars().count() != width {
                return Err(WorldError::Parse {
                    line: line_no,
                    msg: format!("expected {width} columns"),
                });
            }
            let iy = height - 1 - row;
            for (ix, ch) in line.chars().enumerate() {
                cells[iy * width + ix] = match ch {
                    '#' => true,
                    '.' => false,
                    other => {
                        return Err(WorldError::Parse {
                            line: line_no,
                            msg: format!("unexpected character {other:?}"),
                        })
                    }
                };
            }
        }
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(WorldError::Parse {
                line: height + 2,
                msg: "trailing content".into(),
            });
        }
        Self::from_cells(width, height, resolution, cells)
    }
}

/// A grid together with the start and goal of its traversal task.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub grid: OccupancyGrid,
    pub start: Point2,
    pub goal: Point2,
}

impl World {
    /// Start at the bottom-center and goal at the top-center, three cells in
    /// from the border rows.
    pub fn with_default_endpoints(grid: OccupancyGrid) -> Self {
        let (start, goal) = default_endpoints(&grid);
        Self { grid, start, goal }
    }

    /// Heading that faces the goal from the start.
    pub fn start_pose(&self) -> Pose2D {
        let heading = (self.goal.y - self.start.y).atan2(self.goal.x - self.start.x);
        Pose2D::new(self.start.x, self.start.y, heading)
    }
}

pub fn default_endpoints(grid: &OccupancyGrid) -> (Point2, Point2) {
    let cx = grid.width() / 2;
    let sy = 3.min(grid.height() - 1);
    let gy = grid.height().saturating_sub(4);
    (grid.cell_center(cx, sy), grid.cell_center(cx, gy))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaConfig {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub fill_prob: f64,
    pub smooth_iters: usize,
    /// Force the outermost ring of cells occupied after smoothing.
    pub border: bool,
    /// Chebyshev radius (cells) cleared around the start and goal.
    pub clear_radius: usize,
    /// Footprint radius used by the traversability check.
    pub footprint_radius: f64,
    /// Extra seeds tried after the first one fails.
    pub max_retries: u32,
}

impl Default for CaConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            width: 30,
            height: 30,
            resolution: 0.15,
            fill_prob: 0.35,
            smooth_iters: 4,
            border: true,
            clear_radius: 2,
            footprint_radius: 0.15,
            max_retries: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedWorld {
    pub world: World,
    /// Seed that produced the accepted map (base seed plus retries).
    pub seed_used: u64,
}

/// Random fill followed by majority smoothing. Out-of-bounds neighbors count
/// as occupied.
pub fn ca_fill_and_smooth(
    seed: u64,
    width: usize,
    height: usize,
    fill_prob: f64,
    smooth_iters: usize,
) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells: Vec<bool> = (0..width * height)
        .map(|_| rng.random::<f64>() < fill_prob)
        .collect();
    smooth_ca(&cells, width, height, smooth_iters)
}

/// Applies the 5-of-9 majority rule `iters` times.
pub fn smooth_ca(cells: &[bool], width: usize, height: usize, iters: usize) -> Vec<bool> {
    let mut cur = cells.to_vec();
    let mut next = vec![false; cur.len()];
    for _ in 0..iters {
        for iy in 0..height as i64 {
            for ix in 0..width as i64 {
                let mut count = 0;
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (nx, ny) = (ix + dx, iy + dy);
                        let occ = nx < 0
                            || ny < 0
                            || nx >= width as i64
                            || ny >= height as i64
                            || cur[ny as usize * width + nx as usize];
                        if occ {
                            count += 1;
                        }
                    }
                }
                next[iy as usize * width + ix as usize] = count >= 5;
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}

/// Generates a cave-like world, retrying with `seed + 1, seed + 2, ...` until
/// the start and goal are connected for a robot of `footprint_radius`.
pub fn generate_ca_world(config: &CaConfig) -> Result<GeneratedWorld, WorldError> {
    if !(0.0..=1.0).contains(&config.fill_prob) {
        return Err(WorldError::InvalidConfig(format!(
            "fill_prob {} outside [0, 1]",
            config.fill_prob
        )));
    }
    if config.width < 3 || config.height < 3 {
        return Err(WorldError::InvalidConfig("width and height must be >= 3".into()));
    }
    let mut seed = config.seed;
    for attempt in 0..=config.max_retries {
        seed = config.seed.wrapping_add(attempt as u64);
        let cells = ca_fill_and_smooth(
            seed,
            config.width,
            config.height,
            config.fill_prob,
            config.smooth_iters,
        );
        let mut grid =
            OccupancyGrid::from_cells(config.width, config.height, config.resolution, cells)?;
        if config.border {
            force_border(&mut grid);
        }
        let (start, goal) = default_endpoints(&grid);
        for p in [start, goal] {
            carve_pad(&mut grid, p, config.clear_radius, config.border);
        }
        if traversable(&grid, start, goal, config.footprint_radius) {
            return Ok(GeneratedWorld {
                world: World { grid, start, goal },
                seed_used: seed,
            });
        }
    }
    Err(WorldError::GenerationFailed { last_seed: seed })
}

pub fn force_border(grid: &mut OccupancyGrid) {
    let (w, h) = (grid.width(), grid.height());
    for ix in 0..w {
        grid.set(ix, 0, true);
        grid.set(ix, h - 1, true);
    }
    for iy in 0..h {
        grid.set(0, iy, true);
        grid.set(w - 1, iy, true);
    }
}

fn carve_pad(grid: &mut OccupancyGrid, p: Point2, radius: usize, keep_border: bool) {
    let Some((cx, cy)) = grid.cell_of(p) else {
        return;
    };
    let lo = usize::from(keep_border);
    let (w, h) = (grid.width(), grid.height());
    let (x0, x1) = (cx.saturating_sub(radius).max(lo), (cx + radius).min(w - 1 - lo));
    let (y0, y1) = (cy.saturating_sub(radius).max(lo), (cy + radius).min(h - 1 - lo));
    if x0 <= x1 && y0 <= y1 {
        grid.fill_rect(x0, y0, x1, y1, false);
    }
}

/// Whether a disc robot can move from `start` to `goal` through cell centers
/// (4-connected) without its footprint touching an occupied cell.
pub fn traversable(grid: &OccupancyGrid, start: Point2, goal: Point2, footprint_radius: f64) -> bool {
    let (Some(s), Some(g)) = (grid.cell_of(start), grid.cell_of(goal)) else {
        return false;
    };
    let free = |ix: usize, iy: usize| {
        let c = grid.cell_center(ix, iy);
        !is_collision(grid, &Pose2D::new(c.x, c.y, 0.0), footprint_radius)
    };
    if !free(s.0, s.1) || !free(g.0, g.1) {
        return false;
    }
    let mut seen = vec![false; grid.width() * grid.height()];
    let mut queue = VecDeque::from([s]);
    seen[grid.index(s.0, s.1)] = true;
    while let Some((ix, iy)) = queue.pop_front() {
        if (ix, iy) == g {
            return true;
        }
        let neighbors = [
            (ix.wrapping_sub(1), iy),
            (ix + 1, iy),
            (ix, iy.wrapping_sub(1)),
            (ix, iy + 1),
        ];
        for (nx, ny) in neighbors {
            if nx >= grid.width() || ny >= grid.height() {
                continue;
            }
            let i = grid.index(nx, ny);
            if !seen[i] && free(nx, ny) {
                seen[i] = true;
                queue.push_back((nx, ny));
            }
        }
    }
    false
}

/// Distance from `p` to the closest point of cell `(ix, iy)`'s square.
fn distance_to_cell(grid: &OccupancyGrid, p: Point2, ix: i64, iy: i64) -> f64 {
    let res = grid.resolution();
    let x0 = grid.origin().x + ix as f64 * res;
    let y0 = grid.origin().y + iy as f64 * res;
    let dx = (x0 - p.x).max(0.0).max(p.x - (x0 + res));
    let dy = (y0 - p.y).max(0.0).max(p.y - (y0 + res));
    dx.hypot(dy)
}

/// Visits every cell (possibly off-grid) whose square lies within `radius` of `p`.
fn for_cells_in_disc(grid: &OccupancyGrid, p: Point2, radius: f64, mut f: impl FnMut(i64, i64)) {
    let res = grid.resolution();
    let o = grid.origin();
    let ix0 = ((p.x - radius - o.x) / res).floor() as i64;
    let ix1 = ((p.x + radius - o.x) / res).floor() as i64;
    let iy0 = ((p.y - radius - o.y) / res).floor() as i64;
    let iy1 = ((p.y + radius - o.y) / res).floor() as i64;
    for iy in iy0..=iy1 {
        for ix in ix0..=ix1 {
            if distance_to_cell(grid, p, ix, iy) <= radius {
                f(ix, iy);
            }
        }
    }
}

/// True iff the pose is off the grid or an occupied cell lies within
/// `footprint_radius` of its center.
pub fn is_collision(grid: &OccupancyGrid, pose: &Pose2D, footprint_radius: f64) -> bool {
    let p = pose.position();
    if !grid.contains(p) {
        return true;
    }
    let mut hit = false;
    let (w, h) = (grid.width() as i64, grid.height() as i64);
    for_cells_in_disc(grid, p, footprint_radius, |ix, iy| {
        if ix >= 0 && iy >= 0 && ix < w && iy < h && grid.occupied(ix as usize, iy as usize) {
            hit = true;
        }
    });
    hit
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InflationModel {
    /// Cells within this distance of an obstacle are lethal.
    pub inscribed_radius: f64,
    /// Exponential decay rate of cost beyond the inscribed radius (1/m).
    pub decay: f64,
}

impl Default for InflationModel {
    fn default() -> Self {
        Self {
            inscribed_radius: 0.15,
            decay: 10.0,
        }
    }
}

/// Per-cell obstacle cost in [0, 1] on the geometry of its source grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CostGrid {
    width: usize,
    height: usize,
    resolution: f64,
    origin: Point2,
    cost: Vec<f64>,
}

impl CostGrid {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn costs(&self) -> &[f64] {
        &self.cost
    }

    pub fn cost(&self, ix: usize, iy: usize) -> f64 {
        self.cost[iy * self.width + ix]
    }

    pub fn is_lethal(&self, ix: usize, iy: usize) -> bool {
        self.cost(ix, iy) >= LETHAL
    }

    pub fn cell_of(&self, p: Point2) -> Option<(usize, usize)> {
        let fx = (p.x - self.origin.x) / self.resolution;
        let fy = (p.y - self.origin.y) / self.resolution;
        if fx < 0.0 || fy < 0.0 || fx >= self.width as f64 || fy >= self.height as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Point2 {
        Point2::new(
            self.origin.x + (ix as f64 + 0.5) * self.resolution,
            self.origin.y + (iy as f64 + 0.5) * self.resolution,
        )
    }

    /// Maximum cost over every cell the footprint disc touches; off-grid
    /// cells count as lethal.
    pub fn footprint_cost(&self, x: f64, y: f64, radius: f64) -> f64 {
        let res = self.resolution;
        let (ox, oy) = (self.origin.x, self.origin.y);
        let ix0 = ((x - radius - ox) / res).floor() as i64;
        let ix1 = ((x + radius - ox) / res).floor() as i64;
        let iy0 = ((y - radius - oy) / res).floor() as i64;
        let iy1 = ((y + radius - oy) / res).floor() as i64;
        if ix0 < 0 || iy0 < 0 || ix1 >= self.width as i64 || iy1 >= self.height as i64 {
            // Cells outside the disc's bounding box may still be off-grid; check exactly.
            return self.footprint_cost_slow(x, y, radius);
        }
        let r2 = radius * radius;
        let mut worst: f64 = 0.0;
        for iy in iy0..=iy1 {
            let cy0 = oy + iy as f64 * res;
            let dy = (cy0 - y).max(0.0).max(y - (cy0 + res));
            let row = iy as usize * self.width;
            for ix in ix0..=ix1 {
                let cx0 = ox + ix as f64 * res;
                let dx = (cx0 - x).max(0.0).max(x - (cx0 + res));
                if dx * dx + dy * dy <= r2 {
                    let c = self.cost[row + ix as usize];
                    if c > worst {
                        worst = c;
                        if worst >= LETHAL {
                            return LETHAL;
                        }
                    }
                }
            }
        }
        worst
    }

    fn footprint_cost_slow(&self, x: f64, y: f64, radius: f64) -> f64 {
        let res = self.resolution;
        let (ox, oy) = (self.origin.x, self.origin.y);
        let ix0 = ((x - radius - ox) / res).floor() as i64;
        let ix1 = ((x + radius - ox) / res).floor() as i64;
        let iy0 = ((y - radius - oy) / res).floor() as i64;
        let iy1 = ((y + radius - oy) / res).floor() as i64;
        let mut worst: f64 = 0.0;
        for iy in iy0..=iy1 {
            for ix in ix0..=ix1 {
                let cx0 = ox + ix as f64 * res;
                let cy0 = oy + iy as f64 * res;
                let dx = (cx0 - x).max(0.0).max(x - (cx0 + res));
                let dy = (cy0 - y).max(0.0).max(y - (cy0 + res));
                if dx.hypot(dy) > radius {
                    continue;
                }
                if ix < 0 || iy < 0 || ix >= self.width as i64 || iy >= self.height as i64 {
                    return LETHAL;
                }
                worst = worst.max(self.cost(ix as usize, iy as usize));
            }
        }
        worst
    }
}

/// Inflates obstacles: occupied cells cost 1; a free cell whose center lies at
/// distance `d <= inflation_radius` from the nearest occupied cell center costs
/// `exp(-decay * (d - inscribed_radius))` clipped to [0, 1]; all others 0.
pub fn inflate(grid: &OccupancyGrid, inflation_radius: f64, model: &InflationModel) -> CostGrid {
    let (w, h) = (grid.width(), grid.height());
    let res = grid.resolution();
    let radius = inflation_radius.max(0.0);
    let reach = (radius / res).floor() as i64;
    let mut nearest = vec![f64::INFINITY; w * h];
    for iy in 0..h {
        for ix in 0..w {
            if !grid.occupied(ix, iy) {
                continue;
            }
            for dy in -reach..=reach {
                let ny = iy as i64 + dy;
                if ny < 0 || ny >= h as i64 {
                    continue;
                }
                for dx in -reach..=reach {
                    let nx = ix as i64 + dx;
                    if nx < 0 || nx >= w as i64 {
                        continue;
                    }
                    let d = res * ((dx * dx + dy * dy) as f64).sqrt();
                    let j = ny as usize * w + nx as usize;
                    if d < nearest[j] {
                        nearest[j] = d;
                    }
                }
            }
        }
    }
    let cost = grid
        .cells()
        .iter()
        .zip(&nearest)
        .map(|(&occ, &d)| {
            if occ {
                LETHAL
            } else if d <= radius {
                (-model.decay * (d - model.inscribed_radius)).exp().clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    CostGrid {
        width: w,
        height: h,
        resolution: res,
        origin: grid.origin(),
        cost,
    }
}

/// Sorted distinct center-to-center distances reachable within `max_radius`.
/// Inflation output only changes when the radius crosses one of these values.
pub fn inflation_breakpoints(resolution: f64, max_radius: f64) -> Vec<f64> {
    let reach = (max_radius / resolution).floor() as i64 + 1;
    let mut out: Vec<f64> = Vec::new();
    for a in 0..=reach {
        for b in 0..=a {
            out.push(resolution * ((a * a + b * b) as f64).sqrt());
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub num_beams: usize,
    pub angle_min: f64,
    pub angle_max: f64,
    pub max_range: f64,
    /// Gaussian range noise; `None` disables the hook.
    #[serde(default)]
    pub noise_stddev: Option<f64>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            num_beams: 720,
            angle_min: -0.75 * PI,
            angle_max: 0.75 * PI,
            max_range: 5.0,
            noise_stddev: None,
        }
    }
}

impl ScanConfig {
    /// Beam angle relative to the robot heading.
    pub fn beam_angle(&self, k: usize) -> f64 {
        if self.num_beams <= 1 {
            return self.angle_min;
        }
        self.angle_min + (self.angle_max - self.angle_min) * k as f64 / (self.num_beams - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaserScan {
    pub ranges: Vec<f64>,
    pub angle_min: f64,
    pub angle_max: f64,
    pub max_range: f64,
}

impl LaserScan {
    pub fn num_beams(&self) -> usize {
        self.ranges.len()
    }
}

/// Casts every beam through the grid with an exact cell walk. Beams that
/// leave the grid without hitting anything return `max_range`.
pub fn raycast(
    grid: &OccupancyGrid,
    pose: &Pose2D,
    config: &ScanConfig,
) -> Result<LaserScan, WorldError> {
    let p = pose.position();
    let Some((cx, cy)) = grid.cell_of(p) else {
        return Err(WorldError::InvalidPose {
            x: p.x,
            y: p.y,
            reason: "outside grid",
        });
    };
    if grid.occupied(cx, cy) {
        return Err(WorldError::InvalidPose {
            x: p.x,
            y: p.y,
            reason: "inside obstacle",
        });
    }
    let ranges = (0..config.num_beams)
        .map(|k| cast_beam(grid, p, pose.theta + config.beam_angle(k), config.max_range))
        .collect();
    Ok(LaserScan {
        ranges,
        angle_min: config.angle_min,
        angle_max: config.angle_max,
        max_range: config.max_range,
    })
}

/// Adds clipped Gaussian noise to every range when the config enables it.
pub fn apply_scan_noise<R: Rng>(scan: &mut LaserScan, config: &ScanConfig, rng: &mut R) {
    let Some(sd) = config.noise_stddev.filter(|s| *s > 0.0) else {
        return;
    };
    let normal = Normal::new(0.0, sd).expect("positive stddev");
    let floor = 1e-3_f64.min(scan.max_range);
    for r in &mut scan.ranges {
        *r = (*r + normal.sample(rng)).clamp(floor, scan.max_range);
    }
}

fn cast_beam(grid: &OccupancyGrid, p: Point2, angle: f64, max_range: f64) -> f64 {
    let res = grid.resolution();
    let (dx, dy) = (angle.cos(), angle.sin());
    // Work in cell units.
    let gx = (p.x - grid.origin().x) / res;
    let gy = (p.y - grid.origin().y) / res;
    let mut ix = gx.floor() as i64;
    let mut iy = gy.floor() as i64;
    let step_x: i64 = if dx > 0.0 { 1 } else { -1 };
    let step_y: i64 = if dy > 0.0 { 1 } else { -1 };
    let t_delta_x = if dx != 0.0 { 1.0 / dx.abs() } else { f64::INFINITY };
    let t_delta_y = if dy != 0.0 { 1.0 / dy.abs() } else { f64::INFINITY };
    let mut t_max_x = if dx > 0.0 {
        (ix as f64 + 1.0 - gx) / dx
    } else if dx < 0.0 {
        (gx - ix as f64) / -dx
    } else {
        f64::INFINITY
    };
    let mut t_max_y = if dy > 0.0 {
        (iy as f64 + 1.0 - gy) / dy
    } else if dy < 0.0 {
        (gy - iy as f64) / -dy
    } else {
        f64::INFINITY
    };
    let max_t = max_range / res;
    let (w, h) = (grid.width() as i64, grid.height() as i64);
    loop {
        let t = if t_max_x < t_max_y {
            ix += step_x;
            let t = t_max_x;
            t_max_x += t_delta_x;
            t
        } else {
            iy += step_y;
            let t = t_max_y;
            t_max_y += t_delta_y;
            t
        };
        if t >= max_t || ix < 0 || iy < 0 || ix >= w || iy >= h {
            return max_range;
        }
        if grid.occupied(ix as usize, iy as usize) {
            return (t * res).clamp(f64::MIN_POSITIVE, max_range);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip_is_exact() {
        let mut g = OccupancyGrid::new(5, 3, 0.15).unwrap();
        g.set(0, 0, true);
        g.set(4, 2, true);
        let text = g.to_text();
        assert_eq!(text, "grid 5 3 0.15\n....#\n.....\n#....\n");
        let back = OccupancyGrid::from_text(&text).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn parse_rejects_bad_rows() {
        assert!(matches!(
            OccupancyGrid::from_text("grid 2 2 0.1\n..\n.\n"),
            Err(WorldError::Parse { line: 3, .. })
        ));
        assert!(OccupancyGrid::from_text("grid 2 1 0.1\n.x\n").is_err());
        assert!(OccupancyGrid::from_text("map 2 1 0.1\n..\n").is_err());
    }

    #[test]
    fn zero_fill_without_smoothing_is_free() {
        let cells = ca_fill_and_smooth(11, 12, 9, 0.0, 0);
        assert!(cells.iter().all(|c| !c));
    }

    #[test]
    fn full_fill_exhausts_retries() {
        let cfg = CaConfig {
            seed: 3,
            fill_prob: 1.0,
            max_retries: 4,
            ..CaConfig::default()
        };
        assert_eq!(
            generate_ca_world(&cfg),
            Err(WorldError::GenerationFailed { last_seed: 7 })
        );
    }

    #[test]
    fn generator_rejects_bad_config() {
        let cfg = CaConfig {
            fill_prob: 1.5,
            ..CaConfig::default()
        };
        assert!(matches!(generate_ca_world(&cfg), Err(WorldError::InvalidConfig(_))));
        let cfg = CaConfig {
            width: 2,
            ..CaConfig::default()
        };
        assert!(matches!(generate_ca_world(&cfg), Err(WorldError::InvalidConfig(_))));
    }

    #[test]
    fn zero_radius_inflation_is_the_indicator() {
        let g = OccupancyGrid::from_text("grid 4 3 0.1\n#...\n.##.\n...#\n").unwrap();
        let c = inflate(&g, 0.0, &InflationModel::default());
        for (occ, cost) in g.cells().iter().zip(c.costs()) {
            assert_eq!(*cost, if *occ { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn cost_strictly_decreases_along_a_ray() {
        let mut g = OccupancyGrid::new(9, 9, 0.1).unwrap();
        g.set(4, 4, true);
        let model = InflationModel {
            inscribed_radius: 0.0,
            decay: 3.0,
        };
        let c = inflate(&g, 0.3, &model);
        let ray: Vec<f64> = (4..8).map(|ix| c.cost(ix, 4)).collect();
        assert!(ray.windows(2).all(|w| w[1] < w[0]), "{ray:?}");
        assert_eq!(c.cost(8, 4), 0.0);
    }

    #[test]
    fn empty_grid_scan_is_all_max_range() {
        let g = OccupancyGrid::new(20, 20, 0.15).unwrap();
        let cfg = ScanConfig::default();
        let scan = raycast(&g, &Pose2D::new(1.5, 1.5, 0.3), &cfg).unwrap();
        assert_eq!(scan.num_beams(), 720);
        assert!(scan.ranges.iter().all(|r| *r == cfg.max_range));
    }

    #[test]
    fn wall_one_meter_ahead() {
        let mut g = OccupancyGrid::new(40, 40, 0.1).unwrap();
        for iy in 0..40 {
            g.set(30, iy, true);
        }
        let cfg = ScanConfig {
            num_beams: 3,
            angle_min: -0.5,
            angle_max: 0.5,
            max_range: 5.0,
            noise_stddev: None,
        };
        let scan = raycast(&g, &Pose2D::new(2.0, 2.0, 0.0), &cfg).unwrap();
        assert!((scan.ranges[1] - 1.0).abs() <= 0.1, "{:?}", scan.ranges);
    }

    #[test]
    fn raycast_rejects_bad_poses() {
        let mut g = OccupancyGrid::new(5, 5, 1.0).unwrap();
        g.set(2, 2, true);
        let cfg = ScanConfig::default();
        assert!(raycast(&g, &Pose2D::new(2.5, 2.5, 0.0), &cfg).is_err());
        assert!(raycast(&g, &Pose2D::new(-1.0, 2.5, 0.0), &cfg).is_err());
    }

    #[test]
    fn collision_basics() {
        let mut g = OccupancyGrid::new(10, 10, 0.1).unwrap();
        assert!(!is_collision(&g, &Pose2D::new(0.5, 0.5, 0.0), 0.15));
        g.set(5, 5, true);
        assert!(is_collision(&g, &Pose2D::new(0.55, 0.55, 0.0), 0.01));
        assert!(is_collision(&g, &Pose2D::new(-0.1, 0.5, 0.0), 0.01));
    }

    #[test]
    fn noise_hook_is_off_by_default() {
        let g = OccupancyGrid::new(10, 10, 0.15).unwrap();
        let cfg = ScanConfig::default();
        let mut scan = raycast(&g, &Pose2D::new(0.7, 0.7, 0.0), &cfg).unwrap();
        let before = scan.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        apply_scan_noise(&mut scan, &cfg, &mut rng);
        assert_eq!(scan, before);
    }

    #[test]
    fn breakpoints_include_axis_and_diagonal() {
        let b = inflation_breakpoints(0.1, 0.2);
        assert!(b.contains(&0.0));
        assert!(b.iter().any(|d| (d - 0.1).abs() < 1e-12));
        assert!(b.iter().any(|d| (d - 0.1 * 2f64.sqrt()).abs() < 1e-12));
    }
}
