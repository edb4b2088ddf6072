//! Turning a recorded pose track into a virtual border: chain extraction,
//! open/closed classification, end-ray extension, rasterization, flood-fill
//! partition from the keep-off point, and the posterior map.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{CellCoord, CellValue, GridError, OccupancyGrid, WorldPoint};
use crate::robot::PoseHistory;

/// Endpoint distance below which a chain counts as closed (m).
pub const DEFAULT_CLOSURE_THRESHOLD: f64 = 0.30;

#[derive(Debug, Error)]
pub enum BorderError {
    #[error("chain has {distinct} distinct point(s), need at least 2")]
    DegenerateChain { distinct: usize },
    #[error("end segment has zero length; cannot extend the chain")]
    ExtensionFailed,
    #[error("chain vertex {0:?} lies outside the map")]
    VertexOutOfBounds(WorldPoint),
    #[error("keep-off seed is invalid: {0}")]
    InvalidSeed(String),
    #[error("border does not separate the free space (complement is empty)")]
    PartitionFailed,
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Ordered border vertices with no two consecutive points equal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonalChain {
    points: Vec<WorldPoint>,
}

impl PolygonalChain {
    pub fn new(points: Vec<WorldPoint>) -> Result<Self, BorderError> {
        let mut distinct = points.len().min(1);
        for w in points.windows(2) {
            if w[0] == w[1] {
                return Err(BorderError::DegenerateChain { distinct });
            }
            distinct += 1;
        }
        if distinct < 2 {
            return Err(BorderError::DegenerateChain { distinct });
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[WorldPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> WorldPoint {
        self.points[0]
    }

    pub fn last(&self) -> WorldPoint {
        self.points[self.points.len() - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BorderKind {
    SimpleChain,
    ClosedChain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegrationParams {
    pub closure_threshold: f64,
}

impl Default for IntegrationParams {
    fn default() -> Self {
        Self {
            closure_threshold: DEFAULT_CLOSURE_THRESHOLD,
        }
    }
}

/// Keep-off area, the remaining free space, and the border raster cells that
/// were free in the prior.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionResult {
    pub connected: BTreeSet<CellCoord>,
    pub complement: BTreeSet<CellCoord>,
    pub border_cells: BTreeSet<CellCoord>,
}

/// Robot positions of the track, dropping consecutive points closer than
/// `min_spacing`.
pub fn extract_chain(
    history: &PoseHistory,
    min_spacing: f64,
) -> Result<PolygonalChain, BorderError> {
    let mut points: Vec<WorldPoint> = Vec::new();
    for (_, pose) in history.samples() {
        let p = pose.position();
        match points.last() {
            Some(last) if last.distance(&p) < min_spacing => {}
            _ => points.push(p),
        }
    }
    PolygonalChain::new(points)
}

/// Closed iff `‖p₁ − pₙ‖ < threshold`.
pub fn classify_chain(chain: &PolygonalChain, closure_threshold: f64) -> BorderKind {
    if chain.first().distance(&chain.last()) < closure_threshold {
        BorderKind::ClosedChain
    } else {
        BorderKind::SimpleChain
    }
}

/// Prolongs both end segments of an open chain until they reach a cell that
/// is not free in `grid` (that cell included) or the map edge.
pub fn extend_open_chain(
    chain: &PolygonalChain,
    grid: &OccupancyGrid,
) -> Result<PolygonalChain, BorderError> {
    let pts = chain.points();
    let n = pts.len();
    let head = march_until_blocked(grid, pts[0], pts[1])?;
    let tail = march_until_blocked(grid, pts[n - 1], pts[n - 2])?;
    let mut out = Vec::with_capacity(n + 2);
    if let Some(h) = head {
        out.push(h);
    }
    out.extend_from_slice(pts);
    if let Some(t) = tail {
        out.push(t);
    }
    PolygonalChain::new(out)
}

/// Walks the grid from `from` in the direction `previous → from` and returns
/// the center of the stopping cell, or `None` if that is `from`'s own cell.
fn march_until_blocked(
    grid: &OccupancyGrid,
    from: WorldPoint,
    previous: WorldPoint,
) -> Result<Option<WorldPoint>, BorderError> {
    let (x0, y0) = grid.world_to_cell_f(from);
    let (xp, yp) = grid.world_to_cell_f(previous);
    let (dx, dy) = (x0 - xp, y0 - yp);
    let len = dx.hypot(dy);
    if !(len > 1e-12) {
        return Err(BorderError::ExtensionFailed);
    }
    let (dx, dy) = (dx / len, dy / len);
    let start = grid
        .world_to_cell(from)
        .map_err(|_| BorderError::VertexOutOfBounds(from))?;
    let (w, h) = (grid.width() as i64, grid.height() as i64);
    let (mut cx, mut cy) = (start.x as i64, start.y as i64);
    let step_x: i64 = if dx > 0.0 { 1 } else { -1 };
    let step_y: i64 = if dy > 0.0 { 1 } else { -1 };
    // ray parameter at the next vertical / horizontal cell boundary
    let boundary = |c: i64, step: i64, p: f64, d: f64| {
        if d.abs() < 1e-15 {
            f64::INFINITY
        } else {
            let edge = if step > 0 { c as f64 + 1.0 } else { c as f64 };
            (edge - p) / d
        }
    };
    let mut t_max_x = boundary(cx, step_x, x0, dx);
    let mut t_max_y = boundary(cy, step_y, y0, dy);
    let t_dx = if dx.abs() < 1e-15 {
        f64::INFINITY
    } else {
        1.0 / dx.abs()
    };
    let t_dy = if dy.abs() < 1e-15 {
        f64::INFINITY
    } else {
        1.0 / dy.abs()
    };
    let mut last = start;
    if grid.at(start) == CellValue::Free {
        loop {
            let (nx, ny) = if t_max_x < t_max_y {
                t_max_x += t_dx;
                (cx + step_x, cy)
            } else {
                t_max_y += t_dy;
                (cx, cy + step_y)
            };
            if nx < 0 || ny < 0 || nx >= w || ny >= h {
                break;
            }
            cx = nx;
            cy = ny;
            last = CellCoord::new(cx as usize, cy as usize);
            if grid.at(last) != CellValue::Free {
                break;
            }
        }
    }
    if last == start {
        return Ok(None);
    }
    Ok(Some(grid.cell_to_world(last)?))
}

/// 8-connected Bresenham line between two cells, endpoints included.
pub fn bresenham(a: CellCoord, b: CellCoord) -> Vec<CellCoord> {
    let (mut x, mut y) = (a.x as i64, a.y as i64);
    let (x1, y1) = (b.x as i64, b.y as i64);
    let dx = (x1 - x).abs();
    let dy = -(y1 - y).abs();
    let sx = if x < x1 { 1 } else { -1 };
    let sy = if y < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::with_capacity((dx.max(-dy) + 1) as usize);
    loop {
        out.push(CellCoord::new(x as usize, y as usize));
        if x == x1 && y == y1 {
            return out;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Cells covered by the chain's segments (plus `pₙ → p₁` when closed).
pub fn rasterize_chain(
    chain: &PolygonalChain,
    kind: BorderKind,
    grid: &OccupancyGrid,
) -> Result<BTreeSet<CellCoord>, BorderError> {
    let cells = chain
        .points()
        .iter()
        .map(|&p| {
            grid.world_to_cell(p)
                .map_err(|_| BorderError::VertexOutOfBounds(p))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut raster: BTreeSet<CellCoord> = cells.iter().copied().collect();
    for pair in cells.windows(2) {
        raster.extend(bresenham(pair[0], pair[1]));
    }
    if kind == BorderKind::ClosedChain && cells.len() > 2 {
        raster.extend(bresenham(cells[cells.len() - 1], cells[0]));
    }
    Ok(raster)
}

/// Splits the prior's free cells by a 4-connected flood fill from `l_star`,
/// with `barrier` cells and non-free cells blocking.
///
/// `border_cells` of the result are the barrier cells that are free in the
/// prior; the rest of the raster was already an obstacle.
pub fn partition_map(
    prior: &OccupancyGrid,
    barrier: &BTreeSet<CellCoord>,
    l_star: WorldPoint,
) -> Result<PartitionResult, BorderError> {
    let seed = prior
        .world_to_cell(l_star)
        .map_err(|_| BorderError::InvalidSeed(format!("{l_star:?} is outside the map")))?;
    if barrier.contains(&seed) {
        return Err(BorderError::InvalidSeed(format!(
            "cell {seed} lies on the border"
        )));
    }
    if prior.at(seed) != CellValue::Free {
        return Err(BorderError::InvalidSeed(format!(
            "cell {seed} is {:?} in the prior",
            prior.at(seed)
        )));
    }
    let (w, h) = (prior.width(), prior.height());
    let cells = prior.cells();
    let mut blocked: Vec<bool> = cells.iter().map(|&c| c != CellValue::Free).collect();
    for c in barrier {
        if c.x < w && c.y < h {
            blocked[c.y * w + c.x] = true;
        }
    }
    let mut filled = vec![false; w * h];
    let mut queue = VecDeque::new();
    filled[seed.y * w + seed.x] = true;
    queue.push_back((seed.x, seed.y));
    while let Some((x, y)) = queue.pop_front() {
        let mut visit = |nx: usize, ny: usize| {
            let j = ny * w + nx;
            if !blocked[j] && !filled[j] {
                filled[j] = true;
                queue.push_back((nx, ny));
            }
        };
        if x > 0 {
            visit(x - 1, y);
        }
        if x + 1 < w {
            visit(x + 1, y);
        }
        if y > 0 {
            visit(x, y - 1);
        }
        if y + 1 < h {
            visit(x, y + 1);
        }
    }
    let mut connected = BTreeSet::new();
    let mut complement = BTreeSet::new();
    let mut border_cells = BTreeSet::new();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if cells[i] != CellValue::Free {
                continue;
            }
            let c = CellCoord::new(x, y);
            if filled[i] {
                connected.insert(c);
            } else if barrier.contains(&c) {
                border_cells.insert(c);
            } else {
                complement.insert(c);
            }
        }
    }
    if complement.is_empty() {
        return Err(BorderError::PartitionFailed);
    }
    Ok(PartitionResult {
        connected,
        complement,
        border_cells,
    })
}

/// Keep-off area and border become Occupied; every other cell keeps its prior value.
pub fn build_posterior(
    prior: &OccupancyGrid,
    partition: &PartitionResult,
) -> Result<OccupancyGrid, BorderError> {
    let map = prior.with_cells_set(&partition.connected, CellValue::Occupied)?;
    Ok(map.with_cells_set(&partition.border_cells, CellValue::Occupied)?)
}

/// Diagnostics of one integrated border.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrationSummary {
    pub kind: BorderKind,
    /// Chain as recorded, before any extension.
    pub chain: PolygonalChain,
    /// Chain that was rasterized (extended when open).
    pub raster_chain: PolygonalChain,
    pub connected_cells: usize,
    pub complement_cells: usize,
    pub border_cells: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Integration {
    pub posterior: OccupancyGrid,
    pub partition: PartitionResult,
    pub summary: IntegrationSummary,
}

/// Full pipeline from a pose track and keep-off point to the posterior map.
pub fn integrate_border(
    prior: &OccupancyGrid,
    history: &PoseHistory,
    l_star: WorldPoint,
    params: &IntegrationParams,
) -> Result<Integration, BorderError> {
    let chain = extract_chain(history, prior.resolution())?;
    let kind = classify_chain(&chain, params.closure_threshold);
    let raster_chain = match kind {
        BorderKind::SimpleChain => extend_open_chain(&chain, prior)?,
        BorderKind::ClosedChain => chain.clone(),
    };
    let raster = rasterize_chain(&raster_chain, kind, prior)?;
    let partition = partition_map(prior, &raster, l_star)?;
    let posterior = build_posterior(prior, &partition)?;
    let summary = IntegrationSummary {
        kind,
        chain,
        raster_chain,
        connected_cells: partition.connected.len(),
        complement_cells: partition.complement.len(),
        border_cells: partition.border_cells.len(),
    };
    Ok(Integration {
        posterior,
        partition,
        summary,
    })
}

/// Sum of segment lengths, including the closing segment of a closed chain.
pub fn border_length(chain: &PolygonalChain, kind: BorderKind) -> f64 {
    let pts = chain.points();
    let open: f64 = pts.windows(2).map(|w| w[0].distance(&w[1])).sum();
    match kind {
        BorderKind::SimpleChain => open,
        BorderKind::ClosedChain => open + chain.last().distance(&chain.first()),
    }
}
