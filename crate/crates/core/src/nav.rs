//! 4-connected A* over free cells, used to compare routes before and after
//! teaching.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{CellCoord, CellValue, OccupancyGrid};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NavError {
    #[error("no path from {start} to {goal}")]
    NoPath { start: CellCoord, goal: CellCoord },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedPath {
    pub cells: Vec<CellCoord>,
    /// Number of steps times the resolution (m).
    pub length: f64,
}

impl PlannedPath {
    pub fn steps(&self) -> usize {
        self.cells.len().saturating_sub(1)
    }
}

/// Optional safety margin: cells within `radius` cells (Chebyshev) of a
/// non-free cell are treated as blocked.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub inflation_cells: usize,
}

fn blocked_mask(grid: &OccupancyGrid, config: &PlannerConfig) -> Vec<bool> {
    let (w, h) = (grid.width(), grid.height());
    let base: Vec<bool> = grid.cells().iter().map(|&c| c != CellValue::Free).collect();
    let r = config.inflation_cells;
    if r == 0 {
        return base;
    }
    let mut out = base.clone();
    for y in 0..h {
        for x in 0..w {
            if !base[y * w + x] {
                continue;
            }
            for ny in y.saturating_sub(r)..=(y + r).min(h - 1) {
                for nx in x.saturating_sub(r)..=(x + r).min(w - 1) {
                    out[ny * w + nx] = true;
                }
            }
        }
    }
    out
}

pub fn plan_path(
    grid: &OccupancyGrid,
    start: CellCoord,
    goal: CellCoord,
) -> Result<PlannedPath, NavError> {
    plan_path_with(grid, start, goal, &PlannerConfig::default())
}

/// Shortest 4-connected path by A* with the Manhattan heuristic. Among equal
/// f-scores the open cell with the smaller row, then column, expands first.
pub fn plan_path_with(
    grid: &OccupancyGrid,
    start: CellCoord,
    goal: CellCoord,
    config: &PlannerConfig,
) -> Result<PlannedPath, NavError> {
    let no_path = NavError::NoPath { start, goal };
    if !grid.contains(start) || !grid.contains(goal) {
        return Err(no_path);
    }
    let (w, h) = (grid.width(), grid.height());
    let blocked = blocked_mask(grid, config);
    let idx = |c: CellCoord| c.y * w + c.x;
    if blocked[idx(start)] || blocked[idx(goal)] {
        return Err(no_path);
    }
    let heuristic = |c: CellCoord| c.x.abs_diff(goal.x) + c.y.abs_diff(goal.y);
    let mut g = vec![usize::MAX; w * h];
    let mut parent = vec![usize::MAX; w * h];
    let mut closed = vec![false; w * h];
    let mut open = BinaryHeap::new();
    g[idx(start)] = 0;
    open.push(Reverse((heuristic(start), start.y, start.x)));
    while let Some(Reverse((_, y, x))) = open.pop() {
        let c = CellCoord::new(x, y);
        let i = idx(c);
        if closed[i] {
            continue;
        }
        closed[i] = true;
        if c == goal {
            let mut cells = vec![c];
            let mut j = i;
            while parent[j] != usize::MAX {
                j = parent[j];
                cells.push(CellCoord::new(j % w, j / w));
            }
            cells.reverse();
            let length = (cells.len() - 1) as f64 * grid.resolution();
            return Ok(PlannedPath { cells, length });
        }
        let mut neighbors = [None; 4];
        if y > 0 {
            neighbors[0] = Some(CellCoord::new(x, y - 1));
        }
        if x > 0 {
            neighbors[1] = Some(CellCoord::new(x - 1, y));
        }
        if x + 1 < w {
            neighbors[2] = Some(CellCoord::new(x + 1, y));
        }
        if y + 1 < h {
            neighbors[3] = Some(CellCoord::new(x, y + 1));
        }
        for n in neighbors.into_iter().flatten() {
            let j = idx(n);
            if blocked[j] || closed[j] {
                continue;
            }
            let cost = g[i] + 1;
            if cost < g[j] {
                g[j] = cost;
                parent[j] = i;
                open.push(Reverse((cost + heuristic(n), n.y, n.x)));
            }
        }
    }
    Err(no_path)
}

pub fn path_intersects(path: &PlannedPath, region: &BTreeSet<CellCoord>) -> bool {
    path.cells.iter().any(|c| region.contains(c))
}
