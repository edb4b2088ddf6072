//! Trinary occupancy grid, world/cell geometry and the PGM + `.meta` map format.
//!
//! Cell `(0, 0)` is the bottom-left cell of the map: `x` grows to the right
//! and `y` grows upward in world coordinates. PGM images store rows top-down,
//! so the first image row is grid row `height - 1`. Readers and writers flip
//! accordingly.
//!
//! Pixel encoding (same convention as common robot map servers):
//!
//! | pixel     | cell     |
//! |-----------|----------|
//! | 0         | Occupied |
//! | 254, 255  | Free     |
//! | otherwise | Unknown  |
//!
//! Saved maps always use 0 / 254 / 205.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Occupancy of a single cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellValue {
    Free,
    Occupied,
    Unknown,
}

impl CellValue {
    pub fn from_pixel(p: u8) -> Self {
        match p {
            0 => CellValue::Occupied,
            254 | 255 => CellValue::Free,
            _ => CellValue::Unknown,
        }
    }

    pub fn to_pixel(self) -> u8 {
        match self {
            CellValue::Occupied => 0,
            CellValue::Free => 254,
            CellValue::Unknown => 205,
        }
    }
}

/// A point on the floor plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
}

impl WorldPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &WorldPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Grid cell index. Ordered row-major: by `y`, then by `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellCoord {
    pub x: usize,
    pub y: usize,
}

impl CellCoord {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

impl Ord for CellCoord {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.y, self.x).cmp(&(other.y, other.x))
    }
}

impl PartialOrd for CellCoord {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for CellCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// World pose of the corner of cell `(0, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MapOrigin {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error("point ({x}, {y}) lies outside the map")]
    OutOfBounds { x: f64, y: f64 },
    #[error("cell {0} lies outside the map")]
    CellOutOfBounds(CellCoord),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("malformed map file {path}: {reason}")]
    MalformedFile { path: PathBuf, reason: String },
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Row-major trinary occupancy grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    origin: MapOrigin,
    cells: Vec<CellValue>,
}

impl OccupancyGrid {
    /// Grid with every cell set to `fill`.
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        origin: MapOrigin,
        fill: CellValue,
    ) -> Result<Self, GridError> {
        Self::from_cells(
            width,
            height,
            resolution,
            origin,
            vec![fill; width * height],
        )
    }

    pub fn from_cells(
        width: usize,
        height: usize,
        resolution: f64,
        origin: MapOrigin,
        cells: Vec<CellValue>,
    ) -> Result<Self, GridError> {
        if width == 0 || height == 0 {
            return Err(GridError::InvalidGrid(format!(
                "empty extent {width}x{height}"
            )));
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(GridError::InvalidGrid(format!("resolution {resolution}")));
        }
        if !(origin.x.is_finite() && origin.y.is_finite() && origin.theta.is_finite()) {
            return Err(GridError::InvalidGrid("non-finite origin".into()));
        }
        if cells.len() != width * height {
            return Err(GridError::InvalidGrid(format!(
                "{} cells for a {width}x{height} grid",
                cells.len()
            )));
        }
        Ok(Self {
            width,
            height,
            resolution,
            origin,
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

    pub fn origin(&self) -> MapOrigin {
        self.origin
    }

    pub fn cells(&self) -> &[CellValue] {
        &self.cells
    }

    /// World extent along the grid axes, in meters.
    pub fn extent(&self) -> (f64, f64) {
        (
            self.width as f64 * self.resolution,
            self.height as f64 * self.resolution,
        )
    }

    pub fn contains(&self, c: CellCoord) -> bool {
        c.x < self.width && c.y < self.height
    }

    fn index(&self, c: CellCoord) -> usize {
        c.y * self.width + c.x
    }

    /// `M(x, y)`.
    pub fn get(&self, c: CellCoord) -> Result<CellValue, GridError> {
        if self.contains(c) {
            Ok(self.cells[self.index(c)])
        } else {
            Err(GridError::CellOutOfBounds(c))
        }
    }

    /// Like [`OccupancyGrid::get`] but panics outside the grid. For loops over
    /// coordinates that are known to be valid.
    pub fn at(&self, c: CellCoord) -> CellValue {
        self.cells[self.index(c)]
    }

    pub fn is_free(&self, c: CellCoord) -> bool {
        self.contains(c) && self.at(c) == CellValue::Free
    }

    /// Copy with the given cells replaced.
    pub fn with_cells_set<'a, I>(&self, coords: I, value: CellValue) -> Result<Self, GridError>
    where
        I: IntoIterator<Item = &'a CellCoord>,
    {
        let mut next = self.clone();
        for &c in coords {
            if !next.contains(c) {
                return Err(GridError::CellOutOfBounds(c));
            }
            let i = next.index(c);
            next.cells[i] = value;
        }
        Ok(next)
    }

    /// Iterator over every valid coordinate, row-major.
    pub fn coords(&self) -> impl Iterator<Item = CellCoord> + '_ {
        (0..self.height).flat_map(move |y| (0..self.width).map(move |x| CellCoord::new(x, y)))
    }

    /// Coordinates of all cells with the given value, row-major.
    pub fn cells_with(&self, value: CellValue) -> Vec<CellCoord> {
        self.coords().filter(|&c| self.at(c) == value).collect()
    }

    fn to_local(&self, p: WorldPoint) -> (f64, f64) {
        let (s, c) = self.origin.theta.sin_cos();
        let dx = p.x - self.origin.x;
        let dy = p.y - self.origin.y;
        (c * dx + s * dy, -s * dx + c * dy)
    }

    fn to_world(&self, lx: f64, ly: f64) -> WorldPoint {
        let (s, c) = self.origin.theta.sin_cos();
        WorldPoint::new(
            self.origin.x + c * lx - s * ly,
            self.origin.y + s * lx + c * ly,
        )
    }

    /// Continuous cell-space coordinates of a world point (cell units, not floored).
    pub fn world_to_cell_f(&self, p: WorldPoint) -> (f64, f64) {
        let (lx, ly) = self.to_local(p);
        (lx / self.resolution, ly / self.resolution)
    }

    pub fn world_to_cell(&self, p: WorldPoint) -> Result<CellCoord, GridError> {
        let (fx, fy) = self.world_to_cell_f(p);
        let (cx, cy) = (fx.floor(), fy.floor());
        if !(cx >= 0.0 && cy >= 0.0 && cx < self.width as f64 && cy < self.height as f64) {
            return Err(GridError::OutOfBounds { x: p.x, y: p.y });
        }
        Ok(CellCoord::new(cx as usize, cy as usize))
    }

    /// World coordinate of the cell center.
    pub fn cell_to_world(&self, c: CellCoord) -> Result<WorldPoint, GridError> {
        if !self.contains(c) {
            return Err(GridError::CellOutOfBounds(c));
        }
        Ok(self.to_world(
            (c.x as f64 + 0.5) * self.resolution,
            (c.y as f64 + 0.5) * self.resolution,
        ))
    }

    /// Room-normalized coordinates `[0, 1]²` to world meters.
    pub fn normalized_to_world(&self, u: f64, v: f64) -> WorldPoint {
        let (w, h) = self.extent();
        self.to_world(u * w, v * h)
    }

    pub fn world_to_normalized(&self, p: WorldPoint) -> (f64, f64) {
        let (lx, ly) = self.to_local(p);
        let (w, h) = self.extent();
        (lx / w, ly / h)
    }

    /// Binary PGM (P5) image of the grid, top row first.
    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(self.width * self.height);
        for y in (0..self.height).rev() {
            let row = &self.cells[y * self.width..(y + 1) * self.width];
            out.extend(row.iter().map(|c| c.to_pixel()));
        }
        out
    }

    /// Sidecar metadata text.
    pub fn meta_text(&self) -> String {
        format!(
            "resolution: {}\norigin: {} {} {}\nnegate: 0\n",
            self.resolution, self.origin.x, self.origin.y, self.origin.theta
        )
    }

    pub fn from_pgm_and_meta(pgm: &[u8], meta: &str) -> Result<Self, String> {
        let meta = MapMeta::parse(meta)?;
        let image = parse_pgm(pgm)?;
        let mut cells = vec![CellValue::Unknown; image.width * image.height];
        for (row, chunk) in image.pixels.chunks_exact(image.width).enumerate() {
            let y = image.height - 1 - row;
            for (x, &p) in chunk.iter().enumerate() {
                let p = if meta.negate { 255 - p } else { p };
                cells[y * image.width + x] = CellValue::from_pixel(p);
            }
        }
        OccupancyGrid::from_cells(
            image.width,
            image.height,
            meta.resolution,
            meta.origin,
            cells,
        )
        .map_err(|e| e.to_string())
    }
}

/// Path of the `.meta` sidecar for a `.pgm` path.
pub fn meta_path(pgm_path: &Path) -> PathBuf {
    pgm_path.with_extension("meta")
}

/// Loads `<name>.pgm` together with `<name>.meta`.
pub fn load_map(path: impl AsRef<Path>) -> Result<OccupancyGrid, GridError> {
    let path = path.as_ref();
    let pgm = fs::read(path).map_err(|source| GridError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let meta_file = meta_path(path);
    let meta = fs::read_to_string(&meta_file).map_err(|source| GridError::Io {
        path: meta_file.clone(),
        source,
    })?;
    OccupancyGrid::from_pgm_and_meta(&pgm, &meta).map_err(|reason| GridError::MalformedFile {
        path: path.to_path_buf(),
        reason,
    })
}

/// Writes `<name>.pgm` and `<name>.meta`.
pub fn save_map(grid: &OccupancyGrid, path: impl AsRef<Path>) -> Result<(), GridError> {
    let path = path.as_ref();
    let io_err = |p: &Path| {
        let p = p.to_path_buf();
        move |source| GridError::Io { path: p, source }
    };
    fs::write(path, grid.to_pgm_bytes()).map_err(io_err(path))?;
    let meta = meta_path(path);
    fs::write(&meta, grid.meta_text()).map_err(io_err(&meta))?;
    Ok(())
}

struct MapMeta {
    resolution: f64,
    origin: MapOrigin,
    negate: bool,
}

impl MapMeta {
    fn parse(text: &str) -> Result<Self, String> {
        let mut resolution = None;
        let mut origin = None;
        let mut negate = None;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once(':') else {
                return Err(format!("expected `key: value`, got `{line}`"));
            };
            let value = value.trim();
            match key.trim() {
                "resolution" => {
                    resolution = Some(
                        value
                            .parse::<f64>()
                            .map_err(|e| format!("resolution `{value}`: {e}"))?,
                    )
                }
                "origin" => {
                    let parts: Vec<f64> = value
                        .trim_matches(|c| c == '[' || c == ']')
                        .split(|c: char| c == ',' || c.is_whitespace())
                        .filter(|s| !s.is_empty())
                        .map(|s| {
                            s.parse::<f64>()
                                .map_err(|e| format!("origin `{value}`: {e}"))
                        })
                        .collect::<Result<_, _>>()?;
                    let [x, y, theta] = parts[..] else {
                        return Err(format!("origin needs 3 values, got `{value}`"));
                    };
                    origin = Some(MapOrigin { x, y, theta });
                }
                "negate" => {
                    negate = Some(match value {
                        "0" => false,
                        "1" => true,
                        other => return Err(format!("negate must be 0 or 1, got `{other}`")),
                    })
                }
                // map_server style files carry extra keys (image, thresholds)
                _ => {}
            }
        }
        Ok(Self {
            resolution: resolution.ok_or("missing key `resolution`")?,
            origin: origin.ok_or("missing key `origin`")?,
            negate: negate.ok_or("missing key `negate`")?,
        })
    }
}

struct PgmImage<'a> {
    width: usize,
    height: usize,
    pixels: &'a [u8],
}

fn parse_pgm(data: &[u8]) -> Result<PgmImage<'_>, String> {
    let mut pos = 0;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        // skip whitespace and comments
        loop {
            match data.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while data.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err("truncated header".into()),
            }
        }
        let start = pos;
        while data.get(pos).is_some_and(|b| !b.is_ascii_whitespace()) {
            pos += 1;
        }
        tokens.push(std::str::from_utf8(&data[start..pos]).map_err(|_| "non-ascii header")?);
    }
    if tokens[0] != "P5" {
        return Err(format!("bad magic `{}`", tokens[0]));
    }
    let num = |s: &str, what: &str| s.parse::<usize>().map_err(|_| format!("bad {what} `{s}`"));
    let width = num(tokens[1], "width")?;
    let height = num(tokens[2], "height")?;
    let maxval = num(tokens[3], "maxval")?;
    if maxval != 255 {
        return Err(format!("maxval {maxval} unsupported (need 255)"));
    }
    if width == 0 || height == 0 {
        return Err("empty image".into());
    }
    // exactly one whitespace byte separates the header from the payload
    if data.get(pos).is_none_or(|b| !b.is_ascii_whitespace()) {
        return Err("truncated header".into());
    }
    pos += 1;
    let need = width * height;
    let payload = &data[pos..];
    if payload.len() < need {
        return Err(format!(
            "truncated payload: {} of {need} bytes",
            payload.len()
        ));
    }
    Ok(PgmImage {
        width,
        height,
        pixels: &payload[..need],
    })
}
