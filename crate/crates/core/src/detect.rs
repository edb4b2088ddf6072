//! Laser-point detection: red ∧ locally-bright mask, connected blobs, shape
//! and brightness gates, then the brightest surviving candidate.

use serde::{Deserialize, Serialize};

use crate::projection::PixelCoord;
use crate::scene::RenderedFrame;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionParams {
    /// Inclusive hue ranges on the `[0, 180)` scale.
    pub hue_bands: [[u8; 2]; 2],
    pub min_saturation: u8,
    /// Side of the square local-brightness window (odd, pixels).
    pub window: usize,
    /// Required excess of V over the window mean.
    pub margin: f64,
    pub min_area: usize,
    pub max_area: usize,
    pub min_circularity: f64,
    /// Minimum V at the blob centroid.
    pub min_value: u8,
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self {
            hue_bands: [[0, 10], [170, 179]],
            min_saturation: 80,
            window: 31,
            margin: 40.0,
            min_area: 3,
            max_area: 200,
            min_circularity: 0.6,
            min_value: 200,
        }
    }
}

impl DetectionParams {
    pub fn validate(&self) -> Result<(), String> {
        for [lo, hi] in self.hue_bands {
            if lo > hi || hi >= 180 {
                return Err(format!("invalid hue band [{lo}, {hi}]"));
            }
        }
        if self.window == 0 || self.window % 2 == 0 {
            return Err(format!(
                "window must be odd and positive, got {}",
                self.window
            ));
        }
        if self.min_area == 0 || self.min_area > self.max_area {
            return Err("area bounds must satisfy 0 < min_area <= max_area".into());
        }
        if !(self.min_circularity > 0.0 && self.min_circularity <= 1.0) {
            return Err("min_circularity must lie in (0, 1]".into());
        }
        Ok(())
    }

    #[inline]
    fn is_red(&self, hsv: [u8; 3]) -> bool {
        let h = hsv[0];
        hsv[1] >= self.min_saturation && self.hue_bands.iter().any(|&[lo, hi]| h >= lo && h <= hi)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.data[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobCandidate {
    /// Centroid of the member pixels.
    pub center: PixelCoord,
    pub area: usize,
    pub perimeter: f64,
    /// `4πA/P²`, capped at 1.
    pub circularity: f64,
    #[serde(skip)]
    pub pixels: Vec<(usize, usize)>,
}

/// Mean of V over a clamped square window, by direct summation for a few
/// queries or through an integral image for many. Both give identical sums.
struct WindowMean<'a> {
    frame: &'a RenderedFrame,
    half: usize,
    integral: Option<Vec<u64>>,
}

impl<'a> WindowMean<'a> {
    fn new(frame: &'a RenderedFrame, window: usize, queries: usize) -> Self {
        let half = window / 2;
        let direct_cost = queries * window * window;
        let integral = (direct_cost > frame.width * frame.height).then(|| {
            let (w, h) = (frame.width, frame.height);
            let mut sat = vec![0u64; (w + 1) * (h + 1)];
            for y in 0..h {
                let mut row = 0u64;
                for x in 0..w {
                    row += frame.hsv[y * w + x][2] as u64;
                    sat[(y + 1) * (w + 1) + x + 1] = sat[y * (w + 1) + x + 1] + row;
                }
            }
            sat
        });
        Self {
            frame,
            half,
            integral,
        }
    }

    fn mean(&self, x: usize, y: usize) -> f64 {
        let (w, h) = (self.frame.width, self.frame.height);
        let x0 = x.saturating_sub(self.half);
        let y0 = y.saturating_sub(self.half);
        let x1 = (x + self.half).min(w - 1);
        let y1 = (y + self.half).min(h - 1);
        let n = ((x1 - x0 + 1) * (y1 - y0 + 1)) as f64;
        let sum = match &self.integral {
            Some(s) => {
                let s = |xx: usize, yy: usize| s[yy * (w + 1) + xx];
                s(x1 + 1, y1 + 1) + s(x0, y0) - s(x0, y1 + 1) - s(x1 + 1, y0)
            }
            None => {
                let mut acc = 0u64;
                for yy in y0..=y1 {
                    for p in &self.frame.hsv[yy * w + x0..=yy * w + x1] {
                        acc += p[2] as u64;
                    }
                }
                acc
            }
        };
        sum as f64 / n
    }
}

fn red_pixels(frame: &RenderedFrame, params: &DetectionParams) -> Vec<usize> {
    frame
        .hsv
        .iter()
        .enumerate()
        .filter(|(_, &p)| params.is_red(p))
        .map(|(i, _)| i)
        .collect()
}

/// `mask(p) = red(p) ∧ S(p) ≥ S_min ∧ V(p) > mean_w(V)(p) + Δ`.
pub fn candidate_mask(frame: &RenderedFrame, params: &DetectionParams) -> BinaryMask {
    let mut mask = BinaryMask::new(frame.width, frame.height);
    let red = red_pixels(frame, params);
    if red.is_empty() {
        return mask;
    }
    let means = WindowMean::new(frame, params.window, red.len());
    for i in red {
        let (x, y) = (i % frame.width, i / frame.width);
        if frame.hsv[i][2] as f64 > means.mean(x, y) + params.margin {
            mask.data[i] = true;
        }
    }
    mask
}

const NEIGHBORS_8: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// 8-connected components of the mask, sorted row-major by centroid.
///
/// The perimeter is the number of pixel edges shared with the background,
/// scaled by π/4 so that digital disks measure close to their true perimeter.
pub fn extract_blobs(mask: &BinaryMask) -> Vec<BlobCandidate> {
    let (w, h) = (mask.width, mask.height);
    let mut seen = vec![false; w * h];
    let mut blobs = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !mask.data[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut pixels = Vec::new();
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            pixels.push((x, y));
            for (dx, dy) in NEIGHBORS_8 {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if mask.data[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        pixels.sort_by_key(|&(x, y)| (y, x));
        blobs.push(blob_from_pixels(mask, pixels));
    }
    blobs.sort_by(|a, b| {
        a.center
            .y
            .total_cmp(&b.center.y)
            .then(a.center.x.total_cmp(&b.center.x))
    });
    blobs
}

fn blob_from_pixels(mask: &BinaryMask, pixels: Vec<(usize, usize)>) -> BlobCandidate {
    let (w, h) = (mask.width, mask.height);
    let area = pixels.len();
    let (mut sx, mut sy) = (0usize, 0usize);
    let mut edges = 0usize;
    for &(x, y) in &pixels {
        sx += x;
        sy += y;
        let outside = |nx: isize, ny: isize| {
            nx < 0
                || ny < 0
                || nx >= w as isize
                || ny >= h as isize
                || !mask.get(nx as usize, ny as usize)
        };
        let (xi, yi) = (x as isize, y as isize);
        edges += [(xi - 1, yi), (xi + 1, yi), (xi, yi - 1), (xi, yi + 1)]
            .iter()
            .filter(|&&(nx, ny)| outside(nx, ny))
            .count();
    }
    let perimeter = edges as f64 * std::f64::consts::FRAC_PI_4;
    let circularity = (4.0 * std::f64::consts::PI * area as f64 / (perimeter * perimeter)).min(1.0);
    BlobCandidate {
        center: PixelCoord::new(sx as f64 / area as f64, sy as f64 / area as f64),
        area,
        perimeter,
        circularity,
        pixels,
    }
}

fn value_at(frame: &RenderedFrame, p: PixelCoord) -> u8 {
    frame.pixel_at(p).map_or(0, |(x, y)| frame.value(x, y))
}

/// Size, shape and centroid-brightness gates.
pub fn filter_blobs(
    blobs: Vec<BlobCandidate>,
    frame: &RenderedFrame,
    params: &DetectionParams,
) -> Vec<BlobCandidate> {
    blobs
        .into_iter()
        .filter(|b| {
            b.area >= params.min_area
                && b.area <= params.max_area
                && b.circularity >= params.min_circularity
                && value_at(frame, b.center) >= params.min_value
        })
        .collect()
}

fn brightest_index(blobs: &[BlobCandidate], frame: &RenderedFrame) -> Option<usize> {
    let key = |b: &BlobCandidate| {
        let (row, col) = frame
            .pixel_at(b.center)
            .map_or((usize::MAX, usize::MAX), |(x, y)| (y, x));
        (std::cmp::Reverse(value_at(frame, b.center)), row, col)
    };
    (0..blobs.len()).min_by(|&i, &j| {
        let (a, b) = (&blobs[i], &blobs[j]);
        key(a)
            .cmp(&key(b))
            .then(a.center.y.total_cmp(&b.center.y))
            .then(a.center.x.total_cmp(&b.center.x))
    })
}

/// Centroid of the candidate with the highest V; ties go to the smaller row,
/// then the smaller column.
pub fn select_brightest(blobs: &[BlobCandidate], frame: &RenderedFrame) -> Option<PixelCoord> {
    brightest_index(blobs, frame).map(|i| blobs[i].center)
}

/// Everything the pipeline produced for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionOutcome {
    pub mask_pixels: usize,
    pub blobs: Vec<BlobCandidate>,
    pub kept: Vec<BlobCandidate>,
    /// Index into `kept` of the selected candidate.
    pub selected: Option<usize>,
    /// Sub-pixel location of the laser point.
    pub point: Option<PixelCoord>,
}

pub fn detect_with_details(frame: &RenderedFrame, params: &DetectionParams) -> DetectionOutcome {
    let mask = candidate_mask(frame, params);
    let mask_pixels = mask.count();
    let blobs = if mask_pixels == 0 {
        Vec::new()
    } else {
        extract_blobs(&mask)
    };
    let kept = filter_blobs(blobs.clone(), frame, params);
    let selected = brightest_index(&kept, frame);
    let point = selected.map(|i| refine(&kept[i], frame, params));
    DetectionOutcome {
        mask_pixels,
        blobs,
        kept,
        selected,
        point,
    }
}

/// Position of the laser point, or `None` if no candidate survives.
pub fn detect_laser_point(frame: &RenderedFrame, params: &DetectionParams) -> Option<PixelCoord> {
    detect_with_details(frame, params).point
}

/// Centroid weighted by each pixel's excess brightness over its local
/// threshold; the plain centroid snaps to the pixel lattice of small blobs.
fn refine(blob: &BlobCandidate, frame: &RenderedFrame, params: &DetectionParams) -> PixelCoord {
    let means = WindowMean::new(frame, params.window, blob.pixels.len());
    let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for &(x, y) in &blob.pixels {
        let weight = frame.value(x, y) as f64 - means.mean(x, y) - params.margin;
        if weight > 0.0 {
            sw += weight;
            sx += weight * x as f64;
            sy += weight * y as f64;
        }
    }
    if sw > 0.0 {
        PixelCoord::new(sx / sw, sy / sw)
    } else {
        blob.center
    }
}
