//! Synthetic RGB-D frames of a flat floor scene seen by the robot camera.
//!
//! The floor carries a seeded gray texture (checker + per-texel noise), so
//! nothing on it is red. On top of that the renderer draws distractors, box
//! obstacles and the laser spot. The spot is a Gaussian on the floor
//! (σ = radius / 2) mapped into the image through the local projection
//! Jacobian and widened by the lens point-spread function. It is added to the
//! floor color with an over-driven red peak so its core clips to V = 255.
//!
//! Rendering is a pure function of the scene, intrinsics and pose.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::{CameraIntrinsics, CameraPose};
use crate::grid::WorldPoint;
use crate::projection::{project_floor_point, PixelCoord};

/// Hard upper bound on the floor texture brightness.
pub const FLOOR_MAX_LEVEL: u8 = 140;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FloorTexture {
    /// `[min_x, min_y, max_x, max_y]` covered by the texel table (m).
    pub extent: [f64; 4],
    /// Texel edge length (m).
    pub texel: f64,
    /// Checker square size (m); 0 disables the checker.
    pub checker_size: f64,
    pub checker_levels: [u8; 2],
    /// Per-texel uniform noise amplitude (gray levels).
    pub noise_amplitude: u8,
    /// Gray level outside the extent.
    pub outside_level: u8,
    pub patches: Vec<FloorPatch>,
}

impl Default for FloorTexture {
    fn default() -> Self {
        Self {
            extent: [-1.0, -1.0, 8.0, 6.0],
            texel: 0.01,
            checker_size: 0.3,
            checker_levels: [92, 116],
            noise_amplitude: 10,
            outside_level: 100,
            patches: Vec::new(),
        }
    }
}

/// Axis-aligned floor region with its own base gray (e.g. a carpet).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorPatch {
    pub min: [f64; 2],
    pub max: [f64; 2],
    pub level: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LaserSpot {
    pub position: Option<WorldPoint>,
    /// Spot radius on the floor (m).
    pub radius: f64,
    /// Additive RGB peak; values above 255 clip.
    pub peak: [f64; 3],
}

impl Default for LaserSpot {
    fn default() -> Self {
        Self {
            position: None,
            radius: 0.0025,
            peak: [400.0, 12.0, 12.0],
        }
    }
}

/// Floor-plane objects that each mimic the laser in all but one respect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distractor {
    /// Red, but no brighter than the floor around it.
    RedMatte { min: [f64; 2], max: [f64; 2] },
    /// Spot-like highlight without any red tint.
    WhiteSpecular { center: WorldPoint, radius: f64 },
    /// Bright red disk far larger than a laser spot.
    RedBlob { center: WorldPoint, radius: f64 },
    /// Bright red line: right color and brightness, wrong shape.
    RedStreak {
        start: WorldPoint,
        end: WorldPoint,
        width: f64,
    },
}

/// Vertical box standing on the floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxObstacle {
    pub min: [f64; 2],
    pub max: [f64; 2],
    pub height: f64,
    pub level: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub seed: u64,
    pub floor: FloorTexture,
    pub laser: LaserSpot,
    pub distractors: Vec<Distractor>,
    pub obstacles: Vec<BoxObstacle>,
    /// Point-spread function of the lens, in pixels.
    pub psf_sigma: f64,
    /// Color of pixels without any surface.
    pub background_level: u8,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            floor: FloorTexture::default(),
            laser: LaserSpot::default(),
            distractors: Vec::new(),
            obstacles: Vec::new(),
            psf_sigma: 0.8,
            background_level: 60,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.laser.radius > 0.0) {
            return Err(format!(
                "laser radius must be positive, got {}",
                self.laser.radius
            ));
        }
        if !(self.floor.texel > 0.0) {
            return Err("floor texel must be positive".into());
        }
        let [x0, y0, x1, y1] = self.floor.extent;
        if !(x1 > x0 && y1 > y0) {
            return Err("floor extent is empty".into());
        }
        if !(self.psf_sigma >= 0.0) {
            return Err("psf_sigma must be non-negative".into());
        }
        for b in &self.obstacles {
            if !(b.max[0] > b.min[0] && b.max[1] > b.min[1] && b.height > 0.0) {
                return Err(format!("degenerate obstacle {b:?}"));
            }
        }
        Ok(())
    }
}

/// Color, HSV and depth images of one camera frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedFrame {
    pub width: usize,
    pub height: usize,
    pub color: Vec<[u8; 3]>,
    /// OpenCV convention: H in `[0, 180)`, S and V in `[0, 255]`.
    pub hsv: Vec<[u8; 3]>,
    /// Depth along the optical axis (m); 0 where nothing was hit.
    pub depth: Vec<f64>,
}

impl RenderedFrame {
    pub fn new(width: usize, height: usize) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            color: vec![[0; 3]; n],
            hsv: vec![[0; 3]; n],
            depth: vec![0.0; n],
        }
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    /// `V(I_HSV(x, y))`.
    #[inline]
    pub fn value(&self, x: usize, y: usize) -> u8 {
        self.hsv[self.index(x, y)][2]
    }

    /// Pixel containing a sub-pixel coordinate, if inside the image.
    pub fn pixel_at(&self, p: PixelCoord) -> Option<(usize, usize)> {
        let (x, y) = (p.x.round(), p.y.round());
        if x < 0.0 || y < 0.0 || x >= self.width as f64 || y >= self.height as f64 {
            return None;
        }
        Some((x as usize, y as usize))
    }

    /// `I_Z(l)` at a sub-pixel location: bilinear over the four neighbours when
    /// they lie on one smooth surface, the nearest pixel otherwise.
    pub fn sample_depth(&self, p: PixelCoord) -> Option<f64> {
        let (nx, ny) = self.pixel_at(p)?;
        let nearest = self.depth[self.index(nx, ny)];
        let x0 = p.x.floor();
        let y0 = p.y.floor();
        if x0 < 0.0 || y0 < 0.0 || x0 + 1.0 >= self.width as f64 || y0 + 1.0 >= self.height as f64 {
            return (nearest > 0.0).then_some(nearest);
        }
        let (ix, iy) = (x0 as usize, y0 as usize);
        let d = [
            self.depth[self.index(ix, iy)],
            self.depth[self.index(ix + 1, iy)],
            self.depth[self.index(ix, iy + 1)],
            self.depth[self.index(ix + 1, iy + 1)],
        ];
        let lo = d.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = d.iter().cloned().fold(0.0, f64::max);
        if lo <= 0.0 || hi > lo * 1.1 {
            return (nearest > 0.0).then_some(nearest);
        }
        let fx = p.x - x0;
        let fy = p.y - y0;
        let top = d[0] * (1.0 - fx) + d[1] * fx;
        let bottom = d[2] * (1.0 - fx) + d[3] * fx;
        Some(top * (1.0 - fy) + bottom * fy)
    }
}

/// 8-bit RGB → HSV with H halved into `[0, 180)`.
#[inline]
pub fn rgb_to_hsv([r, g, b]: [u8; 3]) -> [u8; 3] {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    if max == min {
        return [0, 0, max];
    }
    let (rf, gf, bf) = (r as f64, g as f64, b as f64);
    let delta = (max - min) as f64;
    let s = (255.0 * delta / max as f64).round() as u8;
    let mut h = if max == r {
        60.0 * (gf - bf) / delta
    } else if max == g {
        120.0 + 60.0 * (bf - rf) / delta
    } else {
        240.0 + 60.0 * (rf - gf) / delta
    };
    if h < 0.0 {
        h += 360.0;
    }
    let mut h2 = (h / 2.0).round() as u32;
    if h2 >= 180 {
        h2 -= 180;
    }
    [h2 as u8, s, max]
}

const FIXED_ONE: f64 = 4_294_967_296.0;

const SURFACE_NONE: u8 = 0;
const SURFACE_FLOOR: u8 = 1;
const SURFACE_BOX: u8 = 2;

/// Pre-baked floor texture plus the scene it was built from.
#[derive(Debug, Clone)]
pub struct Renderer {
    scene: SceneSpec,
    texels: Vec<u8>,
    tex_w: usize,
    tex_h: usize,
}

struct RowGeometry {
    depth: f64,
    /// floor point at column 0 and its per-column increment (x, y)
    start: [f64; 2],
    step: [f64; 2],
}

impl Renderer {
    pub fn new(scene: &SceneSpec) -> Self {
        let f = &scene.floor;
        let [x0, y0, x1, y1] = f.extent;
        let tex_w = ((x1 - x0) / f.texel).ceil().max(1.0) as usize;
        let tex_h = ((y1 - y0) / f.texel).ceil().max(1.0) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
        let amp = f.noise_amplitude as i32;
        let span = (2 * amp + 1) as u64;
        let cell = |w: f64| {
            if f.checker_size > 0.0 {
                (w / f.checker_size).floor() as i64
            } else {
                0
            }
        };
        let col_center = |tx: usize| x0 + (tx as f64 + 0.5) * f.texel;
        let col_cells: Vec<i64> = (0..tex_w).map(|tx| cell(col_center(tx))).collect();
        let mut texels = Vec::with_capacity(tex_w * tex_h);
        for ty in 0..tex_h {
            let wy = y0 + (ty as f64 + 0.5) * f.texel;
            let row_cell = cell(wy);
            let row_patches: Vec<&FloorPatch> = f
                .patches
                .iter()
                .filter(|p| wy >= p.min[1] && wy < p.max[1])
                .collect();
            for (tx, &cx) in col_cells.iter().enumerate() {
                let mut level = f.checker_levels[(cx + row_cell).rem_euclid(2) as usize];
                if !row_patches.is_empty() {
                    let wx = col_center(tx);
                    for p in &row_patches {
                        if wx >= p.min[0] && wx < p.max[0] {
                            level = p.level;
                        }
                    }
                }
                // Multiply-shift maps a 32-bit draw onto [-amp, amp].
                let noise = ((rng.next_u32() as u64 * span) >> 32) as i32 - amp;
                let v = (level as i32 + noise).clamp(0, FLOOR_MAX_LEVEL as i32);
                texels.push(v as u8);
            }
        }
        Self {
            scene: scene.clone(),
            texels,
            tex_w,
            tex_h,
        }
    }

    pub fn scene(&self) -> &SceneSpec {
        &self.scene
    }

    /// Base floor gray at a world point.
    #[inline]
    pub fn floor_level(&self, x: f64, y: f64) -> u8 {
        let f = &self.scene.floor;
        let tx = (x - f.extent[0]) / f.texel;
        let ty = (y - f.extent[1]) / f.texel;
        if !(tx >= 0.0 && ty >= 0.0 && tx < self.tex_w as f64 && ty < self.tex_h as f64) {
            return f.outside_level.min(FLOOR_MAX_LEVEL);
        }
        self.texels[ty as usize * self.tex_w + tx as usize]
    }

    /// Renders the scene with the laser at `laser` (overriding the scene's own
    /// laser position).
    pub fn render(
        &self,
        laser: Option<WorldPoint>,
        intr: &CameraIntrinsics,
        pose: &CameraPose,
    ) -> RenderedFrame {
        let mut frame = RenderedFrame::new(intr.width, intr.height);
        self.render_into(&mut frame, laser, intr, pose);
        frame
    }

    pub fn render_into(
        &self,
        frame: &mut RenderedFrame,
        laser: Option<WorldPoint>,
        intr: &CameraIntrinsics,
        pose: &CameraPose,
    ) {
        if frame.width != intr.width || frame.height != intr.height {
            *frame = RenderedFrame::new(intr.width, intr.height);
        }
        let (w, h) = (intr.width, intr.height);
        let mut surface = vec![SURFACE_NONE; w * h];
        let rows = row_geometry(intr, pose);
        let cam = [pose.x, pose.y];
        let bg = self.scene.background_level;

        // floor, sampled in texel units along each row
        let f = &self.scene.floor;
        let inv = 1.0 / f.texel;
        let outside = f.outside_level.min(FLOOR_MAX_LEVEL);
        for (v, row) in rows.iter().enumerate() {
            let base = v * w;
            let color = &mut frame.color[base..base + w];
            let hsv = &mut frame.hsv[base..base + w];
            let depth = &mut frame.depth[base..base + w];
            match row {
                Some(g) => {
                    let tx0 = (g.start[0] - f.extent[0]) * inv;
                    let ty0 = (g.start[1] - f.extent[1]) * inv;
                    let (dtx, dty) = (g.step[0] * inv, g.step[1] * inv);
                    // 32.32 fixed point; rows far beyond the texture saturate harmlessly
                    let fixed = |t: f64| (t * FIXED_ONE).clamp(-1e18, 1e18) as i64;
                    let (mut fx, mut fy) = (fixed(tx0), fixed(ty0));
                    let (sx, sy) = (fixed(dtx), fixed(dty));
                    let (tw, th) = (self.tex_w as u64, self.tex_h as u64);
                    for u in 0..w {
                        let (ix, iy) = ((fx >> 32) as u64, (fy >> 32) as u64);
                        fx = fx.saturating_add(sx);
                        fy = fy.saturating_add(sy);
                        let level = if ix < tw && iy < th {
                            self.texels[iy as usize * self.tex_w + ix as usize]
                        } else {
                            outside
                        };
                        color[u] = [level; 3];
                        hsv[u] = [0, 0, level];
                    }
                    depth.fill(g.depth);
                    surface[base..base + w].fill(SURFACE_FLOOR);
                }
                None => {
                    color.fill([bg; 3]);
                    hsv.fill([0, 0, bg]);
                    depth.fill(0.0);
                }
            }
        }

        // obstacles
        let axes = pose.axes();
        for obstacle in &self.scene.obstacles {
            let Some((u0, u1, v0, v1)) = box_image_bounds(obstacle, intr, pose) else {
                continue;
            };
            let near = horizontal_distance_to_rect(cam, obstacle.min, obstacle.max);
            for v in v0..=v1 {
                if let Some(g) = &rows[v] {
                    // no floor point of this row is farther than the box: nothing to occlude
                    let far = floor_far_distance(g, u0, u1, cam);
                    if far < near {
                        continue;
                    }
                }
                let b = (v as f64 - intr.cy) / intr.fy;
                for u in u0..=u1 {
                    let a = (u as f64 - intr.cx) / intr.fx;
                    let dir = [
                        a * axes[0][0] + b * axes[1][0] + axes[2][0],
                        a * axes[0][1] + b * axes[1][1] + axes[2][1],
                        a * axes[0][2] + b * axes[1][2] + axes[2][2],
                    ];
                    let i = v * w + u;
                    if let Some((t, face)) = ray_box(pose.position(), dir, obstacle) {
                        let current = frame.depth[i];
                        if surface[i] == SURFACE_NONE || t < current {
                            let shade = [1.0, 0.85, 0.7][face];
                            let level = (obstacle.level as f64 * shade).round() as u8;
                            frame.color[i] = [level; 3];
                            frame.hsv[i] = [0, 0, level];
                            frame.depth[i] = t;
                            surface[i] = SURFACE_BOX;
                        }
                    }
                }
            }
        }

        // floor decorations; `tinted` collects the pixels whose color changed
        let mut tinted = Vec::new();
        for d in &self.scene.distractors {
            self.draw_distractor(frame, &surface, &mut tinted, &rows, d, intr, pose);
        }
        if let Some(spot) = laser {
            if self.floor_point_visible(spot, intr, pose) {
                let sigma = self.scene.laser.radius / 2.0;
                let peak = self.scene.laser.peak;
                draw_floor_gaussian(
                    frame,
                    &surface,
                    &mut tinted,
                    spot,
                    sigma,
                    self.scene.psf_sigma,
                    peak,
                    intr,
                    pose,
                );
            }
        }

        for i in tinted {
            frame.hsv[i] = rgb_to_hsv(frame.color[i]);
        }
    }

    /// Whether the floor point is in front of the camera and not hidden by an obstacle.
    pub fn floor_point_visible(
        &self,
        p: WorldPoint,
        intr: &CameraIntrinsics,
        pose: &CameraPose,
    ) -> bool {
        let Some(q) = project_floor_point(p, intr, pose) else {
            return false;
        };
        if !intr.contains(q.x, q.y) {
            return false;
        }
        let cam = pose.position();
        let dir = [p.x - cam[0], p.y - cam[1], -cam[2]];
        !self
            .scene
            .obstacles
            .iter()
            .any(|b| ray_box(cam, dir, b).is_some_and(|(t, _)| t < 1.0))
            && !self
                .scene
                .obstacles
                .iter()
                .any(|b| p.x >= b.min[0] && p.x <= b.max[0] && p.y >= b.min[1] && p.y <= b.max[1])
    }

    fn draw_distractor(
        &self,
        frame: &mut RenderedFrame,
        surface: &[u8],
        tinted: &mut Vec<usize>,
        rows: &[Option<RowGeometry>],
        d: &Distractor,
        intr: &CameraIntrinsics,
        pose: &CameraPose,
    ) {
        match d {
            Distractor::WhiteSpecular { center, radius } => {
                if self.floor_point_visible(*center, intr, pose) {
                    draw_floor_gaussian(
                        frame,
                        surface,
                        tinted,
                        *center,
                        radius / 2.0,
                        self.scene.psf_sigma,
                        [400.0, 400.0, 400.0],
                        intr,
                        pose,
                    );
                }
            }
            Distractor::RedMatte { min, max } => {
                let corners = [
                    WorldPoint::new(min[0], min[1]),
                    WorldPoint::new(max[0], min[1]),
                    WorldPoint::new(max[0], max[1]),
                    WorldPoint::new(min[0], max[1]),
                ];
                for_floor_pixels(
                    frame,
                    surface,
                    tinted,
                    rows,
                    &corners,
                    intr,
                    pose,
                    |f, i, x, y| {
                        if x >= min[0] && x < max[0] && y >= min[1] && y < max[1] {
                            let base = self.floor_level(x, y) as f64;
                            let r = (base + 15.0).min(FLOOR_MAX_LEVEL as f64);
                            let gb = (0.35 * r).round() as u8;
                            f.color[i] = [r.round() as u8, gb, gb];
                        }
                    },
                );
            }
            Distractor::RedBlob { center, radius } => {
                let hull: Vec<WorldPoint> = (0..16)
                    .map(|k| {
                        let a = k as f64 * std::f64::consts::TAU / 16.0;
                        let r = radius * 1.1;
                        WorldPoint::new(center.x + r * a.cos(), center.y + r * a.sin())
                    })
                    .collect();
                for_floor_pixels(
                    frame,
                    surface,
                    tinted,
                    rows,
                    &hull,
                    intr,
                    pose,
                    |f, i, x, y| {
                        if (x - center.x).hypot(y - center.y) <= *radius {
                            f.color[i] = [255, 40, 40];
                        }
                    },
                );
            }
            Distractor::RedStreak { start, end, width } => {
                draw_floor_line(
                    frame,
                    surface,
                    tinted,
                    *start,
                    *end,
                    width / 2.0,
                    self.scene.psf_sigma,
                    self.scene.laser.peak,
                    intr,
                    pose,
                );
            }
        }
    }
}

/// `render_frame(scene, intrinsics, pose)`: renders with the scene's own laser.
pub fn render_frame(
    scene: &SceneSpec,
    intr: &CameraIntrinsics,
    pose: &CameraPose,
) -> RenderedFrame {
    Renderer::new(scene).render(scene.laser.position, intr, pose)
}

fn row_geometry(intr: &CameraIntrinsics, pose: &CameraPose) -> Vec<Option<RowGeometry>> {
    let [ax, ay, az] = pose.axes();
    let (sp, cp) = pose.pitch.sin_cos();
    (0..intr.height)
        .map(|v| {
            let b = (v as f64 - intr.cy) / intr.fy;
            let descent = b * cp + sp;
            if descent <= 1e-12 {
                return None;
            }
            let depth = pose.height / descent;
            let a0 = -intr.cx / intr.fx;
            let start = [
                pose.x + depth * (a0 * ax[0] + b * ay[0] + az[0]),
                pose.y + depth * (a0 * ax[1] + b * ay[1] + az[1]),
            ];
            let step = [depth / intr.fx * ax[0], depth / intr.fx * ax[1]];
            Some(RowGeometry { depth, start, step })
        })
        .collect()
}

fn floor_far_distance(g: &RowGeometry, u0: usize, u1: usize, cam: [f64; 2]) -> f64 {
    let d = |u: usize| {
        let x = g.start[0] + u as f64 * g.step[0] - cam[0];
        let y = g.start[1] + u as f64 * g.step[1] - cam[1];
        x.hypot(y)
    };
    d(u0).max(d(u1))
}

fn horizontal_distance_to_rect(p: [f64; 2], min: [f64; 2], max: [f64; 2]) -> f64 {
    let dx = (min[0] - p[0]).max(0.0).max(p[0] - max[0]);
    let dy = (min[1] - p[1]).max(0.0).max(p[1] - max[1]);
    dx.hypot(dy)
}

/// Slab test. Returns the entry parameter along `dir` and the index of the
/// entered face family (0 = x faces, 1 = y faces, 2 = top).
fn ray_box(origin: [f64; 3], dir: [f64; 3], b: &BoxObstacle) -> Option<(f64, usize)> {
    let lo = [b.min[0], b.min[1], 0.0];
    let hi = [b.max[0], b.max[1], b.height];
    let mut t_enter = f64::NEG_INFINITY;
    let mut t_exit = f64::INFINITY;
    let mut face = 0;
    for k in 0..3 {
        if dir[k].abs() < 1e-15 {
            if origin[k] < lo[k] || origin[k] > hi[k] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / dir[k];
        let mut t0 = (lo[k] - origin[k]) * inv;
        let mut t1 = (hi[k] - origin[k]) * inv;
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        if t0 > t_enter {
            t_enter = t0;
            face = k;
        }
        t_exit = t_exit.min(t1);
    }
    if t_enter > t_exit || t_exit <= 0.0 || t_enter <= 0.0 {
        return None;
    }
    Some((t_enter, face))
}

/// Conservative pixel bounds of a box: corners in front of a near plane plus
/// the points where box edges cross it.
fn box_image_bounds(
    b: &BoxObstacle,
    intr: &CameraIntrinsics,
    pose: &CameraPose,
) -> Option<(usize, usize, usize, usize)> {
    const NEAR: f64 = 0.01;
    let corners: Vec<[f64; 3]> = (0..8)
        .map(|k| {
            let wx = if k & 1 == 0 { b.min[0] } else { b.max[0] };
            let wy = if k & 2 == 0 { b.min[1] } else { b.max[1] };
            let wz = if k & 4 == 0 { 0.0 } else { b.height };
            pose.world_to_camera([wx, wy, wz])
        })
        .collect();
    let mut pts: Vec<[f64; 3]> = corners.iter().copied().filter(|c| c[2] >= NEAR).collect();
    for i in 0..8 {
        for bit in [1, 2, 4] {
            let j = i | bit;
            if j == i {
                continue;
            }
            let (p, q) = (corners[i], corners[j]);
            if (p[2] - NEAR) * (q[2] - NEAR) < 0.0 {
                let t = (NEAR - p[2]) / (q[2] - p[2]);
                pts.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]), NEAR]);
            }
        }
    }
    if pts.is_empty() {
        return None;
    }
    let mut bounds = [
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    ];
    for p in pts {
        let u = intr.fx * p[0] / p[2] + intr.cx;
        let v = intr.fy * p[1] / p[2] + intr.cy;
        bounds[0] = bounds[0].min(u);
        bounds[1] = bounds[1].max(u);
        bounds[2] = bounds[2].min(v);
        bounds[3] = bounds[3].max(v);
    }
    clamp_bounds(bounds, intr, 1.0)
}

fn clamp_bounds(
    [u0, u1, v0, v1]: [f64; 4],
    intr: &CameraIntrinsics,
    margin: f64,
) -> Option<(usize, usize, usize, usize)> {
    let (w, h) = (intr.width as f64, intr.height as f64);
    let (u0, u1) = (
        (u0 - margin).floor().max(0.0),
        (u1 + margin).ceil().min(w - 1.0),
    );
    let (v0, v1) = (
        (v0 - margin).floor().max(0.0),
        (v1 + margin).ceil().min(h - 1.0),
    );
    if u0 > u1 || v0 > v1 || u1 < 0.0 || v1 < 0.0 {
        return None;
    }
    Some((u0 as usize, u1 as usize, v0 as usize, v1 as usize))
}

/// Visits floor pixels inside the projected bounds of a floor polygon.
fn for_floor_pixels<F>(
    frame: &mut RenderedFrame,
    surface: &[u8],
    tinted: &mut Vec<usize>,
    rows: &[Option<RowGeometry>],
    polygon: &[WorldPoint],
    intr: &CameraIntrinsics,
    pose: &CameraPose,
    mut paint: F,
) where
    F: FnMut(&mut RenderedFrame, usize, f64, f64),
{
    let projected: Vec<PixelCoord> = polygon
        .iter()
        .filter_map(|&p| project_floor_point(p, intr, pose))
        .collect();
    if projected.is_empty() {
        return;
    }
    let bounds = if projected.len() < polygon.len() {
        // part of the footprint is behind the camera: scan the whole image
        [0.0, intr.width as f64, 0.0, intr.height as f64]
    } else {
        let mut b = [
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        ];
        for q in &projected {
            b[0] = b[0].min(q.x);
            b[1] = b[1].max(q.x);
            b[2] = b[2].min(q.y);
            b[3] = b[3].max(q.y);
        }
        b
    };
    let Some((u0, u1, v0, v1)) = clamp_bounds(bounds, intr, 2.0) else {
        return;
    };
    for v in v0..=v1 {
        let Some(g) = &rows[v] else { continue };
        for u in u0..=u1 {
            let i = v * intr.width + u;
            if surface[i] != SURFACE_FLOOR {
                continue;
            }
            let x = g.start[0] + u as f64 * g.step[0];
            let y = g.start[1] + u as f64 * g.step[1];
            let before = frame.color[i];
            paint(frame, i, x, y);
            if frame.color[i] != before {
                tinted.push(i);
            }
        }
    }
}

fn add_light(c: [u8; 3], alpha: f64, peak: [f64; 3]) -> [u8; 3] {
    let mut out = [0u8; 3];
    for k in 0..3 {
        out[k] = (c[k] as f64 + alpha * peak[k]).round().clamp(0.0, 255.0) as u8;
    }
    out
}

/// Footprint of an isotropic floor Gaussian (σ in meters) in the image:
/// covariance `σ² J Jᵀ + psf² I` around the projected center.
struct ImageGaussian {
    q: PixelCoord,
    /// Columns of the floor→image Jacobian.
    jx: [f64; 2],
    jy: [f64; 2],
    inv: [f64; 3],
    reach: f64,
}

impl ImageGaussian {
    fn new(
        center: WorldPoint,
        sigma: f64,
        psf: f64,
        intr: &CameraIntrinsics,
        pose: &CameraPose,
    ) -> Option<Self> {
        let q = project_floor_point(center, intr, pose)?;
        let eps = 1e-4;
        let probe = |dx: f64, dy: f64| {
            project_floor_point(WorldPoint::new(center.x + dx, center.y + dy), intr, pose)
        };
        let (px1, px0) = (probe(eps, 0.0)?, probe(-eps, 0.0)?);
        let (py1, py0) = (probe(0.0, eps)?, probe(0.0, -eps)?);
        let jx = [(px1.x - px0.x) / (2.0 * eps), (px1.y - px0.y) / (2.0 * eps)];
        let jy = [(py1.x - py0.x) / (2.0 * eps), (py1.y - py0.y) / (2.0 * eps)];
        let s2 = sigma * sigma;
        let p2 = psf * psf;
        let c00 = s2 * (jx[0] * jx[0] + jy[0] * jy[0]) + p2;
        let c11 = s2 * (jx[1] * jx[1] + jy[1] * jy[1]) + p2;
        let c01 = s2 * (jx[0] * jx[1] + jy[0] * jy[1]);
        let det = c00 * c11 - c01 * c01;
        if !(det > 1e-18) {
            return None;
        }
        Some(Self {
            q,
            jx,
            jy,
            inv: [c11 / det, -c01 / det, c00 / det],
            reach: 4.5 * c00.max(c11).sqrt(),
        })
    }

    /// Image speed (px/m) when moving along the unit floor direction `d`.
    fn rate(&self, d: [f64; 2]) -> f64 {
        (self.jx[0] * d[0] + self.jy[0] * d[1]).hypot(self.jx[1] * d[0] + self.jy[1] * d[1])
    }

    /// Pixels with non-negligible weight, with the weight.
    fn for_each(&self, intr: &CameraIntrinsics, mut f: impl FnMut(usize, f64)) {
        let (q, r) = (self.q, self.reach);
        let Some((u0, u1, v0, v1)) = clamp_bounds([q.x - r, q.x + r, q.y - r, q.y + r], intr, 0.0)
        else {
            return;
        };
        let [i00, i01, i11] = self.inv;
        for v in v0..=v1 {
            let dy = v as f64 - q.y;
            for u in u0..=u1 {
                let dx = u as f64 - q.x;
                let m = dx * dx * i00 + 2.0 * dx * dy * i01 + dy * dy * i11;
                if m <= 20.0 {
                    f(v * intr.width + u, (-0.5 * m).exp());
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn draw_floor_gaussian(
    frame: &mut RenderedFrame,
    surface: &[u8],
    tinted: &mut Vec<usize>,
    center: WorldPoint,
    sigma: f64,
    psf: f64,
    peak: [f64; 3],
    intr: &CameraIntrinsics,
    pose: &CameraPose,
) {
    let Some(g) = ImageGaussian::new(center, sigma, psf, intr, pose) else {
        return;
    };
    g.for_each(intr, |i, alpha| {
        if surface[i] == SURFACE_FLOOR {
            frame.color[i] = add_light(frame.color[i], alpha, peak);
            tinted.push(i);
        }
    });
}

/// A floor segment with a Gaussian cross-section: the per-pixel maximum over
/// footprints sampled at most half a pixel apart along the segment.
#[allow(clippy::too_many_arguments)]
fn draw_floor_line(
    frame: &mut RenderedFrame,
    surface: &[u8],
    tinted: &mut Vec<usize>,
    start: WorldPoint,
    end: WorldPoint,
    sigma: f64,
    psf: f64,
    peak: [f64; 3],
    intr: &CameraIntrinsics,
    pose: &CameraPose,
) {
    const MAX_SAMPLES: usize = 20_000;
    let len = start.distance(&end);
    let dir = if len > 0.0 {
        [(end.x - start.x) / len, (end.y - start.y) / len]
    } else {
        [1.0, 0.0]
    };
    let mut weight = vec![0.0f64; frame.color.len()];
    let mut touched = Vec::new();
    let mut s = 0.0;
    for _ in 0..MAX_SAMPLES {
        let c = WorldPoint::new(start.x + s * dir[0], start.y + s * dir[1]);
        let mut step = sigma.max(1e-4);
        if let Some(g) = ImageGaussian::new(c, sigma, psf, intr, pose) {
            g.for_each(intr, |i, alpha| {
                if surface[i] == SURFACE_FLOOR && alpha > weight[i] {
                    if weight[i] == 0.0 {
                        touched.push(i);
                    }
                    weight[i] = alpha;
                }
            });
            step = step.min(0.5 / g.rate(dir).max(1e-6));
        }
        if s >= len {
            break;
        }
        s = (s + step).min(len);
    }
    for i in touched {
        frame.color[i] = add_light(frame.color[i], weight[i], peak);
        tinted.push(i);
    }
}
