//! Seeded detection corpora: frames that contain exactly one laser spot, and
//! frames that contain only distractors. Every object is placed so that it is
//! fully inside the image.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::camera::{CameraIntrinsics, CameraMount, CameraPose};
use crate::grid::WorldPoint;
use crate::projection::project_floor_point;
use crate::robot::RobotPose;
use crate::scene::{Distractor, FloorPatch, SceneSpec};

/// Distance kept between placed objects and the image border (px).
pub const IMAGE_MARGIN: f64 = 16.0;

/// Shortest image length of a generated streak (px).
pub const MIN_STREAK_PIXELS: f64 = 40.0;

#[derive(Debug, Clone)]
pub struct CorpusCase {
    pub scene: SceneSpec,
    pub robot: RobotPose,
    pub camera: CameraPose,
}

fn visible(w: WorldPoint, intr: &CameraIntrinsics, camera: &CameraPose) -> bool {
    project_floor_point(w, intr, camera).is_some_and(|p| {
        p.x >= IMAGE_MARGIN
            && p.y >= IMAGE_MARGIN
            && p.x <= intr.width as f64 - 1.0 - IMAGE_MARGIN
            && p.y <= intr.height as f64 - 1.0 - IMAGE_MARGIN
    })
}

fn random_floor(rng: &mut ChaCha8Rng, robot: &RobotPose) -> SceneSpec {
    let mut scene = SceneSpec {
        seed: rng.random(),
        ..SceneSpec::default()
    };
    scene.floor.extent = [robot.x - 3.5, robot.y - 3.5, robot.x + 3.5, robot.y + 3.5];
    scene.floor.noise_amplitude = rng.random_range(2..12u8);
    let lo = rng.random_range(70..110u8);
    scene.floor.checker_levels = [lo, lo + rng.random_range(0..30u8)];
    if rng.random_bool(0.5) {
        let (cx, cy) = (
            robot.x + rng.random_range(-2.0..2.0),
            robot.y + rng.random_range(-2.0..2.0),
        );
        scene.floor.patches.push(FloorPatch {
            min: [cx - 1.0, cy - 0.6],
            max: [cx + 1.0, cy + 0.6],
            level: rng.random_range(60..135u8),
        });
    }
    scene
}

fn random_robot(rng: &mut ChaCha8Rng) -> RobotPose {
    RobotPose::new(
        rng.random_range(0.0..6.0),
        rng.random_range(0.0..4.0),
        rng.random_range(-PI..PI),
    )
}

/// Floor point at `range` m and `bearing` rad from the robot.
fn polar(robot: &RobotPose, range: f64, bearing: f64) -> WorldPoint {
    let a = robot.theta + bearing;
    WorldPoint::new(robot.x + range * a.cos(), robot.y + range * a.sin())
}

/// One laser spot between `min_range` and `max_range` m ahead of the robot.
pub fn spot_case(
    seed: u64,
    intr: &CameraIntrinsics,
    mount: &CameraMount,
    min_range: f64,
    max_range: f64,
) -> CorpusCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let robot = random_robot(&mut rng);
        let camera = CameraPose::from_robot(&robot, mount);
        let spot = polar(
            &robot,
            rng.random_range(min_range..max_range),
            rng.random_range(-0.5..0.5),
        );
        if !visible(spot, intr, &camera) {
            continue;
        }
        let mut scene = random_floor(&mut rng, &robot);
        scene.laser.position = Some(spot);
        return CorpusCase {
            scene,
            robot,
            camera,
        };
    }
}

/// Local pixel area per square meter of floor around `c`.
fn area_scale(c: WorldPoint, intr: &CameraIntrinsics, camera: &CameraPose) -> Option<f64> {
    let e = 1e-4;
    let p0 = project_floor_point(c, intr, camera)?;
    let px = project_floor_point(WorldPoint::new(c.x + e, c.y), intr, camera)?;
    let py = project_floor_point(WorldPoint::new(c.x, c.y + e), intr, camera)?;
    let det = (px.x - p0.x) * (py.y - p0.y) - (px.y - p0.y) * (py.x - p0.x);
    Some((det / (e * e)).abs())
}

fn random_distractor(
    rng: &mut ChaCha8Rng,
    robot: &RobotPose,
    intr: &CameraIntrinsics,
    camera: &CameraPose,
) -> Option<Distractor> {
    let c = polar(
        robot,
        rng.random_range(0.5..2.5),
        rng.random_range(-0.45..0.45),
    );
    let ring = |r: f64| {
        (0..12)
            .map(move |k| k as f64 * TAU / 12.0)
            .map(move |a| WorldPoint::new(c.x + r * a.cos(), c.y + r * a.sin()))
    };
    let d = match rng.random_range(0..4) {
        0 => {
            let (hx, hy) = (rng.random_range(0.03..0.25), rng.random_range(0.03..0.25));
            let corners = [(-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy)];
            if !corners
                .iter()
                .all(|&(dx, dy)| visible(WorldPoint::new(c.x + dx, c.y + dy), intr, camera))
            {
                return None;
            }
            Distractor::RedMatte {
                min: [c.x - hx, c.y - hy],
                max: [c.x + hx, c.y + hy],
            }
        }
        1 => {
            let radius = rng.random_range(0.002..0.01);
            if !ring(radius).all(|p| visible(p, intr, camera)) {
                return None;
            }
            Distractor::WhiteSpecular { center: c, radius }
        }
        2 => {
            // Sized to cover 4 to 20 times the largest admissible blob area.
            let area = rng.random_range(800.0..4000.0);
            let radius = (area / (PI * area_scale(c, intr, camera)?)).sqrt();
            if !ring(radius).all(|p| visible(p, intr, camera)) {
                return None;
            }
            Distractor::RedBlob { center: c, radius }
        }
        _ => {
            let half = rng.random_range(0.1..0.4);
            let a = rng.random_range(0.0..PI);
            let (dx, dy) = (half * a.cos(), half * a.sin());
            let start = WorldPoint::new(c.x - dx, c.y - dy);
            let end = WorldPoint::new(c.x + dx, c.y + dy);
            if !(visible(start, intr, camera) && visible(end, intr, camera)) {
                return None;
            }
            // Seen end-on a streak collapses into a dot; keep it long in the image.
            let (a, b) = (
                project_floor_point(start, intr, camera)?,
                project_floor_point(end, intr, camera)?,
            );
            if a.distance(&b) < MIN_STREAK_PIXELS {
                return None;
            }
            Distractor::RedStreak {
                start,
                end,
                width: rng.random_range(0.004..0.008),
            }
        }
    };
    Some(d)
}

/// Gap kept between distractor bounding circles (m).
const SEPARATION: f64 = 0.05;

const MAX_ATTEMPTS: usize = 1000;

fn bounding_circle(d: &Distractor) -> (WorldPoint, f64) {
    match *d {
        Distractor::RedMatte { min, max } => (
            WorldPoint::new((min[0] + max[0]) / 2.0, (min[1] + max[1]) / 2.0),
            (max[0] - min[0]).hypot(max[1] - min[1]) / 2.0,
        ),
        Distractor::WhiteSpecular { center, radius } => (center, 3.0 * radius),
        Distractor::RedBlob { center, radius } => (center, radius),
        Distractor::RedStreak { start, end, width } => (
            WorldPoint::new((start.x + end.x) / 2.0, (start.y + end.y) / 2.0),
            start.distance(&end) / 2.0 + 2.0 * width,
        ),
    }
}

/// One to four non-overlapping distractors and no laser spot.
pub fn distractor_case(seed: u64, intr: &CameraIntrinsics, mount: &CameraMount) -> CorpusCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let robot = random_robot(&mut rng);
    let camera = CameraPose::from_robot(&robot, mount);
    let mut scene = random_floor(&mut rng, &robot);
    let wanted = rng.random_range(1..=4);
    let mut placed: Vec<(WorldPoint, f64)> = Vec::new();
    for _ in 0..MAX_ATTEMPTS {
        if scene.distractors.len() == wanted {
            break;
        }
        let Some(d) = random_distractor(&mut rng, &robot, intr, &camera) else {
            continue;
        };
        // Overlapping distractors form compound shapes; keep them apart.
        let (c, r) = bounding_circle(&d);
        if placed
            .iter()
            .all(|(pc, pr)| pc.distance(&c) > pr + r + SEPARATION)
        {
            placed.push((c, r));
            scene.distractors.push(d);
        }
    }
    CorpusCase {
        scene,
        robot,
        camera,
    }
}

/// A bare textured floor.
pub fn spotless_case(seed: u64, mount: &CameraMount) -> CorpusCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let robot = random_robot(&mut rng);
    let camera = CameraPose::from_robot(&robot, mount);
    let scene = random_floor(&mut rng, &robot);
    CorpusCase {
        scene,
        robot,
        camera,
    }
}
