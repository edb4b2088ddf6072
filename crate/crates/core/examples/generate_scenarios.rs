//! Writes the shipped scenario set: the lab map, the carpet and correctness
//! scenarios, the gapped-border failure case and the teaching-time suite.
//!
//! Usage: `cargo run --example generate_scenarios -- <out dir>`

use std::error::Error;
use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::path::Path;

use borderforge::grid::{save_map, CellValue, MapOrigin, OccupancyGrid, WorldPoint};
use borderforge::robot::RobotPose;
use borderforge::scenario::{
    Expectations, LaserScript, PlanExpectation, PlanSpec, ScenarioFile, ScriptBuilder, ScriptFrame,
    ScriptTiming, ScriptedEvent,
};
use borderforge::scene::{BoxObstacle, FloorPatch, SceneSpec};

const RES: f64 = 0.025;
const WIDTH: usize = 244;
const HEIGHT: usize = 140;
const WALL: usize = 2;
const TABLE: ([f64; 2], [f64; 2]) = ([5.25, 2.65], [5.75, 3.05]);
const CARPET: ([f64; 2], [f64; 2]) = ([2.6, 1.0], [4.6, 2.25]);

type Rect = ([f64; 2], [f64; 2]);

fn inside(r: &Rect, p: WorldPoint) -> bool {
    p.x >= r.0[0] && p.x <= r.1[0] && p.y >= r.0[1] && p.y <= r.1[1]
}

/// Paints `value` on every Free cell whose center lies in one of `rects`.
fn paint(grid: &OccupancyGrid, rects: &[Rect], value: CellValue) -> OccupancyGrid {
    let cells: Vec<_> = grid
        .coords()
        .filter(|&c| grid.is_free(c))
        .filter(|&c| {
            let p = grid.cell_to_world(c).expect("own cell");
            rects.iter().any(|r| inside(r, p))
        })
        .collect();
    grid.with_cells_set(&cells, value).expect("own cells")
}

fn lab_map() -> OccupancyGrid {
    let g = OccupancyGrid::new(WIDTH, HEIGHT, RES, MapOrigin::default(), CellValue::Free)
        .expect("valid extent");
    let ring: Vec<_> = g
        .coords()
        .filter(|c| c.x < WALL || c.y < WALL || c.x >= WIDTH - WALL || c.y >= HEIGHT - WALL)
        .collect();
    let g = g
        .with_cells_set(&ring, CellValue::Occupied)
        .expect("own cells");
    paint(&g, &[TABLE], CellValue::Occupied)
}

fn lab_scene(carpet: bool) -> SceneSpec {
    let mut scene = SceneSpec {
        seed: 11,
        ..SceneSpec::default()
    };
    scene.obstacles.push(BoxObstacle {
        min: TABLE.0,
        max: TABLE.1,
        height: 0.75,
        level: 70,
    });
    if carpet {
        scene.floor.patches.push(FloorPatch {
            min: CARPET.0,
            max: CARPET.1,
            level: 128,
        });
    }
    scene
}

fn p(x: f64, y: f64) -> WorldPoint {
    WorldPoint::new(x, y)
}

fn rect_loop(r: &Rect) -> Vec<WorldPoint> {
    vec![
        p(r.0[0], r.0[1]),
        p(r.1[0], r.0[1]),
        p(r.1[0], r.1[1]),
        p(r.0[0], r.1[1]),
    ]
}

fn center(r: &Rect) -> WorldPoint {
    p((r.0[0] + r.1[0]) / 2.0, (r.0[1] + r.1[1]) / 2.0)
}

struct Draft {
    id: String,
    description: String,
    spawn: RobotPose,
    ground_truth: Option<String>,
    carpet: bool,
    script: (LaserScript, Vec<ScriptedEvent>),
    expect: Expectations,
    plans: Vec<PlanSpec>,
    max_time: f64,
}

fn scenario(d: Draft, map_dir: &str) -> ScenarioFile {
    let mut sim = borderforge::sim::SimConfig::default();
    sim.max_time = d.max_time;
    ScenarioFile {
        id: d.id,
        description: d.description,
        seed: 1,
        prior_map: format!("{map_dir}/lab.pgm").into(),
        ground_truth_map: d.ground_truth.map(|g| format!("{map_dir}/{g}").into()),
        physical_map: None,
        scene: lab_scene(d.carpet),
        camera: Default::default(),
        controller: Default::default(),
        limits: Default::default(),
        detection: Default::default(),
        session: Default::default(),
        sim,
        spawn: d.spawn,
        laser_script: d.script.0,
        event_script: d.script.1,
        expect: d.expect,
        plans: d.plans,
    }
}

fn write_json(path: &Path, s: &ScenarioFile) -> Result<(), Box<dyn Error>> {
    let mut text = serde_json::to_string_pretty(s)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    let out = std::env::args()
        .nth(1)
        .ok_or("usage: generate_scenarios <out dir>")?;
    let out = Path::new(&out);
    fs::create_dir_all(out.join("maps"))?;
    fs::create_dir_all(out.join("suite"))?;
    let lab = lab_map();
    save_map(&lab, out.join("maps/lab.pgm"))?;
    save_map(
        &paint(&lab, &[CARPET], CellValue::Occupied),
        out.join("maps/carpet_gt.pgm"),
    )?;
    let timing = ScriptTiming::default();

    // Carpet loop with the keep-off point in the middle of the carpet.
    let spawn = RobotPose::new(CARPET.0[0] - 1.0, CARPET.0[1], 0.0);
    let mut b = ScriptBuilder::new(spawn, timing, 0.5);
    b.teach_border(&rect_loop(&CARPET), true, center(&CARPET), &[]);
    let carpet = Draft {
        id: "carpet".into(),
        description: "2.00 m x 1.25 m carpet loop on the lab map, keep-off point inside".into(),
        spawn,
        ground_truth: Some("carpet_gt.pgm".into()),
        carpet: true,
        script: b.finish(ScriptFrame::World, &lab),
        expect: Expectations {
            min_jaccard: Some(0.85),
            borders: Some(1),
            failure: None,
        },
        plans: vec![],
        max_time: 300.0,
    };
    write_json(&out.join("carpet.json"), &scenario(carpet, "maps"))?;

    // Border 1 cuts off the left of the lab, border 2 encloses the carpet.
    let curve = [p(1.3, 0.6), p(1.5, 1.75), p(1.3, 3.0)];
    let d1 = (curve[1].y - curve[0].y).atan2(curve[1].x - curve[0].x);
    let spawn = RobotPose::new(curve[0].x - 0.5 * d1.cos(), curve[0].y - 0.5 * d1.sin(), d1);
    let mut b = ScriptBuilder::new(spawn, timing, 0.5);
    b.teach_border(&curve, false, p(0.6, 1.75), &[]);
    b.teach_border(&rect_loop(&CARPET), true, center(&CARPET), &[p(2.0, 0.6)]);
    let correctness = Draft {
        id: "correctness".into(),
        description: "separating curve excluding the left of the lab, then the carpet loop".into(),
        spawn,
        ground_truth: None,
        carpet: true,
        script: b.finish(ScriptFrame::World, &lab),
        expect: Expectations {
            min_jaccard: None,
            borders: Some(2),
            failure: None,
        },
        plans: vec![
            PlanSpec {
                name: "across_carpet".into(),
                start: p(3.6, 0.35),
                goal: p(3.6, 3.1),
                expect: Some(PlanExpectation::Reroute),
            },
            PlanSpec {
                name: "into_carpet".into(),
                start: p(3.6, 0.35),
                goal: center(&CARPET),
                expect: Some(PlanExpectation::NoPath),
            },
            PlanSpec {
                name: "into_left_area".into(),
                start: p(3.6, 0.35),
                goal: p(0.6, 1.0),
                expect: Some(PlanExpectation::NoPath),
            },
        ],
        max_time: 500.0,
    };
    write_json(
        &out.join("correctness.json"),
        &scenario(correctness, "maps"),
    )?;

    // An open border from the south wall towards the table: free space still
    // connects both sides round the far end of the table.
    let spawn = RobotPose::new(5.5, 0.7, FRAC_PI_2);
    let mut b = ScriptBuilder::new(spawn, timing, 0.5);
    b.teach_border(&[p(5.5, 1.2), p(5.5, 2.2)], false, p(5.0, 1.7), &[]);
    let gapped = Draft {
        id: "gapped".into(),
        description: "open border that leaves a gap past the table; integration must fail".into(),
        spawn,
        ground_truth: None,
        carpet: false,
        script: b.finish(ScriptFrame::World, &lab),
        expect: Expectations {
            min_jaccard: None,
            borders: Some(0),
            failure: Some("partition_failed".into()),
        },
        plans: vec![],
        max_time: 200.0,
    };
    write_json(&out.join("gapped.json"), &scenario(gapped, "maps"))?;

    // Rectangles with perimeters 4 m to 13 m sharing one corner.
    for perimeter in 4..=13 {
        let half = perimeter as f64 / 2.0;
        let w = (half * 0.615 * 20.0).round() / 20.0;
        let h = half - w;
        let r: Rect = ([0.7, 0.5], [0.7 + w, 0.5 + h]);
        let gt = format!("suite_{perimeter:02}_gt.pgm");
        save_map(
            &paint(&lab, &[r], CellValue::Occupied),
            out.join("maps").join(&gt),
        )?;
        let spawn = RobotPose::new(r.0[0] - 0.5, r.0[1], 0.0);
        let mut b = ScriptBuilder::new(spawn, timing, 0.5);
        b.teach_border(&rect_loop(&r), true, center(&r), &[]);
        let draft = Draft {
            id: format!("loop_{perimeter:02}m"),
            description: format!("{w:.2} m x {h:.2} m loop, {perimeter} m perimeter"),
            spawn,
            ground_truth: Some(gt),
            carpet: false,
            script: b.finish(ScriptFrame::World, &lab),
            expect: Expectations {
                min_jaccard: Some(0.85),
                borders: Some(1),
                failure: None,
            },
            plans: vec![],
            max_time: 400.0,
        };
        write_json(
            &out.join("suite").join(format!("loop_{perimeter:02}m.json")),
            &scenario(draft, "../maps"),
        )?;
    }
    Ok(())
}
