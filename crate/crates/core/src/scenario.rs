//! Scenario files and the scripted operator that drives a headless run: a
//! timed laser trajectory plus a sequence of events, each optionally gated on
//! a condition of the live simulation.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{CameraIntrinsics, CameraMount};
use crate::detect::DetectionParams;
use crate::fsm::{SessionConfig, TransitionEvent};
use crate::grid::{load_map, CellValue, GridError, OccupancyGrid, WorldPoint};
use crate::robot::{normalize_angle, ControllerParams, KinematicLimits, RobotPose};
use crate::scene::SceneSpec;
use crate::sim::{ControlInput, SimConfig, SimSetup, Simulation};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse scenario {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid scenario {path}: {reason}")]
    Invalid { path: PathBuf, reason: String },
    #[error(transparent)]
    Map(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraConfig {
    pub intrinsics: CameraIntrinsics,
    pub mount: CameraMount,
}

/// Coordinate frame of the laser waypoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptFrame {
    /// World meters.
    #[default]
    World,
    /// `[0, 1]²` over the prior map's extent.
    Normalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaserWaypoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    #[serde(default = "visible_default")]
    pub visible: bool,
}

fn visible_default() -> bool {
    true
}

/// Piecewise-linear laser trajectory. A segment starting at a visible
/// waypoint is interpolated towards the next one; a segment starting at an
/// invisible waypoint has the laser off. Before the first waypoint the laser
/// is off; after the last it keeps the last position and visibility.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LaserScript {
    #[serde(default)]
    pub frame: ScriptFrame,
    pub waypoints: Vec<LaserWaypoint>,
}

impl LaserScript {
    pub fn validate(&self) -> Result<(), String> {
        for (i, w) in self.waypoints.iter().enumerate() {
            if !(w.t.is_finite() && w.x.is_finite() && w.y.is_finite()) {
                return Err(format!("laser waypoint {i} is not finite"));
            }
        }
        if let Some(i) = self.waypoints.windows(2).position(|w| w[1].t < w[0].t) {
            return Err(format!("laser waypoint times decrease at index {}", i + 1));
        }
        Ok(())
    }

    /// Laser position at `t` in the script's own frame.
    pub fn position(&self, t: f64) -> Option<(f64, f64)> {
        let n = self.waypoints.partition_point(|w| w.t <= t);
        if n == 0 {
            return None;
        }
        let a = &self.waypoints[n - 1];
        if !a.visible {
            return None;
        }
        match self.waypoints.get(n) {
            None => Some((a.x, a.y)),
            Some(b) => {
                let s = (t - a.t) / (b.t - a.t);
                Some((a.x + s * (b.x - a.x), a.y + s * (b.y - a.y)))
            }
        }
    }

    /// Laser position at `t` in world meters.
    pub fn world_at(&self, t: f64, grid: &OccupancyGrid) -> Option<WorldPoint> {
        let (x, y) = self.position(t)?;
        Some(match self.frame {
            ScriptFrame::World => WorldPoint::new(x, y),
            ScriptFrame::Normalized => grid.normalized_to_world(x, y),
        })
    }

    pub fn end_time(&self) -> f64 {
        self.waypoints.last().map_or(0.0, |w| w.t)
    }
}

/// Gate on a scripted event. Coordinates are world meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// The robot has commanded near-zero motion for the settle window.
    RobotSettled,
    RobotNear {
        x: f64,
        y: f64,
        radius: f64,
    },
    /// The session's last observed laser point lies near the given point.
    KeepOffNear {
        x: f64,
        y: f64,
        radius: f64,
    },
}

impl Condition {
    pub fn holds(&self, sim: &Simulation) -> bool {
        match *self {
            Condition::RobotSettled => sim.is_settled(),
            Condition::RobotNear { x, y, radius } => {
                sim.pose().position().distance(&WorldPoint::new(x, y)) <= radius
            }
            Condition::KeepOffNear { x, y, radius } => sim
                .session()
                .last_laser_world()
                .is_some_and(|l| l.distance(&WorldPoint::new(x, y)) <= radius),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptAction {
    Next,
    Previous,
    Rotate { yaw: f64 },
    Face { x: f64, y: f64 },
    Reset,
}

impl ScriptAction {
    pub fn to_input(self) -> ControlInput {
        match self {
            ScriptAction::Next => ControlInput::Event {
                event: TransitionEvent::Next,
            },
            ScriptAction::Previous => ControlInput::Event {
                event: TransitionEvent::Previous,
            },
            ScriptAction::Rotate { yaw } => ControlInput::Rotate { target_yaw: yaw },
            ScriptAction::Face { x, y } => ControlInput::Face { x, y },
            ScriptAction::Reset => ControlInput::Reset,
        }
    }
}

/// Fires once, in script order, at the first tick at or after `at` on which
/// `when` holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScriptedEvent {
    pub at: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub when: Option<Condition>,
    pub action: ScriptAction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanExpectation {
    /// Before teaching the path crosses a keep-off area; afterwards a path
    /// exists and avoids all of them.
    Reroute,
    /// No path exists after teaching.
    NoPath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSpec {
    pub name: String,
    pub start: WorldPoint,
    pub goal: WorldPoint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<PlanExpectation>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Expectations {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_jaccard: Option<f64>,
    /// Number of borders that must be finalized.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub borders: Option<usize>,
    /// Failure kind that must occur; when absent no failure may occur.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// On-disk scenario. Map paths are relative to the scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub id: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub seed: u64,
    pub prior_map: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth_map: Option<PathBuf>,
    /// Map used for collisions; the prior when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub physical_map: Option<PathBuf>,
    #[serde(default)]
    pub scene: SceneSpec,
    #[serde(default)]
    pub camera: CameraConfig,
    #[serde(default)]
    pub controller: ControllerParams,
    #[serde(default)]
    pub limits: KinematicLimits,
    #[serde(default)]
    pub detection: DetectionParams,
    #[serde(default)]
    pub session: SessionConfig,
    #[serde(default)]
    pub sim: SimConfig,
    pub spawn: RobotPose,
    pub laser_script: LaserScript,
    #[serde(default)]
    pub event_script: Vec<ScriptedEvent>,
    #[serde(default)]
    pub expect: Expectations,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub plans: Vec<PlanSpec>,
}

impl ScenarioFile {
    /// Checks everything that does not need the maps.
    pub fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("id must not be empty".into());
        }
        self.scene.validate()?;
        self.camera.intrinsics.validate()?;
        self.camera.mount.validate()?;
        self.controller.validate()?;
        if !(self.limits.v_max > 0.0 && self.limits.omega_max > 0.0) {
            return Err("kinematic limits must be positive".into());
        }
        self.detection.validate()?;
        self.sim.validate()?;
        if !(self.session.record_spacing > 0.0) {
            return Err("record_spacing must be positive".into());
        }
        if !(self.session.integration.closure_threshold > 0.0) {
            return Err("closure_threshold must be positive".into());
        }
        self.laser_script.validate()?;
        if let Some(i) = self.event_script.iter().position(|e| !e.at.is_finite()) {
            return Err(format!("event {i} has a non-finite time"));
        }
        if let Some(i) = self.event_script.windows(2).position(|w| w[1].at < w[0].at) {
            return Err(format!("event times decrease at index {}", i + 1));
        }
        if let Some(j) = self.expect.min_jaccard {
            if !(0.0..=1.0).contains(&j) {
                return Err(format!("min_jaccard {j} outside [0, 1]"));
            }
        }
        Ok(())
    }
}

/// A parsed scenario together with its maps.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub path: PathBuf,
    pub file: ScenarioFile,
    pub prior: OccupancyGrid,
    pub ground_truth: Option<OccupancyGrid>,
    pub physical: Option<OccupancyGrid>,
}

impl LoadedScenario {
    /// Run seed: offsets the floor texture seed and seeds the pose noise.
    pub fn setup(&self, seed: u64, sim: SimConfig) -> SimSetup {
        let f = &self.file;
        let mut scene = f.scene.clone();
        scene.seed = scene.seed.wrapping_add(seed);
        SimSetup {
            prior: self.prior.clone(),
            physical: self.physical.clone(),
            scene,
            intrinsics: f.camera.intrinsics,
            mount: f.camera.mount,
            controller: f.controller,
            limits: f.limits,
            detection: f.detection.clone(),
            session: f.session.clone(),
            sim,
            spawn: f.spawn,
            seed,
        }
    }
}

pub fn parse_scenario(text: &str, path: &Path) -> Result<ScenarioFile, ScenarioError> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|source| ScenarioError::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    file.validate().map_err(|reason| ScenarioError::Invalid {
        path: path.to_path_buf(),
        reason,
    })?;
    Ok(file)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<LoadedScenario, ScenarioError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file = parse_scenario(&text, path)?;
    let dir = path.parent().unwrap_or(Path::new(""));
    let prior = load_map(dir.join(&file.prior_map))?;
    let load_optional = |p: &Option<PathBuf>| p.as_ref().map(|p| load_map(dir.join(p))).transpose();
    let ground_truth = load_optional(&file.ground_truth_map)?;
    let physical = load_optional(&file.physical_map)?;
    let invalid = |reason: String| ScenarioError::Invalid {
        path: path.to_path_buf(),
        reason,
    };
    for (name, map) in [("ground truth", &ground_truth), ("physical", &physical)] {
        if let Some(m) = map {
            if (m.width(), m.height()) != (prior.width(), prior.height()) {
                return Err(invalid(format!(
                    "{name} map is {}x{}, prior is {}x{}",
                    m.width(),
                    m.height(),
                    prior.width(),
                    prior.height()
                )));
            }
        }
    }
    let collide = physical.as_ref().unwrap_or(&prior);
    let spawn_ok = collide
        .world_to_cell(file.spawn.position())
        .is_ok_and(|c| collide.at(c) != CellValue::Occupied);
    if !spawn_ok {
        return Err(invalid(format!("spawn {:?} is not passable", file.spawn)));
    }
    Ok(LoadedScenario {
        path: path.to_path_buf(),
        file,
        prior,
        ground_truth,
        physical,
    })
}

/// Feeds a laser script and event script into a running simulation.
#[derive(Debug, Clone)]
pub struct ScriptRunner {
    laser: LaserScript,
    events: Vec<ScriptedEvent>,
    frame_map: OccupancyGrid,
    next_event: usize,
    last_laser: Option<Option<WorldPoint>>,
}

impl ScriptRunner {
    /// `frame_map` resolves normalized laser coordinates.
    pub fn new(laser: LaserScript, events: Vec<ScriptedEvent>, frame_map: OccupancyGrid) -> Self {
        Self {
            laser,
            events,
            frame_map,
            next_event: 0,
            last_laser: None,
        }
    }

    /// Enqueues the inputs due at the start of the simulation's next tick.
    pub fn before_tick(&mut self, sim: &mut Simulation) {
        let t = sim.time();
        let laser = self.laser.world_at(t, &self.frame_map);
        if self.last_laser != Some(laser) {
            sim.enqueue(ControlInput::SetLaser { point: laser });
            self.last_laser = Some(laser);
        }
        while let Some(e) = self.events.get(self.next_event) {
            if t + 1e-9 < e.at || !e.when.is_none_or(|c| c.holds(sim)) {
                break;
            }
            sim.enqueue(e.action.to_input());
            self.next_event += 1;
        }
    }

    /// All events have been handed to the simulation.
    pub fn finished(&self) -> bool {
        self.next_event >= self.events.len()
    }

    pub fn events_fired(&self) -> usize {
        self.next_event
    }
}

/// Pacing of a generated teaching script.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScriptTiming {
    /// Distance the spot is held ahead of the robot; should equal the
    /// controller's stop distance so the robot parks under the vertex.
    pub lead: f64,
    pub edge_speed: f64,
    pub arc_speed: f64,
    pub approach_speed: f64,
    /// Hold at each vertex before swinging the spot round it (s).
    pub corner_wait: f64,
    /// Hold at the start vertex before the first edge (s).
    pub start_wait: f64,
    /// Hold at the end vertex before the spot is switched off (s).
    pub end_wait: f64,
    /// Spot off-time while the robot turns towards the keep-off point (s).
    pub look_delay: f64,
    /// Earliest delay from parking to a confirming event (s).
    pub confirm_delay: f64,
    /// Pause between a finalizing event and the next approach (s).
    pub resume_delay: f64,
    pub keep_off_radius: f64,
    /// Straight run-in before the start vertex (m).
    pub run_in: f64,
}

impl Default for ScriptTiming {
    fn default() -> Self {
        Self {
            lead: 0.4,
            edge_speed: 0.12,
            arc_speed: 0.15,
            approach_speed: 0.15,
            corner_wait: 3.0,
            start_wait: 6.0,
            end_wait: 6.0,
            look_delay: 5.0,
            confirm_delay: 1.0,
            resume_delay: 8.0,
            keep_off_radius: 0.05,
            run_in: 0.5,
        }
    }
}

/// Planned timeline of one border.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BorderPlan {
    /// Earliest time of the event entering Record.
    pub record_from: f64,
    /// Earliest time of the event leaving Record.
    pub record_until: f64,
    /// Length of the vertex path (m).
    pub path_length: f64,
}

/// Generates laser and event scripts that make the closed loop trace given
/// vertex paths: the spot runs `lead` ahead of the desired robot position,
/// parks past each vertex and swings round it so the robot turns in place.
#[derive(Debug, Clone)]
pub struct ScriptBuilder {
    timing: ScriptTiming,
    t: f64,
    robot: RobotPose,
    laser: Option<WorldPoint>,
    waypoints: Vec<LaserWaypoint>,
    events: Vec<ScriptedEvent>,
}

const ARC_STEP: f64 = 0.08;

impl ScriptBuilder {
    /// `start` is the first scripted time; the robot is assumed at `spawn`.
    pub fn new(spawn: RobotPose, timing: ScriptTiming, start: f64) -> Self {
        Self {
            timing,
            t: start,
            robot: spawn,
            laser: None,
            waypoints: Vec::new(),
            events: Vec::new(),
        }
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    fn point(&mut self, p: WorldPoint, visible: bool) {
        self.waypoints.push(LaserWaypoint {
            t: self.t,
            x: p.x,
            y: p.y,
            visible,
        });
        self.laser = visible.then_some(p);
    }

    fn show(&mut self, p: WorldPoint) {
        if self.laser != Some(p) {
            self.point(p, true);
        }
    }

    fn wait(&mut self, d: f64) {
        self.t += d;
        if let Some(p) = self.laser {
            self.point(p, true);
        }
    }

    fn off(&mut self) {
        if let Some(p) = self.laser {
            self.point(p, false);
        }
    }

    fn move_to(&mut self, p: WorldPoint, speed: f64) {
        let from = self.laser.expect("spot is on while moving");
        self.t += from.distance(&p) / speed;
        self.point(p, true);
    }

    fn ahead(&self, at: WorldPoint, heading: f64) -> WorldPoint {
        WorldPoint::new(
            at.x + self.timing.lead * heading.cos(),
            at.y + self.timing.lead * heading.sin(),
        )
    }

    /// Swings the spot round `center` from the robot's heading to `heading`.
    fn arc(&mut self, center: WorldPoint, heading: f64) {
        let turn = normalize_angle(heading - self.robot.theta);
        let steps = (turn.abs() / ARC_STEP).ceil().max(1.0) as usize;
        let dt = self.timing.lead * turn.abs() / self.timing.arc_speed / steps as f64;
        for k in 1..=steps {
            self.t += dt;
            let a = self.robot.theta + turn * k as f64 / steps as f64;
            let p = self.ahead(center, a);
            self.point(p, true);
        }
        self.robot = RobotPose::new(center.x, center.y, heading);
    }

    /// Leads the robot along `path` (starting at its current position).
    fn drive(&mut self, path: &[WorldPoint], speed: f64) {
        for pair in path.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if a.distance(&b) < 1e-9 {
                continue;
            }
            let heading = (b.y - a.y).atan2(b.x - a.x);
            if normalize_angle(heading - self.robot.theta).abs() > 1e-6 {
                self.wait(self.timing.corner_wait);
                self.arc(a, heading);
            }
            let target = self.ahead(b, heading);
            self.move_to(target, speed);
            self.robot = RobotPose::new(b.x, b.y, heading);
        }
    }

    /// Scripts one border: approach through `vias` to the first vertex, Next,
    /// trace the vertices (back to the first when `closed`), Next, turn to and
    /// point at `l_star`, Next.
    pub fn teach_border(
        &mut self,
        vertices: &[WorldPoint],
        closed: bool,
        l_star: WorldPoint,
        vias: &[WorldPoint],
    ) -> BorderPlan {
        assert!(vertices.len() >= 2, "a border needs two vertices");
        let tm = self.timing;
        let start = vertices[0];
        let d1 = (vertices[1].y - start.y).atan2(vertices[1].x - start.x);
        let run_in = WorldPoint::new(
            start.x - tm.run_in * d1.cos(),
            start.y - tm.run_in * d1.sin(),
        );

        let here = self.robot.position();
        let mut approach = vec![here];
        approach.extend_from_slice(vias);
        let last = *approach.last().expect("nonempty");
        let aligned = {
            let dir = (start.y - last.y).atan2(start.x - last.x);
            last.distance(&start) > 1e-9 && normalize_angle(dir - d1).abs() < 1e-6
        };
        if !aligned {
            approach.push(run_in);
        }
        approach.push(start);
        let spot = self.ahead(here, self.robot.theta);
        self.show(spot);
        self.drive(&approach, tm.approach_speed);
        if normalize_angle(d1 - self.robot.theta).abs() > 1e-6 {
            self.wait(tm.corner_wait);
            self.arc(start, d1);
        }

        let record_from = self.t + tm.confirm_delay;
        self.events.push(ScriptedEvent {
            at: record_from,
            when: Some(Condition::RobotSettled),
            action: ScriptAction::Next,
        });
        self.wait(tm.start_wait);

        let mut path = vertices.to_vec();
        if closed {
            path.push(start);
        }
        let path_length: f64 = path.windows(2).map(|w| w[0].distance(&w[1])).sum();
        self.drive(&path, tm.edge_speed);

        let record_until = self.t + tm.confirm_delay;
        self.events.push(ScriptedEvent {
            at: record_until,
            when: Some(Condition::RobotSettled),
            action: ScriptAction::Next,
        });
        self.wait(tm.end_wait);
        self.off();
        self.events.push(ScriptedEvent {
            at: self.t,
            when: None,
            action: ScriptAction::Face {
                x: l_star.x,
                y: l_star.y,
            },
        });
        self.t += tm.look_delay;
        self.point(l_star, true);
        self.events.push(ScriptedEvent {
            at: self.t,
            when: Some(Condition::KeepOffNear {
                x: l_star.x,
                y: l_star.y,
                radius: tm.keep_off_radius,
            }),
            action: ScriptAction::Next,
        });

        // Back in Start the robot drives up to the spot and stops `lead` short.
        let end = self.robot.position();
        let face = (l_star.y - end.y).atan2(l_star.x - end.x);
        let reach = (end.distance(&l_star) - tm.lead).max(0.0);
        self.robot = RobotPose::new(end.x + reach * face.cos(), end.y + reach * face.sin(), face);
        self.wait(tm.resume_delay);
        BorderPlan {
            record_from,
            record_until,
            path_length,
        }
    }

    pub fn finish(
        self,
        frame: ScriptFrame,
        grid: &OccupancyGrid,
    ) -> (LaserScript, Vec<ScriptedEvent>) {
        let waypoints = match frame {
            ScriptFrame::World => self.waypoints,
            ScriptFrame::Normalized => self
                .waypoints
                .into_iter()
                .map(|w| {
                    let (x, y) = grid.world_to_normalized(WorldPoint::new(w.x, w.y));
                    LaserWaypoint { x, y, ..w }
                })
                .collect(),
        };
        (LaserScript { frame, waypoints }, self.events)
    }
}
