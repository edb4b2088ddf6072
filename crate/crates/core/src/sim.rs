//! Closed-loop simulation: per tick the queued inputs are applied, a frame is
//! rendered and searched for the laser, the session observes the result and
//! the robot moves.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::camera::{CameraIntrinsics, CameraMount, CameraPose};
use crate::detect::{detect_laser_point, DetectionParams};
use crate::fsm::{
    BorderRecord, DriveMode, EventOutcome, FeedbackEvent, Finalized, LedColor, SessionConfig,
    TeachingSession, TeachingState, TransitionEvent,
};
use crate::grid::{CellValue, OccupancyGrid, WorldPoint};
use crate::projection::{camera_to_floor, inverse_project, PixelCoord};
use crate::robot::{
    follow_command, normalize_angle, rotate_command, step, ControllerParams, KinematicLimits,
    RobotPose, VelocityCommand,
};
use crate::scene::{RenderedFrame, Renderer, SceneSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub dt: f64,
    /// Hard stop for scripted runs (simulated s).
    pub max_time: f64,
    /// How long the last command is held after the spot is lost (s).
    pub spot_lost_hold: f64,
    /// Standard deviation of the localization error on x and y (m).
    pub pose_noise: f64,
    /// The robot counts as settled after commanding near-zero motion this long (s).
    pub settle_window: f64,
    pub settle_speed: f64,
    pub settle_turn_rate: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.05,
            max_time: 900.0,
            spot_lost_hold: 0.5,
            pose_noise: 0.0,
            settle_window: 0.5,
            settle_speed: 0.01,
            settle_turn_rate: 0.02,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.pose_noise >= 0.0) {
            return Err("pose_noise must be non-negative".into());
        }
        Ok(())
    }
}

/// External input, applied at the start of the next tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControlInput {
    SetLaser {
        point: Option<WorldPoint>,
    },
    Event {
        event: TransitionEvent,
    },
    /// Absolute heading target for the KeepOff rotation.
    Rotate {
        target_yaw: f64,
    },
    /// Heading target pointing from the robot at a world point.
    Face {
        x: f64,
        y: f64,
    },
    Reset,
}

#[derive(Debug, Clone)]
pub struct SimSetup {
    pub prior: OccupancyGrid,
    /// Map used for collisions; the prior when absent.
    pub physical: Option<OccupancyGrid>,
    pub scene: SceneSpec,
    pub intrinsics: CameraIntrinsics,
    pub mount: CameraMount,
    pub controller: ControllerParams,
    pub limits: KinematicLimits,
    pub detection: DetectionParams,
    pub session: SessionConfig,
    pub sim: SimConfig,
    pub spawn: RobotPose,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub pixel: PixelCoord,
    /// Floor point of the detection; absent when it did not back-project onto the floor.
    pub world: Option<WorldPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum InputResult {
    Applied,
    Unchanged,
    Changed {
        from: TeachingState,
        to: TeachingState,
    },
    Finalized {
        border: Box<BorderRecord>,
    },
    Failed {
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppliedInput {
    pub input: ControlInput,
    #[serde(flatten)]
    pub result: InputResult,
}

/// One line of the session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u64,
    /// Simulated time at the end of the tick (s).
    pub time: f64,
    pub pose: RobotPose,
    pub state: TeachingState,
    pub led: LedColor,
    /// Laser position in the scene.
    pub laser: Option<WorldPoint>,
    pub detection: Option<Detection>,
    pub command: VelocityCommand,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub inputs: Vec<AppliedInput>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub feedback: Vec<FeedbackEvent>,
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub collided: bool,
}

pub struct Simulation {
    session: TeachingSession,
    physical: OccupancyGrid,
    renderer: Renderer,
    intrinsics: CameraIntrinsics,
    mount: CameraMount,
    controller: ControllerParams,
    limits: KinematicLimits,
    detection: DetectionParams,
    config: SimConfig,
    rng: ChaCha8Rng,
    noise: Option<Normal<f64>>,
    pose: RobotPose,
    tick: u64,
    frame: RenderedFrame,
    laser: Option<WorldPoint>,
    rotate_target: Option<f64>,
    last_command: VelocityCommand,
    last_seen: Option<f64>,
    settled_since: Option<f64>,
    queue: VecDeque<ControlInput>,
    finalized: Vec<Finalized>,
    failures: Vec<FailureRecord>,
    collisions: usize,
}

/// A finalization that did not succeed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub time: f64,
    pub kind: String,
    pub message: String,
}

impl Simulation {
    pub fn new(setup: SimSetup) -> Self {
        let physical = setup.physical.unwrap_or_else(|| setup.prior.clone());
        let noise = (setup.sim.pose_noise > 0.0)
            .then(|| Normal::new(0.0, setup.sim.pose_noise).expect("validated noise level"));
        Self {
            session: TeachingSession::new(setup.prior, setup.session),
            physical,
            renderer: Renderer::new(&setup.scene),
            intrinsics: setup.intrinsics,
            mount: setup.mount,
            controller: setup.controller,
            limits: setup.limits,
            detection: setup.detection,
            config: setup.sim,
            rng: ChaCha8Rng::seed_from_u64(setup.seed),
            noise,
            pose: setup.spawn,
            tick: 0,
            frame: RenderedFrame::new(setup.intrinsics.width, setup.intrinsics.height),
            laser: None,
            rotate_target: None,
            last_command: VelocityCommand::ZERO,
            last_seen: None,
            settled_since: None,
            queue: VecDeque::new(),
            finalized: Vec::new(),
            failures: Vec::new(),
            collisions: 0,
        }
    }

    pub fn enqueue(&mut self, input: ControlInput) {
        self.queue.push_back(input);
    }

    /// Simulated time at the start of the next tick.
    pub fn time(&self) -> f64 {
        self.tick as f64 * self.config.dt
    }

    pub fn tick_index(&self) -> u64 {
        self.tick
    }

    pub fn pose(&self) -> RobotPose {
        self.pose
    }

    pub fn laser(&self) -> Option<WorldPoint> {
        self.laser
    }

    pub fn session(&self) -> &TeachingSession {
        &self.session
    }

    pub fn map(&self) -> &OccupancyGrid {
        self.session.map()
    }

    pub fn physical_map(&self) -> &OccupancyGrid {
        &self.physical
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn finalized(&self) -> &[Finalized] {
        &self.finalized
    }

    pub fn failures(&self) -> &[FailureRecord] {
        &self.failures
    }

    pub fn collisions(&self) -> usize {
        self.collisions
    }

    pub fn last_frame(&self) -> &RenderedFrame {
        &self.frame
    }

    pub fn is_settled(&self) -> bool {
        self.settled_since
            .is_some_and(|s| self.time() - s >= self.config.settle_window - 1e-9)
    }

    fn apply(&mut self, input: ControlInput) -> InputResult {
        match &input {
            ControlInput::SetLaser { point } => {
                self.laser = *point;
                InputResult::Applied
            }
            ControlInput::Rotate { target_yaw } => {
                self.rotate_target = Some(normalize_angle(*target_yaw));
                InputResult::Applied
            }
            ControlInput::Face { x, y } => {
                self.rotate_target = Some((y - self.pose.y).atan2(x - self.pose.x));
                InputResult::Applied
            }
            ControlInput::Reset => {
                self.rotate_target = None;
                outcome_result(self.session.reset())
            }
            ControlInput::Event { event } => {
                let before = self.session.state();
                match self.session.handle_event(*event) {
                    Ok(outcome) => {
                        if self.session.state() != before {
                            self.rotate_target = None;
                        }
                        if let EventOutcome::Finalized(done) = &outcome {
                            log::info!(
                                "border {} finalized: {:?}, {:.2} m, {:.2} s",
                                done.record.index,
                                done.record.summary.kind,
                                done.record.border_length,
                                done.record.teaching_time
                            );
                            self.finalized.push((**done).clone());
                        }
                        outcome_result(outcome)
                    }
                    Err(err) => {
                        log::warn!("t={:.2}: {err}", self.time());
                        self.failures.push(FailureRecord {
                            time: self.time(),
                            kind: err.0.kind().to_string(),
                            message: err.to_string(),
                        });
                        InputResult::Failed {
                            message: err.to_string(),
                        }
                    }
                }
            }
        }
    }

    /// Localization estimate handed to the session and the projection.
    fn estimated_pose(&mut self) -> RobotPose {
        match &self.noise {
            None => self.pose,
            Some(n) => {
                let (dx, dy) = (n.sample(&mut self.rng), n.sample(&mut self.rng));
                RobotPose::new(self.pose.x + dx, self.pose.y + dy, self.pose.theta)
            }
        }
    }

    pub fn step(&mut self) -> TickRecord {
        let now = self.time();
        self.session.set_time(now);
        let feedback_before = self.session.feedback().len();
        let mut inputs = Vec::new();
        while let Some(input) = self.queue.pop_front() {
            let result = self.apply(input.clone());
            inputs.push(AppliedInput { input, result });
        }

        let camera = CameraPose::from_robot(&self.pose, &self.mount);
        self.renderer
            .render_into(&mut self.frame, self.laser, &self.intrinsics, &camera);
        let estimate = self.estimated_pose();
        let mut follow = None;
        let detection = detect_laser_point(&self.frame, &self.detection).and_then(|pixel| {
            let depth = self.frame.sample_depth(pixel)?;
            let point = inverse_project(pixel, depth, &self.intrinsics).ok()?;
            let est_camera = CameraPose::from_robot(&estimate, &self.mount);
            let world = camera_to_floor(&point, &est_camera).ok();
            if world.is_some() {
                follow = Some(point);
            }
            Some(Detection { pixel, world })
        });
        let seen = detection.as_ref().and_then(|d| d.world);
        self.session.tick(estimate, seen, now);

        let command = match self.session.drive_mode() {
            DriveMode::Follow => match follow {
                Some(p) => {
                    self.last_seen = Some(now);
                    follow_command(&p, &self.mount, &self.controller, &self.limits)
                }
                None => match self.last_seen {
                    Some(t) if now - t <= self.config.spot_lost_hold + 1e-9 => self.last_command,
                    _ => VelocityCommand::ZERO,
                },
            },
            DriveMode::Rotate => {
                self.last_seen = None;
                match self.rotate_target {
                    Some(yaw) => {
                        rotate_command(yaw, &self.pose, self.controller.k_theta, &self.limits)
                    }
                    None => VelocityCommand::ZERO,
                }
            }
        };
        self.last_command = command;
        if command.v.abs() < self.config.settle_speed
            && command.omega.abs() < self.config.settle_turn_rate
        {
            self.settled_since.get_or_insert(now);
        } else {
            self.settled_since = None;
        }

        let next = step(&self.pose, command, self.config.dt);
        let collided = !self.is_passable(next.position());
        if collided {
            self.collisions += 1;
        } else {
            self.pose = next;
        }
        self.tick += 1;

        TickRecord {
            tick: self.tick - 1,
            time: self.time(),
            pose: self.pose,
            state: self.session.state(),
            led: self.session.state().led(),
            laser: self.laser,
            detection,
            command,
            inputs,
            feedback: self.session.feedback()[feedback_before..].to_vec(),
            collided,
        }
    }

    fn is_passable(&self, p: WorldPoint) -> bool {
        self.physical
            .world_to_cell(p)
            .is_ok_and(|c| self.physical.at(c) != CellValue::Occupied)
    }
}

fn outcome_result(outcome: EventOutcome) -> InputResult {
    match outcome {
        EventOutcome::Unchanged => InputResult::Unchanged,
        EventOutcome::Changed { from, to } => InputResult::Changed { from, to },
        EventOutcome::Finalized(done) => InputResult::Finalized {
            border: Box::new(done.record),
        },
    }
}
