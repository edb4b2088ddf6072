//! Teaching session state machine: Start → Record → KeepOff → (finalize) → Start,
//! with Previous stepping back one state and discarding what the abandoned
//! state produced.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::border::{
    border_length, integrate_border, BorderError, IntegrationParams, IntegrationSummary,
    PartitionResult,
};
use crate::grid::{OccupancyGrid, WorldPoint};
use crate::robot::{PoseHistory, RobotPose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeachingState {
    Start,
    Record,
    KeepOff,
}

impl TeachingState {
    pub fn led(self) -> LedColor {
        match self {
            TeachingState::Start => LedColor::Green,
            TeachingState::Record => LedColor::Red,
            TeachingState::KeepOff => LedColor::Blue,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionEvent {
    Next,
    Previous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LedColor {
    Green,
    Red,
    Blue,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEvent {
    pub time: f64,
    pub state: TeachingState,
    pub led: LedColor,
    pub beep: bool,
}

/// How the robot moves in the current state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriveMode {
    Follow,
    Rotate,
}

#[derive(Debug, Error)]
pub enum FinalizeError {
    #[error("need at least 2 recorded poses, have {count}")]
    InsufficientHistory { count: usize },
    #[error("no laser point was observed to mark the keep-off side")]
    NoKeepOffPoint,
    #[error(transparent)]
    Border(#[from] BorderError),
}

impl FinalizeError {
    /// Stable snake_case identifier of the failure.
    pub fn kind(&self) -> &'static str {
        match self {
            FinalizeError::InsufficientHistory { .. } => "insufficient_history",
            FinalizeError::NoKeepOffPoint => "no_keep_off_point",
            FinalizeError::Border(b) => match b {
                BorderError::DegenerateChain { .. } => "degenerate_chain",
                BorderError::ExtensionFailed => "extension_failed",
                BorderError::VertexOutOfBounds(_) => "vertex_out_of_bounds",
                BorderError::InvalidSeed(_) => "invalid_seed",
                BorderError::PartitionFailed => "partition_failed",
                BorderError::Grid(_) => "grid",
            },
        }
    }
}

#[derive(Debug, Error)]
#[error("finalization failed: {0}")]
pub struct FinalizeFailed(#[from] pub FinalizeError);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    /// Minimum robot displacement between recorded poses (m).
    pub record_spacing: f64,
    pub integration: IntegrationParams,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            record_spacing: 0.025,
            integration: IntegrationParams::default(),
        }
    }
}

/// One finished border.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BorderRecord {
    pub index: usize,
    pub record_start: f64,
    pub record_end: f64,
    /// Time spent in Record (s).
    pub teaching_time: f64,
    pub border_length: f64,
    pub l_star: WorldPoint,
    pub recorded_poses: usize,
    pub summary: IntegrationSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Finalized {
    pub record: BorderRecord,
    pub posterior: OccupancyGrid,
    pub partition: PartitionResult,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventOutcome {
    Unchanged,
    Changed {
        from: TeachingState,
        to: TeachingState,
    },
    Finalized(Box<Finalized>),
}

/// Everything about a session except its clock and feedback log.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSession {
    pub state: TeachingState,
    pub recorded: PoseHistory,
    pub last_laser_world: Option<WorldPoint>,
    pub record_start: Option<f64>,
    pub record_end: Option<f64>,
    pub map: OccupancyGrid,
    pub borders: Vec<BorderRecord>,
}

#[derive(Debug, Clone)]
pub struct TeachingSession {
    state: TeachingState,
    recorded: PoseHistory,
    last_laser_world: Option<WorldPoint>,
    record_start: Option<f64>,
    record_end: Option<f64>,
    feedback: Vec<FeedbackEvent>,
    now: f64,
    last_pose: Option<RobotPose>,
    map: OccupancyGrid,
    borders: Vec<BorderRecord>,
    config: SessionConfig,
    /// L* when Record and KeepOff were last entered; restored by Previous.
    laser_at_record_entry: Option<WorldPoint>,
    laser_at_keep_off_entry: Option<WorldPoint>,
}

impl TeachingSession {
    pub fn new(prior: OccupancyGrid, config: SessionConfig) -> Self {
        Self {
            state: TeachingState::Start,
            recorded: PoseHistory::new(),
            last_laser_world: None,
            record_start: None,
            record_end: None,
            feedback: Vec::new(),
            now: 0.0,
            last_pose: None,
            map: prior,
            borders: Vec::new(),
            config,
            laser_at_record_entry: None,
            laser_at_keep_off_entry: None,
        }
    }

    pub fn state(&self) -> TeachingState {
        self.state
    }

    pub fn recorded(&self) -> &PoseHistory {
        &self.recorded
    }

    pub fn last_laser_world(&self) -> Option<WorldPoint> {
        self.last_laser_world
    }

    pub fn record_start(&self) -> Option<f64> {
        self.record_start
    }

    pub fn record_end(&self) -> Option<f64> {
        self.record_end
    }

    pub fn feedback(&self) -> &[FeedbackEvent] {
        &self.feedback
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    /// Current map: the prior with every finalized border integrated.
    pub fn map(&self) -> &OccupancyGrid {
        &self.map
    }

    pub fn borders(&self) -> &[BorderRecord] {
        &self.borders
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn drive_mode(&self) -> DriveMode {
        match self.state {
            TeachingState::Start | TeachingState::Record => DriveMode::Follow,
            TeachingState::KeepOff => DriveMode::Rotate,
        }
    }

    pub fn observable(&self) -> ObservableSession {
        ObservableSession {
            state: self.state,
            recorded: self.recorded.clone(),
            last_laser_world: self.last_laser_world,
            record_start: self.record_start,
            record_end: self.record_end,
            map: self.map.clone(),
            borders: self.borders.clone(),
        }
    }

    /// Advances the clock without observing anything.
    pub fn set_time(&mut self, now: f64) {
        self.now = self.now.max(now);
    }

    fn enter(&mut self, to: TeachingState) -> EventOutcome {
        let from = self.state;
        self.state = to;
        self.feedback.push(FeedbackEvent {
            time: self.now,
            state: to,
            led: to.led(),
            beep: true,
        });
        EventOutcome::Changed { from, to }
    }

    pub fn handle_event(&mut self, ev: TransitionEvent) -> Result<EventOutcome, FinalizeFailed> {
        use TeachingState::*;
        use TransitionEvent::*;
        match (self.state, ev) {
            (Start, Next) => {
                self.record_start = Some(self.now);
                self.laser_at_record_entry = self.last_laser_world;
                self.recorded.clear();
                if let Some(pose) = self.last_pose {
                    self.recorded
                        .push(self.now, pose)
                        .expect("history is empty on Record entry");
                }
                Ok(self.enter(Record))
            }
            (Record, Next) => {
                self.record_end = Some(self.now);
                self.laser_at_keep_off_entry = self.last_laser_world;
                Ok(self.enter(KeepOff))
            }
            (KeepOff, Next) => {
                let done = self.finalize_session(&self.map)?;
                self.map = done.posterior.clone();
                self.borders.push(done.record.clone());
                self.clear_border_data();
                self.enter(Start);
                Ok(EventOutcome::Finalized(Box::new(done)))
            }
            (Start, Previous) => Ok(EventOutcome::Unchanged),
            (Record, Previous) => {
                self.last_laser_world = self.laser_at_record_entry;
                self.clear_border_data();
                Ok(self.enter(Start))
            }
            (KeepOff, Previous) => {
                self.last_laser_world = self.laser_at_keep_off_entry;
                self.record_end = None;
                Ok(self.enter(Record))
            }
        }
    }

    fn clear_border_data(&mut self) {
        self.recorded.clear();
        self.record_start = None;
        self.record_end = None;
    }

    /// Abandons the border in progress and returns to Start.
    pub fn reset(&mut self) -> EventOutcome {
        match self.state {
            TeachingState::Start => EventOutcome::Unchanged,
            TeachingState::Record => {
                self.last_laser_world = self.laser_at_record_entry;
                self.clear_border_data();
                self.enter(TeachingState::Start)
            }
            TeachingState::KeepOff => {
                self.last_laser_world = self.laser_at_record_entry;
                self.clear_border_data();
                self.enter(TeachingState::Start)
            }
        }
    }

    /// Per-step observation: updates L* in every state and records the pose
    /// in Record once the robot moved at least `record_spacing`.
    pub fn tick(&mut self, pose: RobotPose, laser_world: Option<WorldPoint>, now: f64) {
        self.set_time(now);
        if let Some(l) = laser_world {
            self.last_laser_world = Some(l);
        }
        self.last_pose = Some(pose);
        if self.state != TeachingState::Record {
            return;
        }
        let due = match self.recorded.last() {
            None => true,
            Some(&(t, last)) => {
                t < self.now
                    && last.position().distance(&pose.position()) >= self.config.record_spacing
            }
        };
        if due {
            self.recorded
                .push(self.now, pose)
                .expect("recording time is strictly increasing");
        }
    }

    /// Integrates the recorded border into `prior`.
    pub fn finalize_session(&self, prior: &OccupancyGrid) -> Result<Finalized, FinalizeError> {
        if self.recorded.len() < 2 {
            return Err(FinalizeError::InsufficientHistory {
                count: self.recorded.len(),
            });
        }
        let l_star = self.last_laser_world.ok_or(FinalizeError::NoKeepOffPoint)?;
        let integration =
            integrate_border(prior, &self.recorded, l_star, &self.config.integration)?;
        let record_start = self.record_start.unwrap_or(0.0);
        let record_end = self.record_end.unwrap_or(self.now);
        let summary = integration.summary;
        let record = BorderRecord {
            index: self.borders.len(),
            record_start,
            record_end,
            teaching_time: record_end - record_start,
            border_length: border_length(&summary.chain, summary.kind),
            l_star,
            recorded_poses: self.recorded.len(),
            summary,
        };
        Ok(Finalized {
            record,
            posterior: integration.posterior,
            partition: integration.partition,
        })
    }

    /// Structural invariants; `Err` names the first violation.
    pub fn check_consistency(&self) -> Result<(), String> {
        match self.state {
            TeachingState::Start => {
                if !self.recorded.is_empty()
                    || self.record_start.is_some()
                    || self.record_end.is_some()
                {
                    return Err("Start must not carry recording data".into());
                }
            }
            TeachingState::Record => {
                if self.record_start.is_none() || self.record_end.is_some() {
                    return Err("Record needs a start time and no end time".into());
                }
            }
            TeachingState::KeepOff => {
                let (Some(s), Some(e)) = (self.record_start, self.record_end) else {
                    return Err("KeepOff needs both recording times".into());
                };
                if e < s {
                    return Err(format!("record_end {e} before record_start {s}"));
                }
            }
        }
        if let Some(s) = self.record_start {
            let end = self.record_end.unwrap_or(self.now);
            if let Some(&(t, _)) = self
                .recorded
                .samples()
                .iter()
                .find(|(t, _)| *t < s || *t > end)
            {
                return Err(format!("recorded sample at {t} outside [{s}, {end}]"));
            }
        }
        if self.feedback.windows(2).any(|w| w[1].time < w[0].time) {
            return Err("feedback log is not time-ordered".into());
        }
        if let Some(last) = self.feedback.last() {
            if last.state != self.state || last.led != self.state.led() {
                return Err("last feedback event does not match the state".into());
            }
        }
        Ok(())
    }
}
