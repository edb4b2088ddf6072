//! JSON messages exchanged over the session WebSocket. Every message is an
//! object whose `type` field names the variant.

use borderforge::eval::ScenarioReport;
use borderforge::fsm::{LedColor, TeachingState, TransitionEvent};
use borderforge::grid::{MapOrigin, WorldPoint};
use borderforge::robot::RobotPose;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pace {
    /// The server advances one tick per `dt` of wall-clock time.
    #[default]
    Realtime,
    /// Time advances only on `step` messages.
    Lockstep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Prior,
    #[default]
    Posterior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    /// Pointer position in normalized map coordinates, `[0, 1]` on both
    /// axes from the map origin. `off: true` with no coordinates switches
    /// the pointer off.
    SetLaser {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x_norm: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        y_norm: Option<f64>,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        off: bool,
    },
    Event {
        event: TransitionEvent,
    },
    Rotate {
        target_yaw: f64,
    },
    // Braced so that unknown fields are rejected like on every other message.
    Reset {},
    RequestMap {
        #[serde(default)]
        which: MapKind,
    },
    /// Lockstep only. Without `ticks` the service default applies.
    Step {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ticks: Option<u32>,
    },
}

impl ClientMessage {
    pub fn laser_at(x_norm: f64, y_norm: f64) -> Self {
        ClientMessage::SetLaser {
            x_norm: Some(x_norm),
            y_norm: Some(y_norm),
            off: false,
        }
    }

    pub fn laser_off() -> Self {
        ClientMessage::SetLaser {
            x_norm: None,
            y_norm: None,
            off: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickMessage {
    pub tick: u64,
    /// Simulated time at the end of the tick (s).
    pub time: f64,
    pub pose: RobotPose,
    pub state: TeachingState,
    /// Floor point of this tick's laser detection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub laser_world: Option<WorldPoint>,
    pub led: LedColor,
    /// Present when a state transition during this tick sounded the beeper.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beep: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapMessage {
    pub which: MapKind,
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: MapOrigin,
    /// Binary PGM, base64 encoded.
    pub pgm_base64: String,
    /// Map metadata in the YAML-like sidecar format.
    pub meta: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// Not valid JSON or not a known message.
    MalformedMessage,
    /// Well-formed but unusable, such as coordinates outside `[0, 1]`.
    InvalidMessage,
    UnknownMap,
    UnknownSession,
    /// `step` sent to a realtime session.
    NotLockstep,
    /// The session reached its time limit.
    SessionClosed,
    /// A Next in KeepOff could not finalize the border.
    FinalizeFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMessage {
    pub code: ErrorCode,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Tick(TickMessage),
    Map(MapMessage),
    Report { report: Box<ScenarioReport> },
    Error(ErrorMessage),
}

impl ServerMessage {
    pub fn error(code: ErrorCode, message: impl Into<String>) -> Self {
        ServerMessage::Error(ErrorMessage {
            code,
            message: message.into(),
        })
    }
}

/// Body of `POST /sessions`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub map: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pace: Option<Pace>,
    /// Defaults to the map's scenario seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub id: String,
    pub map: String,
    pub pace: Pace,
    pub dt: f64,
    pub seed: u64,
    pub spawn: RobotPose,
}

/// Entry of `GET /maps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapInfo {
    pub id: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: MapOrigin,
    pub spawn: RobotPose,
}
