//! HTTP and WebSocket service running live teaching sessions.
//!
//! Maps are served from a directory of scenario files: each top-level
//! `*.json` scenario contributes its prior map, scene and spawn pose under
//! its scenario id. Routes:
//!
//! * `GET /maps` lists the maps.
//! * `POST /sessions` creates a session on a map and returns its id.
//! * `GET /sessions/{id}/posterior.pgm` returns the current posterior map.
//! * `GET /session/{id}` upgrades to the session WebSocket.

pub mod protocol;
mod session;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::serve::ListenerExt;
use axum::{Json, Router};
use borderforge::scenario::{load_scenario, LoadedScenario, ScenarioError};
use futures_util::{SinkExt, StreamExt};
use thiserror::Error;
use tokio::sync::mpsc;

use protocol::{
    ClientMessage, CreateSession, ErrorCode, ErrorMessage, MapInfo, Pace, ServerMessage,
    SessionInfo,
};
pub use session::{map_message, SessionHandle, MAX_STEP_TICKS};
use session::{spawn_session, Command};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("cannot read map directory {}: {source}", path.display())]
    Dir {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("no scenario files in {}", .0.display())]
    Empty(PathBuf),
    #[error("map id {id:?} is defined by both {} and {}", first.display(), second.display())]
    DuplicateId {
        id: String,
        first: PathBuf,
        second: PathBuf,
    },
}

/// Maps available to new sessions, keyed by scenario id.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    maps: BTreeMap<String, Arc<LoadedScenario>>,
}

impl Catalog {
    /// Loads every `*.json` scenario directly inside `dir`.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let dir = dir.as_ref();
        let entries = fs::read_dir(dir).map_err(|source| ServiceError::Dir {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut paths = Vec::new();
        for entry in entries {
            let path = entry
                .map_err(|source| ServiceError::Dir {
                    path: dir.to_path_buf(),
                    source,
                })?
                .path();
            if path.is_file() && path.extension().is_some_and(|e| e == "json") {
                paths.push(path);
            }
        }
        paths.sort();
        if paths.is_empty() {
            return Err(ServiceError::Empty(dir.to_path_buf()));
        }
        let mut catalog = Catalog::default();
        for path in paths {
            catalog.insert(load_scenario(&path)?)?;
        }
        Ok(catalog)
    }

    pub fn insert(&mut self, scenario: LoadedScenario) -> Result<(), ServiceError> {
        let id = scenario.file.id.clone();
        if let Some(first) = self.maps.get(&id) {
            return Err(ServiceError::DuplicateId {
                id,
                first: first.path.clone(),
                second: scenario.path,
            });
        }
        self.maps.insert(id, Arc::new(scenario));
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Arc<LoadedScenario>> {
        self.maps.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.maps.keys().map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServiceConfig {
    /// Pace of sessions whose creation request does not name one.
    pub default_pace: Pace,
    /// Ticks advanced by a `step` message without an explicit count.
    pub ticks_per_call: u32,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            default_pace: Pace::Realtime,
            ticks_per_call: 1,
        }
    }
}

#[derive(Clone)]
struct AppState {
    catalog: Arc<Catalog>,
    config: ServiceConfig,
    sessions: Arc<Mutex<HashMap<String, SessionHandle>>>,
    next_session: Arc<AtomicU64>,
    next_conn: Arc<AtomicU64>,
}

impl AppState {
    fn session(&self, id: &str) -> Option<SessionHandle> {
        self.sessions.lock().expect("session registry").get(id).cloned()
    }
}

pub fn router(catalog: Catalog, config: ServiceConfig) -> Router {
    let state = AppState {
        catalog: Arc::new(catalog),
        config,
        sessions: Arc::default(),
        next_session: Arc::new(AtomicU64::new(1)),
        next_conn: Arc::new(AtomicU64::new(1)),
    };
    Router::new()
        .route("/maps", get(list_maps))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/posterior.pgm", get(posterior_pgm))
        .route("/session/{id}", get(connect))
        .with_state(state)
}

/// Serves `router` on `listener` until the process stops. Nagle is off:
/// lockstep clients exchange one small frame per tick.
pub async fn serve(listener: tokio::net::TcpListener, router: Router) -> std::io::Result<()> {
    let listener = listener.tap_io(|tcp| {
        if let Err(e) = tcp.set_nodelay(true) {
            log::warn!("cannot disable Nagle: {e}");
        }
    });
    axum::serve(listener, router).await
}

fn error_response(status: StatusCode, code: ErrorCode, message: String) -> Response {
    (status, Json(ErrorMessage { code, message })).into_response()
}

async fn list_maps(State(state): State<AppState>) -> Json<Vec<MapInfo>> {
    let maps = state
        .catalog
        .maps
        .values()
        .map(|s| MapInfo {
            id: s.file.id.clone(),
            description: s.file.description.clone(),
            width: s.prior.width(),
            height: s.prior.height(),
            resolution: s.prior.resolution(),
            origin: s.prior.origin(),
            spawn: s.file.spawn,
        })
        .collect();
    Json(maps)
}

async fn create_session(
    State(state): State<AppState>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> Response {
    let req = match body {
        Ok(Json(req)) => req,
        Err(e) => {
            return error_response(StatusCode::BAD_REQUEST, ErrorCode::MalformedMessage, e.body_text())
        }
    };
    let Some(scenario) = state.catalog.get(&req.map).cloned() else {
        let known: Vec<_> = state.catalog.ids().collect();
        return error_response(
            StatusCode::NOT_FOUND,
            ErrorCode::UnknownMap,
            format!("unknown map {:?}; known maps: {}", req.map, known.join(", ")),
        );
    };
    let pace = req.pace.unwrap_or(state.config.default_pace);
    let seed = req.seed.unwrap_or(scenario.file.seed);
    let id = format!("s{}", state.next_session.fetch_add(1, Ordering::Relaxed));
    let info = SessionInfo {
        id: id.clone(),
        map: req.map,
        pace,
        dt: scenario.file.sim.dt,
        seed,
        spawn: scenario.file.spawn,
    };
    let handle = spawn_session(scenario, seed, pace, state.config.ticks_per_call);
    state
        .sessions
        .lock()
        .expect("session registry")
        .insert(id.clone(), handle);
    log::info!("session {id} on {} ({pace:?})", info.map);
    (StatusCode::CREATED, Json(info)).into_response()
}

async fn posterior_pgm(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Response {
    match state.session(&id) {
        Some(handle) => (
            [(header::CONTENT_TYPE, "image/x-portable-graymap")],
            handle.posterior().to_pgm_bytes(),
        )
            .into_response(),
        None => unknown_session(&id),
    }
}

fn unknown_session(id: &str) -> Response {
    error_response(
        StatusCode::NOT_FOUND,
        ErrorCode::UnknownSession,
        format!("unknown session {id:?}"),
    )
}

async fn connect(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    ws: WebSocketUpgrade,
) -> Response {
    let Some(handle) = state.session(&id) else {
        return unknown_session(&id);
    };
    let conn = state.next_conn.fetch_add(1, Ordering::Relaxed);
    ws.on_upgrade(move |socket| drive_connection(socket, handle, conn))
}

async fn drive_connection(socket: WebSocket, handle: SessionHandle, conn: u64) {
    let (mut sink, mut stream) = socket.split();
    let (outbox, mut inbox) = mpsc::unbounded_channel::<ServerMessage>();
    let closed = || ServerMessage::error(ErrorCode::SessionClosed, "session has stopped");
    if handle
        .commands
        .send(Command::Subscribe(conn, outbox.clone()))
        .is_err()
    {
        let _ = outbox.send(closed());
    }
    let writer = tokio::spawn(async move {
        while let Some(msg) = inbox.recv().await {
            let text = serde_json::to_string(&msg).expect("server messages serialize");
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
    });
    while let Some(Ok(frame)) = stream.next().await {
        let text = match frame {
            Message::Text(t) => t,
            Message::Binary(_) => {
                let _ = outbox.send(ServerMessage::error(
                    ErrorCode::MalformedMessage,
                    "binary frames are not accepted",
                ));
                continue;
            }
            Message::Close(_) => break,
            Message::Ping(_) | Message::Pong(_) => continue,
        };
        match serde_json::from_str::<ClientMessage>(text.as_str()) {
            Ok(msg) => {
                if handle.commands.send(Command::Client(conn, msg)).is_err() {
                    let _ = outbox.send(closed());
                }
            }
            Err(e) => {
                let _ = outbox.send(ServerMessage::error(ErrorCode::MalformedMessage, e.to_string()));
            }
        }
    }
    let _ = handle.commands.send(Command::Unsubscribe(conn));
    drop(outbox);
    let _ = writer.await;
}
