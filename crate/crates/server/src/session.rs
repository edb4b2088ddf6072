//! One simulation per session, owned by a task that serializes every input
//! from every connection.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use base64::Engine;
use borderforge::eval::session_report;
use borderforge::grid::OccupancyGrid;
use borderforge::scenario::LoadedScenario;
use borderforge::sim::{ControlInput, InputResult, Simulation, TickRecord};
use tokio::sync::{mpsc, watch};
use tokio::time::MissedTickBehavior;

use crate::protocol::{
    ClientMessage, ErrorCode, MapKind, MapMessage, Pace, ServerMessage, TickMessage,
};

/// Upper bound on a single `step`, so one message cannot stall the session.
pub const MAX_STEP_TICKS: u32 = 100_000;

pub type ConnId = u64;
pub type Outbox = mpsc::UnboundedSender<ServerMessage>;

pub(crate) enum Command {
    Subscribe(ConnId, Outbox),
    Unsubscribe(ConnId),
    Client(ConnId, ClientMessage),
}

/// Cheap handle shared by the HTTP and WebSocket routes.
#[derive(Clone)]
pub struct SessionHandle {
    pub(crate) commands: mpsc::UnboundedSender<Command>,
    posterior: watch::Receiver<Arc<OccupancyGrid>>,
}

impl SessionHandle {
    pub fn posterior(&self) -> Arc<OccupancyGrid> {
        self.posterior.borrow().clone()
    }
}

pub(crate) struct LiveSession {
    scenario: Arc<LoadedScenario>,
    seed: u64,
    pace: Pace,
    ticks_per_call: u32,
    sim: Simulation,
    subscribers: HashMap<ConnId, Outbox>,
    posterior: watch::Sender<Arc<OccupancyGrid>>,
    closed: bool,
}

pub(crate) fn spawn_session(
    scenario: Arc<LoadedScenario>,
    seed: u64,
    pace: Pace,
    ticks_per_call: u32,
) -> SessionHandle {
    let sim = Simulation::new(scenario.setup(seed, scenario.file.sim.clone()));
    let (posterior, posterior_rx) = watch::channel(Arc::new(sim.map().clone()));
    let (tx, rx) = mpsc::unbounded_channel();
    let session = LiveSession {
        scenario,
        seed,
        pace,
        ticks_per_call,
        sim,
        subscribers: HashMap::new(),
        posterior,
        closed: false,
    };
    tokio::spawn(session.run(rx));
    SessionHandle {
        commands: tx,
        posterior: posterior_rx,
    }
}

impl LiveSession {
    async fn run(mut self, mut rx: mpsc::UnboundedReceiver<Command>) {
        let dt = Duration::from_secs_f64(self.sim.config().dt);
        let mut clock = tokio::time::interval_at(tokio::time::Instant::now() + dt, dt);
        clock.set_missed_tick_behavior(MissedTickBehavior::Delay);
        let realtime = self.pace == Pace::Realtime;
        loop {
            tokio::select! {
                biased;
                cmd = rx.recv() => match cmd {
                    Some(cmd) => self.command(cmd),
                    None => break,
                },
                _ = clock.tick(), if realtime && !self.closed => self.advance(1, None),
            }
        }
        log::debug!("session for {} stopped", self.scenario.file.id);
    }

    fn command(&mut self, cmd: Command) {
        match cmd {
            Command::Subscribe(id, outbox) => {
                self.subscribers.insert(id, outbox);
            }
            Command::Unsubscribe(id) => {
                self.subscribers.remove(&id);
            }
            Command::Client(id, msg) => self.client(id, msg),
        }
    }

    fn reply(&mut self, conn: ConnId, msg: ServerMessage) {
        if let Some(out) = self.subscribers.get(&conn) {
            if out.send(msg).is_err() {
                self.subscribers.remove(&conn);
            }
        }
    }

    fn broadcast(&mut self, msg: &ServerMessage) {
        self.subscribers.retain(|_, out| out.send(msg.clone()).is_ok());
    }

    fn client(&mut self, conn: ConnId, msg: ClientMessage) {
        if self.closed && !matches!(msg, ClientMessage::RequestMap { .. }) {
            let msg = ServerMessage::error(ErrorCode::SessionClosed, "session time limit reached");
            self.reply(conn, msg);
            return;
        }
        let input = match msg {
            ClientMessage::SetLaser { x_norm, y_norm, off } => match (x_norm, y_norm, off) {
                (None, None, true) => ControlInput::SetLaser { point: None },
                (Some(u), Some(v), false) if in_unit(u) && in_unit(v) => ControlInput::SetLaser {
                    point: Some(self.scenario.prior.normalized_to_world(u, v)),
                },
                _ => {
                    let msg = ServerMessage::error(
                        ErrorCode::InvalidMessage,
                        "set_laser needs x_norm and y_norm in [0, 1], or off: true",
                    );
                    self.reply(conn, msg);
                    return;
                }
            },
            ClientMessage::Event { event } => ControlInput::Event { event },
            ClientMessage::Rotate { target_yaw } if target_yaw.is_finite() => {
                ControlInput::Rotate { target_yaw }
            }
            ClientMessage::Rotate { .. } => {
                let msg = ServerMessage::error(ErrorCode::InvalidMessage, "target_yaw must be finite");
                self.reply(conn, msg);
                return;
            }
            ClientMessage::Reset {} => ControlInput::Reset,
            ClientMessage::RequestMap { which } => {
                let grid = match which {
                    MapKind::Prior => &self.scenario.prior,
                    MapKind::Posterior => self.sim.map(),
                };
                let msg = ServerMessage::Map(map_message(which, grid));
                self.reply(conn, msg);
                return;
            }
            ClientMessage::Step { ticks } => {
                if self.pace != Pace::Lockstep {
                    let msg = ServerMessage::error(
                        ErrorCode::NotLockstep,
                        "step is only accepted by lockstep sessions",
                    );
                    self.reply(conn, msg);
                    return;
                }
                let n = ticks.unwrap_or(self.ticks_per_call);
                if n == 0 || n > MAX_STEP_TICKS {
                    let msg = ServerMessage::error(
                        ErrorCode::InvalidMessage,
                        format!("ticks must be in 1..={MAX_STEP_TICKS}"),
                    );
                    self.reply(conn, msg);
                    return;
                }
                self.advance(n, Some(conn));
                return;
            }
        };
        self.sim.enqueue(input);
    }

    fn advance(&mut self, ticks: u32, requester: Option<ConnId>) {
        let max_time = self.sim.config().max_time;
        for _ in 0..ticks {
            if self.closed {
                if let Some(conn) = requester {
                    let msg =
                        ServerMessage::error(ErrorCode::SessionClosed, "session time limit reached");
                    self.reply(conn, msg);
                }
                return;
            }
            let record = self.sim.step();
            self.publish(&record);
            if self.sim.time() >= max_time - 1e-9 {
                log::info!(
                    "session for {} reached its {max_time} s limit",
                    self.scenario.file.id
                );
                self.closed = true;
            }
        }
    }

    fn publish(&mut self, record: &TickRecord) {
        let tick = TickMessage {
            tick: record.tick,
            time: record.time,
            pose: record.pose,
            state: record.state,
            laser_world: record.detection.as_ref().and_then(|d| d.world),
            led: record.led,
            beep: record.feedback.iter().any(|f| f.beep).then_some(true),
        };
        self.broadcast(&ServerMessage::Tick(tick));
        for applied in &record.inputs {
            match &applied.result {
                InputResult::Finalized { .. } => {
                    let map = self.sim.map().clone();
                    let msg = ServerMessage::Map(map_message(MapKind::Posterior, &map));
                    self.posterior.send_replace(Arc::new(map));
                    self.broadcast(&msg);
                    let report = session_report(&self.scenario, self.seed, &self.sim).report;
                    self.broadcast(&ServerMessage::Report {
                        report: Box::new(report),
                    });
                }
                InputResult::Failed { message } => {
                    let msg = ServerMessage::error(ErrorCode::FinalizeFailed, message.clone());
                    self.broadcast(&msg);
                }
                _ => {}
            }
        }
    }
}

fn in_unit(t: f64) -> bool {
    (0.0..=1.0).contains(&t)
}

pub fn map_message(which: MapKind, grid: &OccupancyGrid) -> MapMessage {
    MapMessage {
        which,
        width: grid.width(),
        height: grid.height(),
        resolution: grid.resolution(),
        origin: grid.origin(),
        pgm_base64: base64::engine::general_purpose::STANDARD.encode(grid.to_pgm_bytes()),
        meta: grid.meta_text(),
    }
}
