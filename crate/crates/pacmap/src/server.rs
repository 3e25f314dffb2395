//! HTTP and WebSocket front end.
//!
//! Each game is owned by one actor task that holds the session and
//! serializes every fix and tick through its mailbox. The actor's clock
//! runs only while a client is attached to the play channel.

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::rejection::JsonRejection;
use axum::extract::ws::{CloseFrame, Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use pacmap_core::game_space::{build_game_space, GameSpaceConfig, GameSpaceError};
use pacmap_core::osm::OsmExtract;
use pacmap_core::session::{create_session, SessionConfig, SessionError, SessionState};
use pacmap_core::GeoPoint;
use serde::Deserialize;
use tokio::sync::{mpsc, oneshot, Notify};
use tokio::time::{Instant, MissedTickBehavior};
use uuid::Uuid;

use crate::protocol::{
    self, ClientMessage, CLOSE_ALREADY_ATTACHED, CLOSE_FINISHED, CLOSE_UNKNOWN_SESSION,
};

#[derive(Clone, Debug)]
pub struct ServerOptions {
    /// Game seconds per wall-clock second.
    pub speed: f64,
    /// How long a finished game stays queryable.
    pub eviction: Duration,
    pub stage: GameSpaceConfig,
    pub session: SessionConfig,
}

impl Default for ServerOptions {
    fn default() -> Self {
        ServerOptions {
            speed: 1.0,
            eviction: Duration::from_secs(600),
            stage: GameSpaceConfig::default(),
            session: SessionConfig::default(),
        }
    }
}

pub struct AppState {
    extract: OsmExtract,
    options: ServerOptions,
    sessions: Mutex<HashMap<Uuid, mpsc::Sender<Command>>>,
}

impl AppState {
    pub fn new(extract: OsmExtract, options: ServerOptions) -> Arc<Self> {
        Arc::new(AppState {
            extract,
            options,
            sessions: Mutex::new(HashMap::new()),
        })
    }

    fn session(&self, id: Uuid) -> Option<mpsc::Sender<Command>> {
        self.sessions.lock().expect("session map").get(&id).cloned()
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().expect("session map").len()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/games", post(create_game))
        .route("/games/{id}", get(get_snapshot))
        .route("/games/{id}/play", get(play))
        .with_state(state)
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateGame {
    center: GeoPoint,
    /// Player position; defaults to the center.
    #[serde(default)]
    start: Option<GeoPoint>,
    #[serde(default)]
    radius: Option<f64>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    config: Option<SessionConfig>,
}

fn json_response(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn error_response(status: StatusCode, code: &str, message: &str) -> Response {
    json_response(status, protocol::error_message(code, message))
}

async fn create_game(
    State(app): State<Arc<AppState>>,
    body: Result<Json<CreateGame>, JsonRejection>,
) -> Response {
    let req = match body {
        Ok(Json(req)) => req,
        Err(e) => return error_response(StatusCode::BAD_REQUEST, "bad_request", &e.body_text()),
    };
    let mut stage_cfg = app.options.stage;
    if let Some(r) = req.radius {
        match pacmap_core::Meters::new(r) {
            Ok(m) => stage_cfg.radius = m,
            Err(e) => return error_response(StatusCode::BAD_REQUEST, "bad_request", &e.to_string()),
        }
    }
    let mut config = req.config.unwrap_or_else(|| app.options.session.clone());
    if let Some(seed) = req.seed {
        config.seed = seed;
    }
    let space = match build_game_space(&app.extract, req.center, stage_cfg) {
        Ok(space) => space,
        Err(e @ GameSpaceError::InvalidConfig(_)) => {
            return error_response(StatusCode::BAD_REQUEST, "bad_request", &e.to_string())
        }
        Err(e) => {
            return error_response(StatusCode::UNPROCESSABLE_ENTITY, "empty_game_space", &e.to_string())
        }
    };
    let stage = serde_json::to_string(&space).expect("stages always serialize");
    let state = match create_session(space, config, req.start.unwrap_or(req.center)) {
        Ok(state) => state,
        Err(e @ SessionError::InvalidConfig(_)) => {
            return error_response(StatusCode::BAD_REQUEST, "bad_request", &e.to_string())
        }
        Err(e) => {
            return error_response(StatusCode::UNPROCESSABLE_ENTITY, "cannot_start", &e.to_string())
        }
    };
    let snapshot = protocol::snapshot_message(&state);
    let id = Uuid::new_v4();
    let (tx, rx) = mpsc::channel(256);
    app.sessions.lock().expect("session map").insert(id, tx);
    tokio::spawn(run_actor(id, state, rx, Arc::clone(&app)));
    json_response(
        StatusCode::OK,
        format!(
            r#"{{"v":{},"id":"{id}","stage":{stage},"snapshot":{snapshot}}}"#,
            protocol::PROTOCOL_VERSION
        ),
    )
}

async fn get_snapshot(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    let Some(tx) = Uuid::parse_str(&id).ok().and_then(|id| app.session(id)) else {
        return error_response(StatusCode::NOT_FOUND, "unknown_session", "no such game");
    };
    let (reply, rx) = oneshot::channel();
    if tx.send(Command::Snapshot(reply)).await.is_err() {
        return error_response(StatusCode::NOT_FOUND, "unknown_session", "no such game");
    }
    match rx.await {
        Ok(text) => json_response(StatusCode::OK, text),
        Err(_) => error_response(StatusCode::NOT_FOUND, "unknown_session", "no such game"),
    }
}

async fn play(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    ws: WebSocketUpgrade,
) -> Response {
    let session = Uuid::parse_str(&id).ok().and_then(|id| app.session(id));
    ws.on_upgrade(move |socket| async move {
        match session {
            Some(tx) => attach(socket, tx).await,
            None => close(socket, CLOSE_UNKNOWN_SESSION, "unknown session").await,
        }
    })
}

async fn close(mut socket: WebSocket, code: u16, reason: &'static str) {
    let frame = CloseFrame {
        code,
        reason: reason.into(),
    };
    let _ = socket.send(Message::Close(Some(frame))).await;
}

async fn attach(socket: WebSocket, tx: mpsc::Sender<Command>) {
    let outbox = Arc::new(Outbox::default());
    let (reply, rx) = oneshot::channel();
    let attached = tx
        .send(Command::Attach {
            outbox: Arc::clone(&outbox),
            reply,
        })
        .await
        .is_ok();
    match (attached, rx.await) {
        (true, Ok(Attach::Accepted)) => {}
        (_, Ok(Attach::Busy)) => return close(socket, CLOSE_ALREADY_ATTACHED, "already attached").await,
        (_, Ok(Attach::Finished)) => return close(socket, CLOSE_FINISHED, "game over").await,
        _ => return close(socket, CLOSE_UNKNOWN_SESSION, "unknown session").await,
    }

    let (mut sink, mut stream) = socket.split();
    let writer_outbox = Arc::clone(&outbox);
    let writer = tokio::spawn(async move {
        while let Some(text) = writer_outbox.next().await {
            if sink.send(Message::Text(text.into())).await.is_err() {
                return;
            }
        }
        let _ = sink.send(Message::Close(None)).await;
    });

    while let Some(Ok(msg)) = stream.next().await {
        match msg {
            Message::Text(text) => match ClientMessage::parse(text.as_str()) {
                Ok(ClientMessage::Fix { point, t }) => {
                    if tx.send(Command::Fix { point, t }).await.is_err() {
                        break;
                    }
                }
                Err(e) => outbox.push(Outgoing::Control(protocol::error_message(e.code(), &e.to_string()))),
            },
            Message::Close(_) => break,
            _ => {}
        }
    }
    let _ = tx.send(Command::Detach).await;
    outbox.close();
    let _ = writer.await;
}

enum Attach {
    Accepted,
    Busy,
    Finished,
}

enum Command {
    Attach {
        outbox: Arc<Outbox>,
        reply: oneshot::Sender<Attach>,
    },
    Detach,
    Fix {
        point: GeoPoint,
        t: f64,
    },
    Snapshot(oneshot::Sender<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outgoing {
    Event(String),
    Snapshot(String),
    Control(String),
}

/// Outbound queue for one client. A new snapshot replaces any snapshot
/// still waiting to be sent; events and control messages are never dropped.
#[derive(Default)]
pub struct Outbox {
    inner: Mutex<(VecDeque<Outgoing>, bool)>,
    notify: Notify,
}

impl Outbox {
    pub fn push(&self, item: Outgoing) {
        let mut inner = self.inner.lock().expect("outbox");
        if inner.1 {
            return;
        }
        if matches!(item, Outgoing::Snapshot(_)) {
            inner.0.retain(|o| !matches!(o, Outgoing::Snapshot(_)));
        }
        inner.0.push_back(item);
        drop(inner);
        self.notify.notify_one();
    }

    /// No more pushes are accepted; queued messages still drain.
    pub fn close(&self) {
        self.inner.lock().expect("outbox").1 = true;
        self.notify.notify_one();
    }

    pub fn try_next(&self) -> Option<String> {
        self.inner.lock().expect("outbox").0.pop_front().map(|o| match o {
            Outgoing::Event(s) | Outgoing::Snapshot(s) | Outgoing::Control(s) => s,
        })
    }

    /// Next message, or `None` once closed and drained.
    pub async fn next(&self) -> Option<String> {
        loop {
            if let Some(text) = self.try_next() {
                return Some(text);
            }
            if self.inner.lock().expect("outbox").1 {
                return None;
            }
            self.notify.notified().await;
        }
    }
}

struct Actor {
    state: SessionState,
    client: Option<Arc<Outbox>>,
    /// Events already forwarded to a client.
    forwarded: usize,
    pending: VecDeque<(f64, GeoPoint)>,
}

impl Actor {
    fn send(&self, item: Outgoing) {
        if let Some(client) = &self.client {
            client.push(item);
        }
    }

    fn flush_events(&mut self) {
        let Some(client) = &self.client else {
            return;
        };
        for event in &self.state.events()[self.forwarded..] {
            client.push(Outgoing::Event(protocol::event_message(event)));
        }
        self.forwarded = self.state.events().len();
    }

    fn queue_fix(&mut self, point: GeoPoint, t: f64) {
        let newest = self.pending.back().map_or(self.state.clock, |f| f.0);
        if t < self.state.clock || (!self.pending.is_empty() && t <= newest) {
            let message = format!("fix at t={t} is not newer than t={newest}");
            self.send(Outgoing::Control(protocol::error_message("stale_fix", &message)));
            return;
        }
        self.pending.push_back((t, point));
    }

    /// Applies due fixes, then one tick. Returns true once the game is over.
    fn step(&mut self) -> bool {
        let next_tick = self.state.next_tick_time();
        while let Some(&(t, point)) = self.pending.front() {
            if t > next_tick || self.state.phase.is_terminal() {
                break;
            }
            self.pending.pop_front();
            if let Err(e) = self.state.apply_fix(point, t) {
                self.send(Outgoing::Control(protocol::error_message("rejected_fix", &e.to_string())));
            }
        }
        self.state.tick();
        self.flush_events();
        self.send(Outgoing::Snapshot(protocol::snapshot_message(&self.state)));
        if self.state.phase.is_terminal() {
            self.send(Outgoing::Control(protocol::end_message(
                self.state.phase,
                self.state.player.score,
            )));
            if let Some(client) = self.client.take() {
                client.close();
            }
            return true;
        }
        false
    }
}

async fn run_actor(id: Uuid, state: SessionState, mut rx: mpsc::Receiver<Command>, app: Arc<AppState>) {
    let period = Duration::from_secs_f64(state.config.tick_seconds / app.options.speed);
    let mut actor = Actor {
        state,
        client: None,
        forwarded: 0,
        pending: VecDeque::new(),
    };
    let mut ticker = tokio::time::interval_at(Instant::now() + period, period);
    ticker.set_missed_tick_behavior(MissedTickBehavior::Burst);
    let far_future = Instant::now() + Duration::from_secs(86_400 * 365);
    let mut evict_at = far_future;

    loop {
        let running = actor.client.is_some() && !actor.state.phase.is_terminal();
        tokio::select! {
            cmd = rx.recv() => match cmd {
                None => break,
                Some(Command::Attach { outbox, reply }) => {
                    if actor.state.phase.is_terminal() {
                        let _ = reply.send(Attach::Finished);
                    } else if actor.client.is_some() {
                        let _ = reply.send(Attach::Busy);
                    } else {
                        let _ = reply.send(Attach::Accepted);
                        actor.client = Some(outbox);
                        actor.send(Outgoing::Snapshot(protocol::snapshot_message(&actor.state)));
                        actor.flush_events();
                        ticker.reset();
                    }
                }
                Some(Command::Detach) => actor.client = None,
                Some(Command::Fix { point, t }) => actor.queue_fix(point, t),
                Some(Command::Snapshot(reply)) => {
                    let _ = reply.send(protocol::snapshot_message(&actor.state));
                }
            },
            _ = ticker.tick(), if running => {
                if actor.step() {
                    evict_at = Instant::now() + app.options.eviction;
                }
            }
            _ = tokio::time::sleep_until(evict_at), if evict_at != far_future => break,
        }
    }
    app.sessions.lock().expect("session map").remove(&id);
}
