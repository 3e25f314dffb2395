//! A live server on the campus fixture and a scripted play client.
#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use futures::{SinkExt, StreamExt};
use pacmap::protocol::ClientMessage;
use pacmap::server::{router, serve, AppState, ServerOptions};
use pacmap_core::osm::{parse_extract, OsmFormat};
use pacmap_core::sim::Trace;
use serde_json::Value;
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};
use tower::ServiceExt;

pub type Socket = WebSocketStream<MaybeTlsStream<TcpStream>>;

pub const CENTER: (f64, f64) = (39.087, 26.554);

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn app(speed: f64) -> Arc<AppState> {
    let raw = std::fs::read(repo_root().join("fixtures/campus.osm")).unwrap();
    let extract = parse_extract(&raw, OsmFormat::Xml).unwrap();
    AppState::new(
        extract,
        ServerOptions {
            speed,
            ..ServerOptions::default()
        },
    )
}

pub fn t1() -> Trace {
    let text = std::fs::read_to_string(repo_root().join("fixtures/T1.trace.jsonl")).unwrap();
    Trace::parse_jsonl(&text).unwrap()
}

/// Sends one request through the router without a socket.
pub async fn request(app: &Arc<AppState>, method: &str, uri: &str, body: &str) -> (StatusCode, String) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_owned()))
        .unwrap();
    let resp = router(Arc::clone(app)).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

/// Creates a game and returns its id.
pub async fn create_game(app: &Arc<AppState>, body: Value) -> String {
    let (status, text) = request(app, "POST", "/games", &body.to_string()).await;
    assert_eq!(status, StatusCode::OK, "{text}");
    let v: Value = serde_json::from_str(&text).unwrap();
    v["id"].as_str().unwrap().to_owned()
}

pub async fn listen(app: &Arc<AppState>) -> SocketAddr {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(serve(listener, Arc::clone(app)));
    addr
}

pub async fn connect(addr: SocketAddr, id: &str) -> Socket {
    let (ws, _) = connect_async(format!("ws://{addr}/games/{id}/play")).await.unwrap();
    ws
}

/// Next text message, or the close code if the server closed.
pub async fn next_message(ws: &mut Socket) -> Result<String, Option<u16>> {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(30), ws.next())
            .await
            .expect("server went quiet");
        match msg {
            Some(Ok(Message::Text(text))) => return Ok(text.to_string()),
            Some(Ok(Message::Close(frame))) => return Err(frame.map(|f| u16::from(f.code))),
            Some(Ok(_)) => continue,
            Some(Err(_)) | None => return Err(None),
        }
    }
}

const EVENT_PREFIX: &str = r#"{"v":1,"type":"event","event":"#;

/// The embedded event line of an event message.
pub fn event_line(message: &str) -> Option<&str> {
    message.strip_prefix(EVENT_PREFIX)?.strip_suffix('}')
}

pub fn snapshot_clock(message: &str) -> Option<f64> {
    let v: Value = serde_json::from_str(message).ok()?;
    (v["type"] == "snapshot").then(|| v["snapshot"]["clock"].as_f64()).flatten()
}

/// Plays T1 over a fresh game on a live server and returns every event
/// line with a time up to the trace's end, in arrival order.
pub async fn play_t1_live(speed: f64, seed: u64) -> Vec<String> {
    let app = app(speed);
    let trace = t1();
    let start = trace.start().unwrap();
    let id = create_game(
        &app,
        serde_json::json!({
            "center": {"lat": CENTER.0, "lon": CENTER.1},
            "start": {"lat": start.lat(), "lon": start.lon()},
            "seed": seed,
        }),
    )
    .await;
    let addr = listen(&app).await;
    let mut ws = connect(addr, &id).await;
    for &(t, p) in trace.fixes() {
        ws.send(Message::Text(ClientMessage::fix_text(p.lat(), p.lon(), t).into()))
            .await
            .unwrap();
    }
    let end = trace.end_time();
    let mut lines = Vec::new();
    loop {
        let msg = next_message(&mut ws).await.expect("channel stays open");
        if let Some(line) = event_line(&msg) {
            lines.push(line.to_owned());
        } else if snapshot_clock(&msg).is_some_and(|c| c > end) {
            break;
        }
    }
    let _ = ws.close(None).await;
    lines.retain(|l| {
        let v: Value = serde_json::from_str(l).unwrap();
        v["t"].as_f64().unwrap() <= end
    });
    lines
}

/// The headless log for the same game, one line per event.
pub fn t1_headless(seed: u64) -> Vec<String> {
    let raw = std::fs::read(repo_root().join("fixtures/campus.osm")).unwrap();
    let extract = parse_extract(&raw, OsmFormat::Xml).unwrap();
    let center = pacmap_core::GeoPoint::new(CENTER.0, CENTER.1).unwrap();
    let space = pacmap_core::build_game_space(&extract, center, Default::default()).unwrap();
    let config = pacmap_core::SessionConfig {
        seed,
        ..Default::default()
    };
    pacmap_core::sim::run_trace(space, config, &t1())
        .unwrap()
        .iter()
        .map(|e| e.to_json_line())
        .collect()
}
