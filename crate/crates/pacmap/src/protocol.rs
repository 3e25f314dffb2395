//! JSON messages exchanged on the play channel.
//!
//! Every message is a JSON object carrying `"v":1` and a `"type"`. Events
//! are embedded verbatim as the same line the headless event log would
//! contain.

use pacmap_core::session::{GameEvent, Phase, SessionState};
use pacmap_core::wire::Snapshot;
use pacmap_core::GeoPoint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PROTOCOL_VERSION: u32 = 1;

/// Close code for an unknown session id.
pub const CLOSE_UNKNOWN_SESSION: u16 = 4404;
/// Close code when another client already holds the session.
pub const CLOSE_ALREADY_ATTACHED: u16 = 4409;
/// Close code for a session that has already ended.
pub const CLOSE_FINISHED: u16 = 4410;

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("unsupported protocol version {0}")]
    UnsupportedVersion(u32),
}

impl ProtocolError {
    pub fn code(&self) -> &'static str {
        match self {
            ProtocolError::Malformed(_) => "malformed",
            ProtocolError::UnsupportedVersion(_) => "unsupported_version",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum Body {
    Fix { v: u32, lat: f64, lon: f64, t: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ClientMessage {
    /// Position at client game time `t` seconds.
    Fix { point: GeoPoint, t: f64 },
}

impl ClientMessage {
    pub fn parse(text: &str) -> Result<Self, ProtocolError> {
        let body: Body =
            serde_json::from_str(text).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
        match body {
            Body::Fix { v, .. } if v != PROTOCOL_VERSION => Err(ProtocolError::UnsupportedVersion(v)),
            Body::Fix { lat, lon, t, .. } => {
                let point =
                    GeoPoint::new(lat, lon).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
                if !t.is_finite() {
                    return Err(ProtocolError::Malformed("t must be finite".into()));
                }
                Ok(ClientMessage::Fix { point, t })
            }
        }
    }

    pub fn fix_text(lat: f64, lon: f64, t: f64) -> String {
        format!(r#"{{"v":{PROTOCOL_VERSION},"type":"fix","lat":{lat},"lon":{lon},"t":{t}}}"#)
    }
}

#[derive(Serialize)]
struct SnapshotMessage<'a> {
    v: u32,
    #[serde(rename = "type")]
    kind: &'static str,
    snapshot: &'a Snapshot,
}

pub fn snapshot_message(state: &SessionState) -> String {
    serde_json::to_string(&SnapshotMessage {
        v: PROTOCOL_VERSION,
        kind: "snapshot",
        snapshot: &Snapshot::of(state),
    })
    .expect("snapshots always serialize")
}

pub fn event_message(event: &GameEvent) -> String {
    format!(
        r#"{{"v":{PROTOCOL_VERSION},"type":"event","event":{}}}"#,
        event.to_json_line()
    )
}

#[derive(Serialize)]
struct EndMessage {
    v: u32,
    #[serde(rename = "type")]
    kind: &'static str,
    phase: Phase,
    score: u32,
}

pub fn end_message(phase: Phase, score: u32) -> String {
    serde_json::to_string(&EndMessage {
        v: PROTOCOL_VERSION,
        kind: "end",
        phase,
        score,
    })
    .expect("end messages always serialize")
}

#[derive(Serialize)]
struct ErrorMessage<'a> {
    v: u32,
    #[serde(rename = "type")]
    kind: &'static str,
    code: &'a str,
    message: &'a str,
}

pub fn error_message(code: &str, message: &str) -> String {
    serde_json::to_string(&ErrorMessage {
        v: PROTOCOL_VERSION,
        kind: "error",
        code,
        message,
    })
    .expect("error messages always serialize")
}
