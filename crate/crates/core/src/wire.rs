//! Byte-stable JSON for logs and live snapshots.
//!
//! Numbers that come out of floating point arithmetic are written with a
//! fixed number of decimals: 7 for degrees, 3 for meters and seconds.
//! Formatting goes through Rust's own decimal printer, so the output does
//! not depend on the platform's libc.

use serde::ser::{SerializeStruct, Serializer};
use serde::Serialize;
use serde_json::value::RawValue;

use crate::game_space::{Cookie, CookieId, GameSpace};
use crate::geodesy::GeoPoint;
use crate::ghost_ai::{Ghost, GhostId, PlayerState};
use crate::osm::{EdgeId, NodeId, Poi, PoiCategory, PoiId};
use crate::session::{Phase, SessionState};

/// Decimals for latitudes and longitudes.
pub const DEGREE_DECIMALS: usize = 7;
/// Decimals for meters and seconds.
pub const METER_DECIMALS: usize = 3;

/// `value` with exactly `decimals` digits after the point. Negative zero
/// prints without a sign.
pub fn fixed(value: f64, decimals: usize) -> String {
    let s = format!("{value:.decimals$}");
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_owned()
    } else {
        s
    }
}

fn raw<S: Serializer>(text: String, serializer: S) -> Result<S::Ok, S::Error> {
    RawValue::from_string(text)
        .map_err(serde::ser::Error::custom)?
        .serialize(serializer)
}

pub fn deg7<S: Serializer>(value: &f64, serializer: S) -> Result<S::Ok, S::Error> {
    raw(fixed(*value, DEGREE_DECIMALS), serializer)
}

pub fn m3<S: Serializer>(value: &f64, serializer: S) -> Result<S::Ok, S::Error> {
    raw(fixed(*value, METER_DECIMALS), serializer)
}

pub fn opt_m3<S: Serializer>(value: &Option<f64>, serializer: S) -> Result<S::Ok, S::Error> {
    match value {
        Some(v) => m3(v, serializer),
        None => serializer.serialize_none(),
    }
}

/// A point written as `{"lat":…,"lon":…}` with 7 decimals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPoint(pub GeoPoint);

impl Serialize for FixedPoint {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Point", 2)?;
        s.serialize_field("lat", &Deg(self.0.lat()))?;
        s.serialize_field("lon", &Deg(self.0.lon()))?;
        s.end()
    }
}

struct Deg(f64);

impl Serialize for Deg {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        deg7(&self.0, serializer)
    }
}

fn polyline(points: &[GeoPoint]) -> Vec<[Deg; 2]> {
    points.iter().map(|p| [Deg(p.lat()), Deg(p.lon())]).collect()
}

/// Everything a client needs to draw the game at one instant.
#[derive(Serialize)]
pub struct Snapshot {
    #[serde(serialize_with = "m3")]
    pub clock: f64,
    pub phase: Phase,
    pub stage: StageView,
    pub player: PlayerView,
    pub ghosts: Vec<GhostView>,
    /// Uncollected cookies only.
    pub cookies: Vec<CookieView>,
    pub pois: Vec<PoiView>,
    pub effects: EffectsView,
}

#[derive(Serialize)]
pub struct StageView {
    pub center: FixedPoint,
    #[serde(serialize_with = "m3")]
    pub radius: f64,
    pub edges: Vec<EdgeView>,
}

#[derive(Serialize)]
pub struct EdgeView {
    pub id: EdgeId,
    pub a: NodeId,
    pub b: NodeId,
    #[serde(serialize_with = "m3")]
    pub length: f64,
    /// `[lat, lon]` pairs.
    #[serde(serialize_with = "serialize_polyline")]
    pub geometry: Vec<GeoPoint>,
}

fn serialize_polyline<S: Serializer>(points: &[GeoPoint], serializer: S) -> Result<S::Ok, S::Error> {
    polyline(points).serialize(serializer)
}

#[derive(Serialize)]
pub struct PlayerView {
    pub position: FixedPoint,
    pub edge: EdgeId,
    #[serde(serialize_with = "m3")]
    pub offset: f64,
    pub heading: NodeId,
    pub lives: u32,
    pub score: u32,
}

#[derive(Serialize)]
pub struct GhostView {
    pub id: GhostId,
    pub kind: &'static str,
    pub color: &'static str,
    pub position: FixedPoint,
    pub goal: Option<NodeId>,
}

#[derive(Serialize)]
pub struct CookieView {
    pub id: CookieId,
    pub position: FixedPoint,
}

#[derive(Serialize)]
pub struct PoiView {
    pub id: PoiId,
    pub category: PoiCategory,
    pub position: FixedPoint,
    pub consumed: bool,
}

#[derive(Serialize)]
pub struct EffectsView {
    #[serde(serialize_with = "opt_m3")]
    pub trapped_until: Option<f64>,
    #[serde(serialize_with = "opt_m3")]
    pub invulnerable_until: Option<f64>,
}

impl StageView {
    pub fn of(space: &GameSpace) -> Self {
        StageView {
            center: FixedPoint(space.center),
            radius: space.config.radius.get(),
            edges: space
                .graph
                .edges()
                .iter()
                .map(|e| EdgeView {
                    id: e.id,
                    a: e.a,
                    b: e.b,
                    length: e.length.get(),
                    geometry: e.geometry.clone(),
                })
                .collect(),
        }
    }
}

impl PlayerView {
    fn of(player: &PlayerState) -> Self {
        PlayerView {
            position: FixedPoint(player.position),
            edge: player.edge_match.edge,
            offset: player.edge_match.offset.get(),
            heading: player.heading_node,
            lives: player.lives,
            score: player.score,
        }
    }
}

impl GhostView {
    fn of(ghost: &Ghost) -> Self {
        GhostView {
            id: ghost.id,
            kind: if ghost.is_chaser() { "chaser" } else { "roamer" },
            color: ghost.kind.color(),
            position: FixedPoint(ghost.position),
            goal: ghost.goal(),
        }
    }
}

impl Snapshot {
    pub fn of(state: &SessionState) -> Self {
        let cookies = state
            .space
            .cookies
            .iter()
            .filter(|c| !c.collected)
            .map(|c: &Cookie| CookieView {
                id: c.id,
                position: FixedPoint(c.position),
            })
            .collect();
        let pois = state
            .space
            .pois
            .iter()
            .map(|p: &Poi| PoiView {
                id: p.id,
                category: p.category,
                position: FixedPoint(p.position),
                consumed: p.consumed,
            })
            .collect();
        Snapshot {
            clock: state.clock,
            phase: state.phase,
            stage: StageView::of(&state.space),
            player: PlayerView::of(&state.player),
            ghosts: state.ghosts.iter().map(GhostView::of).collect(),
            cookies,
            pois,
            effects: EffectsView {
                trapped_until: state.player.trapped_until,
                invulnerable_until: state.invulnerable_until,
            },
        }
    }
}
