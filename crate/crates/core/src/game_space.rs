//! Stage fabrication: clip the road graph to a circle around the player and
//! spread cookies along the surviving roads.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesy::{self, GeoPoint, Meters};
use crate::osm::{
    build_road_graph, classify_pois, EdgeId, EdgeSpec, NodeId, OsmError, OsmExtract, Poi,
    PoiRules, RoadGraph, WalkableTags,
};

/// Version tag written into stage JSON documents.
pub const STAGE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum GameSpaceError {
    #[error("invalid game-space config: {0}")]
    InvalidConfig(String),
    #[error("no road survives inside the game-space circle")]
    EmptyGameSpace,
    #[error("inconsistent stage: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Osm(#[from] OsmError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameSpaceConfig {
    pub radius: Meters,
    pub cookie_spacing: Meters,
    pub min_edge_cookie_margin: Meters,
}

impl Default for GameSpaceConfig {
    fn default() -> Self {
        GameSpaceConfig {
            radius: Meters(200.0),
            cookie_spacing: Meters(15.0),
            min_edge_cookie_margin: Meters(3.0),
        }
    }
}

impl GameSpaceConfig {
    pub fn validate(&self) -> Result<(), GameSpaceError> {
        let (r, s, m) = (
            self.radius.get(),
            self.cookie_spacing.get(),
            self.min_edge_cookie_margin.get(),
        );
        if !(r > 0.0) {
            return Err(GameSpaceError::InvalidConfig(format!("radius {r} must be positive")));
        }
        if !(s > 0.0 && s < r) {
            return Err(GameSpaceError::InvalidConfig(format!(
                "cookie spacing {s} must lie in (0, radius {r})"
            )));
        }
        if !(m < s / 2.0) {
            return Err(GameSpaceError::InvalidConfig(format!(
                "edge margin {m} must be below half the spacing {s}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CookieId(pub u32);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cookie {
    pub id: CookieId,
    pub position: GeoPoint,
    pub edge: EdgeId,
    /// Distance along the edge from endpoint `a`.
    pub offset: Meters,
    pub collected: bool,
}

/// The playable stage: a connected road graph inside a circle, its cookies
/// and the POIs that fall inside the circle.
#[derive(Clone, Debug, PartialEq)]
pub struct GameSpace {
    pub center: GeoPoint,
    pub config: GameSpaceConfig,
    pub graph: RoadGraph,
    pub cookies: Vec<Cookie>,
    pub pois: Vec<Poi>,
}

impl GameSpace {
    /// Assembles a stage, checking that everything lies inside the circle
    /// and that every cookie sits on its edge.
    pub fn new(
        center: GeoPoint,
        config: GameSpaceConfig,
        graph: RoadGraph,
        cookies: Vec<Cookie>,
        pois: Vec<Poi>,
    ) -> Result<Self, GameSpaceError> {
        config.validate()?;
        let radius = config.radius.get();
        let inside = |p: GeoPoint| geodesy::distance(center, p) <= radius;
        if graph.edge_count() == 0 {
            return Err(GameSpaceError::EmptyGameSpace);
        }
        if let Some((id, _)) = graph.nodes().find(|(_, p)| !inside(*p)) {
            return Err(GameSpaceError::Inconsistent(format!("node {id} outside the circle")));
        }
        if cookies.is_empty() {
            return Err(GameSpaceError::Inconsistent("stage has no cookies".into()));
        }
        for cookie in &cookies {
            let edge = graph.edge(cookie.edge).ok_or_else(|| {
                GameSpaceError::Inconsistent(format!("cookie {:?} on unknown edge", cookie.id))
            })?;
            if cookie.offset > edge.length
                || geodesy::distance(edge.point_at(cookie.offset.get()), cookie.position) > 0.05
                || !inside(cookie.position)
            {
                return Err(GameSpaceError::Inconsistent(format!(
                    "cookie {:?} is not on edge {} at offset {}",
                    cookie.id, cookie.edge, cookie.offset
                )));
            }
        }
        if let Some(poi) = pois.iter().find(|p| !inside(p.position)) {
            return Err(GameSpaceError::Inconsistent(format!("poi {:?} outside the circle", poi.id)));
        }
        Ok(GameSpace {
            center,
            config,
            graph,
            cookies,
            pois,
        })
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        geodesy::distance(self.center, p) <= self.config.radius.get()
    }

    pub fn remaining_cookies(&self) -> usize {
        self.cookies.iter().filter(|c| !c.collected).count()
    }
}

/// Keeps edges whose two endpoints lie within `radius` of `center`, then
/// only the largest connected component (ties go to the component holding
/// the smallest node id).
pub fn clip_to_circle(
    graph: &RoadGraph,
    center: GeoPoint,
    radius: Meters,
) -> Result<RoadGraph, GameSpaceError> {
    let r = radius.get();
    let inside = |id: NodeId| {
        graph
            .position(id)
            .is_some_and(|p| geodesy::distance(center, p) <= r)
    };
    let clipped = graph.retain_edges(|e| inside(e.a) && inside(e.b));
    if clipped.edge_count() == 0 {
        return Err(GameSpaceError::EmptyGameSpace);
    }
    let components = clipped.components();
    let mut largest = &components[0];
    for component in &components[1..] {
        if component.len() > largest.len() {
            largest = component;
        }
    }
    Ok(clipped.retain_edges(|e| largest.binary_search(&e.a).is_ok()))
}

/// Offsets (from endpoint `a`) of the cookies on an edge of length `length`.
///
/// Short edges get a single cookie at the midpoint; longer ones get the
/// largest number of evenly spaced cookies whose gap is at least `spacing`,
/// with the first and last inset by `margin` from the endpoints.
pub fn cookie_offsets(length: f64, spacing: f64, margin: f64) -> Vec<f64> {
    if length < 2.0 * margin + spacing {
        return vec![length / 2.0];
    }
    let usable = length - 2.0 * margin;
    let n = (usable / spacing).floor() as usize + 1;
    let gap = usable / (n - 1) as f64;
    (0..n).map(|k| margin + k as f64 * gap).collect()
}

pub fn place_cookies(graph: &RoadGraph, config: &GameSpaceConfig) -> Vec<Cookie> {
    let mut cookies = Vec::new();
    for edge in graph.edges() {
        for offset in cookie_offsets(
            edge.length.get(),
            config.cookie_spacing.get(),
            config.min_edge_cookie_margin.get(),
        ) {
            cookies.push(Cookie {
                id: CookieId(cookies.len() as u32),
                position: edge.point_at(offset),
                edge: edge.id,
                offset: Meters(offset),
                collected: false,
            });
        }
    }
    cookies
}

/// Builds a stage with the default walkable-way whitelist and POI rules.
pub fn build_game_space(
    extract: &OsmExtract,
    center: GeoPoint,
    config: GameSpaceConfig,
) -> Result<GameSpace, GameSpaceError> {
    build_game_space_with(
        extract,
        center,
        config,
        &WalkableTags::default(),
        &PoiRules::default(),
    )
}

pub fn build_game_space_with(
    extract: &OsmExtract,
    center: GeoPoint,
    config: GameSpaceConfig,
    walkable: &WalkableTags,
    poi_rules: &PoiRules,
) -> Result<GameSpace, GameSpaceError> {
    if !(config.radius.get() > 0.0) {
        return Err(GameSpaceError::InvalidConfig("radius must be positive".into()));
    }
    let graph = build_road_graph(extract, walkable)?;
    // A degenerate radius is reported as an empty stage, not a bad config.
    let graph = clip_to_circle(&graph, center, config.radius)?;
    config.validate()?;
    let cookies = place_cookies(&graph, &config);
    let radius = config.radius.get();
    let pois = classify_pois(extract, poi_rules)
        .into_iter()
        .filter(|p| geodesy::distance(center, p.position) <= radius)
        .collect();
    GameSpace::new(center, config, graph, cookies, pois)
}

#[derive(Serialize, Deserialize)]
struct StageNode {
    id: NodeId,
    lat: f64,
    lon: f64,
}

#[derive(Serialize, Deserialize)]
struct StageEdge {
    id: EdgeId,
    a: NodeId,
    b: NodeId,
    length: Meters,
    geometry: Vec<GeoPoint>,
}

/// Stage JSON document; coordinates and lengths keep full precision so a
/// stage reloaded from disk replays identically.
#[derive(Serialize, Deserialize)]
struct StageDocument {
    version: u32,
    center: GeoPoint,
    config: GameSpaceConfig,
    nodes: Vec<StageNode>,
    edges: Vec<StageEdge>,
    cookies: Vec<Cookie>,
    pois: Vec<Poi>,
}

impl Serialize for GameSpace {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        StageDocument {
            version: STAGE_FORMAT_VERSION,
            center: self.center,
            config: self.config,
            nodes: self
                .graph
                .nodes()
                .map(|(id, p)| StageNode {
                    id,
                    lat: p.lat(),
                    lon: p.lon(),
                })
                .collect(),
            edges: self
                .graph
                .edges()
                .iter()
                .map(|e| StageEdge {
                    id: e.id,
                    a: e.a,
                    b: e.b,
                    length: e.length,
                    geometry: e.geometry.clone(),
                })
                .collect(),
            cookies: self.cookies.clone(),
            pois: self.pois.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GameSpace {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let doc = StageDocument::deserialize(deserializer)?;
        if doc.version != STAGE_FORMAT_VERSION {
            return Err(D::Error::custom(format!(
                "unsupported stage version {}",
                doc.version
            )));
        }
        let mut nodes = Vec::with_capacity(doc.nodes.len());
        for n in doc.nodes {
            nodes.push((n.id, GeoPoint::new(n.lat, n.lon).map_err(D::Error::custom)?));
        }
        let specs = doc
            .edges
            .into_iter()
            .map(|e| EdgeSpec {
                id: e.id,
                a: e.a,
                b: e.b,
                geometry: Some(e.geometry),
                length: Some(e.length),
            })
            .collect();
        let graph = RoadGraph::new(nodes, specs).map_err(D::Error::custom)?;
        GameSpace::new(doc.center, doc.config, graph, doc.cookies, doc.pois)
            .map_err(D::Error::custom)
    }
}
