//! OpenStreetMap extract ingestion and the road graph built from it.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesy::{self, GeoPoint, Meters};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub i64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub u32);

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

pub type Tags = BTreeMap<String, String>;

#[derive(Debug, Error)]
pub enum OsmError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("ways reference missing nodes: {missing:?}")]
    DanglingReference { missing: Vec<i64> },
    #[error("node {0} defined more than once")]
    DuplicateNode(i64),
    #[error("no way matches the walkable-highway whitelist")]
    EmptyGraph,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {0} listed twice")]
    DuplicateNode(NodeId),
    #[error("edge {0} listed twice")]
    DuplicateEdge(EdgeId),
    #[error("edge {0} starts and ends at the same node")]
    SelfLoop(EdgeId),
    #[error("edge {0} geometry does not match its endpoint nodes")]
    BadGeometry(EdgeId),
    #[error("edge {0} has non-positive length")]
    NonPositiveLength(EdgeId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OsmFormat {
    Xml,
    Json,
}

impl OsmFormat {
    /// Guesses the format from a file name; anything not ending in `.json`
    /// is treated as XML.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => OsmFormat::Json,
            _ => OsmFormat::Xml,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OsmWay {
    pub id: i64,
    pub nodes: Vec<NodeId>,
    pub tags: Tags,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaggedNode {
    pub id: NodeId,
    pub tags: Tags,
}

/// Raw contents of an extract: positions, ways, and the nodes carrying tags.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OsmExtract {
    pub nodes: BTreeMap<NodeId, GeoPoint>,
    pub ways: Vec<OsmWay>,
    pub tagged_nodes: Vec<TaggedNode>,
}

impl OsmExtract {
    /// Checks that every way only references known nodes.
    pub fn validate(&self) -> Result<(), OsmError> {
        let missing: BTreeSet<i64> = self
            .ways
            .iter()
            .flat_map(|w| w.nodes.iter())
            .filter(|id| !self.nodes.contains_key(id))
            .map(|id| id.0)
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(OsmError::DanglingReference {
                missing: missing.into_iter().collect(),
            })
        }
    }
}

pub fn parse_extract(raw: &[u8], format: OsmFormat) -> Result<OsmExtract, OsmError> {
    let extract = match format {
        OsmFormat::Xml => parse_xml(raw)?,
        OsmFormat::Json => parse_json(raw)?,
    };
    extract.validate()?;
    Ok(extract)
}

fn parse_xml(raw: &[u8]) -> Result<OsmExtract, OsmError> {
    let text = std::str::from_utf8(raw).map_err(|e| {
        let (line, column) = line_col(raw, e.valid_up_to());
        OsmError::Parse {
            line,
            column,
            message: format!("invalid UTF-8: {e}"),
        }
    })?;
    let doc = roxmltree::Document::parse(text).map_err(|e| {
        let pos = e.pos();
        OsmError::Parse {
            line: pos.row as usize,
            column: pos.col as usize,
            message: e.to_string(),
        }
    })?;
    let at = |node: roxmltree::Node, message: String| {
        let pos = doc.text_pos_at(node.range().start);
        OsmError::Parse {
            line: pos.row as usize,
            column: pos.col as usize,
            message,
        }
    };
    fn attr<T: std::str::FromStr>(node: roxmltree::Node, name: &str) -> Result<T, String> {
        let value = node
            .attribute(name)
            .ok_or_else(|| format!("<{}> is missing `{name}`", node.tag_name().name()))?;
        value
            .parse()
            .map_err(|_| format!("bad `{name}` value {value:?}"))
    }
    fn tags(node: roxmltree::Node) -> Result<Tags, String> {
        node.children()
            .filter(|c| c.has_tag_name("tag"))
            .map(|t| Ok((attr::<String>(t, "k")?, attr::<String>(t, "v")?)))
            .collect()
    }

    let root = doc.root_element();
    if root.tag_name().name() != "osm" {
        return Err(at(root, format!("expected <osm> root, found <{}>", root.tag_name().name())));
    }
    let mut extract = OsmExtract::default();
    for el in root.children().filter(|c| c.is_element()) {
        match el.tag_name().name() {
            "node" => {
                let id: i64 = attr(el, "id").map_err(|m| at(el, m))?;
                let lat: f64 = attr(el, "lat").map_err(|m| at(el, m))?;
                let lon: f64 = attr(el, "lon").map_err(|m| at(el, m))?;
                let point = GeoPoint::new(lat, lon).map_err(|e| at(el, e.to_string()))?;
                if extract.nodes.insert(NodeId(id), point).is_some() {
                    return Err(OsmError::DuplicateNode(id));
                }
                let tags = tags(el).map_err(|m| at(el, m))?;
                if !tags.is_empty() {
                    extract.tagged_nodes.push(TaggedNode {
                        id: NodeId(id),
                        tags,
                    });
                }
            }
            "way" => {
                let id: i64 = attr(el, "id").map_err(|m| at(el, m))?;
                let nodes = el
                    .children()
                    .filter(|c| c.has_tag_name("nd"))
                    .map(|nd| attr::<i64>(nd, "ref").map(NodeId).map_err(|m| at(nd, m)))
                    .collect::<Result<Vec<_>, _>>()?;
                let tags = tags(el).map_err(|m| at(el, m))?;
                extract.ways.push(OsmWay { id, nodes, tags });
            }
            // bounds, relations, metadata
            _ => {}
        }
    }
    Ok(extract)
}

fn line_col(raw: &[u8], offset: usize) -> (usize, usize) {
    let before = &raw[..offset.min(raw.len())];
    let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
    let column = before.iter().rev().take_while(|&&b| b != b'\n').count() + 1;
    (line, column)
}

#[derive(Deserialize)]
struct JsonDocument {
    elements: Vec<JsonElement>,
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum JsonElement {
    Node {
        id: i64,
        lat: f64,
        lon: f64,
        #[serde(default)]
        tags: Tags,
    },
    Way {
        id: i64,
        nodes: Vec<i64>,
        #[serde(default)]
        tags: Tags,
    },
    #[serde(other)]
    Other,
}

fn parse_json(raw: &[u8]) -> Result<OsmExtract, OsmError> {
    let doc: JsonDocument = serde_json::from_slice(raw).map_err(|e| OsmError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut extract = OsmExtract::default();
    for (index, element) in doc.elements.into_iter().enumerate() {
        match element {
            JsonElement::Node { id, lat, lon, tags } => {
                let point = GeoPoint::new(lat, lon).map_err(|e| OsmError::Parse {
                    line: 0,
                    column: 0,
                    message: format!("element {index} (node {id}): {e}"),
                })?;
                if extract.nodes.insert(NodeId(id), point).is_some() {
                    return Err(OsmError::DuplicateNode(id));
                }
                if !tags.is_empty() {
                    extract.tagged_nodes.push(TaggedNode {
                        id: NodeId(id),
                        tags,
                    });
                }
            }
            JsonElement::Way { id, nodes, tags } => extract.ways.push(OsmWay {
                id,
                nodes: nodes.into_iter().map(NodeId).collect(),
                tags,
            }),
            JsonElement::Other => {}
        }
    }
    Ok(extract)
}

/// `highway=*` values treated as walkable corridors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WalkableTags {
    pub highway: BTreeSet<String>,
}

impl Default for WalkableTags {
    fn default() -> Self {
        let classes = [
            "residential",
            "footway",
            "path",
            "pedestrian",
            "living_street",
            "service",
            "tertiary",
            "secondary",
            "primary",
            "unclassified",
        ];
        WalkableTags {
            highway: classes.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl WalkableTags {
    pub fn accepts(&self, tags: &Tags) -> bool {
        tags.get("highway")
            .is_some_and(|class| self.highway.contains(class))
    }
}

/// An undirected road segment between two graph nodes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Edge {
    pub id: EdgeId,
    pub a: NodeId,
    pub b: NodeId,
    pub length: Meters,
    pub geometry: Vec<GeoPoint>,
    #[serde(skip)]
    seg_lengths: Vec<f64>,
}

impl Edge {
    pub fn other(&self, node: NodeId) -> Option<NodeId> {
        if node == self.a {
            Some(self.b)
        } else if node == self.b {
            Some(self.a)
        } else {
            None
        }
    }

    pub fn has_endpoint(&self, node: NodeId) -> bool {
        node == self.a || node == self.b
    }

    pub fn segment_lengths(&self) -> &[f64] {
        &self.seg_lengths
    }

    /// Position at `offset` meters from endpoint `a`, measured along the
    /// geometry and rescaled when the edge carries a non-geometric length.
    pub fn point_at(&self, offset: f64) -> GeoPoint {
        let geometric: f64 = self.seg_lengths.iter().sum();
        let scaled = if self.length.0 > 0.0 {
            offset * geometric / self.length.0
        } else {
            0.0
        };
        geodesy::point_along(&self.geometry, &self.seg_lengths, scaled)
    }
}

/// Input for [`RoadGraph::new`].
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeSpec {
    pub id: EdgeId,
    pub a: NodeId,
    pub b: NodeId,
    /// Full polyline including both endpoints; `None` means a straight segment.
    pub geometry: Option<Vec<GeoPoint>>,
    /// Explicit traversal cost; `None` means the geodesic polyline length.
    pub length: Option<Meters>,
}

impl EdgeSpec {
    pub fn straight(id: u32, a: i64, b: i64) -> Self {
        EdgeSpec {
            id: EdgeId(id),
            a: NodeId(a),
            b: NodeId(b),
            geometry: None,
            length: None,
        }
    }

    pub fn with_length(mut self, length: f64) -> Self {
        self.length = Some(Meters(length));
        self
    }

    pub fn with_geometry(mut self, geometry: Vec<GeoPoint>) -> Self {
        self.geometry = Some(geometry);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Adjacent {
    pub node: usize,
    pub edge: usize,
}

/// Intersections and way endpoints joined by road edges.
///
/// Nodes are kept sorted by id and edges by edge id; adjacency lists are
/// sorted by (neighbor id, edge id) so every traversal is deterministic.
#[derive(Clone, Debug, PartialEq)]
pub struct RoadGraph {
    node_ids: Vec<NodeId>,
    positions: Vec<GeoPoint>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<Adjacent>>,
}

impl RoadGraph {
    pub fn new(
        nodes: impl IntoIterator<Item = (NodeId, GeoPoint)>,
        edges: Vec<EdgeSpec>,
    ) -> Result<Self, GraphError> {
        let mut nodes: Vec<(NodeId, GeoPoint)> = nodes.into_iter().collect();
        nodes.sort_by_key(|(id, _)| *id);
        for pair in nodes.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(GraphError::DuplicateNode(pair[0].0));
            }
        }
        let (node_ids, positions): (Vec<_>, Vec<_>) = nodes.into_iter().unzip();
        let index = |id: NodeId| node_ids.binary_search(&id).map_err(|_| GraphError::UnknownNode(id));

        let mut specs = edges;
        specs.sort_by_key(|e| e.id);
        for pair in specs.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(GraphError::DuplicateEdge(pair[0].id));
            }
        }

        let mut built = Vec::with_capacity(specs.len());
        let mut adjacency = vec![Vec::new(); node_ids.len()];
        for spec in specs {
            let ia = index(spec.a)?;
            let ib = index(spec.b)?;
            if ia == ib {
                return Err(GraphError::SelfLoop(spec.id));
            }
            let geometry = spec
                .geometry
                .unwrap_or_else(|| vec![positions[ia], positions[ib]]);
            if geometry.len() < 2
                || geometry[0] != positions[ia]
                || geometry[geometry.len() - 1] != positions[ib]
            {
                return Err(GraphError::BadGeometry(spec.id));
            }
            let seg_lengths = geodesy::segment_lengths(&geometry);
            let length = spec
                .length
                .unwrap_or_else(|| Meters(seg_lengths.iter().sum()));
            if !(length.0 > 0.0) {
                return Err(GraphError::NonPositiveLength(spec.id));
            }
            let edge_index = built.len();
            adjacency[ia].push(Adjacent {
                node: ib,
                edge: edge_index,
            });
            adjacency[ib].push(Adjacent {
                node: ia,
                edge: edge_index,
            });
            built.push(Edge {
                id: spec.id,
                a: spec.a,
                b: spec.b,
                length,
                geometry,
                seg_lengths,
            });
        }
        for list in &mut adjacency {
            list.sort_by_key(|adj| (adj.node, adj.edge));
        }
        Ok(RoadGraph {
            node_ids,
            positions,
            edges: built,
            adjacency,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    /// Node ids in ascending order.
    pub fn node_ids(&self) -> &[NodeId] {
        &self.node_ids
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, GeoPoint)> + '_ {
        self.node_ids.iter().copied().zip(self.positions.iter().copied())
    }

    pub fn contains_node(&self, id: NodeId) -> bool {
        self.node_index(id).is_some()
    }

    pub fn position(&self, id: NodeId) -> Option<GeoPoint> {
        self.node_index(id).map(|i| self.positions[i])
    }

    /// Edges in ascending id order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> Option<&Edge> {
        self.edge_index(id).map(|i| &self.edges[i])
    }

    /// `(neighbor, edge)` pairs sorted by neighbor id, then edge id.
    pub fn neighbors(&self, id: NodeId) -> impl Iterator<Item = (NodeId, EdgeId)> + '_ {
        self.node_index(id)
            .map(|i| self.adjacency[i].as_slice())
            .unwrap_or(&[])
            .iter()
            .map(|adj| (self.node_ids[adj.node], self.edges[adj.edge].id))
    }

    pub fn degree(&self, id: NodeId) -> usize {
        self.node_index(id).map_or(0, |i| self.adjacency[i].len())
    }

    pub(crate) fn node_index(&self, id: NodeId) -> Option<usize> {
        self.node_ids.binary_search(&id).ok()
    }

    pub(crate) fn edge_index(&self, id: EdgeId) -> Option<usize> {
        self.edges.binary_search_by_key(&id, |e| e.id).ok()
    }

    pub(crate) fn node_at(&self, index: usize) -> NodeId {
        self.node_ids[index]
    }

    pub(crate) fn position_at(&self, index: usize) -> GeoPoint {
        self.positions[index]
    }

    pub(crate) fn edge_at(&self, index: usize) -> &Edge {
        &self.edges[index]
    }

    pub(crate) fn adjacent(&self, index: usize) -> &[Adjacent] {
        &self.adjacency[index]
    }

    /// Keeps the edges matching `keep` and the nodes they touch.
    pub fn retain_edges(&self, mut keep: impl FnMut(&Edge) -> bool) -> RoadGraph {
        let kept: Vec<&Edge> = self.edges.iter().filter(|e| keep(e)).collect();
        let used: BTreeSet<NodeId> = kept.iter().flat_map(|e| [e.a, e.b]).collect();
        let nodes = used.iter().map(|&id| (id, self.position(id).expect("edge endpoint exists")));
        let specs = kept
            .into_iter()
            .map(|e| EdgeSpec {
                id: e.id,
                a: e.a,
                b: e.b,
                geometry: Some(e.geometry.clone()),
                length: Some(e.length),
            })
            .collect();
        RoadGraph::new(nodes, specs).expect("subgraph of a valid graph is valid")
    }

    /// Connected components as sorted node-id lists, ordered by their
    /// smallest node id.
    pub fn components(&self) -> Vec<Vec<NodeId>> {
        let mut seen = vec![false; self.node_ids.len()];
        let mut out = Vec::new();
        for start in 0..self.node_ids.len() {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut stack = vec![start];
            let mut members = Vec::new();
            while let Some(i) = stack.pop() {
                members.push(self.node_ids[i]);
                for adj in &self.adjacency[i] {
                    if !seen[adj.node] {
                        seen[adj.node] = true;
                        stack.push(adj.node);
                    }
                }
            }
            members.sort();
            out.push(members);
        }
        out
    }
}

/// Splits the whitelisted ways into graph edges.
///
/// A way is cut at its endpoints and at every node used more than once
/// across the retained ways (including twice by the same way); nodes in
/// between become edge geometry. Closed loops are additionally cut at their
/// middle node so no edge starts and ends at the same node.
pub fn build_road_graph(
    extract: &OsmExtract,
    walkable: &WalkableTags,
) -> Result<RoadGraph, OsmError> {
    extract.validate()?;
    let mut ways: Vec<&OsmWay> = extract
        .ways
        .iter()
        .filter(|w| walkable.accepts(&w.tags))
        .collect();
    if ways.is_empty() {
        return Err(OsmError::EmptyGraph);
    }
    ways.sort_by_key(|w| w.id);

    let cleaned: Vec<Vec<NodeId>> = ways
        .iter()
        .map(|w| {
            let mut refs = w.nodes.clone();
            refs.dedup();
            refs
        })
        .collect();
    let mut usage: HashMap<NodeId, usize> = HashMap::new();
    for refs in &cleaned {
        for id in refs {
            *usage.entry(*id).or_default() += 1;
        }
    }

    let mut pieces: Vec<Vec<NodeId>> = Vec::new();
    for refs in cleaned.iter().filter(|r| r.len() >= 2) {
        let mut start = 0;
        for i in 1..refs.len() {
            if i == refs.len() - 1 || usage[&refs[i]] >= 2 {
                let piece = &refs[start..=i];
                if piece[0] == piece[piece.len() - 1] {
                    if piece.len() >= 3 {
                        let mid = piece.len() / 2;
                        pieces.push(piece[..=mid].to_vec());
                        pieces.push(piece[mid..].to_vec());
                    }
                } else {
                    pieces.push(piece.to_vec());
                }
                start = i;
            }
        }
    }

    let mut seen_geometry: BTreeSet<Vec<NodeId>> = BTreeSet::new();
    let mut nodes: BTreeMap<NodeId, GeoPoint> = BTreeMap::new();
    let mut specs = Vec::new();
    for piece in pieces {
        let (first, last) = (piece[0], piece[piece.len() - 1]);
        let geometry: Vec<GeoPoint> = piece.iter().map(|id| extract.nodes[id]).collect();
        if geodesy::polyline_length(&geometry).0 <= 0.0 {
            continue;
        }
        // identical geometry in either direction counts as a duplicate
        let mut key = piece.clone();
        if first > last {
            key.reverse();
        }
        if !seen_geometry.insert(key) {
            continue;
        }
        nodes.insert(first, geometry[0]);
        nodes.insert(last, geometry[geometry.len() - 1]);
        specs.push(EdgeSpec {
            id: EdgeId(specs.len() as u32),
            a: first,
            b: last,
            geometry: Some(geometry),
            length: None,
        });
    }
    if specs.is_empty() {
        return Err(OsmError::EmptyGraph);
    }
    Ok(RoadGraph::new(nodes, specs)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoiCategory {
    LifeBoost,
    VisibilityTrap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PoiId(pub i64);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Poi {
    pub id: PoiId,
    pub position: GeoPoint,
    pub category: PoiCategory,
    pub consumed: bool,
}

/// Ordered `(key, value) → category` rules; the first matching rule wins.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PoiRules {
    pub rules: Vec<(String, String, PoiCategory)>,
}

impl Default for PoiRules {
    fn default() -> Self {
        use PoiCategory::*;
        let rules = [
            ("pharmacy", LifeBoost),
            ("hospital", LifeBoost),
            ("bar", VisibilityTrap),
            ("pub", VisibilityTrap),
            ("nightclub", VisibilityTrap),
        ];
        PoiRules {
            rules: rules
                .iter()
                .map(|(v, c)| ("amenity".to_string(), v.to_string(), *c))
                .collect(),
        }
    }
}

impl PoiRules {
    pub fn classify(&self, tags: &Tags) -> Option<PoiCategory> {
        self.rules
            .iter()
            .find(|(k, v, _)| tags.get(k) == Some(v))
            .map(|(_, _, c)| *c)
    }
}

/// Tagged nodes that map to a POI category, in extract order.
pub fn classify_pois(extract: &OsmExtract, rules: &PoiRules) -> Vec<Poi> {
    extract
        .tagged_nodes
        .iter()
        .filter_map(|tagged| {
            let category = rules.classify(&tagged.tags)?;
            let position = *extract.nodes.get(&tagged.id)?;
            Some(Poi {
                id: PoiId(tagged.id.0),
                position,
                category,
                consumed: false,
            })
        })
        .collect()
}
