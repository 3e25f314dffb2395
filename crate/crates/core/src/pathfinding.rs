//! The in-process directions service: Dijkstra over the road graph, nearest
//! node snapping and GPS-fix-to-edge matching.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesy::{self, GeoPoint, LocalFrame, Meters};
use crate::osm::{EdgeId, NodeId, RoadGraph};

/// Distances closer than this are treated as ties and resolved by id.
pub const TIE_EPSILON_M: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("unknown edge {0}")]
    UnknownEdge(EdgeId),
    #[error("no path from {start} to {goal}")]
    NoPath { start: NodeId, goal: NodeId },
    #[error("graph is empty")]
    EmptyGraph,
    #[error("edge {edge} does not continue from node {node}")]
    Disconnected { edge: EdgeId, node: NodeId },
}

/// One traversed edge; `forward` means travelling from its `a` end to `b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Leg {
    pub edge: EdgeId,
    pub forward: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub nodes: Vec<NodeId>,
    pub legs: Vec<Leg>,
    pub total_length: Meters,
}

impl Path {
    pub fn single(node: NodeId) -> Self {
        Path {
            nodes: vec![node],
            legs: Vec::new(),
            total_length: Meters::ZERO,
        }
    }

    /// Builds a path by walking `edges` from `start`.
    pub fn from_edges(
        graph: &RoadGraph,
        start: NodeId,
        edges: &[EdgeId],
    ) -> Result<Self, PathError> {
        if !graph.contains_node(start) {
            return Err(PathError::UnknownNode(start));
        }
        let mut path = Path::single(start);
        let mut total = 0.0;
        let mut at = start;
        for &id in edges {
            let edge = graph.edge(id).ok_or(PathError::UnknownEdge(id))?;
            let next = edge
                .other(at)
                .ok_or(PathError::Disconnected { edge: id, node: at })?;
            path.legs.push(Leg {
                edge: id,
                forward: edge.a == at,
            });
            path.nodes.push(next);
            total += edge.length.get();
            at = next;
        }
        path.total_length = Meters(total);
        Ok(path)
    }

    pub fn start(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn end(&self) -> NodeId {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn is_trivial(&self) -> bool {
        self.legs.is_empty()
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Frontier {
    dist: f64,
    node: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (dist, node index); node indices follow node-id order
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Search {
    dist: Vec<f64>,
    pred: Vec<Option<(usize, usize)>>,
}

/// Binary-heap Dijkstra from `source`, stopping once `target` is settled.
/// Equal-cost alternatives keep the predecessor with the smaller node id
/// (then edge id), which makes the result independent of heap order.
fn dijkstra(graph: &RoadGraph, source: usize, target: Option<usize>) -> Search {
    let n = graph.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Frontier {
        dist: 0.0,
        node: source,
    });
    while let Some(Frontier { dist: d, node: u }) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        if Some(u) == target {
            break;
        }
        for adj in graph.adjacent(u) {
            let v = adj.node;
            if done[v] {
                continue;
            }
            let candidate = d + graph.edge_at(adj.edge).length.get();
            let better = match candidate.total_cmp(&dist[v]) {
                Ordering::Less => true,
                Ordering::Equal => pred[v].is_none_or(|(pu, pe)| (u, adj.edge) < (pu, pe)),
                Ordering::Greater => false,
            };
            if better {
                dist[v] = candidate;
                pred[v] = Some((u, adj.edge));
                heap.push(Frontier {
                    dist: candidate,
                    node: v,
                });
            }
        }
    }
    Search { dist, pred }
}

/// Minimum-length path between two nodes; edge cost is the edge length.
pub fn shortest_path(graph: &RoadGraph, start: NodeId, goal: NodeId) -> Result<Path, PathError> {
    let s = graph.node_index(start).ok_or(PathError::UnknownNode(start))?;
    let g = graph.node_index(goal).ok_or(PathError::UnknownNode(goal))?;
    if s == g {
        return Ok(Path::single(start));
    }
    let search = dijkstra(graph, s, Some(g));
    if search.dist[g].is_infinite() {
        return Err(PathError::NoPath { start, goal });
    }
    let mut nodes = vec![goal];
    let mut legs = Vec::new();
    let mut at = g;
    while let Some((prev, edge)) = search.pred[at] {
        let e = graph.edge_at(edge);
        legs.push(Leg {
            edge: e.id,
            forward: e.a == graph.node_at(prev),
        });
        nodes.push(graph.node_at(prev));
        at = prev;
    }
    nodes.reverse();
    legs.reverse();
    Ok(Path {
        nodes,
        legs,
        total_length: Meters(search.dist[g]),
    })
}

/// Shortest-path distance from `start` to every reachable node, in node-id
/// order.
pub fn distances_from(graph: &RoadGraph, start: NodeId) -> Result<Vec<(NodeId, f64)>, PathError> {
    let s = graph.node_index(start).ok_or(PathError::UnknownNode(start))?;
    let search = dijkstra(graph, s, None);
    Ok(search
        .dist
        .iter()
        .enumerate()
        .filter(|(_, d)| d.is_finite())
        .map(|(i, d)| (graph.node_at(i), *d))
        .collect())
}

/// Node closest to `p`; ties within [`TIE_EPSILON_M`] go to the smaller id.
pub fn nearest_node(graph: &RoadGraph, p: GeoPoint) -> Result<NodeId, PathError> {
    let mut best: Option<(usize, f64)> = None;
    for i in 0..graph.node_count() {
        let d = geodesy::distance(p, graph.position_at(i));
        if best.is_none_or(|(_, bd)| d < bd - TIE_EPSILON_M) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| graph.node_at(i)).ok_or(PathError::EmptyGraph)
}

/// Projection of a position onto the road network.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeMatch {
    pub edge: EdgeId,
    /// Arc length from the edge's `a` end to the projected point.
    pub offset: Meters,
    pub projected: GeoPoint,
    pub lateral_error: Meters,
}

/// Matches `p` to the edge whose polyline passes closest to it.
///
/// Projection happens in a planar frame centered on `p`. Ties within
/// [`TIE_EPSILON_M`] go to the smaller edge id.
pub fn match_to_edge(graph: &RoadGraph, p: GeoPoint) -> Result<EdgeMatch, PathError> {
    let frame = LocalFrame::new(p);
    let mut best: Option<EdgeMatch> = None;
    for edge in graph.edges() {
        let pts: Vec<(f64, f64)> = edge.geometry.iter().map(|&q| frame.project(q)).collect();
        let geometric: f64 = edge.segment_lengths().iter().sum();
        let scale = edge.length.get() / geometric;
        let mut along = 0.0;
        let mut local: Option<(f64, f64, f64, f64)> = None; // lateral, offset, x, y
        for (i, w) in pts.windows(2).enumerate() {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            let (dx, dy) = (x1 - x0, y1 - y0);
            let len2 = dx * dx + dy * dy;
            let t = if len2 > 0.0 {
                ((-x0 * dx - y0 * dy) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let (px, py) = (x0 + t * dx, y0 + t * dy);
            let lateral = px.hypot(py);
            let seg = edge.segment_lengths()[i];
            if local.is_none_or(|(l, ..)| lateral < l - TIE_EPSILON_M) {
                local = Some((lateral, (along + t * seg) * scale, px, py));
            }
            along += seg;
        }
        let (lateral, offset, px, py) = local.expect("edge has at least one segment");
        if best.is_none_or(|b| lateral < b.lateral_error.get() - TIE_EPSILON_M) {
            let offset = offset.clamp(0.0, edge.length.get());
            let projected = if offset == 0.0 {
                edge.geometry[0]
            } else if offset == edge.length.get() {
                edge.geometry[edge.geometry.len() - 1]
            } else {
                frame.unproject(px, py)
            };
            best = Some(EdgeMatch {
                edge: edge.id,
                offset: Meters(offset),
                projected,
                lateral_error: Meters(lateral),
            });
        }
    }
    best.ok_or(PathError::EmptyGraph)
}
