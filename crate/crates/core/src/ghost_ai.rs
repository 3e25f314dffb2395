//! Ghost behavior: random roamers and the player-chasing red ghost.
//!
//! The chaser routes from its nearest node to the node the player is
//! heading to and replans whenever the player reaches a new edge or turns
//! around. A chaser that reaches its goal without having crossed the
//! player's edge re-targets the other endpoint of that edge.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game_space::GameSpace;
use crate::geodesy::{self, GeoPoint, Meters};
use crate::osm::{EdgeId, NodeId, RoadGraph};
use crate::pathfinding::{self, EdgeMatch, Leg, Path, PathError};

/// Offset changes smaller than this leave the inferred heading unchanged.
pub const HEADING_DEADBAND_M: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AiError {
    #[error(transparent)]
    Path(#[from] PathError),
    #[error("roamer at {0} has nowhere to go")]
    DegenerateRoute(NodeId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoamerColor {
    Purple,
    Orange,
    Blue,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GhostKind {
    Chaser,
    Roamer(RoamerColor),
}

impl GhostKind {
    pub fn color(&self) -> &'static str {
        match self {
            GhostKind::Chaser => "red",
            GhostKind::Roamer(RoamerColor::Purple) => "purple",
            GhostKind::Roamer(RoamerColor::Orange) => "orange",
            GhostKind::Roamer(RoamerColor::Blue) => "blue",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GhostId(pub u8);

impl fmt::Display for GhostId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "g{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ghost {
    pub id: GhostId,
    pub kind: GhostKind,
    pub position: GeoPoint,
    pub path: Option<Path>,
    /// Meters travelled along `path`.
    pub path_progress: f64,
    /// Meters per second.
    pub speed: f64,
    pub traversed_player_edge: bool,
    /// Routes assigned since the last (re)spawn.
    pub routes_taken: u32,
    /// Last graph node the ghost stood on.
    pub anchor: NodeId,
}

/// Where a ghost is on the graph.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GhostLocation {
    AtNode(NodeId),
    /// `offset` is measured from the edge's `a` end.
    OnEdge { edge: EdgeId, offset: f64 },
}

impl Ghost {
    pub fn spawn(id: GhostId, kind: GhostKind, graph: &RoadGraph, node: NodeId, speed: f64) -> Self {
        Ghost {
            id,
            kind,
            position: graph.position(node).expect("spawn node exists"),
            path: None,
            path_progress: 0.0,
            speed,
            traversed_player_edge: false,
            routes_taken: 0,
            anchor: node,
        }
    }

    pub fn is_chaser(&self) -> bool {
        self.kind == GhostKind::Chaser
    }

    /// True when there is no path or the end of it has been reached.
    pub fn path_exhausted(&self) -> bool {
        self.path
            .as_ref()
            .is_none_or(|p| self.path_progress >= p.total_length.get())
    }

    pub fn goal(&self) -> Option<NodeId> {
        self.path.as_ref().map(Path::end)
    }

    pub fn location(&self, graph: &RoadGraph) -> GhostLocation {
        let Some(path) = &self.path else {
            return GhostLocation::AtNode(self.anchor);
        };
        let mut start = 0.0;
        for (i, leg) in path.legs.iter().enumerate() {
            let edge = graph.edge(leg.edge).expect("path edges exist");
            let end = start + edge.length.get();
            if self.path_progress <= start {
                return GhostLocation::AtNode(path.nodes[i]);
            }
            if self.path_progress < end {
                let along = self.path_progress - start;
                let offset = if leg.forward {
                    along
                } else {
                    edge.length.get() - along
                };
                return GhostLocation::OnEdge {
                    edge: leg.edge,
                    offset,
                };
            }
            start = end;
        }
        GhostLocation::AtNode(path.end())
    }

    fn locate(&self, graph: &RoadGraph) -> GeoPoint {
        match self.location(graph) {
            GhostLocation::AtNode(n) => graph.position(n).expect("path nodes exist"),
            GhostLocation::OnEdge { edge, offset } => {
                graph.edge(edge).expect("path edges exist").point_at(offset)
            }
        }
    }

    /// Starts following `plan`, which begins at a graph node.
    ///
    /// A ghost standing on that node just follows the plan. A ghost in the
    /// middle of an edge incident to the plan's start first walks along its
    /// edge, either onward into the plan or back to the start node, so its
    /// position stays continuous. Any other ghost is moved onto the start
    /// node.
    pub fn follow(&mut self, graph: &RoadGraph, plan: Path) {
        let start = plan.start();
        self.traversed_player_edge = false;
        match self.location(graph) {
            GhostLocation::OnEdge { edge, offset } => {
                let e = graph.edge(edge).expect("ghost edge exists");
                if let Some(other) = e.other(start) {
                    let from_start = if e.a == start {
                        offset
                    } else {
                        e.length.get() - offset
                    };
                    let (nodes, legs, progress) =
                        match plan.nodes.iter().position(|&n| n == other) {
                            Some(k) => {
                                let mut nodes = vec![start, other];
                                nodes.extend_from_slice(&plan.nodes[k + 1..]);
                                let mut legs = vec![Leg {
                                    edge,
                                    forward: e.a == start,
                                }];
                                legs.extend_from_slice(&plan.legs[k..]);
                                (nodes, legs, from_start)
                            }
                            None => {
                                let mut nodes = vec![other];
                                nodes.extend_from_slice(&plan.nodes);
                                let mut legs = vec![Leg {
                                    edge,
                                    forward: e.a == other,
                                }];
                                legs.extend_from_slice(&plan.legs);
                                (nodes, legs, e.length.get() - from_start)
                            }
                        };
                    let total = legs
                        .iter()
                        .map(|l| graph.edge(l.edge).expect("edge exists").length.get())
                        .sum();
                    self.path = Some(Path {
                        nodes,
                        legs,
                        total_length: Meters(total),
                    });
                    self.path_progress = progress;
                    self.position = self.locate(graph);
                    return;
                }
            }
            GhostLocation::AtNode(_) => {}
        }
        self.position = graph.position(start).expect("plan start exists");
        self.anchor = start;
        self.path = Some(plan);
        self.path_progress = 0.0;
    }
}

/// What the game knows about the human player.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayerState {
    pub position: GeoPoint,
    pub edge_match: EdgeMatch,
    /// Endpoint of `edge_match.edge` the player is moving toward.
    pub heading_node: NodeId,
    pub lives: u32,
    pub score: u32,
    pub trapped_until: Option<f64>,
}

/// Heading after moving to `next`:
/// on the same edge, a growing offset means heading to `b` and a shrinking
/// one to `a`, and no movement keeps the old heading; on a new edge, the
/// heading is the endpoint away from where the player entered it. Without
/// history the nearer endpoint is used.
pub fn infer_heading(graph: &RoadGraph, prev: Option<&PlayerState>, next: &EdgeMatch) -> NodeId {
    let edge = graph.edge(next.edge).expect("matched edge exists");
    let Some(prev) = prev else {
        return if 2.0 * next.offset.get() >= edge.length.get() {
            edge.b
        } else {
            edge.a
        };
    };
    if prev.edge_match.edge == next.edge {
        let delta = next.offset.get() - prev.edge_match.offset.get();
        return if delta > HEADING_DEADBAND_M {
            edge.b
        } else if delta < -HEADING_DEADBAND_M {
            edge.a
        } else {
            prev.heading_node
        };
    }
    let old = graph.edge(prev.edge_match.edge);
    let entry = if edge.has_endpoint(prev.heading_node) {
        prev.heading_node
    } else if let Some(shared) = old.and_then(|o| [o.a, o.b].into_iter().find(|&n| edge.has_endpoint(n))) {
        shared
    } else {
        let da = geodesy::distance(prev.position, graph.position(edge.a).expect("endpoint"));
        let db = geodesy::distance(prev.position, graph.position(edge.b).expect("endpoint"));
        if da <= db {
            edge.a
        } else {
            edge.b
        }
    };
    edge.other(entry).expect("entry is an endpoint")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplanReason {
    EdgeChange,
    DirectionChange,
    GoalReached,
    /// Initial plan after a (re)spawn.
    Spawn,
}

/// Why the chaser must replan after the player moved from `prev` to `next`.
pub fn replan_reason(prev: &PlayerState, next: &PlayerState) -> Option<ReplanReason> {
    if prev.edge_match.edge != next.edge_match.edge {
        Some(ReplanReason::EdgeChange)
    } else if prev.heading_node != next.heading_node {
        Some(ReplanReason::DirectionChange)
    } else {
        None
    }
}

pub fn should_replan(prev: &PlayerState, next: &PlayerState) -> bool {
    replan_reason(prev, next).is_some()
}

/// Point on the stage boundary at `bearing` degrees from the center.
fn arc_point(space: &GameSpace, bearing: f64) -> GeoPoint {
    geodesy::vincenty_direct(space.center, bearing, space.config.radius)
        .expect("bearing in [0, 360) and positive radius")
}

/// Draws a new route for a roamer.
///
/// Two uniform bearings pick two points on the stage boundary, each snapped
/// to its nearest node. A freshly spawned roamer heads for the first, later
/// routes for the second; if the chosen node is where the ghost already is,
/// the other snap is used. Only when both coincide with the ghost's node
/// are two more bearings drawn, and if that fails too the ghost steps to a
/// random neighbor.
pub fn roamer_next_route<R: Rng + ?Sized>(
    rng: &mut R,
    space: &GameSpace,
    ghost: &Ghost,
) -> Result<Path, AiError> {
    let graph = &space.graph;
    let current = match ghost.location(graph) {
        GhostLocation::AtNode(n) => n,
        GhostLocation::OnEdge { .. } => pathfinding::nearest_node(graph, ghost.position)?,
    };
    for _ in 0..2 {
        let first = pathfinding::nearest_node(graph, arc_point(space, rng.gen::<f64>() * 360.0))?;
        let second = pathfinding::nearest_node(graph, arc_point(space, rng.gen::<f64>() * 360.0))?;
        let (primary, fallback) = if ghost.routes_taken == 0 {
            (first, second)
        } else {
            (second, first)
        };
        let target = if primary != current {
            primary
        } else if fallback != current {
            fallback
        } else {
            continue;
        };
        return Ok(pathfinding::shortest_path(graph, current, target)?);
    }
    let neighbors: Vec<(NodeId, EdgeId)> = graph.neighbors(current).collect();
    if neighbors.is_empty() {
        return Err(AiError::DegenerateRoute(current));
    }
    let (_, edge) = neighbors[rng.gen_range(0..neighbors.len())];
    Ok(Path::from_edges(graph, current, &[edge])?)
}

/// Route from the chaser's nearest node to the player's heading node.
pub fn chaser_plan(space: &GameSpace, ghost: &Ghost, player: &PlayerState) -> Result<Path, AiError> {
    let start = pathfinding::nearest_node(&space.graph, ghost.position)?;
    Ok(pathfinding::shortest_path(
        &space.graph,
        start,
        player.heading_node,
    )?)
}

/// Re-target after the chaser reached its goal without crossing the
/// player's edge: head for the edge's other endpoint, or straight across
/// the edge when the ghost already stands on that endpoint.
pub fn chaser_on_goal_reached(
    space: &GameSpace,
    ghost: &Ghost,
    player: &PlayerState,
) -> Result<Path, AiError> {
    let graph = &space.graph;
    let current = match ghost.location(graph) {
        GhostLocation::AtNode(n) => n,
        GhostLocation::OnEdge { .. } => pathfinding::nearest_node(graph, ghost.position)?,
    };
    let edge_id = player.edge_match.edge;
    let edge = graph.edge(edge_id).ok_or(PathError::UnknownEdge(edge_id))?;
    let other = edge
        .other(player.heading_node)
        .ok_or(PathError::UnknownNode(player.heading_node))?;
    if other != current {
        Ok(pathfinding::shortest_path(graph, current, other)?)
    } else {
        Ok(Path::from_edges(graph, current, &[edge_id])?)
    }
}

/// Moves the ghost `speed * dt` meters along its path. Any leg on the
/// player's current edge that gets completed marks the edge as traversed.
pub fn advance_ghost(ghost: &mut Ghost, graph: &RoadGraph, dt: f64, player: &PlayerState) {
    let Some(path) = &ghost.path else {
        return;
    };
    let total = path.total_length.get();
    let before = ghost.path_progress;
    let after = (before + ghost.speed * dt).min(total);
    let mut leg_end = 0.0;
    for leg in &path.legs {
        leg_end += graph.edge(leg.edge).expect("path edges exist").length.get();
        if leg_end > before && leg_end <= after && leg.edge == player.edge_match.edge {
            ghost.traversed_player_edge = true;
        }
        if leg_end > after {
            break;
        }
    }
    let end = path.end();
    ghost.path_progress = after;
    if after >= total {
        ghost.anchor = end;
    }
    ghost.position = ghost.locate(graph);
}

/// Closed-boundary proximity test.
pub fn check_catch(ghost: &Ghost, player: &PlayerState, catch_radius: Meters) -> bool {
    geodesy::distance(ghost.position, player.position) <= catch_radius.get()
}
