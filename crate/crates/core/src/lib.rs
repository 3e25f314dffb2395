//! Engine for a PacMan-style chase game played on real streets.
//!
//! The stage is fabricated from an OpenStreetMap extract around the
//! player's position: walkable ways become a road graph, the graph is
//! clipped to a circle, and cookies are spread at equal spacing along every
//! surviving road. Ghosts move on that graph: three roamers wander between
//! random points on the circle boundary while the chaser runs Dijkstra
//! toward the node the player is heading to, replanning whenever the player
//! reaches a new edge or turns around.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod game_space;
pub mod geodesy;
pub mod ghost_ai;
pub mod osm;
pub mod pathfinding;
pub mod session;
pub mod sim;
pub mod wire;

pub use game_space::{build_game_space, GameSpace, GameSpaceConfig};
pub use geodesy::{GeoPoint, Meters};
pub use osm::{EdgeId, NodeId, RoadGraph};
pub use pathfinding::Path;
pub use session::{create_session, GameEvent, Phase, SessionConfig, SessionState};
