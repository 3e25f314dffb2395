//! The campus fixture and the hand-built chase scenarios played on it.
//!
//! Node ids of the stage graph, in local meters (x east, y north):
//!
//! ```text
//!           1027 (-60,180) - 1024 (0,180) - 1028 (60,180)
//!                              |
//! 1005 (-100,100) ------- 1010 (0,100) ------- 1015 (100,100)
//!      |                       |  (bends through (8,50))  |
//! 1003 (-100,0) --------- 1008 (0,0) --------- 1013 (100,0)
//!      |                       |                          |
//! 1001 (-100,-100) ------ 1006 (0,-100) ------ 1011 (100,-100)
//! ```
#![allow(dead_code)]

use std::path::PathBuf;

use pacmap_core::game_space::{build_game_space, GameSpace, GameSpaceConfig};
use pacmap_core::geodesy::{self, vincenty_direct};
use pacmap_core::ghost_ai::{self, Ghost, GhostLocation, ReplanReason};
use pacmap_core::osm::{parse_extract, OsmExtract, OsmFormat};
use pacmap_core::pathfinding::Path;
use pacmap_core::session::{create_session, EventKind, GameEvent, SessionConfig, SessionState};
use pacmap_core::sim::Trace;
use pacmap_core::{EdgeId, GeoPoint, Meters, NodeId};

pub const CENTER: (f64, f64) = (39.087, 26.554);

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn extract() -> OsmExtract {
    let raw = std::fs::read(repo_root().join("fixtures/campus.osm")).expect("fixture present");
    parse_extract(&raw, OsmFormat::Xml).expect("fixture parses")
}

pub fn center() -> GeoPoint {
    GeoPoint::new(CENTER.0, CENTER.1).unwrap()
}

pub fn stage() -> GameSpace {
    build_game_space(&extract(), center(), GameSpaceConfig::default()).expect("fixture stage")
}

/// Local meters to a geographic point, laid out like the fixture.
pub fn at(x: f64, y: f64) -> GeoPoint {
    if x == 0.0 && y == 0.0 {
        return center();
    }
    let bearing = x.atan2(y).to_degrees().rem_euclid(360.0);
    vincenty_direct(center(), bearing, Meters::new(x.hypot(y)).unwrap()).unwrap()
}

pub fn t1() -> Trace {
    let text = std::fs::read_to_string(repo_root().join("fixtures/T1.trace.jsonl")).unwrap();
    Trace::parse_jsonl(&text).unwrap()
}

/// The edge joining two nodes.
pub fn edge_between(space: &GameSpace, a: i64, b: i64) -> EdgeId {
    space
        .graph
        .neighbors(NodeId(a))
        .find(|&(n, _)| n == NodeId(b))
        .map(|(_, e)| e)
        .expect("adjacent nodes")
}

/// Freezes roamers in place so only the chaser moves.
pub fn park_roamers(state: &mut SessionState) {
    for g in state.ghosts.iter_mut().filter(|g| !g.is_chaser()) {
        g.speed = 0.0;
    }
}

/// Moves the chaser onto `node` and gives it a fresh plan toward the player.
pub fn place_chaser(state: &mut SessionState, node: i64) -> Path {
    let chaser = state.ghosts.iter().position(Ghost::is_chaser).unwrap();
    let g = &state.ghosts[chaser];
    let mut fresh = Ghost::spawn(g.id, g.kind, &state.space.graph, NodeId(node), g.speed);
    let plan = ghost_ai::chaser_plan(&state.space, &fresh, &state.player).unwrap();
    fresh.follow(&state.space.graph, plan.clone());
    state.ghosts[chaser] = fresh;
    plan
}

pub struct TickRecord {
    pub tick: u64,
    pub t: f64,
    pub chaser_distance: f64,
    pub chaser_edge: Option<EdgeId>,
    pub traversed: bool,
    pub events: Vec<GameEvent>,
}

/// Ticks until a catch or `max_ticks`. The chaser is recorded where it
/// stands when catches are checked, before any respawn.
pub fn run_until_caught(state: &mut SessionState, max_ticks: u64) -> Vec<TickRecord> {
    let mut out = Vec::new();
    for _ in 0..max_ticks {
        let mut probe = state.clone();
        probe.invulnerable_until = Some(f64::INFINITY);
        probe.tick();
        let chaser = probe.ghosts.iter().find(|g| g.is_chaser()).unwrap();
        let chaser_edge = match chaser.location(&probe.space.graph) {
            GhostLocation::OnEdge { edge, .. } => Some(edge),
            GhostLocation::AtNode(_) => None,
        };
        let record = TickRecord {
            tick: probe.ticks,
            t: probe.clock,
            chaser_distance: geodesy::distance(chaser.position, probe.player.position),
            chaser_edge,
            traversed: chaser.traversed_player_edge,
            events: state.tick(),
        };
        let caught = record.events.iter().any(|e| matches!(e.kind, EventKind::Caught { .. }));
        out.push(record);
        if caught {
            break;
        }
    }
    out
}

/// G1: chaser on node 1010, player halfway along 1003-1001 heading south.
/// By hand: 1010-1005-1003-1001 is 300.007 m; every route through 1008
/// uses the 101.277 m bent edge and is at least 1.27 m longer.
pub fn g1_plan() -> Path {
    let space = stage();
    let mut state = create_session(space, SessionConfig::default(), at(-100.0, -50.0)).unwrap();
    state.player.heading_node = NodeId(1001);
    place_chaser(&mut state, 1010)
}

pub fn g1_expected() -> Vec<NodeId> {
    [1010, 1005, 1003, 1001].map(NodeId).to_vec()
}

pub struct Scenario {
    pub state: SessionState,
    pub plan: Path,
    pub records: Vec<TickRecord>,
}

/// G2: the player stands 59 m east of 1008 on the 1008-1013 edge, facing
/// 1008. The chaser starts on 1010 and walks the 101.277 m bent edge to
/// 1008 without touching the player's edge. At 0.32 m per tick it arrives
/// on tick 317 (316 ticks cover only 101.12 m) and must re-target 1013,
/// crossing the player's edge. Entering within 8 m needs 51 m along the
/// edge, which takes 160 more ticks (159 cover 50.88 m): caught on tick 477.
pub fn g2() -> Scenario {
    let space = stage();
    let mut state = create_session(space, SessionConfig::default(), at(60.0, 0.0)).unwrap();
    state.apply_fix(at(59.0, 0.0), 0.2).unwrap();
    assert_eq!(state.player.heading_node, NodeId(1008));
    park_roamers(&mut state);
    let plan = place_chaser(&mut state, 1010);
    let records = run_until_caught(&mut state, 2000);
    Scenario { state, plan, records }
}

pub const G2_GOAL_REACHED_TICK: u64 = 317;
pub const G2_CAUGHT_TICK: u64 = 477;

/// G3: the player stands 65 m east of 1008 heading to 1013; the chaser
/// starts on 1003 and its plan 1003-1008-1013 contains the player's edge.
/// Within 8 m means 57 m along the player's edge, 157 m of path: tick 491
/// (490 ticks reach only 156.8 m).
pub fn g3() -> Scenario {
    let space = stage();
    let mut state = create_session(space, SessionConfig::default(), at(65.0, 0.0)).unwrap();
    assert_eq!(state.player.heading_node, NodeId(1013));
    park_roamers(&mut state);
    let plan = place_chaser(&mut state, 1003);
    let records = run_until_caught(&mut state, 2000);
    Scenario { state, plan, records }
}

pub const G3_CAUGHT_TICK: u64 = 491;

/// Replanned events as (time, reason, goal).
pub fn replans(events: &[GameEvent]) -> Vec<(f64, ReplanReason, NodeId)> {
    events
        .iter()
        .filter_map(|e| match e.kind {
            EventKind::Replanned { reason, goal, .. } => Some((e.t, reason, goal)),
            _ => None,
        })
        .collect()
}
