#[path = "support/campus.rs"]
mod campus;

use std::collections::BTreeMap;

use campus::*;
use pacmap_core::game_space::{build_game_space, GameSpace, GameSpaceConfig, GameSpaceError};
use pacmap_core::geodesy::{distance, vincenty_inverse};
use pacmap_core::osm::{build_road_graph, PoiCategory, WalkableTags};
use pacmap_core::session::spawn_order;
use pacmap_core::{GeoPoint, NodeId};

#[test]
fn extract_totals() {
    let x = extract();
    assert_eq!(x.nodes.len(), 40);
    assert_eq!(x.ways.len(), 12);
    assert_eq!(x.tagged_nodes.len(), 3);
}

#[test]
fn road_graph_totals() {
    let g = build_road_graph(&extract(), &WalkableTags::default()).unwrap();
    assert_eq!((g.node_count(), g.edge_count()), (16, 18));
}

#[test]
fn stage_totals() {
    let s = stage();
    assert_eq!((s.graph.node_count(), s.graph.edge_count()), (12, 15));
    assert_eq!(s.cookies.len(), 97);
    let cats: Vec<_> = s.pois.iter().map(|p| p.category).collect();
    assert_eq!(cats.len(), 2);
    assert!(cats.contains(&PoiCategory::LifeBoost));
    assert!(cats.contains(&PoiCategory::VisibilityTrap));
}

#[test]
fn cookies_per_edge_match_audit() {
    let s = stage();
    let mut per_edge: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    for c in &s.cookies {
        let e = s.graph.edge(c.edge).unwrap();
        *per_edge.entry((e.a.0.min(e.b.0), e.a.0.max(e.b.0))).or_default() += 1;
    }
    let expected: BTreeMap<(i64, i64), usize> = [
        ((1001, 1003), 7),
        ((1003, 1005), 7),
        ((1006, 1008), 7),
        ((1008, 1010), 7),
        ((1011, 1013), 7),
        ((1013, 1015), 7),
        ((1001, 1006), 7),
        ((1006, 1011), 7),
        ((1003, 1008), 7),
        ((1008, 1013), 7),
        ((1005, 1010), 7),
        ((1010, 1015), 7),
        ((1010, 1024), 5),
        ((1024, 1027), 4),
        ((1024, 1028), 4),
    ]
    .into_iter()
    .collect();
    assert_eq!(per_edge, expected);
}

#[test]
fn everything_within_radius() {
    let s = stage();
    let c = center();
    for (_, p) in s.graph.nodes() {
        assert!(vincenty_inverse(c, p).unwrap().get() <= 200.0);
    }
    for cookie in &s.cookies {
        assert!(vincenty_inverse(c, cookie.position).unwrap().get() <= 200.0);
    }
    for poi in &s.pois {
        assert!(vincenty_inverse(c, poi.position).unwrap().get() <= 200.0);
    }
}

/// Arc length from the start of `line` to a point lying on it.
fn arc_position(line: &[GeoPoint], p: GeoPoint) -> f64 {
    let mut walked = 0.0;
    let mut best = (f64::INFINITY, 0.0);
    for w in line.windows(2) {
        let seg = distance(w[0], w[1]);
        let (d0, d1) = (distance(w[0], p), distance(p, w[1]));
        let detour = d0 + d1 - seg;
        if detour < best.0 {
            best = (detour, walked + d0);
        }
        walked += seg;
    }
    assert!(best.0 < 1e-4, "cookie off its edge by detour {}", best.0);
    best.1
}

#[test]
fn cookie_gaps_are_even() {
    let s = stage();
    let mut by_edge: BTreeMap<u32, Vec<GeoPoint>> = BTreeMap::new();
    for c in &s.cookies {
        by_edge.entry(c.edge.0).or_default().push(c.position);
    }
    for (edge, cookies) in by_edge {
        let e = s.graph.edge(pacmap_core::EdgeId(edge)).unwrap();
        let mut arcs: Vec<f64> = cookies.iter().map(|&p| arc_position(&e.geometry, p)).collect();
        arcs.sort_by(f64::total_cmp);
        let total: f64 = e.geometry.windows(2).map(|w| distance(w[0], w[1])).sum();
        assert!((arcs[0] - 3.0).abs() < 1e-3, "first cookie at {}", arcs[0]);
        assert!((total - arcs[arcs.len() - 1] - 3.0).abs() < 1e-3);
        let gaps: Vec<f64> = arcs.windows(2).map(|w| w[1] - w[0]).collect();
        let spread = gaps.iter().cloned().fold(f64::MIN, f64::max) - gaps.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1e-3, "edge {edge}: gap spread {spread}");
        // at least the spacing apart, and one more cookie would not fit
        let n = arcs.len() as f64;
        for &g in &gaps {
            assert!(g >= 15.0 - 1e-3 && g * (n - 1.0) < 15.0 * n, "edge {edge}: gap {g}");
        }
    }
}

#[test]
fn stage_json_round_trip() {
    let s = stage();
    let json = serde_json::to_string(&s).unwrap();
    let back: GameSpace = serde_json::from_str(&json).unwrap();
    assert_eq!(back, s);
    assert_eq!(serde_json::to_string(&back).unwrap(), json);
}

#[test]
fn empty_region_is_rejected() {
    let far = at(3000.0, 3000.0);
    assert!(matches!(
        build_game_space(&extract(), far, GameSpaceConfig::default()),
        Err(GameSpaceError::EmptyGameSpace)
    ));
}

/// All-pairs distances by Floyd-Warshall, independent of the Dijkstra code.
fn floyd(space: &GameSpace) -> (Vec<NodeId>, Vec<Vec<f64>>) {
    let ids: Vec<NodeId> = space.graph.node_ids().to_vec();
    let idx = |n: NodeId| ids.iter().position(|&m| m == n).unwrap();
    let mut d = vec![vec![f64::INFINITY; ids.len()]; ids.len()];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for e in space.graph.edges() {
        let (a, b) = (idx(e.a), idx(e.b));
        let l = e.length.get();
        if l < d[a][b] {
            d[a][b] = l;
            d[b][a] = l;
        }
    }
    for k in 0..ids.len() {
        for i in 0..ids.len() {
            for j in 0..ids.len() {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    (ids, d)
}

/// Spawn nodes for a player heading to 1008 (the T1 start), frozen.
const SPAWN_FROM_1008: [i64; 4] = [1028, 1027, 1005, 1015];

#[test]
fn spawn_nodes_follow_farthest_rule() {
    let s = stage();
    let (ids, d) = floyd(&s);
    let from = ids.iter().position(|&n| n == NodeId(1008)).unwrap();
    let mut expected: Vec<(NodeId, f64)> = ids.iter().copied().zip(d[from].iter().copied()).collect();
    expected.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let order = spawn_order(&s, NodeId(1008)).unwrap();
    assert_eq!(order, expected.iter().map(|e| e.0).collect::<Vec<_>>());
    assert_eq!(order[..4], SPAWN_FROM_1008.map(NodeId));

    let state = pacmap_core::create_session(s, Default::default(), at(-29.0, 0.0)).unwrap();
    let spawned: Vec<NodeId> = state
        .ghosts
        .iter()
        .map(|g| g.path.as_ref().unwrap().start())
        .collect();
    assert_eq!(spawned, SPAWN_FROM_1008.map(NodeId).to_vec());
}
