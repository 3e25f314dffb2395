#[path = "support/campus.rs"]
mod campus;

use std::path::Path;

use campus::*;
use pacmap_core::game_space::GameSpace;
use pacmap_core::geodesy::distance;
use pacmap_core::pathfinding::shortest_path;
use pacmap_core::session::{write_event_log, EventKind, SessionConfig};
use pacmap_core::sim::{self, bench_dijkstra, bench_queries, generate_synthetic_grid, Trace};
use pacmap_core::{Meters, NodeId, RoadGraph};

/// Compares `actual` with a committed file, or rewrites the file when
/// `PACMAP_BLESS` is set.
fn golden(path: &Path, actual: &str) {
    if std::env::var_os("PACMAP_BLESS").is_some() {
        std::fs::write(path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(path)
        .unwrap_or_else(|_| panic!("{} missing; run with PACMAP_BLESS=1", path.display()));
    assert!(expected == actual, "{} differs from the current output", path.display());
}

fn t1_log() -> String {
    let log = sim::run_trace(stage(), SessionConfig { seed: 42, ..SessionConfig::default() }, &t1()).unwrap();
    let mut out = Vec::new();
    write_event_log(&log, &mut out).unwrap();
    String::from_utf8(out).unwrap()
}

#[test]
fn t1_log_matches_golden() {
    golden(&repo_root().join("golden/T1.jsonl"), &t1_log());
}

#[test]
fn stage_matches_golden() {
    let json = serde_json::to_string_pretty(&stage()).unwrap() + "\n";
    golden(&repo_root().join("fixtures/campus.stage.json"), &json);
    let reloaded: GameSpace = serde_json::from_str(&json).unwrap();
    let trace = t1();
    let config = SessionConfig { seed: 42, ..SessionConfig::default() };
    assert_eq!(
        sim::run_trace(reloaded, config.clone(), &trace).unwrap(),
        sim::run_trace(stage(), config, &trace).unwrap()
    );
}

#[test]
fn t1_log_follows_the_rules() {
    let text = t1_log();
    let events: Vec<pacmap_core::GameEvent> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let fixes = events.iter().filter(|e| matches!(e.kind, EventKind::FixApplied { .. })).count();
    assert_eq!(fixes, 46);
    // one fix per second, each stamped with its own time
    let fix_times: Vec<f64> = events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::FixApplied { .. }))
        .map(|e| e.t)
        .collect();
    assert_eq!(fix_times, (1..=46).map(f64::from).collect::<Vec<_>>());
    // every pickup lies within the cookie radius of the fix applied then
    let space = stage();
    let mut last_fix = None;
    for e in &events {
        match e.kind {
            EventKind::FixApplied { lat, lon, .. } => last_fix = Some((e.t, pacmap_core::GeoPoint::new(lat, lon).unwrap())),
            EventKind::CookieCollected { cookie, .. } => {
                let (t, fix) = last_fix.unwrap();
                assert_eq!(t, e.t);
                let c = space.cookies.iter().find(|c| c.id == cookie).unwrap();
                assert!(distance(c.position, fix) <= 6.0);
            }
            _ => {}
        }
    }
    // no catch: the chaser never gets within reach during the walk
    assert!(!events.iter().any(|e| matches!(e.kind, EventKind::Caught { .. })));
}

#[test]
fn empty_trace_only_moves_ghosts() {
    let log = sim::run_trace(stage(), SessionConfig::default(), &Trace::new(Vec::new()).unwrap()).unwrap();
    assert!(log
        .iter()
        .all(|e| matches!(e.kind, EventKind::Replanned { .. } | EventKind::RouteAssigned { .. })));
}

fn grid(n: usize, edge: f64) -> RoadGraph {
    generate_synthetic_grid(n, Meters::new(edge).unwrap(), center()).unwrap()
}

#[test]
fn grid_of_420() {
    let g = grid(420, 50.0);
    assert_eq!(g.node_count(), 420);
    // 21 x 20 grid: m(n-1) + n(m-1)
    assert_eq!(g.edge_count(), 2 * 21 * 20 - 21 - 20);
    for e in g.edges() {
        let d = distance(g.position(e.a).unwrap(), g.position(e.b).unwrap());
        assert!((d - 50.0).abs() <= 1e-3, "edge {:?} is {d} m", e.id);
        assert!((e.length.get() - 50.0).abs() <= 1e-3);
    }
    assert_eq!(g.components().len(), 1);
}

#[test]
fn grid_trimming() {
    let g = grid(4, 10.0);
    assert_eq!((g.node_count(), g.edge_count()), (4, 4));
    // 7 nodes: rows of 3, 3, 1
    let g = grid(7, 10.0);
    assert_eq!((g.node_count(), g.edge_count()), (7, 2 + 2 + 3 + 1));
}

#[test]
fn four_node_grid_paths() {
    // 0 1
    // 2 3   (ids by row, rows going north)
    let g = grid(4, 10.0);
    let len = |a, b| shortest_path(&g, NodeId(a), NodeId(b)).unwrap().total_length.get();
    assert!((len(0, 1) - 10.0).abs() < 1e-3);
    assert!((len(0, 2) - 10.0).abs() < 1e-3);
    assert!((len(0, 3) - 20.0).abs() < 1e-3);
    assert!((len(1, 2) - 20.0).abs() < 1e-3);
    assert_eq!(shortest_path(&g, NodeId(3), NodeId(3)).unwrap().nodes, vec![NodeId(3)]);
}

#[test]
fn bench_report_shape() {
    let g = grid(64, 50.0);
    let a = bench_dijkstra(&g, 200, 7).unwrap();
    let b = bench_dijkstra(&g, 200, 7).unwrap();
    assert_eq!(a.queries, b.queries);
    assert_eq!(a.path_lengths, b.path_lengths);
    assert_eq!(a.queries[..], bench_queries(&g, 250, 7)[50..]);
    assert_eq!(a.query_count, 200);
    assert!(a.min_ms <= a.median_ms && a.median_ms <= a.p99_ms && a.p99_ms <= a.max_ms);
    for (&(s, t), &len) in a.queries.iter().zip(&a.path_lengths) {
        let p = g.position(s).unwrap();
        let q = g.position(t).unwrap();
        // on a grid the route is a Manhattan walk
        let (sx, sy) = (s.0 % 8, s.0 / 8);
        let (tx, ty) = (t.0 % 8, t.0 / 8);
        let manhattan = 50.0 * ((sx - tx).abs() + (sy - ty).abs()) as f64;
        assert!((len - manhattan).abs() < 1e-2, "{s:?}->{t:?}: {len} vs {manhattan}");
        assert!(len + 1e-6 >= distance(p, q));
    }
}
