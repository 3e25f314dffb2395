//! Headless driving: scripted traces, replay, synthetic grids and the
//! shortest-path latency benchmark.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game_space::GameSpace;
use crate::geodesy::{self, GeoPoint, GeodesyError, Meters};
use crate::osm::{EdgeSpec, GraphError, NodeId, RoadGraph};
use crate::pathfinding::{self, PathError};
use crate::session::{create_session, GameEvent, SessionConfig, SessionError, SessionState};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("trace line {line}: {message}")]
    BadTrace { line: usize, message: String },
    #[error("trace timestamps must increase strictly (fix {index})")]
    NotIncreasing { index: usize },
    #[error("grid needs at least 4 nodes, got {0}")]
    GridTooSmall(usize),
    #[error("benchmark needs a non-empty graph and at least one query")]
    EmptyBenchmark,
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Geodesy(#[from] GeodesyError),
}

/// One line of a trace file.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceFix {
    pub t: f64,
    pub lat: f64,
    pub lon: f64,
}

/// Timed position fixes with strictly increasing timestamps.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    fixes: Vec<(f64, GeoPoint)>,
}

impl Trace {
    pub fn new(fixes: Vec<(f64, GeoPoint)>) -> Result<Self, SimError> {
        for (i, w) in fixes.windows(2).enumerate() {
            if !(w[1].0 > w[0].0) {
                return Err(SimError::NotIncreasing { index: i + 1 });
            }
        }
        if let Some(i) = fixes.iter().position(|f| !f.0.is_finite()) {
            return Err(SimError::NotIncreasing { index: i });
        }
        Ok(Trace { fixes })
    }

    /// Reads JSON lines of `{"t":…,"lat":…,"lon":…}`; blank lines are skipped.
    pub fn parse_jsonl(text: &str) -> Result<Self, SimError> {
        let mut fixes = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| SimError::BadTrace { line: i + 1, message };
            let fix: TraceFix = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
            let p = GeoPoint::new(fix.lat, fix.lon).map_err(|e| bad(e.to_string()))?;
            fixes.push((fix.t, p));
        }
        Trace::new(fixes)
    }

    pub fn fixes(&self) -> &[(f64, GeoPoint)] {
        &self.fixes
    }

    pub fn is_empty(&self) -> bool {
        self.fixes.is_empty()
    }

    pub fn start(&self) -> Option<GeoPoint> {
        self.fixes.first().map(|f| f.1)
    }

    pub fn end_time(&self) -> f64 {
        self.fixes.last().map_or(0.0, |f| f.0)
    }
}

/// Plays `trace` against a fresh session and returns the final state.
///
/// The player starts at the first fix (the stage center for an empty
/// trace). Each fix is applied just before the first tick at or after its
/// timestamp, and ticking stops once the clock reaches `until`, which
/// defaults to the last fix time, or when the game ends.
pub fn replay(
    space: GameSpace,
    config: SessionConfig,
    trace: &Trace,
    until: Option<f64>,
) -> Result<SessionState, SimError> {
    let start = trace.start().unwrap_or(space.center);
    let mut state = create_session(space, config, start)?;
    let end = until.unwrap_or_else(|| trace.end_time());
    let mut fixes = trace.fixes().iter().peekable();
    while !state.phase.is_terminal() {
        let next_tick = state.next_tick_time();
        while let Some(&&(t, p)) = fixes.peek() {
            if t > next_tick || state.phase.is_terminal() {
                break;
            }
            state.apply_fix(p, t)?;
            fixes.next();
        }
        if state.phase.is_terminal() || (state.clock >= end && fixes.peek().is_none()) {
            break;
        }
        state.tick();
    }
    Ok(state)
}

/// The event log of [`replay`] with the default end time.
pub fn run_trace(space: GameSpace, config: SessionConfig, trace: &Trace) -> Result<Vec<GameEvent>, SimError> {
    Ok(replay(space, config, trace, None)?.events().to_vec())
}

/// Near-square grid of exactly `target_nodes` nodes whose edges are all
/// `edge_length` long.
///
/// Rows run due north from `origin`, `ceil(sqrt(n))` nodes per row, the
/// last row possibly partial. Node `i` has id `i`. Each row stays on one
/// parallel, with its longitude step solved so that east-west edges have
/// the requested geodesic length.
pub fn generate_synthetic_grid(
    target_nodes: usize,
    edge_length: Meters,
    origin: GeoPoint,
) -> Result<RoadGraph, SimError> {
    if target_nodes < 4 {
        return Err(SimError::GridTooSmall(target_nodes));
    }
    let cols = (target_nodes as f64).sqrt().ceil() as usize;
    let rows = target_nodes.div_ceil(cols);
    let len = edge_length.get();
    let mut nodes = Vec::with_capacity(target_nodes);
    for r in 0..rows {
        let row_start = geodesy::vincenty_direct(origin, 0.0, Meters(r as f64 * len))?;
        let step = longitude_step(row_start, len)?;
        for c in 0..cols {
            let i = r * cols + c;
            if i >= target_nodes {
                break;
            }
            nodes.push((NodeId(i as i64), GeoPoint::new(row_start.lat(), row_start.lon() + c as f64 * step)?));
        }
    }
    let mut specs = Vec::new();
    for i in 0..target_nodes {
        let (r, c) = (i / cols, i % cols);
        if c + 1 < cols && i + 1 < target_nodes {
            specs.push(EdgeSpec::straight(specs.len() as u32, i as i64, i as i64 + 1));
        }
        if r + 1 < rows && i + cols < target_nodes {
            specs.push(EdgeSpec::straight(specs.len() as u32, i as i64, (i + cols) as i64));
        }
    }
    Ok(RoadGraph::new(nodes, specs)?)
}

/// Longitude increment along the parallel of `at` spanning `len` meters.
fn longitude_step(at: GeoPoint, len: f64) -> Result<f64, SimError> {
    let east = |step: f64| -> Result<f64, SimError> {
        let q = GeoPoint::new(at.lat(), at.lon() + step)?;
        Ok(geodesy::vincenty_inverse(at, q)?.get() - len)
    };
    let cos_lat = at.lat().to_radians().cos();
    let mut x0 = len / (geodesy::WGS84_A * cos_lat) * 180.0 / std::f64::consts::PI;
    let mut x1 = x0 * 1.001;
    let (mut f0, mut f1) = (east(x0)?, east(x1)?);
    for _ in 0..50 {
        if f1 == f0 || f1.abs() < 1e-9 {
            break;
        }
        let x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        (x0, f0) = (x1, f1);
        x1 = x2;
        f1 = east(x1)?;
    }
    Ok(x1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub node_count: usize,
    pub edge_count: usize,
    pub query_count: usize,
    pub warmup_count: usize,
    pub seed: u64,
    pub min_ms: f64,
    pub median_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
    pub mean_ms: f64,
    pub queries: Vec<(NodeId, NodeId)>,
    pub path_lengths: Vec<f64>,
}

/// Number of untimed queries run before measuring.
pub const BENCH_WARMUP: usize = 50;

/// Deterministic random start/goal pairs.
pub fn bench_queries(graph: &RoadGraph, count: usize, seed: u64) -> Vec<(NodeId, NodeId)> {
    let ids = graph.node_ids();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (ids[rng.gen_range(0..ids.len())], ids[rng.gen_range(0..ids.len())]))
        .collect()
}

/// Times `queries` shortest-path calls after a warm-up batch. Only the
/// search is timed; building the graph is not.
pub fn bench_dijkstra(graph: &RoadGraph, queries: usize, seed: u64) -> Result<BenchReport, SimError> {
    if graph.is_empty() || queries == 0 {
        return Err(SimError::EmptyBenchmark);
    }
    let all = bench_queries(graph, BENCH_WARMUP + queries, seed);
    let (warmup, measured) = all.split_at(BENCH_WARMUP);
    for &(s, g) in warmup {
        std::hint::black_box(pathfinding::shortest_path(graph, s, g)?);
    }
    let mut millis = Vec::with_capacity(queries);
    let mut path_lengths = Vec::with_capacity(queries);
    for &(s, g) in measured {
        let t0 = Instant::now();
        let path = std::hint::black_box(pathfinding::shortest_path(graph, s, g)?);
        millis.push(t0.elapsed().as_secs_f64() * 1e3);
        path_lengths.push(path.total_length.get());
    }
    let mean_ms = millis.iter().sum::<f64>() / millis.len() as f64;
    millis.sort_by(f64::total_cmp);
    Ok(BenchReport {
        node_count: graph.node_count(),
        edge_count: graph.edge_count(),
        query_count: queries,
        warmup_count: BENCH_WARMUP,
        seed,
        min_ms: millis[0],
        median_ms: nearest_rank(&millis, 0.5),
        p99_ms: nearest_rank(&millis, 0.99),
        max_ms: millis[millis.len() - 1],
        mean_ms,
        queries: measured.to_vec(),
        path_lengths,
    })
}

/// Nearest-rank quantile of sorted, non-empty data.
fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}
