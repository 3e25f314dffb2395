//! Exhaustive shortest simple path search for tiny graphs.
#![allow(dead_code)]

use rand::Rng;

use pacmap_core::osm::EdgeSpec;
use pacmap_core::{GeoPoint, NodeId, RoadGraph};

/// An undirected multigraph as `(a, b, length)` triples over nodes `0..n`.
#[derive(Debug, Clone)]
pub struct Tiny {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl Tiny {
    /// Connected random graph: a random spanning tree plus extra edges,
    /// parallel ones included.
    pub fn random<R: Rng>(rng: &mut R, max_nodes: usize) -> Tiny {
        let n = rng.gen_range(2..=max_nodes);
        let mut edges = Vec::new();
        for v in 1..n {
            let u = rng.gen_range(0..v);
            edges.push((u, v, rng.gen_range(0.5..100.0)));
        }
        for _ in 0..rng.gen_range(0..=2 * n) {
            let u = rng.gen_range(0..n);
            let v = rng.gen_range(0..n);
            if u != v {
                edges.push((u, v, rng.gen_range(0.5..100.0)));
            }
        }
        Tiny { n, edges }
    }

    pub fn to_graph(&self) -> RoadGraph {
        let nodes = (0..self.n).map(|i| {
            (NodeId(i as i64), GeoPoint::new(10.0 + i as f64 * 1e-3, 20.0 + (i % 3) as f64 * 1e-3).unwrap())
        });
        let specs = self
            .edges
            .iter()
            .enumerate()
            .map(|(id, &(a, b, len))| EdgeSpec::straight(id as u32, a as i64, b as i64).with_length(len))
            .collect();
        RoadGraph::new(nodes, specs).unwrap()
    }

    /// Shortest simple-path length from `s` to `t` by trying every simple path.
    pub fn shortest(&self, s: usize, t: usize) -> Option<f64> {
        fn go(g: &Tiny, at: usize, t: usize, seen: &mut Vec<bool>, acc: f64, best: &mut Option<f64>) {
            if at == t {
                if best.is_none_or(|b| acc < b) {
                    *best = Some(acc);
                }
                return;
            }
            for &(a, b, len) in &g.edges {
                let next = if a == at { b } else if b == at { a } else { continue };
                if seen[next] {
                    continue;
                }
                seen[next] = true;
                go(g, next, t, seen, acc + len, best);
                seen[next] = false;
            }
        }
        let mut seen = vec![false; self.n];
        seen[s] = true;
        let mut best = None;
        go(self, s, t, &mut seen, 0.0, &mut best);
        best
    }
}
