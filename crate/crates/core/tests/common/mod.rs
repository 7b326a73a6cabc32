#![allow(dead_code)]

use std::path::PathBuf;

use evfleet::network::{Edge, Node};
use evfleet::scenario::Scenario;
use evfleet::{Coord, NodeId, RoadNetwork};
use rand::Rng;

pub fn bundled_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/default.toml")
}

pub fn bundled() -> Scenario {
    Scenario::load(&bundled_path()).expect("bundled scenario loads")
}

/// Random directed network with `n` nodes and up to `m` edges; lengths are at
/// least the endpoint distance.
pub fn random_network<R: Rng>(rng: &mut R, n: usize, m: usize) -> RoadNetwork {
    let nodes: Vec<Node> =
        (0..n).map(|i| Node { name: format!("n{i}"), pos: Coord::new(rng.gen_range(0.0..1000.0), rng.gen_range(0.0..1000.0)) }).collect();
    let mut edges = Vec::with_capacity(m);
    for i in 0..m {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a == b {
            continue;
        }
        let (pa, pb) = (nodes[a].pos, nodes[b].pos);
        let straight = ((pa.x - pb.x).powi(2) + (pa.y - pb.y).powi(2)).sqrt();
        edges.push(Edge {
            name: format!("e{i}"),
            from: NodeId(a as u32),
            to: NodeId(b as u32),
            length_m: straight * rng.gen_range(1.0..1.5) + 1.0,
            speed_limit_mps: rng.gen_range(5.0..30.0),
            gradient: 0.0,
        });
    }
    if edges.is_empty() {
        let (pa, pb) = (nodes[0].pos, nodes[1].pos);
        let straight = ((pa.x - pb.x).powi(2) + (pa.y - pb.y).powi(2)).sqrt();
        edges.push(Edge {
            name: "e".into(),
            from: NodeId(0),
            to: NodeId(1),
            length_m: straight + 1.0,
            speed_limit_mps: 10.0,
            gradient: 0.0,
        });
    }
    RoadNetwork::new(nodes, edges).expect("random network is valid")
}

/// Point-to-segment distance, written independently of the library.
pub fn segment_distance(p: Coord, a: Coord, b: Coord) -> f64 {
    let (vx, vy) = (b.x - a.x, b.y - a.y);
    let (wx, wy) = (p.x - a.x, p.y - a.y);
    let c1 = vx * wx + vy * wy;
    if c1 <= 0.0 {
        return (wx * wx + wy * wy).sqrt();
    }
    let c2 = vx * vx + vy * vy;
    if c2 <= c1 {
        return ((p.x - b.x).powi(2) + (p.y - b.y).powi(2)).sqrt();
    }
    let t = c1 / c2;
    let (qx, qy) = (a.x + t * vx, a.y + t * vy);
    ((p.x - qx).powi(2) + (p.y - qy).powi(2)).sqrt()
}
