//! Planar road network: directed edges between nodes in meter coordinates.

mod grid;
mod io;
mod routing;
mod spatial;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use grid::generate_grid;
pub use io::{load_network, load_network_from_readers, LoadOptions};
pub use routing::{RouteWeight, TravelCost};

use spatial::SpatialIndex;

/// Planar position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Coord {
    pub x: f64,
    pub y: f64,
}

impl Coord {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Straight-line (air-line) distance between two points.
pub fn airline_distance(a: Coord, b: Coord) -> f64 {
    (b.x - a.x).hypot(b.y - a.y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeId(pub u32);

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub pos: Coord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub name: String,
    pub from: NodeId,
    pub to: NodeId,
    pub length_m: f64,
    pub speed_limit_mps: f64,
    /// Signed rise over run.
    pub gradient: f64,
}

/// Hour-of-day multiplicative speed factor applied to every edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CongestionProfile {
    pub hourly: [f64; 24],
}

impl CongestionProfile {
    pub fn free_flow() -> Self {
        Self { hourly: [1.0; 24] }
    }

    pub fn factor(&self, hour: usize) -> f64 {
        self.hourly[hour % 24]
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("cannot read {file}: {message}")]
    Io { file: String, message: String },
    #[error("malformed {file} at row {row}: {message}")]
    Parse { file: String, row: usize, message: String },
    #[error("unknown node {node} at row {row}")]
    UnknownNode { node: String, row: usize },
    #[error("duplicate {kind} id {id} at row {row}")]
    DuplicateId { kind: &'static str, id: String, row: usize },
    #[error("edge {edge} at row {row}: length shorter than endpoint distance ({length} < {distance})")]
    TooShort { edge: String, row: usize, length: f64, distance: f64 },
    #[error("edge {edge} at row {row}: {field} must be positive and finite, got {value}")]
    NonPositive { edge: String, row: usize, field: &'static str, value: f64 },
    #[error("edge {edge} at row {row}: |gradient| must be < 1, got {value}")]
    Gradient { edge: String, row: usize, value: f64 },
    #[error("node {node} at row {row}: coordinates must be finite")]
    NonFinite { node: String, row: usize },
    #[error("congestion factor for hour {hour} must lie in (0, 1], got {value}")]
    Congestion { hour: usize, value: f64 },
    #[error("degenerate grid: {0}")]
    Degenerate(String),
    #[error("network has no edges")]
    Empty,
    #[error("unknown edge {0}")]
    UnknownEdge(String),
    #[error("no route from edge {from} to edge {to}")]
    NoRoute { from: String, to: String },
}

/// Shortest-path result. Includes both the origin and destination edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub edges: Vec<EdgeId>,
    pub total_length_m: f64,
}

impl Route {
    pub fn origin(&self) -> EdgeId {
        self.edges[0]
    }

    pub fn destination(&self) -> EdgeId {
        *self.edges.last().expect("route is never empty")
    }

    /// Edges a vehicle drives when it starts parked at the end of the origin edge.
    pub fn driven_edges(&self) -> &[EdgeId] {
        &self.edges[1..]
    }

    pub fn driven_length_m(&self, net: &RoadNetwork) -> f64 {
        self.driven_edges().iter().map(|&e| net.edge(e).length_m).sum()
    }
}

/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct RoadNetwork {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    node_index: HashMap<String, NodeId>,
    edge_index: HashMap<String, EdgeId>,
    out_edges: Vec<Vec<EdgeId>>,
    congestion: CongestionProfile,
    spatial: SpatialIndex,
}

/// Relative slack when comparing an edge length to its endpoint distance.
const LENGTH_TOLERANCE: f64 = 1e-6;

impl RoadNetwork {
    /// Validates and indexes a node/edge set. Row numbers in errors are 1-based
    /// positions in the respective input list.
    pub fn new(nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self, NetworkError> {
        let mut node_index = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            if !node.pos.is_finite() {
                return Err(NetworkError::NonFinite { node: node.name.clone(), row: i + 1 });
            }
            if node_index.insert(node.name.clone(), NodeId(i as u32)).is_some() {
                return Err(NetworkError::DuplicateId { kind: "node", id: node.name.clone(), row: i + 1 });
            }
        }
        let mut edge_index = HashMap::with_capacity(edges.len());
        let mut out_edges = vec![Vec::new(); nodes.len()];
        for (i, edge) in edges.iter().enumerate() {
            let row = i + 1;
            for (field, value) in [("length", edge.length_m), ("speed limit", edge.speed_limit_mps)] {
                if !(value.is_finite() && value > 0.0) {
                    return Err(NetworkError::NonPositive { edge: edge.name.clone(), row, field, value });
                }
            }
            if !(edge.gradient.is_finite() && edge.gradient.abs() < 1.0) {
                return Err(NetworkError::Gradient { edge: edge.name.clone(), row, value: edge.gradient });
            }
            for n in [edge.from, edge.to] {
                if n.0 as usize >= nodes.len() {
                    return Err(NetworkError::UnknownNode { node: format!("#{}", n.0), row });
                }
            }
            let distance = airline_distance(nodes[edge.from.0 as usize].pos, nodes[edge.to.0 as usize].pos);
            if edge.length_m < distance * (1.0 - LENGTH_TOLERANCE) {
                return Err(NetworkError::TooShort { edge: edge.name.clone(), row, length: edge.length_m, distance });
            }
            if edge_index.insert(edge.name.clone(), EdgeId(i as u32)).is_some() {
                return Err(NetworkError::DuplicateId { kind: "edge", id: edge.name.clone(), row });
            }
            out_edges[edge.from.0 as usize].push(EdgeId(i as u32));
        }
        let spatial = SpatialIndex::build(&nodes, &edges);
        Ok(Self { nodes, edges, node_index, edge_index, out_edges, congestion: CongestionProfile::free_flow(), spatial })
    }

    pub fn with_congestion(mut self, profile: CongestionProfile) -> Result<Self, NetworkError> {
        for (hour, &value) in profile.hourly.iter().enumerate() {
            if !(value > 0.0 && value <= 1.0) {
                return Err(NetworkError::Congestion { hour, value });
            }
        }
        self.congestion = profile;
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0 as usize]
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id.0 as usize]
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &Node)> {
        self.nodes.iter().enumerate().map(|(i, n)| (NodeId(i as u32), n))
    }

    pub fn edges(&self) -> impl Iterator<Item = (EdgeId, &Edge)> {
        self.edges.iter().enumerate().map(|(i, e)| (EdgeId(i as u32), e))
    }

    pub fn out_edges(&self, node: NodeId) -> &[EdgeId] {
        &self.out_edges[node.0 as usize]
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.node_index.get(name).copied()
    }

    pub fn edge_by_name(&self, name: &str) -> Option<EdgeId> {
        self.edge_index.get(name).copied()
    }

    pub fn edge_name(&self, id: EdgeId) -> &str {
        &self.edges[id.0 as usize].name
    }

    pub fn congestion(&self) -> &CongestionProfile {
        &self.congestion
    }

    /// Speed limit scaled by the congestion factor of `hour`.
    pub fn effective_speed(&self, edge: EdgeId, hour: usize) -> f64 {
        self.edge(edge).speed_limit_mps * self.congestion.factor(hour)
    }

    pub fn edge_start(&self, edge: EdgeId) -> Coord {
        self.node(self.edge(edge).from).pos
    }

    pub fn edge_end(&self, edge: EdgeId) -> Coord {
        self.node(self.edge(edge).to).pos
    }

    /// Edge minimizing point-to-segment distance; ties go to the smallest id.
    pub fn nearest_edge(&self, p: Coord) -> Result<EdgeId, NetworkError> {
        if self.edges.is_empty() {
            return Err(NetworkError::Empty);
        }
        Ok(self.spatial.nearest(p, &self.nodes, &self.edges))
    }

    /// Distance from `p` to the straight segment of `edge`.
    pub fn distance_to_edge(&self, edge: EdgeId, p: Coord) -> f64 {
        let e = self.edge(edge);
        point_segment_distance(p, self.node(e.from).pos, self.node(e.to).pos)
    }
}

pub(crate) fn point_segment_distance(p: Coord, a: Coord, b: Coord) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 { (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    airline_distance(p, Coord::new(a.x + t * dx, a.y + t * dy))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(name: &str, x: f64, y: f64) -> Node {
        Node { name: name.into(), pos: Coord::new(x, y) }
    }

    fn edge(name: &str, from: u32, to: u32, length: f64) -> Edge {
        Edge { name: name.into(), from: NodeId(from), to: NodeId(to), length_m: length, speed_limit_mps: 13.9, gradient: 0.0 }
    }

    #[test]
    fn airline_distance_values() {
        assert_eq!(airline_distance(Coord::new(0.0, 0.0), Coord::new(0.0, 0.0)), 0.0);
        assert_eq!(airline_distance(Coord::new(0.0, 0.0), Coord::new(3.0, 4.0)), 5.0);
        // sqrt(3.5^2 + 16.3^2) = sqrt(277.94), evaluated by hand
        let d = airline_distance(Coord::new(1.2, -7.0), Coord::new(4.7, 9.3));
        assert!((d - 16.6715326230074).abs() < 1e-12, "{d}");
    }

    #[test]
    fn rejects_invalid_edges() {
        let nodes = vec![node("A", 0.0, 0.0), node("B", 100.0, 0.0)];
        let err = RoadNetwork::new(nodes.clone(), vec![edge("e", 0, 1, 90.0)]).unwrap_err();
        assert!(err.to_string().contains("length shorter than endpoint distance"));
        let mut steep = edge("e", 0, 1, 100.0);
        steep.gradient = 1.0;
        assert!(matches!(RoadNetwork::new(nodes.clone(), vec![steep]), Err(NetworkError::Gradient { .. })));
        let err = RoadNetwork::new(nodes, vec![edge("e", 0, 1, 100.0), edge("e", 1, 0, 100.0)]).unwrap_err();
        assert_eq!(err, NetworkError::DuplicateId { kind: "edge", id: "e".into(), row: 2 });
    }

    #[test]
    fn nearest_edge_on_midpoint_and_tie() {
        let nodes = vec![node("A", 0.0, 0.0), node("B", 100.0, 0.0), node("C", 0.0, 100.0)];
        let net = RoadNetwork::new(nodes, vec![edge("ab", 0, 1, 100.0), edge("ac", 0, 2, 100.0), edge("ba", 1, 0, 100.0)]).unwrap();
        assert_eq!(net.nearest_edge(Coord::new(50.0, 0.0)).unwrap(), EdgeId(0));
        // equidistant from ab and ac
        assert_eq!(net.nearest_edge(Coord::new(-10.0, -10.0)).unwrap(), EdgeId(0));
        assert_eq!(net.nearest_edge(Coord::new(0.0, 60.0)).unwrap(), EdgeId(1));
    }

    #[test]
    fn empty_network_has_no_nearest_edge() {
        let net = RoadNetwork::new(vec![node("A", 0.0, 0.0)], vec![]).unwrap();
        assert_eq!(net.nearest_edge(Coord::new(1.0, 1.0)), Err(NetworkError::Empty));
    }

    #[test]
    fn congestion_factor_range_checked() {
        let net = RoadNetwork::new(vec![node("A", 0.0, 0.0), node("B", 10.0, 0.0)], vec![edge("e", 0, 1, 10.0)]).unwrap();
        let mut profile = CongestionProfile::free_flow();
        profile.hourly[8] = 0.5;
        let net = net.with_congestion(profile.clone()).unwrap();
        assert!((net.effective_speed(EdgeId(0), 8) - 6.95).abs() < 1e-12);
        profile.hourly[3] = 0.0;
        assert!(net.with_congestion(profile).is_err());
    }
}
