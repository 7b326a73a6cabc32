//! Dijkstra routing between directed edges.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::{EdgeId, NetworkError, NodeId, RoadNetwork, Route};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteWeight {
    Distance,
    #[default]
    TravelTime,
}

/// Edge cost under a weight mode at a fixed departure hour.
#[derive(Debug, Clone, Copy)]
pub struct TravelCost {
    pub weight: RouteWeight,
    pub hour: usize,
}

impl TravelCost {
    pub fn edge_cost(&self, net: &RoadNetwork, edge: EdgeId) -> f64 {
        let e = net.edge(edge);
        match self.weight {
            RouteWeight::Distance => e.length_m,
            RouteWeight::TravelTime => e.length_m / net.effective_speed(edge, self.hour),
        }
    }

    pub fn route_cost(&self, net: &RoadNetwork, route: &Route) -> f64 {
        route.edges.iter().map(|&e| self.edge_cost(net, e)).sum()
    }
}

#[derive(Debug, PartialEq)]
struct Frontier {
    cost: f64,
    node: NodeId,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (cost, node)
        other.cost.total_cmp(&self.cost).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl RoadNetwork {
    /// Minimal-cost route from the end of `from` to the start of `to`, including
    /// both edges. Travel-time costs use the congestion factor of `hour`.
    pub fn shortest_path(&self, from: EdgeId, to: EdgeId, cost: TravelCost) -> Result<Route, NetworkError> {
        for e in [from, to] {
            if e.0 as usize >= self.edge_count() {
                return Err(NetworkError::UnknownEdge(format!("#{}", e.0)));
            }
        }
        if from == to {
            return Ok(Route { edges: vec![from], total_length_m: self.edge(from).length_m });
        }
        let middle = self
            .node_path(self.edge(from).to, self.edge(to).from, cost)
            .ok_or_else(|| NetworkError::NoRoute { from: self.edge_name(from).to_string(), to: self.edge_name(to).to_string() })?;
        let mut edges = Vec::with_capacity(middle.len() + 2);
        edges.push(from);
        edges.extend(middle);
        edges.push(to);
        let total_length_m = edges.iter().map(|&e| self.edge(e).length_m).sum();
        Ok(Route { edges, total_length_m })
    }

    /// Route that leaves `edge` and comes back around to traverse it again:
    /// `[edge, ..., edge]`.
    pub fn loop_route(&self, edge: EdgeId, cost: TravelCost) -> Result<Route, NetworkError> {
        if edge.0 as usize >= self.edge_count() {
            return Err(NetworkError::UnknownEdge(format!("#{}", edge.0)));
        }
        let middle = self
            .node_path(self.edge(edge).to, self.edge(edge).from, cost)
            .ok_or_else(|| NetworkError::NoRoute { from: self.edge_name(edge).to_string(), to: self.edge_name(edge).to_string() })?;
        let mut edges = Vec::with_capacity(middle.len() + 2);
        edges.push(edge);
        edges.extend(middle);
        edges.push(edge);
        let total_length_m = edges.iter().map(|&e| self.edge(e).length_m).sum();
        Ok(Route { edges, total_length_m })
    }

    /// Dijkstra between two nodes; the edge sequence, empty if they coincide.
    fn node_path(&self, source: NodeId, target: NodeId, cost: TravelCost) -> Option<Vec<EdgeId>> {
        let n = self.node_count();
        let mut dist = vec![f64::INFINITY; n];
        let mut via: Vec<Option<EdgeId>> = vec![None; n];
        let mut heap = BinaryHeap::new();
        dist[source.0 as usize] = 0.0;
        heap.push(Frontier { cost: 0.0, node: source });
        while let Some(Frontier { cost: d, node }) = heap.pop() {
            if d > dist[node.0 as usize] {
                continue;
            }
            if node == target {
                break;
            }
            for &e in self.out_edges(node) {
                let next = self.edge(e).to;
                let nd = d + cost.edge_cost(self, e);
                if nd < dist[next.0 as usize] {
                    dist[next.0 as usize] = nd;
                    via[next.0 as usize] = Some(e);
                    heap.push(Frontier { cost: nd, node: next });
                }
            }
        }
        if !dist[target.0 as usize].is_finite() {
            return None;
        }
        let mut path = Vec::new();
        let mut at = target;
        while at != source {
            let e = via[at.0 as usize].expect("reached node has a predecessor");
            path.push(e);
            at = self.edge(e).from;
        }
        path.reverse();
        Some(path)
    }
}
