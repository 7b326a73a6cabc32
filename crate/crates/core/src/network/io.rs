//! `nodes.csv` / `edges.csv` loading.

use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::Deserialize;

use super::{Edge, NetworkError, Node, NodeId, RoadNetwork};
use crate::network::Coord;

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Add a reverse edge (`{id}~rev`, negated gradient) for every input edge.
    pub bidirectional: bool,
}

#[derive(Debug, Deserialize)]
struct NodeRow {
    node_id: String,
    x_m: f64,
    y_m: f64,
}

#[derive(Debug, Deserialize)]
struct EdgeRow {
    edge_id: String,
    from_node: String,
    to_node: String,
    length_m: f64,
    speed_limit_mps: f64,
    gradient: f64,
}

pub fn load_network(nodes: &Path, edges: &Path, options: LoadOptions) -> Result<RoadNetwork, NetworkError> {
    let open = |p: &Path| File::open(p).map_err(|e| NetworkError::Io { file: p.display().to_string(), message: e.to_string() });
    load_network_from_readers(open(nodes)?, open(edges)?, options)
}

/// Row numbers in errors count data rows from 1 (the header is not counted).
pub fn load_network_from_readers<N: Read, E: Read>(nodes: N, edges: E, options: LoadOptions) -> Result<RoadNetwork, NetworkError> {
    let node_rows: Vec<NodeRow> = read_rows(nodes, "nodes.csv")?;
    let edge_rows: Vec<EdgeRow> = read_rows(edges, "edges.csv")?;

    let mut index: HashMap<&str, NodeId> = HashMap::new();
    let mut out_nodes = Vec::with_capacity(node_rows.len());
    for (i, row) in node_rows.iter().enumerate() {
        if index.insert(&row.node_id, NodeId(i as u32)).is_some() {
            return Err(NetworkError::DuplicateId { kind: "node", id: row.node_id.clone(), row: i + 1 });
        }
        out_nodes.push(Node { name: row.node_id.clone(), pos: Coord::new(row.x_m, row.y_m) });
    }

    let mut out_edges = Vec::with_capacity(edge_rows.len() * if options.bidirectional { 2 } else { 1 });
    let mut rows_of = Vec::with_capacity(out_edges.capacity());
    for (i, row) in edge_rows.iter().enumerate() {
        let lookup = |name: &str| index.get(name).copied().ok_or_else(|| NetworkError::UnknownNode { node: name.to_string(), row: i + 1 });
        let (from, to) = (lookup(&row.from_node)?, lookup(&row.to_node)?);
        out_edges.push(Edge {
            name: row.edge_id.clone(),
            from,
            to,
            length_m: row.length_m,
            speed_limit_mps: row.speed_limit_mps,
            gradient: row.gradient,
        });
        rows_of.push(i + 1);
        if options.bidirectional {
            out_edges.push(Edge {
                name: format!("{}~rev", row.edge_id),
                from: to,
                to: from,
                length_m: row.length_m,
                speed_limit_mps: row.speed_limit_mps,
                gradient: -row.gradient,
            });
            rows_of.push(i + 1);
        }
    }

    // RoadNetwork::new reports positions in its own edge list; map back to file rows.
    RoadNetwork::new(out_nodes, out_edges).map_err(|err| remap_row(err, &rows_of))
}

fn remap_row(err: NetworkError, rows_of: &[usize]) -> NetworkError {
    let map = |row: usize| rows_of.get(row - 1).copied().unwrap_or(row);
    match err {
        NetworkError::TooShort { edge, row, length, distance } => NetworkError::TooShort { edge, row: map(row), length, distance },
        NetworkError::NonPositive { edge, row, field, value } => NetworkError::NonPositive { edge, row: map(row), field, value },
        NetworkError::Gradient { edge, row, value } => NetworkError::Gradient { edge, row: map(row), value },
        NetworkError::DuplicateId { kind: "edge", id, row } => NetworkError::DuplicateId { kind: "edge", id, row: map(row) },
        other => other,
    }
}

fn read_rows<T: for<'de> Deserialize<'de>, R: Read>(reader: R, file: &str) -> Result<Vec<T>, NetworkError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize().enumerate() {
        out.push(rec.map_err(|e| NetworkError::Parse { file: file.to_string(), row: i + 1, message: e.to_string() })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const NODES: &str = "node_id,x_m,y_m\nA,0,0\nB,100,0\n";

    fn load(edges: &str) -> Result<RoadNetwork, NetworkError> {
        load_network_from_readers(NODES.as_bytes(), edges.as_bytes(), LoadOptions::default())
    }

    #[test]
    fn loads_single_edge() {
        let net = load("edge_id,from_node,to_node,length_m,speed_limit_mps,gradient\ne1,A,B,100,13.9,0.02\n").unwrap();
        assert_eq!(net.edge_count(), 1);
        assert_eq!(net.edge(net.edge_by_name("e1").unwrap()).gradient, 0.02);
    }

    #[test]
    fn unknown_node_names_row() {
        let err = load("edge_id,from_node,to_node,length_m,speed_limit_mps,gradient\ne1,A,B,100,13.9,0\ne2,A,Z,100,13.9,0\n").unwrap_err();
        assert_eq!(err.to_string(), "unknown node Z at row 2");
    }

    #[test]
    fn short_edge_rejected() {
        let err = load("edge_id,from_node,to_node,length_m,speed_limit_mps,gradient\ne1,A,B,90,13.9,0\n").unwrap_err();
        assert!(err.to_string().contains("length shorter than endpoint distance"), "{err}");
        assert!(err.to_string().contains("row 1"));
    }

    #[test]
    fn non_positive_speed_and_duplicates() {
        let err = load("edge_id,from_node,to_node,length_m,speed_limit_mps,gradient\ne1,A,B,100,0,0\n").unwrap_err();
        assert!(matches!(err, NetworkError::NonPositive { field: "speed limit", row: 1, .. }));
        let err = load_network_from_readers(
            "node_id,x_m,y_m\nA,0,0\nA,1,1\n".as_bytes(),
            "edge_id,from_node,to_node,length_m,speed_limit_mps,gradient\n".as_bytes(),
            LoadOptions::default(),
        )
        .unwrap_err();
        assert_eq!(err, NetworkError::DuplicateId { kind: "node", id: "A".into(), row: 2 });
    }

    #[test]
    fn bidirectional_expansion() {
        let net = load_network_from_readers(
            NODES.as_bytes(),
            "edge_id,from_node,to_node,length_m,speed_limit_mps,gradient\ne1,A,B,100,13.9,0.05\n".as_bytes(),
            LoadOptions { bidirectional: true },
        )
        .unwrap();
        assert_eq!(net.edge_count(), 2);
        let rev = net.edge(net.edge_by_name("e1~rev").unwrap());
        assert_eq!(rev.gradient, -0.05);
        assert_eq!(net.node(rev.from).name, "B");
    }

    #[test]
    fn malformed_number() {
        let err = load("edge_id,from_node,to_node,length_m,speed_limit_mps,gradient\ne1,A,B,abc,13.9,0\n").unwrap_err();
        assert!(matches!(err, NetworkError::Parse { row: 1, .. }));
    }
}
