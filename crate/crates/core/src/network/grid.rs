use super::{Coord, Edge, NetworkError, Node, NodeId, RoadNetwork};

/// Manhattan grid of `rows x cols` nodes spaced `edge_length` apart, with a
/// directed edge in each direction per segment and zero gradient.
///
/// Nodes are named `r{row}c{col}`, edges `{from}-{to}`.
pub fn generate_grid(rows: usize, cols: usize, edge_length: f64, speed_limit: f64) -> Result<RoadNetwork, NetworkError> {
    if rows < 2 || cols < 2 {
        return Err(NetworkError::Degenerate(format!("need at least 2x2 nodes, got {rows}x{cols}")));
    }
    if !(edge_length.is_finite() && edge_length > 0.0) || !(speed_limit.is_finite() && speed_limit > 0.0) {
        return Err(NetworkError::Degenerate(format!("edge length and speed limit must be positive, got {edge_length} and {speed_limit}")));
    }
    let id = |r: usize, c: usize| NodeId((r * cols + c) as u32);
    let mut nodes = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            nodes.push(Node { name: format!("r{r}c{c}"), pos: Coord::new(c as f64 * edge_length, r as f64 * edge_length) });
        }
    }
    let mut edges = Vec::with_capacity(2 * (rows * (cols - 1) + cols * (rows - 1)));
    let mut link = |a: NodeId, b: NodeId| {
        for (from, to) in [(a, b), (b, a)] {
            edges.push(Edge {
                name: format!("{}-{}", nodes[from.0 as usize].name, nodes[to.0 as usize].name),
                from,
                to,
                length_m: edge_length,
                speed_limit_mps: speed_limit,
                gradient: 0.0,
            });
        }
    };
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                link(id(r, c), id(r, c + 1));
            }
            if r + 1 < rows {
                link(id(r, c), id(r + 1, c));
            }
        }
    }
    RoadNetwork::new(nodes, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        let net = generate_grid(2, 2, 100.0, 13.9).unwrap();
        assert_eq!((net.node_count(), net.edge_count()), (4, 8));
        // 3 rows x 2 horizontal + 3 cols x 2 vertical = 12 segments
        let net = generate_grid(3, 3, 100.0, 13.9).unwrap();
        assert_eq!((net.node_count(), net.edge_count()), (9, 24));
    }

    #[test]
    fn degenerate_dimensions() {
        assert!(matches!(generate_grid(1, 5, 100.0, 13.9), Err(NetworkError::Degenerate(_))));
        assert!(generate_grid(3, 3, 0.0, 13.9).is_err());
        assert!(generate_grid(3, 3, 100.0, -1.0).is_err());
    }

    #[test]
    fn names_are_readable() {
        let net = generate_grid(2, 3, 50.0, 10.0).unwrap();
        let e = net.edge_by_name("r0c1-r0c2").unwrap();
        assert_eq!(net.edge_end(e), Coord::new(100.0, 0.0));
        assert!(net.edge_by_name("r0c2-r0c1").is_some());
    }
}
