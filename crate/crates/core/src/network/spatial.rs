//! Uniform bucket grid over edge bounding boxes for nearest-edge queries.

use super::{point_segment_distance, Coord, Edge, EdgeId, Node};

#[derive(Debug, Clone)]
pub(super) struct SpatialIndex {
    origin: Coord,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<EdgeId>>,
}

impl SpatialIndex {
    pub(super) fn build(nodes: &[Node], edges: &[Edge]) -> Self {
        let (mut lo, mut hi) = (Coord::new(f64::INFINITY, f64::INFINITY), Coord::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
        for e in edges {
            for n in [e.from, e.to] {
                let p = nodes[n.0 as usize].pos;
                lo = Coord::new(lo.x.min(p.x), lo.y.min(p.y));
                hi = Coord::new(hi.x.max(p.x), hi.y.max(p.y));
            }
        }
        if edges.is_empty() {
            return Self { origin: Coord::default(), cell: 1.0, nx: 1, ny: 1, buckets: vec![Vec::new()] };
        }
        let extent = (hi.x - lo.x).max(hi.y - lo.y).max(1.0);
        let mean_len = edges.iter().map(|e| super::airline_distance(nodes[e.from.0 as usize].pos, nodes[e.to.0 as usize].pos)).sum::<f64>()
            / edges.len() as f64;
        // at most 256 cells per side; never smaller than a typical edge
        let cell = mean_len.max(extent / 256.0).max(1e-3);
        let nx = (((hi.x - lo.x) / cell).floor() as usize + 1).max(1);
        let ny = (((hi.y - lo.y) / cell).floor() as usize + 1).max(1);
        let mut index = Self { origin: lo, cell, nx, ny, buckets: vec![Vec::new(); nx * ny] };
        for (i, e) in edges.iter().enumerate() {
            let a = nodes[e.from.0 as usize].pos;
            let b = nodes[e.to.0 as usize].pos;
            let (i0, j0) = index.cell_of(Coord::new(a.x.min(b.x), a.y.min(b.y)));
            let (i1, j1) = index.cell_of(Coord::new(a.x.max(b.x), a.y.max(b.y)));
            for j in j0..=j1 {
                for ii in i0..=i1 {
                    index.buckets[j * nx + ii].push(EdgeId(i as u32));
                }
            }
        }
        index
    }

    fn cell_of(&self, p: Coord) -> (usize, usize) {
        let fx = ((p.x - self.origin.x) / self.cell).floor();
        let fy = ((p.y - self.origin.y) / self.cell).floor();
        (fx.clamp(0.0, (self.nx - 1) as f64) as usize, fy.clamp(0.0, (self.ny - 1) as f64) as usize)
    }

    fn rect(&self, i0: usize, j0: usize, i1: usize, j1: usize) -> (Coord, Coord) {
        (
            Coord::new(self.origin.x + i0 as f64 * self.cell, self.origin.y + j0 as f64 * self.cell),
            Coord::new(self.origin.x + (i1 + 1) as f64 * self.cell, self.origin.y + (j1 + 1) as f64 * self.cell),
        )
    }

    /// Lower bound on the distance from `p` to anything stored outside the
    /// covered cell block `[i0, i1] x [j0, j1]`.
    fn outside_bound(&self, p: Coord, i0: usize, j0: usize, i1: usize, j1: usize) -> f64 {
        let mut bound = f64::INFINITY;
        let (nx, ny) = (self.nx - 1, self.ny - 1);
        if i0 > 0 {
            bound = bound.min(rect_distance(p, self.rect(0, 0, i0 - 1, ny)));
        }
        if i1 < nx {
            bound = bound.min(rect_distance(p, self.rect(i1 + 1, 0, nx, ny)));
        }
        if j0 > 0 {
            bound = bound.min(rect_distance(p, self.rect(0, 0, nx, j0 - 1)));
        }
        if j1 < ny {
            bound = bound.min(rect_distance(p, self.rect(0, j1 + 1, nx, ny)));
        }
        bound
    }

    pub(super) fn nearest(&self, p: Coord, nodes: &[Node], edges: &[Edge]) -> EdgeId {
        let (ci, cj) = self.cell_of(p);
        let mut best: Option<(f64, EdgeId)> = None;
        let consider = |id: EdgeId, best: &mut Option<(f64, EdgeId)>| {
            let e = &edges[id.0 as usize];
            let d = point_segment_distance(p, nodes[e.from.0 as usize].pos, nodes[e.to.0 as usize].pos);
            match best {
                Some((bd, bid)) if d > *bd || (d == *bd && id >= *bid) => {}
                _ => *best = Some((d, id)),
            }
        };
        for r in 0.. {
            let i0 = ci.saturating_sub(r);
            let j0 = cj.saturating_sub(r);
            let i1 = (ci + r).min(self.nx - 1);
            let j1 = (cj + r).min(self.ny - 1);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let on_ring = i + r == ci || i == ci + r || j + r == cj || j == cj + r;
                    if !on_ring {
                        continue;
                    }
                    for &id in &self.buckets[j * self.nx + i] {
                        consider(id, &mut best);
                    }
                }
            }
            let covers_all = i0 == 0 && j0 == 0 && i1 == self.nx - 1 && j1 == self.ny - 1;
            if covers_all {
                break;
            }
            if let Some((bd, _)) = best {
                if self.outside_bound(p, i0, j0, i1, j1) > bd {
                    break;
                }
            }
        }
        best.expect("non-empty index").1
    }
}

fn rect_distance(p: Coord, (lo, hi): (Coord, Coord)) -> f64 {
    let dx = (lo.x - p.x).max(0.0).max(p.x - hi.x);
    let dy = (lo.y - p.y).max(0.0).max(p.y - hi.y);
    dx.hypot(dy)
}
