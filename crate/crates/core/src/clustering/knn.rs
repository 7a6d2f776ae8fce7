use crate::error::{Error, Result};
use crate::hypergraph::{Hyperedge, Hypergraph};

use super::PointSet;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct KnnConfig {
    pub k: usize,
    /// Gaussian bandwidth; `None` uses the mean k-nearest-neighbor distance.
    pub sigma: Option<f64>,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self { k: 12, sigma: None }
    }
}

/// kNN hypergraph over the distinct points of a point set.
#[derive(Debug, Clone)]
pub struct KnnHypergraph {
    pub hypergraph: Hypergraph,
    /// Vertex index of each input point; duplicates share a vertex.
    pub vertex_of_point: Vec<usize>,
    /// Coordinates of each vertex.
    pub vertices: Vec<[f64; 2]>,
    pub sigma: f64,
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// One hyperedge per distinct point: the point and its `k` nearest
/// neighbors. Membership is `exp(−d(v, centroid)²/σ²)` scaled so the largest
/// member is 1; the weight is the mean pairwise Gaussian similarity of the
/// members.
pub fn knn_hyperedges(ps: &PointSet, cfg: &KnnConfig) -> Result<KnnHypergraph> {
    let mut vertices: Vec<[f64; 2]> = Vec::new();
    let mut vertex_of_point = Vec::with_capacity(ps.points.len());
    {
        let mut order: Vec<usize> = (0..ps.points.len()).collect();
        order.sort_by(|&a, &b| {
            let (pa, pb) = (ps.points[a], ps.points[b]);
            pa[0].total_cmp(&pb[0]).then(pa[1].total_cmp(&pb[1])).then(a.cmp(&b))
        });
        // Vertex ids follow first appearance in input order.
        let mut canonical = vec![usize::MAX; ps.points.len()];
        let mut k = 0;
        while k < order.len() {
            let mut end = k + 1;
            while end < order.len() && ps.points[order[end]] == ps.points[order[k]] {
                end += 1;
            }
            let first = order[k..end].iter().copied().min().unwrap();
            for &idx in &order[k..end] {
                canonical[idx] = first;
            }
            k = end;
        }
        let mut id_of_first = vec![usize::MAX; ps.points.len()];
        for &first in &canonical {
            if id_of_first[first] == usize::MAX {
                id_of_first[first] = vertices.len();
                vertices.push(ps.points[first]);
            }
            vertex_of_point.push(id_of_first[first]);
        }
    }

    let n = vertices.len();
    if cfg.k < 2 || cfg.k >= n {
        return Err(Error::InvalidParameter(format!(
            "k = {} must satisfy 2 <= k < {n} distinct points",
            cfg.k
        )));
    }

    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut others: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (dist2(vertices[i], vertices[j]), j))
                .collect();
            others.select_nth_unstable_by(cfg.k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut nn: Vec<(f64, usize)> = others[..cfg.k].to_vec();
            nn.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            nn.into_iter().map(|(_, j)| j).collect()
        })
        .collect();

    let sigma = match cfg.sigma {
        Some(s) if s > 0.0 && s.is_finite() => s,
        Some(s) => return Err(Error::InvalidParameter(format!("sigma = {s} must be positive"))),
        None => {
            let total: f64 = neighbors
                .iter()
                .enumerate()
                .flat_map(|(i, nn)| nn.iter().map(move |&j| (i, j)))
                .map(|(i, j)| dist2(vertices[i], vertices[j]).sqrt())
                .sum();
            let mean = total / (n * cfg.k) as f64;
            if mean > 0.0 {
                mean
            } else {
                1.0
            }
        }
    };
    let s2 = sigma * sigma;

    let edges = (0..n)
        .map(|i| {
            let mut members = vec![i];
            members.extend_from_slice(&neighbors[i]);
            let count = members.len() as f64;
            let cx = members.iter().map(|&v| vertices[v][0]).sum::<f64>() / count;
            let cy = members.iter().map(|&v| vertices[v][1]).sum::<f64>() / count;
            let raw: Vec<f64> = members
                .iter()
                .map(|&v| (-dist2(vertices[v], [cx, cy]) / s2).exp())
                .collect();
            let top = raw.iter().copied().fold(0.0, f64::max);
            let mut pair_sum = 0.0;
            let mut pairs = 0usize;
            for a in 0..members.len() {
                for b in a + 1..members.len() {
                    pair_sum += (-dist2(vertices[members[a]], vertices[members[b]]) / s2).exp();
                    pairs += 1;
                }
            }
            let membership = raw.iter().map(|&h| {
                // Far members can underflow; keep them at the smallest
                // positive membership.
                (h / top).max(f64::MIN_POSITIVE)
            });
            Hyperedge::new(pair_sum / pairs as f64, members.iter().copied().zip(membership))
        })
        .collect();

    Ok(KnnHypergraph {
        hypergraph: Hypergraph::new(n, edges)?,
        vertex_of_point,
        vertices,
        sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ps(points: &[[f64; 2]]) -> PointSet {
        PointSet::new(points.to_vec(), None).unwrap()
    }

    #[test]
    fn collinear_triple() {
        let g = knn_hyperedges(&ps(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]), &KnnConfig { k: 2, sigma: None })
            .unwrap();
        assert_eq!(g.hypergraph.edge_count(), 3);
        for e in g.hypergraph.hyperedges() {
            let vs: Vec<usize> = e.members().iter().map(|&(v, _)| v).collect();
            assert_eq!(vs, vec![0, 1, 2]);
            // The middle point is the centroid.
            assert_eq!(e.membership(1), 1.0);
        }
    }

    #[test]
    fn separated_blobs_give_block_adjacency() {
        let mut pts = Vec::new();
        for k in 0..5 {
            pts.push([k as f64 * 0.1, 0.0]);
            pts.push([100.0 + k as f64 * 0.1, 0.0]);
        }
        let g = knn_hyperedges(&ps(&pts), &KnnConfig { k: 3, sigma: None }).unwrap();
        let m = g.hypergraph.build_adjacency();
        let blob = |v: usize| g.vertices[v][0] > 50.0;
        for i in 0..m.size() {
            for j in 0..m.size() {
                if blob(i) != blob(j) {
                    assert_eq!(m.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn duplicates_collapse() {
        let g = knn_hyperedges(
            &ps(&[[0.0, 0.0], [1.0, 0.0], [0.0, 0.0], [2.0, 0.0], [3.0, 0.0]]),
            &KnnConfig { k: 2, sigma: Some(1.0) },
        )
        .unwrap();
        assert_eq!(g.vertices.len(), 4);
        assert_eq!(g.vertex_of_point, vec![0, 1, 0, 2, 3]);
        assert_eq!(g.sigma, 1.0);
    }

    #[test]
    fn k_out_of_range() {
        let p = ps(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]);
        assert!(knn_hyperedges(&p, &KnnConfig { k: 1, sigma: None }).is_err());
        assert!(knn_hyperedges(&p, &KnnConfig { k: 3, sigma: None }).is_err());
    }
}
