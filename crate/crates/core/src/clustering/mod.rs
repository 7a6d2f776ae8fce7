//! Point clustering by hypergraph shift.
//!
//! Every hyperedge of a kNN hypergraph seeds one shift run. Runs that end at
//! (nearly) the same mode are merged; each merged mode with positive density
//! is a basin; neighboring basins separated by no density dip are joined
//! into one cluster, and hyperedges inherit the cluster of their basin.
//! Points are then labeled by a membership-weighted vote over the
//! hyperedges that contain them.

mod crescents;
mod knn;
mod nmi;

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

pub use crescents::{gen_crescents, gen_crescents_with, CrescentLayout, CRESCENT_COUNT};
pub use knn::{knn_hyperedges, KnnConfig, KnnHypergraph};
pub use nmi::nmi;

use crate::error::{Error, Result};
use crate::hypergraph::{HyperedgeAdjacency, Hypergraph};
use crate::replicator::initial_vector;
use crate::shift::{hypergraph_shift, ShiftConfig, Termination};
use crate::simplex::ModeCertificate;

/// 2-D points with optional ground-truth labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    pub points: Vec<[f64; 2]>,
    pub labels: Option<Vec<usize>>,
}

impl PointSet {
    pub fn new(points: Vec<[f64; 2]>, labels: Option<Vec<usize>>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err(Error::InvalidParameter(format!("point {i} is not finite")));
        }
        if let Some(l) = &labels {
            if l.len() != points.len() {
                return Err(Error::DimensionMismatch {
                    expected: points.len(),
                    found: l.len(),
                });
            }
        }
        Ok(Self { points, labels })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Reads `x,y[,label]` lines. Blank lines and `#` comments are skipped;
    /// either every point carries a label or none does.
    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut points = Vec::new();
        let mut labels = Vec::new();
        let mut labeled: Option<bool> = None;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let text = line.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let err = |msg: &str| Error::Parse(format!("line {}: {msg}: {text:?}", lineno + 1));
            let fields: Vec<&str> = text.split(',').map(str::trim).collect();
            if !(2..=3).contains(&fields.len()) {
                return Err(err("expected x,y[,label]"));
            }
            let x: f64 = fields[0].parse().map_err(|_| err("bad x"))?;
            let y: f64 = fields[1].parse().map_err(|_| err("bad y"))?;
            if !(x.is_finite() && y.is_finite()) {
                return Err(err("coordinate not finite"));
            }
            let has_label = fields.len() == 3;
            if *labeled.get_or_insert(has_label) != has_label {
                return Err(err("labels must be given on every line or none"));
            }
            if has_label {
                labels.push(fields[2].parse().map_err(|_| err("bad label"))?);
            }
            points.push([x, y]);
        }
        Self::new(points, labeled.unwrap_or(false).then_some(labels))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for (i, p) in self.points.iter().enumerate() {
            match &self.labels {
                Some(l) => writeln!(w, "{},{},{}", p[0], p[1], l[i])?,
                None => writeln!(w, "{},{}", p[0], p[1])?,
            }
        }
        Ok(())
    }
}

/// Isotropic Gaussian blobs, `per_blob` points each, labeled by blob.
pub fn gen_blobs(centers: &[[f64; 2]], per_blob: usize, sigma: f64, seed: u64) -> Result<PointSet> {
    let normal =
        Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..per_blob {
            points.push([
                center[0] + normal.sample(&mut rng),
                center[1] + normal.sample(&mut rng),
            ]);
            labels.push(c);
        }
    }
    PointSet::new(points, Some(labels))
}

pub const DEFAULT_PERSISTENCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClusterConfig {
    pub shift: ShiftConfig,
    /// Modes closer than this in L1 are merged (transitively).
    pub merge_tol: f64,
    /// Basins of neighboring modes are joined when their boundary density
    /// is at least this fraction of the lower peak; `None` keeps every
    /// L1-merged mode as its own cluster.
    pub persistence: Option<f64>,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            shift: ShiftConfig::default(),
            merge_tol: 0.1,
            persistence: Some(DEFAULT_PERSISTENCE),
        }
    }
}

/// A transitive group of modes; `representative` has the largest λ.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeGroup {
    pub members: Vec<usize>,
    pub representative: usize,
}

/// Merges certificates whose mode vectors are within `tol` in L1, closing
/// transitively. Groups are ordered by their smallest member index.
pub fn merge_modes(certs: &[ModeCertificate], tol: f64) -> Vec<ModeGroup> {
    let sparse: Vec<Vec<(usize, f64)>> = certs
        .iter()
        .map(|c| {
            c.mode
                .as_slice()
                .iter()
                .enumerate()
                .filter(|(_, &x)| x != 0.0)
                .map(|(i, &x)| (i, x))
                .collect()
        })
        .collect();
    let mut parent: Vec<usize> = (0..certs.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for a in 0..certs.len() {
        for b in a + 1..certs.len() {
            if sparse_l1(&sparse[a], &sparse[b]) <= tol {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    let (lo, hi) = (ra.min(rb), ra.max(rb));
                    parent[hi] = lo;
                }
            }
        }
    }
    let mut groups: Vec<ModeGroup> = Vec::new();
    let mut slot_of_root = vec![usize::MAX; certs.len()];
    for i in 0..certs.len() {
        let root = find(&mut parent, i);
        if slot_of_root[root] == usize::MAX {
            slot_of_root[root] = groups.len();
            groups.push(ModeGroup {
                members: Vec::new(),
                representative: i,
            });
        }
        let g = &mut groups[slot_of_root[root]];
        g.members.push(i);
        if certs[i].lambda > certs[g.representative].lambda {
            g.representative = i;
        }
    }
    groups
}

fn sparse_l1(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let (mut x, mut y) = (0, 0);
    let mut total = 0.0;
    while x < a.len() || y < b.len() {
        match (a.get(x), b.get(y)) {
            (Some(&(i, u)), Some(&(j, v))) if i == j => {
                total += (u - v).abs();
                x += 1;
                y += 1;
            }
            (Some(&(i, u)), Some(&(j, _))) if i < j => {
                total += u;
                x += 1;
            }
            (Some(_), Some(&(_, v))) => {
                total += v;
                y += 1;
            }
            (Some(&(_, u)), None) => {
                total += u;
                x += 1;
            }
            (None, Some(&(_, v))) => {
                total += v;
                y += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    total
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterSummary {
    pub id: usize,
    /// Seed hyperedge whose run produced the representative mode.
    pub representative_seed: usize,
    pub lambda: f64,
    pub support: Vec<usize>,
    /// Number of seeds that reached this cluster's modes.
    pub seeds: usize,
    /// Number of L1-merged modes joined into this cluster.
    pub basins: usize,
}

#[derive(Debug, Clone)]
pub struct ClusterResult {
    /// Cluster of each hyperedge; `None` for outliers (λ = 0 modes).
    pub hyperedge_cluster: Vec<Option<usize>>,
    /// Cluster of each vertex; `None` for outliers.
    pub vertex_cluster: Vec<Option<usize>>,
    pub clusters: Vec<ClusterSummary>,
    /// Representative certificate of each cluster, aligned with `clusters`.
    pub modes: Vec<ModeCertificate>,
    /// Distinct L1-merged modes including λ = 0 ones.
    pub merged_mode_count: usize,
    pub total_expansions: usize,
    /// Seeds whose run ended without a certified global mode.
    pub uncertified_runs: usize,
    pub config: ClusterConfig,
}

impl ClusterResult {
    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }
}

/// Shift from every hyperedge, merge the resulting modes and label
/// hyperedges and vertices.
pub fn cluster(g: &Hypergraph, cfg: &ClusterConfig) -> Result<ClusterResult> {
    g.validate()?;
    let m = g.build_adjacency();
    cluster_with_adjacency(g, &m, cfg)
}

pub fn cluster_with_adjacency(
    g: &Hypergraph,
    m: &HyperedgeAdjacency,
    cfg: &ClusterConfig,
) -> Result<ClusterResult> {
    let n = m.size();
    if n == 0 {
        return Err(Error::EmptyHypergraph("no hyperedges to cluster".into()));
    }
    if !(cfg.merge_tol >= 0.0) {
        return Err(Error::InvalidParameter("merge tolerance must be nonnegative".into()));
    }
    if let Some(tau) = cfg.persistence {
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::InvalidParameter(format!(
                "persistence {tau} must lie in [0, 1]"
            )));
        }
    }
    let outcomes = (0..n)
        .into_par_iter()
        .map(|seed| {
            let p0 = initial_vector(m, seed)?;
            hypergraph_shift(m, &p0, Some(g), &cfg.shift)
        })
        .collect::<Result<Vec<_>>>()?;

    let total_expansions = outcomes.iter().map(|o| o.expansions).sum();
    let uncertified_runs = outcomes
        .iter()
        .filter(|o| !matches!(o.termination, Termination::GlobalMode | Termination::Isolated))
        .count();
    let certs: Vec<ModeCertificate> = outcomes.into_iter().map(|o| o.certificate).collect();
    let groups = merge_modes(&certs, cfg.merge_tol);

    // Basins: L1-merged groups whose mode has positive density.
    let basins: Vec<&ModeGroup> = groups
        .iter()
        .filter(|grp| certs[grp.representative].lambda > 0.0)
        .collect();
    let mut basin_of = vec![None; n];
    for (b, grp) in basins.iter().enumerate() {
        for &seed in &grp.members {
            basin_of[seed] = Some(b);
        }
    }
    let root = match cfg.persistence {
        Some(tau) => persistence_merge(m, &basin_of, basins.len(), tau),
        None => (0..basins.len()).collect(),
    };

    // Clusters follow the first basin of each root, hence the smallest seed.
    let mut cluster_of_root = vec![usize::MAX; basins.len()];
    let mut cluster_of_basin = Vec::with_capacity(basins.len());
    let mut clusters: Vec<ClusterSummary> = Vec::new();
    for (b, grp) in basins.iter().enumerate() {
        let r = root[b];
        if cluster_of_root[r] == usize::MAX {
            cluster_of_root[r] = clusters.len();
            clusters.push(ClusterSummary {
                id: clusters.len(),
                representative_seed: grp.representative,
                lambda: certs[grp.representative].lambda,
                support: certs[grp.representative].support.clone(),
                seeds: 0,
                basins: 0,
            });
        }
        let c = cluster_of_root[r];
        cluster_of_basin.push(c);
        let summary = &mut clusters[c];
        summary.seeds += grp.members.len();
        summary.basins += 1;
        let rep = &certs[grp.representative];
        if rep.lambda > summary.lambda {
            summary.representative_seed = grp.representative;
            summary.lambda = rep.lambda;
            summary.support = rep.support.clone();
        }
    }
    let hyperedge_cluster: Vec<Option<usize>> =
        basin_of.iter().map(|b| b.map(|b| cluster_of_basin[b])).collect();
    let basin_modes: Vec<&ModeCertificate> =
        basins.iter().map(|grp| &certs[grp.representative]).collect();
    let vertex_cluster = assign_vertices(g, &basin_of, &basin_modes)
        .into_iter()
        .map(|b| b.map(|b| cluster_of_basin[b]))
        .collect();
    let modes = clusters
        .iter()
        .map(|c| certs[c.representative_seed].clone())
        .collect();
    Ok(ClusterResult {
        hyperedge_cluster,
        vertex_cluster,
        clusters,
        modes,
        merged_mode_count: groups.len(),
        total_expansions,
        uncertified_runs,
        config: *cfg,
    })
}

/// Joins basins by persistence of the hyperedge density `d(e) = Σ_f M(e,f)`.
///
/// The saddle between two basins is the largest `min(d(e), d(f))` over
/// adjacent hyperedges `e`, `f` drawn from each. Saddles are processed in
/// decreasing order and two components join when the saddle reaches `tau`
/// times the lower of their peak densities. Returns a root per basin.
fn persistence_merge(
    m: &HyperedgeAdjacency,
    basin_of: &[Option<usize>],
    count: usize,
    tau: f64,
) -> Vec<usize> {
    let n = m.size();
    let density: Vec<f64> = (0..n).map(|e| m.row(e).iter().sum()).collect();
    let mut peak = vec![0.0f64; count];
    for e in 0..n {
        if let Some(b) = basin_of[e] {
            peak[b] = peak[b].max(density[e]);
        }
    }
    let mut saddle: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for e in 0..n {
        let Some(a) = basin_of[e] else { continue };
        for f in m.neighbors(e) {
            let Some(b) = basin_of[f] else { continue };
            if a < b {
                let s = density[e].min(density[f]);
                let slot = saddle.entry((a, b)).or_insert(s);
                *slot = slot.max(s);
            }
        }
    }
    let mut links: Vec<((usize, usize), f64)> = saddle.into_iter().collect();
    links.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));

    let mut parent: Vec<usize> = (0..count).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for ((a, b), s) in links {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb && s >= tau * peak[ra].min(peak[rb]) {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            parent[hi] = lo;
            peak[lo] = peak[lo].max(peak[hi]);
        }
    }
    (0..count).map(|b| find(&mut parent, b)).collect()
}

/// Vertex v goes to the basin b maximizing Σ_{e∋v} h(v,e)·p_b(e) over the
/// basin's mode p_b. When v touches no mode support, the vote falls back to
/// Σ h(v,e) over containing hyperedges that belong to b.
fn assign_vertices(
    g: &Hypergraph,
    basin_of: &[Option<usize>],
    modes: &[&ModeCertificate],
) -> Vec<Option<usize>> {
    let k = modes.len();
    let mut mode_score = vec![vec![0.0; k]; g.vertex_count()];
    let mut label_score = vec![vec![0.0; k]; g.vertex_count()];
    // Sparse view of each mode: hyperedge -> [(basin, p)].
    let mut mass: Vec<Vec<(usize, f64)>> = vec![Vec::new(); basin_of.len()];
    for (b, mode) in modes.iter().enumerate() {
        for (e, &p) in mode.mode.as_slice().iter().enumerate() {
            if p != 0.0 {
                mass[e].push((b, p));
            }
        }
    }
    for (e, edge) in g.hyperedges().iter().enumerate() {
        for &(v, h) in edge.members() {
            for &(b, p) in &mass[e] {
                mode_score[v][b] += h * p;
            }
            if let Some(b) = basin_of[e] {
                label_score[v][b] += h;
            }
        }
    }
    let argmax = |s: &[f64]| -> Option<usize> {
        let mut best: Option<usize> = None;
        for (c, &x) in s.iter().enumerate() {
            if x > 0.0 && best.is_none_or(|b| x > s[b]) {
                best = Some(c);
            }
        }
        best
    };
    (0..g.vertex_count())
        .map(|v| argmax(&mode_score[v]).or_else(|| argmax(&label_score[v])))
        .collect()
}

/// Clusters a point set end to end and maps vertex labels back to points.
#[derive(Debug, Clone)]
pub struct PointClustering {
    pub knn: KnnHypergraph,
    pub result: ClusterResult,
    /// Cluster of each input point; `None` for outliers.
    pub assignments: Vec<Option<usize>>,
}

impl PointClustering {
    /// NMI against the point set's labels, if it has any.
    pub fn nmi(&self, ps: &PointSet) -> Option<f64> {
        let truth: Vec<Option<usize>> = ps.labels.as_ref()?.iter().map(|&l| Some(l)).collect();
        nmi(&self.assignments, &truth).ok()
    }

    /// Writes `x,y,cluster_id` lines; outliers get `-1`.
    pub fn write_assignments<W: Write>(&self, ps: &PointSet, mut w: W) -> Result<()> {
        for (p, a) in ps.points.iter().zip(&self.assignments) {
            match a {
                Some(c) => writeln!(w, "{},{},{}", p[0], p[1], c)?,
                None => writeln!(w, "{},{},-1", p[0], p[1])?,
            }
        }
        Ok(())
    }
}

pub fn cluster_points(ps: &PointSet, knn: &KnnConfig, cfg: &ClusterConfig) -> Result<PointClustering> {
    let knn = knn_hyperedges(ps, knn)?;
    let result = cluster(&knn.hypergraph, cfg)?;
    let assignments = knn
        .vertex_of_point
        .iter()
        .map(|&v| result.vertex_cluster[v])
        .collect();
    Ok(PointClustering {
        knn,
        result,
        assignments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::Hyperedge;
    use crate::simplex::{is_mode, SimplexVector, DEFAULT_MODE_TOL};

    fn cert(m: &HyperedgeAdjacency, p: &[f64]) -> ModeCertificate {
        is_mode(&SimplexVector::new(p.to_vec()).unwrap(), m, DEFAULT_MODE_TOL).unwrap()
    }

    #[test]
    fn merge_rules() {
        let m = HyperedgeAdjacency::from_dense(&[
            vec![0.0, 1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 2.0],
            vec![0.0, 0.0, 2.0, 0.0],
        ])
        .unwrap();
        let a = cert(&m, &[0.5, 0.5, 0.0, 0.0]);
        let a2 = cert(&m, &[0.5 + 1e-9, 0.5 - 1e-9, 0.0, 0.0]);
        let b = cert(&m, &[0.0, 0.0, 0.5, 0.5]);
        let groups = merge_modes(&[a.clone(), b.clone(), a2, a], 0.1);
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].members, vec![0, 2, 3]);
        assert_eq!(groups[1].members, vec![1]);
        assert_eq!(groups[1].representative, 1);
        assert_eq!(sparse_l1(&[(0, 0.5), (1, 0.5)], &[(2, 0.5), (3, 0.5)]), 2.0);
    }

    #[test]
    fn merge_is_transitive_and_picks_densest() {
        let m = HyperedgeAdjacency::from_dense(&[
            vec![0.0, 1.0, 1.0],
            vec![1.0, 0.0, 1.0],
            vec![1.0, 1.0, 0.0],
        ])
        .unwrap();
        let x = cert(&m, &[0.5, 0.5, 0.0]);
        let y = cert(&m, &[0.45, 0.5, 0.05]);
        let z = cert(&m, &[0.4, 0.5, 0.1]);
        // x–z are 0.2 apart but linked through y.
        let groups = merge_modes(&[x, y, z], 0.1);
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].representative, 2);
    }

    fn block_hypergraph(blocks: &[usize]) -> Hypergraph {
        // Block b: hyperedges {base + i, base + i + 1, base + i + 2} over a
        // run of vertices; blocks use disjoint vertex ranges.
        let mut edges = Vec::new();
        let mut base = 0;
        for &size in blocks {
            for i in 0..size {
                edges.push(Hyperedge::binary(1.0, [base + i, base + i + 1, base + size + 2]));
            }
            base += size + 3;
        }
        Hypergraph::new(base, edges).unwrap()
    }

    #[test]
    fn block_diagonal_gives_one_cluster_per_block() {
        let g = block_hypergraph(&[4, 6, 5]);
        let r = cluster(&g, &ClusterConfig::default()).unwrap();
        assert_eq!(r.cluster_count(), 3);
        assert_eq!(r.uncertified_runs, 0);
        assert!(r.hyperedge_cluster.iter().all(|c| c.is_some()));
    }

    #[test]
    fn single_clique_is_one_cluster() {
        let edges = (0..6).map(|i| Hyperedge::binary(1.0, [i, 6])).collect();
        let g = Hypergraph::new(7, edges).unwrap();
        let r = cluster(&g, &ClusterConfig::default()).unwrap();
        assert_eq!(r.cluster_count(), 1);
        assert!(r.vertex_cluster.iter().all(|&c| c == Some(0)));
    }

    #[test]
    fn isolated_hyperedge_is_outlier() {
        let g = Hypergraph::new(
            6,
            vec![
                Hyperedge::binary(1.0, [0, 1]),
                Hyperedge::binary(1.0, [1, 2]),
                Hyperedge::binary(1.0, [0, 2]),
                Hyperedge::binary(1.0, [4, 5]),
            ],
        )
        .unwrap();
        let r = cluster(&g, &ClusterConfig::default()).unwrap();
        assert_eq!(r.cluster_count(), 1);
        assert_eq!(r.hyperedge_cluster[3], None);
        assert_eq!(r.vertex_cluster[4], None);
        assert_eq!(r.vertex_cluster[5], None);
        assert_eq!(r.vertex_cluster[3], None);
        assert_eq!(r.vertex_cluster[0], Some(0));
        assert_eq!(r.merged_mode_count, 2);
    }

    #[test]
    fn point_csv_round_trip() {
        let text = "# header\n1.5,2\n\n-3,4e-1\n";
        let ps = PointSet::read_csv(text.as_bytes()).unwrap();
        assert_eq!(ps.points, vec![[1.5, 2.0], [-3.0, 0.4]]);
        assert!(ps.labels.is_none());
        let labeled = PointSet::read_csv("0,0,1\n1,1,0\n".as_bytes()).unwrap();
        assert_eq!(labeled.labels, Some(vec![1, 0]));
        let mut out = Vec::new();
        labeled.write_csv(&mut out).unwrap();
        assert_eq!(PointSet::read_csv(out.as_slice()).unwrap(), labeled);

        let err = PointSet::read_csv("0,0,1\n1,1\n".as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(PointSet::read_csv("0,x\n".as_bytes()).is_err());
        assert!(PointSet::read_csv("0,nan\n".as_bytes()).is_err());
    }
}
