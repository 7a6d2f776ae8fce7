//! Point correspondence by mode seeking on an association hypergraph.
//!
//! Every candidate pair `(p, q)` is a vertex. Triplets of candidates whose
//! source and target distances agree become hyperedges, so a consistent
//! set of correspondences is a dense subhypergraph and its mode is the
//! match.

use std::collections::HashSet;
use std::io::{Read, Write};

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::{Hyperedge, Hypergraph};
use crate::replicator::initial_vector;
use crate::shift::{hypergraph_shift, ShiftConfig, Termination};
use crate::simplex::ModeCertificate;

pub type Pair = (usize, usize);

/// Source and target points with candidate correspondences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceSet {
    pub source: Vec<[f64; 2]>,
    pub target: Vec<[f64; 2]>,
    /// Candidate pairs `(source index, target index)`.
    pub candidates: Vec<Pair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Vec<Pair>>,
}

impl CorrespondenceSet {
    pub fn new(
        source: Vec<[f64; 2]>,
        target: Vec<[f64; 2]>,
        candidates: Vec<Pair>,
        truth: Option<Vec<Pair>>,
    ) -> Result<Self> {
        let cs = Self {
            source,
            target,
            candidates,
            truth,
        };
        cs.validate()?;
        Ok(cs)
    }

    pub fn validate(&self) -> Result<()> {
        for (what, pts) in [("source", &self.source), ("target", &self.target)] {
            if let Some(i) = pts.iter().position(|p| !(p[0].is_finite() && p[1].is_finite())) {
                return Err(Error::InvalidParameter(format!("{what} point {i} is not finite")));
            }
        }
        let check = |what: &'static str, pairs: &[Pair]| -> Result<()> {
            let mut seen = HashSet::new();
            for &(p, q) in pairs {
                if p >= self.source.len() {
                    return Err(Error::IndexOutOfRange {
                        what: "source point",
                        index: p,
                        len: self.source.len(),
                    });
                }
                if q >= self.target.len() {
                    return Err(Error::IndexOutOfRange {
                        what: "target point",
                        index: q,
                        len: self.target.len(),
                    });
                }
                if !seen.insert((p, q)) {
                    return Err(Error::InvalidParameter(format!("duplicate {what} pair ({p}, {q})")));
                }
            }
            Ok(())
        };
        check("candidate", &self.candidates)?;
        if let Some(t) = &self.truth {
            check("truth", t)?;
        }
        Ok(())
    }

    pub fn read_json<R: Read>(reader: R) -> Result<Self> {
        let cs: Self = serde_json::from_reader(reader).map_err(|e| Error::Parse(e.to_string()))?;
        cs.validate()?;
        Ok(cs)
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Largest pairwise distance among source points.
    pub fn source_diameter(&self) -> f64 {
        diameter(&self.source)
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn diameter(pts: &[[f64; 2]]) -> f64 {
    let mut d = 0.0f64;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            d = d.max(dist(pts[i], pts[j]));
        }
    }
    d
}

/// Random instance: `n` source points in the unit square, target = random
/// rotation and translation of the source plus `N(0, noise_sigma²)` per
/// coordinate, and `n_outliers` extra random target points. Candidates are
/// the true pairs plus, per source point, a pair to the outlier nearest its
/// true target. Target indices are shuffled.
pub fn gen_matching_instance(
    n: usize,
    noise_sigma: f64,
    n_outliers: usize,
    seed: u64,
) -> Result<CorrespondenceSet> {
    generate(n, Noise::Absolute(noise_sigma), n_outliers, seed)
}

/// Target noise level, absolute or as a fraction of the source diameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Noise {
    Absolute(f64),
    DiameterFraction(f64),
}

/// As [`gen_matching_instance`] with the noise given by `noise`. The source
/// points are drawn first, so for a fixed seed they do not depend on the
/// noise level.
pub fn generate(n: usize, noise: Noise, n_outliers: usize, seed: u64) -> Result<CorrespondenceSet> {
    if n < 4 {
        return Err(Error::InvalidParameter(format!("n = {n} must be at least 4")));
    }
    let level = match noise {
        Noise::Absolute(s) | Noise::DiameterFraction(s) => s,
    };
    if !(level >= 0.0 && level.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise level {level} must be finite and nonnegative"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let source: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
        .collect();
    let noise_sigma = match noise {
        Noise::Absolute(s) => s,
        Noise::DiameterFraction(f) => f * diameter(&source),
    };
    let noise = Normal::new(0.0, noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let (s, c) = theta.sin_cos();
    let shift = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
    let mut moved: Vec<[f64; 2]> = source
        .iter()
        .map(|p| [c * p[0] - s * p[1] + shift[0], s * p[0] + c * p[1] + shift[1]])
        .collect();
    if noise_sigma > 0.0 {
        for p in &mut moved {
            p[0] += noise.sample(&mut rng);
            p[1] += noise.sample(&mut rng);
        }
    }
    let (lo, hi) = moved.iter().fold(
        ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]),
        |(lo, hi), p| ([lo[0].min(p[0]), lo[1].min(p[1])], [hi[0].max(p[0]), hi[1].max(p[1])]),
    );
    let outliers: Vec<[f64; 2]> = (0..n_outliers)
        .map(|_| [rng.random_range(lo[0]..=hi[0]), rng.random_range(lo[1]..=hi[1])])
        .collect();

    // Slot k of the target list holds original point order[k].
    let mut order: Vec<usize> = (0..n + n_outliers).collect();
    order.shuffle(&mut rng);
    let mut slot_of = vec![0; order.len()];
    for (slot, &orig) in order.iter().enumerate() {
        slot_of[orig] = slot;
    }
    let target: Vec<[f64; 2]> = order
        .iter()
        .map(|&o| if o < n { moved[o] } else { outliers[o - n] })
        .collect();

    let truth: Vec<Pair> = (0..n).map(|p| (p, slot_of[p])).collect();
    let mut candidates = truth.clone();
    if n_outliers > 0 {
        for (p, &target) in moved.iter().enumerate().take(n) {
            let nearest = (0..n_outliers)
                .min_by(|&a, &b| {
                    dist(target, outliers[a])
                        .total_cmp(&dist(target, outliers[b]))
                        .then(a.cmp(&b))
                })
                .unwrap();
            candidates.push((p, slot_of[n + nearest]));
        }
    }
    candidates.shuffle(&mut rng);
    CorrespondenceSet::new(source, target, candidates, Some(truth))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AssociationConfig {
    /// Distance-discrepancy bandwidth; `None` uses 0.1 × source diameter.
    pub sigma_g: Option<f64>,
    /// Hyperedges are capped at this many per candidate.
    pub edges_per_candidate: usize,
    /// Seed for triplet sampling.
    pub seed: u64,
}

impl Default for AssociationConfig {
    fn default() -> Self {
        Self {
            sigma_g: None,
            edges_per_candidate: 30,
            seed: 42,
        }
    }
}

impl AssociationConfig {
    pub fn effective_sigma(&self, cs: &CorrespondenceSet) -> Result<f64> {
        let s = match self.sigma_g {
            Some(s) => s,
            None => 0.1 * cs.source_diameter(),
        };
        if s > 0.0 && s.is_finite() {
            Ok(s)
        } else {
            Err(Error::InvalidParameter(format!("geometric sigma {s} must be positive")))
        }
    }
}

fn compatible(a: Pair, b: Pair) -> bool {
    a.0 != b.0 && a.1 != b.1
}

/// `|d_P(p_a, p_b) − d_Q(q_a, q_b)|` for two candidates.
fn discrepancy(cs: &CorrespondenceSet, a: Pair, b: Pair) -> f64 {
    (dist(cs.source[a.0], cs.source[b.0]) - dist(cs.target[a.1], cs.target[b.1])).abs()
}

/// Weight `exp(−Δ²/σ²)` of the candidate triplet `(a, b, d)`, where Δ is
/// the largest distance discrepancy; `None` when two candidates share a
/// point or Δ > 3σ.
fn triplet_weight(cs: &CorrespondenceSet, sigma: f64, a: usize, b: usize, d: usize) -> Option<f64> {
    let cand = &cs.candidates;
    let (x, y, z) = (cand[a], cand[b], cand[d]);
    if !(compatible(x, y) && compatible(x, z) && compatible(y, z)) {
        return None;
    }
    let delta = discrepancy(cs, x, y)
        .max(discrepancy(cs, x, z))
        .max(discrepancy(cs, y, z));
    (delta <= 3.0 * sigma).then(|| (-(delta / sigma).powi(2)).exp())
}

/// Weight `exp(−Δ²/σ²)` of the candidate pair `(a, b)`; `None` when they
/// share a point or Δ > 3σ.
fn pair_weight(cs: &CorrespondenceSet, sigma: f64, a: usize, b: usize) -> Option<f64> {
    let (x, y) = (cs.candidates[a], cs.candidates[b]);
    if !compatible(x, y) {
        return None;
    }
    let delta = discrepancy(cs, x, y);
    (delta <= 3.0 * sigma).then(|| (-(delta / sigma).powi(2)).exp())
}

const ENUMERATION_LIMIT: usize = 2_000_000;

/// Triplet hypergraph over candidates. A triplet qualifies when its three
/// candidates use distinct source and target points and the largest
/// distance discrepancy Δ is at most 3σ_g; its weight is `exp(−Δ²/σ_g²)`
/// and membership is binary. At most `edges_per_candidate · |C|` qualifying
/// triplets are kept, chosen uniformly under `cfg.seed`.
pub fn build_association_hypergraph(cs: &CorrespondenceSet, cfg: &AssociationConfig) -> Result<Hypergraph> {
    let c = cs.candidates.len();
    if c < 3 {
        return Err(Error::InvalidParameter(format!(
            "{c} candidates; at least 3 are needed"
        )));
    }
    let sigma = cfg.effective_sigma(cs)?;
    let cap = cfg.edges_per_candidate.saturating_mul(c);
    let triplet = |a: usize, b: usize, d: usize| -> Option<Hyperedge> {
        triplet_weight(cs, sigma, a, b, d).map(|w| Hyperedge::binary(w, [a, b, d]))
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let total = c * (c - 1) * (c - 2) / 6;
    let mut edges: Vec<(usize, usize, usize, Hyperedge)> = Vec::new();
    if total <= ENUMERATION_LIMIT {
        for a in 0..c {
            for b in a + 1..c {
                for d in b + 1..c {
                    if let Some(e) = triplet(a, b, d) {
                        edges.push((a, b, d, e));
                    }
                }
            }
        }
        if edges.len() > cap {
            let mut keep = index::sample(&mut rng, edges.len(), cap).into_vec();
            keep.sort_unstable();
            edges = keep.into_iter().map(|i| edges[i].clone()).collect();
        }
    } else {
        // Too many to enumerate: draw random triplets until the cap is met
        // or the attempt budget runs out.
        let mut seen = HashSet::new();
        let budget = cap.saturating_mul(50);
        for _ in 0..budget {
            if edges.len() >= cap {
                break;
            }
            let mut t = index::sample(&mut rng, c, 3).into_vec();
            t.sort_unstable();
            if seen.insert((t[0], t[1], t[2])) {
                if let Some(e) = triplet(t[0], t[1], t[2]) {
                    edges.push((t[0], t[1], t[2], e));
                }
            }
        }
        edges.sort_by_key(|&(a, b, d, _)| (a, b, d));
    }
    if edges.is_empty() {
        return Err(Error::EmptyHypergraph(
            "no geometrically consistent triplet among the candidates".into(),
        ));
    }
    Hypergraph::new(c, edges.into_iter().map(|t| t.3).collect())
}

/// Ordinary-edge variant: every compatible candidate pair with
/// Δ = |d_P − d_Q| ≤ 3σ_g becomes a 2-ary hyperedge weighted `exp(−Δ²/σ_g²)`.
pub fn build_pairwise_graph(cs: &CorrespondenceSet, cfg: &AssociationConfig) -> Result<Hypergraph> {
    let c = cs.candidates.len();
    if c < 3 {
        return Err(Error::InvalidParameter(format!(
            "{c} candidates; at least 3 are needed"
        )));
    }
    let sigma = cfg.effective_sigma(cs)?;
    let mut edges = Vec::new();
    for a in 0..c {
        for b in a + 1..c {
            if let Some(w) = pair_weight(cs, sigma, a, b) {
                edges.push(Hyperedge::binary(w, [a, b]));
            }
        }
    }
    if edges.is_empty() {
        return Err(Error::EmptyHypergraph("no consistent candidate pair".into()));
    }
    Hypergraph::new(c, edges)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchConfig {
    pub association: AssociationConfig,
    pub shift: ShiftConfig,
    /// Picks scoring below this fraction of the best score are dropped.
    pub cut: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            association: AssociationConfig::default(),
            shift: ShiftConfig::default(),
            cut: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MatchResult {
    /// Selected pairs, sorted by source index.
    pub selected: Vec<Pair>,
    /// Mode membership `Σ_{e∋c} h(c,e)·p*(e)` of every candidate.
    pub membership: Vec<f64>,
    /// Mean triplet consistency of every candidate with the mode, in [0, 1].
    pub scores: Vec<f64>,
    pub certificate: ModeCertificate,
    pub termination: Termination,
    pub seed_hyperedge: usize,
    pub hyperedge_count: usize,
}

/// Triplet matching: shift from the heaviest hyperedge, then score each
/// candidate by its triplet consistency with the mode's candidates,
/// `Σ_{u<v} q(u)·q(v)·w(c,u,v)` with q the mode membership. Candidates are taken greedily by score
/// without reusing a source or target point, and picks scoring below
/// `cfg.cut` times the median pick are dropped.
pub fn match_correspondences(cs: &CorrespondenceSet, cfg: &MatchConfig) -> Result<MatchResult> {
    let g = build_association_hypergraph(cs, &cfg.association)?;
    solve(cs, &g, cfg)
}

/// Same pipeline over ordinary pairwise edges.
pub fn pairwise_baseline(cs: &CorrespondenceSet, cfg: &MatchConfig) -> Result<MatchResult> {
    let g = build_pairwise_graph(cs, &cfg.association)?;
    solve(cs, &g, cfg)
}

const MAX_REFINEMENTS: usize = 10;

/// Weighted mean consistency of each candidate `c` with the weighted
/// candidates: over pairs `u < v` (triplet graphs) or single `u` (pairwise
/// graphs) that share no point with `c`, `Σ q·w / Σ q` with `q` the product
/// of weights.
fn consistency_scores(cs: &CorrespondenceSet, sigma: f64, arity: usize, weights: &[f64]) -> Vec<f64> {
    let core: Vec<usize> = (0..weights.len()).filter(|&v| weights[v] > 0.0).collect();
    (0..cs.candidates.len())
        .map(|c| {
            // Candidates sharing a point with c compete with it rather than
            // support it, so they are left out of its score.
            let core: Vec<usize> = core
                .iter()
                .copied()
                .filter(|&u| compatible(cs.candidates[c], cs.candidates[u]))
                .collect();
            let (mut total, mut mass) = (0.0, 0.0);
            for (x, &u) in core.iter().enumerate() {
                if arity < 3 {
                    mass += weights[u];
                    total += weights[u] * pair_weight(cs, sigma, c, u).unwrap_or(0.0);
                    continue;
                }
                for &v in &core[x + 1..] {
                    let q = weights[u] * weights[v];
                    mass += q;
                    total += q * triplet_weight(cs, sigma, c, u, v).unwrap_or(0.0);
                }
            }
            if mass > 0.0 {
                total / mass
            } else {
                0.0
            }
        })
        .collect()
}

/// Greedy one-to-one pick by descending score, dropping picks below `cut`
/// times the best score. Returns candidate indices in pick order.
fn greedy_pick(cs: &CorrespondenceSet, scores: &[f64], cut: f64) -> Vec<usize> {
    let mut ranked: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] > 0.0).collect();
    ranked.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let floor = ranked.first().map_or(0.0, |&i| cut * scores[i]);
    let mut used_source = HashSet::new();
    let mut used_target = HashSet::new();
    let mut picked = Vec::new();
    for i in ranked {
        let (p, q) = cs.candidates[i];
        if scores[i] >= floor && !used_source.contains(&p) && !used_target.contains(&q) {
            used_source.insert(p);
            used_target.insert(q);
            picked.push(i);
        }
    }
    picked
}

fn solve(cs: &CorrespondenceSet, g: &Hypergraph, cfg: &MatchConfig) -> Result<MatchResult> {
    let m = g.build_adjacency();
    let seed = (0..g.edge_count())
        .max_by(|&a, &b| {
            g.hyperedges()[a]
                .weight()
                .total_cmp(&g.hyperedges()[b].weight())
                .then(b.cmp(&a))
        })
        .ok_or_else(|| Error::EmptyHypergraph("no hyperedges".into()))?;
    let p0 = initial_vector(&m, seed)?;
    let outcome = hypergraph_shift(&m, &p0, Some(g), &cfg.shift)?;

    let mut membership = vec![0.0; cs.candidates.len()];
    for &e in &outcome.certificate.support {
        let p = outcome.certificate.mode[e];
        for &(v, h) in g.hyperedges()[e].members() {
            membership[v] += h * p;
        }
    }
    let sigma = cfg.association.effective_sigma(cs)?;
    let arity = g.hyperedges().iter().map(|e| e.len()).max().unwrap_or(0);
    let mut scores = consistency_scores(cs, sigma, arity, &membership);
    let mut picked = greedy_pick(cs, &scores, cfg.cut);
    // Rescore against the current pick until it stops changing.
    for _ in 0..MAX_REFINEMENTS {
        let mut weights = vec![0.0; cs.candidates.len()];
        for &i in &picked {
            weights[i] = 1.0;
        }
        let next_scores = consistency_scores(cs, sigma, arity, &weights);
        let next = greedy_pick(cs, &next_scores, cfg.cut);
        if next == picked {
            break;
        }
        picked = next;
        scores = next_scores;
    }
    let mut selected: Vec<Pair> = picked.iter().map(|&i| cs.candidates[i]).collect();
    selected.sort_unstable();
    Ok(MatchResult {
        selected,
        membership,
        scores,
        certificate: outcome.certificate,
        termination: outcome.termination,
        seed_hyperedge: seed,
        hyperedge_count: g.edge_count(),
    })
}

/// `|selected ∩ truth| / |truth|`.
pub fn matching_rate(selected: &[Pair], truth: &[Pair]) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::EmptySet);
    }
    let truth: HashSet<&Pair> = truth.iter().collect();
    let hits = selected.iter().filter(|p| truth.contains(p)).count();
    Ok(hits as f64 / truth.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BatchSpec {
    pub n: usize,
    pub noise: Noise,
    pub n_outliers: usize,
    pub first_seed: u64,
    pub repetitions: usize,
    pub baseline: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchRow {
    pub seed: u64,
    pub rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_rate: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateStats {
    pub mean: f64,
    /// Population standard deviation.
    pub stddev: f64,
}

impl RateStats {
    pub fn of(rates: &[f64]) -> Self {
        let n = rates.len().max(1) as f64;
        let mean = rates.iter().sum::<f64>() / n;
        let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            stddev: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchReport {
    pub rows: Vec<BatchRow>,
    pub triplet: RateStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairwise: Option<RateStats>,
}

/// Generates and matches `repetitions` instances with consecutive seeds,
/// in parallel; rows stay in seed order.
pub fn run_batch(spec: &BatchSpec, cfg: &MatchConfig) -> Result<BatchReport> {
    if spec.repetitions == 0 {
        return Err(Error::InvalidParameter("batch needs at least one repetition".into()));
    }
    let rows = (0..spec.repetitions as u64)
        .into_par_iter()
        .map(|k| {
            let seed = spec.first_seed.wrapping_add(k);
            let cs = generate(spec.n, spec.noise, spec.n_outliers, seed)?;
            let truth = cs.truth.clone().unwrap_or_default();
            let rate = matching_rate(&match_correspondences(&cs, cfg)?.selected, &truth)?;
            let baseline_rate = if spec.baseline {
                Some(matching_rate(&pairwise_baseline(&cs, cfg)?.selected, &truth)?)
            } else {
                None
            };
            Ok(BatchRow {
                seed,
                rate,
                baseline_rate,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rates: Vec<f64> = rows.iter().map(|r| r.rate).collect();
    let pairwise = spec.baseline.then(|| {
        RateStats::of(&rows.iter().filter_map(|r| r.baseline_rate).collect::<Vec<_>>())
    });
    Ok(BatchReport {
        triplet: RateStats::of(&rates),
        pairwise,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_instance(n: usize) -> CorrespondenceSet {
        let pts: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let t = i as f64;
                [(t * 0.37).fract() * 3.0 + t * 0.1, (t * 0.61).fract() * 2.0]
            })
            .collect();
        let pairs: Vec<Pair> = (0..n).map(|i| (i, i)).collect();
        CorrespondenceSet::new(pts.clone(), pts, pairs.clone(), Some(pairs)).unwrap()
    }

    #[test]
    fn identity_weights_are_one() {
        let cs = identity_instance(6);
        let g = build_association_hypergraph(&cs, &AssociationConfig::default()).unwrap();
        assert_eq!(g.edge_count(), 20);
        assert!(g.hyperedges().iter().all(|e| e.weight() == 1.0));
    }

    #[test]
    fn shared_source_triplets_excluded() {
        let pts = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let cands = vec![(0, 0), (1, 1), (2, 2), (0, 3)];
        let cs = CorrespondenceSet::new(pts.clone(), pts, cands, None).unwrap();
        let g = build_association_hypergraph(&cs, &AssociationConfig::default()).unwrap();
        for e in g.hyperedges() {
            let vs: Vec<usize> = e.members().iter().map(|&(v, _)| v).collect();
            assert!(!(vs.contains(&0) && vs.contains(&3)));
        }
    }

    #[test]
    fn rigid_motion_keeps_unit_weights() {
        let cs = gen_matching_instance(8, 0.0, 0, 5).unwrap();
        let g = build_association_hypergraph(&cs, &AssociationConfig::default()).unwrap();
        assert_eq!(g.edge_count(), 56);
        assert!(g.hyperedges().iter().all(|e| (e.weight() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn identity_matches_everything() {
        let cs = identity_instance(10);
        let r = match_correspondences(&cs, &MatchConfig::default()).unwrap();
        assert_eq!(r.selected, cs.truth.clone().unwrap());
        let b = pairwise_baseline(&cs, &MatchConfig::default()).unwrap();
        assert_eq!(b.selected, cs.truth.clone().unwrap());
    }

    #[test]
    fn unconnected_outlier_excluded() {
        let mut cs = identity_instance(8);
        // Pair source 0 with a far-away target: no consistent triplet.
        cs.target.push([500.0, -300.0]);
        cs.candidates.push((0, 8));
        cs.validate().unwrap();
        let r = match_correspondences(&cs, &MatchConfig::default()).unwrap();
        assert!(!r.selected.contains(&(0, 8)));
        assert_eq!(r.scores[8], 0.0);
    }

    #[test]
    fn generator_counts_and_determinism() {
        let cs = gen_matching_instance(15, 0.0, 5, 3).unwrap();
        assert_eq!(cs.truth.as_ref().unwrap().len(), 15);
        assert_eq!(cs.target.len(), 20);
        assert!(cs.candidates.len() >= 20);
        assert_eq!(cs, gen_matching_instance(15, 0.0, 5, 3).unwrap());
        let clean = gen_matching_instance(6, 0.0, 0, 3).unwrap();
        let mut c = clean.candidates.clone();
        c.sort_unstable();
        let mut t = clean.truth.clone().unwrap();
        t.sort_unstable();
        assert_eq!(c, t);
        assert!(gen_matching_instance(3, 0.0, 0, 3).is_err());
    }

    #[test]
    fn noise_free_with_distractors_is_exact() {
        for seed in 0..5 {
            let cs = gen_matching_instance(15, 0.0, 5, seed).unwrap();
            let r = match_correspondences(&cs, &MatchConfig::default()).unwrap();
            let mut truth = cs.truth.clone().unwrap();
            truth.sort_unstable();
            assert_eq!(r.selected, truth, "seed {seed}");
        }
    }

    #[test]
    fn relative_noise_keeps_source() {
        let a = generate(10, Noise::DiameterFraction(0.05), 3, 4).unwrap();
        let b = gen_matching_instance(10, 0.0, 3, 4).unwrap();
        assert_eq!(a.source, b.source);
        assert_ne!(a.target, b.target);
    }

    #[test]
    fn batch_is_ordered_and_deterministic() {
        let spec = BatchSpec {
            n: 8,
            noise: Noise::Absolute(0.0),
            n_outliers: 2,
            first_seed: 10,
            repetitions: 4,
            baseline: true,
        };
        let r = run_batch(&spec, &MatchConfig::default()).unwrap();
        assert_eq!(r.rows.iter().map(|x| x.seed).collect::<Vec<_>>(), vec![10, 11, 12, 13]);
        assert_eq!(r.triplet.mean, 1.0);
        assert!(r.pairwise.is_some());
        assert_eq!(r, run_batch(&spec, &MatchConfig::default()).unwrap());
    }

    #[test]
    fn rates() {
        let t = vec![(0, 0), (1, 1), (2, 2), (3, 3)];
        assert_eq!(matching_rate(&t, &t).unwrap(), 1.0);
        assert_eq!(matching_rate(&[(0, 1)], &t).unwrap(), 0.0);
        assert_eq!(matching_rate(&t[..3], &t).unwrap(), 0.75);
        assert!(matching_rate(&t, &[]).is_err());
    }

    #[test]
    fn minimal_instance_runs() {
        let cs = gen_matching_instance(4, 0.01, 2, 1).unwrap();
        pairwise_baseline(&cs, &MatchConfig::default()).unwrap();
        match_correspondences(&cs, &MatchConfig::default()).unwrap();
    }

    #[test]
    fn too_few_candidates() {
        let pts = vec![[0.0, 0.0], [1.0, 0.0]];
        let cs = CorrespondenceSet::new(pts.clone(), pts, vec![(0, 0), (1, 1)], None).unwrap();
        assert!(build_association_hypergraph(&cs, &AssociationConfig::default()).is_err());
    }

    #[test]
    fn validation_and_json() {
        let pts = vec![[0.0, 0.0], [1.0, 0.0]];
        assert!(CorrespondenceSet::new(pts.clone(), pts.clone(), vec![(0, 2)], None).is_err());
        assert!(CorrespondenceSet::new(pts.clone(), pts.clone(), vec![(0, 1), (0, 1)], None).is_err());
        let cs = gen_matching_instance(5, 0.1, 2, 9).unwrap();
        let mut buf = Vec::new();
        cs.write_json(&mut buf).unwrap();
        assert_eq!(CorrespondenceSet::read_json(buf.as_slice()).unwrap(), cs);
        assert!(CorrespondenceSet::read_json("{\"source\": 3}".as_bytes()).is_err());
    }
}
