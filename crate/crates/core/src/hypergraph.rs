//! Probabilistic hypergraphs and the hyperedge-adjacency matrix.
//!
//! A hyperedge stores its members as a sorted sparse list of
//! `(vertex, membership)` pairs with membership in `(0, 1]`. Absent vertices
//! have membership zero. Hyperedge order is never changed after
//! construction, so every index handed out by this module is stable.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One hyperedge: a weight and a sparse membership map.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperedge {
    weight: f64,
    members: Vec<(usize, f64)>,
}

impl Hyperedge {
    /// Members are sorted by vertex index. Nothing is validated here; see
    /// [`Hypergraph::validate`].
    pub fn new(weight: f64, members: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut members: Vec<(usize, f64)> = members.into_iter().collect();
        members.sort_by_key(|&(v, _)| v);
        Self { weight, members }
    }

    /// Hyperedge with every member at membership 1.
    pub fn binary(weight: f64, vertices: impl IntoIterator<Item = usize>) -> Self {
        Self::new(weight, vertices.into_iter().map(|v| (v, 1.0)))
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn members(&self) -> &[(usize, f64)] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Membership probability of `vertex`, zero when absent.
    pub fn membership(&self, vertex: usize) -> f64 {
        self.members
            .binary_search_by_key(&vertex, |&(v, _)| v)
            .map(|k| self.members[k].1)
            .unwrap_or(0.0)
    }

    /// δ(e): sum of member probabilities.
    pub fn degree(&self) -> f64 {
        self.members.iter().map(|&(_, h)| h).sum()
    }
}

/// First invariant violation found by [`Hypergraph::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyHyperedge { edge: usize },
    ProbabilityOutOfRange { edge: usize, vertex: usize, value: f64 },
    VertexOutOfRange { edge: usize, vertex: usize, vertex_count: usize },
    DuplicateMember { edge: usize, vertex: usize },
    InvalidWeight { edge: usize, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::EmptyHyperedge { edge } => write!(f, "empty hyperedge at index {edge}"),
            Violation::ProbabilityOutOfRange { edge, vertex, value } => write!(
                f,
                "probability out of range (0, 1]: {value} for vertex {vertex} in hyperedge {edge}"
            ),
            Violation::VertexOutOfRange {
                edge,
                vertex,
                vertex_count,
            } => write!(
                f,
                "vertex {vertex} in hyperedge {edge} out of range (vertex_count {vertex_count})"
            ),
            Violation::DuplicateMember { edge, vertex } => {
                write!(f, "vertex {vertex} listed twice in hyperedge {edge}")
            }
            Violation::InvalidWeight { edge, value } => {
                write!(f, "weight {value} of hyperedge {edge} is not finite and nonnegative")
            }
        }
    }
}

impl std::error::Error for Violation {}

/// Weighted hypergraph with probabilistic incidence.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypergraph {
    vertex_count: usize,
    hyperedges: Vec<Hyperedge>,
}

impl Hypergraph {
    /// Builds and validates.
    pub fn new(vertex_count: usize, hyperedges: Vec<Hyperedge>) -> Result<Self> {
        let g = Self::unchecked(vertex_count, hyperedges);
        g.validate()?;
        Ok(g)
    }

    /// Builds without validation. Everything downstream assumes a valid
    /// hypergraph, so call [`validate`](Self::validate) before use.
    pub fn unchecked(vertex_count: usize, hyperedges: Vec<Hyperedge>) -> Self {
        Self {
            vertex_count,
            hyperedges,
        }
    }

    pub fn validate(&self) -> Result<(), Violation> {
        for (edge, e) in self.hyperedges.iter().enumerate() {
            if !(e.weight.is_finite() && e.weight >= 0.0) {
                return Err(Violation::InvalidWeight {
                    edge,
                    value: e.weight,
                });
            }
            if e.members.is_empty() {
                return Err(Violation::EmptyHyperedge { edge });
            }
            let mut prev = None;
            for &(vertex, value) in &e.members {
                if vertex >= self.vertex_count {
                    return Err(Violation::VertexOutOfRange {
                        edge,
                        vertex,
                        vertex_count: self.vertex_count,
                    });
                }
                if prev == Some(vertex) {
                    return Err(Violation::DuplicateMember { edge, vertex });
                }
                prev = Some(vertex);
                if !(value > 0.0 && value <= 1.0) {
                    return Err(Violation::ProbabilityOutOfRange {
                        edge,
                        vertex,
                        value,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.hyperedges.len()
    }

    pub fn hyperedges(&self) -> &[Hyperedge] {
        &self.hyperedges
    }

    pub fn hyperedge(&self, i: usize) -> Result<&Hyperedge> {
        self.hyperedges.get(i).ok_or(Error::IndexOutOfRange {
            what: "hyperedge",
            index: i,
            len: self.hyperedges.len(),
        })
    }

    /// δ(e_i) = Σ_v h(v, e_i).
    pub fn hyperedge_degree(&self, i: usize) -> Result<f64> {
        Ok(self.hyperedge(i)?.degree())
    }

    /// Σ_e h(v, e) w(e).
    pub fn vertex_degree(&self, v: usize) -> Result<f64> {
        if v >= self.vertex_count {
            return Err(Error::IndexOutOfRange {
                what: "vertex",
                index: v,
                len: self.vertex_count,
            });
        }
        Ok(self
            .hyperedges
            .iter()
            .map(|e| e.membership(v) * e.weight)
            .sum())
    }

    /// |e_i ∩ e_j| under probabilistic incidence: Σ over shared vertices of
    /// the smaller membership. Counts shared vertices when memberships are
    /// binary.
    pub fn intersection_mass(&self, i: usize, j: usize) -> Result<f64> {
        let a = self.hyperedge(i)?;
        let b = self.hyperedge(j)?;
        Ok(sorted_intersection(&a.members, &b.members))
    }

    /// True when the two hyperedges share at least one vertex.
    pub fn overlaps(&self, i: usize, j: usize) -> Result<bool> {
        Ok(self.intersection_mass(i, j)? > 0.0)
    }

    /// Hyperedge-adjacency matrix:
    /// `M(i,j) = |e_i ∩ e_j| (w(e_i)/δ(e_i) + w(e_j)/δ(e_j))` off the diagonal,
    /// zero on it.
    pub fn build_adjacency(&self) -> HyperedgeAdjacency {
        let n = self.hyperedges.len();
        // Accumulate intersection masses through a vertex -> hyperedges index so
        // only overlapping pairs are touched.
        let mut incident: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.vertex_count];
        for (e, edge) in self.hyperedges.iter().enumerate() {
            for &(v, h) in &edge.members {
                incident[v].push((e, h));
            }
        }
        let mut inter = vec![0.0; n * n];
        for list in &incident {
            for (a, &(ea, ha)) in list.iter().enumerate() {
                for &(eb, hb) in &list[a + 1..] {
                    inter[ea * n + eb] += ha.min(hb);
                }
            }
        }
        let scale: Vec<f64> = self
            .hyperedges
            .iter()
            .map(|e| e.weight / e.degree())
            .collect();
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let mass = inter[i * n + j];
                if mass > 0.0 {
                    let value = scale[i] * mass + scale[j] * mass;
                    entries[i * n + j] = value;
                    entries[j * n + i] = value;
                }
            }
        }
        HyperedgeAdjacency { size: n, entries }
    }

    /// Reads the JSON hypergraph format. Range errors inside a hyperedge are
    /// reported with line and column; vertex-range errors with the hyperedge
    /// index.
    pub fn read_json<R: Read>(reader: R) -> Result<Self> {
        let file: HypergraphFile =
            serde_json::from_reader(reader).map_err(|e| Error::Parse(e.to_string()))?;
        file.into_hypergraph()
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Self::read_json(text.as_bytes())
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        let file = HypergraphFile {
            vertex_count: self.vertex_count,
            hyperedges: self
                .hyperedges
                .iter()
                .map(|e| FileHyperedge {
                    weight: e.weight,
                    members: e.members.clone(),
                })
                .collect(),
        };
        serde_json::to_writer_pretty(writer, &file).map_err(|e| Error::Parse(e.to_string()))
    }
}

fn sorted_intersection(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let (mut x, mut y) = (0, 0);
    let mut mass = 0.0;
    while x < a.len() && y < b.len() {
        match a[x].0.cmp(&b[y].0) {
            std::cmp::Ordering::Less => x += 1,
            std::cmp::Ordering::Greater => y += 1,
            std::cmp::Ordering::Equal => {
                mass += a[x].1.min(b[y].1);
                x += 1;
                y += 1;
            }
        }
    }
    mass
}

#[derive(Serialize, Deserialize)]
struct HypergraphFile {
    vertex_count: usize,
    hyperedges: Vec<FileHyperedge>,
}

#[derive(Serialize, Deserialize)]
struct FileHyperedge {
    #[serde(deserialize_with = "de_weight")]
    weight: f64,
    #[serde(serialize_with = "ser_members", deserialize_with = "de_members")]
    members: Vec<(usize, f64)>,
}

impl HypergraphFile {
    fn into_hypergraph(self) -> Result<Hypergraph> {
        let edges = self
            .hyperedges
            .into_iter()
            .map(|e| Hyperedge::new(e.weight, e.members))
            .collect();
        Hypergraph::new(self.vertex_count, edges)
    }
}

fn de_weight<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    let w = f64::deserialize(d)?;
    if !(w.is_finite() && w >= 0.0) {
        return Err(de::Error::custom(format!(
            "weight {w} is not finite and nonnegative"
        )));
    }
    Ok(w)
}

fn de_members<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<(usize, f64)>, D::Error> {
    let raw = BTreeMap::<String, f64>::deserialize(d)?;
    if raw.is_empty() {
        return Err(de::Error::custom("empty hyperedge"));
    }
    let mut out = Vec::with_capacity(raw.len());
    for (key, h) in raw {
        let v: usize = key
            .trim()
            .parse()
            .map_err(|_| de::Error::custom(format!("member key {key:?} is not a vertex index")))?;
        if !(h > 0.0 && h <= 1.0) {
            return Err(de::Error::custom(format!(
                "probability out of range (0, 1]: {h} for vertex {v}"
            )));
        }
        out.push((v, h));
    }
    out.sort_by_key(|&(v, _)| v);
    if let Some(w) = out.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(de::Error::custom(format!("vertex {} listed twice", w[0].0)));
    }
    Ok(out)
}

fn ser_members<S: serde::Serializer>(
    members: &[(usize, f64)],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeMap;
    let mut map = s.serialize_map(Some(members.len()))?;
    for (v, h) in members {
        map.serialize_entry(&v.to_string(), h)?;
    }
    map.end()
}

/// Dense symmetric |E|×|E| hyperedge affinity matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperedgeAdjacency {
    size: usize,
    entries: Vec<f64>,
}

impl HyperedgeAdjacency {
    /// Accepts a row-major matrix and checks the adjacency invariants:
    /// square, symmetric, nonnegative, finite, zero diagonal.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            for (j, &x) in row.iter().enumerate() {
                if !(x.is_finite() && x >= 0.0) {
                    return Err(Error::InvalidAdjacency(format!(
                        "entry ({i},{j}) = {x} is not finite and nonnegative"
                    )));
                }
                if i == j && x != 0.0 {
                    return Err(Error::InvalidAdjacency(format!(
                        "diagonal entry ({i},{i}) = {x} is nonzero"
                    )));
                }
                if j < i && x != rows[j][i] {
                    return Err(Error::InvalidAdjacency(format!(
                        "entries ({i},{j}) and ({j},{i}) differ"
                    )));
                }
            }
            entries.extend_from_slice(row);
        }
        Ok(Self { size: n, entries })
    }

    /// All-zero matrix of dimension `n`.
    pub fn zeros(n: usize) -> Self {
        Self {
            size: n,
            entries: vec![0.0; n * n],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.size..(i + 1) * self.size]
    }

    /// Indices `j != i` with positive affinity to `i`.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(i)
            .iter()
            .enumerate()
            .filter(move |&(j, &x)| j != i && x > 0.0)
            .map(|(j, _)| j)
    }

    /// Largest entry; an upper bound on the density over the simplex.
    pub fn max_entry(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }

    /// Dense `M x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.size)
            .map(|i| self.row(i).iter().zip(x).map(|(m, v)| m * v).sum())
            .collect()
    }

    /// `(M x)_i` using only the listed nonzero coordinates of `x`.
    #[inline]
    pub fn row_dot_sparse(&self, i: usize, x: &[f64], nonzero: &[usize]) -> f64 {
        let row = self.row(i);
        nonzero.iter().map(|&j| row[j] * x[j]).sum()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.size).map(|i| self.row(i).to_vec()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Hypergraph of the worked adjacency example: e_2 and e_3 are binary
    /// pairs sharing only v_2.
    fn worked_example(w2: f64, w3: f64) -> Hypergraph {
        Hypergraph::new(
            5,
            vec![
                Hyperedge::binary(1.0, [0, 1]),
                Hyperedge::binary(w2, [1, 2]),
                Hyperedge::binary(w3, [2, 3]),
                Hyperedge::binary(1.0, [4]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn validate_reports_empty_hyperedge() {
        let g = Hypergraph::unchecked(3, vec![Hyperedge::binary(1.0, [0]), Hyperedge::new(1.0, [])]);
        let v = g.validate().unwrap_err();
        assert_eq!(v, Violation::EmptyHyperedge { edge: 1 });
        assert_eq!(v.to_string(), "empty hyperedge at index 1");
    }

    #[test]
    fn validate_reports_probability_out_of_range() {
        let g = Hypergraph::unchecked(3, vec![Hyperedge::new(1.0, [(0, 1.3)])]);
        let v = g.validate().unwrap_err();
        assert!(matches!(v, Violation::ProbabilityOutOfRange { edge: 0, vertex: 0, .. }));
        assert!(v.to_string().contains("probability out of range"));
        let g = Hypergraph::unchecked(3, vec![Hyperedge::new(1.0, [(0, 0.0)])]);
        assert!(g.validate().is_err());
    }

    #[test]
    fn validate_reports_vertex_range_and_weights() {
        let g = Hypergraph::unchecked(2, vec![Hyperedge::binary(1.0, [0, 2])]);
        assert_eq!(
            g.validate().unwrap_err(),
            Violation::VertexOutOfRange { edge: 0, vertex: 2, vertex_count: 2 }
        );
        let g = Hypergraph::unchecked(2, vec![Hyperedge::binary(-1.0, [0])]);
        assert!(matches!(g.validate(), Err(Violation::InvalidWeight { .. })));
        let g = Hypergraph::unchecked(2, vec![Hyperedge::binary(f64::NAN, [0])]);
        assert!(matches!(g.validate(), Err(Violation::InvalidWeight { .. })));
        let g = Hypergraph::unchecked(2, vec![Hyperedge::binary(1.0, [1, 1])]);
        assert!(matches!(g.validate(), Err(Violation::DuplicateMember { .. })));
    }

    #[test]
    fn toy_hypergraph_is_valid() {
        assert!(worked_example(1.0, 2.0).validate().is_ok());
    }

    #[test]
    fn degrees() {
        let g = Hypergraph::new(
            3,
            vec![
                Hyperedge::binary(2.0, [0, 1]),
                Hyperedge::new(3.0, [(0, 1.0), (2, 0.25)]),
                Hyperedge::new(4.0, [(1, 0.5), (2, 0.25)]),
                Hyperedge::binary(1.0, [2]),
            ],
        )
        .unwrap();
        assert_eq!(g.hyperedge_degree(0).unwrap(), 2.0);
        assert_eq!(g.hyperedge_degree(2).unwrap(), 0.75);
        assert_eq!(g.hyperedge_degree(3).unwrap(), 1.0);
        assert!(g.hyperedge_degree(4).is_err());

        // v0: h=1 in weights 2 and 3.
        assert_eq!(g.vertex_degree(0).unwrap(), 5.0);
        // v1: 1*2 + 0.5*4
        assert_eq!(g.vertex_degree(1).unwrap(), 4.0);
        assert!(g.vertex_degree(3).is_err());

        let lonely = Hypergraph::new(2, vec![Hyperedge::binary(1.0, [0])]).unwrap();
        assert_eq!(lonely.vertex_degree(1).unwrap(), 0.0);
        let half = Hypergraph::new(1, vec![Hyperedge::new(4.0, [(0, 0.5)])]).unwrap();
        assert_eq!(half.vertex_degree(0).unwrap(), 2.0);
    }

    #[test]
    fn intersection_mass_cases() {
        let g = worked_example(1.0, 1.0);
        assert_eq!(g.intersection_mass(1, 2).unwrap(), 1.0);
        assert_eq!(g.intersection_mass(0, 2).unwrap(), 0.0);
        assert!(g.intersection_mass(0, 9).is_err());

        let p = Hypergraph::new(
            2,
            vec![
                Hyperedge::new(1.0, [(0, 0.8), (1, 1.0)]),
                Hyperedge::new(1.0, [(0, 0.3)]),
            ],
        )
        .unwrap();
        assert_eq!(p.intersection_mass(0, 1).unwrap(), 0.3);
    }

    #[test]
    fn worked_example_adjacency() {
        let g = worked_example(3.0, 5.0);
        let m = g.build_adjacency();
        assert_eq!(m.get(1, 2), (3.0 + 5.0) / 2.0);
        assert_eq!(m.get(2, 1), m.get(1, 2));
        for i in 0..m.size() {
            assert_eq!(m.get(i, i), 0.0);
        }
        // e_1 and e_3 are disjoint, e_4 is isolated.
        assert_eq!(m.get(0, 2), 0.0);
        assert_eq!(m.row(3).iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn from_dense_rejects_bad_matrices() {
        assert!(HyperedgeAdjacency::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]).is_ok());
        assert!(HyperedgeAdjacency::from_dense(&[vec![1.0, 1.0], vec![1.0, 0.0]]).is_err());
        assert!(HyperedgeAdjacency::from_dense(&[vec![0.0, 1.0], vec![2.0, 0.0]]).is_err());
        assert!(HyperedgeAdjacency::from_dense(&[vec![0.0, -1.0], vec![-1.0, 0.0]]).is_err());
        assert!(HyperedgeAdjacency::from_dense(&[vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn json_round_trip_and_diagnostics() {
        let text = r#"{
  "vertex_count": 3,
  "hyperedges": [
    {"weight": 1.5, "members": {"0": 1.0, "2": 0.5}},
    {"weight": 2.0, "members": {"1": 1.0, "2": 1.0}}
  ]
}"#;
        let g = Hypergraph::from_json_str(text).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.hyperedge(0).unwrap().membership(2), 0.5);

        let mut buf = Vec::new();
        g.write_json(&mut buf).unwrap();
        assert_eq!(Hypergraph::read_json(buf.as_slice()).unwrap(), g);

        let bad = text.replace("0.5", "1.3");
        let err = Hypergraph::from_json_str(&bad).unwrap_err().to_string();
        assert!(err.contains("probability out of range"), "{err}");
        assert!(err.contains("line 4"), "{err}");

        let empty = text.replace(r#"{"1": 1.0, "2": 1.0}"#, "{}");
        let err = Hypergraph::from_json_str(&empty).unwrap_err().to_string();
        assert!(err.contains("empty hyperedge") && err.contains("line 5"), "{err}");

        let range = text.replace(r#""vertex_count": 3"#, r#""vertex_count": 2"#);
        let err = Hypergraph::from_json_str(&range).unwrap_err().to_string();
        assert!(err.contains("vertex 2 in hyperedge 0"), "{err}");
    }
}
