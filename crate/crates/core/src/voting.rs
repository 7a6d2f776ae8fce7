//! Probabilistic voting: dominant-seed closeness over the current mode's
//! support, the direction vector, and the line-search expansion step.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hypergraph::{HyperedgeAdjacency, Hypergraph};
use crate::simplex::{bilinear, support, ModeCertificate, SimplexVector, DEFAULT_SUPPORT_THRESHOLD};

/// Largest subset handled by the exact memoized recursion.
pub const DEFAULT_SUBSET_CAP: usize = 16;
/// Hard ceiling on the exact recursion; the memo grows as `2^|S|·|S|`.
pub const MAX_SUBSET_CAP: usize = 20;

/// g_S(e_k) = (1/|S|) Σ_{j∈S} M(k, j).
pub fn avg_weighted_degree(m: &HyperedgeAdjacency, s: &[usize], k: usize) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::EmptySet);
    }
    let row = m.row(k);
    Ok(s.iter().map(|&j| row[j]).sum::<f64>() / s.len() as f64)
}

/// ψ_S(e_i, e_j) = M(i, j) − g_S(e_i), for `i ∈ S`.
pub fn relative_closeness(m: &HyperedgeAdjacency, s: &[usize], i: usize, j: usize) -> Result<f64> {
    if !s.contains(&i) {
        return Err(Error::NotInSubset(i));
    }
    Ok(m.get(i, j) - avg_weighted_degree(m, s, i)?)
}

/// Exact recursive closeness weight w_S(e_i):
/// `1` for a singleton, otherwise
/// `Σ_{j∈S−{i}} ψ_{S−{i}}(e_j, e_i) · w_{S−{i}}(e_j)`.
///
/// Memoized over (subset bitmask, member); `|S|` must not exceed `cap`.
pub fn subset_weight(m: &HyperedgeAdjacency, s: &[usize], i: usize, cap: usize) -> Result<f64> {
    let pos = s.iter().position(|&x| x == i).ok_or(Error::NotInSubset(i))?;
    let mut memo = SubsetMemo::new(m, s, cap)?;
    Ok(memo.weight(memo.full(), pos))
}

/// w_S(e_i) for every member of `s`, in order, sharing one memo table.
pub fn subset_weights(m: &HyperedgeAdjacency, s: &[usize], cap: usize) -> Result<Vec<f64>> {
    let mut memo = SubsetMemo::new(m, s, cap)?;
    let full = memo.full();
    Ok((0..s.len()).map(|pos| memo.weight(full, pos)).collect())
}

/// One-level surrogate used when `|S|` exceeds the exact cap:
/// `ŵ_S(e_i) = Σ_{j∈S−{i}} ψ_{S−{i}}(e_j, e_i)`.
pub fn approx_subset_weight(m: &HyperedgeAdjacency, s: &[usize], i: usize) -> Result<f64> {
    if !s.contains(&i) {
        return Err(Error::NotInSubset(i));
    }
    if s.len() == 1 {
        return Ok(1.0);
    }
    let rest: Vec<usize> = s.iter().copied().filter(|&x| x != i).collect();
    let mut total = 0.0;
    for &j in &rest {
        total += m.get(j, i) - avg_weighted_degree(m, &rest, j)?;
    }
    Ok(total)
}

struct SubsetMemo<'a> {
    m: &'a HyperedgeAdjacency,
    s: &'a [usize],
    weights: Vec<f64>,
    avg: Vec<f64>,
}

impl<'a> SubsetMemo<'a> {
    fn new(m: &'a HyperedgeAdjacency, s: &'a [usize], cap: usize) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::EmptySet);
        }
        let cap = cap.min(MAX_SUBSET_CAP);
        if s.len() > cap {
            return Err(Error::SubsetTooLarge { size: s.len(), cap });
        }
        if let Some(&bad) = s.iter().find(|&&x| x >= m.size()) {
            return Err(Error::IndexOutOfRange {
                what: "hyperedge",
                index: bad,
                len: m.size(),
            });
        }
        let slots = (1usize << s.len()) * s.len();
        Ok(Self {
            m,
            s,
            weights: vec![f64::NAN; slots],
            avg: vec![f64::NAN; slots],
        })
    }

    fn full(&self) -> u32 {
        ((1u64 << self.s.len()) - 1) as u32
    }

    fn slot(&self, mask: u32, pos: usize) -> usize {
        mask as usize * self.s.len() + pos
    }

    /// g over the subset `mask`, for member at `pos`.
    fn avg_degree(&mut self, mask: u32, pos: usize) -> f64 {
        let slot = self.slot(mask, pos);
        if !self.avg[slot].is_nan() {
            return self.avg[slot];
        }
        let row = self.m.row(self.s[pos]);
        let mut sum = 0.0;
        let mut bits = mask;
        while bits != 0 {
            let k = bits.trailing_zeros() as usize;
            sum += row[self.s[k]];
            bits &= bits - 1;
        }
        let g = sum / mask.count_ones() as f64;
        self.avg[slot] = g;
        g
    }

    fn weight(&mut self, mask: u32, pos: usize) -> f64 {
        if mask.count_ones() == 1 {
            return 1.0;
        }
        let slot = self.slot(mask, pos);
        if !self.weights[slot].is_nan() {
            return self.weights[slot];
        }
        let rest = mask & !(1 << pos);
        let target = self.s[pos];
        let mut total = 0.0;
        let mut bits = rest;
        while bits != 0 {
            let j = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let psi = self.m.get(self.s[j], target) - self.avg_degree(rest, j);
            total += psi * self.weight(rest, j);
        }
        self.weights[slot] = total;
        total
    }
}

/// Normalized closeness p(e_i | S) over a hyperedge subset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedDistribution {
    pub subset: Vec<usize>,
    /// Aligned with `subset`.
    pub closeness: Vec<f64>,
    /// Whether the exact recursion produced the raw weights.
    pub exact: bool,
    /// Set when no member had positive weight and the uniform fallback was used.
    pub uniform_fallback: bool,
}

impl SeedDistribution {
    /// p(e_i | S); zero outside S.
    pub fn closeness_of(&self, i: usize) -> f64 {
        self.subset
            .iter()
            .position(|&x| x == i)
            .map_or(0.0, |k| self.closeness[k])
    }

    /// Member with the highest closeness (first on ties).
    pub fn dominant(&self) -> usize {
        let mut best = 0;
        for k in 1..self.subset.len() {
            if self.closeness[k] > self.closeness[best] {
                best = k;
            }
        }
        self.subset[best]
    }
}

/// Closeness distribution `w_S(e_i) / W(S)` over `s`. Negative raw weights
/// are clamped to zero before normalizing; a nonpositive total falls back to
/// uniform.
pub fn dominant_seed_distribution(
    m: &HyperedgeAdjacency,
    s: &[usize],
    cap: usize,
) -> Result<SeedDistribution> {
    if s.is_empty() {
        return Err(Error::EmptySet);
    }
    let exact = s.len() <= cap.min(MAX_SUBSET_CAP);
    let raw = if exact {
        subset_weights(m, s, cap)?
    } else {
        s.iter()
            .map(|&i| approx_subset_weight(m, s, i))
            .collect::<Result<Vec<_>>>()?
    };
    let clamped: Vec<f64> = raw.iter().map(|&w| w.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    let (closeness, uniform_fallback) = if total > 0.0 && total.is_finite() {
        (clamped.iter().map(|w| w / total).collect(), false)
    } else {
        (vec![1.0 / s.len() as f64; s.len()], true)
    };
    Ok(SeedDistribution {
        subset: s.to_vec(),
        closeness,
        exact,
        uniform_fallback,
    })
}

/// Direction vector h. On the support `h_i = p*_i − 1`; off it
/// `h_i = max(Σ_j p(e_j|S) ((Mp*)_i − F(p*)), 0)` over seeds e_j sharing a
/// vertex with e_i. Without a hypergraph, positive affinity stands in for
/// vertex overlap.
pub fn direction_vector(
    p_star: &SimplexVector,
    m: &HyperedgeAdjacency,
    g: Option<&Hypergraph>,
    seeds: &SeedDistribution,
    cert: &ModeCertificate,
) -> Result<Vec<f64>> {
    if cert.is_global_mode {
        return Err(Error::AlreadyMode);
    }
    if p_star.len() != m.size() {
        return Err(Error::DimensionMismatch {
            expected: m.size(),
            found: p_star.len(),
        });
    }
    let x = p_star.as_slice();
    let r = m.mul_vec(x);
    let lambda = cert.lambda;
    let mut in_support = vec![false; x.len()];
    for &i in &cert.support {
        in_support[i] = true;
    }
    let mut h = vec![0.0; x.len()];
    for i in 0..x.len() {
        if in_support[i] {
            h[i] = x[i] - 1.0;
            continue;
        }
        let gain = r[i] - lambda;
        if gain <= 0.0 {
            continue;
        }
        let mut mass = 0.0;
        for (&j, &c) in seeds.subset.iter().zip(&seeds.closeness) {
            let shared = match g {
                Some(g) => g.overlaps(i, j)?,
                None => m.get(i, j) > 0.0,
            };
            if shared {
                mass += c;
            }
        }
        h[i] = (mass * gain).max(0.0);
    }
    Ok(h)
}

/// Outcome of one expansion along h.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionResult {
    pub direction: Vec<f64>,
    /// η = hᵀMh.
    pub eta: f64,
    /// b = (p*)ᵀMh.
    pub slope: f64,
    /// Feasibility bound min over the support of p*_i / (1 − p*_i).
    pub c_max: f64,
    /// Vertex b/(−η) of Q(c) = ηc² + 2bc, or +inf when η ≥ 0.
    pub c_unconstrained: f64,
    /// b / F(p*), kept for comparison with the vertex formula.
    pub c_alternative: f64,
    /// min(c_unconstrained, c_max).
    pub c_star: f64,
    /// Maximizer of the renormalized density along the ray, clipped to c_max.
    pub c_renormalized: f64,
    /// Step actually taken; zero when not improved.
    pub step: f64,
    /// step · h.
    pub delta_p: Vec<f64>,
    /// Q(c_star).
    pub gain: f64,
    pub density_before: f64,
    pub density_after: f64,
    /// L1-renormalized p* + Δp; equal to p* when not improved.
    pub expanded: SimplexVector,
    pub improved: bool,
}

const MAX_BACKTRACK: usize = 60;

/// Line search along h.
///
/// `p* + c h` leaves the simplex unless Σh = 0, so every trial point is
/// L1-renormalized. With σ = Σh the renormalized density along the ray is
/// `φ(c) = (λ + 2bc + ηc²) / (1 + σc)²`, whose only critical point is
/// `c = (b − σλ) / (σb − η)`. The step is the better of `c*` (the vertex of Q
/// clipped to `c_max`), that critical point, and `c_max`; it is halved until
/// φ exceeds λ. `improved` means the renormalized point has strictly larger
/// density than `p*`.
pub fn expansion_step(
    p_star: &SimplexVector,
    m: &HyperedgeAdjacency,
    h: &[f64],
) -> Result<ExpansionResult> {
    if p_star.len() != m.size() || h.len() != m.size() {
        return Err(Error::DimensionMismatch {
            expected: m.size(),
            found: if p_star.len() != m.size() { p_star.len() } else { h.len() },
        });
    }
    let x = p_star.as_slice();
    let lambda = bilinear(x, x, m);
    let eta = bilinear(h, h, m);
    let slope = bilinear(x, h, m);
    let sigma: f64 = h.iter().sum();

    let c_max = support(p_star, DEFAULT_SUPPORT_THRESHOLD)
        .into_iter()
        .filter(|&i| x[i] < 1.0)
        .map(|i| x[i] / (1.0 - x[i]))
        .fold(f64::INFINITY, f64::min);
    let c_unconstrained = if eta < 0.0 { slope / -eta } else { f64::INFINITY };
    let c_alternative = if lambda > 0.0 { slope / lambda } else { f64::INFINITY };
    let c_star = c_unconstrained.min(c_max);
    let gain = if c_star.is_finite() {
        eta * c_star * c_star + 2.0 * c_star * slope
    } else if slope > 0.0 || eta > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    let numer = slope - sigma * lambda;
    let denom = sigma * slope - eta;
    let c_renormalized = if numer > 0.0 && denom > 0.0 {
        (numer / denom).min(c_max)
    } else {
        c_max
    };

    let mut result = ExpansionResult {
        direction: h.to_vec(),
        eta,
        slope,
        c_max,
        c_unconstrained,
        c_alternative,
        c_star,
        c_renormalized,
        step: 0.0,
        delta_p: vec![0.0; h.len()],
        gain,
        density_before: lambda,
        density_after: lambda,
        expanded: p_star.clone(),
        improved: false,
    };

    let evaluate = |c: f64| -> Option<(f64, SimplexVector)> {
        if !(c.is_finite() && c > 0.0) {
            return None;
        }
        let candidate = shifted(x, h, c)?;
        let f = bilinear(candidate.as_slice(), candidate.as_slice(), m);
        Some((f, candidate))
    };
    let mut best: Option<(f64, f64, SimplexVector)> = None;
    for c in [c_star, c_renormalized, c_max] {
        if let Some((f, cand)) = evaluate(c) {
            if best.as_ref().is_none_or(|b| f > b.1) {
                best = Some((c, f, cand));
            }
        }
    }
    // A single-hyperedge support leaves every bound infinite.
    let mut c = match &best {
        Some((c, f, _)) if *f > lambda => *c,
        Some((c, _, _)) => *c * 0.5,
        None => 1.0,
    };
    if !best.as_ref().is_some_and(|b| b.1 > lambda) {
        best = None;
        for _ in 0..MAX_BACKTRACK {
            if let Some((f, cand)) = evaluate(c) {
                if f > lambda {
                    best = Some((c, f, cand));
                    break;
                }
            }
            c *= 0.5;
        }
    }
    if let Some((c, f, cand)) = best {
        result.step = c;
        result.delta_p = h.iter().map(|hi| c * hi).collect();
        result.density_after = f;
        result.expanded = cand;
        result.improved = true;
    }
    Ok(result)
}

/// L1-renormalized `x + c h`, with rounding-level negatives clipped.
fn shifted(x: &[f64], h: &[f64], c: f64) -> Option<SimplexVector> {
    let mut y: Vec<f64> = x.iter().zip(h).map(|(a, b)| a + c * b).collect();
    for v in &mut y {
        if *v < 0.0 {
            if *v < -1e-12 {
                return None;
            }
            *v = 0.0;
        }
    }
    SimplexVector::normalized(y).ok()
}
