//! Points of the probability simplex, the density objective `F(p) = pᵀMp`,
//! and the first-order mode certificate.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hypergraph::HyperedgeAdjacency;

/// Entries at or below this value are outside the support.
pub const DEFAULT_SUPPORT_THRESHOLD: f64 = 1e-8;
/// Absolute tolerance on affinity values in the mode check.
pub const DEFAULT_MODE_TOL: f64 = 1e-6;
/// Allowed deviation of Σp from one.
pub const SIMPLEX_SUM_TOL: f64 = 1e-9;

/// A point of Δⁿ: nonnegative entries summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct SimplexVector(Vec<f64>);

impl SimplexVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::NotOnSimplex("empty vector".into()));
        }
        if let Some((i, x)) = entries
            .iter()
            .enumerate()
            .find(|(_, x)| !(x.is_finite() && **x >= 0.0))
        {
            return Err(Error::NotOnSimplex(format!("entry {i} = {x}")));
        }
        let sum: f64 = entries.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_SUM_TOL {
            return Err(Error::NotOnSimplex(format!("entries sum to {sum}")));
        }
        Ok(Self(entries))
    }

    /// L1-normalizes nonnegative weights.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum.is_finite() && sum > 0.0) || weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::NotOnSimplex(
                "weights must be nonnegative with a positive finite sum".into(),
            ));
        }
        Ok(Self(weights.into_iter().map(|w| w / sum).collect()))
    }

    /// Uniform distribution over `indices` in dimension `n`.
    pub fn uniform_over(indices: &[usize], n: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptySet);
        }
        let mut v = vec![0.0; n];
        let share = 1.0 / indices.len() as f64;
        for &i in indices {
            if i >= n {
                return Err(Error::IndexOutOfRange {
                    what: "hyperedge",
                    index: i,
                    len: n,
                });
            }
            v[i] = share;
        }
        Ok(Self(v))
    }

    pub(crate) fn from_raw(entries: Vec<f64>) -> Self {
        Self(entries)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Indices of exactly nonzero entries.
    pub fn nonzero(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &x)| x != 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn l1_distance(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }
}

impl std::ops::Index<usize> for SimplexVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

fn check_dim(m: &HyperedgeAdjacency, len: usize) -> Result<()> {
    if m.size() != len {
        return Err(Error::DimensionMismatch {
            expected: m.size(),
            found: len,
        });
    }
    Ok(())
}

/// `F(p) = pᵀMp`.
pub fn density(p: &SimplexVector, m: &HyperedgeAdjacency) -> Result<f64> {
    affinity(p, p, m)
}

/// `m(x, y) = xᵀMy`.
pub fn affinity(x: &SimplexVector, y: &SimplexVector, m: &HyperedgeAdjacency) -> Result<f64> {
    check_dim(m, x.len())?;
    check_dim(m, y.len())?;
    Ok(bilinear(x.as_slice(), y.as_slice(), m))
}

/// `xᵀMy` for arbitrary real vectors of matching dimension; skips zero
/// coordinates of `x` and `y`.
pub(crate) fn bilinear(x: &[f64], y: &[f64], m: &HyperedgeAdjacency) -> f64 {
    let ynz: Vec<usize> = (0..y.len()).filter(|&j| y[j] != 0.0).collect();
    x.iter()
        .enumerate()
        .filter(|(_, &xi)| xi != 0.0)
        .map(|(i, &xi)| xi * m.row_dot_sparse(i, y, &ynz))
        .sum()
}

/// θ(p): indices with `p_i > threshold`.
pub fn support(p: &SimplexVector, threshold: f64) -> Vec<usize> {
    p.as_slice()
        .iter()
        .enumerate()
        .filter(|(_, &x)| x > threshold)
        .map(|(i, _)| i)
        .collect()
}

/// `I_j` in dimension `n`.
pub fn unit_indicator(j: usize, n: usize) -> Result<SimplexVector> {
    if j >= n {
        return Err(Error::IndexOutOfRange {
            what: "hyperedge",
            index: j,
            len: n,
        });
    }
    let mut v = vec![0.0; n];
    v[j] = 1.0;
    Ok(SimplexVector(v))
}

/// Outcome of the first-order mode check on a simplex point.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeCertificate {
    pub mode: SimplexVector,
    pub support: Vec<usize>,
    /// λ = F(p*).
    pub lambda: f64,
    pub is_global_mode: bool,
    /// max over off-support j of `(Mp*)_j − λ`; `-inf` when the support is
    /// the whole index set.
    pub max_violation: f64,
    /// max over support i of `|(Mp*)_i − λ|`.
    pub support_deviation: f64,
    /// False only when produced by a mode search that hit its iteration cap.
    pub converged: bool,
}

impl ModeCertificate {
    /// Off-support indices j with `(Mp*)_j > λ + tol`.
    pub fn violators(&self, m: &HyperedgeAdjacency, tol: f64) -> Vec<usize> {
        let r = m.mul_vec(self.mode.as_slice());
        let mut in_support = vec![false; r.len()];
        for &i in &self.support {
            in_support[i] = true;
        }
        (0..r.len())
            .filter(|&j| !in_support[j] && r[j] > self.lambda + tol)
            .collect()
    }

    /// Plain report: support, λ, max_violation, is_global_mode.
    pub fn report(&self) -> CertificateReport {
        CertificateReport {
            support: self.support.clone(),
            lambda: self.lambda,
            max_violation: self.max_violation.is_finite().then_some(self.max_violation),
            support_deviation: self.support_deviation,
            is_global_mode: self.is_global_mode,
            converged: self.converged,
        }
    }
}

/// Serializable summary of a [`ModeCertificate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub support: Vec<usize>,
    pub lambda: f64,
    pub max_violation: Option<f64>,
    pub support_deviation: f64,
    pub is_global_mode: bool,
    pub converged: bool,
}

/// Checks both branches of the KKT system at `p`: `(Mp)_i = λ` on the support
/// and `(Mp)_j ≤ λ` off it, each within `tol`. Uses the default support
/// threshold.
pub fn is_mode(p: &SimplexVector, m: &HyperedgeAdjacency, tol: f64) -> Result<ModeCertificate> {
    is_mode_with_threshold(p, m, tol, DEFAULT_SUPPORT_THRESHOLD)
}

pub fn is_mode_with_threshold(
    p: &SimplexVector,
    m: &HyperedgeAdjacency,
    tol: f64,
    support_threshold: f64,
) -> Result<ModeCertificate> {
    check_dim(m, p.len())?;
    let nz = p.nonzero();
    let x = p.as_slice();
    let r: Vec<f64> = (0..m.size()).map(|i| m.row_dot_sparse(i, x, &nz)).collect();
    let lambda: f64 = nz.iter().map(|&i| x[i] * r[i]).sum();
    let support = support(p, support_threshold);

    let mut in_support = vec![false; x.len()];
    let mut support_deviation: f64 = 0.0;
    for &i in &support {
        in_support[i] = true;
        support_deviation = support_deviation.max((r[i] - lambda).abs());
    }
    let max_violation = (0..x.len())
        .filter(|&j| !in_support[j])
        .map(|j| r[j] - lambda)
        .fold(f64::NEG_INFINITY, f64::max);

    Ok(ModeCertificate {
        mode: p.clone(),
        support,
        lambda,
        is_global_mode: max_violation <= tol && support_deviation <= tol,
        max_violation,
        support_deviation,
        converged: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn adj(rows: &[&[f64]]) -> HyperedgeAdjacency {
        HyperedgeAdjacency::from_dense(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
            .unwrap()
    }

    fn sv(x: &[f64]) -> SimplexVector {
        SimplexVector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn simplex_vector_validation() {
        assert!(SimplexVector::new(vec![0.5, 0.5]).is_ok());
        assert!(SimplexVector::new(vec![0.5, 0.6]).is_err());
        assert!(SimplexVector::new(vec![1.5, -0.5]).is_err());
        assert!(SimplexVector::new(vec![]).is_err());
        assert_eq!(
            SimplexVector::normalized(vec![1.0, 3.0]).unwrap().as_slice(),
            &[0.25, 0.75]
        );
        assert!(SimplexVector::normalized(vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn density_examples() {
        let m = adj(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(density(&sv(&[0.5, 0.5]), &m).unwrap(), 0.5);
        assert_eq!(density(&unit_indicator(1, 2).unwrap(), &m).unwrap(), 0.0);
        let m2 = adj(&[&[0.0, 2.0], &[2.0, 0.0]]);
        // 2 * 2 * 0.25 * 0.75
        assert_eq!(density(&sv(&[0.25, 0.75]), &m2).unwrap(), 0.75);
        assert!(density(&sv(&[1.0]), &m2).is_err());
    }

    #[test]
    fn affinity_examples() {
        let m = adj(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(affinity(&sv(&[1.0, 0.0]), &sv(&[0.5, 0.5]), &m).unwrap(), 0.5);
        let m3 = adj(&[&[0.0, 1.0, 4.0], &[1.0, 0.0, 2.5], &[4.0, 2.5, 0.0]]);
        for i in 0..3 {
            for j in 0..3 {
                let a = affinity(
                    &unit_indicator(i, 3).unwrap(),
                    &unit_indicator(j, 3).unwrap(),
                    &m3,
                )
                .unwrap();
                assert_eq!(a, m3.get(i, j));
            }
        }
        let p = sv(&[0.2, 0.3, 0.5]);
        assert_eq!(affinity(&p, &p, &m3).unwrap(), density(&p, &m3).unwrap());
    }

    #[test]
    fn support_examples() {
        assert_eq!(support(&sv(&[0.5, 0.5, 0.0]), 1e-8), vec![0, 1]);
        assert_eq!(support(&unit_indicator(2, 3).unwrap(), 1e-8), vec![2]);
        assert_eq!(support(&sv(&[1e-12, 1.0 - 1e-12]), 1e-8), vec![1]);
    }

    #[test]
    fn unit_indicator_examples() {
        assert_eq!(unit_indicator(1, 3).unwrap().as_slice(), &[0.0, 1.0, 0.0]);
        assert_eq!(unit_indicator(0, 1).unwrap().as_slice(), &[1.0]);
        assert_eq!(unit_indicator(2, 3).unwrap().as_slice(), &[0.0, 0.0, 1.0]);
        assert!(unit_indicator(3, 3).is_err());
    }

    #[test]
    fn is_mode_examples() {
        let m = adj(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let c = is_mode(&sv(&[0.5, 0.5]), &m, DEFAULT_MODE_TOL).unwrap();
        assert!(c.is_global_mode);
        assert_eq!(c.lambda, 0.5);
        assert_eq!(c.support, vec![0, 1]);
        assert_eq!(c.max_violation, f64::NEG_INFINITY);

        // Isolated third hyperedge: vacuous KKT with λ = 0.
        let m = adj(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0]]);
        let c = is_mode(&unit_indicator(2, 3).unwrap(), &m, DEFAULT_MODE_TOL).unwrap();
        assert!(c.is_global_mode);
        assert_eq!(c.lambda, 0.0);
        assert_eq!(c.max_violation, 0.0);

        let m = adj(&[&[0.0, 2.0], &[2.0, 0.0]]);
        let c = is_mode(&sv(&[1.0, 0.0]), &m, DEFAULT_MODE_TOL).unwrap();
        assert!(!c.is_global_mode);
        assert_eq!(c.max_violation, 2.0);
        assert_eq!(c.violators(&m, DEFAULT_MODE_TOL), vec![1]);
    }

    #[test]
    fn is_mode_checks_support_equality() {
        // p = (0.25, 0.75) on the 2x2 block: (Mp) = (1.5, 0.5) != λ = 0.75.
        let m = adj(&[&[0.0, 2.0], &[2.0, 0.0]]);
        let c = is_mode(&sv(&[0.25, 0.75]), &m, DEFAULT_MODE_TOL).unwrap();
        assert!(!c.is_global_mode);
        assert_eq!(c.support_deviation, 0.75);
    }
}
