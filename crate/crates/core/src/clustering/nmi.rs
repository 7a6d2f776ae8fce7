use std::collections::HashMap;

use crate::error::{Error, Result};

/// Normalized mutual information `I(A;B) / sqrt(H(A) H(B))`.
///
/// Points whose label is `None` on either side are dropped from both.
/// When either partition has zero entropy the result is 1 if the two
/// partitions are identical up to relabeling and 0 otherwise.
pub fn nmi(pred: &[Option<usize>], truth: &[Option<usize>]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: pred.len(),
        });
    }
    let pairs: Vec<(usize, usize)> = pred
        .iter()
        .zip(truth)
        .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::EmptySet);
    }
    let n = pairs.len() as f64;

    let mut ca: HashMap<usize, f64> = HashMap::new();
    let mut cb: HashMap<usize, f64> = HashMap::new();
    let mut joint: HashMap<(usize, usize), f64> = HashMap::new();
    for &(a, b) in &pairs {
        *ca.entry(a).or_default() += 1.0;
        *cb.entry(b).or_default() += 1.0;
        *joint.entry((a, b)).or_default() += 1.0;
    }
    let entropy = |counts: &HashMap<usize, f64>| -> f64 {
        let mut c: Vec<f64> = counts.values().copied().collect();
        c.sort_by(f64::total_cmp);
        c.iter().map(|&k| -(k / n) * (k / n).ln()).sum()
    };
    let ha = entropy(&ca);
    let hb = entropy(&cb);
    if ha <= 0.0 || hb <= 0.0 {
        // Identical up to relabeling iff the joint table is a bijection.
        let same = joint.len() == ca.len() && joint.len() == cb.len();
        return Ok(if same { 1.0 } else { 0.0 });
    }
    let mut terms: Vec<f64> = joint
        .iter()
        .map(|(&(a, b), &k)| {
            let pab = k / n;
            pab * (pab / ((ca[&a] / n) * (cb[&b] / n))).ln()
        })
        .collect();
    terms.sort_by(f64::total_cmp);
    let mi: f64 = terms.iter().sum();
    Ok((mi / (ha * hb).sqrt()).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn some(v: &[usize]) -> Vec<Option<usize>> {
        v.iter().map(|&x| Some(x)).collect()
    }

    #[test]
    fn identical_and_relabeled() {
        let a = some(&[0, 0, 1, 1, 2, 2]);
        assert!((nmi(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let b = some(&[5, 5, 0, 0, 9, 9]);
        assert!((nmi(&b, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn independent_partitions_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a: Vec<Option<usize>> = (0..20_000).map(|_| Some(rng.random_range(0..4))).collect();
        let b: Vec<Option<usize>> = (0..20_000).map(|_| Some(rng.random_range(0..4))).collect();
        assert!(nmi(&a, &b).unwrap() < 0.01);
    }

    #[test]
    fn hand_computed_value() {
        // pred {0,0,1,1}, truth {0,0,0,1}:
        // H(pred) = ln 2, H(truth) = −(3/4 ln 3/4 + 1/4 ln 1/4),
        // I summed over the three occupied cells.
        let pred = some(&[0, 0, 1, 1]);
        let truth = some(&[0, 0, 0, 1]);
        let ha = 2f64.ln();
        let hb = -(0.75 * 0.75f64.ln() + 0.25 * 0.25f64.ln());
        let mi = 0.5 * (0.5f64 / (0.5 * 0.75)).ln()
            + 0.25 * (0.25f64 / (0.5 * 0.75)).ln()
            + 0.25 * (0.25f64 / (0.5 * 0.25)).ln();
        let expected = mi / (ha * hb).sqrt();
        assert!((nmi(&pred, &truth).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn degenerate_and_outliers() {
        let one = some(&[3, 3, 3]);
        assert_eq!(nmi(&one, &some(&[1, 1, 1])).unwrap(), 1.0);
        assert_eq!(nmi(&one, &some(&[0, 1, 1])).unwrap(), 0.0);
        let pred = vec![Some(0), None, Some(1)];
        let truth = some(&[0, 1, 1]);
        assert_eq!(nmi(&pred, &truth).unwrap(), 1.0);
        assert!(nmi(&pred, &truth[..2]).is_err());
        assert!(nmi(&[None], &[Some(0)]).is_err());
    }
}
