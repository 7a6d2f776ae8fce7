//! Exhaustive KKT-point enumeration for small standard quadratic programs.
//!
//! For every nonempty support S the on-support system
//! `M_S p_S = λ·1, Σ p_S = 1` is solved directly. Solutions with strictly
//! positive `p_S` whose off-support affinities stay below λ are KKT points of
//! `max pᵀMp` over the simplex. Cost is exponential in the dimension.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hypergraph::HyperedgeAdjacency;
use crate::simplex::{is_mode, ModeCertificate, SimplexVector, DEFAULT_MODE_TOL};

pub const MAX_ENUMERATION_SIZE: usize = 12;

/// Off-support slack used when accepting an enumerated point.
const OFF_SUPPORT_SLACK: f64 = 1e-9;
/// Relative singular-value floor below which a support system is singular.
const SINGULAR_RCOND: f64 = 1e-10;
const POSITIVITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct KktEnumeration {
    /// Sorted by λ descending.
    pub points: Vec<ModeCertificate>,
    /// Supports whose linear system had no isolated solution.
    pub singular_supports: Vec<Vec<usize>>,
}

pub fn enumerate_kkt_points(m: &HyperedgeAdjacency) -> Result<KktEnumeration> {
    let n = m.size();
    if n > MAX_ENUMERATION_SIZE {
        return Err(Error::TooLarge {
            size: n,
            max: MAX_ENUMERATION_SIZE,
        });
    }
    if n == 0 {
        return Err(Error::EmptySet);
    }

    let mut points = Vec::new();
    let mut singular_supports = Vec::new();
    for mask in 1u32..(1u32 << n) {
        let s: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        let k = s.len();
        // [ M_S  -1 ] [p_S]   [0]
        // [ 1ᵀ    0 ] [ λ ] = [1]
        let mut a = DMatrix::<f64>::zeros(k + 1, k + 1);
        for (r, &i) in s.iter().enumerate() {
            for (c, &j) in s.iter().enumerate() {
                a[(r, c)] = m.get(i, j);
            }
            a[(r, k)] = -1.0;
            a[(k, r)] = 1.0;
        }
        let mut b = DVector::<f64>::zeros(k + 1);
        b[k] = 1.0;

        let svd = a.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if smin <= SINGULAR_RCOND * smax {
            singular_supports.push(s);
            continue;
        }
        let Some(x) = a.lu().solve(&b) else {
            singular_supports.push(s);
            continue;
        };
        if s.iter().enumerate().any(|(r, _)| !(x[r] > POSITIVITY_FLOOR)) {
            continue;
        }
        let mut p = vec![0.0; n];
        for (r, &i) in s.iter().enumerate() {
            p[i] = x[r];
        }
        let lambda = x[k];
        let r_full = m.mul_vec(&p);
        let off_ok = (0..n)
            .filter(|j| mask & (1 << j) == 0)
            .all(|j| r_full[j] <= lambda + OFF_SUPPORT_SLACK);
        if !off_ok {
            continue;
        }
        let p = SimplexVector::normalized(p)?;
        points.push(is_mode(&p, m, DEFAULT_MODE_TOL)?);
    }
    points.sort_by(|a, b| b.lambda.total_cmp(&a.lambda));
    Ok(KktEnumeration {
        points,
        singular_supports,
    })
}
