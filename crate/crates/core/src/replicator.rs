//! Discrete replicator dynamics `p_i ← p_i (Mp)_i / pᵀMp`.
//!
//! Zero coordinates stay zero under the update, so every iteration only
//! touches the current nonzero set.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hypergraph::HyperedgeAdjacency;
use crate::simplex::{
    is_mode_with_threshold, ModeCertificate, SimplexVector, DEFAULT_MODE_TOL,
    DEFAULT_SUPPORT_THRESHOLD,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeekConfig {
    /// Stop once |F(t+1) − F(t)| falls below this.
    pub eps: f64,
    pub max_iter: usize,
    pub mode_tol: f64,
    pub support_threshold: f64,
    /// Keep a per-iteration trace.
    pub trace: bool,
}

impl Default for SeekConfig {
    fn default() -> Self {
        Self {
            eps: 1e-9,
            max_iter: 1000,
            mode_tol: DEFAULT_MODE_TOL,
            support_threshold: DEFAULT_SUPPORT_THRESHOLD,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub density: f64,
    pub support_size: usize,
}

#[derive(Debug, Clone)]
pub struct SeekResult {
    pub certificate: ModeCertificate,
    pub iterations: usize,
    pub trace: Vec<TracePoint>,
}

pub fn replicator_step(p: &SimplexVector, m: &HyperedgeAdjacency) -> Result<SimplexVector> {
    if m.size() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: m.size(),
            found: p.len(),
        });
    }
    let nz = p.nonzero();
    let x = p.as_slice();
    let r: Vec<f64> = nz.iter().map(|&i| m.row_dot_sparse(i, x, &nz)).collect();
    let f: f64 = nz.iter().zip(&r).map(|(&i, ri)| x[i] * ri).sum();
    if !(f > 0.0) {
        return Err(Error::DegenerateStart);
    }
    let mut next = vec![0.0; x.len()];
    for (&i, ri) in nz.iter().zip(&r) {
        next[i] = x[i] * ri / f;
    }
    Ok(SimplexVector::from_raw(next))
}

/// Iterates the replicator update from `p0` until the density change drops
/// below `eps` with the support residual `max |(Mp)_i − F|` within
/// `mode_tol`, or until `max_iter` updates. The returned certificate is
/// evaluated over the whole matrix; hitting the cap clears `converged`.
pub fn seek_mode(p0: &SimplexVector, m: &HyperedgeAdjacency, cfg: &SeekConfig) -> Result<SeekResult> {
    if m.size() != p0.len() {
        return Err(Error::DimensionMismatch {
            expected: m.size(),
            found: p0.len(),
        });
    }
    if !(cfg.eps > 0.0) {
        return Err(Error::InvalidParameter("eps must be positive".into()));
    }

    let mut x = p0.as_slice().to_vec();
    let mut nz = p0.nonzero();
    let mut r = vec![0.0; x.len()];
    let mut f = refresh(m, &x, &nz, &mut r);
    if !(f > 0.0) {
        return Err(Error::DegenerateStart);
    }

    let mut trace = Vec::new();
    let record = |trace: &mut Vec<TracePoint>, it: usize, f: f64, x: &[f64]| {
        if cfg.trace {
            trace.push(TracePoint {
                iteration: it,
                density: f,
                support_size: x.iter().filter(|&&v| v > cfg.support_threshold).count(),
            });
        }
    };
    record(&mut trace, 0, f, &x);

    let mut iterations = 0;
    let mut delta = f64::INFINITY;
    let converged = loop {
        let residual = nz
            .iter()
            .filter(|&&i| x[i] > cfg.support_threshold)
            .map(|&i| (r[i] - f).abs())
            .fold(0.0, f64::max);
        if residual <= cfg.mode_tol && (iterations == 0 || delta < cfg.eps) {
            break true;
        }
        if iterations >= cfg.max_iter {
            break false;
        }
        for &i in &nz {
            x[i] *= r[i] / f;
        }
        nz.retain(|&i| x[i] != 0.0);
        let f_next = refresh(m, &x, &nz, &mut r);
        delta = (f_next - f).abs();
        f = f_next;
        iterations += 1;
        record(&mut trace, iterations, f, &x);
    };

    let mut certificate = is_mode_with_threshold(
        &SimplexVector::from_raw(x),
        m,
        cfg.mode_tol,
        cfg.support_threshold,
    )?;
    certificate.converged = converged;
    Ok(SeekResult {
        certificate,
        iterations,
        trace,
    })
}

/// Writes `(Mx)_i` for `i` in `nz` into `r` and returns `xᵀMx`.
fn refresh(m: &HyperedgeAdjacency, x: &[f64], nz: &[usize], r: &mut [f64]) -> f64 {
    let mut f = 0.0;
    for &i in nz {
        r[i] = m.row_dot_sparse(i, x, nz);
        f += x[i] * r[i];
    }
    f
}

/// Uniform start over the seed hyperedge and its positive-affinity
/// neighbors; `I_seed` when the seed is isolated.
pub fn initial_vector(m: &HyperedgeAdjacency, seed: usize) -> Result<SimplexVector> {
    if seed >= m.size() {
        return Err(Error::IndexOutOfRange {
            what: "hyperedge",
            index: seed,
            len: m.size(),
        });
    }
    let mut members: Vec<usize> = m.neighbors(seed).collect();
    members.push(seed);
    members.sort_unstable();
    SimplexVector::uniform_over(&members, m.size())
}
