//! The hypergraph shift loop: replicator mode seeking on the current
//! subhypergraph, alternated with probabilistic-voting expansion until the
//! mode passes the full first-order check.

use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hypergraph::{HyperedgeAdjacency, Hypergraph};
use crate::replicator::{seek_mode, SeekConfig};
use crate::simplex::{density, is_mode_with_threshold, ModeCertificate, SimplexVector};
use crate::voting::{
    direction_vector, dominant_seed_distribution, expansion_step, DEFAULT_SUBSET_CAP,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftConfig {
    pub seek: SeekConfig,
    /// Exact closeness recursion is used up to this support size.
    pub subset_cap: usize,
    /// Expansion cap; `None` means one expansion per hyperedge.
    pub max_expansions: Option<usize>,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        Self {
            seek: SeekConfig::default(),
            subset_cap: DEFAULT_SUBSET_CAP,
            max_expansions: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Seek,
    Expand,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Seek => "seek",
            Phase::Expand => "expand",
        })
    }
}

/// One accepted step of the shift.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryStep {
    pub step: usize,
    pub phase: Phase,
    pub density: f64,
    pub support_size: usize,
    /// Expansion steps only: the vertex step min(b/(−η), c_max).
    pub c_star: Option<f64>,
    /// Expansion steps only: b / F(p*).
    pub c_alternative: Option<f64>,
    /// Expansion steps only: the step actually taken.
    pub step_length: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// The final mode passes the first-order check on the whole hypergraph.
    GlobalMode,
    /// The start was an isolated hyperedge; λ = 0.
    Isolated,
    /// Expansion found no ascent; the certificate is local only.
    NoAscent,
    ExpansionCap,
}

#[derive(Debug, Clone)]
pub struct ShiftOutcome {
    pub certificate: ModeCertificate,
    pub trajectory: Vec<TrajectoryStep>,
    pub expansions: usize,
    pub replicator_iterations: usize,
    pub termination: Termination,
}

/// Runs the shift from `p0`. When `g` is given, seed adjacency in the
/// direction vector is decided by vertex overlap; otherwise by positive
/// affinity.
pub fn hypergraph_shift(
    m: &HyperedgeAdjacency,
    p0: &SimplexVector,
    g: Option<&Hypergraph>,
    cfg: &ShiftConfig,
) -> Result<ShiftOutcome> {
    if p0.len() != m.size() {
        return Err(Error::DimensionMismatch {
            expected: m.size(),
            found: p0.len(),
        });
    }
    if let Some(g) = g {
        if g.edge_count() != m.size() {
            return Err(Error::DimensionMismatch {
                expected: m.size(),
                found: g.edge_count(),
            });
        }
    }
    let seek_cfg = SeekConfig {
        trace: false,
        ..cfg.seek
    };
    let cap = cfg.max_expansions.unwrap_or(m.size());

    if density(p0, m)? == 0.0 {
        let nz = p0.nonzero();
        if nz.len() == 1 && m.neighbors(nz[0]).next().is_none() {
            let certificate =
                is_mode_with_threshold(p0, m, seek_cfg.mode_tol, seek_cfg.support_threshold)?;
            return Ok(ShiftOutcome {
                trajectory: vec![TrajectoryStep {
                    step: 0,
                    phase: Phase::Seek,
                    density: 0.0,
                    support_size: 1,
                    c_star: None,
                    c_alternative: None,
                    step_length: None,
                }],
                certificate,
                expansions: 0,
                replicator_iterations: 0,
                termination: Termination::Isolated,
            });
        }
        return Err(Error::DegenerateStart);
    }

    let mut seek = seek_mode(p0, m, &seek_cfg)?;
    let mut replicator_iterations = seek.iterations;
    let mut trajectory = vec![seek_step(0, &seek.certificate)];
    let mut expansions = 0;

    let termination = loop {
        let cert = &seek.certificate;
        if cert.is_global_mode {
            break Termination::GlobalMode;
        }
        if expansions >= cap {
            break Termination::ExpansionCap;
        }
        let seeds = dominant_seed_distribution(m, &cert.support, cfg.subset_cap)?;
        let h = direction_vector(&cert.mode, m, g, &seeds, cert)?;
        let expansion = expansion_step(&cert.mode, m, &h)?;
        if !expansion.improved {
            break Termination::NoAscent;
        }
        expansions += 1;
        let last = trajectory.last().map_or(f64::NEG_INFINITY, |s| s.density);
        // The mode search can return a point whose density equals the
        // expansion's up to rounding; only strict gains are recorded.
        if expansion.density_after > last {
            trajectory.push(TrajectoryStep {
                step: trajectory.len(),
                phase: Phase::Expand,
                density: expansion.density_after,
                support_size: expansion
                    .expanded
                    .as_slice()
                    .iter()
                    .filter(|&&x| x > seek_cfg.support_threshold)
                    .count(),
                c_star: Some(expansion.c_star),
                c_alternative: Some(expansion.c_alternative),
                step_length: Some(expansion.step),
            });
        }
        seek = seek_mode(&expansion.expanded, m, &seek_cfg)?;
        replicator_iterations += seek.iterations;
        let last = trajectory.last().map_or(f64::NEG_INFINITY, |s| s.density);
        if seek.certificate.lambda > last {
            trajectory.push(seek_step(trajectory.len(), &seek.certificate));
        }
    };

    Ok(ShiftOutcome {
        certificate: seek.certificate,
        trajectory,
        expansions,
        replicator_iterations,
        termination,
    })
}

fn seek_step(step: usize, cert: &ModeCertificate) -> TrajectoryStep {
    TrajectoryStep {
        step,
        phase: Phase::Seek,
        density: cert.lambda,
        support_size: cert.support.len(),
        c_star: None,
        c_alternative: None,
        step_length: None,
    }
}

/// Writes the trajectory as comma-separated text with a header row.
pub fn write_trajectory<W: Write>(mut w: W, steps: &[TrajectoryStep]) -> Result<()> {
    writeln!(w, "step,phase,F,support_size,c_star,c_alternative,step_length")?;
    let opt = |x: Option<f64>| x.map(|v| format!("{v:e}")).unwrap_or_default();
    for s in steps {
        writeln!(
            w,
            "{},{},{:e},{},{},{},{}",
            s.step,
            s.phase,
            s.density,
            s.support_size,
            opt(s.c_star),
            opt(s.c_alternative),
            opt(s.step_length)
        )?;
    }
    Ok(())
}
