use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::{Error, Result};

use super::PointSet;

pub const CRESCENT_COUNT: usize = 5;

/// Five half-annuli of radius `radius`, centers `spacing · radius` apart
/// along x, alternately opening down and up; the odd ones are raised by
/// `offset · radius` so neighbors interleave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrescentLayout {
    pub radius: f64,
    pub spacing: f64,
    pub offset: f64,
}

impl Default for CrescentLayout {
    fn default() -> Self {
        Self {
            radius: 30.0,
            spacing: 1.3,
            offset: 0.3,
        }
    }
}

/// `n_points` points split as evenly as possible over five crescents (the
/// first `n % 5` get one extra), each coordinate perturbed by
/// `N(0, noise_sigma²)`. Deterministic in `seed`.
pub fn gen_crescents(n_points: usize, noise_sigma: f64, seed: u64) -> Result<PointSet> {
    gen_crescents_with(n_points, noise_sigma, seed, &CrescentLayout::default())
}

pub fn gen_crescents_with(
    n_points: usize,
    noise_sigma: f64,
    seed: u64,
    layout: &CrescentLayout,
) -> Result<PointSet> {
    if n_points < 50 {
        return Err(Error::InvalidParameter(format!(
            "n_points = {n_points} must be at least 50"
        )));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise sigma {noise_sigma} must be finite and nonnegative"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let r = layout.radius;
    let mut points = Vec::with_capacity(n_points);
    let mut labels = Vec::with_capacity(n_points);
    for c in 0..CRESCENT_COUNT {
        let count = n_points / CRESCENT_COUNT + usize::from(c < n_points % CRESCENT_COUNT);
        let cx = c as f64 * layout.spacing * r;
        for _ in 0..count {
            let t: f64 = rng.random_range(0.0..std::f64::consts::PI);
            let (mut x, mut y) = if c % 2 == 0 {
                (cx + r * t.cos(), r * t.sin())
            } else {
                (cx + r * t.cos(), layout.offset * r - r * t.sin())
            };
            if noise_sigma > 0.0 {
                x += noise.sample(&mut rng);
                y += noise.sample(&mut rng);
            }
            points.push([x, y]);
            labels.push(c);
        }
    }
    PointSet::new(points, Some(labels))
}
