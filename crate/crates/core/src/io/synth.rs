//! Deterministic synthetic instance generation.
//!
//! Everything is driven by a SplitMix64 stream so identical parameters give
//! byte-identical point sets on every platform. Draw order, fixed by
//! contract:
//!
//! 1. `clusters` cluster centers, each 3 uniform draws (x, y, t);
//! 2. per point: 1 draw for the cluster choice (`next_u64 % clusters`),
//!    then two Box–Muller pairs — the first yields the x and y offsets, the
//!    second's cosine branch yields the t offset (its sine branch is
//!    discarded).
//!
//! The u64→(0,1] mapping is `(x >> 11) · 2⁻⁵³`, with 0 mapped to `2⁻⁵³`.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::grid::{next_down, GridSpec, Point};

/// SplitMix64 (Steele, Lea, Flood): a tiny, statistically solid, fully
/// portable generator.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in (0, 1]: `(x >> 11) · 2⁻⁵³`, zero mapped to `2⁻⁵³`.
    pub fn next_unit(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        let bits = self.next_u64() >> 11;
        if bits == 0 {
            SCALE
        } else {
            bits as f64 * SCALE
        }
    }

    /// One Box–Muller pair of standard normals.
    pub fn next_gaussian_pair(&mut self) -> (f64, f64) {
        let u1 = self.next_unit();
        let u2 = self.next_unit();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = TAU * u2;
        (r * theta.cos(), r * theta.sin())
    }
}

/// Generates `n` points in `clusters` Gaussian clusters inside the domain
/// box of `grid`, clamped into the half-open box. Deterministic in `seed`.
pub fn generate_synthetic(
    n: usize,
    clusters: usize,
    sigma_xy: f64,
    sigma_t: f64,
    grid: &GridSpec,
    seed: u64,
) -> Result<Vec<Point>> {
    if clusters < 1 {
        return Err(Error::validation("clusters", "must be >= 1"));
    }
    for (field, v) in [("sigma_xy", sigma_xy), ("sigma_t", sigma_t)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::validation(field, format!("must be >= 0, got {v}")));
        }
    }
    let mut rng = SplitMix64::new(seed);
    let (x0, y0, t0) = grid.origin;
    let (gx, gy, gt) = grid.extent;
    let centers: Vec<(f64, f64, f64)> = (0..clusters)
        .map(|_| {
            (
                x0 + rng.next_unit() * gx,
                y0 + rng.next_unit() * gy,
                t0 + rng.next_unit() * gt,
            )
        })
        .collect();

    let upper = grid.upper();
    let max_in = (next_down(upper.0), next_down(upper.1), next_down(upper.2));
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let c = centers[(rng.next_u64() % clusters as u64) as usize];
        let (zx, zy) = rng.next_gaussian_pair();
        let (zt, _) = rng.next_gaussian_pair();
        let p = Point::new(
            (c.0 + zx * sigma_xy).clamp(x0, max_in.0),
            (c.1 + zy * sigma_xy).clamp(y0, max_in.1),
            (c.2 + zt * sigma_t).clamp(t0, max_in.2),
        )
        .expect("clamped coordinates are finite");
        points.push(p);
    }
    Ok(points)
}
