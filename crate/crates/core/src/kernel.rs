//! The spatial and temporal kernel functions and the per-point invariant
//! planes used by the separable scatter algorithms.
//!
//! Gate conventions, identical in every algorithm of this crate:
//! - spatial: strict, `sqrt(dx² + dy²) < h_s`;
//! - temporal: inclusive, `|dt| ≤ h_t`;
//! - kernel arguments use absolute offsets, `u = |dx|/h_s`, `v = |dy|/h_s`,
//!   `w = |dt|/h_t`.

use std::f64::consts::FRAC_PI_2;

use crate::counters::OpCounters;
use crate::grid::{GridSpec, Point, VoxelBox};

/// Spatial distance-decay weight, `(π/2)·(1−u)²·(1−v)²`.
///
/// Total on all inputs; the caller applies the distance gate.
#[inline(always)]
pub fn kernel_spatial(u: f64, v: f64) -> f64 {
    let a = 1.0 - u;
    let b = 1.0 - v;
    FRAC_PI_2 * (a * a) * (b * b)
}

/// Temporal distance-decay weight, `(3/4)·(1−w)²`.
#[inline(always)]
pub fn kernel_temporal(w: f64) -> f64 {
    let a = 1.0 - w;
    0.75 * (a * a)
}

#[inline(always)]
pub(crate) fn spatial_gate(dx: f64, dy: f64, hs: f64) -> bool {
    (dx * dx + dy * dy).sqrt() < hs
}

#[inline(always)]
pub(crate) fn temporal_gate(dt: f64, ht: f64) -> bool {
    dt.abs() <= ht
}

/// Gated spatial weight for a voxel-center offset, 0 where the gate fails.
#[inline(always)]
pub(crate) fn gated_spatial(dx: f64, dy: f64, hs: f64) -> f64 {
    if spatial_gate(dx, dy, hs) {
        kernel_spatial(dx.abs() / hs, dy.abs() / hs)
    } else {
        0.0
    }
}

/// Gated temporal weight, 0 where the gate fails.
#[inline(always)]
pub(crate) fn gated_temporal(dt: f64, ht: f64) -> f64 {
    if temporal_gate(dt, ht) {
        kernel_temporal(dt.abs() / ht)
    } else {
        0.0
    }
}

/// The separable factors of one point's contribution: a temporally invariant
/// spatial plane `ks[x][y]` (normalization folded in) and a spatially
/// invariant temporal line `kt[t]`, both over the point's scatter window.
///
/// Entries are exactly 0 where the corresponding gate fails.
#[derive(Clone, Debug, Default)]
pub struct InvariantPlanes {
    pub ks: Vec<f64>,
    pub kt: Vec<f64>,
    /// The (clipped) window the planes cover.
    pub window: Option<VoxelBox>,
}

impl InvariantPlanes {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fills the planes for `point` over `window`, dividing the spatial plane
    /// by `denom` (the `n·h_s²·h_t` normalization). Counts one spatial kernel
    /// evaluation and one distance test per plane entry, and one temporal
    /// evaluation and test per line entry.
    pub fn build(
        &mut self,
        point: &Point,
        grid: &GridSpec,
        window: VoxelBox,
        denom: f64,
        counters: &mut OpCounters,
    ) {
        self.window = Some(window);
        self.ks.clear();
        self.kt.clear();
        if window.is_empty() {
            return;
        }
        let hs = grid.hs;
        let ht = grid.ht;
        self.ks.reserve(window.dx() * window.dy());
        for x in window.x0..window.x1 {
            let dx = grid.center_x(x) - point.x;
            for y in window.y0..window.y1 {
                let dy = grid.center_y(y) - point.y;
                let w = if spatial_gate(dx, dy, hs) {
                    kernel_spatial(dx.abs() / hs, dy.abs() / hs) / denom
                } else {
                    0.0
                };
                self.ks.push(w);
            }
        }
        self.kt.reserve(window.dt());
        for t in window.t0..window.t1 {
            let dt = grid.center_t(t) - point.t;
            self.kt.push(gated_temporal(dt, ht));
        }
        let plane = (window.dx() * window.dy()) as u64;
        let line = window.dt() as u64;
        counters.distance_tests += plane + line;
        counters.kernel_evals_spatial += plane;
        counters.kernel_evals_temporal += line;
    }
}


#[cfg(test)]
mod prop_tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        // Non-negative and monotone non-increasing in each argument on [0,1].
        #[test]
        fn kernels_decay(u in 0.0f64..=1.0, v in 0.0f64..=1.0, bump in 0.0f64..=1.0) {
            prop_assert!(kernel_spatial(u, v) >= 0.0);
            prop_assert!(kernel_temporal(u) >= 0.0);
            let u2 = (u + bump).min(1.0);
            prop_assert!(kernel_spatial(u2, v) <= kernel_spatial(u, v));
            prop_assert!(kernel_spatial(v, u2) <= kernel_spatial(v, u));
            prop_assert!(kernel_temporal(u2) <= kernel_temporal(u));
        }
    }
}
