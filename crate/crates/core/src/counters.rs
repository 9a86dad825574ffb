//! Operation counters backing the complexity accounting.
//!
//! Counting conventions (fixed so that the interior-point formulas are exact):
//!
//! - `distance_tests`: evaluations of a gate expression. The voxel-based
//!   algorithms and PB evaluate one combined spatial+temporal gate per
//!   (voxel, point) or scatter site; the invariant-plane builders evaluate
//!   one gate per plane/line entry.
//! - `kernel_evals_*`: kernel-factor computations per scatter/plane site.
//!   For the scatter family a gated site that yields 0 still counts as one
//!   evaluation (the work of visiting the site is done either way), so an
//!   interior point charges PB `(2H_s+1)²(2H_t+1)` of each, PB-DISK
//!   `(2H_s+1)²` spatial, PB-SYM `(2H_s+1)² + (2H_t+1)` combined. The
//!   voxel-based algorithms compute kernels only on gate pass and charge
//!   accordingly.
//! - `voxel_updates`: accumulations into the density target. PB updates only
//!   gate-passed sites; the PB-SYM family adds the (possibly zero) separable
//!   product at every clipped box site; VB stores once per voxel.

use serde::Serialize;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct OpCounters {
    pub distance_tests: u64,
    pub kernel_evals_spatial: u64,
    pub kernel_evals_temporal: u64,
    pub voxel_updates: u64,
}

impl OpCounters {
    pub fn merge(&mut self, other: &OpCounters) {
        self.distance_tests += other.distance_tests;
        self.kernel_evals_spatial += other.kernel_evals_spatial;
        self.kernel_evals_temporal += other.kernel_evals_temporal;
        self.voxel_updates += other.voxel_updates;
    }

    /// Total work proxy used for overhead ratios.
    pub fn work(&self) -> u64 {
        self.kernel_evals_spatial + self.kernel_evals_temporal + self.voxel_updates
    }
}
