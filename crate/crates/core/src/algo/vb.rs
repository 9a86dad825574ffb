//! The voxel-based algorithms: the gold-standard VB (every voxel tests every
//! point) and VB-DEC (points pre-binned so a voxel only tests candidates that
//! can pass the gate). VB is the oracle every other algorithm is validated
//! against; VB-DEC reproduces it bitwise.

use std::time::Instant;

use crate::counters::OpCounters;
use crate::error::Result;
use crate::grid::{GridSpec, Point};
use crate::kernel::{kernel_spatial, kernel_temporal, spatial_gate, temporal_gate};
use crate::stats::RunStats;
use crate::volume::DensityVolume;

use super::validate_points;

/// One (voxel, point) gate test and, on pass, the kernel product. Shared by
/// VB and VB-DEC so their per-voxel accumulation is bit-identical.
#[inline(always)]
fn pair_contribution(
    p: &Point,
    cx: f64,
    cy: f64,
    ct: f64,
    hs: f64,
    ht: f64,
    counters: &mut LocalCounters,
) -> f64 {
    counters.distance_tests += 1;
    let dx = p.x - cx;
    let dy = p.y - cy;
    let dt = p.t - ct;
    if spatial_gate(dx, dy, hs) && temporal_gate(dt, ht) {
        counters.kernel_evals += 1;
        kernel_spatial(dx.abs() / hs, dy.abs() / hs) * kernel_temporal(dt.abs() / ht)
    } else {
        0.0
    }
}

#[derive(Default)]
struct LocalCounters {
    distance_tests: u64,
    kernel_evals: u64,
}

/// Direct evaluation of the density definition at every voxel.
pub fn run_vb(points: &[Point], grid: &GridSpec) -> Result<(DensityVolume, RunStats)> {
    validate_points(points, grid)?;
    let mut stats = RunStats::new("vb", 1, points.len(), grid.num_voxels());

    let started = Instant::now();
    let mut volume = DensityVolume::zeroed(*grid);
    stats.init_seconds = started.elapsed().as_secs_f64();

    if !points.is_empty() {
        let started = Instant::now();
        let n = points.len();
        let denom = n as f64 * grid.hs * grid.hs * grid.ht;
        let mut local = LocalCounters::default();
        let mut idx = 0;
        for x in 0..grid.nx {
            let cx = grid.center_x(x);
            for y in 0..grid.ny {
                let cy = grid.center_y(y);
                for t in 0..grid.nt {
                    let ct = grid.center_t(t);
                    let mut sum = 0.0;
                    for p in points {
                        sum += pair_contribution(p, cx, cy, ct, grid.hs, grid.ht, &mut local);
                    }
                    volume.values[idx] = sum / denom;
                    idx += 1;
                }
            }
        }
        stats.counters = OpCounters {
            distance_tests: local.distance_tests,
            kernel_evals_spatial: local.kernel_evals,
            kernel_evals_temporal: local.kernel_evals,
            voxel_updates: grid.num_voxels() as u64,
        };
        stats.compute_seconds = started.elapsed().as_secs_f64();
    }
    stats.finish_total();
    Ok((volume, stats))
}

/// Bins of (H_s, H_s, H_t) voxels over the grid; a voxel's candidate points
/// live in its own bin and the 26 surrounding ones.
struct PointBins {
    nbx: usize,
    nby: usize,
    nbt: usize,
    bins: Vec<Vec<u32>>,
}

impl PointBins {
    fn build(points: &[Point], grid: &GridSpec) -> Result<Self> {
        let nbx = grid.nx.div_ceil(grid.hs_vox);
        let nby = grid.ny.div_ceil(grid.hs_vox);
        let nbt = grid.nt.div_ceil(grid.ht_vox);
        let mut bins = vec![Vec::new(); nbx * nby * nbt];
        for (i, p) in points.iter().enumerate() {
            let v = grid.point_to_voxel(p)?;
            let b = ((v.x / grid.hs_vox) * nby + v.y / grid.hs_vox) * nbt + v.t / grid.ht_vox;
            bins[b].push(i as u32);
        }
        Ok(PointBins { nbx, nby, nbt, bins })
    }

    /// Candidate point indices for every voxel of bin (bx, by, bt), in
    /// ascending input order (so accumulation visits points exactly as VB
    /// does).
    fn candidates(&self, bx: usize, by: usize, bt: usize, out: &mut Vec<u32>) {
        out.clear();
        for nx in bx.saturating_sub(1)..(bx + 2).min(self.nbx) {
            for ny in by.saturating_sub(1)..(by + 2).min(self.nby) {
                for nt in bt.saturating_sub(1)..(bt + 2).min(self.nbt) {
                    out.extend_from_slice(&self.bins[(nx * self.nby + ny) * self.nbt + nt]);
                }
            }
        }
        out.sort_unstable();
    }
}

/// VB restricted, per voxel, to the points within one bin-neighborhood.
/// Output is bitwise equal to [`run_vb`].
pub fn run_vb_dec(points: &[Point], grid: &GridSpec) -> Result<(DensityVolume, RunStats)> {
    validate_points(points, grid)?;
    let mut stats = RunStats::new("vb-dec", 1, points.len(), grid.num_voxels());

    let started = Instant::now();
    let mut volume = DensityVolume::zeroed(*grid);
    stats.init_seconds = started.elapsed().as_secs_f64();

    if !points.is_empty() {
        let started = Instant::now();
        let bins = PointBins::build(points, grid)?;
        stats.assign_seconds = started.elapsed().as_secs_f64();

        let started = Instant::now();
        let n = points.len();
        let denom = n as f64 * grid.hs * grid.hs * grid.ht;
        let mut local = LocalCounters::default();
        let mut updates = 0u64;
        let mut cands: Vec<u32> = Vec::new();
        for bx in 0..bins.nbx {
            for by in 0..bins.nby {
                for bt in 0..bins.nbt {
                    bins.candidates(bx, by, bt, &mut cands);
                    if cands.is_empty() {
                        continue;
                    }
                    let x1 = ((bx + 1) * grid.hs_vox).min(grid.nx);
                    let y1 = ((by + 1) * grid.hs_vox).min(grid.ny);
                    let t1 = ((bt + 1) * grid.ht_vox).min(grid.nt);
                    for x in bx * grid.hs_vox..x1 {
                        let cx = grid.center_x(x);
                        for y in by * grid.hs_vox..y1 {
                            let cy = grid.center_y(y);
                            for t in bt * grid.ht_vox..t1 {
                                let ct = grid.center_t(t);
                                let mut sum = 0.0;
                                for &pi in &cands {
                                    sum += pair_contribution(
                                        &points[pi as usize],
                                        cx,
                                        cy,
                                        ct,
                                        grid.hs,
                                        grid.ht,
                                        &mut local,
                                    );
                                }
                                let idx = volume.index(x, y, t);
                                volume.values[idx] = sum / denom;
                                updates += 1;
                            }
                        }
                    }
                }
            }
        }
        stats.counters = OpCounters {
            distance_tests: local.distance_tests,
            kernel_evals_spatial: local.kernel_evals,
            kernel_evals_temporal: local.kernel_evals,
            voxel_updates: updates,
        };
        stats.compute_seconds = started.elapsed().as_secs_f64();
    }
    stats.finish_total();
    Ok((volume, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::VoxelIndex;
    use std::f64::consts::PI;

    fn grid(n: usize, hs: f64, ht: f64) -> GridSpec {
        GridSpec::new((0.0, 0.0, 0.0), (n as f64, n as f64, n as f64), 1.0, 1.0, hs, ht).unwrap()
    }

    #[test]
    fn distance_test_count_is_voxels_times_points() {
        let g = grid(8, 2.0, 2.0);
        let points: Vec<Point> = (0..10)
            .map(|i| Point::new(0.5 + 0.7 * i as f64, 4.0, 4.0).unwrap())
            .collect();
        let (_, stats) = run_vb(&points, &g).unwrap();
        assert_eq!(stats.counters.distance_tests, 8 * 8 * 8 * 10);
        assert_eq!(stats.counters.voxel_updates, 512);
    }

    #[test]
    fn single_centered_point_density() {
        // A point on a voxel center contributes k_s(0,0)·k_t(0) there.
        let g = grid(9, 3.0, 2.0);
        let p = Point::new(4.5, 4.5, 4.5).unwrap();
        let (vol, _) = run_vb(&[p], &g).unwrap();
        let expect = (PI / 2.0) * 0.75 / (1.0 * g.hs * g.hs * g.ht);
        let got = vol.at(VoxelIndex { x: 4, y: 4, t: 4 });
        assert!((got - expect).abs() < 1e-15, "{got} vs {expect}");
    }

    #[test]
    fn empty_point_set_gives_zero_volume() {
        let g = grid(6, 2.0, 2.0);
        let (vol, stats) = run_vb(&[], &g).unwrap();
        assert!(vol.values.iter().all(|&v| v == 0.0));
        assert_eq!(stats.counters, OpCounters::default());
        let (vol, _) = run_vb_dec(&[], &g).unwrap();
        assert!(vol.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn vb_dec_matches_vb_bitwise_and_tests_fewer() {
        let g = grid(32, 2.0, 2.0);
        let p = Point::new(10.2, 20.7, 15.1).unwrap();
        let (vol_a, stats_a) = run_vb(&[p], &g).unwrap();
        let (vol_b, stats_b) = run_vb_dec(&[p], &g).unwrap();
        assert!(vol_a.bitwise_eq(&vol_b));
        // Only voxels within one bin-neighborhood of the point test it: with
        // 2-voxel bins that is at most 6 voxels per axis.
        assert!(stats_b.counters.distance_tests <= 6 * 6 * 6);
        assert!(stats_b.counters.distance_tests < stats_a.counters.distance_tests);
    }

    #[test]
    fn vb_reflection_symmetry_of_centered_point() {
        let g = grid(9, 2.5, 1.5);
        let p = Point::new(4.5, 4.5, 4.5).unwrap();
        let (vol, _) = run_vb(&[p], &g).unwrap();
        for x in 0..9 {
            for y in 0..9 {
                for t in 0..9 {
                    let a = vol.get(x, y, t);
                    let b = vol.get(8 - x, 8 - y, 8 - t);
                    assert!((a - b).abs() <= 1e-15);
                }
            }
        }
    }
}
