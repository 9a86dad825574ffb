//! The point-based ladder: PB scatters each point's gated contribution over
//! its bandwidth box; PB-DISK hoists the spatial plane out of the temporal
//! loop; PB-BAR hoists the temporal line; PB-SYM hoists both and scatters the
//! separable product. All four clip scatter boxes to the grid and share the
//! gate and kernel conventions of [`crate::kernel`], so they agree with the
//! voxel-based oracle up to summation order.

use std::time::Instant;

use crate::counters::OpCounters;
use crate::error::Result;
use crate::exec::SharedVolume;
use crate::grid::{GridSpec, Point, VoxelBox};
use crate::kernel::{
    gated_spatial, gated_temporal, kernel_spatial, kernel_temporal, spatial_gate, temporal_gate,
    InvariantPlanes,
};
use crate::stats::RunStats;
use crate::volume::DensityVolume;

use super::validate_points;

/// Destination of scatter accumulations. Monomorphized per target so the
/// inner loops stay branch-free.
pub(crate) trait Accum {
    fn add(&mut self, x: usize, y: usize, t: usize, v: f64);
}

/// Plain accumulation into an exclusively owned volume.
pub(crate) struct VolumeAccum<'a> {
    values: &'a mut [f64],
    ny: usize,
    nt: usize,
}

impl<'a> VolumeAccum<'a> {
    pub fn new(volume: &'a mut DensityVolume) -> Self {
        let ny = volume.grid.ny;
        let nt = volume.grid.nt;
        VolumeAccum { values: &mut volume.values, ny, nt }
    }

    /// For private copies that are not wrapped in a [`DensityVolume`].
    pub fn from_parts(values: &'a mut [f64], ny: usize, nt: usize) -> Self {
        VolumeAccum { values, ny, nt }
    }
}

impl Accum for VolumeAccum<'_> {
    #[inline(always)]
    fn add(&mut self, x: usize, y: usize, t: usize, v: f64) {
        self.values[(x * self.ny + y) * self.nt + t] += v;
    }
}

/// Accumulation into the shared volume under a geometric-disjointness
/// contract (see [`SharedVolume`]).
pub(crate) struct SharedAccum<'a, 'b> {
    volume: &'a SharedVolume<'b>,
    ny: usize,
    nt: usize,
}

impl<'a, 'b> SharedAccum<'a, 'b> {
    pub fn new(volume: &'a SharedVolume<'b>, grid: &GridSpec) -> Self {
        SharedAccum { volume, ny: grid.ny, nt: grid.nt }
    }
}

impl Accum for SharedAccum<'_, '_> {
    #[inline(always)]
    fn add(&mut self, x: usize, y: usize, t: usize, v: f64) {
        // SAFETY: the caller guarantees disjoint (x, y, t) sets across
        // concurrent workers; the index is in bounds because scatter windows
        // are clipped to the grid.
        unsafe { self.volume.add((x * self.ny + y) * self.nt + t, v) }
    }
}

/// Accumulation into a private buffer covering only `window` (replica halo
/// buffers), laid out like the volume but with the window's local origin.
pub(crate) struct HaloAccum<'a> {
    buf: &'a mut [f64],
    window: VoxelBox,
    dy: usize,
    dt: usize,
}

impl<'a> HaloAccum<'a> {
    pub fn new(buf: &'a mut [f64], window: VoxelBox) -> Self {
        debug_assert_eq!(buf.len(), window.len());
        let dy = window.dy();
        let dt = window.dt();
        HaloAccum { buf, window, dy, dt }
    }
}

impl Accum for HaloAccum<'_> {
    #[inline(always)]
    fn add(&mut self, x: usize, y: usize, t: usize, v: f64) {
        debug_assert!(self.window.contains(x, y, t));
        let idx = ((x - self.window.x0) * self.dy + (y - self.window.y0)) * self.dt
            + (t - self.window.t0);
        self.buf[idx] += v;
    }
}

/// One point of PB-SYM: build the invariant planes over the point's scatter
/// box clipped to `region`, then add the separable products. This is the
/// kernel every parallel driver reuses; restricting `region` is what the
/// domain-decomposed variant does, passing the full grid keeps the work
/// identical to sequential PB-SYM.
pub(crate) fn scatter_point_sym(
    p: &Point,
    grid: &GridSpec,
    denom: f64,
    region: &VoxelBox,
    planes: &mut InvariantPlanes,
    acc: &mut impl Accum,
    counters: &mut OpCounters,
) {
    let v = grid.point_to_voxel(p).expect("points are validated before scatter");
    let window = grid.scatter_box(v).intersect(region);
    if window.is_empty() {
        return;
    }
    planes.build(p, grid, window, denom, counters);
    let mut ks_i = 0;
    for x in window.x0..window.x1 {
        for y in window.y0..window.y1 {
            let ksv = planes.ks[ks_i];
            ks_i += 1;
            let mut kt_i = 0;
            for t in window.t0..window.t1 {
                acc.add(x, y, t, ksv * planes.kt[kt_i]);
                kt_i += 1;
            }
        }
    }
    counters.voxel_updates += window.len() as u64;
}

/// The counters a full-grid PB-SYM pass produces, computed from the clipped
/// window geometry alone (no scatter). Used as the exact 1×1×1 baseline for
/// decomposition overhead ratios.
pub(crate) fn pb_sym_expected_counters(points: &[Point], grid: &GridSpec) -> Result<OpCounters> {
    let mut c = OpCounters::default();
    for p in points {
        let window = grid.scatter_box(grid.point_to_voxel(p)?);
        let plane = (window.dx() * window.dy()) as u64;
        let line = window.dt() as u64;
        c.distance_tests += plane + line;
        c.kernel_evals_spatial += plane;
        c.kernel_evals_temporal += line;
        c.voxel_updates += window.len() as u64;
    }
    Ok(c)
}

/// Caller-provided-region form of PB-SYM: accumulates the points' clipped
/// contributions into `volume` without zeroing it first. `norm_n` is the
/// point count used in the `1/(n·h_s²·h_t)` normalization, which the parallel
/// drivers keep global while splitting the points.
pub fn accumulate_pb_sym(
    points: &[Point],
    grid: &GridSpec,
    norm_n: usize,
    region: VoxelBox,
    volume: &mut DensityVolume,
    counters: &mut OpCounters,
) -> Result<()> {
    validate_points(points, grid)?;
    if norm_n == 0 {
        return Ok(());
    }
    let denom = norm_n as f64 * grid.hs * grid.hs * grid.ht;
    let mut planes = InvariantPlanes::new();
    let mut acc = VolumeAccum::new(volume);
    for p in points {
        scatter_point_sym(p, grid, denom, &region, &mut planes, &mut acc, counters);
    }
    Ok(())
}

fn new_run(algorithm: &str, points: &[Point], grid: &GridSpec) -> RunStats {
    RunStats::new(algorithm, 1, points.len(), grid.num_voxels())
}

/// PB (Algorithm 2): direct gated scatter, both kernels evaluated at every
/// box site.
pub fn run_pb(points: &[Point], grid: &GridSpec) -> Result<(DensityVolume, RunStats)> {
    validate_points(points, grid)?;
    let mut stats = new_run("pb", points, grid);

    let started = Instant::now();
    let mut volume = DensityVolume::zeroed(*grid);
    stats.init_seconds = started.elapsed().as_secs_f64();

    if !points.is_empty() {
        let started = Instant::now();
        let denom = points.len() as f64 * grid.hs * grid.hs * grid.ht;
        let hs = grid.hs;
        let ht = grid.ht;
        let mut sites = 0u64;
        let mut updates = 0u64;
        let mut acc = VolumeAccum::new(&mut volume);
        for p in points {
            let w = grid.scatter_box(grid.point_to_voxel(p)?);
            sites += w.len() as u64;
            for x in w.x0..w.x1 {
                let dx = grid.center_x(x) - p.x;
                for y in w.y0..w.y1 {
                    let dy = grid.center_y(y) - p.y;
                    for t in w.t0..w.t1 {
                        let dt = grid.center_t(t) - p.t;
                        if spatial_gate(dx, dy, hs) && temporal_gate(dt, ht) {
                            let ks = kernel_spatial(dx.abs() / hs, dy.abs() / hs);
                            let kt = kernel_temporal(dt.abs() / ht);
                            acc.add(x, y, t, ks * kt / denom);
                            updates += 1;
                        }
                    }
                }
            }
        }
        stats.counters = OpCounters {
            distance_tests: sites,
            kernel_evals_spatial: sites,
            kernel_evals_temporal: sites,
            voxel_updates: updates,
        };
        stats.compute_seconds = started.elapsed().as_secs_f64();
    }
    stats.finish_total();
    Ok((volume, stats))
}

/// PB-DISK: the spatial plane is computed once per point and reused across
/// the temporal layers; the temporal kernel is still evaluated per site.
pub fn run_pb_disk(points: &[Point], grid: &GridSpec) -> Result<(DensityVolume, RunStats)> {
    validate_points(points, grid)?;
    let mut stats = new_run("pb-disk", points, grid);

    let started = Instant::now();
    let mut volume = DensityVolume::zeroed(*grid);
    stats.init_seconds = started.elapsed().as_secs_f64();

    if !points.is_empty() {
        let started = Instant::now();
        let denom = points.len() as f64 * grid.hs * grid.hs * grid.ht;
        let hs = grid.hs;
        let ht = grid.ht;
        let mut c = OpCounters::default();
        let mut plane: Vec<f64> = Vec::new();
        let mut acc = VolumeAccum::new(&mut volume);
        for p in points {
            let w = grid.scatter_box(grid.point_to_voxel(p)?);
            plane.clear();
            for x in w.x0..w.x1 {
                let dx = grid.center_x(x) - p.x;
                for y in w.y0..w.y1 {
                    let dy = grid.center_y(y) - p.y;
                    plane.push(gated_spatial(dx, dy, hs));
                }
            }
            let plane_len = (w.dx() * w.dy()) as u64;
            let box_len = w.len() as u64;
            c.distance_tests += plane_len + box_len;
            c.kernel_evals_spatial += plane_len;
            c.kernel_evals_temporal += box_len;
            c.voxel_updates += box_len;
            let mut i = 0;
            for x in w.x0..w.x1 {
                for y in w.y0..w.y1 {
                    let ksv = plane[i];
                    i += 1;
                    for t in w.t0..w.t1 {
                        let dt = grid.center_t(t) - p.t;
                        acc.add(x, y, t, ksv * gated_temporal(dt, ht) / denom);
                    }
                }
            }
        }
        stats.counters = c;
        stats.compute_seconds = started.elapsed().as_secs_f64();
    }
    stats.finish_total();
    Ok((volume, stats))
}

/// PB-BAR: the temporal line is computed once per point; the spatial kernel
/// is still evaluated per site.
pub fn run_pb_bar(points: &[Point], grid: &GridSpec) -> Result<(DensityVolume, RunStats)> {
    validate_points(points, grid)?;
    let mut stats = new_run("pb-bar", points, grid);

    let started = Instant::now();
    let mut volume = DensityVolume::zeroed(*grid);
    stats.init_seconds = started.elapsed().as_secs_f64();

    if !points.is_empty() {
        let started = Instant::now();
        let denom = points.len() as f64 * grid.hs * grid.hs * grid.ht;
        let hs = grid.hs;
        let ht = grid.ht;
        let mut c = OpCounters::default();
        let mut line: Vec<f64> = Vec::new();
        let mut acc = VolumeAccum::new(&mut volume);
        for p in points {
            let w = grid.scatter_box(grid.point_to_voxel(p)?);
            line.clear();
            for t in w.t0..w.t1 {
                let dt = grid.center_t(t) - p.t;
                line.push(gated_temporal(dt, ht));
            }
            let line_len = w.dt() as u64;
            let box_len = w.len() as u64;
            c.distance_tests += line_len + box_len;
            c.kernel_evals_spatial += box_len;
            c.kernel_evals_temporal += line_len;
            c.voxel_updates += box_len;
            for x in w.x0..w.x1 {
                let dx = grid.center_x(x) - p.x;
                for y in w.y0..w.y1 {
                    let dy = grid.center_y(y) - p.y;
                    let ksv = gated_spatial(dx, dy, hs);
                    let mut i = 0;
                    for t in w.t0..w.t1 {
                        acc.add(x, y, t, ksv * line[i] / denom);
                        i += 1;
                    }
                }
            }
        }
        stats.counters = c;
        stats.compute_seconds = started.elapsed().as_secs_f64();
    }
    stats.finish_total();
    Ok((volume, stats))
}

/// PB-SYM (Algorithm 3): both invariants computed once per point, the scatter
/// adds their products unconditionally.
pub fn run_pb_sym(points: &[Point], grid: &GridSpec) -> Result<(DensityVolume, RunStats)> {
    validate_points(points, grid)?;
    let mut stats = new_run("pb-sym", points, grid);

    let started = Instant::now();
    let mut volume = DensityVolume::zeroed(*grid);
    stats.init_seconds = started.elapsed().as_secs_f64();

    if !points.is_empty() {
        let started = Instant::now();
        let mut counters = OpCounters::default();
        accumulate_pb_sym(points, grid, points.len(), grid.full_box(), &mut volume, &mut counters)?;
        stats.counters = counters;
        stats.compute_seconds = started.elapsed().as_secs_f64();
    }
    stats.finish_total();
    Ok((volume, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algo::vb::run_vb;
    use crate::grid::VoxelIndex;
    use crate::io::synth::generate_synthetic;
    use std::f64::consts::PI;

    fn grid(n: usize, hs: f64, ht: f64) -> GridSpec {
        GridSpec::new((0.0, 0.0, 0.0), (n as f64, n as f64, n as f64), 1.0, 1.0, hs, ht).unwrap()
    }

    #[test]
    fn pb_interior_scatter_iterations() {
        // An unclipped box is (2H_s+1)²·(2H_t+1) sites.
        let g = grid(16, 3.0, 1.0);
        let p = Point::new(8.1, 8.3, 8.2).unwrap();
        let (_, stats) = run_pb(&[p], &g).unwrap();
        assert_eq!(stats.counters.distance_tests, 147);
        assert_eq!(stats.counters.kernel_evals_spatial, 147);
        assert_eq!(stats.counters.kernel_evals_temporal, 147);
        assert!(stats.counters.voxel_updates <= 147);
    }

    #[test]
    fn disk_and_bar_hoist_one_invariant() {
        let g = grid(24, 3.0, 5.0);
        let p = Point::new(12.1, 12.3, 12.2).unwrap();
        let (_, disk) = run_pb_disk(&[p], &g).unwrap();
        assert_eq!(disk.counters.kernel_evals_spatial, 49);
        assert_eq!(disk.counters.kernel_evals_temporal, 49 * 11);
        let (_, bar) = run_pb_bar(&[p], &g).unwrap();
        assert_eq!(bar.counters.kernel_evals_temporal, 11);
        assert_eq!(bar.counters.kernel_evals_spatial, 49 * 11);
    }

    #[test]
    fn sym_interior_eval_counts() {
        let g = grid(24, 3.0, 5.0);
        let p = Point::new(12.1, 12.3, 12.2).unwrap();
        let (_, sym) = run_pb_sym(&[p], &g).unwrap();
        assert_eq!(sym.counters.kernel_evals_spatial, 49);
        assert_eq!(sym.counters.kernel_evals_temporal, 11);
        assert_eq!(sym.counters.voxel_updates, 49 * 11);
        let expected = pb_sym_expected_counters(&[p], &g).unwrap();
        assert_eq!(sym.counters, expected);
    }

    #[test]
    fn sym_centered_point_density() {
        // With the point on a voxel center, that voxel gets exactly
        // (π/2)(3/4) / (h_s²·h_t).
        let g = grid(9, 3.0, 2.0);
        let p = Point::new(4.5, 4.5, 4.5).unwrap();
        let (vol, _) = run_pb_sym(&[p], &g).unwrap();
        let expect = 3.0 * PI / 8.0 / (g.hs * g.hs * g.ht);
        let got = vol.at(VoxelIndex { x: 4, y: 4, t: 4 });
        assert!((got - expect).abs() < 1e-15);
    }

    #[test]
    fn ladder_matches_oracle() {
        let g = grid(16, 2.6, 1.7);
        let points =
            generate_synthetic(100, 3, 2.0, 2.0, &g, 11).expect("valid generator parameters");
        let (oracle, _) = run_vb(&points, &g).unwrap();
        for run in [run_pb, run_pb_disk, run_pb_bar, run_pb_sym] {
            let (vol, _) = run(&points, &g).unwrap();
            let (_, rel) = oracle.diff_from(&vol);
            assert!(rel <= 1e-12, "rel diff {rel}");
        }
    }

    #[test]
    fn pb_family_reflection_symmetry_is_bitwise() {
        let g = grid(9, 2.5, 1.5);
        let p = Point::new(4.5, 4.5, 4.5).unwrap();
        for run in [run_pb, run_pb_disk, run_pb_bar, run_pb_sym] {
            let (vol, _) = run(&[p], &g).unwrap();
            for x in 0..9 {
                for y in 0..9 {
                    for t in 0..9 {
                        let a = vol.get(x, y, t).to_bits();
                        let b = vol.get(8 - x, 8 - y, 8 - t).to_bits();
                        assert_eq!(a, b);
                    }
                }
            }
        }
    }

    #[test]
    fn support_is_confined_to_passing_voxels() {
        let g = grid(20, 2.2, 1.4);
        let p = Point::new(5.3, 7.9, 11.2).unwrap();
        let (vol, _) = run_pb_sym(&[p], &g).unwrap();
        for x in 0..g.nx {
            let dx = g.center_x(x) - p.x;
            for y in 0..g.ny {
                let dy = g.center_y(y) - p.y;
                for t in 0..g.nt {
                    let dt = g.center_t(t) - p.t;
                    let passes = spatial_gate(dx, dy, g.hs) && temporal_gate(dt, g.ht);
                    if !passes {
                        assert_eq!(vol.get(x, y, t), 0.0, "voxel ({x},{y},{t})");
                    }
                }
            }
        }
    }

    #[test]
    fn empty_point_set() {
        let g = grid(8, 2.0, 2.0);
        for run in [run_pb, run_pb_disk, run_pb_bar, run_pb_sym] {
            let (vol, stats) = run(&[], &g).unwrap();
            assert!(vol.values.iter().all(|&v| v == 0.0));
            assert_eq!(stats.counters, OpCounters::default());
        }
    }
}
