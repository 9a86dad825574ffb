//! Pleasingly-parallel strategies that trade extra work or memory for
//! independence: full-domain replication (PB-SYM-DR) and A×B×C domain
//! decomposition (PB-SYM-DD).

use std::sync::Mutex;
use std::time::Instant;

use crate::counters::OpCounters;
use crate::error::{Error, Result};
use crate::exec::{pooled_for_each, SharedVolume};
use crate::grid::{GridSpec, Point, VoxelBox, VoxelIndex};
use crate::kernel::InvariantPlanes;
use crate::stats::RunStats;
use crate::volume::DensityVolume;

use super::pb::{pb_sym_expected_counters, scatter_point_sym, SharedAccum, VolumeAccum};
use super::validate_points;

/// A×B×C split of the grid into subdomains.
///
/// Two different voxel↔subdomain mappings hang off this type and must not be
/// mixed up:
/// - the *ownership ranges* used by domain decomposition,
///   `[⌊a·G/A⌋, ⌊(a+1)·G/A⌋)`, half-open with floor on both ends so that the
///   ranges partition the grid (double-owned seam voxels would break the
///   disjoint-write argument);
/// - the *bucket mapping* used by point decomposition, `a = ⌊A·X/G⌋`, whose
///   implied ranges are `[⌈a·G/A⌉, ⌈(a+1)·G/A⌉)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Decomposition {
    pub a: usize,
    pub b: usize,
    pub c: usize,
}

impl Decomposition {
    pub fn new(a: usize, b: usize, c: usize, grid: &GridSpec) -> Result<Self> {
        for (field, count, dim) in
            [("decomp.a", a, grid.nx), ("decomp.b", b, grid.ny), ("decomp.c", c, grid.nt)]
        {
            if count < 1 || count > dim {
                return Err(Error::validation(
                    field,
                    format!("must be in [1, {dim}], got {count}"),
                ));
            }
        }
        Ok(Decomposition { a, b, c })
    }

    pub fn count(&self) -> usize {
        self.a * self.b * self.c
    }

    pub fn index(&self, a: usize, b: usize, c: usize) -> usize {
        (a * self.b + b) * self.c + c
    }

    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        (idx / (self.b * self.c), (idx / self.c) % self.b, idx % self.c)
    }

    fn floor_bounds(i: usize, count: usize, dim: usize) -> (usize, usize) {
        (i * dim / count, (i + 1) * dim / count)
    }

    fn ceil_bounds(i: usize, count: usize, dim: usize) -> (usize, usize) {
        ((i * dim).div_ceil(count), ((i + 1) * dim).div_ceil(count))
    }

    /// Ownership box of subdomain `idx` under the floor/floor ranges.
    pub fn owned_box(&self, grid: &GridSpec, idx: usize) -> VoxelBox {
        let (a, b, c) = self.coords(idx);
        let (x0, x1) = Self::floor_bounds(a, self.a, grid.nx);
        let (y0, y1) = Self::floor_bounds(b, self.b, grid.ny);
        let (t0, t1) = Self::floor_bounds(c, self.c, grid.nt);
        VoxelBox { x0, x1, y0, y1, t0, t1 }
    }

    /// Index of the subdomain owning voxel coordinate `x` along an axis with
    /// `count` subdomains over `dim` voxels (floor/floor ranges).
    fn owner(x: usize, count: usize, dim: usize) -> usize {
        ((x + 1) * count).div_ceil(dim) - 1
    }

    /// Bucket of a voxel under the point-decomposition mapping ⌊A·X/G⌋.
    pub fn bucket_of(&self, grid: &GridSpec, v: VoxelIndex) -> (usize, usize, usize) {
        (self.a * v.x / grid.nx, self.b * v.y / grid.ny, self.c * v.t / grid.nt)
    }

    /// Voxel box of bucket `idx` (the ceil/ceil ranges implied by
    /// [`Self::bucket_of`]).
    pub fn bucket_box(&self, grid: &GridSpec, idx: usize) -> VoxelBox {
        let (a, b, c) = self.coords(idx);
        let (x0, x1) = Self::ceil_bounds(a, self.a, grid.nx);
        let (y0, y1) = Self::ceil_bounds(b, self.b, grid.ny);
        let (t0, t1) = Self::ceil_bounds(c, self.c, grid.nt);
        VoxelBox { x0, x1, y0, y1, t0, t1 }
    }
}

/// Contiguous split of `0..n` into `parts` chunks of equal size ±1.
pub(crate) fn chunk_bounds(n: usize, parts: usize, i: usize) -> (usize, usize) {
    (i * n / parts, (i + 1) * n / parts)
}

/// Bytes of density copies PB-SYM-DR needs: `P · G_x · G_y · G_t · 8`.
pub fn dr_memory_estimate(grid: &GridSpec, threads: usize) -> u64 {
    let vox = grid.num_voxels() as u128;
    let bytes = vox * threads.max(1) as u128 * 8;
    u64::try_from(bytes).unwrap_or(u64::MAX)
}

/// Domain replication: each worker accumulates a contiguous chunk of the
/// points into a private full-size copy of the volume; the copies are then
/// summed in ascending worker order. Bitwise-reproducible for a fixed worker
/// count.
pub fn run_pb_sym_dr(
    points: &[Point],
    grid: &GridSpec,
    threads: usize,
    mem_budget: Option<u64>,
) -> Result<(DensityVolume, RunStats)> {
    validate_points(points, grid)?;
    let workers = threads.max(1);
    let estimate = dr_memory_estimate(grid, workers);
    if let Some(budget) = mem_budget {
        if estimate > budget {
            return Err(Error::MemoryBudget { required: estimate, budget });
        }
    }
    let mut stats = RunStats::new("pb-sym-dr", workers, points.len(), grid.num_voxels());
    stats.memory_estimate_bytes = Some(estimate);

    let len = grid.num_voxels();
    let n = points.len();

    let started = Instant::now();
    let mut copies: Vec<Vec<f64>> = Vec::with_capacity(workers);
    if workers == 1 {
        copies.push(vec![0.0; len]);
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> =
                (0..workers).map(|_| scope.spawn(|| vec![0.0_f64; len])).collect();
            for h in handles {
                copies.push(h.join().expect("init worker panicked"));
            }
        });
    }
    stats.init_seconds = started.elapsed().as_secs_f64();

    let started = Instant::now();
    if n > 0 {
        let denom = n as f64 * grid.hs * grid.hs * grid.ht;
        let region = grid.full_box();
        let mut worker_counters: Vec<OpCounters> = Vec::with_capacity(workers);
        std::thread::scope(|scope| {
            let handles: Vec<_> = copies
                .iter_mut()
                .enumerate()
                .map(|(w, copy)| {
                    scope.spawn(move || {
                        let (lo, hi) = chunk_bounds(n, workers, w);
                        let mut counters = OpCounters::default();
                        let mut planes = InvariantPlanes::new();
                        let mut acc = VolumeAccum::from_parts(copy, grid.ny, grid.nt);
                        for p in &points[lo..hi] {
                            scatter_point_sym(
                                p,
                                grid,
                                denom,
                                &region,
                                &mut planes,
                                &mut acc,
                                &mut counters,
                            );
                        }
                        counters
                    })
                })
                .collect();
            for h in handles {
                worker_counters.push(h.join().expect("compute worker panicked"));
            }
        });
        for c in &worker_counters {
            stats.counters.merge(c);
        }
    }
    stats.compute_seconds = started.elapsed().as_secs_f64();

    // Reduction: every output voxel sums the copies in ascending worker
    // order, parallelized over disjoint output slices.
    let started = Instant::now();
    let mut volume = DensityVolume::zeroed(*grid);
    let slice_len = len.div_ceil(workers);
    std::thread::scope(|scope| {
        for (s, out) in volume.values.chunks_mut(slice_len.max(1)).enumerate() {
            let copies = &copies;
            scope.spawn(move || {
                let base = s * slice_len;
                for (i, slot) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for copy in copies {
                        acc += copy[base + i];
                    }
                    *slot = acc;
                }
            });
        }
    });
    stats.reduce_seconds = started.elapsed().as_secs_f64();
    stats.finish_total();
    Ok((volume, stats))
}

/// Per-subdomain point lists for domain decomposition: a point is assigned to
/// every subdomain its scatter box intersects, in input order.
pub fn assign_points_dd(
    points: &[Point],
    grid: &GridSpec,
    dec: &Decomposition,
) -> Result<Vec<Vec<u32>>> {
    let mut lists = vec![Vec::new(); dec.count()];
    for (i, p) in points.iter().enumerate() {
        let v = grid.point_to_voxel(p)?;
        let sub = |lo: usize, hi: usize, count: usize, dim: usize| {
            (Decomposition::owner(lo, count, dim), Decomposition::owner(hi, count, dim))
        };
        let (a0, a1) = sub(
            v.x.saturating_sub(grid.hs_vox),
            (v.x + grid.hs_vox).min(grid.nx - 1),
            dec.a,
            grid.nx,
        );
        let (b0, b1) = sub(
            v.y.saturating_sub(grid.hs_vox),
            (v.y + grid.hs_vox).min(grid.ny - 1),
            dec.b,
            grid.ny,
        );
        let (c0, c1) = sub(
            v.t.saturating_sub(grid.ht_vox),
            (v.t + grid.ht_vox).min(grid.nt - 1),
            dec.c,
            grid.nt,
        );
        for a in a0..=a1 {
            for b in b0..=b1 {
                for c in c0..=c1 {
                    lists[dec.index(a, b, c)].push(i as u32);
                }
            }
        }
    }
    Ok(lists)
}

/// Domain decomposition: subdomains own disjoint voxel ranges of the shared
/// volume and are processed as a dynamic task pool, largest point list first.
/// A point whose cylinder straddles subdomains is processed once per
/// subdomain with the scatter clipped to the owned range, which re-computes
/// part of the invariants; the resulting work inflation is reported as
/// `work_overhead_ratio`.
pub fn run_pb_sym_dd(
    points: &[Point],
    grid: &GridSpec,
    dec: &Decomposition,
    threads: usize,
) -> Result<(DensityVolume, RunStats)> {
    validate_points(points, grid)?;
    let mut stats = RunStats::new("pb-sym-dd", threads.max(1), points.len(), grid.num_voxels())
        .with_decomposition(dec.a, dec.b, dec.c);

    let started = Instant::now();
    let lists = assign_points_dd(points, grid, dec)?;
    let mut order: Vec<usize> = (0..dec.count()).collect();
    order.sort_unstable_by_key(|&s| (std::cmp::Reverse(lists[s].len()), s));
    stats.assign_seconds = started.elapsed().as_secs_f64();

    let started = Instant::now();
    let mut volume = DensityVolume::zeroed(*grid);
    stats.init_seconds = started.elapsed().as_secs_f64();

    let started = Instant::now();
    let n = points.len();
    if n > 0 {
        let denom = n as f64 * grid.hs * grid.hs * grid.ht;
        let shared = SharedVolume::new(&mut volume.values);
        let task_counters: Vec<Mutex<OpCounters>> =
            (0..order.len()).map(|_| Mutex::new(OpCounters::default())).collect();
        pooled_for_each(threads, order.len(), |i| {
            let sub = order[i];
            let region = dec.owned_box(grid, sub);
            let mut counters = OpCounters::default();
            let mut planes = InvariantPlanes::new();
            let mut acc = SharedAccum::new(&shared, grid);
            for &pi in &lists[sub] {
                scatter_point_sym(
                    &points[pi as usize],
                    grid,
                    denom,
                    &region,
                    &mut planes,
                    &mut acc,
                    &mut counters,
                );
            }
            *task_counters[i].lock().unwrap() = counters;
        });
        for c in task_counters {
            stats.counters.merge(&c.into_inner().unwrap());
        }
    }
    stats.compute_seconds = started.elapsed().as_secs_f64();

    let base = pb_sym_expected_counters(points, grid)?.work();
    stats.work_overhead_ratio =
        Some(if base == 0 { 1.0 } else { stats.counters.work() as f64 / base as f64 });
    stats.finish_total();
    Ok((volume, stats))
}
