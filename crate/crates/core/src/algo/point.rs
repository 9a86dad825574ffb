//! Work-efficient point decomposition. Points are bucketed into subdomains
//! large enough that non-adjacent buckets' scatter cylinders cannot overlap;
//! buckets then run concurrently without cutting any cylinder:
//!
//! - PB-SYM-PD processes the 8 parity classes of subdomains as sequential
//!   phases, same-parity subdomains in parallel;
//! - PB-SYM-PD-SCHED replaces the parity phases with a load-aware greedy
//!   coloring of the 27-stencil graph, executed as a dependency DAG;
//! - PB-SYM-PD-REP additionally splits the buckets on the critical path
//!   among replicas with private halo buffers to shorten the path.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::sync::Mutex;
use std::time::Instant;

use crate::counters::OpCounters;
use crate::error::{Error, Result};
use crate::exec::{pooled_for_each, run_dag, DagTasks, SharedVolume};
use crate::grid::{GridSpec, Point, VoxelBox};
use crate::kernel::InvariantPlanes;
use crate::stats::{RunStats, ScheduleStats};
use crate::volume::DensityVolume;

use super::domain::{chunk_bounds, Decomposition};
use super::pb::{scatter_point_sym, Accum, HaloAccum, SharedAccum};
use super::validate_points;

/// Shrinks a requested decomposition so every subdomain spans at least
/// `2H_s+1` voxels spatially and `2H_t+1` temporally, the separation that
/// makes non-adjacent buckets' write sets disjoint.
pub fn adjust_decomposition(requested: (usize, usize, usize), grid: &GridSpec) -> Decomposition {
    fn axis(req: usize, dim: usize, radius: usize) -> usize {
        req.max(1).min((dim / (2 * radius + 1)).max(1))
    }
    Decomposition {
        a: axis(requested.0, grid.nx, grid.hs_vox),
        b: axis(requested.1, grid.ny, grid.hs_vox),
        c: axis(requested.2, grid.nt, grid.ht_vox),
    }
}

fn validate_adjusted(dec: &Decomposition, grid: &GridSpec) -> Result<()> {
    let ok = |count: usize, dim: usize, radius: usize| {
        count == 1 || count <= (dim / (2 * radius + 1)).max(1)
    };
    if ok(dec.a, grid.nx, grid.hs_vox)
        && ok(dec.b, grid.ny, grid.hs_vox)
        && ok(dec.c, grid.nt, grid.ht_vox)
    {
        Ok(())
    } else {
        Err(Error::validation(
            "decomp",
            format!(
                "{}x{}x{} leaves subdomains smaller than twice the bandwidth; \
                 pass it through adjust_decomposition first",
                dec.a, dec.b, dec.c
            ),
        ))
    }
}

/// The 27-stencil subdomain graph: per-subdomain point buckets (weights),
/// adjacency between subdomains differing by at most one index per axis, and
/// a proper coloring that orients the dependency DAG from low to high color.
#[derive(Clone, Debug)]
pub struct SubdomainGraph {
    pub dims: (usize, usize, usize),
    /// Bucket sizes; the task weights.
    pub weights: Vec<u64>,
    /// Point indices per subdomain, in input order.
    pub buckets: Vec<Vec<u32>>,
    /// Proper coloring; empty until assigned.
    pub colors: Vec<u32>,
}

impl SubdomainGraph {
    /// Graph with given weights and no point buckets, for schedule analysis.
    pub fn from_weights(dims: (usize, usize, usize), weights: Vec<u64>) -> Self {
        assert_eq!(weights.len(), dims.0 * dims.1 * dims.2);
        let buckets = vec![Vec::new(); weights.len()];
        SubdomainGraph { dims, weights, buckets, colors: Vec::new() }
    }

    pub fn num_tasks(&self) -> usize {
        self.weights.len()
    }

    pub fn index(&self, a: usize, b: usize, c: usize) -> usize {
        (a * self.dims.1 + b) * self.dims.2 + c
    }

    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        (idx / (self.dims.1 * self.dims.2), (idx / self.dims.2) % self.dims.1, idx % self.dims.2)
    }

    /// 27-stencil neighbors (all subdomains differing by ≤ 1 per axis,
    /// excluding `idx`, no wraparound).
    pub fn neighbors(&self, idx: usize) -> Vec<usize> {
        let (a, b, c) = self.coords(idx);
        let mut out = Vec::with_capacity(26);
        for na in a.saturating_sub(1)..(a + 2).min(self.dims.0) {
            for nb in b.saturating_sub(1)..(b + 2).min(self.dims.1) {
                for nc in c.saturating_sub(1)..(c + 2).min(self.dims.2) {
                    let n = self.index(na, nb, nc);
                    if n != idx {
                        out.push(n);
                    }
                }
            }
        }
        out
    }

    /// Parity class of a subdomain in algorithm phase order:
    /// `4·(a mod 2) + 2·(b mod 2) + (c mod 2)`.
    pub fn parity_rank(&self, idx: usize) -> u32 {
        let (a, b, c) = self.coords(idx);
        (4 * (a % 2) + 2 * (b % 2) + (c % 2)) as u32
    }

    /// Colors every subdomain with its parity class, the checkerboard
    /// schedule PB-SYM-PD executes.
    pub fn color_by_parity(&mut self) {
        self.colors = (0..self.num_tasks()).map(|i| self.parity_rank(i)).collect();
    }

    /// Subdomain indices ordered by parity class, then index.
    pub fn parity_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.num_tasks()).collect();
        order.sort_unstable_by_key(|&i| (self.parity_rank(i), i));
        order
    }

    /// Subdomain indices by non-increasing weight, ties by ascending index.
    pub fn descending_weight_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.num_tasks()).collect();
        order.sort_unstable_by_key(|&i| (Reverse(self.weights[i]), i));
        order
    }

    /// Greedy coloring: visit subdomains in `order`, assigning the smallest
    /// color not used by an already-colored neighbor.
    pub fn greedy_color(&mut self, order: &[usize]) -> u32 {
        debug_assert_eq!(order.len(), self.num_tasks());
        let mut colors = vec![u32::MAX; self.num_tasks()];
        let mut max_color = 0;
        for &v in order {
            // Degree ≤ 26 bounds the palette at 27 colors; a u64 mask is room
            // to spare.
            let mut used = 0u64;
            for n in self.neighbors(v) {
                if colors[n] != u32::MAX {
                    used |= 1 << colors[n];
                }
            }
            let color = (!used).trailing_zeros();
            colors[v] = color;
            max_color = max_color.max(color);
        }
        self.colors = colors;
        max_color + 1
    }

    pub fn colors_used(&self) -> u32 {
        let mut seen = 0u64;
        for &c in &self.colors {
            seen |= 1 << c.min(63);
        }
        seen.count_ones()
    }

    /// No two adjacent subdomains share a color.
    pub fn coloring_is_proper(&self) -> bool {
        !self.colors.is_empty()
            && (0..self.num_tasks())
                .all(|v| self.neighbors(v).iter().all(|&n| self.colors[n] != self.colors[v]))
    }

    /// Dependency DAG from the coloring: each stencil edge oriented from the
    /// lower to the higher color. Returns successor lists and predecessor
    /// counts.
    pub fn dag(&self) -> (Vec<Vec<usize>>, Vec<usize>) {
        assert!(!self.colors.is_empty(), "color the graph before building the DAG");
        let n = self.num_tasks();
        let mut succs = vec![Vec::new(); n];
        let mut preds = vec![0usize; n];
        for v in 0..n {
            for u in self.neighbors(v) {
                if self.colors[v] < self.colors[u] {
                    succs[v].push(u);
                    preds[u] += 1;
                }
            }
        }
        (succs, preds)
    }

    /// Longest weight-inclusive chain in the color-oriented DAG, by dynamic
    /// programming in color order. Returns the chain weight and one maximal
    /// chain (deterministic tie-breaks).
    pub fn critical_path(&self, weights: &[f64]) -> (f64, Vec<usize>) {
        assert!(!self.colors.is_empty());
        let n = self.num_tasks();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_unstable_by_key(|&v| (self.colors[v], v));
        let mut dist = vec![0.0_f64; n];
        let mut parent: Vec<Option<usize>> = vec![None; n];
        for &v in &order {
            let mut best = 0.0;
            let mut best_parent = None;
            for u in self.neighbors(v) {
                if self.colors[u] < self.colors[v] && dist[u] > best {
                    best = dist[u];
                    best_parent = Some(u);
                }
            }
            dist[v] = weights[v] + best;
            parent[v] = best_parent;
        }
        let mut sink = 0;
        for v in 0..n {
            if dist[v] > dist[sink] {
                sink = v;
            }
        }
        let mut path = vec![sink];
        while let Some(p) = parent[*path.last().unwrap()] {
            path.push(p);
        }
        path.reverse();
        (dist[sink], path)
    }

    /// Event-driven greedy list-scheduling simulation of the colored graph on
    /// `workers` workers. Asserts Graham's bound.
    pub fn simulate_schedule(&self, workers: usize) -> ScheduleStats {
        let (succs, _) = self.dag();
        let (makespan, tinf, t1) = simulate_dag(&succs, &self.weights, workers);
        let p = workers.max(1) as f64;
        ScheduleStats {
            t1: t1 as f64,
            tinf: tinf as f64,
            makespan: makespan as f64,
            graham_bound: (t1 - tinf) as f64 / p + tinf as f64,
            colors_used: self.colors_used(),
        }
    }

    /// As [`Self::simulate_schedule`], but with every task expanded into its
    /// replica units (unit weights are the integer chunk sizes).
    pub fn simulate_replicated(&self, reps: &[u32], workers: usize) -> ScheduleStats {
        let (succs, _) = self.dag();
        let n = self.num_tasks();
        let mut unit_base = vec![0usize; n + 1];
        for t in 0..n {
            unit_base[t + 1] = unit_base[t] + reps[t].max(1) as usize;
        }
        let total_units = unit_base[n];
        let mut unit_weights = vec![0u64; total_units];
        for t in 0..n {
            let r = reps[t].max(1) as usize;
            let w = self.weights[t] as usize;
            for u in 0..r {
                let (lo, hi) = chunk_bounds(w, r, u);
                unit_weights[unit_base[t] + u] = (hi - lo) as u64;
            }
        }
        let mut unit_succs = vec![Vec::new(); total_units];
        for (t, ss) in succs.iter().enumerate() {
            for &s in ss {
                for u in unit_base[t]..unit_base[t + 1] {
                    for v in unit_base[s]..unit_base[s + 1] {
                        unit_succs[u].push(v);
                    }
                }
            }
        }
        let (makespan, tinf, t1) = simulate_dag(&unit_succs, &unit_weights, workers);
        let p = workers.max(1) as f64;
        ScheduleStats {
            t1: t1 as f64,
            tinf: tinf as f64,
            makespan: makespan as f64,
            graham_bound: (t1 - tinf) as f64 / p + tinf as f64,
            colors_used: self.colors_used(),
        }
    }
}

/// Buckets each point into the subdomain of its voxel (`⌊A·X/G_x⌋` per axis)
/// and returns the weighted, uncolored graph.
pub fn bucket_points(
    points: &[Point],
    grid: &GridSpec,
    dec: &Decomposition,
) -> Result<SubdomainGraph> {
    let mut graph =
        SubdomainGraph::from_weights((dec.a, dec.b, dec.c), vec![0; dec.count()]);
    for (i, p) in points.iter().enumerate() {
        let v = grid.point_to_voxel(p)?;
        let (a, b, c) = dec.bucket_of(grid, v);
        let idx = dec.index(a, b, c);
        graph.buckets[idx].push(i as u32);
        graph.weights[idx] += 1;
    }
    Ok(graph)
}

/// Greedy list-schedule simulation of an arbitrary DAG: a task becomes ready
/// when all predecessors complete, idle workers claim ready tasks by
/// descending weight (ties by ascending index). Returns
/// `(makespan, critical path, total work)` and asserts
/// `makespan ≤ (T1 − T∞)/P + T∞` exactly in integers.
pub fn simulate_dag(succs: &[Vec<usize>], weights: &[u64], workers: usize) -> (u64, u64, u64) {
    let n = succs.len();
    assert_eq!(weights.len(), n);
    let p = workers.max(1);
    let mut preds = vec![0usize; n];
    for ss in succs {
        for &s in ss {
            preds[s] += 1;
        }
    }
    // Longest chain by DP over a topological order.
    let mut topo: Vec<usize> = Vec::with_capacity(n);
    let mut indeg = preds.clone();
    let mut stack: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    while let Some(v) = stack.pop() {
        topo.push(v);
        for &s in &succs[v] {
            indeg[s] -= 1;
            if indeg[s] == 0 {
                stack.push(s);
            }
        }
    }
    assert_eq!(topo.len(), n, "dependency graph has a cycle");
    // dist[v] holds the heaviest incoming chain until v is processed, then
    // becomes weight-inclusive.
    let mut dist = vec![0u64; n];
    for &v in &topo {
        dist[v] += weights[v];
        for &s in &succs[v] {
            dist[s] = dist[s].max(dist[v]);
        }
    }
    let tinf = dist.iter().copied().max().unwrap_or(0);
    let t1: u64 = weights.iter().sum();

    // Ready tasks claimed heaviest-first; events processed in
    // (time, task index) order.
    let mut ready: BinaryHeap<(u64, Reverse<usize>)> = (0..n)
        .filter(|&v| preds[v] == 0)
        .map(|v| (weights[v], Reverse(v)))
        .collect();
    let mut running: BinaryHeap<Reverse<(u64, usize)>> = BinaryHeap::new();
    let mut remaining = preds;
    let mut idle = p;
    let mut now = 0u64;
    let mut makespan = 0u64;
    let mut done = 0usize;
    while done < n {
        while idle > 0 {
            match ready.pop() {
                Some((w, Reverse(v))) => {
                    running.push(Reverse((now + w, v)));
                    idle -= 1;
                }
                None => break,
            }
        }
        let Reverse((finish, v)) = running.pop().expect("ready task exists while work remains");
        now = finish;
        makespan = makespan.max(finish);
        idle += 1;
        done += 1;
        for &s in &succs[v] {
            remaining[s] -= 1;
            if remaining[s] == 0 {
                ready.push((weights[s], Reverse(s)));
            }
        }
    }
    assert!(makespan >= tinf);
    assert!(makespan as u128 * p as u128 >= t1 as u128);
    assert!(
        makespan as u128 * p as u128 <= (t1 - tinf) as u128 + tinf as u128 * p as u128,
        "greedy schedule violated Graham's bound"
    );
    (makespan, tinf, t1)
}

struct PhaseRun<'a, 'b> {
    points: &'a [Point],
    grid: &'a GridSpec,
    denom: f64,
    shared: &'a SharedVolume<'b>,
}

impl PhaseRun<'_, '_> {
    fn scatter_bucket(&self, bucket: &[u32], region: &VoxelBox, counters: &mut OpCounters) {
        let mut planes = InvariantPlanes::new();
        let mut acc = SharedAccum::new(self.shared, self.grid);
        for &pi in bucket {
            scatter_point_sym(
                &self.points[pi as usize],
                self.grid,
                self.denom,
                region,
                &mut planes,
                &mut acc,
                counters,
            );
        }
    }
}

/// PB-SYM-PD (checkerboard): 8 sequential parity phases; within a phase all
/// same-parity subdomains scatter concurrently, each over its bucket's full
/// grid-clipped cylinders. No cylinder is cut, so the operation counters
/// equal sequential PB-SYM's exactly, and the volume is bitwise identical
/// for any thread count.
pub fn run_pb_sym_pd(
    points: &[Point],
    grid: &GridSpec,
    dec: &Decomposition,
    threads: usize,
) -> Result<(DensityVolume, RunStats)> {
    validate_points(points, grid)?;
    validate_adjusted(dec, grid)?;
    let mut stats = RunStats::new("pb-sym-pd", threads.max(1), points.len(), grid.num_voxels())
        .with_decomposition(dec.a, dec.b, dec.c);

    let started = Instant::now();
    let mut graph = bucket_points(points, grid, dec)?;
    graph.color_by_parity();
    stats.assign_seconds = started.elapsed().as_secs_f64();

    let started = Instant::now();
    let mut volume = DensityVolume::zeroed(*grid);
    stats.init_seconds = started.elapsed().as_secs_f64();

    let started = Instant::now();
    if !points.is_empty() {
        let denom = points.len() as f64 * grid.hs * grid.hs * grid.ht;
        let shared = SharedVolume::new(&mut volume.values);
        let run = PhaseRun { points, grid, denom, shared: &shared };
        let region = grid.full_box();
        let task_counters: Vec<Mutex<OpCounters>> =
            (0..graph.num_tasks()).map(|_| Mutex::new(OpCounters::default())).collect();
        for phase in 0..8 {
            let tasks: Vec<usize> = (0..graph.num_tasks())
                .filter(|&t| graph.parity_rank(t) == phase && graph.weights[t] > 0)
                .collect();
            pooled_for_each(threads, tasks.len(), |i| {
                let t = tasks[i];
                let mut counters = OpCounters::default();
                run.scatter_bucket(&graph.buckets[t], &region, &mut counters);
                *task_counters[t].lock().unwrap() = counters;
            });
        }
        for c in task_counters {
            stats.counters.merge(&c.into_inner().unwrap());
        }
    }
    stats.compute_seconds = started.elapsed().as_secs_f64();
    stats.schedule = Some(graph.simulate_schedule(threads.max(1)));
    stats.finish_total();
    Ok((volume, stats))
}

struct SchedTasks<'a, 'b> {
    run: PhaseRun<'a, 'b>,
    graph: &'a SubdomainGraph,
    region: VoxelBox,
    succs: Vec<Vec<usize>>,
    preds: Vec<usize>,
    counters: Vec<Mutex<OpCounters>>,
}

impl DagTasks for SchedTasks<'_, '_> {
    fn num_tasks(&self) -> usize {
        self.graph.num_tasks()
    }
    fn successors(&self, task: usize) -> &[usize] {
        &self.succs[task]
    }
    fn predecessor_count(&self, task: usize) -> usize {
        self.preds[task]
    }
    fn weight(&self, task: usize) -> f64 {
        self.graph.weights[task] as f64
    }
    fn unit_count(&self, _task: usize) -> usize {
        1
    }
    fn run_unit(&self, task: usize, _unit: usize) {
        let mut counters = OpCounters::default();
        self.run.scatter_bucket(&self.graph.buckets[task], &self.region, &mut counters);
        self.counters[task].lock().unwrap().merge(&counters);
    }
    fn finish_task(&self, _task: usize) {}
}

/// PB-SYM-PD-SCHED: load-aware greedy coloring (heaviest subdomain first)
/// executed as a dependency DAG with heaviest-ready-first claiming.
pub fn run_pb_sym_pd_sched(
    points: &[Point],
    grid: &GridSpec,
    dec: &Decomposition,
    threads: usize,
) -> Result<(DensityVolume, RunStats)> {
    validate_points(points, grid)?;
    validate_adjusted(dec, grid)?;
    let mut stats =
        RunStats::new("pb-sym-pd-sched", threads.max(1), points.len(), grid.num_voxels())
            .with_decomposition(dec.a, dec.b, dec.c);

    let started = Instant::now();
    let mut graph = bucket_points(points, grid, dec)?;
    let order = graph.descending_weight_order();
    graph.greedy_color(&order);
    let (succs, preds) = graph.dag();
    stats.assign_seconds = started.elapsed().as_secs_f64();

    let started = Instant::now();
    let mut volume = DensityVolume::zeroed(*grid);
    stats.init_seconds = started.elapsed().as_secs_f64();

    let started = Instant::now();
    if !points.is_empty() {
        let denom = points.len() as f64 * grid.hs * grid.hs * grid.ht;
        let shared = SharedVolume::new(&mut volume.values);
        let tasks = SchedTasks {
            run: PhaseRun { points, grid, denom, shared: &shared },
            graph: &graph,
            region: grid.full_box(),
            succs,
            preds,
            counters: (0..graph.num_tasks()).map(|_| Mutex::new(OpCounters::default())).collect(),
        };
        run_dag(threads, &tasks);
        for c in tasks.counters {
            stats.counters.merge(&c.into_inner().unwrap());
        }
    }
    stats.compute_seconds = started.elapsed().as_secs_f64();
    stats.schedule = Some(graph.simulate_schedule(threads.max(1)));
    stats.finish_total();
    Ok((volume, stats))
}

/// Replication plan: per-task factors, chosen by repeatedly replicating every
/// positive-weight task on a current critical path while the path exceeds
/// `n/(2P)` and replication is not saturated at P.
fn plan_replication(graph: &SubdomainGraph, n: usize, workers: usize) -> Vec<u32> {
    let tasks = graph.num_tasks();
    let p = workers.max(1);
    let mut reps = vec![1u32; tasks];
    let threshold = n as f64 / (2.0 * p as f64);
    let eff = |reps: &[u32]| -> Vec<f64> {
        (0..tasks).map(|t| graph.weights[t] as f64 / reps[t] as f64).collect()
    };
    let (mut tinf, mut path) = graph.critical_path(&eff(&reps));
    let mut rounds = 0usize;
    while tinf > threshold {
        let cand: Vec<usize> = path
            .iter()
            .copied()
            .filter(|&t| graph.weights[t] > 0 && reps[t] < p as u32)
            .collect();
        if cand.is_empty() {
            break; // saturated: every productive task on the path is at P
        }
        for t in cand {
            reps[t] += 1;
        }
        let (new_tinf, new_path) = graph.critical_path(&eff(&reps));
        debug_assert!(new_tinf <= tinf);
        tinf = new_tinf;
        path = new_path;
        rounds += 1;
        assert!(rounds <= p * tasks + 1, "replication planning failed to terminate");
    }
    reps
}

struct RepTasks<'a, 'b> {
    run: PhaseRun<'a, 'b>,
    graph: &'a SubdomainGraph,
    grid: &'a GridSpec,
    region: VoxelBox,
    succs: Vec<Vec<usize>>,
    preds: Vec<usize>,
    reps: &'a [u32],
    halos: Vec<VoxelBox>,
    buffers: Vec<Vec<Mutex<Option<Vec<f64>>>>>,
    counters: Vec<Mutex<OpCounters>>,
}

impl DagTasks for RepTasks<'_, '_> {
    fn num_tasks(&self) -> usize {
        self.graph.num_tasks()
    }
    fn successors(&self, task: usize) -> &[usize] {
        &self.succs[task]
    }
    fn predecessor_count(&self, task: usize) -> usize {
        self.preds[task]
    }
    fn weight(&self, task: usize) -> f64 {
        self.graph.weights[task] as f64 / self.reps[task] as f64
    }
    fn unit_count(&self, task: usize) -> usize {
        self.reps[task] as usize
    }
    fn run_unit(&self, task: usize, unit: usize) {
        let bucket = &self.graph.buckets[task];
        let mut counters = OpCounters::default();
        if self.reps[task] == 1 {
            self.run.scatter_bucket(bucket, &self.region, &mut counters);
        } else {
            // Replica: private buffer over the subdomain dilated by the
            // bandwidth radii; reduction happens in finish_task.
            let halo = self.halos[task];
            let (lo, hi) = chunk_bounds(bucket.len(), self.reps[task] as usize, unit);
            let mut buf = vec![0.0_f64; halo.len()];
            let mut planes = InvariantPlanes::new();
            let mut acc = HaloAccum::new(&mut buf, halo);
            for &pi in &bucket[lo..hi] {
                scatter_point_sym(
                    &self.run.points[pi as usize],
                    self.run.grid,
                    self.run.denom,
                    &halo,
                    &mut planes,
                    &mut acc,
                    &mut counters,
                );
            }
            *self.buffers[task][unit].lock().unwrap() = Some(buf);
        }
        self.counters[task].lock().unwrap().merge(&counters);
    }
    fn finish_task(&self, task: usize) {
        let r = self.reps[task] as usize;
        if r < 2 {
            return;
        }
        // All replicas are done; fold their buffers into the shared volume in
        // ascending replica order. Neighbors are serialized by the DAG and
        // non-adjacent tasks' halos are disjoint, so these writes race with
        // nothing.
        let halo = self.halos[task];
        let mut acc = SharedAccum::new(self.run.shared, self.grid);
        for unit in 0..r {
            let buf = self.buffers[task][unit]
                .lock()
                .unwrap()
                .take()
                .expect("replica buffer present after unit completion");
            let mut i = 0;
            for x in halo.x0..halo.x1 {
                for y in halo.y0..halo.y1 {
                    for t in halo.t0..halo.t1 {
                        acc.add(x, y, t, buf[i]);
                        i += 1;
                    }
                }
            }
        }
        self.counters[task].lock().unwrap().voxel_updates += (r * halo.len()) as u64;
    }
}

/// PB-SYM-PD-REP: the SCHED coloring plus replication of critical-path
/// buckets. A task with factor r splits its bucket into r input-order chunks
/// scattered into private halo buffers, reduced into the shared volume in
/// ascending replica order once the last replica finishes.
pub fn run_pb_sym_pd_rep(
    points: &[Point],
    grid: &GridSpec,
    dec: &Decomposition,
    threads: usize,
    mem_budget: Option<u64>,
) -> Result<(DensityVolume, RunStats)> {
    validate_points(points, grid)?;
    validate_adjusted(dec, grid)?;
    let workers = threads.max(1);
    let mut stats = RunStats::new("pb-sym-pd-rep", workers, points.len(), grid.num_voxels())
        .with_decomposition(dec.a, dec.b, dec.c);

    let started = Instant::now();
    let mut graph = bucket_points(points, grid, dec)?;
    let order = graph.descending_weight_order();
    graph.greedy_color(&order);
    let (succs, preds) = graph.dag();
    let reps = plan_replication(&graph, points.len(), workers);
    let halos: Vec<VoxelBox> =
        (0..graph.num_tasks()).map(|t| dec.bucket_box(grid, t).dilate(grid)).collect();
    stats.assign_seconds = started.elapsed().as_secs_f64();

    let halo_bytes: u128 = (0..graph.num_tasks())
        .filter(|&t| reps[t] > 1)
        .map(|t| reps[t] as u128 * halos[t].len() as u128 * 8)
        .sum();
    let estimate = u64::try_from(halo_bytes).unwrap_or(u64::MAX);
    if let Some(budget) = mem_budget {
        if estimate > budget {
            return Err(Error::MemoryBudget { required: estimate, budget });
        }
    }
    stats.memory_estimate_bytes = Some(estimate);

    let started = Instant::now();
    let mut volume = DensityVolume::zeroed(*grid);
    stats.init_seconds = started.elapsed().as_secs_f64();

    let started = Instant::now();
    if !points.is_empty() {
        let denom = points.len() as f64 * grid.hs * grid.hs * grid.ht;
        let shared = SharedVolume::new(&mut volume.values);
        let tasks = RepTasks {
            run: PhaseRun { points, grid, denom, shared: &shared },
            graph: &graph,
            grid,
            region: grid.full_box(),
            succs,
            preds,
            reps: &reps,
            halos,
            buffers: reps
                .iter()
                .map(|&r| (0..r).map(|_| Mutex::new(None)).collect())
                .collect(),
            counters: (0..graph.num_tasks()).map(|_| Mutex::new(OpCounters::default())).collect(),
        };
        run_dag(threads, &tasks);
        for c in tasks.counters {
            stats.counters.merge(&c.into_inner().unwrap());
        }
    }
    stats.compute_seconds = started.elapsed().as_secs_f64();
    stats.schedule = Some(graph.simulate_replicated(&reps, workers));
    stats.replication_factors = Some(reps);
    stats.finish_total();
    Ok((volume, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algo::pb::{run_pb_sym, pb_sym_expected_counters};
    use crate::algo::vb::run_vb;
    use crate::io::synth::generate_synthetic;

    fn grid(n: usize, hs: f64, ht: f64) -> GridSpec {
        GridSpec::new((0.0, 0.0, 0.0), (n as f64, n as f64, n as f64), 1.0, 1.0, hs, ht).unwrap()
    }

    #[test]
    fn adjust_examples() {
        let g = grid(32, 4.0, 2.0); // H_s = 4 → spatial width 9
        let dec = adjust_decomposition((8, 8, 8), &g);
        assert_eq!(dec.a, 3);
        assert_eq!(dec.b, 3);
        assert_eq!(dec.c, 6); // 2H_t+1 = 5, 32/5 = 6
        // Minimum bucket width honors the safety margin.
        let min_width = (0..dec.a)
            .map(|a| {
                let b = dec.bucket_box(&g, dec.index(a, 0, 0));
                b.dx()
            })
            .min()
            .unwrap();
        assert!(min_width >= 9);
        let dec = adjust_decomposition((1, 1, 1), &g);
        assert_eq!((dec.a, dec.b, dec.c), (1, 1, 1));
        // An oversized request clamps to floor(G/(2H+1)).
        assert_eq!(super::adjust_decomposition((50, 1, 1), &grid(32, 0.5, 0.5)).a, 10);
    }

    #[test]
    fn bucket_examples() {
        let g = GridSpec::new((0.0, 0.0, 0.0), (148.0, 16.0, 16.0), 1.0, 1.0, 2.0, 2.0).unwrap();
        let dec = Decomposition { a: 4, b: 1, c: 1 };
        let v = crate::grid::VoxelIndex { x: 147, y: 0, t: 0 };
        assert_eq!(dec.bucket_of(&g, v).0, 3);

        // All points in one voxel land in one bucket.
        let g = grid(16, 2.0, 2.0);
        let dec = Decomposition { a: 2, b: 2, c: 2 };
        let pts: Vec<Point> = (0..10).map(|_| Point::new(3.3, 3.3, 3.3).unwrap()).collect();
        let graph = bucket_points(&pts, &g, &dec).unwrap();
        assert_eq!(graph.weights.iter().sum::<u64>(), 10);
        assert_eq!(graph.weights.iter().filter(|&&w| w > 0).count(), 1);

        // Against a brute-force bucketer on a spread-out set.
        let pts = generate_synthetic(200, 200, 0.0, 0.0, &g, 77).unwrap();
        let dec = Decomposition { a: 4, b: 4, c: 4 };
        let graph = bucket_points(&pts, &g, &dec).unwrap();
        let mut expect = vec![0u64; 64];
        for p in &pts {
            let v = g.point_to_voxel(p).unwrap();
            let (a, b, c) = (4 * v.x / 16, 4 * v.y / 16, 4 * v.t / 16);
            expect[(a * 4 + b) * 4 + c] += 1;
        }
        assert_eq!(graph.weights, expect);
    }

    #[test]
    fn greedy_coloring_chain_and_checkerboard() {
        let mut chain = SubdomainGraph::from_weights((3, 1, 1), vec![1, 1, 1]);
        let used = chain.greedy_color(&[0, 1, 2]);
        assert_eq!(used, 2);
        assert_eq!(chain.colors, vec![0, 1, 0]);
        assert!(chain.coloring_is_proper());

        // Heaviest-first on the weighted chain puts the heavy vertex first.
        let mut chain = SubdomainGraph::from_weights((3, 1, 1), vec![5, 9, 2]);
        let order = chain.descending_weight_order();
        assert_eq!(order, vec![1, 0, 2]);
        chain.greedy_color(&order);
        assert_eq!(chain.colors[1], 0);

        // Parity ordering reproduces the 8-color checkerboard.
        for dims in [(2, 2, 2), (3, 3, 3), (4, 3, 2)] {
            let count = dims.0 * dims.1 * dims.2;
            let mut g = SubdomainGraph::from_weights(dims, vec![1; count]);
            let used = g.greedy_color(&g.parity_order());
            assert_eq!(used, 8, "dims {dims:?}");
            assert!(g.coloring_is_proper());
        }
    }

    #[test]
    fn critical_path_examples() {
        let mut single = SubdomainGraph::from_weights((1, 1, 1), vec![7]);
        single.color_by_parity();
        let (tinf, path) = single.critical_path(&[7.0]);
        assert_eq!(tinf, 7.0);
        assert_eq!(path, vec![0]);

        let mut chain = SubdomainGraph::from_weights((3, 1, 1), vec![1, 10, 1]);
        chain.colors = vec![0, 1, 0];
        let (tinf, path) = chain.critical_path(&[1.0, 10.0, 1.0]);
        assert_eq!(tinf, 11.0);
        assert_eq!(path.len(), 2);
        assert!(path.contains(&1));

        // Equal weights on a checkerboard: chain length ≤ number of colors.
        let mut g = SubdomainGraph::from_weights((4, 4, 4), vec![3; 64]);
        g.color_by_parity();
        let weights: Vec<f64> = g.weights.iter().map(|&w| w as f64).collect();
        let (tinf, _) = g.critical_path(&weights);
        assert!(tinf <= 8.0 * 3.0);
    }

    #[test]
    fn simulator_examples() {
        // Independent unit tasks pack into ceil(count/P) slots.
        let succs = vec![Vec::new(); 10];
        let (makespan, tinf, t1) = simulate_dag(&succs, &vec![1; 10], 4);
        assert_eq!((makespan, tinf, t1), (3, 1, 10));

        // T1=10, T∞=4, P=2 → Graham bound 7; the greedy schedule stays under.
        let succs = vec![Vec::new(); 3];
        let (makespan, tinf, t1) = simulate_dag(&succs, &[4, 3, 3], 2);
        assert_eq!((tinf, t1), (4, 10));
        let graham = (t1 - tinf) as f64 / 2.0 + tinf as f64;
        assert_eq!(graham, 7.0);
        assert!(makespan as f64 <= graham);
        assert_eq!(makespan, 6);

        // An adjacent pair forms one chain: the simulator serializes it.
        let mut g = SubdomainGraph::from_weights((2, 1, 1), vec![4, 6]);
        g.colors = vec![0, 1];
        let s = g.simulate_schedule(2);
        assert_eq!(s.t1, 10.0);
        assert_eq!(s.tinf, 10.0);
        assert_eq!(s.makespan, 10.0);
        assert!(s.makespan <= s.graham_bound);
    }

    #[test]
    fn simulator_matches_exhaustive_greedy_optimum() {
        // 3×3 two-color checkerboard with unit weights on 2 workers: compare
        // the simulator against brute force over all greedy claim orders.
        let mut g = SubdomainGraph::from_weights((3, 3, 1), vec![1; 9]);
        g.color_by_parity();
        let (succs, preds) = g.dag();
        let best = exhaustive_greedy_min_makespan(&succs, &preds, &vec![1u64; 9], 2);
        let s = g.simulate_schedule(2);
        assert_eq!(s.makespan, best as f64);
    }

    /// Brute force over every greedy execution (workers never idle while a
    /// task is ready): minimum makespan.
    fn exhaustive_greedy_min_makespan(
        succs: &[Vec<usize>],
        preds: &[usize],
        weights: &[u64],
        workers: usize,
    ) -> u64 {
        #[derive(Clone)]
        struct State {
            remaining: Vec<usize>,
            running: Vec<(u64, usize)>, // (finish, task)
            ready: Vec<usize>,
            now: u64,
            makespan: u64,
            left: usize,
        }
        fn recurse(s: State, succs: &[Vec<usize>], weights: &[u64], workers: usize, best: &mut u64) {
            if s.left == 0 {
                *best = (*best).min(s.makespan);
                return;
            }
            if s.makespan >= *best && s.running.is_empty() && s.ready.is_empty() {
                return;
            }
            if s.running.len() < workers && !s.ready.is_empty() {
                for (i, &task) in s.ready.iter().enumerate() {
                    let mut next = s.clone();
                    next.ready.remove(i);
                    next.running.push((next.now + weights[task], task));
                    recurse(next, succs, weights, workers, best);
                }
            } else {
                let mut next = s.clone();
                let (min_idx, &(finish, task)) = next
                    .running
                    .iter()
                    .enumerate()
                    .min_by_key(|(_, &(f, t))| (f, t))
                    .unwrap();
                next.running.remove(min_idx);
                next.now = finish;
                next.makespan = next.makespan.max(finish);
                next.left -= 1;
                for &succ in &succs[task] {
                    next.remaining[succ] -= 1;
                    if next.remaining[succ] == 0 {
                        next.ready.push(succ);
                    }
                }
                recurse(next, succs, weights, workers, best);
            }
        }
        let ready: Vec<usize> = (0..preds.len()).filter(|&v| preds[v] == 0).collect();
        let mut best = u64::MAX;
        recurse(
            State {
                remaining: preds.to_vec(),
                running: Vec::new(),
                ready,
                now: 0,
                makespan: 0,
                left: preds.len(),
            },
            succs,
            weights,
            workers,
            &mut best,
        );
        best
    }

    #[test]
    fn pd_identity_is_bitwise_pb_sym() {
        let g = grid(16, 8.0, 8.0); // adjusted 1×1×1 (2H+1 = 17 > 16)
        let dec = adjust_decomposition((4, 4, 4), &g);
        assert_eq!((dec.a, dec.b, dec.c), (1, 1, 1));
        let pts = generate_synthetic(120, 2, 3.0, 3.0, &g, 4).unwrap();
        let (seq, _) = run_pb_sym(&pts, &g).unwrap();
        let (pd, _) = run_pb_sym_pd(&pts, &g, &dec, 2).unwrap();
        assert!(seq.bitwise_eq(&pd));
    }

    #[test]
    fn pd_write_sets_of_same_phase_tasks_are_disjoint() {
        let g = grid(20, 2.0, 1.0);
        let dec = adjust_decomposition((4, 4, 4), &g);
        // Two points two subdomains apart along x.
        let p0 = Point::new(1.0, 1.0, 1.0).unwrap();
        let p1 = Point::new(11.0, 1.0, 1.0).unwrap();
        let b0 = g.scatter_box(g.point_to_voxel(&p0).unwrap());
        let b1 = g.scatter_box(g.point_to_voxel(&p1).unwrap());
        assert!(b0.intersect(&b1).is_empty());
        let graph = bucket_points(&[p0, p1], &g, &dec).unwrap();
        let hot: Vec<usize> = (0..graph.num_tasks()).filter(|&t| graph.weights[t] > 0).collect();
        assert_eq!(hot.len(), 2);
        assert_eq!(graph.parity_rank(hot[0]), graph.parity_rank(hot[1]));
    }

    #[test]
    fn pd_and_sched_match_oracle_and_keep_pb_sym_counters() {
        let g = grid(24, 3.0, 2.0);
        let pts = generate_synthetic(300, 3, 2.0, 2.0, &g, 31).unwrap();
        let (oracle, _) = run_vb(&pts, &g).unwrap();
        let expected = pb_sym_expected_counters(&pts, &g).unwrap();
        let dec = adjust_decomposition((3, 3, 3), &g);
        for run in [run_pb_sym_pd, run_pb_sym_pd_sched] {
            let (vol, stats) = run(&pts, &g, &dec, 2).unwrap();
            let (_, rel) = oracle.diff_from(&vol);
            assert!(rel <= 1e-12, "rel diff {rel}");
            assert_eq!(stats.counters, expected);
        }
    }

    #[test]
    fn sched_uniform_weights_behave_like_checkerboard() {
        let g = grid(24, 2.0, 2.0);
        // One point per subdomain keeps weights exactly uniform.
        let dec = adjust_decomposition((4, 4, 4), &g);
        let mut pts = Vec::new();
        for a in 0..dec.a {
            for b in 0..dec.b {
                for c in 0..dec.c {
                    let bx = dec.bucket_box(&g, dec.index(a, b, c));
                    pts.push(
                        Point::new(bx.x0 as f64 + 0.5, bx.y0 as f64 + 0.5, bx.t0 as f64 + 0.5)
                            .unwrap(),
                    );
                }
            }
        }
        let mut checker = bucket_points(&pts, &g, &dec).unwrap();
        checker.color_by_parity();
        let mut sched = bucket_points(&pts, &g, &dec).unwrap();
        let order = sched.descending_weight_order();
        sched.greedy_color(&order);
        assert_eq!(checker.colors_used(), sched.colors_used());
        let w: Vec<f64> = checker.weights.iter().map(|&x| x as f64).collect();
        let (t_checker, _) = checker.critical_path(&w);
        let (t_sched, _) = sched.critical_path(&w);
        assert!((t_checker - t_sched).abs() <= 1.0);
    }

    #[test]
    fn sched_all_points_in_one_subdomain() {
        let g = grid(20, 2.0, 1.0);
        let dec = adjust_decomposition((4, 4, 4), &g);
        let pts: Vec<Point> = (0..50).map(|_| Point::new(1.1, 1.1, 1.1).unwrap()).collect();
        let (_, stats) = run_pb_sym_pd_sched(&pts, &g, &dec, 2).unwrap();
        assert_eq!(stats.schedule.unwrap().tinf, 50.0);
    }

    #[test]
    fn rep_without_replication_is_bitwise_sched() {
        // One point per subdomain: Tinf ≤ 8 (the color count) and
        // n/(2P) = 64/8 = 8, so the replication loop never fires.
        let g = grid(24, 2.0, 2.0);
        let dec = adjust_decomposition((4, 4, 4), &g);
        let mut pts = Vec::new();
        for idx in 0..dec.count() {
            let b = dec.bucket_box(&g, idx);
            pts.push(
                Point::new(b.x0 as f64 + 0.5, b.y0 as f64 + 0.5, b.t0 as f64 + 0.5).unwrap(),
            );
        }
        let (sched, _) = run_pb_sym_pd_sched(&pts, &g, &dec, 4).unwrap();
        let (rep, stats) = run_pb_sym_pd_rep(&pts, &g, &dec, 4, None).unwrap();
        assert!(stats.replication_factors.unwrap().iter().all(|&r| r == 1));
        assert!(sched.bitwise_eq(&rep));
    }

    #[test]
    fn rep_saturates_on_single_hot_bucket() {
        let g = grid(48, 2.0, 2.0);
        let dec = adjust_decomposition((4, 4, 4), &g);
        let pts: Vec<Point> = (0..400).map(|_| Point::new(2.2, 2.2, 2.2).unwrap()).collect();
        let (vol, stats) = run_pb_sym_pd_rep(&pts, &g, &dec, 4, None).unwrap();
        let reps = stats.replication_factors.unwrap();
        assert_eq!(*reps.iter().max().unwrap(), 4);
        let schedule = stats.schedule.unwrap();
        // n/P = 100 > n/(2P) = 50: saturation, not convergence.
        assert_eq!(schedule.tinf, 100.0);
        let (oracle, _) = run_vb(&pts, &g).unwrap();
        let (_, rel) = oracle.diff_from(&vol);
        assert!(rel <= 1e-12);
    }

    #[test]
    fn rep_forced_replication_matches_oracle() {
        let g = grid(20, 2.0, 1.0);
        let dec = adjust_decomposition((4, 4, 4), &g);
        let mut pts: Vec<Point> = (0..200).map(|_| Point::new(6.3, 6.1, 6.2).unwrap()).collect();
        pts.extend(generate_synthetic(40, 40, 0.0, 0.0, &g, 3).unwrap());
        let (vol, stats) = run_pb_sym_pd_rep(&pts, &g, &dec, 4, None).unwrap();
        assert!(stats.replication_factors.unwrap().iter().any(|&r| r > 1));
        let (oracle, _) = run_vb(&pts, &g).unwrap();
        let (_, rel) = oracle.diff_from(&vol);
        assert!(rel <= 1e-12, "rel {rel}");
    }

    #[test]
    fn rep_memory_budget_refusal() {
        let g = grid(20, 2.0, 1.0);
        let dec = adjust_decomposition((4, 4, 4), &g);
        let pts: Vec<Point> = (0..100).map(|_| Point::new(6.3, 6.1, 6.2).unwrap()).collect();
        let err = run_pb_sym_pd_rep(&pts, &g, &dec, 4, Some(16)).unwrap_err();
        assert!(matches!(err, Error::MemoryBudget { .. }));
    }

    #[test]
    fn pd_rejects_unadjusted_decomposition() {
        let g = grid(16, 4.0, 4.0);
        let dec = Decomposition { a: 8, b: 1, c: 1 };
        assert!(run_pb_sym_pd(&[], &g, &dec, 1).is_err());
    }

    #[test]
    fn pd_bitwise_across_thread_counts() {
        let g = grid(24, 2.0, 2.0);
        let pts = generate_synthetic(400, 3, 2.0, 2.0, &g, 99).unwrap();
        let dec = adjust_decomposition((4, 4, 4), &g);
        let (v1, _) = run_pb_sym_pd(&pts, &g, &dec, 1).unwrap();
        let (v8, _) = run_pb_sym_pd(&pts, &g, &dec, 8).unwrap();
        assert!(v1.bitwise_eq(&v8));
        let (s1, _) = run_pb_sym_pd_sched(&pts, &g, &dec, 1).unwrap();
        let (s8, _) = run_pb_sym_pd_sched(&pts, &g, &dec, 8).unwrap();
        assert!(s1.bitwise_eq(&s8));
    }
}
